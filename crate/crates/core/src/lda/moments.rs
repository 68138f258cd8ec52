use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::sketch::SymTensorSketchSet;
use crate::tensor::{DenseTensor3, FactoredTensor, DEFAULT_MEMORY_CAP};

use super::corpus::Corpus;

/// Smallest admissible `k`-th eigenvalue of the moment matrix.
pub const RANK_TOL: f64 = 1e-10;

/// Empirical first moment: the average over non-empty documents of their
/// normalized word frequencies.
pub fn compute_m1(c: &Corpus) -> Result<Vec<f64>> {
    let mut m1 = vec![0.0; c.vocab_size()];
    let mut used = 0usize;
    for d in c.docs() {
        let m = d.len();
        if m == 0 {
            continue;
        }
        used += 1;
        for &(w, n) in d.words() {
            m1[w] += n as f64 / m as f64;
        }
    }
    if used == 0 {
        return Err(Error::param("corpus has no non-empty documents"));
    }
    m1.iter_mut().for_each(|x| *x /= used as f64);
    Ok(m1)
}

/// Within-document pair moment `E[x1 (x) x2]`, averaging
/// `(n n^T - diag(n)) / (m (m - 1))` over documents with `m >= 2`.
pub fn pair_moment(c: &Corpus) -> Result<DMatrix<f64>> {
    let v = c.vocab_size();
    let mut e2 = DMatrix::zeros(v, v);
    let mut used = 0usize;
    for d in c.docs() {
        let m = d.len();
        if m < 2 {
            continue;
        }
        used += 1;
        let s = 1.0 / (m * (m - 1)) as f64;
        for &(i, ni) in d.words() {
            for &(j, nj) in d.words() {
                let nn = if i == j { ni as f64 * (ni as f64 - 1.0) } else { ni as f64 * nj as f64 };
                e2[(i, j)] += s * nn;
            }
        }
    }
    if used == 0 {
        return Err(Error::param("every document is shorter than two words"));
    }
    e2 /= used as f64;
    Ok(e2)
}

/// `M2 = E[x1 (x) x2] - alpha0 / (alpha0 + 1) M1 M1^T`.
pub fn compute_m2(c: &Corpus, alpha0: f64) -> Result<DMatrix<f64>> {
    let m1 = DVector::from_vec(compute_m1(c)?);
    let mut m2 = pair_moment(c)?;
    m2.ger(-alpha0 / (alpha0 + 1.0), &m1, &m1, 1.0);
    Ok(m2)
}

/// Whitening map `W = U_k S_k^{-1/2}` from the top-`k` eigenpairs of a
/// symmetric moment matrix, with `W^T M2 W = I_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct WhiteningMap {
    w: DMatrix<f64>,
    unwhiten: DMatrix<f64>,
    eigenvalues: Vec<f64>,
}

impl WhiteningMap {
    #[cfg(test)]
    pub(crate) fn from_parts(w: DMatrix<f64>, unwhiten: DMatrix<f64>, eigenvalues: Vec<f64>) -> Self {
        WhiteningMap { w, unwhiten, eigenvalues }
    }

    /// `V x k` whitening matrix.
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.w
    }

    /// `(W^+)^T = U_k S_k^{1/2}`, mapping whitened vectors back.
    pub fn unwhiten(&self) -> &DMatrix<f64> {
        &self.unwhiten
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn k(&self) -> usize {
        self.w.ncols()
    }

    pub fn vocab_size(&self) -> usize {
        self.w.nrows()
    }

    /// `W^T x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.w.tr_mul(&DVector::from_column_slice(x)).iter().copied().collect()
    }

    /// Row `i` of `W`.
    pub fn row(&self, i: usize) -> Vec<f64> {
        self.w.row(i).iter().copied().collect()
    }
}

pub fn whiten(m2: &DMatrix<f64>, k: usize) -> Result<WhiteningMap> {
    let v = m2.nrows();
    if m2.ncols() != v {
        return Err(Error::dim(v, m2.ncols()));
    }
    if k == 0 || k > v {
        return Err(Error::param(format!("cannot whiten to {k} dimensions from {v}")));
    }
    let eig = SymmetricEigen::new(m2.clone());
    let mut order: Vec<usize> = (0..v).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let mut w = DMatrix::zeros(v, k);
    let mut un = DMatrix::zeros(v, k);
    let mut vals = Vec::with_capacity(k);
    for (c, &idx) in order.iter().take(k).enumerate() {
        let s = eig.eigenvalues[idx];
        if !(s > RANK_TOL) {
            return Err(Error::RankDeficient { index: c, value: s });
        }
        let mut u = eig.eigenvectors.column(idx).clone_owned();
        // Fix the sign so the largest-magnitude entry is positive.
        let pivot = u.iamax();
        if u[pivot] < 0.0 {
            u.neg_mut();
        }
        w.set_column(c, &(&u / s.sqrt()));
        un.set_column(c, &(&u * s.sqrt()));
        vals.push(s);
    }
    Ok(WhiteningMap { w, unwhiten: un, eigenvalues: vals })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct M3Summary {
    /// Documents contributing to the triple term (`m_d >= 3`).
    pub docs_used: usize,
    /// Documents skipped for being shorter than three words.
    pub docs_skipped: usize,
    /// Symmetric rank-1 terms in the factored moment.
    pub components: usize,
}

/// `sym(a, a, r) = a(x)a(x)r + a(x)r(x)a + r(x)a(x)a` as symmetric rank-1
/// terms: `((a + r)^3 - (a - r)^3) / 2 - r^3`.
fn push_sym_aar(t: &mut FactoredTensor, weight: f64, a: &[f64], r: &[f64]) -> Result<()> {
    let plus: Vec<f64> = a.iter().zip(r).map(|(x, y)| x + y).collect();
    let minus: Vec<f64> = a.iter().zip(r).map(|(x, y)| x - y).collect();
    t.push_symmetric(0.5 * weight, plus)?;
    t.push_symmetric(-0.5 * weight, minus)?;
    t.push_symmetric(-weight, r.to_vec())
}

/// Whitened empirical third moment `M3(W, W, W)` as a sum of symmetric
/// rank-1 terms:
///
/// * one `p_d^(x)3` term per document (`p_d = W^T n_d`) for the triple
///   moment, whose per-word corrections are accumulated over the pass and
///   added once per vocabulary word;
/// * the symmetrized cross term built from the whitened pair moment and
///   `q = W^T M1`;
/// * the `q^(x)3` term.
pub fn whitened_m3_factored(c: &Corpus, w: &WhiteningMap, alpha0: f64) -> Result<(FactoredTensor, M3Summary)> {
    if w.vocab_size() != c.vocab_size() {
        return Err(Error::dim(w.vocab_size(), c.vocab_size()));
    }
    let k = w.k();
    let v = c.vocab_size();
    if c.docs().iter().all(|d| d.is_empty()) {
        let summary = M3Summary {
            docs_used: 0,
            docs_skipped: c.len(),
            components: 0,
        };
        return Ok((FactoredTensor::new(k), summary));
    }
    let m1 = compute_m1(c)?;
    let q = w.apply(&m1);
    let rows: Vec<Vec<f64>> = (0..v).map(|i| w.row(i)).collect();

    let d3 = c.docs().iter().filter(|d| d.len() >= 3).count();
    let d2 = c.docs().iter().filter(|d| d.len() >= 2).count();
    let mut t = FactoredTensor::new(k);
    // Per-word accumulators: r_i = sum_d c_d n_di p_d and s_i = sum_d c_d n_di
    // for the triple term, t_i = sum_d c2_d n_di for the pair term.
    let mut r = vec![vec![0.0; k]; v];
    let mut s = vec![0.0; v];
    let mut tw = vec![0.0; v];
    let mut e2 = DMatrix::<f64>::zeros(k, k);
    for d in c.docs() {
        let m = d.len();
        if m < 2 {
            continue;
        }
        let mut p = vec![0.0; k];
        for &(i, n) in d.words() {
            for (a, x) in p.iter_mut().zip(&rows[i]) {
                *a += n as f64 * x;
            }
        }
        let c2 = 1.0 / ((m * (m - 1)) as f64 * d2 as f64);
        let pv = DVector::from_column_slice(&p);
        e2.ger(c2, &pv, &pv, 1.0);
        for &(i, n) in d.words() {
            tw[i] += c2 * n as f64;
        }
        if m >= 3 {
            let c3 = 1.0 / ((m * (m - 1) * (m - 2)) as f64 * d3 as f64);
            for &(i, n) in d.words() {
                let f = c3 * n as f64;
                s[i] += f;
                for (a, x) in r[i].iter_mut().zip(&p) {
                    *a += f * x;
                }
            }
            t.push_symmetric(c3, p)?;
        }
    }
    for i in 0..v {
        if s[i] != 0.0 {
            push_sym_aar(&mut t, -1.0, &rows[i], &r[i])?;
            t.push_symmetric(2.0 * s[i], rows[i].clone())?;
        }
        if tw[i] != 0.0 {
            let wi = DVector::from_column_slice(&rows[i]);
            e2.ger(-tw[i], &wi, &wi, 1.0);
        }
    }
    if d2 > 0 {
        let eig = SymmetricEigen::new(e2);
        let cross = -alpha0 / (alpha0 + 2.0);
        for (j, &sigma) in eig.eigenvalues.iter().enumerate() {
            if sigma != 0.0 {
                let e: Vec<f64> = eig.eigenvectors.column(j).iter().copied().collect();
                push_sym_aar(&mut t, cross * sigma, &e, &q)?;
            }
        }
    }
    t.push_symmetric(2.0 * alpha0 * alpha0 / ((alpha0 + 1.0) * (alpha0 + 2.0)), q)?;
    let summary = M3Summary {
        docs_used: d3,
        docs_skipped: c.len() - d3,
        components: t.len(),
    };
    Ok((t, summary))
}

/// Dense `k x k x k` whitened third moment.
pub fn whitened_m3_dense(c: &Corpus, w: &WhiteningMap, alpha0: f64) -> Result<DenseTensor3> {
    whitened_m3_factored(c, w, alpha0)?.0.materialize()
}

/// How [`sketch_whitened_m3_with`] turns the factored moment into sketches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum M3Build {
    /// Pick the cheaper of the two by operation count.
    #[default]
    Auto,
    /// One forward transform per rank-1 term and replicate, a single
    /// inverse per replicate.
    PerComponent,
    /// Materialize the `k x k x k` moment and sketch its entries.
    Dense,
}

/// Adds the sketch of the whitened third moment to `set` (dimension `k`).
pub fn sketch_whitened_m3(
    c: &Corpus,
    w: &WhiteningMap,
    alpha0: f64,
    set: &mut SymTensorSketchSet,
) -> Result<M3Summary> {
    sketch_whitened_m3_with(c, w, alpha0, set, M3Build::Auto)
}

pub fn sketch_whitened_m3_with(
    c: &Corpus,
    w: &WhiteningMap,
    alpha0: f64,
    set: &mut SymTensorSketchSet,
    build: M3Build,
) -> Result<M3Summary> {
    if set.dim() != w.k() {
        return Err(Error::dim(w.k(), set.dim()));
    }
    let (t, summary) = whitened_m3_factored(c, w, alpha0)?;
    let k = w.k() as f64;
    let b = set.len() as f64;
    let reps = set.num_replicates() as f64;
    let comps = t.len() as f64;
    let dense_cost = comps * k.powi(3) + reps * k.powi(3) / 6.0;
    let fft_cost = comps * reps * b * b.log2();
    let dense = match build {
        M3Build::Auto => dense_cost < fft_cost && DenseTensor3::check_cap(w.k(), DEFAULT_MEMORY_CAP).is_ok(),
        M3Build::PerComponent => false,
        M3Build::Dense => true,
    };
    if dense {
        set.sketch_dense_sorted_unchecked(&t.materialize()?)?;
    } else {
        set.sketch_factored(&t)?;
    }
    Ok(summary)
}

/// Whitened population third moment of a known model,
/// `sum_i 2 alpha_i / (alpha0 (alpha0 + 1) (alpha0 + 2)) (W^T mu_i)^(x)3`.
pub fn whitened_population_m3(model: &super::LdaModel, w: &WhiteningMap) -> Result<DenseTensor3> {
    if model.vocab_size() != w.vocab_size() {
        return Err(Error::dim(w.vocab_size(), model.vocab_size()));
    }
    let mut t = FactoredTensor::new(w.k());
    for (weight, mu) in model.population_m3_components() {
        t.push_symmetric(weight, w.apply(&mu))?;
    }
    t.materialize()
}
