use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::CpDecomposition;

use super::corpus::{Corpus, Document};
use super::moments::WhiteningMap;

/// Topic matrix `Phi` (`V x k`, column-stochastic) and Dirichlet prior.
#[derive(Debug, Clone, PartialEq)]
pub struct LdaModel {
    phi: DMatrix<f64>,
    alpha: Vec<f64>,
}

const STOCHASTIC_TOL: f64 = 1e-9;

impl LdaModel {
    pub fn new(phi: DMatrix<f64>, alpha: Vec<f64>) -> Result<Self> {
        if phi.ncols() != alpha.len() {
            return Err(Error::dim(phi.ncols(), alpha.len()));
        }
        if alpha.iter().any(|&a| !(a > 0.0 && a.is_finite())) {
            return Err(Error::param("every alpha_i must be positive and finite"));
        }
        for (j, col) in phi.column_iter().enumerate() {
            let s: f64 = col.iter().sum();
            if col.iter().any(|&x| !(x >= 0.0)) || (s - 1.0).abs() > STOCHASTIC_TOL {
                return Err(Error::param(format!("topic column {j} is not a probability vector")));
            }
        }
        Ok(LdaModel { phi, alpha })
    }

    pub fn phi(&self) -> &DMatrix<f64> {
        &self.phi
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn alpha0(&self) -> f64 {
        self.alpha.iter().sum()
    }

    pub fn num_topics(&self) -> usize {
        self.alpha.len()
    }

    pub fn vocab_size(&self) -> usize {
        self.phi.nrows()
    }

    /// Population first moment `Phi alpha / alpha0`.
    pub fn population_m1(&self) -> Vec<f64> {
        let a0 = self.alpha0();
        (&self.phi * DVector::from_column_slice(&self.alpha) / a0)
            .iter()
            .copied()
            .collect()
    }

    /// Population `M2 = sum_i alpha_i mu_i mu_i^T / (alpha0 (alpha0 + 1))`.
    pub fn population_m2(&self) -> DMatrix<f64> {
        let a0 = self.alpha0();
        let scaled = DMatrix::from_fn(self.phi.nrows(), self.phi.ncols(), |w, j| {
            self.phi[(w, j)] * self.alpha[j] / (a0 * (a0 + 1.0))
        });
        scaled * self.phi.transpose()
    }

    /// Population third moment as weighted components `(weight, mu_i)`:
    /// `M3 = sum_i 2 alpha_i / (alpha0 (alpha0 + 1) (alpha0 + 2)) mu_i^(x)3`.
    pub fn population_m3_components(&self) -> Vec<(f64, Vec<f64>)> {
        let a0 = self.alpha0();
        (0..self.num_topics())
            .map(|j| {
                (
                    2.0 * self.alpha[j] / (a0 * (a0 + 1.0) * (a0 + 2.0)),
                    self.phi.column(j).iter().copied().collect(),
                )
            })
            .collect()
    }

    pub fn to_json(&self, vocab: Option<&[String]>) -> ModelJson {
        ModelJson {
            schema_version: 1,
            vocab_size: self.vocab_size(),
            k: self.num_topics(),
            alpha0: self.alpha0(),
            alpha: self.alpha.clone(),
            phi: self.phi.as_slice().to_vec(),
            vocab: vocab.map(|v| v.to_vec()),
        }
    }

    pub fn from_json(j: &ModelJson) -> Result<Self> {
        if j.phi.len() != j.vocab_size * j.k {
            return Err(Error::Format(format!(
                "phi has {} entries, expected {} x {}",
                j.phi.len(),
                j.vocab_size,
                j.k
            )));
        }
        Self::new(DMatrix::from_column_slice(j.vocab_size, j.k, &j.phi), j.alpha.clone())
            .map_err(|e| Error::Format(e.to_string()))
    }
}

/// On-disk model: `phi` is column-major (`phi[j * V + w]` is
/// `P(word w | topic j)`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelJson {
    pub schema_version: u32,
    pub vocab_size: usize,
    pub k: usize,
    pub alpha0: f64,
    pub alpha: Vec<f64>,
    pub phi: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vocab: Option<Vec<String>>,
}

/// Euclidean projection onto the probability simplex.
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    if v.is_empty() {
        return Vec::new();
    }
    let mut s = v.to_vec();
    s.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (i, &x) in s.iter().enumerate() {
        cum += x;
        let t = (cum - 1.0) / (i + 1) as f64;
        if x - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

/// Unprojected topic estimates and prior from whitened eigenpairs:
/// `alpha_i = 4 alpha0 (alpha0 + 1) / ((alpha0 + 2)^2 lambda_i^2)` and
/// `mu_i = (alpha0 + 2) / 2 * lambda_i * (W^+)^T v_i`.
pub fn recover_raw(d: &CpDecomposition, w: &WhiteningMap, alpha0: f64) -> Result<(DMatrix<f64>, Vec<f64>)> {
    if d.dim() != w.k() {
        return Err(Error::dim(w.k(), d.dim()));
    }
    if !(alpha0 > 0.0) {
        return Err(Error::param("alpha0 must be positive"));
    }
    let k = d.rank();
    let mut mu = DMatrix::zeros(w.vocab_size(), k);
    let mut alpha = Vec::with_capacity(k);
    for i in 0..k {
        let l = d.lambda()[i];
        if l == 0.0 || !l.is_finite() {
            return Err(Error::ZeroEigenvalue { component: i });
        }
        alpha.push(4.0 * alpha0 * (alpha0 + 1.0) / ((alpha0 + 2.0).powi(2) * l * l));
        let v = DVector::from_vec(d.vector(0, i));
        let col = w.unwhiten() * v * ((alpha0 + 2.0) / 2.0 * l);
        mu.set_column(i, &col);
    }
    Ok((mu, alpha))
}

/// [`recover_raw`] followed by simplex projection of every topic column.
pub fn recover_params(d: &CpDecomposition, w: &WhiteningMap, alpha0: f64) -> Result<LdaModel> {
    let (mu, alpha) = recover_raw(d, w, alpha0)?;
    let mut phi = mu;
    for mut col in phi.column_iter_mut() {
        let p = project_simplex(col.as_slice());
        col.copy_from_slice(&p);
    }
    LdaModel::new(phi, alpha)
}

/// Greedy matching of estimated to true topic columns by smallest l1
/// distance. Returns `(estimated index, true index, l1)` sorted by true
/// index.
pub fn match_topics(est: &DMatrix<f64>, truth: &DMatrix<f64>) -> Result<Vec<(usize, usize, f64)>> {
    if est.nrows() != truth.nrows() {
        return Err(Error::dim(truth.nrows(), est.nrows()));
    }
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for i in 0..est.ncols() {
        for j in 0..truth.ncols() {
            pairs.push(((est.column(i) - truth.column(j)).abs().sum(), i, j));
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut used_e = vec![false; est.ncols()];
    let mut used_t = vec![false; truth.ncols()];
    let mut out = Vec::new();
    for (l1, i, j) in pairs {
        if !used_e[i] && !used_t[j] {
            used_e[i] = true;
            used_t[j] = true;
            out.push((i, j, l1));
        }
    }
    out.sort_by_key(|m| m.1);
    Ok(out)
}

const PG_MAX_ITERS: usize = 500;
const PG_TOL: f64 = 1e-8;
const PROB_FLOOR: f64 = 1e-12;

/// Mixture weights minimizing `||w_d - Phi pi||_2` over the simplex, with
/// `w_d` the document's normalized word frequencies. Projected gradient
/// with step `1 / ||Phi||_2^2`.
pub fn infer_mixture(phi: &DMatrix<f64>, doc: &Document) -> Vec<f64> {
    let lip = phi.clone().svd(false, false).singular_values.max().powi(2);
    infer_with(phi, doc, lip)
}

fn infer_with(phi: &DMatrix<f64>, doc: &Document, lip: f64) -> Vec<f64> {
    let k = phi.ncols();
    let mut pi = vec![1.0 / k as f64; k];
    if k == 1 || lip <= 0.0 {
        return pi;
    }
    let m = doc.len() as f64;
    let mut target = DVector::zeros(phi.nrows());
    for &(w, n) in doc.words() {
        target[w] = n as f64 / m;
    }
    let step = 1.0 / lip;
    for _ in 0..PG_MAX_ITERS {
        let resid = phi * DVector::from_column_slice(&pi) - &target;
        let grad = phi.tr_mul(&resid);
        let moved: Vec<f64> = pi.iter().zip(grad.iter()).map(|(p, g)| p - step * g).collect();
        let next = project_simplex(&moved);
        let delta: f64 = next.iter().zip(&pi).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        pi = next;
        if delta < PG_TOL {
            break;
        }
    }
    pi
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LikelihoodReport {
    /// Average over documents of the per-word log-likelihood.
    pub per_word: f64,
    pub documents: usize,
    /// Tokens whose probability was floored at `1e-12`.
    pub floored_tokens: usize,
}

/// Held-out per-word log-likelihood. Empty documents are skipped.
pub fn heldout_likelihood(model: &LdaModel, held: &Corpus) -> Result<LikelihoodReport> {
    use rayon::prelude::*;
    if held.vocab_size() != model.vocab_size() {
        return Err(Error::param(format!(
            "held-out vocabulary has {} words, the model {}",
            held.vocab_size(),
            model.vocab_size()
        )));
    }
    let phi = model.phi();
    let lip = phi.clone().svd(false, false).singular_values.max().powi(2);
    let per_doc: Vec<(f64, usize)> = held
        .docs()
        .par_iter()
        .filter(|d| !d.is_empty())
        .map(|d| {
            let pi = infer_with(phi, d, lip);
            let mut ll = 0.0;
            let mut floored = 0;
            for &(w, n) in d.words() {
                let p: f64 = (0..phi.ncols()).map(|j| pi[j] * phi[(w, j)]).sum();
                let p = if p > PROB_FLOOR {
                    p
                } else {
                    floored += n as usize;
                    PROB_FLOOR
                };
                ll += n as f64 * p.ln();
            }
            (ll / d.len() as f64, floored)
        })
        .collect();
    if per_doc.is_empty() {
        return Err(Error::param("held-out corpus has no non-empty documents"));
    }
    let documents = per_doc.len();
    Ok(LikelihoodReport {
        per_word: per_doc.iter().map(|p| p.0).sum::<f64>() / documents as f64,
        documents,
        floored_tokens: per_doc.iter().map(|p| p.1).sum(),
    })
}
