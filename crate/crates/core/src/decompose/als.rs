use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand_distr::{Distribution, StandardNormal};

use crate::contraction::ContractionWorkspace;
use crate::error::{Error, Result};
use crate::rng::{stream_rng, STREAM_INIT};
use crate::sketch::AsymTensorSketchSet;
use crate::tensor::{CpDecomposition, DenseTensor3};

/// Settings for alternating least squares.
#[derive(Debug, Clone, PartialEq)]
pub struct AlsConfig {
    pub k: usize,
    pub max_iters: usize,
    /// Stop once the relative change of the weight vector over one sweep
    /// drops below this.
    pub tol: f64,
    pub b: usize,
    pub replicates: usize,
    pub seed: u64,
}

impl Default for AlsConfig {
    fn default() -> Self {
        AlsConfig {
            k: 1,
            max_iters: 1000,
            tol: 1e-6,
            b: 16384,
            replicates: 30,
            seed: 0,
        }
    }
}

impl AlsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.max_iters == 0 {
            return Err(Error::param("ALS needs k >= 1 and max_iters >= 1"));
        }
        if !(self.tol >= 0.0) {
            return Err(Error::param("ALS tolerance must be non-negative"));
        }
        Ok(())
    }

    pub fn asym_sketch(&self, t: &DenseTensor3) -> Result<AsymTensorSketchSet> {
        let mut set = AsymTensorSketchSet::new(t.dim(), self.b, self.replicates, self.seed)?;
        set.sketch_dense(t)?;
        Ok(set)
    }
}

/// Mode contractions needed by ALS: mode 0 is `T(I, x, y)`, mode 1 is
/// `T(x, I, y)`, mode 2 is `T(x, y, I)`.
pub trait AlsOracle {
    fn dim(&self) -> usize;
    fn mode(&self, mode: usize, x: &[f64], y: &[f64]) -> Result<Vec<f64>>;
}

impl AlsOracle for DenseTensor3 {
    fn dim(&self) -> usize {
        DenseTensor3::dim(self)
    }

    fn mode(&self, mode: usize, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
        self.contract_mode(mode, x, y)
    }
}

/// ALS contractions read off asymmetric sketches.
#[derive(Debug)]
pub struct SketchAls<'a> {
    set: &'a AsymTensorSketchSet,
    ws: ContractionWorkspace,
}

impl<'a> SketchAls<'a> {
    pub fn new(set: &'a AsymTensorSketchSet) -> Self {
        SketchAls {
            set,
            ws: ContractionWorkspace::for_asym(set),
        }
    }
}

impl AlsOracle for SketchAls<'_> {
    fn dim(&self) -> usize {
        self.set.dim()
    }

    fn mode(&self, mode: usize, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
        self.ws.mode_asym(self.set, mode, x, y)
    }
}

#[derive(Debug, Clone)]
pub struct AlsOutput {
    pub decomposition: CpDecomposition,
    pub iterations: usize,
    pub converged: bool,
}

fn gaussian(n: usize, rng: &mut impl rand::Rng) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

/// Starting factor for one mode: the leading left singular vectors of
/// `k + 4` random mode contractions `T(I, x, y)`, which span the range of the
/// mode unfolding. Every mode uses the same `x, y` draws, so a symmetric
/// tensor gets the same start in all three modes.
fn range_factor<O: AlsOracle + ?Sized>(o: &O, k: usize, seed: u64, mode: usize) -> Result<DMatrix<f64>> {
    let n = o.dim();
    let mut rng = stream_rng(seed, (STREAM_INIT << 32) | (1 << 31));
    let p = k + 4;
    let mut y = DMatrix::<f64>::zeros(n, p);
    for j in 0..p {
        let (a, b) = (gaussian(n, &mut rng), gaussian(n, &mut rng));
        y.set_column(j, &DVector::from_vec(o.mode(mode, &a, &b)?));
    }
    // left singular vectors of Y from the eigenvectors of Y Y^T
    let eig = SymmetricEigen::new(&y * y.transpose());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut f = DMatrix::<f64>::zeros(n, k);
    for (r, &c) in order.iter().take(k).enumerate() {
        f.set_column(r, &eig.eigenvectors.column(c));
    }
    Ok(f)
}

/// Moore-Penrose inverse of a symmetric PSD matrix, dropping eigenvalues
/// below `1e-10` times the largest.
fn pinv_sym(g: DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(g);
    let top = eig.eigenvalues.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
    let cut = top * 1e-10;
    let inv = DVector::from_iterator(
        eig.eigenvalues.len(),
        eig.eigenvalues.iter().map(|&x| if x.abs() > cut { 1.0 / x } else { 0.0 }),
    );
    &eig.eigenvectors * DMatrix::from_diagonal(&inv) * eig.eigenvectors.transpose()
}

/// CP decomposition by alternating least squares. Each sweep updates the
/// mode-0, mode-1 and mode-2 factors in turn; factor columns are kept at
/// unit norm and the norms go into the weights.
pub fn als_with<O: AlsOracle + ?Sized>(o: &O, cfg: &AlsConfig) -> Result<AlsOutput> {
    cfg.validate()?;
    let n = o.dim();
    let k = cfg.k;
    let mut f = [
        range_factor(o, k, cfg.seed, 0)?,
        range_factor(o, k, cfg.seed, 1)?,
        range_factor(o, k, cfg.seed, 2)?,
    ];
    let mut lambda = DVector::<f64>::zeros(k);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < cfg.max_iters {
        iterations += 1;
        let prev = lambda.clone();
        for mode in 0..3 {
            let (p, q) = match mode {
                0 => (1, 2),
                1 => (0, 2),
                _ => (0, 1),
            };
            let mut m = DMatrix::<f64>::zeros(n, k);
            for r in 0..k {
                let x: Vec<f64> = f[p].column(r).iter().copied().collect();
                let y: Vec<f64> = f[q].column(r).iter().copied().collect();
                let v = o.mode(mode, &x, &y)?;
                m.set_column(r, &DVector::from_vec(v));
            }
            let g = (f[p].transpose() * &f[p]).component_mul(&(f[q].transpose() * &f[q]));
            let mut next = m * pinv_sym(g);
            for r in 0..k {
                let s = next.column(r).norm();
                if s > 0.0 && s.is_finite() {
                    next.column_mut(r).scale_mut(1.0 / s);
                    lambda[r] = s;
                } else {
                    next.set_column(r, &f[mode].column(r).clone_owned());
                    lambda[r] = 0.0;
                }
            }
            f[mode] = next;
        }
        if lambda.iter().any(|x| !x.is_finite()) {
            return Err(Error::Degenerate("ALS weights diverged".into()));
        }
        let scale = prev.norm();
        if iterations > 1 && scale > 0.0 && (&lambda - &prev).norm() / scale < cfg.tol {
            converged = true;
            break;
        }
    }
    let [a, b, c] = f;
    Ok(AlsOutput {
        decomposition: CpDecomposition::asymmetric(lambda.iter().copied().collect(), a, b, c)?,
        iterations,
        converged,
    })
}

/// ALS with exact dense contractions.
pub fn als_exact(t: &DenseTensor3, cfg: &AlsConfig) -> Result<CpDecomposition> {
    Ok(als_with(t, cfg)?.decomposition)
}

/// ALS with every contraction read off the sketches.
pub fn als_fast(set: &AsymTensorSketchSet, cfg: &AlsConfig) -> Result<CpDecomposition> {
    Ok(als_with(&SketchAls::new(set), cfg)?.decomposition)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use crate::tensor::{cp_residual, synth_orthogonal_tensor};

    #[test]
    fn pinv_drops_null_directions() {
        let g = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let p = pinv_sym(g.clone());
        assert!((&g * &p * &g - &g).norm() < 1e-12);
        assert!((p[(0, 0)] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn start_spans_the_planted_components() {
        let p = synth_orthogonal_tensor(9, 3, 0.0, 4).unwrap();
        let f = range_factor(&p.tensor, 3, 11, 0).unwrap();
        assert!((f.transpose() * &f - DMatrix::<f64>::identity(3, 3)).norm() < 1e-10);
        for r in 0..3 {
            let v = DVector::from_vec(p.truth.vector(0, r));
            let inside = (f.transpose() * &v).norm();
            assert!((inside - 1.0).abs() < 1e-10, "component {r} leaves the span: {inside}");
        }
    }

    #[test]
    fn recovers_asymmetric_rank_two() {
        let mut rng = rng_from_seed(3);
        let n = 7;
        let mut t = DenseTensor3::zeros(n);
        let mut draw = || -> Vec<f64> { (0..n).map(|_| StandardNormal.sample(&mut rng)).collect() };
        let (a1, b1, c1) = (draw(), draw(), draw());
        let (a2, b2, c2) = (draw(), draw(), draw());
        t.add_outer(3.0, &a1, &b1, &c1);
        t.add_outer(1.0, &a2, &b2, &c2);
        let cfg = AlsConfig { k: 2, tol: 1e-12, ..Default::default() };
        let out = als_with(&t, &cfg).unwrap();
        let rel = cp_residual(&t, &out.decomposition).unwrap() / t.frobenius();
        assert!(rel < 1e-6, "relative residual {rel}");
        assert!(out.decomposition.lambda().iter().all(|&l| l >= 0.0));
    }

    #[test]
    fn planted_symmetric_tensor() {
        let p = synth_orthogonal_tensor(10, 3, 0.0, 2).unwrap();
        let d = als_exact(&p.tensor, &AlsConfig { k: 3, ..Default::default() }).unwrap();
        let mut got: Vec<f64> = d.lambda().to_vec();
        got.sort_by(|a, b| b.total_cmp(a));
        for (g, e) in got.iter().zip(p.truth.lambda()) {
            assert!((g - e).abs() < 1e-4, "{g} vs {e}");
        }
    }

    #[test]
    fn fast_als_on_large_sketch() {
        let p = synth_orthogonal_tensor(12, 2, 0.0, 9).unwrap();
        let cfg = AlsConfig { k: 2, b: 8192, replicates: 15, max_iters: 50, ..Default::default() };
        let set = cfg.asym_sketch(&p.tensor).unwrap();
        let d = als_fast(&set, &cfg).unwrap();
        let rel = cp_residual(&p.tensor, &d).unwrap() / p.tensor.frobenius();
        assert!(rel < 0.3, "relative residual {rel}");
    }

    #[test]
    fn rejects_bad_config() {
        let t = DenseTensor3::zeros(2);
        assert!(als_exact(&t, &AlsConfig { k: 0, ..Default::default() }).is_err());
        assert!(als_exact(&t, &AlsConfig { tol: -1.0, ..Default::default() }).is_err());
    }
}
