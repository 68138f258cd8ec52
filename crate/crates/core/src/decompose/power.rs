use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::contraction::ContractionWorkspace;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, stream_rng, STREAM_INIT};
use crate::sketch::{AsymTensorSketchSet, SymTensorSketchSet};
use crate::stats::norm2;
use crate::tensor::{CpDecomposition, DenseTensor3};

/// Settings for the robust tensor power method.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerConfig {
    /// Number of components to extract.
    pub k: usize,
    /// Random initializations per component (`L`).
    pub inits: usize,
    /// Power updates per initialization (`T`).
    pub iters: usize,
    /// Sketch length used when a sketch is built from this config.
    pub b: usize,
    /// Independent sketches (`B`).
    pub replicates: usize,
    pub seed: u64,
    /// A trajectory whose last step moved less than this is reported as
    /// converged. Diagnostic only.
    pub tol: f64,
}

impl Default for PowerConfig {
    fn default() -> Self {
        PowerConfig {
            k: 1,
            inits: 30,
            iters: 30,
            b: 4096,
            replicates: 30,
            seed: 0,
            tol: 1e-6,
        }
    }
}

impl PowerConfig {
    pub fn validate(&self, n: usize) -> Result<()> {
        if self.k == 0 || self.inits == 0 || self.iters == 0 {
            return Err(Error::param("k, L and T must all be at least 1"));
        }
        if self.k > n {
            return Err(Error::param(format!("rank {} exceeds dimension {n}", self.k)));
        }
        Ok(())
    }

    pub fn sym_sketch(&self, t: &DenseTensor3) -> Result<SymTensorSketchSet> {
        let mut set = SymTensorSketchSet::new(t.dim(), self.b, self.replicates, self.seed)?;
        set.sketch_dense(t)?;
        Ok(set)
    }

    pub fn asym_sketch(&self, t: &DenseTensor3) -> Result<AsymTensorSketchSet> {
        let mut set = AsymTensorSketchSet::new(t.dim(), self.b, self.replicates, self.seed)?;
        set.sketch_dense(t)?;
        Ok(set)
    }
}

/// Contractions needed by the power method on a symmetric tensor.
pub trait PowerOracle: Sync {
    fn dim(&self) -> usize;
    /// `T(I, u, u)`.
    fn ivv(&self, u: &[f64]) -> Result<Vec<f64>>;
    /// `T(u, u, u)`.
    fn vvv(&self, u: &[f64]) -> Result<f64>;
    /// `T <- T - lambda u (x) u (x) u`.
    fn deflate(&mut self, lambda: f64, u: &[f64]) -> Result<()>;
}

/// Exact contractions on a dense symmetric tensor.
#[derive(Debug, Clone)]
pub struct ExactPower {
    tensor: DenseTensor3,
}

impl ExactPower {
    pub fn new(tensor: DenseTensor3) -> Result<Self> {
        tensor.check_symmetric(crate::sketch::SYMMETRY_TOL)?;
        Ok(ExactPower { tensor })
    }

    pub fn tensor(&self) -> &DenseTensor3 {
        &self.tensor
    }
}

impl PowerOracle for ExactPower {
    fn dim(&self) -> usize {
        self.tensor.dim()
    }

    fn ivv(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.tensor.contract_ivv(u, u)
    }

    fn vvv(&self, u: &[f64]) -> Result<f64> {
        self.tensor.contract_vvv(u)
    }

    fn deflate(&mut self, lambda: f64, u: &[f64]) -> Result<()> {
        self.tensor.add_outer(-lambda, u, u, u);
        Ok(())
    }
}

/// Median-of-`B` contractions on symmetric sketches.
#[derive(Debug)]
pub struct SymSketchPower {
    set: SymTensorSketchSet,
    ws: ContractionWorkspace,
}

impl SymSketchPower {
    pub fn new(set: SymTensorSketchSet) -> Self {
        let ws = ContractionWorkspace::for_sym(&set);
        SymSketchPower { set, ws }
    }

    pub fn workspace(&self) -> &ContractionWorkspace {
        &self.ws
    }

    pub fn into_set(self) -> SymTensorSketchSet {
        self.set
    }
}

impl PowerOracle for SymSketchPower {
    fn dim(&self) -> usize {
        self.set.dim()
    }

    fn ivv(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.ws.ivv_sym(&self.set, u)
    }

    fn vvv(&self, u: &[f64]) -> Result<f64> {
        self.ws.vvv_sym(&self.set, u)
    }

    fn deflate(&mut self, lambda: f64, u: &[f64]) -> Result<()> {
        self.ws.deflate_sym(&mut self.set, -lambda, u)
    }
}

/// Median-of-`B` contractions on asymmetric sketches of a symmetric tensor,
/// reading `T(I, u, u)` off a single inverse transform per replicate.
#[derive(Debug)]
pub struct AsymSketchPower {
    set: AsymTensorSketchSet,
    ws: ContractionWorkspace,
}

impl AsymSketchPower {
    pub fn new(set: AsymTensorSketchSet) -> Self {
        let ws = ContractionWorkspace::for_asym(&set);
        AsymSketchPower { set, ws }
    }

    pub fn into_set(self) -> AsymTensorSketchSet {
        self.set
    }
}

impl PowerOracle for AsymSketchPower {
    fn dim(&self) -> usize {
        self.set.dim()
    }

    fn ivv(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.ws.ivv_asym(&self.set, u)
    }

    fn vvv(&self, u: &[f64]) -> Result<f64> {
        self.ws.vvv_asym(&self.set, u)
    }

    fn deflate(&mut self, lambda: f64, u: &[f64]) -> Result<()> {
        self.ws.deflate_asym(&mut self.set, -lambda, u, u, u)
    }
}

/// Comparison mode that draws fresh symmetric sketches for every
/// contraction instead of reusing one set. Keeps a dense copy of the
/// (deflated) tensor, so it is only practical for small `n`.
///
/// The sketch seed for a call is derived from the master seed, the number
/// of deflations so far and the bits of the query vector, which keeps runs
/// reproducible under any thread schedule.
#[derive(Debug, Clone)]
pub struct ResampledSymPower {
    tensor: DenseTensor3,
    b: usize,
    replicates: usize,
    seed: u64,
    round: u64,
}

impl ResampledSymPower {
    pub fn new(tensor: DenseTensor3, b: usize, replicates: usize, seed: u64) -> Result<Self> {
        tensor.check_symmetric(crate::sketch::SYMMETRY_TOL)?;
        crate::sketch::fft::check_sketch_len(b)?;
        Ok(ResampledSymPower {
            tensor,
            b,
            replicates,
            seed,
            round: 0,
        })
    }

    fn fresh(&self, u: &[f64], salt: u64) -> Result<(SymTensorSketchSet, ContractionWorkspace)> {
        let mut s = derive_seed(self.seed, self.round ^ (salt << 56));
        for x in u {
            s = derive_seed(s, x.to_bits());
        }
        let mut set = SymTensorSketchSet::new(self.tensor.dim(), self.b, self.replicates, s)?;
        set.sketch_dense_unchecked(&self.tensor)?;
        let ws = ContractionWorkspace::for_sym(&set);
        Ok((set, ws))
    }
}

impl PowerOracle for ResampledSymPower {
    fn dim(&self) -> usize {
        self.tensor.dim()
    }

    fn ivv(&self, u: &[f64]) -> Result<Vec<f64>> {
        let (set, ws) = self.fresh(u, 1)?;
        ws.ivv_sym(&set, u)
    }

    fn vvv(&self, u: &[f64]) -> Result<f64> {
        let (set, ws) = self.fresh(u, 2)?;
        ws.vvv_sym(&set, u)
    }

    fn deflate(&mut self, lambda: f64, u: &[f64]) -> Result<()> {
        self.tensor.add_outer(-lambda, u, u, u);
        self.round += 1;
        Ok(())
    }
}

/// Starting vector for initialization `tau` of component `component`:
/// a normalized standard Gaussian draw, i.e. uniform on the unit sphere.
pub fn initial_vector(n: usize, seed: u64, component: usize, tau: usize) -> Vec<f64> {
    let stream = (STREAM_INIT << 32) | ((component as u64) << 16) | tau as u64;
    let mut rng = stream_rng(seed, stream);
    loop {
        let v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let s = norm2(&v);
        if s > 0.0 {
            return v.into_iter().map(|x| x / s).collect();
        }
    }
}

fn normalized_update<O: PowerOracle + ?Sized>(o: &O, u: &[f64]) -> Result<Vec<f64>> {
    let v = o.ivv(u)?;
    let s = norm2(&v);
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::Degenerate(format!(
            "power update produced a vector of norm {s}"
        )));
    }
    Ok(v.into_iter().map(|x| x / s).collect())
}

/// Runs `iters` updates `u <- T(I, u, u) / ||T(I, u, u)||` from `u0`
/// (normalized first) and returns the final iterate.
pub fn power_iterations<O: PowerOracle + ?Sized>(o: &O, u0: &[f64], iters: usize) -> Result<Vec<f64>> {
    let s = norm2(u0);
    if !(s > 0.0) {
        return Err(Error::Degenerate("starting vector is zero".into()));
    }
    let mut u: Vec<f64> = u0.iter().map(|x| x / s).collect();
    for _ in 0..iters {
        u = normalized_update(o, &u)?;
    }
    Ok(u)
}

/// Per-component record of the selection step.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentTrace {
    pub lambda: f64,
    /// Index of the winning initialization.
    pub best_init: usize,
    /// `||u_T - u_{T-1}||` of the winning trajectory.
    pub last_step: f64,
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct PowerOutput {
    pub decomposition: CpDecomposition,
    pub components: Vec<ComponentTrace>,
}

/// Robust tensor power method over any contraction oracle.
///
/// For each component, `L` trajectories of `T` updates run in parallel from
/// [`initial_vector`] starts; the final iterate with the largest
/// `T(u, u, u)` wins (ties go to the lowest initialization index), and its
/// rank-1 term is deflated before the next component.
pub fn robust_tpm_with<O: PowerOracle>(oracle: &mut O, cfg: &PowerConfig) -> Result<PowerOutput> {
    let n = oracle.dim();
    cfg.validate(n)?;
    let mut pairs = Vec::with_capacity(cfg.k);
    let mut traces = Vec::with_capacity(cfg.k);
    for c in 0..cfg.k {
        let o: &O = oracle;
        let candidates: Vec<Result<(f64, Vec<f64>, f64)>> = (0..cfg.inits)
            .into_par_iter()
            .map(|tau| {
                let mut u = initial_vector(n, cfg.seed, c, tau);
                let mut step = f64::INFINITY;
                for _ in 0..cfg.iters {
                    let v = normalized_update(o, &u)?;
                    step = norm2(&v.iter().zip(&u).map(|(a, b)| a - b).collect::<Vec<_>>());
                    u = v;
                }
                Ok((o.vvv(&u)?, u, step))
            })
            .collect();
        let mut best: Option<(usize, f64, Vec<f64>, f64)> = None;
        for (tau, cand) in candidates.into_iter().enumerate() {
            let (lambda, u, step) = cand?;
            if !lambda.is_finite() {
                continue;
            }
            if best.as_ref().is_none_or(|b| lambda > b.1) {
                best = Some((tau, lambda, u, step));
            }
        }
        let (tau, lambda, u, step) = best.ok_or_else(|| {
            Error::Degenerate(format!("no finite eigenvalue estimate for component {c}"))
        })?;
        oracle.deflate(lambda, &u)?;
        traces.push(ComponentTrace {
            lambda,
            best_init: tau,
            last_step: step,
            converged: step < cfg.tol,
        });
        pairs.push((lambda, u));
    }
    Ok(PowerOutput {
        decomposition: CpDecomposition::from_eigenpairs(n, &pairs)?,
        components: traces,
    })
}

/// Robust tensor power method with exact `O(n^3)` contractions.
pub fn robust_tpm_exact(t: &DenseTensor3, cfg: &PowerConfig) -> Result<CpDecomposition> {
    cfg.validate(t.dim())?;
    let mut o = ExactPower::new(t.clone())?;
    Ok(robust_tpm_with(&mut o, cfg)?.decomposition)
}

/// Fast robust tensor power method on symmetric sketches. Returns the
/// eigenpairs and the sketch set of the deflated tensor.
pub fn robust_tpm_fast(
    set: SymTensorSketchSet,
    cfg: &PowerConfig,
) -> Result<(CpDecomposition, SymTensorSketchSet)> {
    let mut o = SymSketchPower::new(set);
    let out = robust_tpm_with(&mut o, cfg)?;
    Ok((out.decomposition, o.into_set()))
}

/// Fast robust tensor power method on asymmetric sketches of a symmetric
/// tensor.
pub fn robust_tpm_fast_asym(
    set: AsymTensorSketchSet,
    cfg: &PowerConfig,
) -> Result<(CpDecomposition, AsymTensorSketchSet)> {
    let mut o = AsymSketchPower::new(set);
    let out = robust_tpm_with(&mut o, cfg)?;
    Ok((out.decomposition, o.into_set()))
}

/// Power method that re-sketches the tensor for every contraction (see
/// [`ResampledSymPower`]). For comparison with [`robust_tpm_fast`] only.
pub fn robust_tpm_fast_resampled(t: &DenseTensor3, cfg: &PowerConfig) -> Result<CpDecomposition> {
    cfg.validate(t.dim())?;
    let mut o = ResampledSymPower::new(t.clone(), cfg.b, cfg.replicates, cfg.seed)?;
    Ok(robust_tpm_with(&mut o, cfg)?.decomposition)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::synth_orthogonal_tensor;

    fn rank1(lambda: f64, v: &[f64]) -> DenseTensor3 {
        DenseTensor3::symmetric_rank1_sum(&[lambda], &[v.to_vec()])
    }

    fn dist(a: &[f64], b: &[f64]) -> f64 {
        norm2(&a.iter().zip(b).map(|(x, y)| x - y).collect::<Vec<_>>())
    }

    #[test]
    fn initial_vectors_are_unit_and_reproducible() {
        let a = initial_vector(10, 3, 1, 2);
        assert!((norm2(&a) - 1.0).abs() < 1e-12);
        assert_eq!(a, initial_vector(10, 3, 1, 2));
        assert_ne!(a, initial_vector(10, 3, 1, 3));
        assert_ne!(a, initial_vector(10, 3, 2, 2));
    }

    #[test]
    fn rank_one_fixed_point() {
        let v = initial_vector(8, 11, 0, 0);
        let t = rank1(2.0, &v);
        let cfg = PowerConfig { k: 1, ..Default::default() };
        let d = robust_tpm_exact(&t, &cfg).unwrap();
        assert!((d.lambda()[0] - 2.0).abs() < 1e-9);
        assert!(dist(&d.vector(0, 0), &v) <= 1e-6);
    }

    #[test]
    fn start_scale_does_not_matter() {
        let p = synth_orthogonal_tensor(6, 3, 0.0, 4).unwrap();
        let o = ExactPower::new(p.tensor).unwrap();
        let u0 = initial_vector(6, 5, 0, 0);
        let u2: Vec<f64> = u0.iter().map(|x| 2.0 * x).collect();
        assert_eq!(power_iterations(&o, &u0, 7).unwrap(), power_iterations(&o, &u2, 7).unwrap());
    }

    #[test]
    fn planted_components_and_deflation() {
        let p = synth_orthogonal_tensor(20, 4, 0.0, 6).unwrap();
        let cfg = PowerConfig { k: 4, ..Default::default() };
        let mut o = ExactPower::new(p.tensor.clone()).unwrap();
        let out = robust_tpm_with(&mut o, &cfg).unwrap();
        let d = out.decomposition;
        for r in 0..4 {
            assert!((d.lambda()[r] - p.truth.lambda()[r]).abs() < 1e-6);
            assert!(dist(&d.vector(0, r), &p.truth.vector(0, r)) < 1e-4);
            assert!(out.components[r].converged);
        }
        for r in 0..4 {
            assert!(o.tensor().contract_vvv(&d.vector(0, r)).unwrap().abs() <= 1e-6);
        }
    }

    #[test]
    fn rejects_bad_configs_and_inputs() {
        let t = rank1(1.0, &[1.0, 0.0]);
        assert!(robust_tpm_exact(&t, &PowerConfig { k: 3, ..Default::default() }).is_err());
        assert!(robust_tpm_exact(&t, &PowerConfig { inits: 0, ..Default::default() }).is_err());
        let mut a = DenseTensor3::zeros(2);
        a.set(0, 0, 1, 1.0);
        assert!(matches!(
            robust_tpm_exact(&a, &PowerConfig::default()),
            Err(Error::NotSymmetric { .. })
        ));
    }

    #[test]
    fn zero_tensor_is_degenerate() {
        let t = DenseTensor3::zeros(3);
        let err = robust_tpm_exact(&t, &PowerConfig::default()).unwrap_err();
        assert!(matches!(err, Error::Degenerate(_)));
        let set = PowerConfig { b: 16, replicates: 3, ..Default::default() }.sym_sketch(&t).unwrap();
        assert!(matches!(robust_tpm_fast(set, &PowerConfig::default()), Err(Error::Degenerate(_))));
    }

    #[test]
    fn fast_rank_one_with_large_sketch() {
        let v = initial_vector(16, 21, 0, 0);
        let t = rank1(2.0, &v);
        let cfg = PowerConfig { k: 1, b: 4096, replicates: 30, inits: 10, iters: 10, ..Default::default() };
        let (d, defl) = robust_tpm_fast(cfg.sym_sketch(&t).unwrap(), &cfg).unwrap();
        assert!((d.lambda()[0] - 2.0).abs() <= 0.2);
        let u = d.vector(0, 0);
        assert!(dist(&u, &v).min(dist(&u, &v.iter().map(|x| -x).collect::<Vec<_>>())) <= 0.1);
        assert!(defl.data_norm() < cfg.sym_sketch(&t).unwrap().data_norm() * 0.2);

        let (d, _) = robust_tpm_fast_asym(cfg.asym_sketch(&t).unwrap(), &cfg).unwrap();
        assert!((d.lambda()[0] - 2.0).abs() <= 0.2);
    }

    #[test]
    fn runs_are_reproducible() {
        let p = synth_orthogonal_tensor(12, 3, 0.01, 8).unwrap();
        let cfg = PowerConfig { k: 2, b: 256, replicates: 5, inits: 4, iters: 5, ..Default::default() };
        let a = robust_tpm_fast(cfg.sym_sketch(&p.tensor).unwrap(), &cfg).unwrap().0;
        let b = robust_tpm_fast(cfg.sym_sketch(&p.tensor).unwrap(), &cfg).unwrap().0;
        assert_eq!(a, b);
        let small = PowerConfig { b: 64, replicates: 3, inits: 2, iters: 3, ..cfg };
        let r1 = robust_tpm_fast_resampled(&p.tensor, &small).unwrap();
        let r2 = robust_tpm_fast_resampled(&p.tensor, &small).unwrap();
        assert_eq!(r1, r2);
    }
}
