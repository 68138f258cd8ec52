//! Planted-tensor experiments: run a decomposition method on a synthetic
//! orthogonal tensor and score it against the ground truth.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::Serialize;

use crate::decompose::{
    als_exact, als_fast, robust_tpm_exact, robust_tpm_fast, robust_tpm_fast_asym, AlsConfig, PowerConfig,
};
use crate::error::{Error, Result};
use crate::stats::dot;
use crate::tensor::{synth_orthogonal_tensor, CpDecomposition};

/// A recovered vector is "wrong" when its squared distance to the matched
/// truth exceeds this.
pub const WRONG_THRESHOLD: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Power method on symmetric sketches.
    Power,
    /// Power method on asymmetric sketches.
    PowerAsym,
    PowerExact,
    Als,
    AlsExact,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Power => "power",
            Method::PowerAsym => "power-asym",
            Method::PowerExact => "power-exact",
            Method::Als => "als",
            Method::AlsExact => "als-exact",
        }
    }

    pub fn is_exact(self) -> bool {
        matches!(self, Method::PowerExact | Method::AlsExact)
    }

    pub const ALL: [Method; 5] = [
        Method::Power,
        Method::PowerAsym,
        Method::PowerExact,
        Method::Als,
        Method::AlsExact,
    ];
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::param(format!("unknown method {s:?}")))
    }
}

/// Everything needed to replay a run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub method: Method,
    pub n: usize,
    /// Rank of the planted tensor.
    pub k: usize,
    /// Components to extract and score.
    pub top: usize,
    pub sigma: f64,
    pub b: usize,
    #[serde(rename = "B")]
    pub replicates: usize,
    #[serde(rename = "L")]
    pub inits: usize,
    #[serde(rename = "T")]
    pub iters: usize,
    pub als_max_iters: usize,
    pub als_tol: f64,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            method: Method::Power,
            n: 100,
            k: 10,
            top: 10,
            sigma: 0.01,
            b: 4096,
            replicates: 30,
            inits: 30,
            iters: 30,
            als_max_iters: 1000,
            als_tol: 1e-6,
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn power(&self) -> PowerConfig {
        PowerConfig {
            k: self.top,
            inits: self.inits,
            iters: self.iters,
            b: self.b,
            replicates: self.replicates,
            seed: self.seed,
            ..PowerConfig::default()
        }
    }

    pub fn als(&self) -> AlsConfig {
        AlsConfig {
            k: self.top,
            max_iters: self.als_max_iters,
            tol: self.als_tol,
            b: self.b,
            replicates: self.replicates,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VectorMatch {
    pub recovered: usize,
    pub truth: usize,
    /// `|cos|` between the two vectors.
    pub cosine: f64,
    /// `||v - v_hat||^2` after aligning the sign of `v_hat`.
    pub sq_distance: f64,
}

/// Greedy maximum-`|cos|` assignment of recovered vectors (mode 0) to truth
/// vectors, one truth vector per recovered vector. Ties resolve to the
/// lower recovered index, then the lower truth index.
pub fn match_vectors(est: &CpDecomposition, truth: &CpDecomposition) -> Result<Vec<VectorMatch>> {
    if est.dim() != truth.dim() {
        return Err(Error::dim(truth.dim(), est.dim()));
    }
    let ev: Vec<Vec<f64>> = (0..est.rank()).map(|r| est.vector(0, r)).collect();
    let tv: Vec<Vec<f64>> = (0..truth.rank()).map(|r| truth.vector(0, r)).collect();
    let mut cands = Vec::with_capacity(ev.len() * tv.len());
    for (i, e) in ev.iter().enumerate() {
        for (j, t) in tv.iter().enumerate() {
            cands.push((dot(e, t), i, j));
        }
    }
    cands.sort_by(|a, b| b.0.abs().total_cmp(&a.0.abs()).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut used_e = vec![false; ev.len()];
    let mut used_t = vec![false; tv.len()];
    let mut out = Vec::new();
    for (c, i, j) in cands {
        if used_e[i] || used_t[j] {
            continue;
        }
        used_e[i] = true;
        used_t[j] = true;
        let s = if c < 0.0 { -1.0 } else { 1.0 };
        let sq = ev[i].iter().zip(&tv[j]).map(|(a, b)| (s * a - b).powi(2)).sum();
        out.push(VectorMatch {
            recovered: i,
            truth: j,
            cosine: c.abs(),
            sq_distance: sq,
        });
    }
    out.sort_by_key(|m| m.recovered);
    Ok(out)
}

/// Mean squared distance over the matches and the count above
/// [`WRONG_THRESHOLD`].
pub fn score(matches: &[VectorMatch]) -> (f64, usize) {
    if matches.is_empty() {
        return (0.0, 0);
    }
    let residual = matches.iter().map(|m| m.sq_distance).sum::<f64>() / matches.len() as f64;
    let wrong = matches.iter().filter(|m| m.sq_distance > WRONG_THRESHOLD).count();
    (residual, wrong)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Timing {
    /// Sketch construction, zero for exact methods.
    pub sketch_build_ms: f64,
    /// Decomposition only, excluding input generation and sketching.
    pub decomposition_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunResult {
    pub schema_version: u32,
    pub config: RunConfig,
    pub eigenvalues: Vec<f64>,
    pub residual: f64,
    pub wrong: usize,
    pub matches: Vec<VectorMatch>,
    pub timing: Timing,
}

fn ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// Plants a tensor, runs the configured method and scores it.
pub fn run_synth(cfg: &RunConfig) -> Result<RunResult> {
    if cfg.top == 0 || cfg.top > cfg.k {
        return Err(Error::param(format!(
            "top = {} must be between 1 and the planted rank {}",
            cfg.top, cfg.k
        )));
    }
    let plant = synth_orthogonal_tensor(cfg.n, cfg.k, cfg.sigma, cfg.seed)?;
    let t = &plant.tensor;
    let mut timing = Timing::default();
    let d = match cfg.method {
        Method::PowerExact => {
            let s = Instant::now();
            let d = robust_tpm_exact(t, &cfg.power())?;
            timing.decomposition_ms = ms(s);
            d
        }
        Method::AlsExact => {
            let s = Instant::now();
            let d = als_exact(t, &cfg.als())?;
            timing.decomposition_ms = ms(s);
            d
        }
        Method::Power => {
            let p = cfg.power();
            let s = Instant::now();
            let set = p.sym_sketch(t)?;
            timing.sketch_build_ms = ms(s);
            let s = Instant::now();
            let d = robust_tpm_fast(set, &p)?.0;
            timing.decomposition_ms = ms(s);
            d
        }
        Method::PowerAsym => {
            let p = cfg.power();
            let s = Instant::now();
            let set = p.asym_sketch(t)?;
            timing.sketch_build_ms = ms(s);
            let s = Instant::now();
            let d = robust_tpm_fast_asym(set, &p)?.0;
            timing.decomposition_ms = ms(s);
            d
        }
        Method::Als => {
            let a = cfg.als();
            let s = Instant::now();
            let set = a.asym_sketch(t)?;
            timing.sketch_build_ms = ms(s);
            let s = Instant::now();
            let d = als_fast(&set, &a)?;
            timing.decomposition_ms = ms(s);
            d
        }
    };
    let matches = match_vectors(&d, &plant.truth)?;
    let (residual, wrong) = score(&matches);
    Ok(RunResult {
        schema_version: 1,
        config: cfg.clone(),
        eigenvalues: d.lambda().to_vec(),
        residual,
        wrong,
        matches,
        timing,
    })
}

/// Grid over sketch length, replicate count and noise level.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    pub b: Vec<usize>,
    pub replicates: Vec<usize>,
    pub sigma: Vec<f64>,
}

/// Runs `base` at every grid point (sigma outermost, then `B`, then `b`).
/// Exact methods ignore `b` and `B`, so they run once per sigma.
pub fn sweep(base: &RunConfig, grid: &SweepGrid) -> Result<Vec<RunResult>> {
    let mut out = Vec::new();
    for &sigma in &grid.sigma {
        if base.method.is_exact() {
            out.push(run_synth(&RunConfig { sigma, ..base.clone() })?);
            continue;
        }
        for &replicates in &grid.replicates {
            for &b in &grid.b {
                out.push(run_synth(&RunConfig {
                    sigma,
                    replicates,
                    b,
                    ..base.clone()
                })?);
            }
        }
    }
    Ok(out)
}

pub const CSV_HEADER: &str = "method,n,k,top,sigma,b,B,L,T,seed,residual,wrong,sketch_build_ms,decomposition_ms";

/// One CSV row; the two timing columns come last.
pub fn csv_row(r: &RunResult) -> String {
    let c = &r.config;
    format!(
        "{},{},{},{},{},{},{},{},{},{},{:.6e},{},{:.3},{:.3}",
        c.method,
        c.n,
        c.k,
        c.top,
        c.sigma,
        c.b,
        c.replicates,
        c.inits,
        c.iters,
        c.seed,
        r.residual,
        r.wrong,
        r.timing.sketch_build_ms,
        r.timing.decomposition_ms
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn basis(cols: &[[f64; 2]]) -> CpDecomposition {
        let m = DMatrix::from_fn(2, cols.len(), |i, j| cols[j][i]);
        CpDecomposition::symmetric(vec![1.0; cols.len()], m).unwrap()
    }

    #[test]
    fn matching_aligns_signs_and_permutations() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let truth = basis(&[[1.0, 0.0], [0.0, 1.0]]);
        let est = basis(&[[0.0, -1.0], [s, s]]);
        let m = match_vectors(&est, &truth).unwrap();
        assert_eq!((m[0].recovered, m[0].truth), (0, 1));
        assert_eq!(m[0].sq_distance, 0.0);
        assert_eq!((m[1].recovered, m[1].truth), (1, 0));
        assert!((m[1].sq_distance - (2.0 - 2.0 * s)).abs() < 1e-12);
        let (res, wrong) = score(&m);
        assert!((res - (1.0 - s)).abs() < 1e-12);
        assert_eq!(wrong, 1);
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("nope".parse::<Method>().is_err());
    }

    #[test]
    fn noiseless_exact_run() {
        let cfg = RunConfig {
            method: Method::PowerExact,
            n: 20,
            k: 3,
            top: 3,
            sigma: 0.0,
            ..Default::default()
        };
        let r = run_synth(&cfg).unwrap();
        assert!(r.residual <= 1e-8);
        assert_eq!(r.wrong, 0);
        assert!(run_synth(&RunConfig { top: 4, ..cfg }).is_err());
    }

    #[test]
    fn sweep_skips_sketch_axes_for_exact_methods() {
        let base = RunConfig {
            method: Method::PowerExact,
            n: 8,
            k: 2,
            top: 2,
            inits: 3,
            iters: 3,
            ..Default::default()
        };
        let grid = SweepGrid {
            b: vec![64, 128],
            replicates: vec![2],
            sigma: vec![0.0, 0.01],
        };
        assert_eq!(sweep(&base, &grid).unwrap().len(), 2);
        let fast = RunConfig { method: Method::Power, ..base };
        let rows = sweep(&fast, &grid).unwrap();
        assert_eq!(rows.len(), 4);
        assert_eq!(rows[1].config.b, 128);
        assert!(csv_row(&rows[0]).starts_with("power,8,2,2,0,64,2,3,3,0,"));
        assert_eq!(CSV_HEADER.split(',').count(), csv_row(&rows[0]).split(',').count());
    }
}
