//! Spectral LDA: empirical word moments, whitening, the sketched whitened
//! third moment, decomposition, parameter recovery and held-out
//! likelihood.

mod corpus;
mod model;
mod moments;

use std::time::{Duration, Instant};

use serde::Serialize;

pub use corpus::{
    generate_synthetic_corpus, generate_synthetic_corpus_with, read_docword, read_docword_file, read_vocab,
    read_vocab_file, write_docword, write_docword_file, Corpus, Document, TOPIC_CONCENTRATION,
};
pub use model::{
    heldout_likelihood, infer_mixture, match_topics, project_simplex, recover_params, recover_raw,
    LdaModel, LikelihoodReport, ModelJson,
};
pub use moments::{
    compute_m1, compute_m2, pair_moment, sketch_whitened_m3, sketch_whitened_m3_with, whiten, whitened_m3_dense, whitened_m3_factored,
    whitened_population_m3, M3Build, M3Summary, WhiteningMap, RANK_TOL,
};

use crate::decompose::{robust_tpm_exact, robust_tpm_fast, PowerConfig};
use crate::error::Result;
use crate::sketch::SymTensorSketchSet;
use crate::tensor::CpDecomposition;

/// Pipeline settings. `power` supplies `k`, the sketch shape and `L`/`T`.
#[derive(Debug, Clone)]
pub struct LdaConfig {
    pub alpha0: f64,
    pub power: PowerConfig,
    /// Decompose the dense whitened moment instead of its sketch.
    pub exact: bool,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct PhaseTimes {
    pub moments: Duration,
    pub whitening: Duration,
    pub sketch: Duration,
    pub decomposition: Duration,
    pub recovery: Duration,
}

#[derive(Debug, Clone)]
pub struct LdaFit {
    pub model: LdaModel,
    pub whitening: WhiteningMap,
    pub decomposition: CpDecomposition,
    pub m3: M3Summary,
    pub times: PhaseTimes,
}

/// Moments, whitening, (sketched) whitened third moment, robust power
/// method and recovery.
pub fn fit(corpus: &Corpus, cfg: &LdaConfig) -> Result<LdaFit> {
    let mut times = PhaseTimes::default();
    let t = Instant::now();
    let m2 = compute_m2(corpus, cfg.alpha0)?;
    times.moments = t.elapsed();
    let t = Instant::now();
    let w = whiten(&m2, cfg.power.k)?;
    times.whitening = t.elapsed();
    let k = w.k();
    let (decomposition, m3) = if cfg.exact {
        let t = Instant::now();
        let (f, summary) = whitened_m3_factored(corpus, &w, cfg.alpha0)?;
        let dense = f.materialize()?;
        times.sketch = t.elapsed();
        let t = Instant::now();
        let d = robust_tpm_exact(&dense, &cfg.power)?;
        times.decomposition = t.elapsed();
        (d, summary)
    } else {
        let t = Instant::now();
        let mut set = SymTensorSketchSet::new(k, cfg.power.b, cfg.power.replicates, cfg.power.seed)?;
        let summary = sketch_whitened_m3(corpus, &w, cfg.alpha0, &mut set)?;
        times.sketch = t.elapsed();
        let t = Instant::now();
        let (d, _) = robust_tpm_fast(set, &cfg.power)?;
        times.decomposition = t.elapsed();
        (d, summary)
    };
    let t = Instant::now();
    let model = recover_params(&decomposition, &w, cfg.alpha0)?;
    times.recovery = t.elapsed();
    Ok(LdaFit {
        model,
        whitening: w,
        decomposition,
        m3,
        times,
    })
}

#[cfg(test)]
mod tests;
