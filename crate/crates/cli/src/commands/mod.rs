pub mod corpus;
pub mod decompose;
pub mod lda;
pub mod sketch;
pub mod synth;

use clap::Args;

/// Sketch length, replicate count and master seed.
#[derive(Debug, Clone, Args)]
pub struct SketchShape {
    /// Buckets per sketch (power of two).
    #[arg(long, default_value_t = 4096, env = "SKETCHCP_B")]
    pub b: usize,
    /// Independent sketch replicates.
    #[arg(long = "B", default_value_t = 30, env = "SKETCHCP_REPLICATES")]
    pub replicates: usize,
    #[arg(long, default_value_t = 0, env = "SKETCHCP_SEED")]
    pub seed: u64,
}

/// Restarts and iterations of the robust power method.
#[derive(Debug, Clone, Args)]
pub struct PowerIters {
    /// Random initializations per component.
    #[arg(long = "L", default_value_t = 30, env = "SKETCHCP_INITS")]
    pub inits: usize,
    /// Power iterations per initialization.
    #[arg(long = "T", default_value_t = 30, env = "SKETCHCP_ITERS")]
    pub iters: usize,
}

pub fn vectors_json(d: &sketchcp::tensor::CpDecomposition) -> serde_json::Value {
    let modes = if d.is_symmetric() { 1 } else { 3 };
    let factors: Vec<Vec<Vec<f64>>> = (0..modes)
        .map(|m| (0..d.rank()).map(|r| d.vector(m, r)).collect())
        .collect();
    serde_json::json!(factors)
}
