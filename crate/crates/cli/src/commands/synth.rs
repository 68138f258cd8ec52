use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use clap::Args;
use serde_json::json;
use sketchcp::bench::{csv_row, run_synth, sweep as run_sweep, Method, RunConfig, RunResult, SweepGrid, CSV_HEADER};
use sketchcp::tensor::{synth_orthogonal_tensor, write_coo};
use sketchcp::{Error, Result};

use super::{vectors_json, PowerIters, SketchShape};
use crate::output::{emit, emit_json, SCHEMA_VERSION};

#[derive(Debug, Clone, Args)]
pub struct PlantArgs {
    /// Tensor dimension.
    #[arg(long, default_value_t = 100, env = "SKETCHCP_N")]
    pub n: usize,
    /// Rank of the planted tensor.
    #[arg(long, default_value_t = 10, env = "SKETCHCP_K")]
    pub k: usize,
    /// Components to extract and score [default: min(k, 10)].
    #[arg(long, env = "SKETCHCP_TOP")]
    pub top: Option<usize>,
    #[arg(long, default_value = "power", env = "SKETCHCP_METHOD")]
    pub method: Method,
    #[command(flatten)]
    pub power: PowerIters,
    #[arg(long, default_value_t = 1000, env = "SKETCHCP_ALS_MAX_ITERS")]
    pub als_max_iters: usize,
    #[arg(long, default_value_t = 1e-6, env = "SKETCHCP_ALS_TOL")]
    pub als_tol: f64,
}

impl PlantArgs {
    fn config(&self, shape: &SketchShape, sigma: f64) -> RunConfig {
        RunConfig {
            method: self.method,
            n: self.n,
            k: self.k,
            top: self.top.unwrap_or(self.k.min(10)),
            sigma,
            b: shape.b,
            replicates: shape.replicates,
            inits: self.power.inits,
            iters: self.power.iters,
            als_max_iters: self.als_max_iters,
            als_tol: self.als_tol,
            seed: shape.seed,
        }
    }
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    plant: PlantArgs,
    /// Noise level of the plant.
    #[arg(long, default_value_t = 0.01, env = "SKETCHCP_SIGMA")]
    sigma: f64,
    #[command(flatten)]
    shape: SketchShape,
    /// Result JSON [default: stdout].
    #[arg(long, env = "SKETCHCP_OUT")]
    out: Option<PathBuf>,
}

pub fn bench(a: BenchArgs) -> Result<()> {
    let r = run_synth(&a.plant.config(&a.shape, a.sigma))?;
    eprintln!(
        "{}: residual {:.4e}, {} wrong, sketch {:.1} ms, decomposition {:.1} ms",
        r.config.method, r.residual, r.wrong, r.timing.sketch_build_ms, r.timing.decomposition_ms
    );
    emit_json(&json!(r), a.out.as_deref())
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    plant: PlantArgs,
    /// Noise levels, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "0.01", env = "SKETCHCP_SIGMA")]
    sigma: Vec<f64>,
    /// Sketch lengths, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "4096", env = "SKETCHCP_B")]
    b: Vec<usize>,
    /// Replicate counts, comma separated.
    #[arg(long = "B", value_delimiter = ',', default_value = "30", env = "SKETCHCP_REPLICATES")]
    replicates: Vec<usize>,
    #[arg(long, default_value_t = 0, env = "SKETCHCP_SEED")]
    seed: u64,
    /// Table CSV [default: stdout].
    #[arg(long, env = "SKETCHCP_OUT")]
    out: Option<PathBuf>,
    /// Also write `series,x,y` rows of residual against b.
    #[arg(long, env = "SKETCHCP_EMIT_PLOT_DATA")]
    emit_plot_data: Option<PathBuf>,
}

fn plot_rows(rows: &[RunResult]) -> String {
    let mut s = String::from("series,x,y\n");
    for r in rows {
        let c = &r.config;
        writeln!(s, "{} sigma={} B={},{},{:e}", c.method, c.sigma, c.replicates, c.b, r.residual).unwrap();
    }
    s
}

pub fn sweep(a: SweepArgs) -> Result<()> {
    let shape = SketchShape {
        b: a.b.first().copied().unwrap_or(4096),
        replicates: a.replicates.first().copied().unwrap_or(30),
        seed: a.seed,
    };
    let grid = SweepGrid {
        b: a.b,
        replicates: a.replicates,
        sigma: a.sigma,
    };
    let base = a.plant.config(&shape, grid.sigma.first().copied().unwrap_or(0.0));
    let rows = run_sweep(&base, &grid)?;
    let mut csv = format!("{CSV_HEADER}\n");
    for r in &rows {
        csv.push_str(&csv_row(r));
        csv.push('\n');
    }
    emit(&csv, a.out.as_deref())?;
    if let Some(p) = a.emit_plot_data {
        emit(&plot_rows(&rows), Some(&p))?;
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct GenTensorArgs {
    #[arg(long, default_value_t = 100, env = "SKETCHCP_N")]
    n: usize,
    #[arg(long, default_value_t = 10, env = "SKETCHCP_K")]
    k: usize,
    #[arg(long, default_value_t = 0.01, env = "SKETCHCP_SIGMA")]
    sigma: f64,
    #[arg(long, default_value_t = 0, env = "SKETCHCP_SEED")]
    seed: u64,
    /// COO output.
    #[arg(long, env = "SKETCHCP_OUT")]
    out: PathBuf,
    /// Ground-truth eigenpairs as JSON.
    #[arg(long, env = "SKETCHCP_TRUTH")]
    truth: Option<PathBuf>,
}

pub fn gen_tensor(a: GenTensorArgs) -> Result<()> {
    if a.k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    let p = synth_orthogonal_tensor(a.n, a.k, a.sigma, a.seed)?;
    let mut w = BufWriter::new(File::create(&a.out)?);
    write_coo(&p.tensor, true, &mut w)?;
    w.flush()?;
    if let Some(path) = a.truth {
        let v = json!({
            "schema_version": SCHEMA_VERSION,
            "n": a.n,
            "eigenvalues": p.truth.lambda(),
            "vectors": vectors_json(&p.truth),
        });
        emit_json(&v, Some(&path))?;
    }
    Ok(())
}
