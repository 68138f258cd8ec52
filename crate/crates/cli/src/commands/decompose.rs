use std::fs::File;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::Args;
use serde_json::json;
use sketchcp::bench::Method;
use sketchcp::decompose::{
    als_exact, als_fast, eigengap_report, robust_tpm_exact, robust_tpm_fast, robust_tpm_fast_asym, AlsConfig,
    PowerConfig,
};
use sketchcp::sketch::{read_sketch_file, SketchFile};
use sketchcp::tensor::{cp_residual, read_coo_file, CpDecomposition, DenseTensor3};
use sketchcp::{Error, Result};

use super::{sketch::{build, one_based}, vectors_json, PowerIters, SketchShape};
use crate::output::{emit_json, ms, SCHEMA_VERSION};

#[derive(Debug, Args)]
pub struct DecomposeArgs {
    /// COO tensor or sketch file (detected by its magic bytes).
    #[arg(long, env = "SKETCHCP_INPUT")]
    input: PathBuf,
    /// Components to extract.
    #[arg(long, env = "SKETCHCP_K")]
    k: usize,
    #[arg(long, default_value = "power", env = "SKETCHCP_METHOD")]
    method: Method,
    /// Sketch shape for COO input; ignored (except the seed) for sketch
    /// files, which carry their own.
    #[command(flatten)]
    shape: SketchShape,
    #[command(flatten)]
    power: PowerIters,
    #[arg(long, default_value_t = 1000, env = "SKETCHCP_ALS_MAX_ITERS")]
    als_max_iters: usize,
    #[arg(long, default_value_t = 1e-6, env = "SKETCHCP_ALS_TOL")]
    als_tol: f64,
    /// Result JSON [default: stdout].
    #[arg(long, env = "SKETCHCP_OUT")]
    out: Option<PathBuf>,
}

enum Input {
    Tensor(DenseTensor3),
    Sketch(SketchFile),
}

fn load(path: &Path) -> Result<Input> {
    let mut magic = [0u8; 4];
    let n = File::open(path)?.read(&mut magic)?;
    if n == 4 && &magic == b"SKCP" {
        Ok(Input::Sketch(read_sketch_file(path)?))
    } else {
        Ok(Input::Tensor(read_coo_file(path)?))
    }
}

fn mismatch(method: Method, file: &SketchFile) -> Error {
    let (have, need) = if file.is_symmetric() {
        ("symmetric", "asymmetric")
    } else {
        ("asymmetric", "symmetric")
    };
    Error::ModeMismatch(format!("method {method} needs {need} sketches, the input is {have}"))
}

pub fn run(a: DecomposeArgs) -> Result<()> {
    if a.k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    let input = load(&a.input)?;
    let n = match &input {
        Input::Tensor(t) => t.dim(),
        Input::Sketch(s) => s.dim(),
    };
    if a.k > n {
        return Err(Error::InvalidParameter(format!("k = {} exceeds the dimension {n}", a.k)));
    }
    let (b, replicates) = match &input {
        Input::Tensor(_) => (a.shape.b, a.shape.replicates),
        Input::Sketch(s) => (s.len(), s.num_replicates()),
    };
    let power = PowerConfig {
        k: a.k,
        inits: a.power.inits,
        iters: a.power.iters,
        b,
        replicates,
        seed: a.shape.seed,
        ..PowerConfig::default()
    };
    let als = AlsConfig {
        k: a.k,
        max_iters: a.als_max_iters,
        tol: a.als_tol,
        b,
        replicates,
        seed: a.shape.seed,
    };
    let (tensor, sketch) = match input {
        Input::Tensor(t) => (Some(t), None),
        Input::Sketch(s) => (None, Some(s)),
    };
    let input_kind = if tensor.is_some() { "coo" } else { "sketch" };
    if a.method.is_exact() && tensor.is_none() {
        return Err(Error::InvalidParameter(format!(
            "method {} needs the tensor itself, not a sketch",
            a.method
        )));
    }
    let mut sketch_ms = 0.0;
    let sketch = match (sketch, &tensor) {
        (None, Some(t)) if !a.method.is_exact() => {
            let start = Instant::now();
            let s = build(t, &a.shape, a.method == Method::Power)?;
            sketch_ms = ms(start);
            Some(s)
        }
        (s, _) => s,
    };
    let start = Instant::now();
    let d: CpDecomposition = match (a.method, tensor.as_ref(), sketch) {
        (Method::PowerExact, Some(t), _) => robust_tpm_exact(t, &power).map_err(one_based)?,
        (Method::AlsExact, Some(t), _) => als_exact(t, &als)?,
        (Method::Power, _, Some(SketchFile::Sym(s))) => robust_tpm_fast(s, &power)?.0,
        (Method::PowerAsym, _, Some(SketchFile::Asym(s))) => robust_tpm_fast_asym(s, &power)?.0,
        (Method::Als, _, Some(SketchFile::Asym(s))) => als_fast(&s, &als)?,
        (m, _, Some(f)) => return Err(mismatch(m, &f)),
        _ => unreachable!("exact methods always have a tensor, fast ones a sketch"),
    };
    let decomposition_ms = ms(start);
    let residual = match &tensor {
        Some(t) => json!(cp_residual(t, &d)?),
        None => json!(null),
    };
    let v = json!({
        "schema_version": SCHEMA_VERSION,
        "config": {
            "input": a.input.display().to_string(),
            "input_kind": input_kind,
            "method": a.method,
            "n": n,
            "k": a.k,
            "b": b,
            "B": replicates,
            "L": a.power.inits,
            "T": a.power.iters,
            "als_max_iters": a.als_max_iters,
            "als_tol": a.als_tol,
            "seed": a.shape.seed,
        },
        "symmetric": d.is_symmetric(),
        "eigenvalues": d.lambda(),
        "vectors": vectors_json(&d),
        "residual": residual,
        "eigengap": eigengap_report(&d)?,
        "timing": {
            "sketch_build_ms": sketch_ms,
            "decomposition_ms": decomposition_ms,
        },
    });
    emit_json(&v, a.out.as_deref())
}
