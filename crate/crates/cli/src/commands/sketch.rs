use std::path::PathBuf;
use std::time::Instant;

use clap::Args;
use sketchcp::sketch::{write_sketch_file, AsymTensorSketchSet, SketchFile, SymTensorSketchSet};
use sketchcp::tensor::{read_coo_file, DenseTensor3};
use sketchcp::{Error, Result};

use super::SketchShape;
use crate::output::ms;

#[derive(Debug, Args)]
pub struct SketchArgs {
    /// COO tensor.
    #[arg(long, env = "SKETCHCP_INPUT")]
    input: PathBuf,
    #[command(flatten)]
    shape: SketchShape,
    /// Build the symmetric (colliding-hash) sketch; the input must be
    /// symmetric.
    #[arg(long, env = "SKETCHCP_SYM")]
    sym: bool,
    /// Sketch file to write.
    #[arg(long, env = "SKETCHCP_OUT")]
    out: PathBuf,
}

/// Symmetry failures are reported with the 1-based indices of the COO file.
pub fn one_based(e: Error) -> Error {
    match e {
        Error::NotSymmetric { i, j, k } => Error::Format(format!(
            "input is not symmetric: entry ({}, {}, {}) differs from one of its permutations",
            i + 1,
            j + 1,
            k + 1
        )),
        e => e,
    }
}

pub fn build(t: &DenseTensor3, shape: &SketchShape, sym: bool) -> Result<SketchFile> {
    let n = t.dim();
    if sym {
        let mut s = SymTensorSketchSet::new(n, shape.b, shape.replicates, shape.seed)?;
        s.sketch_dense(t).map_err(one_based)?;
        Ok(SketchFile::Sym(s))
    } else {
        let mut s = AsymTensorSketchSet::new(n, shape.b, shape.replicates, shape.seed)?;
        s.sketch_dense(t)?;
        Ok(SketchFile::Asym(s))
    }
}

pub fn run(a: SketchArgs) -> Result<()> {
    let t = read_coo_file(&a.input)?;
    let start = Instant::now();
    let file = build(&t, &a.shape, a.sym)?;
    let build_ms = ms(start);
    let data_norm = match &file {
        SketchFile::Sym(s) => s.data_norm(),
        SketchFile::Asym(s) => s.data_norm(),
    };
    write_sketch_file(&file, &a.out)?;
    eprintln!(
        "{} sketch n={} b={} B={} built in {build_ms:.1} ms; ||T||_F = {:.6e}, sketch data norm = {:.6e} ({:.6e} per replicate)",
        if a.sym { "symmetric" } else { "asymmetric" },
        t.dim(),
        a.shape.b,
        a.shape.replicates,
        t.frobenius(),
        data_norm,
        data_norm / (a.shape.replicates.max(1) as f64).sqrt(),
    );
    Ok(())
}
