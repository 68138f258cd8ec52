//! `sketchcp` command-line front end.

mod commands;
mod output;

use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sketchcp::Error;

use commands::{corpus, decompose, lda, sketch, synth};

#[derive(Debug, Parser)]
#[command(name = "sketchcp", version, about = "Sketched CP tensor decomposition and spectral LDA")]
struct Cli {
    /// Worker threads; 0 uses every available core.
    #[arg(long, global = true, default_value_t = 0, env = "SKETCHCP_THREADS")]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Plant an orthogonal tensor, decompose it and score the result.
    SynthBench(synth::BenchArgs),
    /// Run synth-bench over a grid of (sigma, B, b) and write CSV.
    Sweep(synth::SweepArgs),
    /// Write a planted orthogonal tensor as COO.
    GenTensor(synth::GenTensorArgs),
    /// Build a sketch set from a COO tensor.
    Sketch(sketch::SketchArgs),
    /// Decompose a COO tensor or a sketch file.
    Decompose(decompose::DecomposeArgs),
    /// Fit a spectral LDA model to a docword corpus.
    Lda(lda::LdaArgs),
    /// Sample a synthetic LDA corpus.
    GenCorpus(corpus::GenCorpusArgs),
}

/// Exit status for a library error: 2 for bad arguments, 3 for bad input
/// files, 4 for numerical failures.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Parse { .. } | Error::Format(_) | Error::Io(_) | Error::NotSymmetric { .. } => 3,
        Error::Degenerate(_) | Error::RankDeficient { .. } | Error::ZeroEigenvalue { .. } => 4,
        Error::DimensionMismatch { .. }
        | Error::InvalidParameter(_)
        | Error::MemoryCap { .. }
        | Error::ModeMismatch(_) => 2,
    }
}

fn run(cli: Cli) -> sketchcp::Result<()> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build_global()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    match cli.command {
        Command::SynthBench(a) => synth::bench(a),
        Command::Sweep(a) => synth::sweep(a),
        Command::GenTensor(a) => synth::gen_tensor(a),
        Command::Sketch(a) => sketch::run(a),
        Command::Decompose(a) => decompose::run(a),
        Command::Lda(a) => lda::run(a),
        Command::GenCorpus(a) => corpus::run(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
