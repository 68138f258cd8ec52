use std::path::PathBuf;

use clap::Args;
use serde_json::json;
use sketchcp::lda::{generate_synthetic_corpus_with, write_docword_file, TOPIC_CONCENTRATION};
use sketchcp::Result;

use crate::output::emit_json;

#[derive(Debug, Args)]
pub struct GenCorpusArgs {
    #[arg(long, default_value_t = 100, env = "SKETCHCP_VOCAB_SIZE")]
    vocab_size: usize,
    #[arg(long, default_value_t = 5, env = "SKETCHCP_K")]
    k: usize,
    /// Training documents.
    #[arg(long, default_value_t = 5000, env = "SKETCHCP_DOCS")]
    docs: usize,
    /// Held-out documents, drawn after the training ones.
    #[arg(long, default_value_t = 0, env = "SKETCHCP_HELDOUT_DOCS")]
    heldout_docs: usize,
    #[arg(long, default_value_t = 50, env = "SKETCHCP_DOC_LEN")]
    doc_len: usize,
    /// Dirichlet parameter of every topic in the mixture prior.
    #[arg(long, default_value_t = 0.2, env = "SKETCHCP_ALPHA")]
    alpha: f64,
    /// Dirichlet concentration of the topic-word columns.
    #[arg(long, default_value_t = TOPIC_CONCENTRATION, env = "SKETCHCP_BETA")]
    beta: f64,
    #[arg(long, default_value_t = 0, env = "SKETCHCP_SEED")]
    seed: u64,
    /// Training docword file.
    #[arg(long, env = "SKETCHCP_OUT")]
    out: PathBuf,
    #[arg(long, env = "SKETCHCP_HELDOUT_OUT", requires = "heldout_docs")]
    heldout_out: Option<PathBuf>,
    /// Generating model as JSON.
    #[arg(long, env = "SKETCHCP_TRUTH")]
    truth: Option<PathBuf>,
}

pub fn run(a: GenCorpusArgs) -> Result<()> {
    let alpha = vec![a.alpha; a.k];
    let total = a.docs + a.heldout_docs;
    let (corpus, model) = generate_synthetic_corpus_with(a.vocab_size, a.k, total, &alpha, a.doc_len, a.beta, a.seed)?;
    let (train, held) = corpus.split_at(a.docs);
    write_docword_file(&train, &a.out)?;
    if let Some(p) = &a.heldout_out {
        write_docword_file(&held, p)?;
    }
    if let Some(p) = &a.truth {
        emit_json(&json!(model.to_json(None)), Some(p))?;
    }
    Ok(())
}
