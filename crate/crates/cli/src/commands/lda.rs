use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::Args;
use serde_json::{json, Value};
use sketchcp::decompose::PowerConfig;
use sketchcp::lda::{
    fit, heldout_likelihood, match_topics, read_docword_file, read_vocab_file, Corpus, LdaConfig, LdaModel,
    ModelJson,
};
use sketchcp::{Error, Result};

use super::{PowerIters, SketchShape};
use crate::output::{dur_ms, emit, emit_json, ms, SCHEMA_VERSION};

#[derive(Debug, Args)]
pub struct LdaArgs {
    /// Training corpus in docword format.
    #[arg(long, env = "SKETCHCP_DOCWORD")]
    docword: PathBuf,
    /// Held-out corpus in docword format.
    #[arg(long, env = "SKETCHCP_HELDOUT")]
    heldout: Option<PathBuf>,
    /// One word per line; stored in the model JSON.
    #[arg(long, env = "SKETCHCP_VOCAB")]
    vocab: Option<PathBuf>,
    /// Number of topics.
    #[arg(long, env = "SKETCHCP_K")]
    k: usize,
    /// Sum of the Dirichlet topic-mixture parameters.
    #[arg(long, default_value_t = 1.0, env = "SKETCHCP_ALPHA0")]
    alpha0: f64,
    #[command(flatten)]
    shape: SketchShape,
    #[command(flatten)]
    power: PowerIters,
    /// Decompose the dense whitened third moment instead of sketching it.
    #[arg(long, env = "SKETCHCP_EXACT")]
    exact: bool,
    /// Ground-truth model JSON to score the fit against.
    #[arg(long, env = "SKETCHCP_TRUTH")]
    truth: Option<PathBuf>,
    /// Model JSON.
    #[arg(long, env = "SKETCHCP_OUT")]
    out: Option<PathBuf>,
    /// Report JSON [default: stdout].
    #[arg(long, env = "SKETCHCP_REPORT")]
    report: Option<PathBuf>,
    /// `series,x,y` rows of held-out likelihood against elapsed ms.
    #[arg(long, env = "SKETCHCP_EMIT_PLOT_DATA")]
    emit_plot_data: Option<PathBuf>,
}

fn read_truth(path: &Path) -> Result<LdaModel> {
    let text = std::fs::read_to_string(path)?;
    let j: ModelJson = serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    LdaModel::from_json(&j)
}

fn load_heldout(path: &Path, vocab_size: usize) -> Result<Corpus> {
    let held = read_docword_file(path)?;
    if held.vocab_size() > vocab_size {
        return Err(Error::InvalidParameter(format!(
            "held-out vocabulary ({} words) is larger than the training vocabulary ({vocab_size})",
            held.vocab_size()
        )));
    }
    Corpus::new(vocab_size, held.docs().to_vec())
}

pub fn run(a: LdaArgs) -> Result<()> {
    if a.k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    if !(a.alpha0 > 0.0 && a.alpha0.is_finite()) {
        return Err(Error::InvalidParameter("alpha0 must be positive".into()));
    }
    let corpus = read_docword_file(&a.docword)?;
    let vocab_size = corpus.vocab_size();
    let held = a.heldout.as_deref().map(|p| load_heldout(p, vocab_size)).transpose()?;
    let vocab = a.vocab.as_deref().map(read_vocab_file).transpose()?;
    if let Some(v) = &vocab {
        if v.len() != vocab_size {
            return Err(Error::Format(format!(
                "vocabulary file has {} words, the corpus {vocab_size}",
                v.len()
            )));
        }
    }
    let truth = a.truth.as_deref().map(read_truth).transpose()?;
    if let Some(t) = &truth {
        if t.vocab_size() != vocab_size || t.num_topics() != a.k {
            return Err(Error::InvalidParameter(format!(
                "truth model is {} x {}, the fit {vocab_size} x {}",
                t.vocab_size(),
                t.num_topics(),
                a.k
            )));
        }
    }
    let cfg = LdaConfig {
        alpha0: a.alpha0,
        power: PowerConfig {
            k: a.k,
            inits: a.power.inits,
            iters: a.power.iters,
            b: a.shape.b,
            replicates: a.shape.replicates,
            seed: a.shape.seed,
            ..PowerConfig::default()
        },
        exact: a.exact,
    };

    let start = Instant::now();
    let f = fit(&corpus, &cfg)?;
    let fit_ms = ms(start);
    let eval = Instant::now();
    let likelihood = held.as_ref().map(|h| heldout_likelihood(&f.model, h)).transpose()?;
    let truth_json = match &truth {
        Some(t) => {
            let matches = match_topics(f.model.phi(), t.phi())?;
            let max_l1 = matches.iter().map(|m| m.2).fold(0.0, f64::max);
            let true_ll = held.as_ref().map(|h| heldout_likelihood(t, h)).transpose()?;
            let gap = match (&likelihood, &true_ll) {
                (Some(l), Some(t)) => json!(t.per_word - l.per_word),
                _ => Value::Null,
            };
            json!({
                "matches": matches
                    .iter()
                    .map(|&(e, t, l1)| json!({ "estimated": e, "truth": t, "l1": l1 }))
                    .collect::<Vec<_>>(),
                "max_l1": max_l1,
                "likelihood": true_ll,
                "likelihood_gap": gap,
            })
        }
        None => Value::Null,
    };
    let eval_ms = ms(eval);

    if let Some(p) = &a.out {
        emit_json(&json!(f.model.to_json(vocab.as_deref())), Some(p))?;
    }
    let t = &f.times;
    let report = json!({
        "schema_version": SCHEMA_VERSION,
        "config": {
            "docword": a.docword.display().to_string(),
            "heldout": a.heldout.as_ref().map(|p| p.display().to_string()),
            "k": a.k,
            "alpha0": a.alpha0,
            "b": a.shape.b,
            "B": a.shape.replicates,
            "L": a.power.inits,
            "T": a.power.iters,
            "seed": a.shape.seed,
            "exact": a.exact,
        },
        "corpus": {
            "documents": corpus.len(),
            "vocab_size": vocab_size,
            "tokens": corpus.total_tokens(),
        },
        "m3": f.m3,
        "whitening_eigenvalues": f.whitening.eigenvalues(),
        "eigenvalues": f.decomposition.lambda(),
        "alpha": f.model.alpha(),
        "likelihood": likelihood,
        "truth": truth_json,
        "timing": {
            "moments_ms": dur_ms(t.moments),
            "whitening_ms": dur_ms(t.whitening),
            "sketch_ms": dur_ms(t.sketch),
            "decomposition_ms": dur_ms(t.decomposition),
            "recovery_ms": dur_ms(t.recovery),
            "fit_ms": fit_ms,
            "evaluation_ms": eval_ms,
        },
    });
    emit_json(&report, a.report.as_deref())?;
    if let Some(p) = &a.emit_plot_data {
        let mut csv = String::from("series,x,y\n");
        if let Some(l) = &likelihood {
            let series = if a.exact { "exact" } else { "sketch" };
            csv.push_str(&format!("{series},{fit_ms:.3},{:e}\n", l.per_word));
        }
        emit(&csv, Some(p))?;
    }
    Ok(())
}
