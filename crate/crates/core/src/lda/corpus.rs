use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand_distr::Gamma;

use crate::error::{Error, Result};
use crate::rng::{stream_rng, Rng, STREAM_CORPUS};

use super::model::LdaModel;

/// Bag-of-words document: `(word id, count)` pairs sorted by word id.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Document {
    words: Vec<(usize, u32)>,
}

impl Document {
    /// Builds a document from `(word, count)` pairs in any order; repeated
    /// words are merged and zero counts dropped.
    pub fn from_counts(pairs: impl IntoIterator<Item = (usize, u32)>) -> Self {
        let mut words: Vec<(usize, u32)> = pairs.into_iter().filter(|p| p.1 > 0).collect();
        words.sort_unstable_by_key(|p| p.0);
        let mut merged: Vec<(usize, u32)> = Vec::with_capacity(words.len());
        for (w, c) in words {
            match merged.last_mut() {
                Some(last) if last.0 == w => last.1 += c,
                _ => merged.push((w, c)),
            }
        }
        Document { words: merged }
    }

    pub fn from_tokens(tokens: &[usize]) -> Self {
        Self::from_counts(tokens.iter().map(|&w| (w, 1)))
    }

    pub fn words(&self) -> &[(usize, u32)] {
        &self.words
    }

    /// Number of tokens `m_d`.
    pub fn len(&self) -> usize {
        self.words.iter().map(|p| p.1 as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    vocab_size: usize,
    docs: Vec<Document>,
}

impl Corpus {
    pub fn new(vocab_size: usize, docs: Vec<Document>) -> Result<Self> {
        if vocab_size == 0 {
            return Err(Error::param("vocabulary size must be positive"));
        }
        for (d, doc) in docs.iter().enumerate() {
            if let Some(&(w, _)) = doc.words.last() {
                if w >= vocab_size {
                    return Err(Error::param(format!(
                        "document {d} uses word id {w} outside a vocabulary of {vocab_size}"
                    )));
                }
            }
        }
        Ok(Corpus { vocab_size, docs })
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn docs(&self) -> &[Document] {
        &self.docs
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn total_tokens(&self) -> usize {
        self.docs.iter().map(Document::len).sum()
    }

    /// Splits off the documents from index `at` onwards.
    pub fn split_at(&self, at: usize) -> (Corpus, Corpus) {
        let at = at.min(self.docs.len());
        (
            Corpus {
                vocab_size: self.vocab_size,
                docs: self.docs[..at].to_vec(),
            },
            Corpus {
                vocab_size: self.vocab_size,
                docs: self.docs[at..].to_vec(),
            },
        )
    }
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

/// Reads the UCI bag-of-words format: three header lines `D`, `W`, `NNZ`,
/// then `docID wordID count` triples with 1-based ids. Documents that never
/// appear are kept as empty documents.
pub fn read_docword<R: Read>(reader: R) -> Result<Corpus> {
    let mut lines = BufReader::new(reader).lines().enumerate();
    let mut header = [0usize; 3];
    let mut filled = 0;
    while filled < 3 {
        let (no, line) = lines
            .next()
            .ok_or_else(|| parse_err(filled + 1, "missing header line"))?;
        let line = line?;
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        header[filled] = t
            .parse()
            .map_err(|_| parse_err(no + 1, format!("expected an integer, found {t:?}")))?;
        filled += 1;
    }
    let [d, v, nnz] = header;
    let mut pairs: Vec<Vec<(usize, u32)>> = vec![Vec::new(); d];
    let mut seen = 0usize;
    for (no, line) in lines {
        let line = line?;
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        let f: Vec<&str> = t.split_whitespace().collect();
        if f.len() != 3 {
            return Err(parse_err(no + 1, "expected `docID wordID count`"));
        }
        let num = |s: &str| -> Result<usize> {
            s.parse()
                .map_err(|_| parse_err(no + 1, format!("expected an integer, found {s:?}")))
        };
        let (doc, word, count) = (num(f[0])?, num(f[1])?, num(f[2])?);
        if doc == 0 || doc > d {
            return Err(parse_err(no + 1, format!("document id {doc} outside 1..={d}")));
        }
        if word == 0 || word > v {
            return Err(parse_err(no + 1, format!("word id {word} outside 1..={v}")));
        }
        let count = u32::try_from(count).map_err(|_| parse_err(no + 1, "count too large"))?;
        pairs[doc - 1].push((word - 1, count));
        seen += 1;
    }
    if seen != nnz {
        return Err(Error::Format(format!("header declares {nnz} entries, found {seen}")));
    }
    Corpus::new(v, pairs.into_iter().map(Document::from_counts).collect())
}

pub fn read_docword_file(path: impl AsRef<Path>) -> Result<Corpus> {
    read_docword(std::fs::File::open(path)?)
}

pub fn write_docword<W: Write>(c: &Corpus, mut out: W) -> Result<()> {
    let nnz: usize = c.docs.iter().map(|d| d.words.len()).sum();
    writeln!(out, "{}\n{}\n{}", c.docs.len(), c.vocab_size, nnz)?;
    for (d, doc) in c.docs.iter().enumerate() {
        for &(w, n) in &doc.words {
            writeln!(out, "{} {} {}", d + 1, w + 1, n)?;
        }
    }
    Ok(())
}

pub fn write_docword_file(c: &Corpus, path: impl AsRef<Path>) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_docword(c, &mut f)?;
    f.flush()?;
    Ok(())
}

/// One token per line; line `i` names word id `i` (0-based here).
pub fn read_vocab<R: Read>(reader: R) -> Result<Vec<String>> {
    BufReader::new(reader)
        .lines()
        .map(|l| Ok(l?.trim().to_string()))
        .collect()
}

pub fn read_vocab_file(path: impl AsRef<Path>) -> Result<Vec<String>> {
    read_vocab(std::fs::File::open(path)?)
}

/// Concentration of the symmetric Dirichlet the synthetic topic columns are
/// drawn from.
pub const TOPIC_CONCENTRATION: f64 = 0.1;

fn dirichlet(rng: &mut Rng, alpha: &[f64]) -> Result<Vec<f64>> {
    let gammas: Vec<Gamma<f64>> = alpha
        .iter()
        .map(|&a| Gamma::new(a, 1.0).map_err(|e| Error::param(format!("Dirichlet parameter {a}: {e}"))))
        .collect::<Result<_>>()?;
    loop {
        let g: Vec<f64> = gammas.iter().map(|d| d.sample(rng)).collect();
        let s: f64 = g.iter().sum();
        if s > 0.0 && s.is_finite() {
            return Ok(g.into_iter().map(|x| x / s).collect());
        }
    }
}

/// LDA generative plant with topic columns from a symmetric
/// `Dirichlet(beta)` over the vocabulary.
pub fn generate_synthetic_corpus_with(
    vocab_size: usize,
    k: usize,
    docs: usize,
    alpha: &[f64],
    doc_len: usize,
    beta: f64,
    seed: u64,
) -> Result<(Corpus, LdaModel)> {
    if vocab_size == 0 || k == 0 || doc_len == 0 {
        return Err(Error::param("V, k and doc_len must be positive"));
    }
    if alpha.len() != k {
        return Err(Error::dim(k, alpha.len()));
    }
    if alpha.iter().any(|&a| !(a > 0.0 && a.is_finite())) || !(beta > 0.0) {
        return Err(Error::param("Dirichlet parameters must be positive"));
    }
    let mut rng = stream_rng(seed, STREAM_CORPUS << 32);
    let beta_vec = vec![beta; vocab_size];
    let mut phi = DMatrix::zeros(vocab_size, k);
    for j in 0..k {
        let col = dirichlet(&mut rng, &beta_vec)?;
        phi.set_column(j, &nalgebra::DVector::from_vec(col));
    }
    let mut out = Vec::with_capacity(docs);
    for d in 0..docs {
        let mut rng = stream_rng(seed, (STREAM_CORPUS << 32) | (1 << 31) | d as u64);
        let h = dirichlet(&mut rng, alpha)?;
        let mix: Vec<f64> = (0..vocab_size)
            .map(|w| (0..k).map(|j| phi[(w, j)] * h[j]).sum::<f64>())
            .collect();
        let pick = WeightedIndex::new(&mix).map_err(|e| Error::Degenerate(format!("word distribution: {e}")))?;
        let tokens: Vec<usize> = (0..doc_len).map(|_| pick.sample(&mut rng)).collect();
        out.push(Document::from_tokens(&tokens));
    }
    let model = LdaModel::new(phi, alpha.to_vec())?;
    Ok((Corpus::new(vocab_size, out)?, model))
}

/// [`generate_synthetic_corpus_with`] at [`TOPIC_CONCENTRATION`].
pub fn generate_synthetic_corpus(
    vocab_size: usize,
    k: usize,
    docs: usize,
    alpha: &[f64],
    doc_len: usize,
    seed: u64,
) -> Result<(Corpus, LdaModel)> {
    generate_synthetic_corpus_with(vocab_size, k, docs, alpha, doc_len, TOPIC_CONCENTRATION, seed)
}
