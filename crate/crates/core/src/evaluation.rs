//! Summary quality metrics: ROUGE-1/2/L, BLEU, compression ratio and
//! embedding similarity.
//!
//! All metrics share one tokenizer: lowercase, split on non-alphanumeric
//! characters. BLEU uses n = 1..4 with clipped counts. When an order has no
//! matching n-grams its precision becomes `1 / (total + 1)` (add-one on the
//! zero count); an order with zero candidate n-grams and zero matches
//! therefore contributes 1. An empty candidate scores 0.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::{cosine, EmbedError, Embedder};
use crate::summarizer::Summary;
use crate::text::tokenize;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("source text has no tokens")]
    ZeroSource,
    #[error("cannot compare empty text")]
    EmptyText,
    #[error(transparent)]
    Embed(EmbedError),
}

impl From<EmbedError> for EvalError {
    fn from(e: EmbedError) -> Self {
        match e {
            EmbedError::EmptyText => EvalError::EmptyText,
            other => EvalError::Embed(other),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub recall: f64,
    pub precision: f64,
    pub f1: f64,
}

impl Prf {
    pub const ZERO: Prf = Prf {
        recall: 0.0,
        precision: 0.0,
        f1: 0.0,
    };

    fn from_counts(overlap: usize, reference: usize, candidate: usize) -> Prf {
        if reference == 0 || candidate == 0 {
            return Prf::ZERO;
        }
        let recall = overlap as f64 / reference as f64;
        let precision = overlap as f64 / candidate as f64;
        Prf {
            recall,
            precision,
            f1: harmonic_mean(recall, precision),
        }
    }
}

fn harmonic_mean(r: f64, p: f64) -> f64 {
    if r + p == 0.0 {
        0.0
    } else {
        2.0 * r * p / (r + p)
    }
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if n > 0 && tokens.len() >= n {
        for gram in tokens.windows(n) {
            *counts.entry(gram).or_insert(0) += 1;
        }
    }
    counts
}

/// Sum over candidate n-grams of min(candidate count, reference count).
fn clipped_overlap(cand: &HashMap<&[String], usize>, reference: &HashMap<&[String], usize>) -> usize {
    cand.iter()
        .map(|(gram, &c)| c.min(reference.get(gram).copied().unwrap_or(0)))
        .sum()
}

fn gram_total(tokens: &[String], n: usize) -> usize {
    (tokens.len() + 1).saturating_sub(n)
}

pub fn rouge_n(candidate: &str, reference: &str, n: usize) -> Prf {
    let (c, r) = (tokenize(candidate), tokenize(reference));
    let overlap = clipped_overlap(&ngram_counts(&c, n), &ngram_counts(&r, n));
    Prf::from_counts(overlap, gram_total(&r, n), gram_total(&c, n))
}

pub fn lcs_len(a: &[String], b: &[String]) -> usize {
    let mut row = vec![0usize; b.len() + 1];
    for x in a {
        let mut diag = 0;
        for (j, y) in b.iter().enumerate() {
            let up = row[j + 1];
            row[j + 1] = if x == y { diag + 1 } else { up.max(row[j]) };
            diag = up;
        }
    }
    row[b.len()]
}

pub fn rouge_l(candidate: &str, reference: &str) -> Prf {
    let (c, r) = (tokenize(candidate), tokenize(reference));
    Prf::from_counts(lcs_len(&c, &r), r.len(), c.len())
}

pub fn bleu(candidate: &str, reference: &str) -> f64 {
    let (c, r) = (tokenize(candidate), tokenize(reference));
    if c.is_empty() {
        return 0.0;
    }
    let mut log_sum = 0.0;
    for n in 1..=4 {
        let total = gram_total(&c, n);
        let matches = clipped_overlap(&ngram_counts(&c, n), &ngram_counts(&r, n));
        let p = if matches == 0 {
            1.0 / (total as f64 + 1.0)
        } else {
            matches as f64 / total as f64
        };
        log_sum += p.ln();
    }
    let bp = if c.len() < r.len() {
        (1.0 - r.len() as f64 / c.len() as f64).exp()
    } else {
        1.0
    };
    (bp * (log_sum / 4.0).exp()).clamp(0.0, 1.0)
}

pub fn compression_ratio(summary: &str, source: &str) -> Result<f64, EvalError> {
    let source_tokens = tokenize(source).len();
    if source_tokens == 0 {
        return Err(EvalError::ZeroSource);
    }
    Ok(tokenize(summary).len() as f64 / source_tokens as f64)
}

pub fn embedding_similarity(candidate: &str, reference: &str, embedder: &dyn Embedder) -> Result<f64, EvalError> {
    if candidate.trim().is_empty() || reference.trim().is_empty() {
        return Err(EvalError::EmptyText);
    }
    let a = embedder.embed(candidate)?;
    let b = embedder.embed(reference)?;
    Ok(cosine(&a, &b)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenCounts {
    pub candidate: usize,
    pub reference: usize,
    pub source: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub rouge1_r: f64,
    pub rouge1_p: f64,
    pub rouge1_f: f64,
    pub rouge2_r: f64,
    pub rouge2_p: f64,
    pub rouge2_f: f64,
    #[serde(rename = "rougeL_r")]
    pub rouge_l_r: f64,
    #[serde(rename = "rougeL_p")]
    pub rouge_l_p: f64,
    #[serde(rename = "rougeL_f")]
    pub rouge_l_f: f64,
    pub bleu: f64,
    pub compression_ratio: f64,
    pub embedding_similarity: f64,
    pub token_counts: TokenCounts,
}

impl MetricReport {
    pub fn compute(candidate: &str, reference: &str, source: &str, embedder: &dyn Embedder) -> Result<Self, EvalError> {
        let compression_ratio = compression_ratio(candidate, source)?;
        let embedding_similarity = embedding_similarity(candidate, reference, embedder)?;
        let r1 = rouge_n(candidate, reference, 1);
        let r2 = rouge_n(candidate, reference, 2);
        let rl = rouge_l(candidate, reference);
        Ok(MetricReport {
            rouge1_r: r1.recall,
            rouge1_p: r1.precision,
            rouge1_f: r1.f1,
            rouge2_r: r2.recall,
            rouge2_p: r2.precision,
            rouge2_f: r2.f1,
            rouge_l_r: rl.recall,
            rouge_l_p: rl.precision,
            rouge_l_f: rl.f1,
            bleu: bleu(candidate, reference),
            compression_ratio,
            embedding_similarity,
            token_counts: TokenCounts {
                candidate: tokenize(candidate).len(),
                reference: tokenize(reference).len(),
                source: tokenize(source).len(),
            },
        })
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<22}{:>10}{:>10}{:>10}", "metric", "recall", "precision", "f1");
        for (name, r, p, f) in [
            ("rouge-1", self.rouge1_r, self.rouge1_p, self.rouge1_f),
            ("rouge-2", self.rouge2_r, self.rouge2_p, self.rouge2_f),
            ("rouge-l", self.rouge_l_r, self.rouge_l_p, self.rouge_l_f),
        ] {
            let _ = writeln!(out, "{name:<22}{r:>10.4}{p:>10.4}{f:>10.4}");
        }
        let _ = writeln!(out, "{:<22}{:>10.4}", "bleu", self.bleu);
        let _ = writeln!(out, "{:<22}{:>10.4}", "compression ratio", self.compression_ratio);
        let _ = writeln!(out, "{:<22}{:>10.4}", "embedding similarity", self.embedding_similarity);
        let t = &self.token_counts;
        let _ = writeln!(
            out,
            "{:<22}candidate={} reference={} source={}",
            "tokens", t.candidate, t.reference, t.source
        );
        out
    }
}

/// Reads an evaluation input. A summary JSON file contributes its item
/// sentences, a JSONL corpus contributes its document texts, anything else
/// is taken as plain text.
pub fn read_eval_text(path: &Path) -> Result<String, EvalError> {
    let raw = std::fs::read_to_string(path).map_err(|source| EvalError::Io {
        path: path.to_owned(),
        source,
    })?;
    if let Ok(summary) = serde_json::from_str::<Summary>(&raw) {
        return Ok(summary.plain_text());
    }
    let lines: Vec<&str> = raw.lines().filter(|l| !l.trim().is_empty()).collect();
    if !lines.is_empty() {
        let texts: Option<Vec<String>> = lines
            .iter()
            .map(|l| {
                serde_json::from_str::<serde_json::Value>(l)
                    .ok()
                    .and_then(|v| v.get("text")?.as_str().map(str::to_owned))
            })
            .collect();
        if let Some(texts) = texts {
            return Ok(texts.join("\n\n"));
        }
    }
    Ok(raw)
}

pub fn evaluate(
    candidate_path: &Path,
    reference_path: &Path,
    source_path: &Path,
    embedder: &dyn Embedder,
) -> Result<MetricReport, EvalError> {
    let candidate = read_eval_text(candidate_path)?;
    let reference = read_eval_text(reference_path)?;
    let source = read_eval_text(source_path)?;
    MetricReport::compute(&candidate, &reference, &source, embedder)
}
