#![allow(dead_code)]

pub mod stub;

use std::path::PathBuf;

use qasum::corpus::{load_corpus, CorpusFormat, SegmentedCorpus, DEFAULT_MAX_PARAGRAPH_TOKENS};
use qasum::embedding::HashedEmbedder;
use qasum::pipeline::build_index;
use qasum::question_bank::{load_question_bank, QuestionBank};
use qasum::vector_index::VectorIndex;
use serde_json::Value;

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn oracle(name: &str) -> Value {
    let path = fixtures().join("oracle").join(format!("{name}.json"));
    serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap()
}

pub fn corpus() -> SegmentedCorpus {
    let docs = load_corpus(&fixtures().join("corpus.jsonl"), CorpusFormat::Jsonl).unwrap();
    SegmentedCorpus::new(docs, DEFAULT_MAX_PARAGRAPH_TOKENS)
}

pub fn bank() -> QuestionBank {
    load_question_bank(&fixtures().join("question_bank.json")).unwrap()
}

pub fn embedder() -> HashedEmbedder {
    HashedEmbedder::new(256)
}

/// The fixture index as it reads back from disk (f32 components).
pub fn disk_index(corpus: &SegmentedCorpus) -> VectorIndex {
    let built = build_index(corpus, &embedder()).unwrap();
    VectorIndex::from_bytes(&built.to_bytes().unwrap()).unwrap()
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}
