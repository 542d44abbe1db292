//! Question-driven extractive summarization of clinical notes.
//!
//! Notes are segmented into paragraphs and sentences, paragraphs are
//! embedded into an exact cosine index, and a bank of questions is answered
//! one at a time from retrieved context. Answers that clear a fused score
//! threshold are deduplicated and assembled into a summary with provenance.

pub mod answer_engine;
pub mod corpus;
pub mod embedding;
pub mod evaluation;
pub mod llm_gateway;
pub mod pipeline;
pub mod question_bank;
pub mod summarizer;
pub mod text;
pub mod vector_index;
