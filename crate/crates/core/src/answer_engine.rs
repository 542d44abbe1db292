//! Per-question answering: retrieve context paragraphs, build the prompt,
//! extract an answer sentence with a confidence, score noun-phrase agreement
//! between question and answer, and fuse the two scores.

use std::collections::HashSet;
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::corpus::{DocPosition, ParagraphRecord, SegmentedCorpus, Sentence};
use crate::embedding::{cosine, EmbedError, Embedder};
use crate::llm_gateway::{ChatReply, Gateway, GatewayError};
use crate::question_bank::{Question, RetrievalParams};
use crate::text::{content_tokens, is_stopword, tokenize};
use crate::vector_index::{IndexError, SearchFilter, SearchHit, VectorIndex};

pub const PROMPT_TEMPLATE_VERSION: &str = "v1";
const PROMPT_HEADER: &str = include_str!("../assets/prompt_v1.txt");

#[derive(Debug, Error)]
pub enum AnswerError {
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("question {q_id:?}: no indexed paragraph passes the filter")]
    EmptyRetrieval { q_id: String },
    #[error("question {q_id:?}: no answer ({reason})")]
    NoAnswer { q_id: String, reason: String },
    #[error("question {q_id:?}: source sentence not found in retrieved context: {sentence:?}")]
    UnlocatableSource { q_id: String, sentence: String },
    #[error("index entry {para_id:?} has no matching paragraph in the corpus")]
    UnknownParagraph { para_id: String },
}

impl AnswerError {
    /// Errors that mean "this question has no answer here" rather than a
    /// failed run.
    pub fn is_no_answer(&self) -> bool {
        matches!(self, AnswerError::NoAnswer { .. } | AnswerError::EmptyRetrieval { .. })
    }
}

/// Question plus its retrieved paragraphs. Always holds at least one hit.
#[derive(Debug, Clone)]
pub struct RetrievedContext {
    question: Question,
    hits: Vec<SearchHit>,
    paragraphs: Vec<ParagraphRecord>,
    context_text: String,
}

impl RetrievedContext {
    pub fn new(
        question: Question,
        hits: Vec<SearchHit>,
        paragraphs: Vec<ParagraphRecord>,
    ) -> Result<Self, AnswerError> {
        if hits.is_empty() {
            return Err(AnswerError::EmptyRetrieval { q_id: question.q_id });
        }
        debug_assert_eq!(hits.len(), paragraphs.len());
        let context_text = paragraphs
            .iter()
            .map(|p| format!("[{}] {}", p.paragraph.para_id, p.paragraph.text))
            .collect::<Vec<_>>()
            .join("\n\n");
        Ok(RetrievedContext {
            question,
            hits,
            paragraphs,
            context_text,
        })
    }

    pub fn question(&self) -> &Question {
        &self.question
    }

    pub fn hits(&self) -> &[SearchHit] {
        &self.hits
    }

    /// Retrieved paragraphs in hit (rank) order.
    pub fn paragraphs(&self) -> &[ParagraphRecord] {
        &self.paragraphs
    }

    pub fn context_text(&self) -> &str {
        &self.context_text
    }

    /// Every context sentence with its document position, in document order.
    pub fn sentences_in_doc_order(&self) -> Vec<(DocPosition, &Sentence)> {
        let mut out: Vec<(DocPosition, &Sentence)> = self
            .paragraphs
            .iter()
            .flat_map(|p| {
                p.sentences.iter().map(move |s| {
                    (
                        DocPosition {
                            doc: p.doc_index,
                            paragraph: p.paragraph.ordinal,
                            sentence: s.ordinal,
                        },
                        s,
                    )
                })
            })
            .collect();
        out.sort_by_key(|(pos, _)| *pos);
        out
    }
}

pub fn retrieve_context(
    question: &Question,
    params: &RetrievalParams,
    index: &VectorIndex,
    corpus: &SegmentedCorpus,
    embedder: &dyn Embedder,
    scope: Option<&SearchFilter>,
) -> Result<RetrievedContext, AnswerError> {
    let query = embedder.embed(&question.text)?;
    let mut filter = scope.cloned().unwrap_or_default();
    if let Some(types) = &question.note_type_filter {
        filter.note_types = Some(match filter.note_types {
            Some(existing) => existing.intersection(types).copied().collect(),
            None => types.clone(),
        });
    }
    let filter = (filter != SearchFilter::default()).then_some(filter);
    let hits = index.search(&query, question.effective_k(params), filter.as_ref())?;
    let paragraphs = hits
        .iter()
        .map(|h| {
            corpus
                .paragraph(&h.para_id)
                .cloned()
                .ok_or_else(|| AnswerError::UnknownParagraph {
                    para_id: h.para_id.clone(),
                })
        })
        .collect::<Result<Vec<_>, _>>()?;
    RetrievedContext::new(question.clone(), hits, paragraphs)
}

/// Fixed instruction header, then the question, then the retrieved context.
/// The question and context are appended verbatim, never interpolated.
pub fn build_prompt(ctx: &RetrievedContext) -> String {
    let mut prompt = String::with_capacity(PROMPT_HEADER.len() + ctx.context_text.len() + 64);
    prompt.push_str(PROMPT_HEADER.trim_end());
    prompt.push_str("\n\nQUESTION: ");
    prompt.push_str(ctx.question.text.trim());
    prompt.push_str("\n\nCONTEXT:\n");
    prompt.push_str(&ctx.context_text);
    prompt.push('\n');
    prompt
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RawAnswer {
    pub answer_text: String,
    pub source_sent_id: String,
    pub extractor_confidence: f64,
    #[serde(skip)]
    pub sentence: Sentence,
    #[serde(skip)]
    pub position: DocPosition,
}

pub trait AnswerExtractor: Send + Sync {
    fn extract(&self, prompt: &str, ctx: &RetrievedContext) -> Result<RawAnswer, AnswerError>;
}

/// Picks the context sentence sharing the most content tokens with the
/// question. Confidence is the shared fraction of the question's distinct
/// content tokens; ties go to the earliest sentence in document order.
#[derive(Debug, Clone, Copy, Default)]
pub struct MockExtractor;

impl AnswerExtractor for MockExtractor {
    fn extract(&self, _prompt: &str, ctx: &RetrievedContext) -> Result<RawAnswer, AnswerError> {
        let q_id = &ctx.question.q_id;
        let wanted: HashSet<String> = content_tokens(&ctx.question.text).into_iter().collect();
        if wanted.is_empty() {
            return Err(AnswerError::NoAnswer {
                q_id: q_id.clone(),
                reason: "question has no content tokens".into(),
            });
        }

        let mut best: Option<(usize, DocPosition, &Sentence)> = None;
        for (position, sentence) in ctx.sentences_in_doc_order() {
            let have: HashSet<String> = tokenize(&sentence.text).into_iter().collect();
            let overlap = wanted.iter().filter(|t| have.contains(*t)).count();
            if overlap > best.map_or(0, |(o, _, _)| o) {
                best = Some((overlap, position, sentence));
            }
        }

        let (overlap, position, sentence) = best.ok_or_else(|| AnswerError::NoAnswer {
            q_id: q_id.clone(),
            reason: "no context sentence shares a content token with the question".into(),
        })?;
        Ok(RawAnswer {
            answer_text: sentence.text.clone(),
            source_sent_id: sentence.sent_id.clone(),
            extractor_confidence: overlap as f64 / wanted.len() as f64,
            sentence: sentence.clone(),
            position,
        })
    }
}

/// Sends the prompt through the gateway and maps the reply's source
/// sentence back onto a context sentence.
pub struct RemoteExtractor {
    gateway: Arc<Gateway>,
}

impl RemoteExtractor {
    pub fn new(gateway: Arc<Gateway>) -> RemoteExtractor {
        RemoteExtractor { gateway }
    }
}

fn normalize_whitespace(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Exact match first, then a whitespace-normalized case-insensitive match.
fn locate_sentence<'a>(ctx: &'a RetrievedContext, wanted: &str) -> Option<(DocPosition, &'a Sentence)> {
    let sentences = ctx.sentences_in_doc_order();
    let wanted = wanted.trim();
    if let Some(found) = sentences.iter().find(|(_, s)| s.text == wanted) {
        return Some(*found);
    }
    let norm = normalize_whitespace(wanted).to_lowercase();
    sentences
        .into_iter()
        .find(|(_, s)| normalize_whitespace(&s.text).to_lowercase() == norm)
}

impl AnswerExtractor for RemoteExtractor {
    fn extract(&self, prompt: &str, ctx: &RetrievedContext) -> Result<RawAnswer, AnswerError> {
        let q_id = &ctx.question.q_id;
        let reply = match self.gateway.chat_answer(prompt)? {
            ChatReply::NoAnswer => {
                return Err(AnswerError::NoAnswer {
                    q_id: q_id.clone(),
                    reason: "model reported no answer".into(),
                })
            }
            ChatReply::Answer(reply) => reply,
        };
        let (position, sentence) =
            locate_sentence(ctx, &reply.source_sentence).ok_or_else(|| AnswerError::UnlocatableSource {
                q_id: q_id.clone(),
                sentence: reply.source_sentence.clone(),
            })?;
        // Keep the model's answer only when it is a span of the sentence.
        let answer_text = if normalize_whitespace(&sentence.text).contains(&normalize_whitespace(&reply.answer)) {
            reply.answer
        } else {
            sentence.text.clone()
        };
        Ok(RawAnswer {
            answer_text,
            source_sent_id: sentence.sent_id.clone(),
            extractor_confidence: reply.confidence,
            sentence: sentence.clone(),
            position,
        })
    }
}

/// Maximal runs of non-stopword tokens, lowercased, in order of first
/// appearance, without duplicates.
pub fn extract_noun_phrases(text: &str) -> Vec<String> {
    let mut phrases: Vec<String> = Vec::new();
    let mut run: Vec<String> = Vec::new();
    let close = |run: &mut Vec<String>, phrases: &mut Vec<String>| {
        if !run.is_empty() {
            let phrase = run.join(" ");
            if !phrases.contains(&phrase) {
                phrases.push(phrase);
            }
            run.clear();
        }
    };
    for token in tokenize(text) {
        if is_stopword(&token) {
            close(&mut run, &mut phrases);
        } else {
            run.push(token);
        }
    }
    close(&mut run, &mut phrases);
    phrases
}

/// Mean over question phrases of the best cosine against any answer phrase,
/// each clamped to `[0, 1]`. Zero when either side has no phrases. Not
/// symmetric in its arguments.
pub fn np_match_score(question_text: &str, answer_text: &str, embedder: &dyn Embedder) -> Result<f64, EmbedError> {
    let q_phrases = extract_noun_phrases(question_text);
    let a_phrases = extract_noun_phrases(answer_text);
    if q_phrases.is_empty() || a_phrases.is_empty() {
        return Ok(0.0);
    }
    let q_vecs = embedder.embed_batch(&q_phrases)?;
    let a_vecs = embedder.embed_batch(&a_phrases)?;
    let mut total = 0.0;
    for q in &q_vecs {
        let mut best = 0.0f64;
        for a in &a_vecs {
            best = best.max(cosine(q, a)?.clamp(0.0, 1.0));
        }
        total += best;
    }
    Ok((total / q_vecs.len() as f64).clamp(0.0, 1.0))
}

/// Weighted mean `w*c + (1-w)*m`, kept inside `[min(c,m), max(c,m)]`.
pub fn fuse(confidence: f64, np_score: f64, weight: f64) -> f64 {
    let s = weight * confidence + (1.0 - weight) * np_score;
    s.clamp(confidence.min(np_score), confidence.max(np_score))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoredAnswer {
    pub q_id: String,
    pub q_order: u32,
    pub sentence: Sentence,
    pub position: DocPosition,
    pub answer_text: String,
    pub extractor_confidence: f64,
    pub np_score: f64,
    pub fused_score: f64,
    pub threshold: f64,
    pub passed_threshold: bool,
}

/// `params` must already carry the question's effective threshold.
pub fn fuse_and_threshold(
    question: &Question,
    raw: RawAnswer,
    np_score: f64,
    params: &RetrievalParams,
) -> ScoredAnswer {
    let fused_score = fuse(raw.extractor_confidence, np_score, params.fusion_weight);
    ScoredAnswer {
        q_id: question.q_id.clone(),
        q_order: question.order,
        sentence: raw.sentence,
        position: raw.position,
        answer_text: raw.answer_text,
        extractor_confidence: raw.extractor_confidence,
        np_score,
        fused_score,
        threshold: params.score_threshold,
        passed_threshold: fused_score >= params.score_threshold,
    }
}
