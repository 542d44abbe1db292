//! End-to-end wiring: index building, single-question answering and the
//! full question-bank loop.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use crate::answer_engine::{
    build_prompt, fuse_and_threshold, np_match_score, retrieve_context, AnswerError, AnswerExtractor, RawAnswer,
    RetrievedContext, ScoredAnswer,
};
use crate::corpus::SegmentedCorpus;
use crate::embedding::{EmbedError, Embedder};
use crate::question_bank::{Question, QuestionBank, RetrievalParams};
use crate::summarizer::{assemble, PostProcessor, QuestionOutcome, QuestionResult, RunInfo, Summary};
use crate::vector_index::{IndexEntry, IndexError, SearchFilter, VectorIndex};

#[derive(Debug, thiserror::Error)]
pub enum IndexBuildError {
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Index(#[from] IndexError),
}

/// Embeds every paragraph of the corpus, in corpus order.
pub fn build_index(corpus: &SegmentedCorpus, embedder: &dyn Embedder) -> Result<VectorIndex, IndexBuildError> {
    let texts: Vec<String> = corpus.paragraphs().iter().map(|p| p.paragraph.text.clone()).collect();
    let vectors = embedder.embed_batch(&texts)?;
    let mut index = VectorIndex::new();
    for (record, vector) in corpus.paragraphs().iter().zip(vectors) {
        index.insert(IndexEntry {
            para_id: record.paragraph.para_id.clone(),
            vector,
            doc_id: record.paragraph.doc_id.clone(),
            note_type: record.note_type,
        })?;
    }
    Ok(index)
}

/// Read-only state shared by every question of a run.
pub struct Engine<'a> {
    pub index: &'a VectorIndex,
    pub corpus: &'a SegmentedCorpus,
    pub embedder: &'a dyn Embedder,
    pub extractor: &'a dyn AnswerExtractor,
    /// Extra restriction applied to every search, e.g. one patient's notes.
    pub scope: Option<SearchFilter>,
}

/// Everything produced while answering one question.
#[derive(Debug, Clone)]
pub struct Answered {
    pub context: RetrievedContext,
    pub prompt: String,
    pub raw: RawAnswer,
    pub scored: ScoredAnswer,
}

impl Engine<'_> {
    pub fn answer(&self, question: &Question, params: &RetrievalParams) -> Result<Answered, AnswerError> {
        let params = RetrievalParams {
            score_threshold: question.effective_threshold(params),
            ..*params
        };
        let context = retrieve_context(
            question,
            &params,
            self.index,
            self.corpus,
            self.embedder,
            self.scope.as_ref(),
        )?;
        let prompt = build_prompt(&context);
        let raw = self.extractor.extract(&prompt, &context)?;
        let m = np_match_score(&question.text, &raw.answer_text, self.embedder)?;
        let scored = fuse_and_threshold(question, raw.clone(), m, &params);
        Ok(Answered {
            context,
            prompt,
            raw,
            scored,
        })
    }

    fn outcome(&self, question: &Question, params: &RetrievalParams) -> Result<QuestionOutcome, AnswerError> {
        match self.answer(question, params) {
            Ok(a) => Ok(QuestionOutcome::Answered(a.scored)),
            Err(e) if e.is_no_answer() => Ok(QuestionOutcome::NoAnswer { reason: e.to_string() }),
            Err(e) => Err(e),
        }
    }

    /// Answers every bank question using up to `parallelism` worker
    /// threads. Results come back in bank order whatever the completion
    /// order; when several questions fail, the first in bank order is
    /// reported.
    pub fn run_bank(
        &self,
        bank: &QuestionBank,
        params: &RetrievalParams,
        parallelism: usize,
    ) -> Result<Vec<QuestionResult>, AnswerError> {
        let questions = &bank.questions;
        let workers = parallelism.clamp(1, questions.len().max(1));
        let slots: Vec<Mutex<Option<Result<QuestionOutcome, AnswerError>>>> =
            questions.iter().map(|_| Mutex::new(None)).collect();

        if workers == 1 {
            for (q, slot) in questions.iter().zip(&slots) {
                *slot.lock().expect("slot lock") = Some(self.outcome(q, params));
            }
        } else {
            let next = AtomicUsize::new(0);
            std::thread::scope(|s| {
                for _ in 0..workers {
                    s.spawn(|| loop {
                        let i = next.fetch_add(1, Ordering::Relaxed);
                        let Some(q) = questions.get(i) else { break };
                        let result = self.outcome(q, params);
                        *slots[i].lock().expect("slot lock") = Some(result);
                    });
                }
            });
        }

        questions
            .iter()
            .zip(slots)
            .map(|(q, slot)| {
                let outcome = slot
                    .into_inner()
                    .expect("slot lock")
                    .expect("every question was processed")?;
                Ok(QuestionResult {
                    q_id: q.q_id.clone(),
                    outcome,
                })
            })
            .collect()
    }

    pub fn summarize(
        &self,
        bank: &QuestionBank,
        params: &RetrievalParams,
        post: &[Box<dyn PostProcessor>],
        parallelism: usize,
        timestamp: Option<String>,
    ) -> Result<Summary, AnswerError> {
        let results = self.run_bank(bank, params, parallelism)?;
        let run = RunInfo {
            params: *params,
            corpus_id: self.corpus.fingerprint().to_owned(),
            timestamp,
        };
        Ok(assemble(&results, bank, post, self.embedder, &run)?)
    }
}
