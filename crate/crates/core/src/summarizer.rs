//! Summary assembly: deduplication, ordering, post-processing and rendering.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::answer_engine::ScoredAnswer;
use crate::embedding::{cosine, EmbedError, Embedder, EmbeddingVector};
use crate::question_bank::{QuestionBank, RetrievalParams};
use crate::text::asset_lines;

const ACRONYMS_ASSET: &str = include_str!("../assets/acronyms.tsv");

#[derive(Debug, Error, PartialEq)]
pub enum AcronymTableError {
    #[error("line {line}: expected ACRONYM<TAB>expansion")]
    Malformed { line: usize },
    #[error("line {line}: duplicate acronym {key:?}")]
    Duplicate { line: usize, key: String },
}

/// Case-sensitive acronym to expansion mapping.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AcronymTable {
    mapping: HashMap<String, String>,
    /// Keys sorted longest first so the longest acronym wins at a position.
    keys: Vec<String>,
}

impl AcronymTable {
    pub fn bundled() -> AcronymTable {
        AcronymTable::from_tsv(ACRONYMS_ASSET).expect("bundled acronym table is valid")
    }

    pub fn from_tsv(text: &str) -> Result<AcronymTable, AcronymTableError> {
        let mut pairs = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            if asset_lines(raw).next().is_none() {
                continue;
            }
            let (key, expansion) = raw
                .split_once('\t')
                .map(|(k, v)| (k.trim(), v.trim()))
                .filter(|(k, v)| !k.is_empty() && !v.is_empty())
                .ok_or(AcronymTableError::Malformed { line: i + 1 })?;
            pairs.push((i + 1, key.to_owned(), expansion.to_owned()));
        }
        let mut table = AcronymTable::default();
        for (line, key, expansion) in pairs {
            if table.mapping.contains_key(&key) {
                return Err(AcronymTableError::Duplicate { line, key });
            }
            table.insert(key, expansion);
        }
        Ok(table)
    }

    pub fn insert(&mut self, key: impl Into<String>, expansion: impl Into<String>) {
        let key = key.into();
        if self.mapping.insert(key.clone(), expansion.into()).is_none() {
            self.keys.push(key);
            self.keys.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
        }
    }

    pub fn len(&self) -> usize {
        self.mapping.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mapping.is_empty()
    }
}

/// Whole-token, case-sensitive replacement in one left-to-right pass. An
/// acronym only matches where it is not glued to alphanumerics on either
/// side, and replaced text is never rescanned.
pub fn expand_acronyms(text: &str, table: &AcronymTable) -> String {
    if table.is_empty() {
        return text.to_owned();
    }
    let mut out = String::with_capacity(text.len());
    let mut i = 0;
    let mut prev: Option<char> = None;
    'scan: while i < text.len() {
        let rest = &text[i..];
        if !prev.is_some_and(char::is_alphanumeric) {
            for key in &table.keys {
                if let Some(after) = rest.strip_prefix(key.as_str()) {
                    if !after.chars().next().is_some_and(char::is_alphanumeric) {
                        out.push_str(&table.mapping[key]);
                        prev = key.chars().last();
                        i += key.len();
                        continue 'scan;
                    }
                }
            }
        }
        let c = rest.chars().next().expect("i is on a char boundary inside text");
        out.push(c);
        prev = Some(c);
        i += c.len_utf8();
    }
    out
}

/// A named text rewrite applied to every summary sentence.
pub trait PostProcessor: Send + Sync {
    fn name(&self) -> &'static str;
    fn process(&self, text: &str) -> String;
}

/// Reference-resolution slot. Passes text through unchanged.
#[derive(Debug, Default)]
pub struct CoreferencePassThrough;

impl PostProcessor for CoreferencePassThrough {
    fn name(&self) -> &'static str {
        "coreference-passthrough"
    }

    fn process(&self, text: &str) -> String {
        text.to_owned()
    }
}

#[derive(Debug)]
pub struct AcronymExpansion(pub AcronymTable);

impl PostProcessor for AcronymExpansion {
    fn name(&self) -> &'static str {
        "acronym-expansion"
    }

    fn process(&self, text: &str) -> String {
        expand_acronyms(text, &self.0)
    }
}

pub fn default_post_processors(table: AcronymTable) -> Vec<Box<dyn PostProcessor>> {
    vec![Box::new(CoreferencePassThrough), Box::new(AcronymExpansion(table))]
}

/// Drops repeated and near-duplicate sentences. Candidates are visited by
/// fused score (descending), then document order, then question order; a
/// candidate survives unless an earlier survivor has the same `sent_id` or an
/// embedding cosine of at least `dedup_cosine`. Survivors keep that visiting
/// order.
pub fn dedupe(
    candidates: Vec<ScoredAnswer>,
    params: &RetrievalParams,
    embedder: &dyn Embedder,
) -> Result<Vec<ScoredAnswer>, EmbedError> {
    let mut ordered = candidates;
    ordered.sort_by(|a, b| {
        b.fused_score
            .total_cmp(&a.fused_score)
            .then_with(|| a.position.cmp(&b.position))
            .then_with(|| a.q_order.cmp(&b.q_order))
    });

    let mut kept: Vec<(ScoredAnswer, EmbeddingVector)> = Vec::new();
    let mut kept_ids: HashSet<String> = HashSet::new();
    for candidate in ordered {
        if kept_ids.contains(&candidate.sentence.sent_id) {
            continue;
        }
        let vector = embedder.embed(&candidate.sentence.text)?;
        let mut near_duplicate = false;
        for (_, other) in &kept {
            if cosine(&vector, other)? >= params.dedup_cosine {
                near_duplicate = true;
                break;
            }
        }
        if !near_duplicate {
            kept_ids.insert(candidate.sentence.sent_id.clone());
            kept.push((candidate, vector));
        }
    }
    Ok(kept.into_iter().map(|(c, _)| c).collect())
}

/// What happened to one bank question during a run.
#[derive(Debug, Clone, PartialEq)]
pub enum QuestionOutcome {
    Answered(ScoredAnswer),
    NoAnswer { reason: String },
}

#[derive(Debug, Clone)]
pub struct QuestionResult {
    pub q_id: String,
    pub outcome: QuestionOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryItem {
    pub q_id: String,
    pub sentence_text: String,
    pub source_text: String,
    pub source_sent_id: String,
    pub score: f64,
    pub extractor_confidence: f64,
    pub np_score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuestionStatus {
    Answered,
    BelowThreshold,
    Duplicate,
    NoAnswer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionSummary {
    pub q_id: String,
    pub order: u32,
    pub text: String,
    pub threshold: f64,
    pub status: QuestionStatus,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SummaryCounts {
    pub questions_asked: usize,
    /// Questions whose answer passed its threshold.
    pub questions_answered: usize,
    pub below_threshold: usize,
    pub no_answer: usize,
    pub sentences_emitted: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryMeta {
    pub bank_name: String,
    pub bank_version: String,
    pub params: RetrievalParams,
    pub corpus_id: String,
    pub timestamp: Option<String>,
    pub post_processors: Vec<String>,
    pub counts: SummaryCounts,
    pub questions: Vec<QuestionSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub items: Vec<SummaryItem>,
    pub meta: SummaryMeta,
}

/// Run-level values recorded in the summary metadata.
#[derive(Debug, Clone)]
pub struct RunInfo {
    pub params: RetrievalParams,
    pub corpus_id: String,
    pub timestamp: Option<String>,
}

/// Builds the summary from per-question results in any order: passing
/// answers are deduplicated, sorted by question order then document order,
/// and run through the post-processing chain.
pub fn assemble(
    results: &[QuestionResult],
    bank: &QuestionBank,
    post: &[Box<dyn PostProcessor>],
    embedder: &dyn Embedder,
    run: &RunInfo,
) -> Result<Summary, EmbedError> {
    let by_id: HashMap<&str, &QuestionResult> = results.iter().map(|r| (r.q_id.as_str(), r)).collect();

    let mut counts = SummaryCounts {
        questions_asked: bank.questions.len(),
        ..Default::default()
    };
    let mut statuses: BTreeMap<&str, QuestionStatus> = BTreeMap::new();
    let mut passed = Vec::new();
    for q in &bank.questions {
        let status = match by_id.get(q.q_id.as_str()).map(|r| &r.outcome) {
            Some(QuestionOutcome::Answered(a)) if a.passed_threshold => {
                counts.questions_answered += 1;
                passed.push(a.clone());
                QuestionStatus::Answered
            }
            Some(QuestionOutcome::Answered(_)) => {
                counts.below_threshold += 1;
                QuestionStatus::BelowThreshold
            }
            Some(QuestionOutcome::NoAnswer { .. }) | None => {
                counts.no_answer += 1;
                QuestionStatus::NoAnswer
            }
        };
        statuses.insert(&q.q_id, status);
    }

    let mut survivors = dedupe(passed, &run.params, embedder)?;
    let order_of: HashMap<&str, u32> = bank.questions.iter().map(|q| (q.q_id.as_str(), q.order)).collect();
    survivors.sort_by_key(|a| (order_of.get(a.q_id.as_str()).copied().unwrap_or(u32::MAX), a.position));
    let surviving: HashSet<&str> = survivors.iter().map(|a| a.q_id.as_str()).collect();
    for (q_id, status) in statuses.iter_mut() {
        if *status == QuestionStatus::Answered && !surviving.contains(q_id) {
            *status = QuestionStatus::Duplicate;
        }
    }

    let items: Vec<SummaryItem> = survivors
        .into_iter()
        .map(|a| {
            let sentence_text = post
                .iter()
                .fold(a.sentence.text.clone(), |text, stage| stage.process(&text));
            SummaryItem {
                q_id: a.q_id,
                sentence_text,
                source_text: a.sentence.text,
                source_sent_id: a.sentence.sent_id,
                score: a.fused_score,
                extractor_confidence: a.extractor_confidence,
                np_score: a.np_score,
            }
        })
        .collect();
    counts.sentences_emitted = items.len();

    let questions = bank
        .questions
        .iter()
        .map(|q| QuestionSummary {
            q_id: q.q_id.clone(),
            order: q.order,
            text: q.text.clone(),
            threshold: q.effective_threshold(&run.params),
            status: statuses[q.q_id.as_str()],
        })
        .collect();

    Ok(Summary {
        items,
        meta: SummaryMeta {
            bank_name: bank.name.clone(),
            bank_version: bank.version.clone(),
            params: run.params,
            corpus_id: run.corpus_id.clone(),
            timestamp: run.timestamp.clone(),
            post_processors: post.iter().map(|p| p.name().to_owned()).collect(),
            counts,
            questions,
        },
    })
}

impl Summary {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("summary serializes");
        s.push('\n');
        s
    }

    /// One sentence per line under a `## <question>` header for every
    /// question that contributed a sentence.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# {} (version {})", self.meta.bank_name, self.meta.bank_version);
        for q in &self.meta.questions {
            let lines: Vec<&str> = self
                .items
                .iter()
                .filter(|i| i.q_id == q.q_id)
                .map(|i| i.sentence_text.as_str())
                .collect();
            if lines.is_empty() {
                continue;
            }
            let _ = writeln!(out, "\n## {}", q.text);
            for line in lines {
                let _ = writeln!(out, "{}", normalize_line(line));
            }
        }
        out
    }

    /// Item sentences joined by newlines; the text the metrics score.
    pub fn plain_text(&self) -> String {
        self.items
            .iter()
            .map(|i| normalize_line(&i.sentence_text))
            .collect::<Vec<_>>()
            .join("\n")
    }
}

fn normalize_line(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}
