mod common;

use proptest::prelude::*;
use qasum::answer_engine::{
    fuse, AnswerError, AnswerExtractor, MockExtractor, RawAnswer, RetrievedContext, ScoredAnswer,
};
use qasum::corpus::SegmentedCorpus;
use qasum::embedding::{cosine, Embedder};
use qasum::pipeline::Engine;
use qasum::question_bank::{QuestionBank, RetrievalParams};
use qasum::summarizer::{
    assemble, dedupe, default_post_processors, AcronymTable, QuestionOutcome, QuestionResult, QuestionStatus, RunInfo,
    Summary,
};
use qasum::vector_index::VectorIndex;

const TIMESTAMP: &str = "2031-06-01T00:00:00Z";

fn run(
    corpus: &SegmentedCorpus,
    index: &VectorIndex,
    bank: &QuestionBank,
    params: &RetrievalParams,
    workers: usize,
) -> Summary {
    let e = common::embedder();
    let engine = Engine {
        index,
        corpus,
        embedder: &e,
        extractor: &MockExtractor,
        scope: None,
    };
    let post = default_post_processors(AcronymTable::bundled());
    engine
        .summarize(bank, params, &post, workers, Some(TIMESTAMP.into()))
        .unwrap()
}

/// A passing answer for an existing fixture sentence.
fn answer(corpus: &SegmentedCorpus, q_id: &str, q_order: u32, sent_id: &str, score: f64) -> ScoredAnswer {
    let sentence = corpus.sentence(sent_id).unwrap().clone();
    let position = corpus.position(&sentence).unwrap();
    ScoredAnswer {
        q_id: q_id.into(),
        q_order,
        answer_text: sentence.text.clone(),
        sentence,
        position,
        extractor_confidence: score,
        np_score: score,
        fused_score: score,
        threshold: 0.0,
        passed_threshold: true,
    }
}

const COPY_A: &str = "P002-PRG1";
const COPY_B: &str = "P002-PRG2";

/// The copy-forward pair: same sentence in two progress notes.
fn copy_forward_ids(corpus: &SegmentedCorpus) -> (String, String) {
    let find = |doc: &str| {
        corpus
            .paragraphs()
            .iter()
            .filter(|p| p.paragraph.doc_id == doc)
            .flat_map(|p| &p.sentences)
            .find(|s| s.text.contains("Good response to IV diuresis"))
            .unwrap()
            .sent_id
            .clone()
    };
    (find(COPY_A), find(COPY_B))
}

#[test]
fn golden_run_matches_pipeline_oracle() {
    let corpus = common::corpus();
    let index = common::disk_index(&corpus);
    let bank = common::bank();
    let summary = run(&corpus, &index, &bank, &bank.defaults, 1);
    let oracle = common::oracle("pipeline");

    let want_items: Vec<_> = oracle["items"].as_array().unwrap().iter().collect();
    assert_eq!(summary.items.len(), want_items.len());
    for (got, want) in summary.items.iter().zip(want_items) {
        assert_eq!(got.q_id, want["q_id"].as_str().unwrap());
        assert_eq!(got.source_sent_id, want["source_sent_id"].as_str().unwrap());
        assert_eq!(got.source_text, want["source_text"].as_str().unwrap());
        assert_eq!(got.sentence_text, want["sentence_text"].as_str().unwrap());
        for (g, key) in [
            (got.score, "score"),
            (got.extractor_confidence, "extractor_confidence"),
            (got.np_score, "np_score"),
        ] {
            assert!(
                common::close(g, want[key].as_f64().unwrap(), 1e-9),
                "{} {key}",
                got.q_id
            );
        }
    }
    for q in &summary.meta.questions {
        let want = oracle["statuses"][&q.q_id].as_str().unwrap();
        assert_eq!(serde_json::to_value(q.status).unwrap(), want, "{}", q.q_id);
    }

    let golden = std::fs::read_to_string(common::fixtures().join("golden/summary.json")).unwrap();
    assert_eq!(summary.to_json(), golden);
    let golden_txt = std::fs::read_to_string(common::fixtures().join("golden/summary.txt")).unwrap();
    assert_eq!(summary.to_text(), golden_txt);
}

#[test]
fn every_item_traces_back_to_its_source() {
    let corpus = common::corpus();
    let index = common::disk_index(&corpus);
    let bank = common::bank();
    let summary = run(&corpus, &index, &bank, &bank.defaults, 1);
    assert!(!summary.items.is_empty());
    for item in &summary.items {
        let sentence = corpus.sentence(&item.source_sent_id).expect("sent_id resolves");
        assert_eq!(sentence.text, item.source_text);
        let para = corpus.paragraph(&sentence.para_id).unwrap();
        let doc = corpus
            .documents()
            .iter()
            .find(|d| d.doc_id == para.paragraph.doc_id)
            .unwrap();
        let start = para.paragraph.char_span.start + sentence.char_span.start;
        assert_eq!(&doc.text[start..start + sentence.text.len()], item.source_text);
    }
}

#[test]
fn parallel_and_repeated_runs_are_byte_identical() {
    let corpus = common::corpus();
    let index = common::disk_index(&corpus);
    let bank = common::bank();
    let first = run(&corpus, &index, &bank, &bank.defaults, 1).to_json();
    for workers in [1, 2, 4, 8] {
        assert_eq!(
            run(&corpus, &index, &bank, &bank.defaults, workers).to_json(),
            first,
            "workers={workers}"
        );
    }
}

#[test]
fn result_order_does_not_change_the_summary() {
    let corpus = common::corpus();
    let index = common::disk_index(&corpus);
    let bank = common::bank();
    let e = common::embedder();
    let engine = Engine {
        index: &index,
        corpus: &corpus,
        embedder: &e,
        extractor: &MockExtractor,
        scope: None,
    };
    let results = engine.run_bank(&bank, &bank.defaults, 1).unwrap();
    let post = default_post_processors(AcronymTable::bundled());
    let info = RunInfo {
        params: bank.defaults,
        corpus_id: corpus.fingerprint().into(),
        timestamp: Some(TIMESTAMP.into()),
    };
    let base = assemble(&results, &bank, &post, &e, &info).unwrap().to_json();
    let mut shuffled = results.clone();
    shuffled.reverse();
    assert_eq!(assemble(&shuffled, &bank, &post, &e, &info).unwrap().to_json(), base);
    shuffled.rotate_left(2);
    assert_eq!(assemble(&shuffled, &bank, &post, &e, &info).unwrap().to_json(), base);
}

#[test]
fn near_duplicate_keeps_the_higher_score() {
    let corpus = common::corpus();
    let e = common::embedder();
    let (a, b) = copy_forward_ids(&corpus);
    let va = e.embed(&corpus.sentence(&a).unwrap().text).unwrap();
    let vb = e.embed(&corpus.sentence(&b).unwrap().text).unwrap();
    assert!(cosine(&va, &vb).unwrap() >= 0.95);

    let params = RetrievalParams::default();
    let kept = dedupe(
        vec![answer(&corpus, "q1", 0, &a, 0.7), answer(&corpus, "q2", 1, &b, 0.8)],
        &params,
        &e,
    )
    .unwrap();
    assert_eq!(kept.len(), 1);
    assert_eq!(kept[0].sentence.sent_id, b);

    // same sentence from two questions: one copy survives
    let kept = dedupe(
        vec![answer(&corpus, "q1", 0, &a, 0.9), answer(&corpus, "q2", 1, &a, 0.9)],
        &params,
        &e,
    )
    .unwrap();
    assert_eq!(kept.len(), 1);
    assert_eq!(kept[0].q_id, "q1");
}

#[test]
fn dropped_duplicate_is_reported_in_metadata() {
    let corpus = common::corpus();
    let e = common::embedder();
    let bank = common::bank();
    let (a, b) = copy_forward_ids(&corpus);
    let mut results: Vec<QuestionResult> = bank
        .questions
        .iter()
        .map(|q| QuestionResult {
            q_id: q.q_id.clone(),
            outcome: QuestionOutcome::NoAnswer { reason: "none".into() },
        })
        .collect();
    results[0].outcome = QuestionOutcome::Answered(answer(&corpus, &bank.questions[0].q_id, 0, &a, 0.9));
    results[1].outcome = QuestionOutcome::Answered(answer(&corpus, &bank.questions[1].q_id, 1, &b, 0.8));
    let info = RunInfo {
        params: bank.defaults,
        corpus_id: corpus.fingerprint().into(),
        timestamp: None,
    };
    let summary = assemble(&results, &bank, &[], &e, &info).unwrap();
    assert_eq!(summary.items.len(), 1);
    assert_eq!(summary.items[0].source_sent_id, a);
    assert_eq!(summary.meta.questions[1].status, QuestionStatus::Duplicate);
    assert_eq!(summary.meta.counts.questions_answered, 2);
    assert_eq!(summary.meta.counts.sentences_emitted, 1);
}

struct NeverAnswers;

impl AnswerExtractor for NeverAnswers {
    fn extract(&self, _prompt: &str, ctx: &RetrievedContext) -> Result<RawAnswer, AnswerError> {
        Err(AnswerError::NoAnswer {
            q_id: ctx.question().q_id.clone(),
            reason: "nothing relevant".into(),
        })
    }
}

#[test]
fn bank_with_no_answers_gives_an_empty_summary() {
    let corpus = common::corpus();
    let index = common::disk_index(&corpus);
    let bank = common::bank();
    let e = common::embedder();
    let engine = Engine {
        index: &index,
        corpus: &corpus,
        embedder: &e,
        extractor: &NeverAnswers,
        scope: None,
    };
    let post = default_post_processors(AcronymTable::bundled());
    let summary = engine.summarize(&bank, &bank.defaults, &post, 2, None).unwrap();
    assert!(summary.items.is_empty());
    assert_eq!(summary.meta.counts.questions_asked, 6);
    assert_eq!(summary.meta.counts.questions_answered, 0);
    assert_eq!(summary.meta.counts.no_answer, 6);
    assert!(summary
        .meta
        .questions
        .iter()
        .all(|q| q.status == QuestionStatus::NoAnswer));
    assert_eq!(summary.plain_text(), "");
}

#[test]
fn single_question_bank_gives_one_item() {
    let corpus = common::corpus();
    let index = common::disk_index(&corpus);
    let mut bank = common::bank();
    bank.questions.retain(|q| q.q_id == "complications");
    let summary = run(&corpus, &index, &bank, &bank.defaults.clone(), 1);
    assert_eq!(summary.items.len(), 1);
    assert_eq!(summary.items[0].q_id, "complications");
    assert_eq!(summary.meta.counts.questions_asked, 1);
}

#[test]
fn raising_the_threshold_never_adds_answers() {
    let corpus = common::corpus();
    let index = common::disk_index(&corpus);
    let mut bank = common::bank();
    // overrides would pin some questions; sweep the global value only
    for q in &mut bank.questions {
        q.threshold_override = None;
    }
    let mut previous: Option<Vec<String>> = None;
    for step in 0..=5 {
        let params = RetrievalParams {
            score_threshold: step as f64 * 0.2,
            ..bank.defaults
        };
        let summary = run(&corpus, &index, &bank, &params, 1);
        let passed: Vec<String> = summary
            .meta
            .questions
            .iter()
            .filter(|q| matches!(q.status, QuestionStatus::Answered | QuestionStatus::Duplicate))
            .map(|q| q.q_id.clone())
            .collect();
        if let Some(prev) = &previous {
            assert!(
                passed.iter().all(|q| prev.contains(q)),
                "tau={}: {passed:?} not within {prev:?}",
                params.score_threshold
            );
        }
        previous = Some(passed);
    }
}

#[test]
fn emitted_items_are_mutually_diverse() {
    let corpus = common::corpus();
    let index = common::disk_index(&corpus);
    let bank = common::bank();
    let e = common::embedder();
    for tau in [0.0, 0.3, 0.6] {
        let params = RetrievalParams {
            score_threshold: tau,
            ..bank.defaults
        };
        let summary = run(&corpus, &index, &bank, &params, 1);
        let vectors: Vec<_> = summary.items.iter().map(|i| e.embed(&i.source_text).unwrap()).collect();
        for i in 0..vectors.len() {
            for j in i + 1..vectors.len() {
                assert!(cosine(&vectors[i], &vectors[j]).unwrap() < params.dedup_cosine);
                assert_ne!(summary.items[i].source_sent_id, summary.items[j].source_sent_id);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn fusion_is_a_bounded_weighted_mean(c in 0.0f64..=1.0, m in 0.0f64..=1.0, w in 0.0f64..=1.0) {
        let s = fuse(c, m, w);
        prop_assert!((s - (w * c + (1.0 - w) * m)).abs() <= 1e-12);
        prop_assert!(c.min(m) <= s && s <= c.max(m));
    }
}
