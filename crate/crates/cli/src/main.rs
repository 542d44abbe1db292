mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use log::info;

use qasum::answer_engine::{AnswerExtractor, MockExtractor, RemoteExtractor};
use qasum::corpus::{load_corpus, SegmentedCorpus};
use qasum::embedding::{build_embedder, Embedder, EmbedderSpec};
use qasum::evaluation::evaluate;
use qasum::llm_gateway::Gateway;
use qasum::pipeline::{build_index, Engine};
use qasum::question_bank::{load_question_bank, ParamOverrides, Question, RetrievalParams};
use qasum::summarizer::{default_post_processors, AcronymTable};
use qasum::vector_index::{SearchFilter, VectorIndex};

use config::{ExtractorKind, PipelineConfig};

const EXIT_FAILURE: u8 = 1;
const EXIT_NO_ANSWER: u8 = 2;

#[derive(Parser, Debug)]
#[command(
    name = "qasum",
    version,
    about = "Question-driven extractive summaries of clinical notes"
)]
struct Cli {
    /// Pipeline config file (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    extractor: Option<ExtractorKind>,
    /// Paragraphs retrieved per question.
    #[arg(long, global = true)]
    k: Option<usize>,
    /// Fused-score threshold.
    #[arg(long, global = true)]
    threshold: Option<f64>,
    /// Weight of extractor confidence in the fused score.
    #[arg(long, global = true)]
    weight: Option<f64>,
    /// Seed for retry jitter.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Only retrieve notes of this patient.
    #[arg(long, global = true)]
    patient: Option<String>,
    /// Questions answered concurrently.
    #[arg(long, global = true)]
    parallelism: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Segment and embed the corpus, then write the index.
    Index,
    /// Answer one ad-hoc question and show how it was scored.
    Ask { question: String },
    /// Answer every bank question and write the summary.
    Summarize,
    /// Score a candidate summary against a reference.
    Evaluate {
        #[arg(long)]
        candidate: PathBuf,
        #[arg(long)]
        reference: PathBuf,
        #[arg(long)]
        source: PathBuf,
        #[arg(long, value_enum, default_value_t = ReportFormat::Table)]
        format: ReportFormat,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ReportFormat {
    Json,
    Table,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_FAILURE)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match &cli.command {
        Command::Index => cmd_index(&cli),
        Command::Ask { question } => cmd_ask(&cli, question),
        Command::Summarize => cmd_summarize(&cli),
        Command::Evaluate {
            candidate,
            reference,
            source,
            format,
        } => cmd_evaluate(&cli, candidate, reference, source, *format),
    }
}

fn load_config(cli: &Cli) -> Result<PipelineConfig> {
    let path = cli.config.as_deref().context("--config is required for this command")?;
    let mut cfg = PipelineConfig::load(path)?;
    if let Some(dir) = &cli.output_dir {
        cfg.output_dir = dir.clone();
    }
    if let Some(kind) = cli.extractor {
        cfg.extractor = kind;
    }
    if let Some(p) = cli.parallelism {
        cfg.parallelism = p;
    }
    if let Some(p) = &cli.patient {
        cfg.patient_id = Some(p.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn flag_overrides(cli: &Cli) -> ParamOverrides {
    ParamOverrides {
        k: cli.k,
        fusion_weight: cli.weight,
        score_threshold: cli.threshold,
        dedup_cosine: None,
    }
}

/// Built-in defaults, then bank defaults, then the config, then flags.
fn resolve_params(cli: &Cli, cfg: &PipelineConfig, base: RetrievalParams) -> Result<RetrievalParams> {
    let params = cfg.params.merge(&flag_overrides(cli)).apply(base);
    params.validate("params")?;
    Ok(params)
}

fn gateway(cli: &Cli, cfg: &PipelineConfig) -> Result<Option<Arc<Gateway>>> {
    if !cfg.needs_gateway() {
        return Ok(None);
    }
    let gw_cfg = cfg.gateway.clone().context("config has no gateway section")?;
    Ok(Some(Arc::new(Gateway::new(gw_cfg, cli.seed)?)))
}

fn load_segmented(cfg: &PipelineConfig) -> Result<SegmentedCorpus> {
    let docs = load_corpus(&cfg.corpus.path, cfg.corpus.format)?;
    Ok(SegmentedCorpus::new(docs, cfg.max_paragraph_tokens))
}

fn load_index(cfg: &PipelineConfig, embedder: &dyn Embedder) -> Result<VectorIndex> {
    let index = VectorIndex::load(&cfg.index_path)?;
    if let Some(dim) = index.dim() {
        if dim != embedder.dim() {
            bail!(
                "index {} has dimension {dim} but the embedder produces {}; rebuild the index",
                cfg.index_path.display(),
                embedder.dim()
            );
        }
    }
    Ok(index)
}

fn patient_scope(cfg: &PipelineConfig, corpus: &SegmentedCorpus) -> Result<Option<SearchFilter>> {
    let Some(patient) = &cfg.patient_id else {
        return Ok(None);
    };
    let doc_ids: std::collections::HashSet<String> = corpus
        .documents()
        .iter()
        .filter(|d| &d.patient_id == patient)
        .map(|d| d.doc_id.clone())
        .collect();
    if doc_ids.is_empty() {
        bail!("no documents for patient {patient:?}");
    }
    Ok(Some(SearchFilter {
        note_types: None,
        doc_ids: Some(doc_ids),
    }))
}

fn extractor(cfg: &PipelineConfig, gateway: Option<Arc<Gateway>>) -> Result<Box<dyn AnswerExtractor>> {
    Ok(match cfg.extractor {
        ExtractorKind::Mock => Box::new(MockExtractor),
        ExtractorKind::Remote => Box::new(RemoteExtractor::new(
            gateway.context("remote extractor needs a gateway")?,
        )),
    })
}

fn cmd_index(cli: &Cli) -> Result<ExitCode> {
    let cfg = load_config(cli)?;
    let gw = gateway(cli, &cfg)?;
    let embedder = build_embedder(&cfg.embedder, gw)?;
    let corpus = load_segmented(&cfg)?;
    let index = build_index(&corpus, embedder.as_ref())?;
    if let Some(parent) = cfg.index_path.parent() {
        fs::create_dir_all(parent).with_context(|| format!("cannot create {}", parent.display()))?;
    }
    index.save(&cfg.index_path)?;
    println!(
        "indexed {} documents, {} paragraphs (dim {}) -> {}",
        corpus.documents().len(),
        corpus.paragraphs().len(),
        embedder.dim(),
        cfg.index_path.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_ask(cli: &Cli, question: &str) -> Result<ExitCode> {
    let cfg = load_config(cli)?;
    let base = match &cfg.question_bank_path {
        Some(p) => load_question_bank(p)?.defaults,
        None => RetrievalParams::default(),
    };
    let params = resolve_params(cli, &cfg, base)?;
    let gw = gateway(cli, &cfg)?;
    let embedder = build_embedder(&cfg.embedder, gw.clone())?;
    let corpus = load_segmented(&cfg)?;
    let index = load_index(&cfg, embedder.as_ref())?;
    let extractor = extractor(&cfg, gw)?;
    let engine = Engine {
        index: &index,
        corpus: &corpus,
        embedder: embedder.as_ref(),
        extractor: extractor.as_ref(),
        scope: patient_scope(&cfg, &corpus)?,
    };

    let answered = match engine.answer(&Question::ad_hoc(question), &params) {
        Ok(a) => a,
        Err(e) if e.is_no_answer() => {
            println!("no answer: {e}");
            return Ok(ExitCode::from(EXIT_NO_ANSWER));
        }
        Err(e) => return Err(e.into()),
    };
    println!("hits:");
    for hit in answered.context.hits() {
        println!("  {}. {} score={:.6}", hit.rank, hit.para_id, hit.score);
    }
    let s = &answered.scored;
    println!("answer: {}", s.answer_text);
    println!("source: {}", s.sentence.sent_id);
    println!(
        "c={:.6} m={:.6} s={:.6}",
        s.extractor_confidence, s.np_score, s.fused_score
    );
    println!("threshold={:.6} passed={}", s.threshold, s.passed_threshold);
    Ok(ExitCode::SUCCESS)
}

fn cmd_summarize(cli: &Cli) -> Result<ExitCode> {
    let cfg = load_config(cli)?;
    let bank_path = cfg
        .question_bank_path
        .as_deref()
        .context("config has no question_bank_path")?;
    let bank = load_question_bank(bank_path)?;
    let params = resolve_params(cli, &cfg, bank.defaults)?;
    let gw = gateway(cli, &cfg)?;
    let embedder = build_embedder(&cfg.embedder, gw.clone())?;
    let corpus = load_segmented(&cfg)?;
    let index = load_index(&cfg, embedder.as_ref())?;
    let extractor = extractor(&cfg, gw)?;
    let engine = Engine {
        index: &index,
        corpus: &corpus,
        embedder: embedder.as_ref(),
        extractor: extractor.as_ref(),
        scope: patient_scope(&cfg, &corpus)?,
    };
    let post = default_post_processors(AcronymTable::bundled());
    let summary = engine.summarize(&bank, &params, &post, cfg.parallelism, cfg.timestamp.clone())?;

    fs::create_dir_all(&cfg.output_dir).with_context(|| format!("cannot create {}", cfg.output_dir.display()))?;
    let json_path = cfg.output_dir.join("summary.json");
    let text_path = cfg.output_dir.join("summary.txt");
    write(&json_path, &summary.to_json())?;
    write(&text_path, &summary.to_text())?;
    let c = &summary.meta.counts;
    info!("corpus {} summarized with {:?}", summary.meta.corpus_id, params);
    println!(
        "asked {}, answered {}, below threshold {}, no answer {}, emitted {} -> {}",
        c.questions_asked,
        c.questions_answered,
        c.below_threshold,
        c.no_answer,
        c.sentences_emitted,
        json_path.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_evaluate(
    cli: &Cli,
    candidate: &Path,
    reference: &Path,
    source: &Path,
    format: ReportFormat,
) -> Result<ExitCode> {
    let cfg = cli.config.as_ref().map(|_| load_config(cli)).transpose()?;
    let spec = cfg
        .as_ref()
        .map(|c| c.embedder.clone())
        .unwrap_or_else(EmbedderSpec::default);
    let gw = match &cfg {
        Some(c) => gateway(cli, c)?,
        None => None,
    };
    let embedder = build_embedder(&spec, gw)?;
    let report = evaluate(candidate, reference, source, embedder.as_ref())?;

    let output_dir = cli.output_dir.clone().or_else(|| cfg.map(|c| c.output_dir));
    if let Some(dir) = output_dir {
        fs::create_dir_all(&dir).with_context(|| format!("cannot create {}", dir.display()))?;
        write(&dir.join("metrics.json"), &report.to_json())?;
    }
    match format {
        ReportFormat::Json => print!("{}", report.to_json()),
        ReportFormat::Table => print!("{}", report.to_table()),
    }
    Ok(ExitCode::SUCCESS)
}

fn write(path: &Path, content: &str) -> Result<()> {
    fs::write(path, content).with_context(|| format!("cannot write {}", path.display()))
}
