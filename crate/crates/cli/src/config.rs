use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use qasum::corpus::{CorpusFormat, DEFAULT_MAX_PARAGRAPH_TOKENS};
use qasum::embedding::{EmbedderKind, EmbedderSpec};
use qasum::llm_gateway::GatewayConfig;
use qasum::question_bank::ParamOverrides;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ExtractorKind {
    #[default]
    Mock,
    Remote,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusSource {
    pub path: PathBuf,
    #[serde(default = "default_format")]
    pub format: CorpusFormat,
}

fn default_format() -> CorpusFormat {
    CorpusFormat::Jsonl
}

fn default_parallelism() -> usize {
    1
}

fn default_max_tokens() -> usize {
    DEFAULT_MAX_PARAGRAPH_TOKENS
}

/// The JSON config file. Relative paths are resolved against the directory
/// holding the file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub corpus: CorpusSource,
    #[serde(default)]
    pub embedder: EmbedderSpec,
    pub index_path: PathBuf,
    pub question_bank_path: Option<PathBuf>,
    #[serde(default)]
    pub params: ParamOverrides,
    #[serde(default)]
    pub extractor: ExtractorKind,
    pub gateway: Option<GatewayConfig>,
    pub output_dir: PathBuf,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    #[serde(default = "default_max_tokens")]
    pub max_paragraph_tokens: usize,
    /// Written into summary metadata verbatim; omit for none.
    pub timestamp: Option<String>,
    /// Restrict retrieval to one patient's notes.
    pub patient_id: Option<String>,
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<PipelineConfig> {
        let raw = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        let mut cfg: PipelineConfig =
            serde_json::from_str(&raw).with_context(|| format!("invalid config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        cfg.validate()?;
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.corpus.path);
        fix(&mut self.index_path);
        fix(&mut self.output_dir);
        if let Some(p) = self.question_bank_path.as_mut() {
            fix(p);
        }
        if let Some(dir) = self.gateway.as_mut().and_then(|g| g.fixtures_dir.as_mut()) {
            fix(dir);
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.needs_gateway() && self.gateway.is_none() {
            bail!("config: a remote extractor or embedder needs a gateway section");
        }
        if self.parallelism == 0 {
            bail!("config: parallelism must be positive");
        }
        if self.max_paragraph_tokens == 0 {
            bail!("config: max_paragraph_tokens must be positive");
        }
        Ok(())
    }

    pub fn needs_gateway(&self) -> bool {
        self.extractor == ExtractorKind::Remote || self.embedder.kind == EmbedderKind::Remote
    }
}
