//! Text embeddings and cosine similarity.
//!
//! The reference embedder is signed feature hashing over lowercase unigrams
//! and adjacent bigrams: each feature string is hashed with a seeded 64-bit
//! hash, lands in bucket `hash % dim` with sign `+1` when bit 63 is clear and
//! `-1` otherwise, and the accumulated vector is L2-normalized.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::llm_gateway::{Gateway, GatewayError};
use crate::text::tokenize;

pub const DEFAULT_DIM: usize = 256;
pub const REFERENCE_SEED: u64 = 0x5EED_CAFE;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("cannot embed empty text")]
    EmptyText,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector(Vec<f64>);

impl EmbeddingVector {
    /// Wraps raw components; rejects empty or non-finite input.
    pub fn new(values: Vec<f64>) -> Option<EmbeddingVector> {
        (!values.is_empty() && values.iter().all(|v| v.is_finite())).then_some(EmbeddingVector(values))
    }

    /// Wraps and L2-normalizes; `None` for a zero or non-finite vector.
    pub fn normalized(values: Vec<f64>) -> Option<EmbeddingVector> {
        let v = EmbeddingVector::new(values)?;
        let norm = v.norm();
        (norm > 0.0).then(|| EmbeddingVector(v.0.into_iter().map(|x| x / norm).collect()))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

/// Cosine similarity, clamped to `[-1, 1]`. A zero vector has similarity 0
/// with everything.
pub fn cosine(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64, EmbedError> {
    if a.dim() != b.dim() {
        return Err(EmbedError::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    let dot: f64 = a.0.iter().zip(&b.0).map(|(x, y)| x * y).sum();
    let denom = a.norm() * b.norm();
    if denom == 0.0 {
        return Ok(0.0);
    }
    let c = (dot / denom).clamp(-1.0, 1.0);
    // no negative zero, so score ordering ties stay ties
    Ok(if c == 0.0 { 0.0 } else { c })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EmbedderKind {
    HashedReference,
    Remote,
}

fn default_dim() -> usize {
    DEFAULT_DIM
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbedderSpec {
    pub kind: EmbedderKind,
    #[serde(default = "default_dim")]
    pub dim: usize,
    /// Remote only: embedding endpoint path, overriding the gateway default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    /// Remote only: embedding model name, overriding the gateway chat model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_name: Option<String>,
}

impl Default for EmbedderSpec {
    fn default() -> Self {
        EmbedderSpec {
            kind: EmbedderKind::HashedReference,
            dim: DEFAULT_DIM,
            endpoint: None,
            model_name: None,
        }
    }
}

pub trait Embedder: Send + Sync {
    fn dim(&self) -> usize;

    fn embed(&self, text: &str) -> Result<EmbeddingVector, EmbedError>;

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        texts.iter().map(|t| self.embed(t)).collect()
    }
}

/// Builds the embedder named by `spec`. `gateway` is required for the
/// remote kind and ignored otherwise.
pub fn build_embedder(spec: &EmbedderSpec, gateway: Option<Arc<Gateway>>) -> Result<Arc<dyn Embedder>, EmbedError> {
    if spec.dim == 0 {
        return Err(EmbedError::DimensionMismatch { expected: 1, found: 0 });
    }
    match spec.kind {
        EmbedderKind::HashedReference => Ok(Arc::new(HashedEmbedder::new(spec.dim))),
        EmbedderKind::Remote => {
            let gateway = gateway.ok_or_else(|| {
                EmbedError::Gateway(GatewayError::Config("remote embedder needs a gateway config".into()))
            })?;
            Ok(Arc::new(RemoteEmbedder {
                gateway,
                dim: spec.dim,
                endpoint: spec.endpoint.clone(),
                model: spec.model_name.clone(),
            }))
        }
    }
}

/// Seeded FNV-1a over the feature bytes followed by a splitmix64 finalizer.
pub fn feature_hash(feature: &str, seed: u64) -> u64 {
    let mut h = FNV_OFFSET ^ seed;
    for &b in feature.as_bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    h = (h ^ (h >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    h = (h ^ (h >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    h ^ (h >> 31)
}

#[derive(Debug, Clone)]
pub struct HashedEmbedder {
    dim: usize,
    seed: u64,
}

impl HashedEmbedder {
    pub fn new(dim: usize) -> HashedEmbedder {
        HashedEmbedder {
            dim: dim.max(1),
            seed: REFERENCE_SEED,
        }
    }
}

impl Embedder for HashedEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector, EmbedError> {
        let trimmed = text.trim();
        if trimmed.is_empty() {
            return Err(EmbedError::EmptyText);
        }
        let mut tokens = tokenize(trimmed);
        if tokens.is_empty() {
            // Punctuation-only text still gets a stable vector.
            tokens.push(trimmed.to_lowercase());
        }

        // n tokens give 2n - 1 features, an odd number of +-1 contributions,
        // so at least one bucket is nonzero and the norm is never zero.
        let mut values = vec![0.0f64; self.dim];
        let mut add = |feature: &str| {
            let h = feature_hash(feature, self.seed);
            let bucket = (h % self.dim as u64) as usize;
            values[bucket] += if h >> 63 == 0 { 1.0 } else { -1.0 };
        };
        for token in &tokens {
            add(token);
        }
        for pair in tokens.windows(2) {
            add(&format!("{} {}", pair[0], pair[1]));
        }
        Ok(EmbeddingVector::normalized(values).expect("odd feature count gives a nonzero vector"))
    }
}

pub struct RemoteEmbedder {
    gateway: Arc<Gateway>,
    dim: usize,
    endpoint: Option<String>,
    model: Option<String>,
}

impl RemoteEmbedder {
    fn request(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, GatewayError> {
        let cfg = self.gateway.config();
        let model = self.model.as_deref().unwrap_or(&cfg.model);
        let path = self.endpoint.as_deref().unwrap_or(&cfg.embed_path);
        self.gateway.embed_remote_with(texts, model, path)
    }
}

impl Embedder for RemoteEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector, EmbedError> {
        if text.trim().is_empty() {
            return Err(EmbedError::EmptyText);
        }
        self.embed_batch(&[text.to_owned()])?.pop().ok_or(EmbedError::EmptyText)
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        if texts.iter().any(|t| t.trim().is_empty()) {
            return Err(EmbedError::EmptyText);
        }
        self.request(texts)?
            .into_iter()
            .map(|values| {
                if values.len() != self.dim {
                    return Err(EmbedError::DimensionMismatch {
                        expected: self.dim,
                        found: values.len(),
                    });
                }
                EmbeddingVector::normalized(values).ok_or(EmbedError::EmptyText)
            })
            .collect()
    }
}
