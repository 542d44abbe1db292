//! SME question banks and retrieval parameters.

use std::collections::{BTreeSet, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::NoteType;

#[derive(Debug, Error)]
pub enum BankError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: invalid JSON: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{0}")]
    Validation(#[from] ValidationError),
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{field}: {message}")]
pub struct ValidationError {
    pub field: String,
    pub message: String,
}

impl ValidationError {
    fn new(field: impl Into<String>, message: impl Into<String>) -> ValidationError {
        ValidationError {
            field: field.into(),
            message: message.into(),
        }
    }
}

fn check_unit(field: &str, value: f64) -> Result<(), ValidationError> {
    if value.is_finite() && (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(ValidationError::new(field, format!("must be in [0, 1], got {value}")))
    }
}

fn check_k(field: &str, value: i64) -> Result<usize, ValidationError> {
    usize::try_from(value)
        .ok()
        .filter(|&k| k > 0)
        .ok_or_else(|| ValidationError::new(field, format!("must be a positive integer, got {value}")))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetrievalParams {
    pub k: usize,
    pub fusion_weight: f64,
    pub score_threshold: f64,
    pub dedup_cosine: f64,
}

impl Default for RetrievalParams {
    fn default() -> Self {
        RetrievalParams {
            k: 4,
            fusion_weight: 0.5,
            score_threshold: 0.6,
            dedup_cosine: 0.95,
        }
    }
}

impl RetrievalParams {
    pub fn validate(&self, prefix: &str) -> Result<(), ValidationError> {
        if self.k == 0 {
            return Err(ValidationError::new(
                format!("{prefix}.k"),
                "must be a positive integer, got 0",
            ));
        }
        check_unit(&format!("{prefix}.fusion_weight"), self.fusion_weight)?;
        check_unit(&format!("{prefix}.score_threshold"), self.score_threshold)?;
        check_unit(&format!("{prefix}.dedup_cosine"), self.dedup_cosine)
    }
}

/// Field-wise overrides layered on top of a bank's defaults.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fusion_weight: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score_threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dedup_cosine: Option<f64>,
}

impl ParamOverrides {
    pub fn apply(&self, base: RetrievalParams) -> RetrievalParams {
        RetrievalParams {
            k: self.k.unwrap_or(base.k),
            fusion_weight: self.fusion_weight.unwrap_or(base.fusion_weight),
            score_threshold: self.score_threshold.unwrap_or(base.score_threshold),
            dedup_cosine: self.dedup_cosine.unwrap_or(base.dedup_cosine),
        }
    }

    /// `other` wins where both are set.
    pub fn merge(&self, other: &ParamOverrides) -> ParamOverrides {
        ParamOverrides {
            k: other.k.or(self.k),
            fusion_weight: other.fusion_weight.or(self.fusion_weight),
            score_threshold: other.score_threshold.or(self.score_threshold),
            dedup_cosine: other.dedup_cosine.or(self.dedup_cosine),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Question {
    pub q_id: String,
    pub text: String,
    pub k_override: Option<usize>,
    pub threshold_override: Option<f64>,
    pub note_type_filter: Option<BTreeSet<NoteType>>,
    pub order: u32,
}

impl Question {
    /// An ad-hoc question with no overrides.
    pub fn ad_hoc(text: impl Into<String>) -> Question {
        Question {
            q_id: "ad-hoc".into(),
            text: text.into(),
            k_override: None,
            threshold_override: None,
            note_type_filter: None,
            order: 0,
        }
    }

    pub fn effective_k(&self, params: &RetrievalParams) -> usize {
        self.k_override.unwrap_or(params.k)
    }

    pub fn effective_threshold(&self, params: &RetrievalParams) -> f64 {
        self.threshold_override.unwrap_or(params.score_threshold)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuestionBank {
    pub name: String,
    pub version: String,
    pub questions: Vec<Question>,
    pub defaults: RetrievalParams,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BankFile {
    name: String,
    version: String,
    #[serde(default)]
    defaults: DefaultsFile,
    questions: Vec<QuestionFile>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DefaultsFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    k: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    fusion_weight: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    score_threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dedup_cosine: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct QuestionFile {
    q_id: String,
    text: String,
    order: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    k: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    score_threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    note_type_filter: Option<Vec<NoteType>>,
}

impl QuestionBank {
    pub fn from_json(json: &str) -> Result<QuestionBank, BankError> {
        let file: BankFile = serde_json::from_str(json).map_err(|e| BankError::Parse {
            path: PathBuf::new(),
            message: e.to_string(),
        })?;
        Ok(QuestionBank::from_file(file)?)
    }

    fn from_file(file: BankFile) -> Result<QuestionBank, ValidationError> {
        let base = RetrievalParams::default();
        let defaults = RetrievalParams {
            k: match file.defaults.k {
                Some(k) => check_k("defaults.k", k)?,
                None => base.k,
            },
            fusion_weight: file.defaults.fusion_weight.unwrap_or(base.fusion_weight),
            score_threshold: file.defaults.score_threshold.unwrap_or(base.score_threshold),
            dedup_cosine: file.defaults.dedup_cosine.unwrap_or(base.dedup_cosine),
        };
        defaults.validate("defaults")?;

        if file.questions.is_empty() {
            return Err(ValidationError::new("questions", "must contain at least one question"));
        }
        let mut seen = HashSet::new();
        let mut previous_order: Option<u32> = None;
        let mut questions = Vec::with_capacity(file.questions.len());
        for (i, q) in file.questions.into_iter().enumerate() {
            let at = |field: &str| format!("questions[{i}].{field}");
            if q.q_id.trim().is_empty() {
                return Err(ValidationError::new(at("q_id"), "must be nonempty"));
            }
            if !seen.insert(q.q_id.clone()) {
                return Err(ValidationError::new(at("q_id"), format!("duplicate q_id {:?}", q.q_id)));
            }
            if q.text.trim().is_empty() {
                return Err(ValidationError::new(at("text"), "must be nonempty"));
            }
            let order = u32::try_from(q.order).map_err(|_| {
                ValidationError::new(at("order"), format!("must be a non-negative integer, got {}", q.order))
            })?;
            if let Some(prev) = previous_order.filter(|&p| order <= p) {
                return Err(ValidationError::new(
                    at("order"),
                    format!("orders must be strictly increasing ({order} follows {prev})"),
                ));
            }
            previous_order = Some(order);
            let k_override = q.k.map(|k| check_k(&at("k"), k)).transpose()?;
            if let Some(t) = q.score_threshold {
                check_unit(&at("score_threshold"), t)?;
            }
            let note_type_filter = match q.note_type_filter {
                Some(types) if types.is_empty() => {
                    return Err(ValidationError::new(
                        at("note_type_filter"),
                        "must not be empty when present",
                    ))
                }
                other => other.map(|t| t.into_iter().collect()),
            };
            questions.push(Question {
                q_id: q.q_id,
                text: q.text,
                k_override,
                threshold_override: q.score_threshold,
                note_type_filter,
                order,
            });
        }

        Ok(QuestionBank {
            name: file.name,
            version: file.version,
            questions,
            defaults,
        })
    }

    /// Serializes to the on-disk bank schema.
    pub fn to_json(&self) -> String {
        let file = BankFile {
            name: self.name.clone(),
            version: self.version.clone(),
            defaults: DefaultsFile {
                k: Some(self.defaults.k as i64),
                fusion_weight: Some(self.defaults.fusion_weight),
                score_threshold: Some(self.defaults.score_threshold),
                dedup_cosine: Some(self.defaults.dedup_cosine),
            },
            questions: self
                .questions
                .iter()
                .map(|q| QuestionFile {
                    q_id: q.q_id.clone(),
                    text: q.text.clone(),
                    order: i64::from(q.order),
                    k: q.k_override.map(|k| k as i64),
                    score_threshold: q.threshold_override,
                    note_type_filter: q.note_type_filter.as_ref().map(|s| s.iter().copied().collect()),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("bank serializes")
    }
}

pub fn load_question_bank(path: &Path) -> Result<QuestionBank, BankError> {
    let text = fs::read_to_string(path).map_err(|source| BankError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    QuestionBank::from_json(&text).map_err(|e| match e {
        BankError::Parse { message, .. } => BankError::Parse {
            path: path.to_path_buf(),
            message,
        },
        other => other,
    })
}
