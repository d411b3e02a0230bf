//! Domain records shared by every stage: forecasting questions, dated news
//! articles and the small configuration values that parameterize grouping
//! and evaluation.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::scm::CilScore;

/// Where a question was harvested from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QuestionSource {
    Metaculus,
    Manifold,
    Synthetic,
}

impl FromStr for QuestionSource {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "metaculus" | "metaculus-like" => Ok(Self::Metaculus),
            "manifold" | "manifold-like" => Ok(Self::Manifold),
            "synthetic" => Ok(Self::Synthetic),
            other => Err(format!("unknown question source `{other}`")),
        }
    }
}

impl fmt::Display for QuestionSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Metaculus => "metaculus",
            Self::Manifold => "manifold",
            Self::Synthetic => "synthetic",
        })
    }
}

/// A binary forecasting question together with its resolution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Question {
    pub id: String,
    pub title: String,
    pub background: String,
    pub resolution_criteria: String,
    pub open_date: NaiveDate,
    pub resolved_date: NaiveDate,
    /// Resolved answer, 0 or 1.
    pub ground_truth: u8,
    pub source: QuestionSource,
    /// Unrecognized keys from the input record, written back on output.
    #[serde(flatten)]
    pub metadata: BTreeMap<String, serde_json::Value>,
}

impl Question {
    pub fn truth(&self) -> bool {
        self.ground_truth == 1
    }
}

/// One dated news article attached to a question. Within the causal model it
/// stands for the binary event "the situation in this article happens".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NewsArticle {
    pub id: String,
    pub question_id: String,
    pub publish_date: NaiveDate,
    pub title: String,
    pub body: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub url: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summary: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relevance_rating: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cil: Option<CilScore>,
    #[serde(flatten)]
    pub metadata: BTreeMap<String, serde_json::Value>,
}

impl NewsArticle {
    /// Text used to describe the article inside prompts and for embedding:
    /// the summary when present, otherwise the title.
    pub fn event_text(&self) -> &str {
        match self.summary.as_deref() {
            Some(s) if !s.trim().is_empty() => s,
            _ => &self.title,
        }
    }

    pub fn cil_value(&self) -> Option<f64> {
        self.cil.as_ref().map(|c| c.value)
    }
}

/// Chronological grouping parameters: how many days one group spans and how
/// many earlier groups a variable may depend on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupingConfig {
    pub group_span_days: u32,
    pub window: u32,
}

impl Default for GroupingConfig {
    fn default() -> Self {
        Self {
            group_span_days: 10,
            window: 3,
        }
    }
}

impl GroupingConfig {
    pub fn new(group_span_days: u32, window: u32) -> Result<Self, crate::Error> {
        let cfg = Self {
            group_span_days,
            window,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), crate::Error> {
        if self.group_span_days == 0 {
            return Err(crate::Error::InvalidArgument(
                "group_span_days must be at least 1".into(),
            ));
        }
        if self.window == 0 {
            return Err(crate::Error::InvalidArgument(
                "window must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvaluationConfig {
    /// Articles handed to the reasoner per question.
    pub retrieval_n: usize,
    /// Independent repetitions; mean and std are taken across them.
    pub runs: usize,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        Self {
            retrieval_n: 10,
            runs: 2,
        }
    }
}

impl EvaluationConfig {
    pub fn validate(&self) -> Result<(), crate::Error> {
        if self.retrieval_n == 0 || self.runs == 0 {
            return Err(crate::Error::InvalidArgument(
                "retrieval_n and runs must be at least 1".into(),
            ));
        }
        Ok(())
    }
}
