use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::oracle::{parse_probability, EventText, LlmOracle, OracleQuery, QueryKind, TableOracle};
use crate::scm::Assignment;
use crate::{Error, NewsArticle, Question, Result};

/// Probability assigned when the model's answer cannot be parsed.
pub const FALLBACK_PREDICTION: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReasoningKind {
    Scratchpad,
    Cot,
    /// The step-by-step prompt sent to a long-reasoning model.
    LongCot,
}

impl ReasoningKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Scratchpad => "scratchpad",
            Self::Cot => "cot",
            Self::LongCot => "long-cot",
        }
    }

    pub fn query_kind(self) -> QueryKind {
        match self {
            Self::Scratchpad => QueryKind::ReasonScratchpad,
            Self::Cot | Self::LongCot => QueryKind::ReasonCot,
        }
    }
}

impl fmt::Display for ReasoningKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ReasoningKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "scratchpad" => Ok(Self::Scratchpad),
            "cot" => Ok(Self::Cot),
            "long-cot" => Ok(Self::LongCot),
            _ => Err(Error::InvalidArgument(format!("unknown reasoning strategy `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReasoningStrategy {
    pub kind: ReasoningKind,
    pub model: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub probability: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flag: Option<String>,
}

/// Produces a yes-probability for a question from retrieved articles.
/// `run` distinguishes repeated evaluation runs.
pub trait Forecaster: Send + Sync {
    fn label(&self) -> String;

    fn predict(&self, question: &Question, retrieved: &[&NewsArticle], run: u32) -> Result<Prediction>;
}

fn event(a: &NewsArticle) -> EventText {
    EventText {
        id: a.id.clone(),
        date: a.publish_date,
        text: a.event_text().to_string(),
    }
}

/// Renders the reasoning prompt and parses the answer. Each run is one call;
/// an unparsable answer gets one more call, then the fallback prediction.
pub fn reason(
    question: &Question,
    retrieved: &[&NewsArticle],
    kind: ReasoningKind,
    llm: &LlmOracle,
    run: u32,
) -> Result<Prediction> {
    let mut query = OracleQuery::new(kind.query_kind()).with_question(question);
    query.retrieved = retrieved.iter().map(|a| event(a)).collect();
    for attempt in 0..2 {
        // retries get their own cache slot so they are not answered from it
        let text = llm.complete_query(&query, run * 2 + attempt)?;
        if let Ok(p) = parse_probability(&text) {
            return Ok(Prediction {
                probability: p,
                flag: None,
            });
        }
    }
    Ok(Prediction {
        probability: FALLBACK_PREDICTION,
        flag: Some("unparsable answer; defaulted to 0.5".into()),
    })
}

pub struct PromptForecaster<'a> {
    llm: &'a LlmOracle,
    kind: ReasoningKind,
}

impl<'a> PromptForecaster<'a> {
    pub fn new(llm: &'a LlmOracle, kind: ReasoningKind) -> Self {
        Self { llm, kind }
    }

    pub fn strategy(&self) -> ReasoningStrategy {
        ReasoningStrategy {
            kind: self.kind,
            model: self.llm.settings().model.clone(),
        }
    }
}

impl Forecaster for PromptForecaster<'_> {
    fn label(&self) -> String {
        format!("{}:{}", self.kind, self.llm.settings().model)
    }

    fn predict(&self, question: &Question, retrieved: &[&NewsArticle], run: u32) -> Result<Prediction> {
        reason(question, retrieved, self.kind, self.llm, run)
    }
}

/// Reads the yes-probability off a question's joint table, treating every
/// retrieved article as an event that happened. Articles with no table
/// variable are ignored.
pub struct TableForecaster<'a> {
    oracle: &'a TableOracle,
}

impl<'a> TableForecaster<'a> {
    pub fn new(oracle: &'a TableOracle) -> Self {
        Self { oracle }
    }
}

impl Forecaster for TableForecaster<'_> {
    fn label(&self) -> String {
        "table-oracle".into()
    }

    fn predict(&self, question: &Question, retrieved: &[&NewsArticle], _run: u32) -> Result<Prediction> {
        let table = self.oracle.table(&question.id).ok_or_else(|| {
            Error::InvalidArgument(format!("no joint table for question {}", question.id))
        })?;
        let mut evidence = Assignment::new();
        for a in retrieved {
            if table.index_of(&a.id).is_some() {
                evidence.insert(&a.id, true);
            }
        }
        Ok(Prediction {
            probability: self.oracle.outcome_given(&question.id, true, &evidence)?,
            flag: None,
        })
    }
}
