//! Probability estimation services.
//!
//! A [`ProbabilityOracle`] answers the two observational queries the window
//! adjustment needs: the outcome probability given a partial assignment of
//! events, and the probability of a partial assignment itself. Two
//! implementations ship: [`LlmOracle`] elicits both from a chat model through
//! prompt templates with repeated-call averaging and a response cache, and
//! [`TableOracle`] reads them exactly off a [`JointTable`](crate::scm::table::JointTable).

pub mod cache;
pub mod llm;
pub mod mock;
pub mod parse;
pub mod prompt;
pub mod provider;
pub mod table;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scm::{Assignment, TemporalScm};

pub use cache::{cache_key, CachedProvider, ResponseCache};
pub use llm::{LlmOracle, LlmSettings, Temperatures};
pub use parse::{parse_probability, parse_rating, parse_string_list};
pub use prompt::{render_prompt, EventText, OracleQuery, QueryKind};
pub use provider::{ChatMessage, ChatProvider, ChatRequest, HttpChatProvider, ProviderConfig};
pub use table::TableOracle;

#[derive(Debug, Clone, Error)]
pub enum OracleError {
    #[error("provider failure: {0}")]
    Provider(String),

    #[error("could not parse a probability from model output: {reason}")]
    Parse { reason: String, raw: String },

    #[error("template placeholder `{0}` is unbound")]
    Template(String),

    #[error("invalid oracle answer: {0}")]
    Invalid(String),

    #[error("oracle has no entry for `{0}`")]
    Unknown(String),

    #[error("query {query} failed: {source}")]
    Query {
        query: String,
        #[source]
        source: Box<OracleError>,
    },
}

impl OracleError {
    pub fn for_query(self, query: String) -> Self {
        match self {
            e @ Self::Query { .. } => e,
            e => Self::Query {
                query,
                source: Box::new(e),
            },
        }
    }

    /// The innermost error, under any query context.
    pub fn root(&self) -> &OracleError {
        match self {
            Self::Query { source, .. } => source.root(),
            e => e,
        }
    }
}

/// A probability estimate with the raw outputs it was aggregated from.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OracleAnswer {
    pub probability: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub raw_texts: Vec<String>,
    pub calls_averaged: usize,
    /// Degradations that did not prevent an answer, e.g. one of the
    /// averaged calls failing to parse.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<String>,
}

impl OracleAnswer {
    pub fn exact(probability: f64) -> Self {
        Self {
            probability,
            raw_texts: Vec::new(),
            calls_averaged: 1,
            flags: Vec::new(),
        }
    }
}

/// Answers observational queries about one question's model. Implementations
/// must tolerate concurrent calls.
pub trait ProbabilityOracle: Send + Sync {
    /// `P(Y = truth | target = value, conditioning)`.
    fn conditional(
        &self,
        scm: &TemporalScm,
        target: &str,
        value: bool,
        conditioning: &Assignment,
    ) -> Result<OracleAnswer, OracleError>;

    /// `P(assignment)`; the empty assignment has probability one.
    fn joint(&self, scm: &TemporalScm, assignment: &Assignment) -> Result<OracleAnswer, OracleError>;
}
