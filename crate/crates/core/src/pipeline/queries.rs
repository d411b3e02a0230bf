use serde::{Deserialize, Serialize};

use crate::oracle::{parse_string_list, render_prompt, LlmOracle, OracleQuery, QueryKind};
use crate::{Error, Question, Result};

/// Search queries generated for one question.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuerySet {
    pub entities: Vec<String>,
    pub resolving_steps: Vec<String>,
    pub similar_events: Vec<String>,
}

impl QuerySet {
    pub fn all(&self) -> impl Iterator<Item = &str> {
        self.entities
            .iter()
            .chain(&self.resolving_steps)
            .chain(&self.similar_events)
            .map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entities.len() + self.resolving_steps.len() + self.similar_events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct QueryGenConfig {
    /// Word cap for entity/event items.
    pub entity_words: usize,
    /// Word cap for resolving-step and similar-event queries.
    pub query_words: usize,
    /// Queries requested per list.
    pub num_keywords: usize,
    /// Completions tried per list before giving up.
    pub attempts: u32,
}

impl Default for QueryGenConfig {
    fn default() -> Self {
        Self {
            entity_words: 5,
            query_words: 10,
            num_keywords: 5,
            attempts: 2,
        }
    }
}

pub fn truncate_words(text: &str, cap: usize) -> String {
    text.split_whitespace().take(cap).collect::<Vec<_>>().join(" ")
}

fn one_list(
    question: &Question,
    llm: &LlmOracle,
    kind: QueryKind,
    cap: usize,
    cfg: &QueryGenConfig,
) -> Result<Vec<String>> {
    let query = OracleQuery::new(kind)
        .with_question(question)
        .bind("max_words", cap.to_string())
        .bind("num_keywords", cfg.num_keywords.to_string());
    let prompt = render_prompt(&query)?;
    let attempts = cfg.attempts.max(1);
    for attempt in 0..attempts {
        let text = llm.complete(kind, &prompt, attempt)?;
        match parse_string_list(&text) {
            Ok(items) => {
                return Ok(items
                    .iter()
                    .map(|s| truncate_words(s, cap))
                    .filter(|s| !s.is_empty())
                    .collect())
            }
            Err(e) => log::debug!("{} attempt {attempt}: {e}", kind.as_str()),
        }
    }
    Err(Error::Pipeline(format!(
        "{}: no parsable list after {attempts} attempts",
        kind.as_str()
    )))
}

/// One oracle call per query family; each reply must contain a JSON list
/// of strings.
pub fn generate_queries(question: &Question, llm: &LlmOracle, cfg: &QueryGenConfig) -> Result<QuerySet> {
    Ok(QuerySet {
        entities: one_list(question, llm, QueryKind::EntityQueries, cfg.entity_words, cfg)?,
        resolving_steps: one_list(question, llm, QueryKind::ResolvingStepQueries, cfg.query_words, cfg)?,
        similar_events: one_list(question, llm, QueryKind::SimilarEventQueries, cfg.query_words, cfg)?,
    })
}
