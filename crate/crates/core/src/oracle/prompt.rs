//! Prompt templates and their rendering.
//!
//! Placeholders are `{name}` with a lowercase identifier; anything else in
//! braces (e.g. `{ Insert your thoughts }`) is literal text. Substituted
//! values are never rescanned, so article text containing braces is safe.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::OracleError;
use crate::types::Question;

const REASONING_STEPS: &str = "1. Provide at least 3 reasons why the answer might be no.
{ Insert your thoughts }

2. Provide at least 3 reasons why the answer might be yes.
{ Insert your thoughts }

3. Rate the strength of each of the reasons given in the last two responses. Think like a superforecaster (e.g. Nate Silver).
{ Insert your rating of the strength of each reason }

4. Aggregate your considerations.
{ Insert your aggregated considerations }

5. Output your answer (a number between 0 and 1) with an asterisk at the beginning and end of the decimal.
{ Insert your answer }";

const ENTITY_QUERIES: &str = "I will provide you with a forecasting question and the background information for the question. Extract the named entities, events of the question. Each entity and event are up to {max_words} words. The named entities can only be people, organizations, countries, locations while can not be date or time. Put all result items in a list that I can parse by JSON as [\"entity 1\", \"entity 2\", \"event 1\", \"event 2\", ...].

Question: {question}

Question Background: {background}

Question Date: {date}

Output:";

const RESOLVING_STEP_QUERIES: &str = "I will provide you with a forecasting question and the background information for the question. I will then ask you to generate short search queries (up to {max_words} words each) that I'll use to find articles on Google News to help answer the question. The articles should be mainly about event arguments such as subjects, objects, locations, organizations of the events in question and background information.
You must generate this exact amount of queries: {num_keywords}. Put all result items in a list that I can parse by JSON as [\"step 1\", \"step 2\", \"step 3\", ...].

Question: {question}

Question Background: {background}

Question Date: {date}

Output:";

const SIMILAR_EVENT_QUERIES: &str = "I will provide you with a forecasting question and the background information for the question. I will then ask you to generate short search queries (up to {max_words} words each) that I'll use to find articles of similar events on Google News to help answer the question. The similar events are events happened on other similar entities in the history. Or events happended on question entities but on other date.
You must generate this exact amount of queries: {num_keywords}. Put all result items in a list that I can parse by JSON as [\"event 1\", \"event 2\", \"event 3\", ...].

Question: {question}

Question Background: {background}

Question Date: {date}

Output:";

const RELEVANCE: &str = "Please consider the following forecasting question and its background information.
After that, I will give you a news article and ask you to rate its relevance with respect to the forecasting question.

Question: {question}

Question Background: {background}

Resolution Criteria: {resolution_criteria}

Article: {article}

Please rate the relevance of the article to the question, at the scale of 1-6
1 -- irrelevant
2 -- slightly relevant
3 -- somewhat relevant
4 -- relevant
5 -- highly relevant
6 -- most relevant

Guidelines:
- If the article has events of similar types which may happened on different subjects, it also consider relevant to the question.
- You don't need to access any external sources. Just consider the information provided.
- If the text content is an error message about JavaScript, paywall, cookies or other technical issues, output a score of 1.

Your response should look like the following:
Thoughts: { insert your thinking }
Rating: { insert your rating }";

const CONDITIONAL: &str = "### Given a background that in the meantime:
--- These events happened:{happened}
--- These events didn't happen:{not_happened}
### Most importantly: --- {focus_label}:{focus}
### Answer the question: {question}

### Instructions:
{steps}";

const JOINT: &str = "### Given a situation that in the meantime:
--- These events happened:{happened}
--- These events didn't happen:{not_happened}

### Instructions:
Use your world knowledge and commonsense to reason the probability if the situation can happen. Generate the thoughts first:
{ Insert your thoughts }

Then output your answer (a probability number between 0 and 1) with an asterisk at the beginning and end of the decimal.
{ Insert your answer }";

const SUMMARIZE: &str = "Summarize the following news article in at most {max_words} words. Keep the concrete events, actors, numbers and dates; drop boilerplate.

Title: {title}

Article: {article}

Summary:";

const SCRATCHPAD: &str = "Question: {question}

Question Background: {background}

Resolution Criteria: {resolution_criteria}{retrieved}

Instructions:
{steps}";

const COT: &str = "Question: {question}

Question Background: {background}

Resolution Criteria: {resolution_criteria}{retrieved}

Think step by step.
Reason and finally output your answer (a number between 0 and 1) with an asterisk at the beginning and end of the decimal.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QueryKind {
    /// Outcome probability given events that did and did not happen.
    Conditional,
    /// Probability that a combination of events happens.
    Joint,
    Relevance,
    EntityQueries,
    ResolvingStepQueries,
    SimilarEventQueries,
    Summarize,
    ReasonScratchpad,
    ReasonCot,
}

impl QueryKind {
    fn template(self) -> &'static str {
        match self {
            Self::Conditional => CONDITIONAL,
            Self::Joint => JOINT,
            Self::Relevance => RELEVANCE,
            Self::EntityQueries => ENTITY_QUERIES,
            Self::ResolvingStepQueries => RESOLVING_STEP_QUERIES,
            Self::SimilarEventQueries => SIMILAR_EVENT_QUERIES,
            Self::Summarize => SUMMARIZE,
            Self::ReasonScratchpad => SCRATCHPAD,
            Self::ReasonCot => COT,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Conditional => "conditional",
            Self::Joint => "joint",
            Self::Relevance => "relevance",
            Self::EntityQueries => "entity-queries",
            Self::ResolvingStepQueries => "resolving-step-queries",
            Self::SimilarEventQueries => "similar-event-queries",
            Self::Summarize => "summarize",
            Self::ReasonScratchpad => "reason-scratchpad",
            Self::ReasonCot => "reason-cot",
        }
    }
}

/// A dated event description placed in one of the prompt's event lists.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventText {
    pub id: String,
    pub date: NaiveDate,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct QuestionContext {
    pub title: String,
    pub background: String,
    pub resolution_criteria: String,
    pub date: Option<NaiveDate>,
}

impl From<&Question> for QuestionContext {
    fn from(q: &Question) -> Self {
        Self {
            title: q.title.clone(),
            background: q.background.clone(),
            resolution_criteria: q.resolution_criteria.clone(),
            date: Some(q.open_date),
        }
    }
}

/// Everything needed to render one prompt.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleQuery {
    pub kind: QueryKind,
    pub question: Option<QuestionContext>,
    pub happened: Vec<EventText>,
    pub not_happened: Vec<EventText>,
    /// Highlighted event of a conditional query and whether it happened.
    pub focus: Option<(EventText, bool)>,
    /// Retrieved evidence for reasoning prompts.
    pub retrieved: Vec<EventText>,
    pub bindings: BTreeMap<String, String>,
}

impl OracleQuery {
    pub fn new(kind: QueryKind) -> Self {
        Self {
            kind,
            question: None,
            happened: Vec::new(),
            not_happened: Vec::new(),
            focus: None,
            retrieved: Vec::new(),
            bindings: BTreeMap::new(),
        }
    }

    pub fn with_question(mut self, q: &Question) -> Self {
        self.question = Some(q.into());
        self
    }

    pub fn bind(mut self, key: &str, value: impl Into<String>) -> Self {
        self.bindings.insert(key.to_string(), value.into());
        self
    }
}

fn event_list(events: &[EventText]) -> String {
    if events.is_empty() {
        return " (none)".to_string();
    }
    let mut sorted: Vec<&EventText> = events.iter().collect();
    sorted.sort_by(|a, b| (a.date, &a.id).cmp(&(b.date, &b.id)));
    sorted
        .iter()
        .map(|e| format!("\n- {}", one_line(&e.text)))
        .collect()
}

fn one_line(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn retrieved_block(events: &[EventText]) -> String {
    if events.is_empty() {
        return String::new();
    }
    format!(
        "\n\nWe have retrieved the following information for this question:{}",
        event_list(events)
    )
}

/// Renders `query` to byte-deterministic text.
pub fn render_prompt(query: &OracleQuery) -> Result<String, OracleError> {
    for h in &query.happened {
        if query.not_happened.iter().any(|n| n.id == h.id) {
            return Err(OracleError::Invalid(format!(
                "event `{}` listed as both happened and not happened",
                h.id
            )));
        }
    }
    let mut values: BTreeMap<&str, String> = BTreeMap::new();
    values.insert("steps", REASONING_STEPS.to_string());
    if let Some(q) = &query.question {
        values.insert("question", q.title.clone());
        values.insert("background", q.background.clone());
        values.insert("resolution_criteria", q.resolution_criteria.clone());
        if let Some(d) = q.date {
            values.insert("date", d.to_string());
        }
    }
    match query.kind {
        QueryKind::Conditional | QueryKind::Joint => {
            values.insert("happened", event_list(&query.happened));
            values.insert("not_happened", event_list(&query.not_happened));
        }
        QueryKind::ReasonScratchpad | QueryKind::ReasonCot => {
            values.insert("retrieved", retrieved_block(&query.retrieved));
        }
        _ => {}
    }
    if let Some((event, happened)) = &query.focus {
        let label = if *happened {
            "These events happened"
        } else {
            "These events didn't happen"
        };
        values.insert("focus_label", label.to_string());
        values.insert("focus", event_list(std::slice::from_ref(event)));
    }
    for (k, v) in &query.bindings {
        values.insert(k.as_str(), v.clone());
    }
    substitute(query.kind.template(), &values)
}

fn substitute(template: &str, values: &BTreeMap<&str, String>) -> Result<String, OracleError> {
    let mut out = String::with_capacity(template.len() + 256);
    let mut rest = template;
    while let Some(start) = rest.find('{') {
        out.push_str(&rest[..start]);
        let after = &rest[start + 1..];
        let name_len = after
            .find(|c: char| !(c.is_ascii_lowercase() || c == '_'))
            .unwrap_or(after.len());
        if name_len > 0 && after[name_len..].starts_with('}') {
            let name = &after[..name_len];
            let value = values
                .get(name)
                .ok_or_else(|| OracleError::Template(name.to_string()))?;
            out.push_str(value);
            rest = &after[name_len + 1..];
        } else {
            out.push('{');
            rest = after;
        }
    }
    out.push_str(rest);
    Ok(out)
}
