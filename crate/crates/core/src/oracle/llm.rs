use serde::{Deserialize, Serialize};

use super::cache::CachedProvider;
use super::parse::parse_probability;
use super::prompt::{render_prompt, EventText, OracleQuery, QueryKind};
use super::provider::ChatRequest;
use super::{OracleAnswer, OracleError, ProbabilityOracle};
use crate::scm::{Assignment, ScmVariable, TemporalScm};

/// Sampling temperature per prompt family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Temperatures {
    pub probability: f64,
    pub relevance: f64,
    pub summarize: f64,
    pub query_gen: f64,
    pub reasoning: f64,
}

impl Default for Temperatures {
    fn default() -> Self {
        Self {
            probability: 0.7,
            relevance: 0.0,
            summarize: 0.0,
            query_gen: 0.0,
            reasoning: 0.7,
        }
    }
}

impl Temperatures {
    pub fn for_kind(&self, kind: QueryKind) -> f64 {
        match kind {
            QueryKind::Conditional | QueryKind::Joint => self.probability,
            QueryKind::Relevance => self.relevance,
            QueryKind::Summarize => self.summarize,
            QueryKind::EntityQueries
            | QueryKind::ResolvingStepQueries
            | QueryKind::SimilarEventQueries => self.query_gen,
            QueryKind::ReasonScratchpad | QueryKind::ReasonCot => self.reasoning,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmSettings {
    pub model: String,
    #[serde(default)]
    pub temperatures: Temperatures,
    /// Calls averaged per probability estimate.
    #[serde(default = "default_calls")]
    pub probability_calls: u32,
}

fn default_calls() -> u32 {
    2
}

impl LlmSettings {
    pub fn new(model: &str) -> Self {
        Self {
            model: model.to_string(),
            temperatures: Temperatures::default(),
            probability_calls: default_calls(),
        }
    }
}

/// Language-model backed oracle. Probability prompts are sent
/// `probability_calls` times (distinct call indices) and the parsed values
/// averaged.
pub struct LlmOracle {
    gateway: CachedProvider,
    settings: LlmSettings,
}

fn event_of(v: &ScmVariable) -> EventText {
    EventText {
        id: v.article.id.clone(),
        date: v.article.publish_date,
        text: v.article.event_text().to_string(),
    }
}

impl LlmOracle {
    pub fn new(gateway: CachedProvider, settings: LlmSettings) -> Self {
        Self { gateway, settings }
    }

    pub fn gateway(&self) -> &CachedProvider {
        &self.gateway
    }

    pub fn settings(&self) -> &LlmSettings {
        &self.settings
    }

    /// One completion of an already rendered prompt.
    pub fn complete(&self, kind: QueryKind, prompt: &str, call_index: u32) -> Result<String, OracleError> {
        let request = ChatRequest::user(
            &self.settings.model,
            prompt,
            self.settings.temperatures.for_kind(kind),
        );
        self.gateway.call(&request, call_index)
    }

    pub fn complete_query(&self, query: &OracleQuery, call_index: u32) -> Result<String, OracleError> {
        let prompt = render_prompt(query)?;
        self.complete(query.kind, &prompt, call_index)
    }

    /// Averages the parsed probabilities of the repeated calls. A call whose
    /// text does not parse is dropped and flagged; if none parse the last
    /// parse error is returned.
    pub fn estimate(&self, query: &OracleQuery) -> Result<OracleAnswer, OracleError> {
        let prompt = render_prompt(query)?;
        let calls = self.settings.probability_calls.max(1);
        let mut answer = OracleAnswer::default();
        let mut parsed = Vec::with_capacity(calls as usize);
        let mut last_err = None;
        for call_index in 0..calls {
            let text = self.complete(query.kind, &prompt, call_index)?;
            match parse_probability(&text) {
                Ok(p) => parsed.push(p),
                Err(e) => {
                    answer.flags.push(format!("call {call_index} unparsable"));
                    last_err = Some(e);
                }
            }
            answer.raw_texts.push(text);
        }
        if parsed.is_empty() {
            return Err(last_err.expect("at least one call"));
        }
        answer.calls_averaged = parsed.len();
        answer.probability = parsed.iter().sum::<f64>() / parsed.len() as f64;
        Ok(answer)
    }

    fn event_lists(
        &self,
        scm: &TemporalScm,
        assignment: &Assignment,
    ) -> Result<(Vec<EventText>, Vec<EventText>), OracleError> {
        let mut happened = Vec::new();
        let mut not_happened = Vec::new();
        for (id, value) in assignment.iter() {
            let v = scm
                .variable(id)
                .map_err(|_| OracleError::Unknown(id.to_string()))?;
            if value {
                happened.push(event_of(v));
            } else {
                not_happened.push(event_of(v));
            }
        }
        Ok((happened, not_happened))
    }
}

impl ProbabilityOracle for LlmOracle {
    fn conditional(
        &self,
        scm: &TemporalScm,
        target: &str,
        value: bool,
        conditioning: &Assignment,
    ) -> Result<OracleAnswer, OracleError> {
        let focus = scm
            .variable(target)
            .map_err(|_| OracleError::Unknown(target.to_string()))?;
        let (happened, not_happened) = self.event_lists(scm, conditioning)?;
        let mut query = OracleQuery::new(QueryKind::Conditional).with_question(scm.question());
        query.happened = happened;
        query.not_happened = not_happened;
        query.focus = Some((event_of(focus), value));
        let mut answer = self.estimate(&query)?;
        // the prompt elicits P(yes); the adjustment wants P(Y = truth)
        if !scm.question().truth() {
            answer.probability = 1.0 - answer.probability;
        }
        Ok(answer)
    }

    fn joint(&self, scm: &TemporalScm, assignment: &Assignment) -> Result<OracleAnswer, OracleError> {
        if assignment.is_empty() {
            return Ok(OracleAnswer::exact(1.0));
        }
        let (happened, not_happened) = self.event_lists(scm, assignment)?;
        let mut query = OracleQuery::new(QueryKind::Joint);
        query.happened = happened;
        query.not_happened = not_happened;
        self.estimate(&query)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{article, question, ScriptedProvider};
    use crate::types::GroupingConfig;
    use chrono::NaiveDate;
    use std::sync::Arc;

    fn d(m: u32, day: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(2024, m, day).unwrap()
    }

    fn oracle(replies: Vec<&str>) -> (LlmOracle, Arc<ScriptedProvider>) {
        let provider = Arc::new(ScriptedProvider::new(replies));
        let gateway = CachedProvider::new(provider.clone(), None, 4);
        (LlmOracle::new(gateway, LlmSettings::new("m")), provider)
    }

    fn scm(truth: u8) -> TemporalScm {
        let q = question("q", d(6, 1), truth);
        let arts = vec![article("a", d(1, 1)), article("b", d(1, 20))];
        crate::scm::build_scm(&q, &arts, &GroupingConfig::default()).unwrap()
    }

    #[test]
    fn averages_two_calls() {
        let (o, _) = oracle(vec!["*0.6*", "*0.8*"]);
        let a = o
            .conditional(&scm(1), "b", true, &Assignment::new().with("a", true))
            .unwrap();
        assert!((a.probability - 0.7).abs() < 1e-12);
        assert_eq!(a.calls_averaged, 2);
    }

    #[test]
    fn complement_when_truth_is_no() {
        let (o, _) = oracle(vec!["*0.3*", "*0.3*"]);
        let a = o.conditional(&scm(0), "b", true, &Assignment::new()).unwrap();
        assert!((a.probability - 0.7).abs() < 1e-12);
    }

    #[test]
    fn empty_joint_needs_no_call() {
        let (o, p) = oracle(vec![]);
        let a = o.joint(&scm(1), &Assignment::new()).unwrap();
        assert_eq!(a.probability, 1.0);
        assert_eq!(p.calls(), 0);
    }

    #[test]
    fn joint_averages() {
        let (o, _) = oracle(vec!["thoughts *0.25*", "*0.35*"]);
        let a = o.joint(&scm(1), &Assignment::new().with("a", true)).unwrap();
        assert!((a.probability - 0.30).abs() < 1e-12);
    }

    #[test]
    fn one_unparsable_call_is_flagged() {
        let (o, _) = oracle(vec!["no number here", "*0.4*"]);
        let a = o.joint(&scm(1), &Assignment::new().with("a", false)).unwrap();
        assert_eq!(a.probability, 0.4);
        assert_eq!(a.calls_averaged, 1);
        assert_eq!(a.flags.len(), 1);
    }

    #[test]
    fn both_unparsable_is_parse_error() {
        let (o, _) = oracle(vec!["nothing", "*7*"]);
        let err = o.joint(&scm(1), &Assignment::new().with("a", true)).unwrap_err();
        assert!(matches!(err, OracleError::Parse { .. }));
    }

    #[test]
    fn prompt_lists_conditioning_events() {
        let (o, p) = oracle(vec!["*0.5*", "*0.5*"]);
        o.conditional(&scm(1), "b", false, &Assignment::new().with("a", true))
            .unwrap();
        let prompt = p.prompts().remove(0);
        assert!(prompt.contains("--- These events happened:\n- title a"));
        assert!(prompt.contains("### Most importantly: --- These events didn't happen:\n- title b"));
    }
}
