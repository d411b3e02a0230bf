use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::oracle::ProbabilityOracle;
use crate::records::articles_by_question;
use crate::scm::{build_scm, score_all, CilPolicy, CilScore, EstimationMode};
use crate::{Error, GroupingConfig, NewsArticle, Question, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartitionConfig {
    pub tau: f64,
    pub min_count: usize,
}

impl Default for PartitionConfig {
    fn default() -> Self {
        Self { tau: 0.1, min_count: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkPartition {
    pub tau: f64,
    pub min_count: usize,
    pub l1: Vec<String>,
    pub l2: Vec<String>,
    pub quarantined: Vec<String>,
}

/// One line of `cil-scores.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CilRecord {
    pub question_id: String,
    pub article_id: String,
    pub value: f64,
    pub p_do1: f64,
    pub p_do0: f64,
    pub estimation_mode: EstimationMode,
    pub conditioning_set_size: usize,
    pub oracle_calls: usize,
}

impl CilRecord {
    pub fn new(question_id: &str, article_id: &str, s: &CilScore) -> Self {
        Self {
            question_id: question_id.to_string(),
            article_id: article_id.to_string(),
            value: s.value,
            p_do1: s.p_do1,
            p_do0: s.p_do0,
            estimation_mode: s.estimation_mode,
            conditioning_set_size: s.conditioning_set_size,
            oracle_calls: s.oracle_calls,
        }
    }

    pub fn score(&self) -> CilScore {
        CilScore {
            value: self.value,
            p_do1: self.p_do1,
            p_do0: self.p_do0,
            conditioning_set_size: self.conditioning_set_size,
            estimation_mode: self.estimation_mode,
            oracle_calls: self.oracle_calls,
        }
    }
}

/// Per-question outcome of a scoring run.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoringRun {
    /// Questions in input order that scored without error.
    pub scored: Vec<String>,
    pub records: Vec<CilRecord>,
    /// Question id and the error that sent it to quarantine.
    pub quarantined: Vec<(String, String)>,
}

/// Scores every article of every question. A question whose scoring fails
/// is quarantined and the run continues. Work is spread over a pool of
/// `parallelism` threads; output order follows the input.
pub fn score_questions(
    questions: &[Question],
    articles: &[NewsArticle],
    grouping: &GroupingConfig,
    oracle: &dyn ProbabilityOracle,
    policy: &CilPolicy,
    parallelism: usize,
) -> Result<ScoringRun> {
    grouping.validate()?;
    let by_question = articles_by_question(articles);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism.max(1))
        .build()
        .map_err(|e| Error::Pipeline(format!("worker pool: {e}")))?;
    let outcomes: Vec<std::result::Result<Vec<CilRecord>, String>> = pool.install(|| {
        questions
            .par_iter()
            .map(|q| {
                let arts = by_question.get(&q.id).map(Vec::as_slice).unwrap_or(&[]);
                if arts.is_empty() {
                    return Ok(Vec::new());
                }
                let scm = build_scm(q, arts, grouping).map_err(|e| e.to_string())?;
                let scores = score_all(&scm, oracle, policy).map_err(|e| e.to_string())?;
                Ok(scores.iter().map(|(id, s)| CilRecord::new(&q.id, id, s)).collect())
            })
            .collect()
    });
    let mut run = ScoringRun {
        scored: Vec::new(),
        records: Vec::new(),
        quarantined: Vec::new(),
    };
    for (q, outcome) in questions.iter().zip(outcomes) {
        match outcome {
            Ok(records) => {
                run.scored.push(q.id.clone());
                run.records.extend(records);
            }
            Err(reason) => {
                log::warn!("question {} quarantined: {reason}", q.id);
                run.quarantined.push((q.id.clone(), reason));
            }
        }
    }
    Ok(run)
}

/// A question joins L1 when at least `min_count` of its articles have
/// CIL at or above `tau`.
pub fn partition(
    scored: &[String],
    records: &[CilRecord],
    quarantined: &[String],
    cfg: &PartitionConfig,
) -> BenchmarkPartition {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for r in records {
        if r.value >= cfg.tau {
            *counts.entry(r.question_id.as_str()).or_default() += 1;
        }
    }
    let mut out = BenchmarkPartition {
        tau: cfg.tau,
        min_count: cfg.min_count,
        l1: Vec::new(),
        l2: Vec::new(),
        quarantined: quarantined.to_vec(),
    };
    let mut seen = BTreeSet::new();
    for id in scored {
        if !seen.insert(id.as_str()) {
            continue;
        }
        if counts.get(id.as_str()).copied().unwrap_or(0) >= cfg.min_count {
            out.l1.push(id.clone());
        } else {
            out.l2.push(id.clone());
        }
    }
    out
}

pub fn score_and_partition(
    questions: &[Question],
    articles: &[NewsArticle],
    grouping: &GroupingConfig,
    oracle: &dyn ProbabilityOracle,
    policy: &CilPolicy,
    cfg: &PartitionConfig,
    parallelism: usize,
) -> Result<(BenchmarkPartition, Vec<CilRecord>)> {
    let run = score_questions(questions, articles, grouping, oracle, policy, parallelism)?;
    let quarantined: Vec<String> = run.quarantined.iter().map(|(id, _)| id.clone()).collect();
    Ok((partition(&run.scored, &run.records, &quarantined, cfg), run.records))
}

/// Copies scores onto the matching articles; returns how many matched.
pub fn attach_scores(articles: &mut [NewsArticle], records: &[CilRecord]) -> usize {
    let index: BTreeMap<(&str, &str), &CilRecord> = records
        .iter()
        .map(|r| ((r.question_id.as_str(), r.article_id.as_str()), r))
        .collect();
    let mut n = 0;
    for a in articles.iter_mut() {
        if let Some(r) = index.get(&(a.question_id.as_str(), a.id.as_str())) {
            a.cil = Some(r.score());
            n += 1;
        }
    }
    n
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rec(q: &str, a: &str, v: f64) -> CilRecord {
        CilRecord {
            question_id: q.into(),
            article_id: a.into(),
            value: v,
            p_do1: 0.5 + v / 2.0,
            p_do0: 0.5 - v / 2.0,
            estimation_mode: EstimationMode::FullEnumeration,
            conditioning_set_size: 0,
            oracle_calls: 2,
        }
    }

    #[test]
    fn threshold_is_inclusive() {
        let scored = vec!["q".to_string()];
        let recs = vec![rec("q", "a", 0.1)];
        let p = partition(&scored, &recs, &[], &PartitionConfig { tau: 0.1, min_count: 1 });
        assert_eq!(p.l1, vec!["q"]);
    }

    #[test]
    fn zero_min_count_puts_everything_in_l1() {
        let scored = vec!["a".to_string(), "b".to_string()];
        let p = partition(&scored, &[], &[], &PartitionConfig { tau: 0.5, min_count: 0 });
        assert_eq!(p.l1.len(), 2);
        assert!(p.l2.is_empty());
    }

    proptest! {
        #[test]
        fn cover_and_monotone(
            values in proptest::collection::vec((0usize..5, -1.0f64..1.0), 0..60),
            tau in -1.0f64..1.0, dtau in 0.0f64..1.0,
            m in 0usize..6, dm in 0usize..3,
        ) {
            let scored: Vec<String> = (0..5).map(|i| format!("q{i}")).collect();
            let recs: Vec<CilRecord> = values.iter().enumerate()
                .map(|(i, (q, v))| rec(&format!("q{q}"), &format!("a{i}"), *v)).collect();
            let base = partition(&scored, &recs, &[], &PartitionConfig { tau, min_count: m });
            let mut all: Vec<String> = base.l1.iter().chain(&base.l2).cloned().collect();
            all.sort();
            prop_assert_eq!(&all, &scored);
            prop_assert!(base.l1.iter().all(|q| !base.l2.contains(q)));
            let raised = partition(&scored, &recs, &[], &PartitionConfig { tau: tau + dtau, min_count: m + dm });
            prop_assert!(raised.l1.iter().all(|q| base.l1.contains(q)));
        }
    }
}
