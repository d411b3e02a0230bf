use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::embed::Embedder;
use super::reason::Forecaster;
use super::retrieve::{retrieve, RetrievalStrategy};
use crate::grouping::forecast_progress;
use crate::metrics::{brier_score, mean_std};
use crate::{Error, EvaluationConfig, NewsArticle, Question, Result};

pub const NO_ARTICLES_FLAG: &str = "no-articles";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionOutcome {
    pub run: u32,
    pub question_id: String,
    pub prediction: f64,
    pub truth: u8,
    pub retrieved: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationResult {
    pub retrieval: RetrievalStrategy,
    pub reasoning: String,
    pub runs: u32,
    pub questions: usize,
    /// Brier per run, scaled by 100.
    pub run_briers: Vec<f64>,
    pub brier_mean: f64,
    /// Population standard deviation across runs, scaled by 100.
    pub brier_std: f64,
    /// Mean raw CIL over retrieved articles; absent when none are scored.
    pub mean_retrieved_cil: Option<f64>,
    /// Articles available to retrieval, summed over questions.
    pub pool_articles: usize,
    /// Questions with at least one flag in any run.
    pub flagged_count: usize,
    pub per_question: Vec<QuestionOutcome>,
}

/// Runs are sequential; questions within a run are predicted concurrently
/// and merged in input order.
pub fn evaluate(
    questions: &[Question],
    pools: &BTreeMap<String, Vec<NewsArticle>>,
    retrieval: &RetrievalStrategy,
    embedder: &dyn Embedder,
    forecaster: &dyn Forecaster,
    cfg: &EvaluationConfig,
) -> Result<EvaluationResult> {
    cfg.validate()?;
    retrieval.validate()?;
    if questions.is_empty() {
        return Err(Error::EmptyInput("no questions to evaluate".into()));
    }
    let empty = Vec::new();
    let retrieved: Vec<Vec<&NewsArticle>> = questions
        .iter()
        .map(|q| retrieve(q, pools.get(&q.id).unwrap_or(&empty), retrieval, embedder))
        .collect::<Result<_>>()?;
    let runs = u32::try_from(cfg.runs).map_err(|_| Error::InvalidArgument("too many runs".into()))?;
    let truths: Vec<u8> = questions.iter().map(|q| q.ground_truth).collect();
    let mut per_question = Vec::with_capacity(questions.len() * cfg.runs);
    let mut run_briers = Vec::with_capacity(cfg.runs);
    for run in 0..runs {
        let outcomes: Vec<QuestionOutcome> = questions
            .par_iter()
            .zip(retrieved.par_iter())
            .map(|(q, docs)| {
                let pred = forecaster.predict(q, docs, run)?;
                let mut flags: Vec<String> = pred.flag.into_iter().collect();
                if pools.get(&q.id).is_none_or(Vec::is_empty) {
                    flags.push(NO_ARTICLES_FLAG.into());
                }
                Ok(QuestionOutcome {
                    run,
                    question_id: q.id.clone(),
                    prediction: pred.probability,
                    truth: q.ground_truth,
                    retrieved: docs.iter().map(|a| a.id.clone()).collect(),
                    flags,
                })
            })
            .collect::<Result<_>>()?;
        let preds: Vec<f64> = outcomes.iter().map(|o| o.prediction).collect();
        run_briers.push(100.0 * brier_score(&preds, &truths)?);
        per_question.extend(outcomes);
    }
    let (brier_mean, brier_std) = mean_std(&run_briers);
    let scored: Vec<f64> = retrieved.iter().flatten().filter_map(|a| a.cil_value()).collect();
    let mean_retrieved_cil = if scored.is_empty() {
        None
    } else {
        Some(scored.iter().sum::<f64>() / scored.len() as f64)
    };
    let mut flagged: Vec<&str> = per_question
        .iter()
        .filter(|o| !o.flags.is_empty())
        .map(|o| o.question_id.as_str())
        .collect();
    flagged.sort_unstable();
    flagged.dedup();
    Ok(EvaluationResult {
        retrieval: *retrieval,
        reasoning: forecaster.label(),
        runs,
        questions: questions.len(),
        run_briers,
        brier_mean,
        brier_std,
        mean_retrieved_cil,
        pool_articles: questions
            .iter()
            .map(|q| pools.get(&q.id).map_or(0, Vec::len))
            .sum(),
        flagged_count: flagged.len(),
        per_question,
    })
}

/// Keeps each question's articles whose forecast progress, measured from
/// that question's earliest article, is at most `cutoff`.
pub fn restrict_pools(
    questions: &[Question],
    pools: &BTreeMap<String, Vec<NewsArticle>>,
    cutoff: f64,
) -> Result<BTreeMap<String, Vec<NewsArticle>>> {
    let mut out = BTreeMap::new();
    for q in questions {
        let Some(arts) = pools.get(&q.id) else { continue };
        let Some(earliest) = arts.iter().map(|a| a.publish_date).min() else {
            out.insert(q.id.clone(), Vec::new());
            continue;
        };
        let mut kept = Vec::new();
        for a in arts {
            if forecast_progress(a.publish_date, q, earliest)? <= cutoff {
                kept.push(a.clone());
            }
        }
        out.insert(q.id.clone(), kept);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemporalPoint {
    pub cutoff: f64,
    pub result: EvaluationResult,
}

pub fn temporal_evaluate(
    questions: &[Question],
    pools: &BTreeMap<String, Vec<NewsArticle>>,
    retrieval: &RetrievalStrategy,
    embedder: &dyn Embedder,
    forecaster: &dyn Forecaster,
    cfg: &EvaluationConfig,
    cutoffs: &[f64],
) -> Result<Vec<TemporalPoint>> {
    if cutoffs.is_empty() {
        return Err(Error::EmptyInput("no cutoffs".into()));
    }
    if let Some(bad) = cutoffs.iter().find(|t| !(**t > 0.0 && **t <= 1.0)) {
        return Err(Error::Range(format!("cutoff {bad} is outside (0, 1]")));
    }
    cutoffs
        .iter()
        .map(|&cutoff| {
            let restricted = restrict_pools(questions, pools, cutoff)?;
            let result = evaluate(questions, &restricted, retrieval, embedder, forecaster, cfg)?;
            Ok(TemporalPoint { cutoff, result })
        })
        .collect()
}

#[derive(Serialize)]
struct CsvRow {
    cutoff: f64,
    brier_mean: f64,
    brier_std: f64,
    mean_retrieved_cil: Option<f64>,
    flagged_count: usize,
}

pub fn write_temporal_csv(path: &Path, series: &[TemporalPoint]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let tmp = tempfile::NamedTempFile::new_in(dir)?;
    {
        let mut w = csv::Writer::from_writer(tmp.as_file());
        for p in series {
            w.serialize(CsvRow {
                cutoff: p.cutoff,
                brier_mean: p.result.brier_mean,
                brier_std: p.result.brier_std,
                mean_retrieved_cil: p.result.mean_retrieved_cil,
                flagged_count: p.result.flagged_count,
            })?;
        }
        w.flush()?;
    }
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::embed::HashedBagOfTokens;
    use crate::eval::reason::Prediction;
    use crate::eval::retrieve::RetrievalKind;
    use crate::testutil::{article, question};
    use chrono::NaiveDate;

    fn d(m: u32, day: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(2024, m, day).unwrap()
    }

    struct Fixed(Box<dyn Fn(&Question, u32) -> f64 + Send + Sync>);

    impl Forecaster for Fixed {
        fn label(&self) -> String {
            "fixed".into()
        }
        fn predict(&self, q: &Question, _: &[&NewsArticle], run: u32) -> Result<Prediction> {
            Ok(Prediction {
                probability: (self.0)(q, run),
                flag: None,
            })
        }
    }

    fn bench() -> (Vec<Question>, BTreeMap<String, Vec<NewsArticle>>) {
        let qs = vec![question("a", d(3, 1), 1), question("b", d(3, 1), 0)];
        let mut pools = BTreeMap::new();
        for q in &qs {
            let arts: Vec<_> = (0..4)
                .map(|i| {
                    let mut a = article(&format!("{}{i}", q.id), d(1, 1 + 10 * i));
                    a.question_id = q.id.clone();
                    a
                })
                .collect();
            pools.insert(q.id.clone(), arts);
        }
        (qs, pools)
    }

    fn naive() -> RetrievalStrategy {
        RetrievalStrategy::new(RetrievalKind::NaiveEmbedding, 2).unwrap()
    }

    #[test]
    fn truth_predictor_scores_zero() {
        let (qs, pools) = bench();
        let f = Fixed(Box::new(|q, _| f64::from(q.ground_truth)));
        let r = evaluate(&qs, &pools, &naive(), &HashedBagOfTokens::default(), &f, &EvaluationConfig::default()).unwrap();
        assert_eq!((r.brier_mean, r.brier_std), (0.0, 0.0));
        assert_eq!(r.per_question.len(), 4);
        assert!(r.per_question.iter().all(|o| o.retrieved.len() == 2));
    }

    #[test]
    fn constant_half_is_25() {
        let (qs, pools) = bench();
        let f = Fixed(Box::new(|_, _| 0.5));
        let r = evaluate(&qs, &pools, &naive(), &HashedBagOfTokens::default(), &f, &EvaluationConfig::default()).unwrap();
        assert_eq!(r.brier_mean, 25.0);
    }

    #[test]
    fn std_across_runs_is_population() {
        let (qs, pools) = bench();
        // run 0 perfect, run 1 constant half: briers 0 and 25
        let f = Fixed(Box::new(|q, run| if run == 0 { f64::from(q.ground_truth) } else { 0.5 }));
        let r = evaluate(&qs, &pools, &naive(), &HashedBagOfTokens::default(), &f, &EvaluationConfig::default()).unwrap();
        assert_eq!(r.brier_mean, 12.5);
        assert_eq!(r.brier_std, 12.5);
    }

    #[test]
    fn full_cutoff_matches_plain() {
        let (qs, pools) = bench();
        let f = Fixed(Box::new(|_, _| 0.3));
        let e = HashedBagOfTokens::default();
        let cfg = EvaluationConfig::default();
        let plain = evaluate(&qs, &pools, &naive(), &e, &f, &cfg).unwrap();
        let series = temporal_evaluate(&qs, &pools, &naive(), &e, &f, &cfg, &[0.2, 0.5, 1.0]).unwrap();
        assert_eq!(series[2].result, plain);
        let counts: Vec<usize> = series.iter().map(|p| p.result.pool_articles).collect();
        assert!(counts.windows(2).all(|w| w[0] <= w[1]), "{counts:?}");
        assert!(temporal_evaluate(&qs, &pools, &naive(), &e, &f, &cfg, &[0.0]).is_err());
    }

    #[test]
    fn empty_pool_flagged() {
        let (qs, mut pools) = bench();
        pools.insert("a".into(), Vec::new());
        let f = Fixed(Box::new(|_, _| 0.5));
        let r = evaluate(&qs, &pools, &naive(), &HashedBagOfTokens::default(), &f, &EvaluationConfig::default()).unwrap();
        assert_eq!(r.flagged_count, 1);
        assert!(r.per_question.iter().filter(|o| o.question_id == "a").all(|o| o.flags == vec![NO_ARTICLES_FLAG]));
    }

    #[test]
    fn csv_series_columns() {
        let (qs, pools) = bench();
        let f = Fixed(Box::new(|_, _| 0.5));
        let series = temporal_evaluate(&qs, &pools, &naive(), &HashedBagOfTokens::default(), &f, &EvaluationConfig::default(), &[0.5, 1.0]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        write_temporal_csv(&path, &series).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "cutoff,brier_mean,brier_std,mean_retrieved_cil,flagged_count");
        assert_eq!(lines.count(), 2);
    }
}
