use std::collections::{BTreeMap, BTreeSet};
use std::io::BufRead;
use std::path::{Path, PathBuf};

use anyhow::Context;
use cilforge_core::eval::{evaluate, temporal_evaluate, write_temporal_csv};
use cilforge_core::pipeline::{
    attach_scores, build_question, partition, score_questions, BenchmarkPartition, CilRecord, QuerySet,
};
use cilforge_core::records::{articles_by_question, read_articles_checked, read_questions, write_json, write_jsonl};
use cilforge_core::{Error, NewsArticle, Question};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::backend::{self, Backend, Settings};
use crate::config::{config_error, RunConfig, Subset};

pub const CIL_SCORES: &str = "cil-scores.jsonl";
pub const QUARANTINE: &str = "quarantine.json";
pub const PARTITION: &str = "partition.json";
pub const RESULTS: &str = "results.json";
pub const TEMPORAL_JSON: &str = "results-temporal.json";
pub const TEMPORAL_CSV: &str = "results-temporal.csv";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QuarantineEntry {
    pub question_id: String,
    pub reason: String,
}

#[derive(Debug, Serialize)]
struct BuildRecord<'a> {
    question_id: &'a str,
    queries: &'a QuerySet,
    warnings: &'a [String],
}

/// Reads a JSON-lines file, reporting the line of the first bad record.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> anyhow::Result<Vec<T>> {
    let file = std::fs::File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    let mut out = Vec::new();
    for (idx, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(&line).map_err(|e| Error::AtLine {
            path: path.display().to_string(),
            line: idx + 1,
            source: Box::new(Error::Json(e)),
        })?;
        out.push(item);
    }
    Ok(out)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot open {}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| {
        Error::AtLine {
            path: path.display().to_string(),
            line: e.line(),
            source: Box::new(Error::Json(e)),
        }
        .into()
    })
}

/// An artifact an earlier command should have produced.
fn artifact(cfg: &RunConfig, name: &str, producer: &str) -> anyhow::Result<PathBuf> {
    let p = cfg.output(name);
    if !p.is_file() {
        return Err(config_error(format!(
            "{} not found; run `{producer}` first",
            p.display()
        )));
    }
    Ok(p)
}

fn same_file(a: &Path, b: &Path) -> bool {
    match (a.canonicalize(), b.canonicalize()) {
        (Ok(x), Ok(y)) => x == y,
        _ => false,
    }
}

fn refuse_overwrite(inputs: &[&Path], output: &Path) -> anyhow::Result<()> {
    if inputs.iter().any(|i| same_file(i, output)) {
        return Err(config_error(format!(
            "output {} would overwrite an input file",
            output.display()
        )));
    }
    Ok(())
}

fn load_inputs(cfg: &RunConfig) -> anyhow::Result<(Vec<Question>, Vec<NewsArticle>)> {
    let questions = read_questions(&cfg.questions_path()?)?;
    let articles = read_articles_checked(&cfg.articles_path()?, &questions)?;
    Ok((questions, articles))
}

pub fn ingest(cfg: &RunConfig) -> anyhow::Result<()> {
    let qpath = cfg.questions_path()?;
    let apath = cfg.articles_path()?;
    let questions = read_questions(&qpath)?;
    let mut articles = read_articles_checked(&apath, &questions)?;
    articles.sort_by(|a, b| {
        (&a.question_id, a.publish_date, &a.id).cmp(&(&b.question_id, b.publish_date, &b.id))
    });
    let out_q = cfg.output("questions.normalized.jsonl");
    let out_a = cfg.output("articles.normalized.jsonl");
    refuse_overwrite(&[&qpath, &apath], &out_q)?;
    refuse_overwrite(&[&qpath, &apath], &out_a)?;
    write_jsonl(&out_q, &questions)?;
    write_jsonl(&out_a, &articles)?;
    println!(
        "ingested {} questions and {} articles into {}",
        questions.len(),
        articles.len(),
        cfg.output_dir().display()
    );
    Ok(())
}

pub fn build(cfg: &RunConfig, s: &Settings) -> anyhow::Result<()> {
    let questions = read_questions(&cfg.questions_path()?)?;
    let backend = Backend::open(cfg, s)?;
    let llm = backend
        .llm()
        .ok_or_else(|| config_error("`build` needs [oracle] kind = \"llm\""))?;
    let search = backend::search(cfg)?;
    let mut articles = Vec::new();
    let mut built = Vec::new();
    let mut failed = Vec::new();
    for q in &questions {
        match build_question(q, llm, search.as_ref(), &cfg.build) {
            Ok(b) => {
                articles.extend(b.articles.iter().cloned());
                built.push((q.id.clone(), b));
            }
            Err(e) => {
                log::warn!("question {} skipped: {e}", q.id);
                failed.push(QuarantineEntry {
                    question_id: q.id.clone(),
                    reason: e.to_string(),
                });
            }
        }
    }
    let records: Vec<BuildRecord> = built
        .iter()
        .map(|(id, b)| BuildRecord {
            question_id: id,
            queries: &b.queries,
            warnings: &b.warnings,
        })
        .collect();
    write_jsonl(&cfg.output("articles.built.jsonl"), &articles)?;
    write_jsonl(&cfg.output("queries.jsonl"), &records)?;
    write_json(&cfg.output("build-failures.json"), &failed)?;
    println!(
        "built {} articles for {} questions ({} failed); {}",
        articles.len(),
        built.len(),
        failed.len(),
        backend.usage()
    );
    Ok(())
}

pub fn cil(cfg: &RunConfig, s: &Settings) -> anyhow::Result<()> {
    let grouping = cfg.grouping()?;
    let policy = cfg.cil_policy()?;
    let (questions, articles) = load_inputs(cfg)?;
    let backend = Backend::open(cfg, s)?;
    let run = score_questions(&questions, &articles, &grouping, backend.oracle(), &policy, s.parallelism)?;
    let quarantined: Vec<QuarantineEntry> = run
        .quarantined
        .iter()
        .map(|(id, reason)| QuarantineEntry {
            question_id: id.clone(),
            reason: reason.clone(),
        })
        .collect();
    write_jsonl(&cfg.output(CIL_SCORES), &run.records)?;
    write_json(&cfg.output(QUARANTINE), &quarantined)?;
    println!(
        "scored {} articles over {} questions ({} quarantined); {}",
        run.records.len(),
        run.scored.len(),
        quarantined.len(),
        backend.usage()
    );
    Ok(())
}

pub fn run_partition(cfg: &RunConfig) -> anyhow::Result<()> {
    let pcfg = cfg.partition()?;
    let questions = read_questions(&cfg.questions_path()?)?;
    let records: Vec<CilRecord> = read_jsonl(&artifact(cfg, CIL_SCORES, "cil")?)?;
    let quarantine_path = cfg.output(QUARANTINE);
    let quarantined: Vec<QuarantineEntry> = if quarantine_path.is_file() {
        read_json(&quarantine_path)?
    } else {
        Vec::new()
    };
    let out: BTreeSet<&str> = quarantined.iter().map(|q| q.question_id.as_str()).collect();
    let scored: Vec<String> = questions
        .iter()
        .filter(|q| !out.contains(q.id.as_str()))
        .map(|q| q.id.clone())
        .collect();
    let quarantined: Vec<String> = quarantined.into_iter().map(|q| q.question_id).collect();
    let p = partition(&scored, &records, &quarantined, &pcfg);
    write_json(&cfg.output(PARTITION), &p)?;
    println!(
        "tau {} min_count {}: L1 {} / L2 {} ({} quarantined)",
        p.tau,
        p.min_count,
        p.l1.len(),
        p.l2.len(),
        p.quarantined.len()
    );
    Ok(())
}

type Pools = BTreeMap<String, Vec<NewsArticle>>;

/// Questions of the configured subset and their article pools, with any
/// existing CIL scores attached.
fn evaluation_inputs(cfg: &RunConfig) -> anyhow::Result<(Vec<Question>, Pools)> {
    let (mut questions, mut articles) = load_inputs(cfg)?;
    let scores = cfg.output(CIL_SCORES);
    if scores.is_file() {
        let records: Vec<CilRecord> = read_jsonl(&scores)?;
        let matched = attach_scores(&mut articles, &records);
        log::info!("attached {matched} CIL scores from {}", scores.display());
    }
    if cfg.evaluate.subset != Subset::All {
        let p: BenchmarkPartition = read_json(&artifact(cfg, PARTITION, "partition")?)?;
        let keep: BTreeSet<String> = match cfg.evaluate.subset {
            Subset::L1 => p.l1.into_iter().collect(),
            _ => p.l2.into_iter().collect(),
        };
        questions.retain(|q| keep.contains(&q.id));
    }
    Ok((questions, articles_by_question(&articles)))
}

pub fn run_evaluate(cfg: &RunConfig, s: &Settings) -> anyhow::Result<()> {
    let retrieval = cfg.retrieval()?;
    let ecfg = cfg.evaluation()?;
    let embedder = backend::embedder(cfg)?;
    let (questions, pools) = evaluation_inputs(cfg)?;
    let backend = Backend::open(cfg, s)?;
    let forecaster = backend.forecaster(cfg);
    let result = evaluate(&questions, &pools, &retrieval, embedder.as_ref(), forecaster.as_ref(), &ecfg)?;
    write_json(&cfg.output(RESULTS), &result)?;
    println!(
        "{} n={} with {}: Brier {:.2} ± {:.2} over {} runs of {} questions; {}",
        result.retrieval.kind,
        result.retrieval.n,
        result.reasoning,
        result.brier_mean,
        result.brier_std,
        result.runs,
        result.questions,
        backend.usage()
    );
    Ok(())
}

pub fn run_temporal(cfg: &RunConfig, s: &Settings) -> anyhow::Result<()> {
    let retrieval = cfg.retrieval()?;
    let ecfg = cfg.evaluation()?;
    let cutoffs = cfg.cutoffs()?;
    let embedder = backend::embedder(cfg)?;
    let (questions, pools) = evaluation_inputs(cfg)?;
    let backend = Backend::open(cfg, s)?;
    let forecaster = backend.forecaster(cfg);
    let series = temporal_evaluate(
        &questions,
        &pools,
        &retrieval,
        embedder.as_ref(),
        forecaster.as_ref(),
        &ecfg,
        &cutoffs,
    )?;
    write_json(&cfg.output(TEMPORAL_JSON), &series)?;
    std::fs::create_dir_all(cfg.output_dir())?;
    write_temporal_csv(&cfg.output(TEMPORAL_CSV), &series)?;
    for p in &series {
        println!(
            "cutoff {:.2}: Brier {:.2} ± {:.2}, {} articles in pool",
            p.cutoff, p.result.brier_mean, p.result.brier_std, p.result.pool_articles
        );
    }
    println!("{}", backend.usage());
    Ok(())
}
