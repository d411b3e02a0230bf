use std::collections::BTreeMap;
use std::fmt::Write as _;

use anyhow::Context;
use cilforge_core::eval::{EvaluationResult, TemporalPoint};
use cilforge_core::pipeline::{BenchmarkPartition, CilRecord};
use serde::Serialize;

use crate::commands::{read_json, read_jsonl, CIL_SCORES, PARTITION, RESULTS, TEMPORAL_JSON};
use crate::config::{config_error, RunConfig};

pub const REPORT_TXT: &str = "report.txt";
pub const HISTOGRAM_CSV: &str = "report-cil-histogram.csv";
pub const QUESTIONS_CSV: &str = "report-questions.csv";

const BINS: usize = 20;

#[derive(Serialize)]
struct HistogramRow {
    lower: f64,
    upper: f64,
    count: usize,
}

#[derive(Serialize)]
struct QuestionRow<'a> {
    question_id: &'a str,
    articles: usize,
    at_or_above_tau: usize,
    mean_cil: f64,
    max_cil: f64,
    side: &'a str,
}

/// Bins CIL values over [-1, 1]; the top bin is closed.
fn histogram(values: &[f64]) -> Vec<HistogramRow> {
    let width = 2.0 / BINS as f64;
    let mut counts = [0usize; BINS];
    for v in values {
        let idx = (((v + 1.0) / width).floor() as isize).clamp(0, BINS as isize - 1);
        counts[idx as usize] += 1;
    }
    counts
        .iter()
        .enumerate()
        .map(|(i, &count)| HistogramRow {
            lower: -1.0 + i as f64 * width,
            upper: -1.0 + (i + 1) as f64 * width,
            count,
        })
        .collect()
}

fn write_csv<T: Serialize>(path: &std::path::Path, rows: &[T]) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("cannot write {}", path.display()))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn optional<T>(cfg: &RunConfig, name: &str, read: impl Fn(&std::path::Path) -> anyhow::Result<T>) -> anyhow::Result<Option<T>> {
    let p = cfg.output(name);
    if p.is_file() {
        read(&p).map(Some)
    } else {
        Ok(None)
    }
}

pub fn run_report(cfg: &RunConfig) -> anyhow::Result<()> {
    let records: Option<Vec<CilRecord>> = optional(cfg, CIL_SCORES, read_jsonl)?;
    let part: Option<BenchmarkPartition> = optional(cfg, PARTITION, read_json)?;
    let results: Option<EvaluationResult> = optional(cfg, RESULTS, read_json)?;
    let temporal: Option<Vec<TemporalPoint>> = optional(cfg, TEMPORAL_JSON, read_json)?;
    if records.is_none() && part.is_none() && results.is_none() && temporal.is_none() {
        return Err(config_error(format!(
            "nothing to report in {}; run `cil`, `partition`, `evaluate` or `temporal` first",
            cfg.output_dir().display()
        )));
    }
    let tau = part.as_ref().map_or(cfg.partition.tau, |p| p.tau);
    let mut text = String::new();
    writeln!(text, "{:<22} {}", "report", cfg.output_dir().display())?;

    if let Some(records) = &records {
        let values: Vec<f64> = records.iter().map(|r| r.value).collect();
        let mean = values.iter().sum::<f64>() / values.len().max(1) as f64;
        let above = values.iter().filter(|v| **v >= tau).count();
        let mut by_q: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
        for r in records {
            by_q.entry(r.question_id.as_str()).or_default().push(r.value);
        }
        writeln!(text, "{:<22} {} articles, {} questions", "cil scores", records.len(), by_q.len())?;
        writeln!(text, "{:<22} {:.4}", "mean cil", mean)?;
        writeln!(text, "{:<22} {} (tau {})", "cil >= tau", above, tau)?;
        let side = |id: &str| match &part {
            Some(p) if p.l1.iter().any(|x| x == id) => "L1",
            Some(p) if p.l2.iter().any(|x| x == id) => "L2",
            Some(p) if p.quarantined.iter().any(|x| x == id) => "quarantined",
            _ => "",
        };
        let rows: Vec<QuestionRow> = by_q
            .iter()
            .map(|(id, v)| QuestionRow {
                question_id: id,
                articles: v.len(),
                at_or_above_tau: v.iter().filter(|x| **x >= tau).count(),
                mean_cil: v.iter().sum::<f64>() / v.len() as f64,
                max_cil: v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                side: side(id),
            })
            .collect();
        write_csv(&cfg.output(HISTOGRAM_CSV), &histogram(&values))?;
        write_csv(&cfg.output(QUESTIONS_CSV), &rows)?;
    }
    if let Some(p) = &part {
        writeln!(
            text,
            "{:<22} L1 {} / L2 {} / quarantined {} (tau {}, min_count {})",
            "partition",
            p.l1.len(),
            p.l2.len(),
            p.quarantined.len(),
            p.tau,
            p.min_count
        )?;
    }
    if let Some(r) = &results {
        writeln!(
            text,
            "{:<22} {} n={} / {} / {} runs / {} questions",
            "evaluation", r.retrieval.kind, r.retrieval.n, r.reasoning, r.runs, r.questions
        )?;
        writeln!(text, "{:<22} {:.2} ± {:.2}", "brier (x100)", r.brier_mean, r.brier_std)?;
        match r.mean_retrieved_cil {
            Some(c) => writeln!(text, "{:<22} {:.4}", "mean retrieved cil", c)?,
            None => writeln!(text, "{:<22} n/a", "mean retrieved cil")?,
        }
        writeln!(text, "{:<22} {}", "flagged questions", r.flagged_count)?;
    }
    if let Some(series) = &temporal {
        writeln!(text, "{:<10}{:>12}{:>12}{:>12}{:>10}", "cutoff", "brier", "std", "pool", "flagged")?;
        for p in series {
            writeln!(
                text,
                "{:<10.2}{:>12.2}{:>12.2}{:>12}{:>10}",
                p.cutoff, p.result.brier_mean, p.result.brier_std, p.result.pool_articles, p.result.flagged_count
            )?;
        }
    }
    std::fs::write(cfg.output(REPORT_TXT), &text)?;
    print!("{text}");
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn histogram_edges() {
        let h = histogram(&[-1.0, -0.95, 0.0, 0.7, 1.0]);
        assert_eq!(h.len(), BINS);
        assert_eq!(h[0].count, 2);
        assert_eq!(h[10].count, 1);
        assert_eq!(h[BINS - 1].count, 1);
        assert_eq!(h.iter().map(|r| r.count).sum::<usize>(), 5);
    }
}
