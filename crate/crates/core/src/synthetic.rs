//! Seeded generators of questions, articles and joint tables whose causal
//! quantities are known, for verification, benchmarks and demos.

use std::collections::BTreeMap;

use chrono::{Duration, NaiveDate};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::oracle::TableOracle;
use crate::records::articles_by_question;
use crate::scm::table::{JointTable, TableNode};
use crate::{GroupingConfig, NewsArticle, Question, QuestionSource, Result};

pub fn anchor_date() -> NaiveDate {
    NaiveDate::from_ymd_opt(2024, 1, 1).expect("valid date")
}

pub fn synthetic_question(id: &str, resolved: NaiveDate, truth: u8) -> Question {
    Question {
        id: id.to_string(),
        title: format!("Will synthetic event {id} resolve yes?"),
        background: format!("Generated fixture question {id}."),
        resolution_criteria: "Resolves yes if the outcome variable is true.".into(),
        open_date: anchor_date(),
        resolved_date: resolved,
        ground_truth: truth,
        source: QuestionSource::Synthetic,
        metadata: BTreeMap::new(),
    }
}

pub fn synthetic_article(id: &str, question_id: &str, date: NaiveDate, summary: &str) -> NewsArticle {
    NewsArticle {
        id: id.to_string(),
        question_id: question_id.to_string(),
        publish_date: date,
        title: format!("Event {id}"),
        body: format!("Report on event {id}. {summary}"),
        url: None,
        summary: Some(summary.to_string()),
        relevance_rating: None,
        cil: None,
        metadata: BTreeMap::new(),
    }
}

/// `P(outcome = 1)` for every parent configuration of a node.
fn cpt_from(parents: usize, f: impl Fn(usize) -> f64) -> Vec<f64> {
    (0..1usize << parents).map(f).collect()
}

/// `P = base + Σ weights[k]·bit_k`.
pub fn linear_outcome(id: &str, parents: &[&str], base: f64, weights: &[f64]) -> TableNode {
    assert_eq!(parents.len(), weights.len());
    let p = cpt_from(parents.len(), |c| {
        base + weights
            .iter()
            .enumerate()
            .filter(|(k, _)| c >> k & 1 == 1)
            .map(|(_, w)| w)
            .sum::<f64>()
    });
    TableNode::new(id, None, parents, &p)
}

/// Outcome true exactly when every parent is.
pub fn and_outcome(id: &str, parents: &[&str]) -> TableNode {
    let all = (1usize << parents.len()) - 1;
    let p = cpt_from(parents.len(), |c| if c == all { 1.0 } else { 0.0 });
    TableNode::new(id, None, parents, &p)
}

/// Parameters of the random table family used to check the window
/// adjustment against brute-force intervention.
#[derive(Debug, Clone, PartialEq)]
pub struct TableFamily {
    /// Event variables per table, outcome excluded.
    pub max_events: usize,
    pub max_group: usize,
    pub grouping: GroupingConfig,
    pub edge_probability: f64,
    pub outcome_parent_probability: f64,
    /// Make the target a root that the outcome does not depend on.
    pub target_independent: bool,
    /// Range of every conditional probability entry.
    pub p_range: (f64, f64),
}

impl Default for TableFamily {
    fn default() -> Self {
        Self {
            max_events: 9,
            max_group: 6,
            grouping: GroupingConfig::default(),
            edge_probability: 0.5,
            outcome_parent_probability: 0.5,
            target_independent: false,
            p_range: (0.05, 0.95),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableCase {
    pub question: Question,
    pub articles: Vec<NewsArticle>,
    pub table: JointTable,
    pub target: String,
    /// Group of each event variable, in table order.
    pub groups: Vec<usize>,
}

/// A random table over up to `max_events` events: edges only from the
/// previous `window` groups, none within a group, and the outcome's parents
/// drawn from the target and the target's window.
pub fn random_table_case(rng: &mut impl Rng, family: &TableFamily, id: &str) -> Result<TableCase> {
    let span = i64::from(family.grouping.group_span_days);
    let w = family.grouping.window as usize;
    let n = rng.random_range(1..=family.max_events);
    let mut groups: Vec<usize> = (0..n).map(|_| rng.random_range(0..=family.max_group)).collect();
    groups.sort_unstable();
    let shift = groups[0];
    groups.iter_mut().for_each(|g| *g -= shift);
    let ids: Vec<String> = (0..n).map(|k| format!("{id}-x{k}")).collect();
    let target = rng.random_range(0..n);
    let (lo, hi) = family.p_range;
    let in_window = |child: usize, parent: usize| {
        groups[child] > groups[parent] && groups[child] - groups[parent] <= w
    };
    let mut nodes = Vec::with_capacity(n);
    for i in 0..n {
        let parents: Vec<&str> = if family.target_independent && i == target {
            Vec::new()
        } else {
            (0..i)
                .filter(|&j| in_window(i, j) && rng.random_bool(family.edge_probability))
                .map(|j| ids[j].as_str())
                .collect()
        };
        let p = cpt_from(parents.len(), |_| 0.0)
            .into_iter()
            .map(|_| rng.random_range(lo..=hi))
            .collect::<Vec<_>>();
        nodes.push(TableNode::new(&ids[i], Some(groups[i]), &parents, &p));
    }
    let mut y_parents: Vec<&str> = Vec::new();
    if !family.target_independent {
        y_parents.push(&ids[target]);
    }
    for (j, idj) in ids.iter().enumerate() {
        if in_window(target, j) && rng.random_bool(family.outcome_parent_probability) {
            y_parents.push(idj);
        }
    }
    let p = (0..1usize << y_parents.len())
        .map(|_| rng.random_range(lo..=hi))
        .collect::<Vec<_>>();
    let outcome = TableNode::new(&format!("{id}-Y"), None, &y_parents, &p);
    let table = JointTable::new(nodes, outcome)?;

    let anchor = anchor_date();
    let articles = (0..n)
        .map(|k| {
            let offset = if k == 0 { 0 } else { rng.random_range(0..span) };
            let date = anchor + Duration::days(groups[k] as i64 * span + offset);
            synthetic_article(&ids[k], id, date, &format!("event variable {k}"))
        })
        .collect();
    let last_group = *groups.last().expect("n >= 1") as i64;
    let resolved = anchor + Duration::days((last_group + 1) * span + 1);
    let truth = u8::from(rng.random_bool(0.5));
    Ok(TableCase {
        question: synthetic_question(id, resolved, truth),
        articles,
        table,
        target: ids[target].clone(),
        groups,
    })
}

/// Questions, their articles and the joint table behind each question.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticBenchmark {
    pub questions: Vec<Question>,
    pub articles: Vec<NewsArticle>,
    pub tables: Vec<(String, JointTable)>,
}

impl SyntheticBenchmark {
    pub fn oracle(&self) -> Result<TableOracle> {
        TableOracle::new(self.tables.iter().cloned())
    }

    pub fn pools(&self) -> BTreeMap<String, Vec<NewsArticle>> {
        articles_by_question(&self.articles)
    }

    pub fn tables_map(&self) -> BTreeMap<String, JointTable> {
        self.tables.iter().cloned().collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FixtureOutcome {
    /// Outcome is the conjunction of `supporters` independent roots, each
    /// with CIL `cil` for a yes answer.
    And { supporters: usize, cil: f64 },
    /// Outcome is linear in `supporters` independent roots with slope
    /// `weight` each.
    Linear { supporters: usize, weight: f64 },
    /// Outcome depends on no article.
    Independent,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixtureQuestion {
    pub id: &'static str,
    pub truth: u8,
    pub outcome: FixtureOutcome,
    pub articles: usize,
}

/// Questions with known CILs for partition checks.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionFixture {
    pub benchmark: SyntheticBenchmark,
    /// Designed CIL per (question id, article id).
    pub expected_cil: BTreeMap<(String, String), f64>,
    /// L1 at tau = 0.1, min count = 5.
    pub expected_l1: Vec<String>,
    pub expected_l2: Vec<String>,
}

pub fn partition_fixture_design() -> Vec<FixtureQuestion> {
    use FixtureOutcome::*;
    vec![
        FixtureQuestion { id: "and6", truth: 1, outcome: And { supporters: 6, cil: 0.7 }, articles: 10 },
        FixtureQuestion { id: "indep", truth: 1, outcome: Independent, articles: 10 },
        FixtureQuestion { id: "and4", truth: 1, outcome: And { supporters: 4, cil: 0.7 }, articles: 10 },
        FixtureQuestion { id: "and5-weak", truth: 1, outcome: And { supporters: 5, cil: 0.05 }, articles: 10 },
        FixtureQuestion { id: "and5", truth: 1, outcome: And { supporters: 5, cil: 0.3 }, articles: 8 },
        FixtureQuestion { id: "and6-no", truth: 0, outcome: And { supporters: 6, cil: 0.7 }, articles: 10 },
        FixtureQuestion { id: "linear6", truth: 1, outcome: Linear { supporters: 6, weight: 0.12 }, articles: 9 },
        FixtureQuestion { id: "linear7-no", truth: 0, outcome: Linear { supporters: 7, weight: -0.11 }, articles: 10 },
        FixtureQuestion { id: "linear5-mild", truth: 1, outcome: Linear { supporters: 5, weight: 0.15 }, articles: 6 },
    ]
}

const SPACING_DAYS: i64 = 7;

/// Builds [`partition_fixture_design`]. Articles are a week apart, so
/// windows hold earlier events, but every event is an independent root and
/// the designed CIL is exact under any conditioning set.
pub fn partition_fixture() -> Result<PartitionFixture> {
    let mut bench = SyntheticBenchmark {
        questions: Vec::new(),
        articles: Vec::new(),
        tables: Vec::new(),
    };
    let mut expected_cil = BTreeMap::new();
    let mut expected_l1 = Vec::new();
    let mut expected_l2 = Vec::new();
    for design in partition_fixture_design() {
        let ids: Vec<String> = (0..design.articles).map(|k| format!("{}-a{k}", design.id)).collect();
        let (supporters, p_support, per_article): (usize, f64, f64) = match design.outcome {
            FixtureOutcome::And { supporters, cil } => {
                let p = if supporters > 1 {
                    cil.powf(1.0 / (supporters - 1) as f64)
                } else {
                    0.5
                };
                (supporters, p, cil)
            }
            FixtureOutcome::Linear { supporters, weight } => (supporters, 0.5, weight),
            FixtureOutcome::Independent => (0, 0.5, 0.0),
        };
        assert!(supporters <= design.articles);
        let mut nodes = Vec::new();
        for (k, id) in ids.iter().enumerate() {
            let group = (k as i64 * SPACING_DAYS / 10) as usize;
            let p = if k < supporters { p_support } else { 0.5 };
            nodes.push(TableNode::root(id, group, p));
        }
        let parents: Vec<&str> = ids[..supporters].iter().map(String::as_str).collect();
        let y_id = format!("{}-Y", design.id);
        let outcome = match design.outcome {
            FixtureOutcome::And { .. } => and_outcome(&y_id, &parents),
            FixtureOutcome::Linear { weight, .. } => {
                let base = if weight >= 0.0 { 0.2 } else { 0.8 };
                linear_outcome(&y_id, &parents, base, &vec![weight; supporters])
            }
            FixtureOutcome::Independent => TableNode::new(&y_id, None, &[], &[0.5]),
        };
        bench.tables.push((design.id.to_string(), JointTable::new(nodes, outcome)?));
        let sign = if design.truth == 1 { 1.0 } else { -1.0 };
        let mut count = 0;
        for (k, id) in ids.iter().enumerate() {
            let cil = if k < supporters { sign * per_article } else { 0.0 };
            if cil >= 0.1 {
                count += 1;
            }
            expected_cil.insert((design.id.to_string(), id.clone()), cil);
            let date = anchor_date() + Duration::days(k as i64 * SPACING_DAYS);
            bench
                .articles
                .push(synthetic_article(id, design.id, date, &format!("fixture event {k} of {}", design.id)));
        }
        if count >= 5 {
            expected_l1.push(design.id.to_string());
        } else {
            expected_l2.push(design.id.to_string());
        }
        let resolved = anchor_date() + Duration::days(design.articles as i64 * SPACING_DAYS + 5);
        bench.questions.push(synthetic_question(design.id, resolved, design.truth));
    }
    Ok(PartitionFixture {
        benchmark: bench,
        expected_cil,
        expected_l1,
        expected_l2,
    })
}

const VOCABULARY: &[&str] = &[
    "election", "senate", "vote", "court", "ruling", "budget", "tariff", "trade", "summit", "treaty",
    "merger", "launch", "vaccine", "trial", "approval", "strike", "union", "rate", "inflation", "bank",
    "storm", "drought", "harvest", "export", "satellite", "orbit", "league", "final", "transfer", "coach",
    "protest", "reform", "pipeline", "refinery", "chip", "factory", "border", "census", "festival", "award",
];

fn word_salad(rng: &mut impl Rng, words: usize) -> String {
    (0..words)
        .map(|_| *VOCABULARY.choose(rng).expect("non-empty vocabulary"))
        .collect::<Vec<_>>()
        .join(" ")
}

#[derive(Debug, Clone, PartialEq)]
pub struct DirectionalConfig {
    pub questions: usize,
    pub articles_per_question: usize,
    /// Articles per question that the outcome depends on.
    pub influential: usize,
    /// Range of the absolute outcome slope per influential article.
    pub weight_range: (f64, f64),
    pub seed: u64,
}

impl Default for DirectionalConfig {
    fn default() -> Self {
        Self {
            questions: 20,
            articles_per_question: 12,
            influential: 6,
            weight_range: (0.03, 0.07),
            seed: 2024,
        }
    }
}

/// Questions whose outcome is linear in a random subset of independent
/// article events with random signs, marginal yes-probability one half, and
/// summaries whose word overlap with the question text is unrelated to
/// the outcome.
pub fn directional_benchmark(cfg: &DirectionalConfig) -> Result<SyntheticBenchmark> {
    assert!(cfg.influential <= cfg.articles_per_question);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut bench = SyntheticBenchmark {
        questions: Vec::new(),
        articles: Vec::new(),
        tables: Vec::new(),
    };
    for qi in 0..cfg.questions {
        let qid = format!("dir{qi:02}");
        let ids: Vec<String> = (0..cfg.articles_per_question).map(|k| format!("{qid}-a{k:02}")).collect();
        let mut order: Vec<usize> = (0..ids.len()).collect();
        order.shuffle(&mut rng);
        let influential = &order[..cfg.influential];
        let mut nodes = Vec::new();
        let mut dates = Vec::new();
        let mut ps = Vec::new();
        for (k, id) in ids.iter().enumerate() {
            let day = if k == 0 { 0 } else { rng.random_range(0..90) };
            dates.push(anchor_date() + Duration::days(day));
            let p = rng.random_range(0.3..0.7);
            ps.push(p);
            nodes.push(TableNode::root(id, (day / 10) as usize, p));
        }
        let mut parents = Vec::new();
        let mut weights = Vec::new();
        for &k in influential {
            let (lo, hi) = cfg.weight_range;
            let magnitude = rng.random_range(lo..hi);
            let w = if rng.random_bool(0.5) { magnitude } else { -magnitude };
            parents.push(ids[k].as_str());
            weights.push(w);
        }
        let base = 0.5 - influential.iter().zip(&weights).map(|(&k, w)| w * ps[k]).sum::<f64>();
        let outcome = linear_outcome(&format!("{qid}-Y"), &parents, base, &weights);
        let table = JointTable::new(nodes, outcome)?;
        bench.tables.push((qid.clone(), table));
        let truth = u8::from(rng.random_bool(0.5));
        let mut q = synthetic_question(&qid, anchor_date() + Duration::days(100), truth);
        q.title = format!("Will {}?", word_salad(&mut rng, 6));
        q.background = word_salad(&mut rng, 10);
        bench.questions.push(q);
        for (k, id) in ids.iter().enumerate() {
            let summary = word_salad(&mut rng, 10);
            let mut a = synthetic_article(id, &qid, dates[k], &summary);
            a.relevance_rating = Some(rng.random_range(1..=6));
            bench.articles.push(a);
        }
    }
    Ok(bench)
}
