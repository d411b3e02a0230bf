//! Temporal structural causal model over one question's articles.
//!
//! Every article is a binary event variable placed in a chronological group.
//! A variable may only depend on variables from the `window` groups directly
//! before its own; variables in the same group never share an edge, and the
//! outcome `Y` follows all of them. Under those constraints the interventional
//! probability `P(Y = truth | do(X_i = x))` reduces to an adjustment over the
//! variables in `X_i`'s window:
//!
//! ```text
//! sum_a P(Y = truth | X_i = x, S = a) * P(S = a)
//! ```
//!
//! with `S` the window parents of `X_i`. Both factors are observational and
//! can be answered by a [`ProbabilityOracle`]. The causal intervened
//! likelihood of an article is the contrast between `do(X_i = 1)` and
//! `do(X_i = 0)`.
//!
//! [`table`] holds an explicit joint table with a brute-force truncated
//! factorization used to check this reduction.

pub mod table;

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::grouping::assign_groups;
use crate::oracle::{OracleError, ProbabilityOracle};
use crate::types::{GroupingConfig, NewsArticle, Question};

/// Largest conditioning set enumerated exhaustively (2^20 assignments).
pub const MAX_ENUMERATED_PARENTS: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct ScmVariable {
    pub article: NewsArticle,
    pub group: usize,
}

impl ScmVariable {
    pub fn id(&self) -> &str {
        &self.article.id
    }
}

/// Grouped, windowed causal structure for one question. Edges are never
/// materialized; admissible dependence follows from the group indices.
#[derive(Debug, Clone)]
pub struct TemporalScm {
    question: Question,
    variables: Vec<ScmVariable>,
    grouping: GroupingConfig,
    index: HashMap<String, usize>,
}

impl TemporalScm {
    pub fn question(&self) -> &Question {
        &self.question
    }

    /// Variables sorted by `(publish_date, id)`.
    pub fn variables(&self) -> &[ScmVariable] {
        &self.variables
    }

    pub fn window(&self) -> u32 {
        self.grouping.window
    }

    pub fn grouping(&self) -> &GroupingConfig {
        &self.grouping
    }

    pub fn variable(&self, id: &str) -> Result<&ScmVariable> {
        self.index
            .get(id)
            .map(|&i| &self.variables[i])
            .ok_or_else(|| Error::UnknownVariable(id.to_string()))
    }

    /// Position of a variable in date order; used to render event lists
    /// chronologically.
    pub fn position(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }
}

pub fn build_scm(
    question: &Question,
    articles: &[NewsArticle],
    cfg: &GroupingConfig,
) -> Result<TemporalScm> {
    if articles.is_empty() {
        return Err(Error::EmptyInput(format!(
            "question `{}` has no articles",
            question.id
        )));
    }
    for a in articles {
        if a.question_id != question.id {
            return Err(Error::Invariant(format!(
                "article `{}` belongs to `{}`, not `{}`",
                a.id, a.question_id, question.id
            )));
        }
        if a.publish_date >= question.resolved_date {
            return Err(Error::Invariant(format!(
                "article `{}` published {} is not before resolution {}",
                a.id, a.publish_date, question.resolved_date
            )));
        }
    }
    let groups = assign_groups(articles, cfg)?;
    let mut variables: Vec<ScmVariable> = articles
        .iter()
        .map(|a| ScmVariable {
            group: groups[&a.id],
            article: a.clone(),
        })
        .collect();
    variables.sort_by(|a, b| {
        (a.article.publish_date, &a.article.id).cmp(&(b.article.publish_date, &b.article.id))
    });
    let mut index = HashMap::with_capacity(variables.len());
    for (i, v) in variables.iter().enumerate() {
        if index.insert(v.article.id.clone(), i).is_some() {
            return Err(Error::Invariant(format!(
                "duplicate article id `{}`",
                v.article.id
            )));
        }
    }
    Ok(TemporalScm {
        question: question.clone(),
        variables,
        grouping: *cfg,
        index,
    })
}

/// Variables whose group lies in `[G(i) - w, G(i) - 1]`, in date order.
pub fn window_parents<'a>(scm: &'a TemporalScm, id: &str) -> Result<Vec<&'a ScmVariable>> {
    let target = scm.variable(id)?;
    let w = scm.window() as usize;
    let lo = target.group.saturating_sub(w);
    Ok(scm
        .variables
        .iter()
        .filter(|v| v.group < target.group && v.group >= lo)
        .collect())
}

/// How the conditioning set is chosen from the window parents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "policy")]
pub enum Selection {
    All,
    TopK { k: usize },
}

/// Keeps the window parents allowed by `selection`. Top-k ranks by
/// relevance rating (missing ratings rank last), then earlier date, then id;
/// the kept parents are returned in date order.
pub fn select_conditioning_set<'a>(
    parents: &[&'a ScmVariable],
    selection: Selection,
) -> Vec<&'a ScmVariable> {
    match selection {
        Selection::All => parents.to_vec(),
        Selection::TopK { k } => {
            let mut ranked = parents.to_vec();
            ranked.sort_by(|a, b| {
                let ra = a.article.relevance_rating.unwrap_or(0);
                let rb = b.article.relevance_rating.unwrap_or(0);
                rb.cmp(&ra)
                    .then(a.article.publish_date.cmp(&b.article.publish_date))
                    .then(a.article.id.cmp(&b.article.id))
            });
            ranked.truncate(k);
            ranked.sort_by(|a, b| {
                (a.article.publish_date, &a.article.id)
                    .cmp(&(b.article.publish_date, &b.article.id))
            });
            ranked
        }
    }
}

/// Values for a finite set of event variables.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Assignment(BTreeMap<String, bool>);

impl Assignment {
    pub fn new() -> Self {
        Self::default()
    }

    /// Assignment whose `k`-th variable takes bit `k` of `mask`.
    pub fn from_mask(ids: &[&str], mask: u64) -> Self {
        Self(
            ids.iter()
                .enumerate()
                .map(|(k, id)| (id.to_string(), mask >> k & 1 == 1))
                .collect(),
        )
    }

    pub fn with(mut self, id: &str, value: bool) -> Self {
        self.0.insert(id.to_string(), value);
        self
    }

    pub fn insert(&mut self, id: &str, value: bool) {
        self.0.insert(id.to_string(), value);
    }

    pub fn get(&self, id: &str) -> Option<bool> {
        self.0.get(id).copied()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, bool)> {
        self.0.iter().map(|(k, v)| (k.as_str(), *v))
    }
}

impl fmt::Display for Assignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (k, v)) in self.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{k}={}", u8::from(v))?;
        }
        f.write_str("}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimationMode {
    FullEnumeration,
    CappedTopK,
    MonteCarlo,
}

impl fmt::Display for EstimationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::FullEnumeration => "full-enumeration",
            Self::CappedTopK => "capped-top-k",
            Self::MonteCarlo => "monte-carlo",
        })
    }
}

/// How the adjustment sum is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode")]
pub enum CilPolicy {
    /// Every window parent, exhaustive sum.
    All,
    /// The `k` best-rated window parents, exhaustive sum.
    TopK { k: usize },
    /// Every window parent, `samples` assignments drawn in proportion to
    /// their joint probability.
    MonteCarlo { samples: usize, seed: u64 },
}

impl Default for CilPolicy {
    fn default() -> Self {
        Self::TopK { k: 3 }
    }
}

impl CilPolicy {
    pub fn selection(&self) -> Selection {
        match *self {
            Self::TopK { k } => Selection::TopK { k },
            Self::All | Self::MonteCarlo { .. } => Selection::All,
        }
    }

    pub fn mode(&self) -> EstimationMode {
        match self {
            Self::All => EstimationMode::FullEnumeration,
            Self::TopK { .. } => EstimationMode::CappedTopK,
            Self::MonteCarlo { .. } => EstimationMode::MonteCarlo,
        }
    }
}

/// Causal intervened likelihood of one article.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CilScore {
    pub value: f64,
    pub p_do1: f64,
    pub p_do0: f64,
    pub conditioning_set_size: usize,
    pub estimation_mode: EstimationMode,
    pub oracle_calls: usize,
}

/// Memoizing front for the oracle within one article's estimate. Joint
/// queries are shared between the two interventions.
struct QueryMemo<'o> {
    oracle: &'o dyn ProbabilityOracle,
    conditionals: HashMap<(bool, Assignment), f64>,
    joints: HashMap<Assignment, f64>,
    calls: usize,
}

impl<'o> QueryMemo<'o> {
    fn new(oracle: &'o dyn ProbabilityOracle) -> Self {
        Self {
            oracle,
            conditionals: HashMap::new(),
            joints: HashMap::new(),
            calls: 0,
        }
    }

    fn conditional(
        &mut self,
        scm: &TemporalScm,
        target: &str,
        x: bool,
        a: &Assignment,
    ) -> Result<f64, OracleError> {
        if let Some(p) = self.conditionals.get(&(x, a.clone())) {
            return Ok(*p);
        }
        self.calls += 1;
        let p = self
            .oracle
            .conditional(scm, target, x, a)
            .and_then(|ans| check_probability(ans.probability))
            .map_err(|e| e.for_query(format!("P(Y | {target}={}, {a})", u8::from(x))))?;
        self.conditionals.insert((x, a.clone()), p);
        Ok(p)
    }

    fn joint(&mut self, scm: &TemporalScm, a: &Assignment) -> Result<f64, OracleError> {
        if let Some(p) = self.joints.get(a) {
            return Ok(*p);
        }
        self.calls += 1;
        let p = self
            .oracle
            .joint(scm, a)
            .and_then(|ans| check_probability(ans.probability))
            .map_err(|e| e.for_query(format!("P({a})")))?;
        self.joints.insert(a.clone(), p);
        Ok(p)
    }
}

fn check_probability(p: f64) -> Result<f64, OracleError> {
    if p.is_finite() && (0.0..=1.0).contains(&p) {
        Ok(p)
    } else {
        Err(OracleError::Invalid(format!("oracle returned {p}")))
    }
}

/// Weighted support of the conditioning set: assignments with weights that
/// sum to one.
enum Support {
    Exact(Vec<(Assignment, f64)>),
    Sampled(Vec<Assignment>),
}

fn conditioning_ids<'a>(
    scm: &'a TemporalScm,
    target: &str,
    policy: &CilPolicy,
) -> Result<Vec<&'a str>> {
    let parents = window_parents(scm, target)?;
    let chosen = select_conditioning_set(&parents, policy.selection());
    Ok(chosen.into_iter().map(|v| v.id()).collect())
}

fn enumerate_support(
    scm: &TemporalScm,
    memo: &mut QueryMemo<'_>,
    ids: &[&str],
) -> Result<Vec<(Assignment, f64)>> {
    if ids.len() > MAX_ENUMERATED_PARENTS {
        return Err(Error::InvalidArgument(format!(
            "{} conditioning variables are too many to enumerate; use top-k or monte-carlo",
            ids.len()
        )));
    }
    let mut weighted = Vec::with_capacity(1 << ids.len());
    let mut total = 0.0;
    for mask in 0..(1u64 << ids.len()) {
        let a = Assignment::from_mask(ids, mask);
        let p = memo.joint(scm, &a)?;
        total += p;
        weighted.push((a, p));
    }
    if total <= 0.0 {
        return Err(OracleError::Invalid(format!(
            "joint estimates over {} assignments sum to zero",
            weighted.len()
        ))
        .into());
    }
    for (_, p) in &mut weighted {
        *p /= total;
    }
    Ok(weighted)
}

fn rng_for(seed: u64, scm: &TemporalScm, target: &str) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(scm.question.id.as_bytes());
    h.update([0]);
    h.update(target.as_bytes());
    let digest = h.finalize();
    let mut bytes = [0u8; 32];
    bytes.copy_from_slice(&digest);
    ChaCha8Rng::from_seed(bytes)
}

fn sample_support(
    scm: &TemporalScm,
    memo: &mut QueryMemo<'_>,
    ids: &[&str],
    target: &str,
    samples: usize,
    seed: u64,
) -> Result<Vec<Assignment>> {
    if samples == 0 {
        return Err(Error::InvalidArgument("monte-carlo needs at least one sample".into()));
    }
    let mut rng = rng_for(seed, scm, target);
    // Small sets: draw from the normalized enumerated support.
    if ids.len() < 64 && (1u64 << ids.len()) <= samples as u64 {
        let weighted = enumerate_support(scm, memo, ids)?;
        return Ok((0..samples)
            .map(|_| {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (a, p) in &weighted {
                    acc += p;
                    if u < acc {
                        return a.clone();
                    }
                }
                weighted.last().map(|(a, _)| a.clone()).unwrap_or_default()
            })
            .collect());
    }
    // Otherwise sample variable by variable through the chain rule, asking
    // the oracle for each prefix joint.
    let mut out = Vec::with_capacity(samples);
    for _ in 0..samples {
        let mut prefix = Assignment::new();
        for id in ids {
            let p1 = memo.joint(scm, &prefix.clone().with(id, true))?;
            let p0 = memo.joint(scm, &prefix.clone().with(id, false))?;
            if p1 + p0 <= 0.0 {
                return Err(OracleError::Invalid(format!(
                    "zero joint mass extending {prefix} with {id}"
                ))
                .into());
            }
            let u: f64 = rng.random();
            prefix.insert(id, u < p1 / (p1 + p0));
        }
        out.push(prefix);
    }
    Ok(out)
}

fn build_support(
    scm: &TemporalScm,
    memo: &mut QueryMemo<'_>,
    target: &str,
    policy: &CilPolicy,
) -> Result<(usize, Support)> {
    let ids = conditioning_ids(scm, target, policy)?;
    let support = match *policy {
        CilPolicy::MonteCarlo { samples, seed } => {
            Support::Sampled(sample_support(scm, memo, &ids, target, samples, seed)?)
        }
        _ if ids.is_empty() => Support::Exact(vec![(Assignment::new(), 1.0)]),
        _ => Support::Exact(enumerate_support(scm, memo, &ids)?),
    };
    Ok((ids.len(), support))
}

fn adjusted(
    scm: &TemporalScm,
    memo: &mut QueryMemo<'_>,
    target: &str,
    x: bool,
    support: &Support,
) -> Result<f64> {
    let p = match support {
        Support::Exact(weighted) => {
            let mut total = 0.0;
            for (a, w) in weighted {
                total += w * memo.conditional(scm, target, x, a)?;
            }
            total
        }
        Support::Sampled(samples) => {
            let mut total = 0.0;
            for a in samples {
                total += memo.conditional(scm, target, x, a)?;
            }
            total / samples.len() as f64
        }
    };
    Ok(p.clamp(0.0, 1.0))
}

/// `P(Y = truth | do(target = x))` through the window adjustment.
pub fn intervened_probability(
    scm: &TemporalScm,
    oracle: &dyn ProbabilityOracle,
    target: &str,
    x: bool,
    policy: &CilPolicy,
) -> Result<f64> {
    let mut memo = QueryMemo::new(oracle);
    let (_, support) = build_support(scm, &mut memo, target, policy)?;
    adjusted(scm, &mut memo, target, x, &support)
}

/// Causal intervened likelihood of `target`. Both interventions use the same
/// conditioning set and, under monte-carlo, the same sampled assignments.
pub fn cil(
    scm: &TemporalScm,
    oracle: &dyn ProbabilityOracle,
    target: &str,
    policy: &CilPolicy,
) -> Result<CilScore> {
    let mut memo = QueryMemo::new(oracle);
    let (size, support) = build_support(scm, &mut memo, target, policy)?;
    let p_do1 = adjusted(scm, &mut memo, target, true, &support)?;
    let p_do0 = adjusted(scm, &mut memo, target, false, &support)?;
    Ok(CilScore {
        value: p_do1 - p_do0,
        p_do1,
        p_do0,
        conditioning_set_size: size,
        estimation_mode: policy.mode(),
        oracle_calls: memo.calls,
    })
}

/// Scores every variable of the model, in date order.
pub fn score_all(
    scm: &TemporalScm,
    oracle: &dyn ProbabilityOracle,
    policy: &CilPolicy,
) -> Result<Vec<(String, CilScore)>> {
    scm.variables()
        .iter()
        .map(|v| Ok((v.id().to_string(), cil(scm, oracle, v.id(), policy)?)))
        .collect()
}

#[cfg(test)]
mod tests;
