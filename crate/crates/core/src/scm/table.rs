//! Explicit Bayesian-network tables over binary event variables plus the
//! outcome, and exact interventional inference by enumeration.
//!
//! The table is the ground truth for checking the window adjustment: an
//! intervention `do(X = x)` drops `X`'s conditional factor, clamps its value
//! and sums the remaining product of factors over every other variable.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Most non-outcome variables a table may hold (2^17 joint states).
pub const MAX_TABLE_VARIABLES: usize = 16;

const ROW_TOLERANCE: f64 = 1e-12;

/// One node and its conditional probability table. Row `c` holds
/// `[P(node = 0 | c), P(node = 1 | c)]`, where bit `k` of `c` is the value of
/// `parents[k]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableNode {
    pub id: String,
    /// Temporal group; absent for the outcome.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<usize>,
    #[serde(default)]
    pub parents: Vec<String>,
    pub cpt: Vec<[f64; 2]>,
}

impl TableNode {
    /// A node given `P(node = 1 | c)` for every parent configuration `c`.
    pub fn new(id: &str, group: Option<usize>, parents: &[&str], p_true: &[f64]) -> Self {
        Self {
            id: id.to_string(),
            group,
            parents: parents.iter().map(|p| p.to_string()).collect(),
            cpt: p_true.iter().map(|&p| [1.0 - p, p]).collect(),
        }
    }

    pub fn root(id: &str, group: usize, p_true: f64) -> Self {
        Self::new(id, Some(group), &[], &[p_true])
    }
}

/// Nodes in topological order; the outcome is the last node and no node
/// depends on it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointTable {
    pub outcome: String,
    pub nodes: Vec<TableNode>,
}

impl JointTable {
    pub fn new(nodes: Vec<TableNode>, outcome: TableNode) -> Result<Self> {
        let mut nodes = nodes;
        let outcome_id = outcome.id.clone();
        nodes.push(outcome);
        let table = Self {
            outcome: outcome_id,
            nodes,
        };
        table.validate()?;
        Ok(table)
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.id == id)
    }

    pub fn outcome_index(&self) -> usize {
        self.nodes.len() - 1
    }

    /// Ids of the non-outcome variables.
    pub fn variable_ids(&self) -> impl Iterator<Item = &str> {
        self.nodes[..self.nodes.len().saturating_sub(1)]
            .iter()
            .map(|n| n.id.as_str())
    }

    /// Structural checks: unique ids, parents declared before children,
    /// CPT shape, rows that are distributions, outcome last with no children.
    pub fn validate(&self) -> Result<()> {
        let Some(last) = self.nodes.last() else {
            return Err(Error::Table("table has no nodes".into()));
        };
        if last.id != self.outcome {
            return Err(Error::Table(format!(
                "outcome `{}` must be the last node",
                self.outcome
            )));
        }
        if self.nodes.len() - 1 > MAX_TABLE_VARIABLES {
            return Err(Error::Table(format!(
                "{} variables exceed the enumeration limit of {MAX_TABLE_VARIABLES}",
                self.nodes.len() - 1
            )));
        }
        let mut seen: HashMap<&str, usize> = HashMap::new();
        for (i, node) in self.nodes.iter().enumerate() {
            for p in &node.parents {
                if p == &self.outcome {
                    return Err(Error::Table(format!(
                        "`{}` lists the outcome as a parent",
                        node.id
                    )));
                }
                if !seen.contains_key(p.as_str()) {
                    return Err(Error::Table(format!(
                        "parent `{p}` of `{}` is not declared before it",
                        node.id
                    )));
                }
            }
            if node.cpt.len() != 1usize << node.parents.len() {
                return Err(Error::Table(format!(
                    "`{}` has {} rows for {} parents",
                    node.id,
                    node.cpt.len(),
                    node.parents.len()
                )));
            }
            for (r, row) in node.cpt.iter().enumerate() {
                if row.iter().any(|p| !(0.0..=1.0).contains(p) || !p.is_finite()) {
                    return Err(Error::Table(format!(
                        "`{}` row {r} has an entry outside [0,1]",
                        node.id
                    )));
                }
                if (row[0] + row[1] - 1.0).abs() > ROW_TOLERANCE {
                    return Err(Error::Table(format!(
                        "`{}` row {r} sums to {}",
                        node.id,
                        row[0] + row[1]
                    )));
                }
            }
            if seen.insert(node.id.as_str(), i).is_some() {
                return Err(Error::Table(format!("duplicate node `{}`", node.id)));
            }
        }
        Ok(())
    }

    /// Checks the temporal constraints for window `w`: every variable has a
    /// group, and each edge between variables goes from a group at most `w`
    /// earlier and never within a group.
    pub fn validate_assumptions(&self, window: u32) -> Result<()> {
        let groups: HashMap<&str, usize> = self
            .nodes
            .iter()
            .filter(|n| n.id != self.outcome)
            .map(|n| {
                n.group
                    .map(|g| (n.id.as_str(), g))
                    .ok_or_else(|| Error::Table(format!("variable `{}` has no group", n.id)))
            })
            .collect::<Result<_>>()?;
        for node in self.nodes.iter().filter(|n| n.id != self.outcome) {
            let g = groups[node.id.as_str()];
            for p in &node.parents {
                let gp = groups[p.as_str()];
                if gp >= g || g - gp > window as usize {
                    return Err(Error::Table(format!(
                        "edge {p} (group {gp}) -> {} (group {g}) violates window {window}",
                        node.id
                    )));
                }
            }
        }
        Ok(())
    }

    pub(crate) fn parent_indices(&self) -> Vec<Vec<usize>> {
        let pos: HashMap<&str, usize> = self
            .nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (n.id.as_str(), i))
            .collect();
        self.nodes
            .iter()
            .map(|n| n.parents.iter().map(|p| pos[p.as_str()]).collect())
            .collect()
    }

    /// Observational joint over all nodes, indexed by state bitmask
    /// (bit `k` is node `k`).
    pub fn observational_joint(&self) -> Vec<f64> {
        let parents = self.parent_indices();
        let n = self.nodes.len();
        (0..1u64 << n)
            .map(|state| {
                self.nodes
                    .iter()
                    .enumerate()
                    .map(|(v, node)| factor(node, &parents[v], v, state))
                    .product()
            })
            .collect()
    }
}

fn factor(node: &TableNode, parents: &[usize], v: usize, state: u64) -> f64 {
    let mut config = 0usize;
    for (k, &p) in parents.iter().enumerate() {
        if state >> p & 1 == 1 {
            config |= 1 << k;
        }
    }
    node.cpt[config][(state >> v & 1) as usize]
}

/// Marginal distribution of `vars` from a full joint, indexed by bitmask
/// over `vars` (bit `k` is `vars[k]`).
pub fn marginalize(joint: &[f64], vars: &[usize]) -> Vec<f64> {
    let mut out = vec![0.0; 1 << vars.len()];
    for (state, p) in joint.iter().enumerate() {
        let mut idx = 0usize;
        for (k, &v) in vars.iter().enumerate() {
            if state >> v & 1 == 1 {
                idx |= 1 << k;
            }
        }
        out[idx] += p;
    }
    out
}

/// `P(query = value | do(target = x))` by truncated factorization: the
/// target's own factor is removed and its value clamped.
pub fn brute_force_interventional_marginal(
    table: &JointTable,
    target: &str,
    x: bool,
    query: &str,
    value: bool,
) -> Result<f64> {
    table.validate()?;
    let t = table
        .index_of(target)
        .ok_or_else(|| Error::UnknownVariable(target.to_string()))?;
    let q = table
        .index_of(query)
        .ok_or_else(|| Error::UnknownVariable(query.to_string()))?;
    let parents = table.parent_indices();
    let n = table.nodes.len();
    let mut total = 0.0;
    for state in 0..1u64 << n {
        if (state >> t & 1 == 1) != x || (state >> q & 1 == 1) != value {
            continue;
        }
        let mut w = 1.0;
        for (v, node) in table.nodes.iter().enumerate() {
            if v != t {
                w *= factor(node, &parents[v], v, state);
            }
        }
        total += w;
    }
    Ok(total)
}

/// `P(Y = truth | do(target = x))` on the mutilated table.
pub fn brute_force_intervened_probability(
    table: &JointTable,
    target: &str,
    x: bool,
    truth: bool,
) -> Result<f64> {
    brute_force_interventional_marginal(table, target, x, &table.outcome, truth)
}

/// Observational marginal `P(query = value)` by enumeration.
pub fn brute_force_marginal(table: &JointTable, query: &str, value: bool) -> Result<f64> {
    table.validate()?;
    let q = table
        .index_of(query)
        .ok_or_else(|| Error::UnknownVariable(query.to_string()))?;
    let joint = table.observational_joint();
    Ok(marginalize(&joint, &[q])[usize::from(value)])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain() -> JointTable {
        JointTable::new(
            vec![TableNode::root("x", 0, 0.5)],
            TableNode::new("Y", None, &["x"], &[0.2, 0.9]),
        )
        .unwrap()
    }

    #[test]
    fn chain_do_one() {
        let t = chain();
        let p = brute_force_intervened_probability(&t, "x", true, true).unwrap();
        assert!((p - 0.9).abs() < 1e-15);
        let p0 = brute_force_intervened_probability(&t, "x", false, true).unwrap();
        assert!((p0 - 0.2).abs() < 1e-15);
    }

    #[test]
    fn non_ancestor_leaves_outcome_unchanged() {
        // b is a child of a but Y only depends on a
        let t = JointTable::new(
            vec![
                TableNode::root("a", 0, 0.3),
                TableNode::new("b", Some(1), &["a"], &[0.1, 0.8]),
            ],
            TableNode::new("Y", None, &["a"], &[0.25, 0.75]),
        )
        .unwrap();
        let base = brute_force_marginal(&t, "Y", true).unwrap();
        for x in [false, true] {
            let p = brute_force_intervened_probability(&t, "b", x, true).unwrap();
            assert!((p - base).abs() < 1e-12);
        }
    }

    #[test]
    fn deterministic_table_gives_binary_output() {
        let t = JointTable::new(
            vec![
                TableNode::root("a", 0, 1.0),
                TableNode::new("b", Some(1), &["a"], &[0.0, 1.0]),
            ],
            TableNode::new("Y", None, &["b"], &[1.0, 0.0]),
        )
        .unwrap();
        for x in [false, true] {
            let p = brute_force_intervened_probability(&t, "a", x, true).unwrap();
            assert!(p == 0.0 || p == 1.0, "{p}");
        }
    }

    #[test]
    fn bad_row_rejected() {
        let mut t = chain();
        t.nodes[1].cpt[0] = [0.5, 0.6];
        assert!(matches!(t.validate(), Err(Error::Table(_))));
        assert!(brute_force_intervened_probability(&t, "x", true, true).is_err());
    }

    #[test]
    fn outcome_must_be_childless_and_last() {
        let bad = JointTable {
            outcome: "Y".into(),
            nodes: vec![
                TableNode::new("Y", None, &[], &[0.5]),
                TableNode::new("x", Some(0), &["Y"], &[0.5, 0.5]),
            ],
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn assumption_check_rejects_same_group_edge() {
        let t = JointTable::new(
            vec![
                TableNode::root("a", 2, 0.3),
                TableNode::new("b", Some(2), &["a"], &[0.1, 0.8]),
            ],
            TableNode::new("Y", None, &["b"], &[0.25, 0.75]),
        )
        .unwrap();
        assert!(t.validate_assumptions(3).is_err());
        let far = JointTable::new(
            vec![
                TableNode::root("a", 0, 0.3),
                TableNode::new("b", Some(4), &["a"], &[0.1, 0.8]),
            ],
            TableNode::new("Y", None, &["b"], &[0.25, 0.75]),
        )
        .unwrap();
        assert!(far.validate_assumptions(3).is_err());
        assert!(far.validate_assumptions(4).is_ok());
    }

    #[test]
    fn joint_sums_to_one() {
        let t = chain();
        let s: f64 = t.observational_joint().iter().sum();
        assert!((s - 1.0).abs() < 1e-12);
    }
}
