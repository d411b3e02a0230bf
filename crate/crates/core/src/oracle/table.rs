use std::collections::{BTreeMap, HashMap};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use super::{OracleAnswer, OracleError, ProbabilityOracle};
use crate::scm::table::{marginalize, JointTable};
use crate::scm::{Assignment, TemporalScm};

struct Entry {
    table: JointTable,
    index: HashMap<String, usize>,
    joint: Vec<f64>,
    /// Marginals keyed by sorted node indices.
    marginals: Mutex<HashMap<Vec<usize>, Arc<Vec<f64>>>>,
}

impl Entry {
    fn new(table: JointTable) -> Self {
        let index = table
            .nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (n.id.clone(), i))
            .collect();
        let joint = table.observational_joint();
        Self {
            table,
            index,
            joint,
            marginals: Mutex::new(HashMap::new()),
        }
    }

    fn node(&self, id: &str) -> Result<usize, OracleError> {
        self.index
            .get(id)
            .copied()
            .ok_or_else(|| OracleError::Unknown(id.to_string()))
    }

    /// Probability that every `(node, value)` pair holds.
    fn probability(&self, fixed: &[(usize, bool)]) -> f64 {
        let mut vars: Vec<usize> = fixed.iter().map(|(v, _)| *v).collect();
        vars.sort_unstable();
        vars.dedup();
        let marginal = {
            let mut cache = self.marginals.lock().unwrap();
            cache
                .entry(vars.clone())
                .or_insert_with(|| Arc::new(marginalize(&self.joint, &vars)))
                .clone()
        };
        let mut idx = 0usize;
        for (v, value) in fixed {
            if *value {
                idx |= 1 << vars.binary_search(v).unwrap();
            }
        }
        marginal[idx]
    }
}

/// Exact oracle over explicit joint tables, one per question id. Event
/// variables are matched to articles by id.
pub struct TableOracle {
    tables: BTreeMap<String, Entry>,
    queries: AtomicUsize,
}

impl TableOracle {
    pub fn new(tables: impl IntoIterator<Item = (String, JointTable)>) -> Result<Self, crate::Error> {
        let mut map = BTreeMap::new();
        for (qid, table) in tables {
            table.validate()?;
            map.insert(qid, Entry::new(table));
        }
        Ok(Self {
            tables: map,
            queries: AtomicUsize::new(0),
        })
    }

    pub fn table(&self, question_id: &str) -> Option<&JointTable> {
        self.tables.get(question_id).map(|e| &e.table)
    }

    pub fn queries(&self) -> usize {
        self.queries.load(Ordering::SeqCst)
    }

    fn entry(&self, question_id: &str) -> Result<&Entry, OracleError> {
        self.tables
            .get(question_id)
            .ok_or_else(|| OracleError::Unknown(format!("table for question {question_id}")))
    }

    fn fixed(entry: &Entry, assignment: &Assignment) -> Result<Vec<(usize, bool)>, OracleError> {
        assignment
            .iter()
            .map(|(id, v)| Ok((entry.node(id)?, v)))
            .collect()
    }

    /// `P(outcome = truth | evidence)` straight from the table, for any
    /// evidence set.
    pub fn outcome_given(
        &self,
        question_id: &str,
        truth: bool,
        evidence: &Assignment,
    ) -> Result<f64, OracleError> {
        let entry = self.entry(question_id)?;
        let mut fixed = Self::fixed(entry, evidence)?;
        let denom = entry.probability(&fixed);
        if denom <= 0.0 {
            return Err(OracleError::Invalid(format!(
                "evidence {evidence} has zero probability"
            )));
        }
        fixed.push((entry.table.nodes.len() - 1, truth));
        Ok(entry.probability(&fixed) / denom)
    }
}

impl ProbabilityOracle for TableOracle {
    fn conditional(
        &self,
        scm: &TemporalScm,
        target: &str,
        value: bool,
        conditioning: &Assignment,
    ) -> Result<OracleAnswer, OracleError> {
        self.queries.fetch_add(1, Ordering::SeqCst);
        let q = scm.question();
        let evidence = conditioning.clone().with(target, value);
        Ok(OracleAnswer::exact(self.outcome_given(&q.id, q.truth(), &evidence)?))
    }

    fn joint(&self, scm: &TemporalScm, assignment: &Assignment) -> Result<OracleAnswer, OracleError> {
        self.queries.fetch_add(1, Ordering::SeqCst);
        if assignment.is_empty() {
            return Ok(OracleAnswer::exact(1.0));
        }
        let entry = self.entry(&scm.question().id)?;
        let fixed = Self::fixed(entry, assignment)?;
        Ok(OracleAnswer::exact(entry.probability(&fixed)))
    }
}
