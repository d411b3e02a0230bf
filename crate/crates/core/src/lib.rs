//! Temporal causal scoring of news events against forecasting questions.
//!
//! Articles published before a question resolves are arranged into a
//! layered causal model over fixed-width date groups. Each article's causal
//! influence on the realized outcome is the difference between the
//! interventional outcome probabilities with the event forced on and off,
//! estimated by adjusting over the events in the preceding window of groups.

mod error;
pub mod eval;
pub mod grouping;
pub mod metrics;
pub mod oracle;
pub mod pipeline;
pub mod records;
pub mod scm;
pub mod synthetic;
pub mod types;

#[cfg(test)]
mod testutil;

pub use error::{Error, Result};
pub use grouping::{assign_groups, forecast_progress, group_of};
pub use metrics::{brier_score, mean_std};
pub use oracle::{OracleAnswer, OracleError, ProbabilityOracle};
pub use scm::table::{JointTable, TableNode};
pub use scm::{
    build_scm, cil, intervened_probability, score_all, window_parents, Assignment, CilPolicy,
    CilScore, EstimationMode, ScmVariable, TemporalScm,
};
pub use types::{EvaluationConfig, GroupingConfig, NewsArticle, Question, QuestionSource};
