use chrono::NaiveDate;

use super::table::{brute_force_intervened_probability, JointTable, TableNode};
use super::*;
use crate::oracle::{OracleAnswer, TableOracle};
use crate::testutil::{article, question};

fn d(m: u32, day: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(2024, m, day).unwrap()
}

fn day(n: i64) -> NaiveDate {
    d(1, 1) + chrono::Duration::days(n)
}

/// Oracle defined by two closures; for hand-computed cases.
struct FnOracle<C, J> {
    cond: C,
    joint: J,
}

impl<C, J> ProbabilityOracle for FnOracle<C, J>
where
    C: Fn(bool, &Assignment) -> f64 + Send + Sync,
    J: Fn(&Assignment) -> f64 + Send + Sync,
{
    fn conditional(
        &self,
        _scm: &TemporalScm,
        _target: &str,
        value: bool,
        conditioning: &Assignment,
    ) -> Result<OracleAnswer, OracleError> {
        Ok(OracleAnswer::exact((self.cond)(value, conditioning)))
    }

    fn joint(&self, _scm: &TemporalScm, a: &Assignment) -> Result<OracleAnswer, OracleError> {
        Ok(OracleAnswer::exact((self.joint)(a)))
    }
}

struct FailingOracle;

impl ProbabilityOracle for FailingOracle {
    fn conditional(
        &self,
        _: &TemporalScm,
        _: &str,
        _: bool,
        _: &Assignment,
    ) -> Result<OracleAnswer, OracleError> {
        Err(OracleError::Provider("down".into()))
    }

    fn joint(&self, _: &TemporalScm, _: &Assignment) -> Result<OracleAnswer, OracleError> {
        Err(OracleError::Provider("down".into()))
    }
}

fn scm_with(groups_days: &[(&str, i64)], window: u32) -> TemporalScm {
    let q = question("q", d(12, 1), 1);
    let arts: Vec<_> = groups_days.iter().map(|(id, n)| article(id, day(*n))).collect();
    build_scm(
        &q,
        &arts,
        &GroupingConfig {
            group_span_days: 10,
            window,
        },
    )
    .unwrap()
}

#[test]
fn build_groups_over_25_days() {
    let scm = scm_with(&[("a", 0), ("b", 10), ("c", 25)], 3);
    let groups: Vec<usize> = scm.variables().iter().map(|v| v.group).collect();
    assert_eq!(groups, vec![0, 1, 2]);
}

#[test]
fn build_rejects_empty_and_late() {
    let q = question("q", d(2, 1), 1);
    assert!(matches!(
        build_scm(&q, &[], &GroupingConfig::default()),
        Err(Error::EmptyInput(_))
    ));
    let late = article("a", d(2, 1));
    assert!(matches!(
        build_scm(&q, &[late], &GroupingConfig::default()),
        Err(Error::Invariant(_))
    ));
}

#[test]
fn same_date_means_no_parents() {
    let scm = scm_with(&[("a", 3), ("b", 3), ("c", 3)], 3);
    for v in scm.variables() {
        assert_eq!(v.group, 0);
        assert!(window_parents(&scm, v.id()).unwrap().is_empty());
    }
}

#[test]
fn variables_sorted_by_date_then_id() {
    let scm = scm_with(&[("z", 5), ("b", 1), ("a", 5)], 3);
    let ids: Vec<&str> = scm.variables().iter().map(|v| v.id()).collect();
    assert_eq!(ids, vec!["b", "a", "z"]);
}

#[test]
fn window_parents_examples() {
    // groups: g2, g3, g4, target g5, peer g5, g6
    let scm = scm_with(
        &[
            ("g0", 0),
            ("g2", 20),
            ("g3", 30),
            ("g4", 40),
            ("t", 50),
            ("peer", 55),
            ("g6", 60),
        ],
        3,
    );
    let ids: Vec<&str> = window_parents(&scm, "t")
        .unwrap()
        .iter()
        .map(|v| v.id())
        .collect();
    assert_eq!(ids, vec!["g2", "g3", "g4"]);
    assert!(window_parents(&scm, "g0").unwrap().is_empty());
    assert!(matches!(
        window_parents(&scm, "missing"),
        Err(Error::UnknownVariable(_))
    ));
}

#[test]
fn top_k_by_rating_with_tie_break() {
    let ratings = [6u8, 5, 5, 4, 2, 1];
    let vars: Vec<ScmVariable> = ratings
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut a = article(&format!("p{i}"), day(i as i64));
            a.relevance_rating = Some(*r);
            ScmVariable { article: a, group: 0 }
        })
        .collect();
    let refs: Vec<&ScmVariable> = vars.iter().collect();
    assert_eq!(select_conditioning_set(&refs, Selection::All).len(), 6);
    let top: Vec<&str> = select_conditioning_set(&refs, Selection::TopK { k: 3 })
        .iter()
        .map(|v| v.id())
        .collect();
    assert_eq!(top, vec!["p0", "p1", "p2"]);
    assert!(select_conditioning_set(&refs, Selection::TopK { k: 0 }).is_empty());

    // a tie at the cut is resolved toward the earlier article
    let mut late = vars.clone();
    late[1].article.publish_date = day(30);
    let refs: Vec<&ScmVariable> = late.iter().collect();
    let top: Vec<&str> = select_conditioning_set(&refs, Selection::TopK { k: 2 })
        .iter()
        .map(|v| v.id())
        .collect();
    assert_eq!(top, vec!["p0", "p2"]);
}

#[test]
fn empty_conditioning_is_direct_query() {
    let scm = scm_with(&[("x", 0)], 3);
    let oracle = FnOracle {
        cond: |x: bool, _: &Assignment| if x { 0.9 } else { 0.1 },
        joint: |_: &Assignment| panic!("no joint query expected"),
    };
    let p = intervened_probability(&scm, &oracle, "x", true, &CilPolicy::All).unwrap();
    assert_eq!(p, 0.9);
}

#[test]
fn two_term_adjustment() {
    let scm = scm_with(&[("a", 0), ("x", 10)], 3);
    let oracle = FnOracle {
        cond: |x: bool, a: &Assignment| match (x, a.get("a")) {
            (true, Some(true)) => 0.8,
            (true, Some(false)) => 0.5,
            _ => 0.3,
        },
        joint: |a: &Assignment| if a.get("a") == Some(true) { 0.6 } else { 0.4 },
    };
    let p = intervened_probability(&scm, &oracle, "x", true, &CilPolicy::All).unwrap();
    assert!((p - 0.68).abs() < 1e-12);
}

#[test]
fn joint_estimates_are_renormalized() {
    let scm = scm_with(&[("a", 0), ("x", 10)], 3);
    // joints sum to 0.5; renormalized weights are 0.6 / 0.4
    let oracle = FnOracle {
        cond: |_: bool, a: &Assignment| if a.get("a") == Some(true) { 1.0 } else { 0.0 },
        joint: |a: &Assignment| if a.get("a") == Some(true) { 0.3 } else { 0.2 },
    };
    let p = intervened_probability(&scm, &oracle, "x", true, &CilPolicy::All).unwrap();
    assert!((p - 0.6).abs() < 1e-12);
}

#[test]
fn independent_outcome_gives_zero() {
    let scm = scm_with(&[("a", 0), ("b", 5), ("x", 12)], 3);
    let oracle = FnOracle {
        cond: |_: bool, a: &Assignment| 0.2 + 0.3 * a.iter().filter(|(_, v)| *v).count() as f64 / 2.0,
        joint: |_: &Assignment| 0.25,
    };
    let s = cil(&scm, &oracle, "x", &CilPolicy::All).unwrap();
    assert_eq!(s.value, 0.0);
}

fn chain_table() -> JointTable {
    JointTable::new(
        vec![TableNode::root("x", 0, 0.5)],
        TableNode::new("Y", None, &["x"], &[0.2, 0.9]),
    )
    .unwrap()
}

#[test]
fn chain_cil_matches_hand_value() {
    let q = question("q", d(6, 1), 1);
    let scm = build_scm(&q, &[article("x", d(1, 1))], &GroupingConfig::default()).unwrap();
    let oracle = TableOracle::new([("q".to_string(), chain_table())]).unwrap();
    let s = cil(&scm, &oracle, "x", &CilPolicy::All).unwrap();
    assert!((s.value - 0.7).abs() < 1e-12);
    assert_eq!(s.p_do1 - s.p_do0, s.value);
    let brute = brute_force_intervened_probability(&chain_table(), "x", true, true).unwrap()
        - brute_force_intervened_probability(&chain_table(), "x", false, true).unwrap();
    assert!((brute - 0.7).abs() < 1e-12);

    let q0 = question("q", d(6, 1), 0);
    let scm0 = build_scm(&q0, &[article("x", d(1, 1))], &GroupingConfig::default()).unwrap();
    let s0 = cil(&scm0, &oracle, "x", &CilPolicy::All).unwrap();
    assert!((s0.value + s.value).abs() < 1e-12);
}

#[test]
fn full_enumeration_call_count() {
    // target in group 3 with three parents in groups 0..2
    let scm = scm_with(&[("a", 0), ("b", 10), ("c", 20), ("x", 30)], 3);
    let oracle = FnOracle {
        cond: |x: bool, _: &Assignment| if x { 0.7 } else { 0.4 },
        joint: |_: &Assignment| 0.125,
    };
    let s = cil(&scm, &oracle, "x", &CilPolicy::All).unwrap();
    assert_eq!(s.conditioning_set_size, 3);
    assert_eq!(s.oracle_calls, 2 * 8 + 8);
    assert_eq!(s.estimation_mode, EstimationMode::FullEnumeration);
    let capped = cil(&scm, &oracle, "x", &CilPolicy::TopK { k: 1 }).unwrap();
    assert_eq!(capped.conditioning_set_size, 1);
    assert_eq!(capped.oracle_calls, 2 * 2 + 2);
    assert_eq!(capped.estimation_mode, EstimationMode::CappedTopK);
}

#[test]
fn oracle_failure_carries_query() {
    let scm = scm_with(&[("x", 0)], 3);
    match cil(&scm, &FailingOracle, "x", &CilPolicy::All) {
        Err(Error::Oracle(OracleError::Query { query, source })) => {
            assert!(query.contains("x=1"), "{query}");
            assert!(matches!(*source, OracleError::Provider(_)));
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn out_of_range_oracle_answer_rejected() {
    let scm = scm_with(&[("x", 0)], 3);
    let oracle = FnOracle {
        cond: |_: bool, _: &Assignment| 1.5,
        joint: |_: &Assignment| 1.0,
    };
    assert!(cil(&scm, &oracle, "x", &CilPolicy::All).is_err());
}

fn wide_scm(parents: usize) -> TemporalScm {
    let mut design: Vec<(String, i64)> = (0..parents).map(|i| (format!("p{i}"), (i % 3) as i64 * 10)).collect();
    design.push(("x".into(), 30));
    let refs: Vec<(&str, i64)> = design.iter().map(|(s, n)| (s.as_str(), *n)).collect();
    scm_with(&refs, 3)
}

/// Parents independent with P(p=1)=0.3 each; outcome rises with the count
/// of happened parents.
fn product_oracle() -> impl ProbabilityOracle {
    FnOracle {
        cond: |x: bool, a: &Assignment| {
            let on = a.iter().filter(|(_, v)| *v).count() as f64;
            let n = a.len().max(1) as f64;
            (0.1 + 0.5 * on / n + if x { 0.3 } else { 0.0 }).min(1.0)
        },
        joint: |a: &Assignment| a.iter().map(|(_, v)| if v { 0.3 } else { 0.7 }).product(),
    }
}

#[test]
fn monte_carlo_is_deterministic_and_close() {
    let oracle = product_oracle();
    for parents in [2usize, 8] {
        let scm = wide_scm(parents);
        let exact = cil(&scm, &oracle, "x", &CilPolicy::All).unwrap();
        let policy = CilPolicy::MonteCarlo { samples: 400, seed: 7 };
        let a = cil(&scm, &oracle, "x", &policy).unwrap();
        let b = cil(&scm, &oracle, "x", &policy).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.estimation_mode, EstimationMode::MonteCarlo);
        assert!((a.p_do1 - exact.p_do1).abs() < 0.05, "{} vs {}", a.p_do1, exact.p_do1);
        // common random numbers: the additive effect cancels exactly
        assert!((a.value - 0.3).abs() < 1e-12, "{}", a.value);
    }
}

#[test]
fn monte_carlo_needs_samples() {
    let scm = wide_scm(2);
    let policy = CilPolicy::MonteCarlo { samples: 0, seed: 1 };
    assert!(cil(&scm, &product_oracle(), "x", &policy).is_err());
}

#[test]
fn repeated_cil_is_bit_identical() {
    let scm = wide_scm(4);
    let oracle = product_oracle();
    let a = score_all(&scm, &oracle, &CilPolicy::All).unwrap();
    let b = score_all(&scm, &oracle, &CilPolicy::All).unwrap();
    assert_eq!(a, b);
}
