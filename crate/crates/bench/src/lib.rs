//! Workloads shared by the benchmarks.

use cilforge_core::oracle::TableOracle;
use cilforge_core::synthetic::{random_table_case, TableCase, TableFamily};
use cilforge_core::{build_scm, Result, TemporalScm};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub struct Workload {
    pub cases: Vec<TableCase>,
    pub scms: Vec<TemporalScm>,
    pub oracle: TableOracle,
}

/// `n` random tables of at most `max_events` events packed into few groups,
/// so window parent sets stay large.
pub fn workload(n: usize, max_events: usize, seed: u64) -> Result<Workload> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let family = TableFamily {
        max_events,
        max_group: 3,
        ..TableFamily::default()
    };
    let cases: Vec<TableCase> = (0..n)
        .map(|i| random_table_case(&mut rng, &family, &format!("b{i}")))
        .collect::<Result<_>>()?;
    let scms = cases
        .iter()
        .map(|c| build_scm(&c.question, &c.articles, &family.grouping))
        .collect::<Result<_>>()?;
    let oracle = TableOracle::new(cases.iter().map(|c| (c.question.id.clone(), c.table.clone())))?;
    Ok(Workload { cases, scms, oracle })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn workload_is_seeded() {
        let a = workload(5, 8, 1).unwrap();
        let b = workload(5, 8, 1).unwrap();
        assert_eq!(a.cases.len(), 5);
        for (x, y) in a.cases.iter().zip(&b.cases) {
            assert_eq!(x.table, y.table);
        }
    }
}
