//! Multi-threaded drivers. Results never depend on the thread count: work
//! items are seeded by index and collected in index order.

use ctr3_core::explorer::{self, ClassifyOptions, Classification, ConnectionStats, StudyError};
use ctr3_core::relink::{ctr3_from_routed, Ctr3Config, Ctr3Result};
use ctr3_core::{ccbc_start, distance_matrix, route_all, ClusterSolution, Instance, Solution};
use rayon::prelude::*;

/// A pool with `threads` workers, or rayon's default when `None`.
pub fn thread_pool(threads: Option<usize>) -> anyhow::Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        b = b.num_threads(t.max(1));
    }
    Ok(b.build()?)
}

/// Same result as [`ctr3_core::ctr3_solve`], with starts clustered and routed
/// in parallel on the current pool.
pub fn solve(inst: &Instance, cfg: &Ctr3Config) -> Ctr3Result {
    let dm = distance_matrix(inst);
    let clusterings: Vec<ClusterSolution> = (0..cfg.ccbc.n_starts.max(1))
        .into_par_iter()
        .map(|s| ccbc_start(inst, &cfg.ccbc, s))
        .collect();
    let routed: Vec<Solution> = clusterings
        .par_iter()
        .map(|c| route_all(inst, &dm, c, &cfg.routing))
        .collect();
    let mut res = ctr3_from_routed(inst, &dm, &routed, cfg);
    res.start_k = clusterings.iter().map(ClusterSolution::k).collect();
    res
}

/// Parallel version of [`explorer::connection_study`].
pub fn connection_study(
    n: usize,
    count: usize,
    seed: u64,
    opts: ClassifyOptions,
) -> Result<(ConnectionStats, Vec<Classification>), StudyError> {
    let items = (0..count as u64)
        .into_par_iter()
        .map(|i| {
            let inst = explorer::study_instance(n, seed, i).map_err(StudyError::Instance)?;
            explorer::classify_instance(&inst, opts).map_err(StudyError::Oracle)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok((ConnectionStats::from_classifications(n, &items), items))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ctr3_core::{ctr3_solve, generate_small_instance, CcbcConfig};

    #[test]
    fn parallel_solve_matches_sequential() {
        let inst = generate_small_instance(9, 3).unwrap();
        let cfg = Ctr3Config { ccbc: CcbcConfig { n_starts: 20, seed: 5, ..CcbcConfig::default() }, ..Ctr3Config::default() };
        let seq = ctr3_solve(&inst, &cfg);
        for threads in [1, 3] {
            let par = thread_pool(Some(threads)).unwrap().install(|| solve(&inst, &cfg));
            assert_eq!(par, seq);
        }
    }

    #[test]
    fn parallel_study_matches_sequential() {
        let opts = ClassifyOptions::default();
        let seq = explorer::connection_study(5, 12, 9, opts).unwrap();
        let par = thread_pool(Some(4)).unwrap().install(|| connection_study(5, 12, 9, opts)).unwrap();
        assert_eq!(par, seq);
    }
}
