mod common;

use common::{exact_cover_cost, random_instance, random_partition, rng};
use ctr3_core::oracles::relink_by_enumeration;
use ctr3_core::relink::{cut_routes, prune_joins, solve_relink, PruneOptions, RelinkError};
use ctr3_core::{distance_matrix, DistancePolicy, Route, Solution};
use rand::seq::SliceRandom;
use rand::Rng;

#[test]
fn branch_and_bound_matches_enumeration_on_small_models() {
    let mut r = rng(21);
    let mut solved = 0;
    for _ in 0..300 {
        let n = r.gen_range(5..=8);
        let inst = random_instance(&mut r, n, DistancePolicy::Rounded);
        let dm = distance_matrix(&inst);
        let pool: Vec<Solution> = (0..3)
            .map(|_| {
                let blocks = random_partition(&inst, &mut r);
                Solution::from_routes(blocks.into_iter().map(|b| Route::new(b, &inst, &dm)).collect())
            })
            .collect();
        let (left, right) = cut_routes(&inst, &dm, &pool);
        let k = pool.iter().map(Solution::k).max().unwrap();
        let mut model = prune_joins(&inst, &dm, left, right, k, PruneOptions::default()).unwrap_or_else(|(_, m)| m);
        let mut keep: Vec<usize> = (0..model.candidates.len()).collect();
        keep.shuffle(&mut r);
        keep.truncate(r.gen_range(1..=20));
        keep.sort_unstable();
        model.retain(&keep);
        assert!(model.candidates.len() <= 20);

        let expected = exact_cover_cost(&model);
        let library = relink_by_enumeration(&model).map(|(_, c)| c);
        match (solve_relink(&model, None, None), expected) {
            (Ok(sol), Some(best)) => {
                solved += 1;
                assert!(sol.proven_optimal);
                assert!((sol.cost - best).abs() < 1e-9, "bnb {} vs oracle {}", sol.cost, best);
                assert!((library.unwrap() - best).abs() < 1e-9);
            }
            (Err(RelinkError::Uncovered(_) | RelinkError::NoCover), None) => assert!(library.is_none()),
            (got, want) => panic!("bnb {got:?} vs oracle {want:?}"),
        }
    }
    assert!(solved > 30, "only {solved} models had a cover");
}

#[test]
fn relinked_pool_never_worse_than_its_members() {
    let mut r = rng(22);
    for _ in 0..60 {
        let inst = random_instance(&mut r, 12, DistancePolicy::Rounded);
        let dm = distance_matrix(&inst);
        let pool: Vec<Solution> = (0..6)
            .map(|_| {
                let blocks = random_partition(&inst, &mut r);
                Solution::from_routes(blocks.into_iter().map(|b| Route::new(b, &inst, &dm)).collect())
            })
            .collect();
        let cfg = ctr3_core::Ctr3Config::default();
        let res = ctr3_core::relink::ctr3_from_routed(&inst, &dm, &pool, &cfg);
        let best = pool.iter().map(|s| s.total_cost).fold(f64::INFINITY, f64::min);
        assert!(res.solution.total_cost <= best);
        assert!(ctr3_core::validate_solution(&inst, &res.solution).is_empty());
    }
}
