//! Per-cluster routing: exact Held-Karp for small clusters, nearest
//! neighbour followed by 2-opt above the threshold.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::ccbc::ClusterSolution;
use crate::instance::{DistanceMatrix, Instance};

/// A depot-anchored route. The depot is implicit at both ends.
#[derive(Debug, Clone, PartialEq)]
pub struct Route {
    pub sequence: Vec<usize>,
    pub cost: f64,
    pub load: f64,
}

impl Route {
    pub fn new(sequence: Vec<usize>, inst: &Instance, dm: &DistanceMatrix) -> Self {
        let cost = dm.tour_cost(&sequence);
        let load = sequence.iter().map(|&c| inst.demand(c)).sum();
        Self { sequence, cost, load }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Solution {
    pub routes: Vec<Route>,
    pub total_cost: f64,
}

impl Solution {
    pub fn from_routes(routes: Vec<Route>) -> Self {
        let total_cost = routes.iter().map(|r| r.cost).sum();
        Self { routes, total_cost }
    }

    pub fn k(&self) -> usize {
        self.routes.len()
    }

    /// Customer sets of the routes, each sorted, sorted by smallest id.
    pub fn partition(&self) -> Vec<Vec<usize>> {
        crate::ccbc::canonical(
            &self
                .routes
                .iter()
                .map(|r| r.sequence.clone())
                .collect::<Vec<_>>(),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RoutingConfig {
    /// Largest cluster solved exactly.
    pub exact_threshold: usize,
}

impl Default for RoutingConfig {
    fn default() -> Self {
        Self { exact_threshold: 14 }
    }
}

/// Hard cap on the Held-Karp table size regardless of configuration.
pub const MAX_EXACT: usize = 20;

/// Orders `cluster` into a route starting and ending at the depot.
///
/// # Panics
/// If `cluster` is empty or contains the depot.
pub fn solve_tsp(inst: &Instance, dm: &DistanceMatrix, cluster: &[usize], exact_threshold: usize) -> Route {
    assert!(!cluster.is_empty(), "cannot route an empty cluster");
    assert!(!cluster.contains(&0), "cluster must not contain the depot");
    let sequence = if cluster.len() <= exact_threshold.min(MAX_EXACT) {
        held_karp(dm, cluster)
    } else {
        two_opt(dm, nearest_neighbor(dm, cluster))
    };
    Route::new(sequence, inst, dm)
}

/// Optimal depot-anchored order of `cluster`.
pub fn held_karp(dm: &DistanceMatrix, cluster: &[usize]) -> Vec<usize> {
    let m = cluster.len();
    if m <= 2 {
        return cluster.to_vec();
    }
    let full = (1usize << m) - 1;
    let mut cost = vec![f64::INFINITY; (1 << m) * m];
    let mut parent = vec![u8::MAX; (1 << m) * m];
    for j in 0..m {
        cost[(1 << j) * m + j] = dm.get(0, cluster[j]);
    }
    for mask in 1..=full {
        for j in 0..m {
            if mask & (1 << j) == 0 {
                continue;
            }
            let here = cost[mask * m + j];
            if !here.is_finite() {
                continue;
            }
            for k in 0..m {
                if mask & (1 << k) != 0 {
                    continue;
                }
                let next = mask | (1 << k);
                let c = here + dm.get(cluster[j], cluster[k]);
                if c < cost[next * m + k] {
                    cost[next * m + k] = c;
                    parent[next * m + k] = j as u8;
                }
            }
        }
    }
    let mut last = 0;
    let mut best = f64::INFINITY;
    for j in 0..m {
        let c = cost[full * m + j] + dm.get(cluster[j], 0);
        if c < best {
            best = c;
            last = j;
        }
    }
    let mut order = Vec::with_capacity(m);
    let mut mask = full;
    let mut j = last;
    loop {
        order.push(cluster[j]);
        let p = parent[mask * m + j];
        mask &= !(1 << j);
        if p == u8::MAX {
            break;
        }
        j = p as usize;
    }
    order.reverse();
    order
}

/// Greedy tour from the depot, ties to the lower id.
pub fn nearest_neighbor(dm: &DistanceMatrix, cluster: &[usize]) -> Vec<usize> {
    let mut left: Vec<usize> = cluster.to_vec();
    left.sort_unstable();
    let mut tour = Vec::with_capacity(left.len());
    let mut at = 0;
    while !left.is_empty() {
        let (idx, _) = left
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |(bi, bd), (i, &c)| {
                let d = dm.get(at, c);
                if d < bd {
                    (i, d)
                } else {
                    (bi, bd)
                }
            });
        at = left.remove(idx);
        tour.push(at);
    }
    tour
}

/// First-improvement 2-opt over the closed tour `0, seq.., 0`.
pub fn two_opt(dm: &DistanceMatrix, mut seq: Vec<usize>) -> Vec<usize> {
    let m = seq.len();
    if m < 3 {
        return seq;
    }
    let node = |s: &[usize], i: usize| if i == 0 || i == m + 1 { 0 } else { s[i - 1] };
    loop {
        let mut improved = false;
        // reverse positions i..=j of the closed tour (1-based inside seq)
        for i in 1..m {
            for j in (i + 1)..=m {
                let a = node(&seq, i - 1);
                let b = node(&seq, i);
                let c = node(&seq, j);
                let d = node(&seq, j + 1);
                let delta = dm.get(a, c) + dm.get(b, d) - dm.get(a, b) - dm.get(c, d);
                if delta < -1e-10 {
                    seq[i - 1..j].reverse();
                    improved = true;
                }
            }
        }
        if !improved {
            return seq;
        }
    }
}

/// Memoizes routes by sorted customer set.
#[derive(Debug, Default, Clone)]
pub struct TspCache {
    routes: BTreeMap<Vec<usize>, Route>,
}

impl TspCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.routes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.routes.is_empty()
    }

    pub fn route(&mut self, inst: &Instance, dm: &DistanceMatrix, cluster: &[usize], cfg: &RoutingConfig) -> Route {
        let mut key = cluster.to_vec();
        key.sort_unstable();
        if let Some(r) = self.routes.get(&key) {
            return r.clone();
        }
        let r = solve_tsp(inst, dm, &key, cfg.exact_threshold);
        self.routes.insert(key, r.clone());
        r
    }
}

/// One route per cluster.
///
/// # Panics
/// If a cluster is empty.
pub fn route_all(inst: &Instance, dm: &DistanceMatrix, clusters: &ClusterSolution, cfg: &RoutingConfig) -> Solution {
    let mut cache = TspCache::new();
    route_all_cached(inst, dm, clusters, cfg, &mut cache)
}

pub fn route_all_cached(
    inst: &Instance,
    dm: &DistanceMatrix,
    clusters: &ClusterSolution,
    cfg: &RoutingConfig,
    cache: &mut TspCache,
) -> Solution {
    Solution::from_routes(
        clusters
            .clusters
            .iter()
            .map(|b| cache.route(inst, dm, b, cfg))
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{distance_matrix, generate_small_instance};
    use crate::testutil::four_customer;
    use alloc::vec;

    fn brute_force(dm: &DistanceMatrix, cluster: &[usize]) -> f64 {
        fn rec(dm: &DistanceMatrix, seq: &mut Vec<usize>, left: &mut Vec<usize>, best: &mut f64) {
            if left.is_empty() {
                *best = best.min(dm.tour_cost(seq));
                return;
            }
            for i in 0..left.len() {
                let c = left.remove(i);
                seq.push(c);
                rec(dm, seq, left, best);
                seq.pop();
                left.insert(i, c);
            }
        }
        let mut best = f64::INFINITY;
        rec(dm, &mut Vec::new(), &mut cluster.to_vec(), &mut best);
        best
    }

    #[test]
    fn single_customer_out_and_back() {
        let inst = four_customer();
        let dm = distance_matrix(&inst);
        let r = solve_tsp(&inst, &dm, &[4], 14);
        assert_eq!(r.sequence, vec![4]);
        assert!((r.cost - 2.0 * dm.get(0, 4)).abs() < 1e-12);
        assert_eq!(r.load, 8.0);
    }

    #[test]
    fn four_customer_cluster_234() {
        let inst = four_customer();
        let dm = distance_matrix(&inst);
        let r = solve_tsp(&inst, &dm, &[4, 2, 3], 14);
        assert!(r.sequence == vec![2, 3, 4] || r.sequence == vec![4, 3, 2], "{:?}", r.sequence);
        let expected = dm.get(0, 2) + dm.get(2, 3) + dm.get(3, 4) + dm.get(4, 0);
        assert!((r.cost - expected).abs() < 1e-12);
        assert!((r.cost - brute_force(&dm, &[2, 3, 4])).abs() < 1e-12);
    }

    #[test]
    fn four_customer_route_all_cost() {
        let inst = four_customer();
        let dm = distance_matrix(&inst);
        let cs = ClusterSolution::from_partition(&inst, vec![vec![1], vec![2, 3, 4]], false);
        let sol = route_all(&inst, &dm, &cs, &RoutingConfig::default());
        let s5 = libm::sqrt(5.0);
        let expected = 2.0 * s5 + (libm::sqrt(8.0) + s5 + s5 + 6.0);
        assert!((sol.total_cost - expected).abs() < 1e-9);
        assert!((sol.total_cost - 17.77).abs() < 0.01);
    }

    #[test]
    fn singletons_cost_twice_radial_sum() {
        let inst = generate_small_instance(7, 4).unwrap();
        let dm = distance_matrix(&inst);
        let cs = ClusterSolution::from_partition(&inst, inst.customer_ids().map(|c| vec![c]).collect(), false);
        let sol = route_all(&inst, &dm, &cs, &RoutingConfig::default());
        let radial: f64 = inst.customer_ids().map(|c| dm.get(0, c)).sum();
        assert!((sol.total_cost - 2.0 * radial).abs() < 1e-9);
        assert_eq!(sol.k(), 7);
    }

    #[test]
    #[should_panic(expected = "empty cluster")]
    fn empty_cluster_rejected() {
        let inst = four_customer();
        let dm = distance_matrix(&inst);
        solve_tsp(&inst, &dm, &[], 14);
    }

    #[test]
    fn held_karp_matches_brute_force() {
        for seed in 0..40 {
            let inst = generate_small_instance(8, seed).unwrap();
            let dm = distance_matrix(&inst);
            let m = 1 + (seed as usize % 8);
            let cluster: Vec<usize> = (1..=m).collect();
            let r = solve_tsp(&inst, &dm, &cluster, 14);
            assert!((r.cost - brute_force(&dm, &cluster)).abs() < 1e-9);
        }
    }

    #[test]
    fn two_opt_never_worse_than_seed() {
        for seed in 0..30 {
            let inst = generate_small_instance(10, seed).unwrap();
            let dm = distance_matrix(&inst);
            let cluster: Vec<usize> = inst.customer_ids().collect();
            let nn = nearest_neighbor(&dm, &cluster);
            let before = dm.tour_cost(&nn);
            let after = dm.tour_cost(&two_opt(&dm, nn));
            assert!(after <= before + 1e-12);
            let heuristic = solve_tsp(&inst, &dm, &cluster, 0);
            assert!(heuristic.cost >= solve_tsp(&inst, &dm, &cluster, 14).cost - 1e-9);
        }
    }

    #[test]
    fn two_opt_removes_crossing() {
        // square visited in crossing order
        let pts = [
            (crate::Point::new(0.0, 1.0), 1.0),
            (crate::Point::new(1.0, 0.0), 1.0),
            (crate::Point::new(1.0, 1.0), 1.0),
        ];
        let inst = Instance::new("sq", crate::Point::new(0.0, 0.0), &pts, 10.0, crate::DistancePolicy::Exact).unwrap();
        let dm = distance_matrix(&inst);
        let out = two_opt(&dm, vec![1, 2, 3]);
        assert!((dm.tour_cost(&out) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn cache_returns_identical_routes() {
        let inst = generate_small_instance(6, 1).unwrap();
        let dm = distance_matrix(&inst);
        let mut cache = TspCache::new();
        let cfg = RoutingConfig::default();
        let a = cache.route(&inst, &dm, &[3, 1, 2], &cfg);
        let b = cache.route(&inst, &dm, &[1, 2, 3], &cfg);
        assert_eq!(a, b);
        assert_eq!(cache.len(), 1);
    }
}
