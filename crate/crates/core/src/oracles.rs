//! Exact reference solvers for instances with at most ten customers.
//!
//! Partitions are enumerated as restricted-growth strings with capacity
//! pruning. Blocks are handled as bitmasks over customers, bit `c - 1` for
//! customer `c`.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::bitset::CustomerSet;
use crate::ccbc::{fits, ClusterSolution};
use crate::instance::{distance_matrix, DistanceMatrix, Instance, Point};
use crate::relink::RelinkModel;
use crate::routing::{Route, Solution};

pub const MAX_ORACLE_CUSTOMERS: usize = 10;

const TIE_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleError {
    TooLarge { n: usize },
    /// No capacity-feasible partition (with the requested block count).
    Infeasible,
}

impl fmt::Display for OracleError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OracleError::TooLarge { n } => {
                write!(f, "{n} customers exceed the oracle limit of {MAX_ORACLE_CUSTOMERS}")
            }
            OracleError::Infeasible => write!(f, "no feasible partition"),
        }
    }
}

impl core::error::Error for OracleError {}

#[derive(Debug, Clone, PartialEq)]
pub struct ExactResult<W> {
    pub value: f64,
    pub witness: W,
    /// Number of complete feasible partitions visited.
    pub enumerated: u64,
}

/// Optimal tour cost through the depot and `block`, by a backward subset
/// recursion: `f(S, i) = min_j d(i, j) + f(S - j, j)`, `f({}, i) = d(i, 0)`.
///
/// # Panics
/// If the block has more than [`MAX_ORACLE_CUSTOMERS`] customers.
pub fn price_route(dm: &DistanceMatrix, block: &[usize]) -> f64 {
    let m = block.len();
    assert!(m <= MAX_ORACLE_CUSTOMERS, "block too large for the oracle");
    if m == 0 {
        return 0.0;
    }
    // f[S][i]: i indexes block, or m for the depot
    let full = (1usize << m) - 1;
    let node = |i: usize| if i == m { 0 } else { block[i] };
    let mut f = vec![f64::INFINITY; (full + 1) * (m + 1)];
    for i in 0..=m {
        f[i] = dm.get(node(i), 0);
    }
    for s in 1..=full {
        for i in 0..=m {
            if i < m && s & (1 << i) != 0 {
                continue;
            }
            let mut best = f64::INFINITY;
            for j in 0..m {
                if s & (1 << j) != 0 {
                    best = best.min(dm.get(node(i), block[j]) + f[(s & !(1 << j)) * (m + 1) + j]);
                }
            }
            f[s * (m + 1) + i] = best;
        }
    }
    f[full * (m + 1) + m]
}

/// Optimal tour of every subset of the instance's customers.
#[derive(Debug, Clone)]
pub struct SubsetTours {
    n: usize,
    cost: Vec<f64>,
    /// `dp[mask * n + last]`: cheapest depot path over `mask` ending at `last`.
    dp: Vec<f64>,
    parent: Vec<u8>,
}

impl SubsetTours {
    pub fn new(dm: &DistanceMatrix, n: usize) -> Self {
        let size = 1usize << n;
        let mut dp = vec![f64::INFINITY; size * n];
        let mut parent = vec![u8::MAX; size * n];
        for j in 0..n {
            dp[(1 << j) * n + j] = dm.get(0, j + 1);
        }
        for mask in 1..size {
            for j in 0..n {
                let here = dp[mask * n + j];
                if mask & (1 << j) == 0 || !here.is_finite() {
                    continue;
                }
                for k in 0..n {
                    if mask & (1 << k) != 0 {
                        continue;
                    }
                    let next = (mask | (1 << k)) * n + k;
                    let c = here + dm.get(j + 1, k + 1);
                    if c < dp[next] {
                        dp[next] = c;
                        parent[next] = j as u8;
                    }
                }
            }
        }
        let mut cost = vec![0.0; size];
        for (mask, slot) in cost.iter_mut().enumerate().skip(1) {
            *slot = (0..n)
                .filter(|j| mask & (1 << j) != 0)
                .map(|j| dp[mask * n + j] + dm.get(j + 1, 0))
                .fold(f64::INFINITY, f64::min);
        }
        Self { n, cost, dp, parent }
    }

    pub fn cost(&self, mask: u32) -> f64 {
        self.cost[mask as usize]
    }

    /// An optimal visiting order of the customers in `mask`.
    pub fn sequence(&self, mask: u32, dm: &DistanceMatrix) -> Vec<usize> {
        let n = self.n;
        let mask = mask as usize;
        let Some(mut j) = (0..n)
            .filter(|j| mask & (1 << j) != 0)
            .find(|&j| self.dp[mask * n + j] + dm.get(j + 1, 0) == self.cost[mask])
        else {
            return Vec::new();
        };
        let mut seq = Vec::new();
        let mut m = mask;
        loop {
            seq.push(j + 1);
            let p = self.parent[m * n + j];
            m &= !(1 << j);
            if p == u8::MAX {
                break;
            }
            j = p as usize;
        }
        seq.reverse();
        seq
    }
}

pub fn mask_ids(mask: u32) -> Vec<usize> {
    (0..32).filter(|b| mask & (1 << b) != 0).map(|b| b as usize + 1).collect()
}

/// Visits every capacity-feasible set partition of the customers, with
/// exactly `k` blocks when given. Blocks are passed as masks in
/// restricted-growth order (block `j` is opened by its smallest customer).
/// Returns the number of partitions visited.
pub fn for_each_partition(inst: &Instance, k: Option<usize>, mut visit: impl FnMut(&[u32])) -> u64 {
    let n = inst.n_customers();
    let demands: Vec<f64> = inst.customer_ids().map(|c| inst.demand(c)).collect();
    let mut blocks: Vec<u32> = Vec::with_capacity(n);
    let mut loads: Vec<f64> = Vec::with_capacity(n);
    let mut count = 0;
    rgs(0, n, k, inst.capacity(), &demands, &mut blocks, &mut loads, &mut visit, &mut count);
    count
}

#[allow(clippy::too_many_arguments)]
fn rgs(
    i: usize,
    n: usize,
    k: Option<usize>,
    cap: f64,
    demands: &[f64],
    blocks: &mut Vec<u32>,
    loads: &mut Vec<f64>,
    visit: &mut impl FnMut(&[u32]),
    count: &mut u64,
) {
    if let Some(k) = k {
        if blocks.len() > k || blocks.len() + (n - i) < k {
            return;
        }
    }
    if i == n {
        *count += 1;
        visit(blocks);
        return;
    }
    let q = demands[i];
    for j in 0..blocks.len() {
        if fits(loads[j] + q, cap) {
            blocks[j] |= 1 << i;
            loads[j] += q;
            rgs(i + 1, n, k, cap, demands, blocks, loads, visit, count);
            blocks[j] &= !(1 << i);
            loads[j] -= q;
        }
    }
    blocks.push(1 << i);
    loads.push(q);
    rgs(i + 1, n, k, cap, demands, blocks, loads, visit, count);
    blocks.pop();
    loads.pop();
}

fn check_size(inst: &Instance) -> Result<(), OracleError> {
    let n = inst.n_customers();
    if n > MAX_ORACLE_CUSTOMERS {
        return Err(OracleError::TooLarge { n });
    }
    Ok(())
}

/// Optimal CVRP solution, optionally with exactly `k` routes.
pub fn exact_cvrp(inst: &Instance, k: Option<usize>) -> Result<ExactResult<Solution>, OracleError> {
    check_size(inst)?;
    let dm = distance_matrix(inst);
    let tours = SubsetTours::new(&dm, inst.n_customers());
    exact_cvrp_with(inst, &dm, &tours, k)
}

pub fn exact_cvrp_with(
    inst: &Instance,
    dm: &DistanceMatrix,
    tours: &SubsetTours,
    k: Option<usize>,
) -> Result<ExactResult<Solution>, OracleError> {
    let mut best = f64::INFINITY;
    let mut witness: Vec<u32> = Vec::new();
    let enumerated = for_each_partition(inst, k, |blocks| {
        let v: f64 = blocks.iter().map(|&b| tours.cost(b)).sum();
        if v < best - TIE_EPS {
            best = v;
            witness = blocks.to_vec();
        }
    });
    if witness.is_empty() {
        return Err(OracleError::Infeasible);
    }
    let routes = witness
        .iter()
        .map(|&b| Route::new(tours.sequence(b, dm), inst, dm))
        .collect();
    let solution = Solution::from_routes(routes);
    Ok(ExactResult { value: solution.total_cost, witness: solution, enumerated })
}

/// Within-cluster sum of squares of every customer subset, optionally with
/// the depot added to each block.
pub fn subset_withinss(inst: &Instance, include_depot: bool) -> Vec<f64> {
    let n = inst.n_customers();
    let mut out = vec![0.0; 1 << n];
    for (mask, slot) in out.iter_mut().enumerate().skip(1) {
        let mut pts: Vec<Point> = mask_ids(mask as u32).into_iter().map(|c| inst.pos(c)).collect();
        if include_depot {
            pts.push(inst.depot());
        }
        let m = pts.len() as f64;
        let cx = pts.iter().map(|p| p.x).sum::<f64>() / m;
        let cy = pts.iter().map(|p| p.y).sum::<f64>() / m;
        *slot = pts.iter().map(|p| p.dist_sq(Point::new(cx, cy))).sum();
    }
    out
}

/// Minimum-withinss capacity-feasible partition into exactly `k` blocks.
pub fn exact_ccbc(inst: &Instance, k: usize, include_depot: bool) -> Result<ExactResult<ClusterSolution>, OracleError> {
    check_size(inst)?;
    let ws = subset_withinss(inst, include_depot);
    let mut best = f64::INFINITY;
    let mut witness: Vec<u32> = Vec::new();
    let enumerated = for_each_partition(inst, Some(k), |blocks| {
        let v: f64 = blocks.iter().map(|&b| ws[b as usize]).sum();
        if v < best - TIE_EPS {
            best = v;
            witness = blocks.to_vec();
        }
    });
    if witness.is_empty() {
        return Err(OracleError::Infeasible);
    }
    let blocks = witness.iter().map(|&b| mask_ids(b)).collect();
    let sol = ClusterSolution::from_partition(inst, blocks, include_depot);
    Ok(ExactResult { value: sol.withinss, witness: sol, enumerated })
}

/// Cheapest exact cover of the customers by relink candidates, found by
/// enumerating every pairwise-disjoint subset of candidates.
pub fn relink_by_enumeration(model: &RelinkModel) -> Option<(Vec<usize>, f64)> {
    fn rec(
        model: &RelinkModel,
        i: usize,
        covered: &mut CustomerSet,
        cost: f64,
        chosen: &mut Vec<usize>,
        best: &mut Option<(Vec<usize>, f64)>,
    ) {
        if i == model.candidates.len() {
            if covered.len() == model.n_customers && best.as_ref().is_none_or(|b| cost < b.1) {
                *best = Some((chosen.clone(), cost));
            }
            return;
        }
        rec(model, i + 1, covered, cost, chosen, best);
        let c = &model.candidates[i];
        if c.customers.is_disjoint(covered) {
            covered.union_with(&c.customers);
            chosen.push(i);
            rec(model, i + 1, covered, cost + c.delta, chosen, best);
            chosen.pop();
            covered.difference_with(&c.customers);
        }
    }
    let mut best = None;
    rec(model, 0, &mut CustomerSet::new(model.n_customers + 1), 0.0, &mut Vec::new(), &mut best);
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{generate_small_instance, DistancePolicy};
    use crate::testutil::four_customer;
    use crate::validate::{validate_clusters, validate_solution};
    use alloc::vec;

    fn permutations_min(dm: &DistanceMatrix, block: &[usize]) -> f64 {
        let mut best = f64::INFINITY;
        let mut p = block.to_vec();
        // Heap's algorithm
        let n = p.len();
        let mut c = vec![0; n];
        best = best.min(dm.tour_cost(&p));
        let mut i = 0;
        while i < n {
            if c[i] < i {
                if i % 2 == 0 {
                    p.swap(0, i);
                } else {
                    p.swap(c[i], i);
                }
                best = best.min(dm.tour_cost(&p));
                c[i] += 1;
                i = 0;
            } else {
                c[i] = 0;
                i += 1;
            }
        }
        best
    }

    #[test]
    fn price_route_small_cases() {
        let inst = four_customer();
        let dm = distance_matrix(&inst);
        assert!((price_route(&dm, &[3]) - 2.0 * dm.get(0, 3)).abs() < 1e-12);
        let two = dm.get(0, 1) + dm.get(1, 4) + dm.get(4, 0);
        assert!((price_route(&dm, &[1, 4]) - two).abs() < 1e-12);
        assert!((price_route(&dm, &[4, 1]) - two).abs() < 1e-12);
    }

    #[test]
    fn price_route_matches_permutations() {
        for seed in 0..15 {
            let inst = generate_small_instance(7, seed).unwrap();
            let dm = distance_matrix(&inst);
            let block: Vec<usize> = (1..=6).collect();
            assert!((price_route(&dm, &block) - permutations_min(&dm, &block)).abs() < 1e-9);
        }
    }

    #[test]
    fn subset_tours_agree_with_price_route() {
        let inst = generate_small_instance(8, 9).unwrap();
        let dm = distance_matrix(&inst);
        let tours = SubsetTours::new(&dm, 8);
        for mask in [1u32, 5, 0b1011_0110, 0xff] {
            let ids = mask_ids(mask);
            assert!((tours.cost(mask) - price_route(&dm, &ids)).abs() < 1e-9);
            let seq = tours.sequence(mask, &dm);
            assert!((dm.tour_cost(&seq) - tours.cost(mask)).abs() < 1e-9);
        }
    }

    #[test]
    fn partition_counts_are_bell_and_stirling() {
        // capacity never binds
        let pts: Vec<(Point, f64)> = (0..6).map(|i| (Point::new(i as f64, 1.0), 0.0)).collect();
        let inst = Instance::new("free", Point::new(0.0, 0.0), &pts, 1.0, DistancePolicy::Exact).unwrap();
        assert_eq!(for_each_partition(&inst, None, |_| {}), 203);
        assert_eq!(for_each_partition(&inst, Some(2), |_| {}), 31);
        assert_eq!(for_each_partition(&inst, Some(3), |_| {}), 90);
    }

    #[test]
    fn four_customer_exact_cvrp() {
        let inst = four_customer();
        let r = exact_cvrp(&inst, None).unwrap();
        assert_eq!(r.witness.partition(), vec![vec![1], vec![2, 3, 4]]);
        let s5 = libm::sqrt(5.0);
        assert!((r.value - (2.0 * s5 + libm::sqrt(8.0) + 2.0 * s5 + 6.0)).abs() < 1e-9);
        assert!(validate_solution(&inst, &r.witness).is_empty());
    }

    #[test]
    fn four_customer_exact_ccbc() {
        let inst = four_customer();
        let r = exact_ccbc(&inst, 2, false).unwrap();
        assert_eq!(r.witness.canonical_partition(), vec![vec![1, 2], vec![3, 4]]);
        assert!((r.value - 3.0).abs() < 1e-12);
        let d = exact_ccbc(&inst, 2, true).unwrap();
        assert_eq!(d.witness.canonical_partition(), vec![vec![1, 2], vec![3, 4]]);
        assert!((d.value - 24.0).abs() < 1e-9);
        assert!(validate_clusters(&inst, &d.witness).is_empty());
    }

    #[test]
    fn single_customer_and_singletons() {
        let pts = [(Point::new(3.0, 4.0), 2.0)];
        let inst = Instance::new("one", Point::new(0.0, 0.0), &pts, 5.0, DistancePolicy::Exact).unwrap();
        let r = exact_cvrp(&inst, None).unwrap();
        assert_eq!(r.witness.k(), 1);
        assert!((r.value - 10.0).abs() < 1e-12);

        let inst = generate_small_instance(5, 1).unwrap();
        let n = inst.n_customers();
        assert_eq!(exact_ccbc(&inst, n, false).unwrap().value, 0.0);
        let with_depot = exact_ccbc(&inst, n, true).unwrap().value;
        let expected: f64 = inst.customer_ids().map(|c| inst.pos(c).dist_sq(inst.depot()) / 2.0).sum();
        assert!((with_depot - expected).abs() < 1e-9);
    }

    #[test]
    fn too_large_and_infeasible() {
        let pts: Vec<(Point, f64)> = (0..11).map(|i| (Point::new(i as f64, 0.0), 1.0)).collect();
        let big = Instance::new("big", Point::new(0.0, 0.0), &pts, 20.0, DistancePolicy::Exact).unwrap();
        assert_eq!(exact_cvrp(&big, None).unwrap_err(), OracleError::TooLarge { n: 11 });
        let inst = four_customer();
        assert_eq!(exact_ccbc(&inst, 1, false).unwrap_err(), OracleError::Infeasible);
    }

    #[test]
    fn k_restricted_never_beats_free_optimum() {
        for seed in 0..10 {
            let inst = generate_small_instance(6, seed).unwrap();
            let free = exact_cvrp(&inst, None).unwrap();
            let k = free.witness.k();
            let fixed = exact_cvrp(&inst, Some(k)).unwrap();
            assert!((fixed.value - free.value).abs() < 1e-9);
            if let Ok(more) = exact_cvrp(&inst, Some(k + 1)) {
                assert!(more.value >= free.value - 1e-9);
            }
        }
    }
}
