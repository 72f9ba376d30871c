//! Feasibility checks recomputed from the instance and raw sequences only.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::ccbc::ClusterSolution;
use crate::instance::{DistancePolicy, Instance};
use crate::routing::Solution;

/// Absolute cost tolerance under exact euclidean distances.
pub const COST_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ViolationKind {
    MissingCustomer,
    DuplicatedCustomer,
    CapacityExceeded,
    CostMismatch,
    BadDepotAnchor,
}

impl ViolationKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ViolationKind::MissingCustomer => "missing-customer",
            ViolationKind::DuplicatedCustomer => "duplicated-customer",
            ViolationKind::CapacityExceeded => "capacity-exceeded",
            ViolationKind::CostMismatch => "cost-mismatch",
            ViolationKind::BadDepotAnchor => "bad-depot-anchor",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub kind: ViolationKind,
    /// Route or cluster index, `None` for solution-wide checks.
    pub route: Option<usize>,
    pub customer: Option<usize>,
    /// Excess load, cost difference or occurrence count, depending on kind.
    pub magnitude: f64,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.kind.as_str())?;
        if let Some(r) = self.route {
            write!(f, " route={r}")?;
        }
        if let Some(c) = self.customer {
            write!(f, " customer={c}")?;
        }
        write!(f, " magnitude={}", self.magnitude)
    }
}

fn edge(inst: &Instance, a: usize, b: usize) -> f64 {
    let (p, q) = (inst.pos(a), inst.pos(b));
    let (dx, dy) = (p.x - q.x, p.y - q.y);
    let d = libm::sqrt(dx * dx + dy * dy);
    match inst.distance_policy {
        DistancePolicy::Exact => d,
        DistancePolicy::Rounded => libm::floor(d + 0.5),
    }
}

fn cost_matches(inst: &Instance, stored: f64, actual: f64) -> bool {
    match inst.distance_policy {
        DistancePolicy::Exact => libm::fabs(stored - actual) <= COST_TOLERANCE,
        DistancePolicy::Rounded => stored == actual,
    }
}

fn over_capacity(inst: &Instance, load: f64) -> Option<f64> {
    let q = inst.capacity();
    (load > q * (1.0 + 1e-9)).then_some(load - q)
}

/// Coverage checks shared by routes and clusters: bad ids, duplicates,
/// missing customers.
fn coverage<'a>(
    inst: &Instance,
    groups: impl Iterator<Item = &'a [usize]>,
    out: &mut Vec<Violation>,
) {
    let n = inst.n_customers();
    let mut seen = vec![0usize; n + 1];
    for (r, g) in groups.enumerate() {
        if g.is_empty() {
            out.push(Violation {
                kind: ViolationKind::BadDepotAnchor,
                route: Some(r),
                customer: None,
                magnitude: 0.0,
            });
        }
        for &c in g {
            if c == 0 || c > n {
                out.push(Violation {
                    kind: ViolationKind::BadDepotAnchor,
                    route: Some(r),
                    customer: Some(c),
                    magnitude: 0.0,
                });
            } else {
                seen[c] += 1;
            }
        }
    }
    for c in 1..=n {
        match seen[c] {
            0 => out.push(Violation {
                kind: ViolationKind::MissingCustomer,
                route: None,
                customer: Some(c),
                magnitude: 0.0,
            }),
            1 => {}
            k => out.push(Violation {
                kind: ViolationKind::DuplicatedCustomer,
                route: None,
                customer: Some(c),
                magnitude: k as f64,
            }),
        }
    }
}

fn demand_sum(inst: &Instance, ids: &[usize]) -> f64 {
    ids.iter()
        .filter(|&&c| c >= 1 && c <= inst.n_customers())
        .map(|&c| inst.demand(c))
        .sum()
}

/// Checks coverage, loads, per-route and total cost, and depot anchoring.
/// An empty result means the solution is feasible.
pub fn validate_solution(inst: &Instance, sol: &Solution) -> Vec<Violation> {
    let mut out = Vec::new();
    coverage(inst, sol.routes.iter().map(|r| r.sequence.as_slice()), &mut out);
    let n = inst.n_customers();
    let mut total = 0.0;
    for (r, route) in sol.routes.iter().enumerate() {
        let seq = &route.sequence;
        let load = demand_sum(inst, seq);
        if let Some(excess) = over_capacity(inst, load) {
            out.push(Violation {
                kind: ViolationKind::CapacityExceeded,
                route: Some(r),
                customer: None,
                magnitude: excess,
            });
        }
        if seq.iter().any(|&c| c == 0 || c > n) {
            continue;
        }
        let mut cost = 0.0;
        let mut prev = 0;
        for &c in seq {
            cost += edge(inst, prev, c);
            prev = c;
        }
        if !seq.is_empty() {
            cost += edge(inst, prev, 0);
        }
        total += cost;
        if !cost_matches(inst, route.cost, cost) {
            out.push(Violation {
                kind: ViolationKind::CostMismatch,
                route: Some(r),
                customer: None,
                magnitude: route.cost - cost,
            });
        }
    }
    if !cost_matches(inst, sol.total_cost, total) {
        out.push(Violation {
            kind: ViolationKind::CostMismatch,
            route: None,
            customer: None,
            magnitude: sol.total_cost - total,
        });
    }
    out
}

/// Checks coverage, cluster loads, and the stored withinss against the
/// block means.
pub fn validate_clusters(inst: &Instance, cs: &ClusterSolution) -> Vec<Violation> {
    let mut out = Vec::new();
    coverage(inst, cs.clusters.iter().map(Vec::as_slice), &mut out);
    let n = inst.n_customers();
    let mut total = 0.0;
    for (k, block) in cs.clusters.iter().enumerate() {
        if let Some(excess) = over_capacity(inst, demand_sum(inst, block)) {
            out.push(Violation {
                kind: ViolationKind::CapacityExceeded,
                route: Some(k),
                customer: None,
                magnitude: excess,
            });
        }
        let mut pts: Vec<(f64, f64)> = block
            .iter()
            .filter(|&&c| c >= 1 && c <= n)
            .map(|&c| (inst.pos(c).x, inst.pos(c).y))
            .collect();
        if cs.includes_depot {
            pts.push((inst.depot().x, inst.depot().y));
        }
        if pts.is_empty() {
            continue;
        }
        let m = pts.len() as f64;
        let cx = pts.iter().map(|p| p.0).sum::<f64>() / m;
        let cy = pts.iter().map(|p| p.1).sum::<f64>() / m;
        total += pts
            .iter()
            .map(|p| (p.0 - cx) * (p.0 - cx) + (p.1 - cy) * (p.1 - cy))
            .sum::<f64>();
    }
    if libm::fabs(cs.withinss - total) > COST_TOLERANCE * total.max(1.0) {
        out.push(Violation {
            kind: ViolationKind::CostMismatch,
            route: None,
            customer: None,
            magnitude: cs.withinss - total,
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::distance_matrix;
    use crate::routing::Route;
    use crate::testutil::four_customer;
    use alloc::vec;

    fn two_routes() -> (Instance, Solution) {
        let inst = four_customer();
        let dm = distance_matrix(&inst);
        let sol = Solution::from_routes(vec![
            Route::new(vec![1], &inst, &dm),
            Route::new(vec![2, 3, 4], &inst, &dm),
        ]);
        (inst, sol)
    }

    #[test]
    fn feasible_solution_passes() {
        let (inst, sol) = two_routes();
        assert!(validate_solution(&inst, &sol).is_empty());
    }

    #[test]
    fn duplicate_customer_reported_once() {
        let (inst, mut sol) = two_routes();
        sol.routes[0].sequence = vec![1, 2];
        let v = validate_solution(&inst, &sol);
        let dups: Vec<_> = v.iter().filter(|v| v.kind == ViolationKind::DuplicatedCustomer).collect();
        assert_eq!(dups.len(), 1);
        assert_eq!(dups[0].customer, Some(2));
    }

    #[test]
    fn cost_off_by_one() {
        let (inst, mut sol) = two_routes();
        sol.routes[1].cost += 1.0;
        sol.total_cost += 1.0;
        let v = validate_solution(&inst, &sol);
        assert!(v
            .iter()
            .any(|v| v.kind == ViolationKind::CostMismatch && v.route == Some(1) && (v.magnitude - 1.0).abs() < 1e-12));
    }

    #[test]
    fn missing_and_overload() {
        let (inst, mut sol) = two_routes();
        sol.routes[1].sequence = vec![2, 4, 1];
        sol.routes.remove(0);
        let v = validate_solution(&inst, &sol);
        assert!(v.iter().any(|v| v.kind == ViolationKind::MissingCustomer && v.customer == Some(3)));
        assert!(v
            .iter()
            .any(|v| v.kind == ViolationKind::CapacityExceeded && (v.magnitude - 5.0).abs() < 1e-12));
    }

    #[test]
    fn depot_or_empty_route_flagged() {
        let (inst, mut sol) = two_routes();
        sol.routes.push(Route { sequence: vec![], cost: 0.0, load: 0.0 });
        sol.routes[0].sequence = vec![0, 1];
        let v = validate_solution(&inst, &sol);
        assert_eq!(v.iter().filter(|v| v.kind == ViolationKind::BadDepotAnchor).count(), 2);
    }

    #[test]
    fn cluster_checks() {
        let inst = four_customer();
        let good = ClusterSolution::from_partition(&inst, vec![vec![1, 2], vec![3, 4]], false);
        assert!(validate_clusters(&inst, &good).is_empty());

        let mut hole = good.clone();
        hole.clusters[1] = vec![4];
        assert!(validate_clusters(&inst, &hole)
            .iter()
            .any(|v| v.kind == ViolationKind::MissingCustomer && v.customer == Some(3)));

        let over = ClusterSolution::from_partition(&inst, vec![vec![1, 4], vec![2, 3]], false);
        assert!(validate_clusters(&inst, &over)
            .iter()
            .any(|v| v.kind == ViolationKind::CapacityExceeded));

        let mut stale = good;
        stale.withinss += 0.5;
        assert!(validate_clusters(&inst, &stale)
            .iter()
            .any(|v| v.kind == ViolationKind::CostMismatch));
    }

    #[test]
    fn rounded_policy_requires_exact_equality() {
        let pts = [(crate::Point::new(3.0, 4.0), 1.0)];
        let inst = Instance::new("r", crate::Point::new(0.0, 0.0), &pts, 5.0, DistancePolicy::Rounded).unwrap();
        let mut sol = Solution::from_routes(vec![Route { sequence: vec![1], cost: 10.0, load: 1.0 }]);
        assert!(validate_solution(&inst, &sol).is_empty());
        sol.routes[0].cost = 10.0 + 1e-9;
        sol.total_cost = sol.routes[0].cost;
        assert!(!validate_solution(&inst, &sol).is_empty());
    }
}
