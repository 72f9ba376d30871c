//! Constrained centroid-based clustering.
//!
//! A k-means variant with a capacity cannot-link rule: in every iteration
//! each cluster takes its candidate customers in decreasing order of an
//! assignment priority until the vehicle capacity is reached, and rejected
//! customers spill over to their next-nearest cluster. Centroids are then
//! recomputed as cluster means. Starts are seeded independently and the
//! number of clusters is raised from `ceil(sum(q) / Q)` whenever a start
//! cannot place every customer.

use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use rand::seq::index;
use rand::Rng as _;

use crate::instance::{Instance, Point};
use crate::rng;

/// Relative slack on capacity comparisons for real-valued demands.
pub(crate) const CAPACITY_EPS: f64 = 1e-9;

pub(crate) fn fits(load: f64, capacity: f64) -> bool {
    load <= capacity * (1.0 + CAPACITY_EPS)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CentroidSet(pub Vec<Point>);

impl CentroidSet {
    pub fn k(&self) -> usize {
        self.0.len()
    }

    pub fn points(&self) -> &[Point] {
        &self.0
    }
}

/// How initial centroids are chosen for each start.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Initializer {
    /// K distinct customers sampled uniformly without replacement.
    RandomMultistart,
    /// D^2 sampling (k-means++).
    KMeansPlusPlus,
    /// Customers sorted by `x + y`, split into K contiguous shards, shard means.
    NaiveSharding,
}

/// Priority used to order candidate customers of a cluster.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AssignmentMetric {
    /// `q / d`: near customers with high demand first.
    Customized,
    /// Nearest first, demands ignored.
    Classical,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CcbcConfig {
    pub n_starts: usize,
    /// Stop when the relative withinss change drops below this value.
    pub gap_limit: f64,
    pub max_inner_iterations: usize,
    pub seed: u64,
    pub initializer: Initializer,
    pub metric: AssignmentMetric,
}

impl Default for CcbcConfig {
    fn default() -> Self {
        Self {
            n_starts: 100,
            gap_limit: 1e-4,
            max_inner_iterations: 100,
            seed: 0,
            initializer: Initializer::RandomMultistart,
            metric: AssignmentMetric::Customized,
        }
    }
}

/// A capacity-feasible partition of the customers.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterSolution {
    /// Customer ids per cluster, ascending within a cluster.
    pub clusters: Vec<Vec<usize>>,
    pub centroids: CentroidSet,
    pub withinss: f64,
    pub loads: Vec<f64>,
    /// Whether the depot point is part of every cluster's centroid and
    /// withinss (only used by the exact connection-study oracle).
    pub includes_depot: bool,
    /// Index of the start that produced this solution.
    pub start: usize,
}

impl ClusterSolution {
    /// Builds a solution from a partition, with centroids as block means.
    pub fn from_partition(
        inst: &Instance,
        clusters: Vec<Vec<usize>>,
        includes_depot: bool,
    ) -> Self {
        let mut centroids = Vec::with_capacity(clusters.len());
        let mut loads = Vec::with_capacity(clusters.len());
        let mut withinss = 0.0;
        for block in &clusters {
            let pts = block_points(inst, block, includes_depot);
            let mu = mean(&pts).unwrap_or(inst.depot());
            withinss += pts.iter().map(|p| p.dist_sq(mu)).sum::<f64>();
            centroids.push(mu);
            loads.push(block.iter().map(|&c| inst.demand(c)).sum());
        }
        Self {
            clusters,
            centroids: CentroidSet(centroids),
            withinss,
            loads,
            includes_depot,
            start: 0,
        }
    }

    pub fn k(&self) -> usize {
        self.clusters.len()
    }

    /// Canonical form: blocks sorted by their smallest customer.
    pub fn canonical_partition(&self) -> Vec<Vec<usize>> {
        canonical(&self.clusters)
    }
}

pub(crate) fn canonical(blocks: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = blocks
        .iter()
        .filter(|b| !b.is_empty())
        .map(|b| {
            let mut b = b.clone();
            b.sort_unstable();
            b
        })
        .collect();
    out.sort();
    out
}

fn block_points(inst: &Instance, block: &[usize], includes_depot: bool) -> Vec<Point> {
    let mut pts: Vec<Point> = block.iter().map(|&c| inst.pos(c)).collect();
    if includes_depot {
        pts.push(inst.depot());
    }
    pts
}

fn mean(pts: &[Point]) -> Option<Point> {
    if pts.is_empty() {
        return None;
    }
    let n = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(sx, sy), p| (sx + p.x, sy + p.y));
    Some(Point::new(sx / n, sy / n))
}

/// `ceil(sum(q) / Q)`, at least 1.
pub fn lower_bound_k(inst: &Instance) -> usize {
    let ratio = inst.total_demand() / inst.capacity();
    (libm::ceil(ratio - CAPACITY_EPS) as usize).max(1)
}

/// `q / d(c, mu)`, positive infinity when the customer sits on the centroid.
pub fn assignment_metric(demand: f64, distance: f64) -> f64 {
    if distance == 0.0 {
        f64::INFINITY
    } else {
        demand / distance
    }
}

fn priority(metric: AssignmentMetric, demand: f64, distance: f64) -> f64 {
    match metric {
        AssignmentMetric::Customized => assignment_metric(demand, distance),
        AssignmentMetric::Classical => -distance,
    }
}

/// One capacity-guarded assignment pass. Returns clusters (possibly empty)
/// or `None` when a customer is rejected by every cluster.
fn assign(inst: &Instance, centroids: &[Point], metric: AssignmentMetric) -> Option<Vec<Vec<usize>>> {
    let k = centroids.len();
    let n = inst.n_customers();
    let q_max = inst.capacity();

    // dist[c][j] and each customer's clusters by increasing distance
    let mut dist = vec![0.0; (n + 1) * k];
    let mut rank: Vec<Vec<usize>> = vec![Vec::new(); n + 1];
    for c in inst.customer_ids() {
        let p = inst.pos(c);
        for (j, mu) in centroids.iter().enumerate() {
            dist[c * k + j] = p.dist(*mu);
        }
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| {
            dist[c * k + a]
                .total_cmp(&dist[c * k + b])
                .then(a.cmp(&b))
        });
        rank[c] = order;
    }

    let mut pending: Vec<Vec<usize>> = vec![Vec::new(); k];
    for c in inst.customer_ids() {
        pending[rank[c][0]].push(c);
    }
    let mut rank_pos = vec![0usize; n + 1];
    let mut processed = vec![false; k];
    let mut load = vec![0.0; k];
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); k];

    for j in 0..k {
        let mut cand = core::mem::take(&mut pending[j]);
        cand.sort_by(|&a, &b| {
            let pa = priority(metric, inst.demand(a), dist[a * k + j]);
            let pb = priority(metric, inst.demand(b), dist[b * k + j]);
            pb.total_cmp(&pa).then(a.cmp(&b))
        });
        processed[j] = true;
        for c in cand {
            // place c at cluster j, cascading down its distance ranking
            let mut target = j;
            loop {
                let q = inst.demand(c);
                if fits(load[target] + q, q_max) {
                    load[target] += q;
                    members[target].push(c);
                    break;
                }
                rank_pos[c] += 1;
                if rank_pos[c] >= k {
                    return None;
                }
                target = rank[c][rank_pos[c]];
                if !processed[target] {
                    pending[target].push(c);
                    break;
                }
            }
        }
    }
    for m in &mut members {
        m.sort_unstable();
    }
    Some(members)
}

fn withinss_of(inst: &Instance, clusters: &[Vec<usize>], centroids: &[Point]) -> f64 {
    clusters
        .iter()
        .zip(centroids)
        .map(|(b, mu)| b.iter().map(|&c| inst.pos(c).dist_sq(*mu)).sum::<f64>())
        .sum()
}

/// Runs the inner clustering loop from the given initial centroids.
///
/// Returns `None` when the very first assignment is infeasible. If a later
/// iteration becomes infeasible the last feasible iterate is returned.
/// Empty clusters are dropped from the result.
pub fn ccbc_single_start(
    inst: &Instance,
    init: &CentroidSet,
    cfg: &CcbcConfig,
) -> Option<ClusterSolution> {
    let mut centroids = init.0.clone();
    let mut prev = f64::INFINITY;
    let mut last: Option<(Vec<Vec<usize>>, Vec<Point>, f64)> = None;

    for _ in 0..cfg.max_inner_iterations.max(1) {
        let Some(clusters) = assign(inst, &centroids, cfg.metric) else {
            break;
        };
        let updated: Vec<Point> = clusters
            .iter()
            .zip(&centroids)
            .map(|(b, old)| {
                let pts: Vec<Point> = b.iter().map(|&c| inst.pos(c)).collect();
                mean(&pts).unwrap_or(*old)
            })
            .collect();
        let w = withinss_of(inst, &clusters, &updated);
        let gap = libm::fabs(prev - w) / w.max(1.0);
        let unchanged = last.as_ref().is_some_and(|(c, _, _)| *c == clusters);
        centroids = updated.clone();
        last = Some((clusters, updated, w));
        prev = w;
        if unchanged || gap < cfg.gap_limit {
            break;
        }
    }

    let (clusters, centroids, withinss) = last?;
    let mut blocks = Vec::new();
    let mut mus = Vec::new();
    let mut loads = Vec::new();
    for (b, mu) in clusters.into_iter().zip(centroids) {
        if b.is_empty() {
            continue;
        }
        loads.push(b.iter().map(|&c| inst.demand(c)).sum());
        blocks.push(b);
        mus.push(mu);
    }
    Some(ClusterSolution {
        clusters: blocks,
        centroids: CentroidSet(mus),
        withinss,
        loads,
        includes_depot: false,
        start: 0,
    })
}

/// Initial centroids for `k` clusters.
pub fn initial_centroids(
    inst: &Instance,
    k: usize,
    initializer: Initializer,
    rng: &mut rng::Rng,
) -> CentroidSet {
    let n = inst.n_customers();
    let k = k.clamp(1, n);
    match initializer {
        Initializer::RandomMultistart => {
            let picks = index::sample(rng, n, k);
            CentroidSet(picks.iter().map(|i| inst.pos(i + 1)).collect())
        }
        Initializer::KMeansPlusPlus => {
            let mut chosen = vec![rng.gen_range(1..=n)];
            let mut d2: Vec<f64> = (0..=n)
                .map(|c| if c == 0 { 0.0 } else { inst.pos(c).dist_sq(inst.pos(chosen[0])) })
                .collect();
            while chosen.len() < k {
                let total: f64 = d2.iter().sum();
                let next = if total > 0.0 {
                    let mut r = rng.gen_range(0.0..total);
                    let mut pick = n;
                    for c in 1..=n {
                        if d2[c] > 0.0 && r < d2[c] {
                            pick = c;
                            break;
                        }
                        r -= d2[c];
                    }
                    pick
                } else {
                    // all remaining customers coincide with a chosen centroid
                    let free: Vec<usize> = (1..=n).filter(|c| !chosen.contains(c)).collect();
                    free[rng.gen_range(0..free.len())]
                };
                chosen.push(next);
                let p = inst.pos(next);
                for c in 1..=n {
                    d2[c] = d2[c].min(inst.pos(c).dist_sq(p));
                }
            }
            CentroidSet(chosen.into_iter().map(|c| inst.pos(c)).collect())
        }
        Initializer::NaiveSharding => {
            let mut ids: Vec<usize> = inst.customer_ids().collect();
            ids.sort_by(|&a, &b| {
                let (pa, pb) = (inst.pos(a), inst.pos(b));
                (pa.x + pa.y).total_cmp(&(pb.x + pb.y)).then(a.cmp(&b))
            });
            let mut out = Vec::with_capacity(k);
            let base = n / k;
            let extra = n % k;
            let mut at = 0;
            for s in 0..k {
                let len = base + usize::from(s < extra);
                let pts: Vec<Point> = ids[at..at + len].iter().map(|&c| inst.pos(c)).collect();
                out.push(mean(&pts).unwrap_or(inst.depot()));
                at += len;
            }
            CentroidSet(out)
        }
    }
}

/// One start of the multi-start procedure: starting at
/// [`lower_bound_k`], draws initial centroids from the start's own random
/// stream and raises K by one after every infeasible attempt. At K = N the
/// singleton clustering is always feasible.
pub fn ccbc_start(inst: &Instance, cfg: &CcbcConfig, start: usize) -> ClusterSolution {
    let n = inst.n_customers();
    let mut rng = rng::stream(cfg.seed, start as u64);
    let mut k = lower_bound_k(inst).min(n);
    loop {
        let init = initial_centroids(inst, k, cfg.initializer, &mut rng);
        if let Some(mut sol) = ccbc_single_start(inst, &init, cfg) {
            sol.start = start;
            return sol;
        }
        if k >= n {
            let mut sol =
                ClusterSolution::from_partition(inst, inst.customer_ids().map(|c| vec![c]).collect(), false);
            sol.start = start;
            return sol;
        }
        k += 1;
    }
}

/// All `n_starts` clusterings, ordered by start index.
pub fn ccbc_multistart(inst: &Instance, cfg: &CcbcConfig) -> Vec<ClusterSolution> {
    (0..cfg.n_starts.max(1))
        .map(|s| ccbc_start(inst, cfg, s))
        .collect()
}

/// Lowest withinss, ties broken by start index.
pub fn best_by_withinss(solutions: &[ClusterSolution]) -> Option<&ClusterSolution> {
    solutions
        .iter()
        .min_by(|a, b| a.withinss.partial_cmp(&b.withinss).unwrap_or(Ordering::Equal))
}
