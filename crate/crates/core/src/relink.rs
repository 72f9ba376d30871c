//! Ruin and recreate: every route of every routed start is cut at every
//! position into a depot-prefix (left) and a depot-suffix (right) piece.
//! Left and right pieces from the whole pool are joined pairwise and the
//! cheapest exact cover of the customers by joins is found with a
//! set-partitioning branch-and-bound.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::bitset::CustomerSet;
use crate::ccbc::{self, ccbc_start, fits, CcbcConfig, ClusterSolution};
use crate::instance::{distance_matrix, DistanceMatrix, Instance};
use crate::routing::{route_all_cached, Route, RoutingConfig, Solution, TspCache};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Side {
    /// Starts at the depot.
    Left,
    /// Ends at the depot.
    Right,
}

/// Where a piece was cut: solution index, route index, cut position.
pub type Origin = (usize, usize, usize);

#[derive(Debug, Clone, PartialEq)]
pub struct RoutePiece {
    pub side: Side,
    pub sequence: Vec<usize>,
    /// Cost along the piece including its single depot leg.
    pub cost: f64,
    pub load: f64,
    pub customers: CustomerSet,
    pub origins: Vec<Origin>,
}

impl RoutePiece {
    fn new(side: Side, sequence: Vec<usize>, inst: &Instance, dm: &DistanceMatrix) -> Self {
        let mut cost = 0.0;
        for w in sequence.windows(2) {
            cost += dm.get(w[0], w[1]);
        }
        match (side, sequence.first(), sequence.last()) {
            (Side::Left, Some(&f), _) => cost += dm.get(0, f),
            (Side::Right, _, Some(&l)) => cost += dm.get(l, 0),
            _ => {}
        }
        let load = sequence.iter().map(|&c| inst.demand(c)).sum();
        let customers = CustomerSet::from_ids(inst.n_customers() + 1, &sequence);
        Self { side, sequence, cost, load, customers, origins: Vec::new() }
    }

    pub fn is_empty(&self) -> bool {
        self.sequence.is_empty()
    }
}

/// Cuts all routes at all `m + 1` positions. Pieces are deduplicated by
/// `(side, sequence)`; each keeps every origin it was cut from.
pub fn cut_routes(
    inst: &Instance,
    dm: &DistanceMatrix,
    solutions: &[Solution],
) -> (Vec<RoutePiece>, Vec<RoutePiece>) {
    let mut left: Vec<RoutePiece> = Vec::new();
    let mut right: Vec<RoutePiece> = Vec::new();
    let mut left_ix: BTreeMap<Vec<usize>, usize> = BTreeMap::new();
    let mut right_ix: BTreeMap<Vec<usize>, usize> = BTreeMap::new();
    for (s, sol) in solutions.iter().enumerate() {
        for (r, route) in sol.routes.iter().enumerate() {
            let seq = &route.sequence;
            for p in 0..=seq.len() {
                let origin = (s, r, p);
                for (side, part, pieces, index) in [
                    (Side::Left, &seq[..p], &mut left, &mut left_ix),
                    (Side::Right, &seq[p..], &mut right, &mut right_ix),
                ] {
                    let i = *index.entry(part.to_vec()).or_insert_with(|| {
                        pieces.push(RoutePiece::new(side, part.to_vec(), inst, dm));
                        pieces.len() - 1
                    });
                    pieces[i].origins.push(origin);
                }
            }
        }
    }
    (left, right)
}

/// A retained join of left piece `o` with right piece `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct JoinCandidate {
    pub o: usize,
    pub t: usize,
    pub delta: f64,
    pub tau: f64,
    pub customers: CustomerSet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PruneStats {
    pub pairs: usize,
    pub shared_customer: usize,
    pub over_capacity: usize,
    pub excess_slack: usize,
    pub empty_empty: usize,
    /// Joins dropped because a cheaper join covers the same customers.
    pub dominated: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelinkModel {
    pub left: Vec<RoutePiece>,
    pub right: Vec<RoutePiece>,
    /// One candidate per distinct customer set, sorted by that set.
    pub candidates: Vec<JoinCandidate>,
    pub n_customers: usize,
    pub capacity: f64,
    pub global_slack: f64,
    pub stats: PruneStats,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RelinkError {
    /// No retained candidate covers this customer.
    Uncovered(usize),
    /// Every customer is covered but no exact cover exists.
    NoCover,
    /// The node limit was hit before any cover was found.
    NodeLimit,
}

impl fmt::Display for RelinkError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RelinkError::Uncovered(c) => write!(f, "customer {c} is not covered by any join"),
            RelinkError::NoCover => write!(f, "joins admit no exact cover of the customers"),
            RelinkError::NodeLimit => write!(f, "node limit reached before a cover was found"),
        }
    }
}

impl core::error::Error for RelinkError {}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PruneOptions {
    /// Apply the global-slack rule `Q - tau_ot > K Q - sum(q)`.
    pub slack_rule: bool,
}

impl Default for PruneOptions {
    fn default() -> Self {
        Self { slack_rule: true }
    }
}

/// Enumerates all left/right pairs and keeps the feasible joins.
///
/// Drops pairs sharing a customer, pairs over capacity, pairs whose spare
/// capacity exceeds the global spare capacity `k Q - sum(q)`, and the
/// empty/empty pair. Among joins covering the same customer set only the
/// cheapest is kept.
pub fn prune_joins(
    inst: &Instance,
    dm: &DistanceMatrix,
    left: Vec<RoutePiece>,
    right: Vec<RoutePiece>,
    k: usize,
    opts: PruneOptions,
) -> Result<RelinkModel, (RelinkError, RelinkModel)> {
    let q = inst.capacity();
    let global_slack = k as f64 * q - inst.total_demand();
    let mut stats = PruneStats::default();
    let mut kept: Vec<JoinCandidate> = Vec::new();
    for (o, lp) in left.iter().enumerate() {
        for (t, rp) in right.iter().enumerate() {
            stats.pairs += 1;
            if lp.is_empty() && rp.is_empty() {
                stats.empty_empty += 1;
                continue;
            }
            if !lp.customers.is_disjoint(&rp.customers) {
                stats.shared_customer += 1;
                continue;
            }
            let tau = lp.load + rp.load;
            if !fits(tau, q) {
                stats.over_capacity += 1;
                continue;
            }
            if opts.slack_rule && q - tau > global_slack + 1e-9 * q {
                stats.excess_slack += 1;
                continue;
            }
            let a = lp.sequence.last().copied().unwrap_or(0);
            let b = rp.sequence.first().copied().unwrap_or(0);
            let delta = lp.cost + rp.cost + dm.get(a, b);
            let mut customers = lp.customers.clone();
            customers.union_with(&rp.customers);
            kept.push(JoinCandidate { o, t, delta, tau, customers });
        }
    }
    // empty-left and empty-right joins of the same route give the same set
    kept.sort_by(|x, y| {
        x.customers
            .cmp(&y.customers)
            .then(x.delta.total_cmp(&y.delta))
            .then((x.o, x.t).cmp(&(y.o, y.t)))
    });
    let before = kept.len();
    kept.dedup_by(|later, first| later.customers == first.customers);
    stats.dominated = before - kept.len();

    let model = RelinkModel {
        left,
        right,
        candidates: kept,
        n_customers: inst.n_customers(),
        capacity: q,
        global_slack,
        stats,
    };
    match model.first_uncovered() {
        Some(c) => Err((RelinkError::Uncovered(c), model)),
        None => Ok(model),
    }
}

impl RelinkModel {
    fn first_uncovered(&self) -> Option<usize> {
        let mut all = CustomerSet::new(self.n_customers + 1);
        for c in &self.candidates {
            all.union_with(&c.customers);
        }
        (1..=self.n_customers).find(|&c| !all.contains(c))
    }

    /// Index of the candidate covering exactly `ids`.
    pub fn find(&self, ids: &[usize]) -> Option<usize> {
        let key = CustomerSet::from_ids(self.n_customers + 1, ids);
        self.candidates
            .binary_search_by(|c| c.customers.cmp(&key))
            .ok()
    }

    /// Keeps only the candidates at `indices` (ascending order preserved).
    pub fn retain(&mut self, indices: &[usize]) {
        let mut keep = vec![false; self.candidates.len()];
        for &i in indices {
            keep[i] = true;
        }
        let mut i = 0;
        self.candidates.retain(|_| {
            i += 1;
            keep[i - 1]
        });
    }

    /// Joined customer sequence of candidate `i`.
    pub fn sequence(&self, i: usize) -> Vec<usize> {
        let c = &self.candidates[i];
        let mut seq = self.left[c.o].sequence.clone();
        seq.extend_from_slice(&self.right[c.t].sequence);
        seq
    }

    /// Plain-text listing: one `z o t delta tau` line per candidate, then
    /// one coverage row per customer listing the candidates covering it.
    pub fn write_listing(&self, out: &mut impl fmt::Write) -> fmt::Result {
        writeln!(out, "# z o t delta tau")?;
        for (z, c) in self.candidates.iter().enumerate() {
            writeln!(out, "{z} {} {} {} {}", c.o, c.t, c.delta, c.tau)?;
        }
        writeln!(out, "# cover customer: z...")?;
        for cust in 1..=self.n_customers {
            write!(out, "cover {cust}:")?;
            for (z, c) in self.candidates.iter().enumerate() {
                if c.customers.contains(cust) {
                    write!(out, " {z}")?;
                }
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelinkSolution {
    /// Chosen candidate indices, ascending.
    pub chosen: Vec<usize>,
    pub cost: f64,
    pub nodes: u64,
    /// False when the node limit stopped the search.
    pub proven_optimal: bool,
}

const EPS: f64 = 1e-9;

/// Working column: reduced cost under the Lagrangian prices.
struct Col {
    idx: usize,
    delta: f64,
    rc: f64,
    customers: CustomerSet,
}

struct Search {
    cols: Vec<Col>,
    price: Vec<f64>,
    n: usize,
    best_cost: f64,
    best: Option<Vec<usize>>,
    nodes: u64,
    node_limit: Option<u64>,
    stopped: bool,
}

impl Search {
    /// `compat` lists the columns disjoint from `covered`, ascending by
    /// reduced cost.
    fn dfs(&mut self, covered: &mut CustomerSet, uncovered: usize, cost: f64, compat: &[u32], chosen: &mut Vec<usize>) {
        if self.stopped {
            return;
        }
        self.nodes += 1;
        if self.node_limit.is_some_and(|l| self.nodes > l) {
            self.stopped = true;
            return;
        }
        if uncovered == 0 {
            if cost < self.best_cost - EPS {
                self.best_cost = cost;
                let mut b: Vec<usize> = chosen.iter().map(|&j| self.cols[j].idx).collect();
                b.sort_unstable();
                self.best = Some(b);
            }
            return;
        }
        let mut lb = cost;
        for c in 1..=self.n {
            if !covered.contains(c) {
                lb += self.price[c];
            }
        }
        let mut count = vec![0u32; self.n + 1];
        let mut here: Vec<u32> = Vec::with_capacity(compat.len());
        for &j in compat {
            let col = &self.cols[j as usize];
            if col.customers.is_disjoint(covered) {
                here.push(j);
                lb += col.rc.min(0.0);
                for c in col.customers.iter() {
                    count[c] += 1;
                }
            }
        }
        if lb >= self.best_cost - EPS {
            return;
        }
        // most constrained customer
        let mut branch = 0;
        for c in 1..=self.n {
            if !covered.contains(c) && (branch == 0 || count[c] < count[branch]) {
                branch = c;
            }
        }
        if count[branch] == 0 {
            return;
        }
        for &j in &here {
            let col = &self.cols[j as usize];
            if !col.customers.contains(branch) {
                continue;
            }
            // any completion using this column costs at least this much
            if lb + col.rc.max(0.0) >= self.best_cost - EPS {
                break;
            }
            let set = col.customers.clone();
            let (len, delta) = (set.len(), col.delta);
            covered.union_with(&set);
            chosen.push(j as usize);
            self.dfs(covered, uncovered - len, cost + delta, &here, chosen);
            chosen.pop();
            covered.difference_with(&set);
            if self.stopped {
                return;
            }
        }
    }
}

/// Subgradient ascent on the Lagrangian dual of the covering constraints,
/// started from each customer's cheapest per-customer share of a column.
/// Returns the best prices and the lower bound they prove.
fn lagrangian_prices(cols: &[JoinCandidate], n: usize, upper: f64) -> (Vec<f64>, f64) {
    let mut price = vec![f64::INFINITY; n + 1];
    price[0] = 0.0;
    for col in cols {
        let per = col.delta / col.customers.len() as f64;
        for c in col.customers.iter() {
            price[c] = price[c].min(per);
        }
    }
    let mut best = price.clone();
    let mut best_lb = f64::NEG_INFINITY;
    let mut theta = 1.0;
    let mut stall = 0;
    let mut g = vec![0i64; n + 1];
    for _ in 0..300 {
        let mut lb: f64 = price[1..].iter().sum();
        g.iter_mut().for_each(|x| *x = 1);
        for col in cols {
            let rc = col.delta - col.customers.iter().map(|c| price[c]).sum::<f64>();
            if rc < 0.0 {
                lb += rc;
                for c in col.customers.iter() {
                    g[c] -= 1;
                }
            }
        }
        if lb > best_lb + 1e-12 {
            best_lb = lb;
            best.clone_from(&price);
            stall = 0;
        } else {
            stall += 1;
            if stall >= 10 {
                theta *= 0.5;
                stall = 0;
            }
        }
        let norm: i64 = g[1..].iter().map(|x| x * x).sum();
        if norm == 0 || theta < 1e-4 {
            break;
        }
        let target = if upper.is_finite() { upper } else { lb + 0.05 * lb.abs() + 1.0 };
        if target - lb <= EPS {
            break;
        }
        let step = theta * (target - lb) / norm as f64;
        for c in 1..=n {
            price[c] += step * g[c] as f64;
        }
    }
    (best, best_lb)
}

/// Minimum-cost exact cover of the customers by candidates.
///
/// Depth-first branch-and-bound: branch on the uncovered customer with
/// the fewest compatible columns, try its columns by ascending reduced
/// cost, bound with Lagrangian prices from a root subgradient ascent.
/// With an incumbent, columns whose reduced cost alone closes the gap are
/// dropped at the root, and only strictly cheaper covers replace it.
/// `node_limit` bounds the search, in which case optimality is not
/// guaranteed.
pub fn solve_relink(
    model: &RelinkModel,
    incumbent: Option<&[usize]>,
    node_limit: Option<u64>,
) -> Result<RelinkSolution, RelinkError> {
    if let Some(c) = model.first_uncovered() {
        return Err(RelinkError::Uncovered(c));
    }
    let n = model.n_customers;
    let cand = &model.candidates;
    let (best_cost, best) = match incumbent {
        Some(ix) => {
            let mut ix = ix.to_vec();
            ix.sort_unstable();
            (ix.iter().map(|&j| cand[j].delta).sum::<f64>(), Some(ix))
        }
        None => (f64::INFINITY, None),
    };
    let (price, root_lb) = lagrangian_prices(cand, n, best_cost);
    let mut cols: Vec<Col> = cand
        .iter()
        .enumerate()
        .map(|(idx, c)| Col {
            idx,
            delta: c.delta,
            rc: c.delta - c.customers.iter().map(|i| price[i]).sum::<f64>(),
            customers: c.customers.clone(),
        })
        .filter(|c| root_lb + c.rc.max(0.0) < best_cost - EPS)
        .collect();
    cols.sort_by(|a, b| a.rc.total_cmp(&b.rc).then(a.idx.cmp(&b.idx)));
    let all: Vec<u32> = (0..cols.len() as u32).collect();
    let mut search = Search {
        cols,
        price,
        n,
        best_cost,
        best,
        nodes: 0,
        node_limit,
        stopped: false,
    };
    let mut covered = CustomerSet::new(n + 1);
    search.dfs(&mut covered, n, 0.0, &all, &mut Vec::new());
    let chosen = search.best.ok_or(if search.stopped {
        RelinkError::NodeLimit
    } else {
        RelinkError::NoCover
    })?;
    let cost = chosen.iter().map(|&j| cand[j].delta).sum();
    Ok(RelinkSolution { chosen, cost, nodes: search.nodes, proven_optimal: !search.stopped })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ctr3Config {
    pub ccbc: CcbcConfig,
    pub routing: RoutingConfig,
    /// Stop after routing (two-step variant).
    pub skip_relink: bool,
    pub prune: PruneOptions,
    pub node_limit: Option<u64>,
    /// Above this many retained joins the pool is trimmed.
    pub max_candidates: usize,
    /// Number of best routed solutions kept when trimming.
    pub trim_to: usize,
}

impl Default for Ctr3Config {
    fn default() -> Self {
        Self {
            ccbc: CcbcConfig::default(),
            routing: RoutingConfig::default(),
            skip_relink: false,
            prune: PruneOptions::default(),
            node_limit: None,
            max_candidates: 200_000,
            trim_to: 25,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelinkStats {
    pub pooled_solutions: usize,
    pub left_pieces: usize,
    pub right_pieces: usize,
    pub prune: PruneStats,
    pub candidates: usize,
    pub nodes: u64,
    pub proven_optimal: bool,
    pub trimmed: bool,
    pub improved: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ctr3Result {
    /// Final answer: the relinked solution if strictly cheaper, otherwise
    /// the best routed one.
    pub solution: Solution,
    /// Best solution after clustering and routing only.
    pub routed_best: Solution,
    /// Routed cost of every start, by start index.
    pub routed_costs: Vec<f64>,
    /// Number of clusters of every start.
    pub start_k: Vec<usize>,
    pub relink: Option<RelinkStats>,
    pub relink_error: Option<RelinkError>,
}

/// Full three-stage pipeline, single-threaded.
pub fn ctr3_solve(inst: &Instance, cfg: &Ctr3Config) -> Ctr3Result {
    let dm = distance_matrix(inst);
    let clusterings: Vec<ClusterSolution> = (0..cfg.ccbc.n_starts.max(1))
        .map(|s| ccbc_start(inst, &cfg.ccbc, s))
        .collect();
    ctr3_from_clusterings(inst, &dm, &clusterings, cfg)
}

/// Routes the given clusterings and relinks them.
pub fn ctr3_from_clusterings(
    inst: &Instance,
    dm: &DistanceMatrix,
    clusterings: &[ClusterSolution],
    cfg: &Ctr3Config,
) -> Ctr3Result {
    let mut cache = TspCache::new();
    let routed: Vec<Solution> = clusterings
        .iter()
        .map(|c| route_all_cached(inst, dm, c, &cfg.routing, &mut cache))
        .collect();
    let start_k = clusterings.iter().map(ClusterSolution::k).collect();
    let mut res = ctr3_from_routed(inst, dm, &routed, cfg);
    res.start_k = start_k;
    res
}

fn best_index(routed: &[Solution]) -> usize {
    let mut best = 0;
    for (i, s) in routed.iter().enumerate() {
        if s.total_cost < routed[best].total_cost {
            best = i;
        }
    }
    best
}

/// Relinks a pool of routed solutions.
///
/// # Panics
/// If `routed` is empty.
pub fn ctr3_from_routed(inst: &Instance, dm: &DistanceMatrix, routed: &[Solution], cfg: &Ctr3Config) -> Ctr3Result {
    assert!(!routed.is_empty(), "relinking needs at least one routed solution");
    let best = routed[best_index(routed)].clone();
    let mut res = Ctr3Result {
        solution: best.clone(),
        routed_best: best.clone(),
        routed_costs: routed.iter().map(|s| s.total_cost).collect(),
        start_k: routed.iter().map(Solution::k).collect(),
        relink: None,
        relink_error: None,
    };
    if cfg.skip_relink {
        return res;
    }

    let (model, pooled, trimmed) = match build_model(inst, dm, routed, best.k(), cfg.prune) {
        Ok(m) if m.candidates.len() > cfg.max_candidates && routed.len() > cfg.trim_to => {
            let mut order: Vec<usize> = (0..routed.len()).collect();
            order.sort_by(|&a, &b| routed[a].total_cost.total_cmp(&routed[b].total_cost).then(a.cmp(&b)));
            let pool: Vec<Solution> = order[..cfg.trim_to].iter().map(|&i| routed[i].clone()).collect();
            match build_model(inst, dm, &pool, best.k(), cfg.prune) {
                Ok(m) => (m, pool.len(), true),
                Err(e) => {
                    res.relink_error = Some(e);
                    return res;
                }
            }
        }
        Ok(m) => (m, routed.len(), false),
        Err(e) => {
            res.relink_error = Some(e);
            return res;
        }
    };

    let incumbent: Option<Vec<usize>> = best
        .routes
        .iter()
        .map(|r| model.find(&r.sequence))
        .collect();
    let outcome = solve_relink(&model, incumbent.as_deref(), cfg.node_limit);
    let mut stats = RelinkStats {
        pooled_solutions: pooled,
        left_pieces: model.left.len(),
        right_pieces: model.right.len(),
        prune: model.stats,
        candidates: model.candidates.len(),
        nodes: 0,
        proven_optimal: false,
        trimmed,
        improved: false,
    };
    match outcome {
        Ok(sol) => {
            stats.nodes = sol.nodes;
            stats.proven_optimal = sol.proven_optimal;
            let routes: Vec<Route> = sol
                .chosen
                .iter()
                .map(|&j| Route::new(model.sequence(j), inst, dm))
                .collect();
            let relinked = Solution::from_routes(routes);
            if relinked.total_cost < best.total_cost {
                stats.improved = true;
                res.solution = relinked;
            }
        }
        Err(e) => res.relink_error = Some(e),
    }
    res.relink = Some(stats);
    res
}

fn build_model(
    inst: &Instance,
    dm: &DistanceMatrix,
    routed: &[Solution],
    k: usize,
    opts: PruneOptions,
) -> Result<RelinkModel, RelinkError> {
    let (left, right) = cut_routes(inst, dm, routed);
    prune_joins(inst, dm, left, right, k, opts).map_err(|(e, _)| e)
}

/// Clusters of every routed route, for tracing.
pub fn route_partitions(sol: &Solution) -> Vec<Vec<usize>> {
    ccbc::canonical(&sol.routes.iter().map(|r| r.sequence.clone()).collect::<Vec<_>>())
}
