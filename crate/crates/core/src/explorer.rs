//! Connection between optimal clustering and optimal routing on small
//! instances: classification, withinss gaps, nearest centroid search,
//! strict centroids and the perturbation radius around them.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::Rng as _;

use crate::instance::{distance_matrix, generate_small_instance, Instance, InstanceError, Point};
use crate::oracles::{self, exact_cvrp_with, for_each_partition, subset_withinss, OracleError, SubsetTours};
use crate::rng;

const EQ_EPS: f64 = 1e-9;

/// How many blocks the exact clustering uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KChoice {
    /// The number of routes of the optimal routing witness.
    OptimalRoutes,
    /// The smallest block count admitting a capacity-feasible partition.
    MinFeasible,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InstanceClass {
    /// The optimal clustering, routed, is an optimal routing.
    I1,
    I2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    pub class: InstanceClass,
    pub k: usize,
    pub cvrp_optimum: f64,
    /// Routing cost of the optimal clustering.
    pub ccbc_routed: f64,
    pub withinss_ccbc: f64,
    /// Smallest withinss among partitions that are routing-optimal.
    pub withinss_routing: Option<f64>,
    pub gap_withinss_pct: Option<f64>,
    pub ccbc_partition: Vec<Vec<usize>>,
    pub cvrp_partition: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassifyOptions {
    pub k_choice: KChoice,
    pub include_depot: bool,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        Self { k_choice: KChoice::OptimalRoutes, include_depot: true }
    }
}

fn blocks_of(masks: &[u32]) -> Vec<Vec<usize>> {
    let mut b: Vec<Vec<usize>> = masks.iter().map(|&m| oracles::mask_ids(m)).collect();
    b.sort();
    b
}

/// Classifies an instance of at most ten customers into I1 or I2.
pub fn classify_instance(inst: &Instance, opts: ClassifyOptions) -> Result<Classification, OracleError> {
    let n = inst.n_customers();
    if n > oracles::MAX_ORACLE_CUSTOMERS {
        return Err(OracleError::TooLarge { n });
    }
    let dm = distance_matrix(inst);
    let tours = SubsetTours::new(&dm, n);
    let cvrp = exact_cvrp_with(inst, &dm, &tours, None)?;
    let opt = cvrp.value;
    let k = match opts.k_choice {
        KChoice::OptimalRoutes => cvrp.witness.k(),
        KChoice::MinFeasible => (1..=n)
            .find(|&k| for_each_partition(inst, Some(k), |_| {}) > 0)
            .ok_or(OracleError::Infeasible)?,
    };
    let ws = subset_withinss(inst, opts.include_depot);
    let route_cost = |blocks: &[u32]| blocks.iter().map(|&b| tours.cost(b)).sum::<f64>();
    let withinss = |blocks: &[u32]| blocks.iter().map(|&b| ws[b as usize]).sum::<f64>();

    let mut best_ws = f64::INFINITY;
    let mut ccbc: Vec<u32> = Vec::new();
    for_each_partition(inst, Some(k), |blocks| {
        let w = withinss(blocks);
        if w < best_ws - EQ_EPS {
            best_ws = w;
            ccbc = blocks.to_vec();
        }
    });
    if ccbc.is_empty() {
        return Err(OracleError::Infeasible);
    }
    let routed = route_cost(&ccbc);
    let is_i1 = libm::fabs(routed - opt) <= EQ_EPS;

    let mut res = Classification {
        class: if is_i1 { InstanceClass::I1 } else { InstanceClass::I2 },
        k,
        cvrp_optimum: opt,
        ccbc_routed: routed,
        withinss_ccbc: best_ws,
        withinss_routing: None,
        gap_withinss_pct: None,
        ccbc_partition: blocks_of(&ccbc),
        cvrp_partition: cvrp.witness.partition(),
    };
    if is_i1 {
        return Ok(res);
    }
    // routing-optimal partitions, with k blocks when possible
    let mut wv = [f64::INFINITY; 2];
    for_each_partition(inst, None, |blocks| {
        if route_cost(blocks) <= opt + EQ_EPS {
            let slot = usize::from(blocks.len() != k);
            wv[slot] = wv[slot].min(withinss(blocks));
        }
    });
    let w_v = if wv[0].is_finite() { wv[0] } else { wv[1] };
    res.withinss_routing = Some(w_v);
    if best_ws > 0.0 {
        res.gap_withinss_pct = Some(100.0 * (w_v - best_ws) / best_ws);
    }
    Ok(res)
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConnectionStats {
    pub n: usize,
    pub count_i1: usize,
    pub count_i2: usize,
    /// Mean withinss gap over I2 instances, in percent.
    pub mean_gap_withinss: f64,
}

impl ConnectionStats {
    pub fn from_classifications(n: usize, items: &[Classification]) -> Self {
        let i2: Vec<f64> = items
            .iter()
            .filter(|c| c.class == InstanceClass::I2)
            .filter_map(|c| c.gap_withinss_pct)
            .collect();
        let count_i2 = items.iter().filter(|c| c.class == InstanceClass::I2).count();
        Self {
            n,
            count_i1: items.len() - count_i2,
            count_i2,
            mean_gap_withinss: if i2.is_empty() { 0.0 } else { i2.iter().sum::<f64>() / i2.len() as f64 },
        }
    }

    pub fn total(&self) -> usize {
        self.count_i1 + self.count_i2
    }

    pub fn i1_fraction(&self) -> f64 {
        if self.total() == 0 {
            0.0
        } else {
            self.count_i1 as f64 / self.total() as f64
        }
    }
}

/// The `index`-th generated instance of a study with base seed `seed`.
pub fn study_instance(n: usize, seed: u64, index: u64) -> Result<Instance, InstanceError> {
    generate_small_instance(n, rng::derive_seed(seed, index))
}

/// Classifies `count` generated instances of `n` customers.
pub fn connection_study(
    n: usize,
    count: usize,
    seed: u64,
    opts: ClassifyOptions,
) -> Result<(ConnectionStats, Vec<Classification>), StudyError> {
    let mut items = Vec::with_capacity(count);
    for i in 0..count {
        let inst = study_instance(n, seed, i as u64).map_err(StudyError::Instance)?;
        items.push(classify_instance(&inst, opts).map_err(StudyError::Oracle)?);
    }
    Ok((ConnectionStats::from_classifications(n, &items), items))
}

#[derive(Debug, Clone, PartialEq)]
pub enum StudyError {
    Instance(InstanceError),
    Oracle(OracleError),
}

impl fmt::Display for StudyError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StudyError::Instance(e) => write!(f, "{e}"),
            StudyError::Oracle(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for StudyError {}

/// Index of the nearest centroid, ties to the lower index.
pub fn nearest(p: Point, centroids: &[Point]) -> usize {
    let mut best = 0;
    for (k, mu) in centroids.iter().enumerate() {
        if p.dist_sq(*mu) < p.dist_sq(centroids[best]) {
            best = k;
        }
    }
    best
}

/// Cluster index of every customer (index 0 unused).
pub fn assignment_of(inst: &Instance, blocks: &[Vec<usize>]) -> Vec<usize> {
    let mut a = vec![usize::MAX; inst.n_customers() + 1];
    for (k, b) in blocks.iter().enumerate() {
        for &c in b {
            a[c] = k;
        }
    }
    a
}

/// Smallest value of `d(c, mu_other)^2 - d(c, mu_own)^2` over customers and
/// competing centroids. Positive iff every customer is strictly nearest to
/// its own centroid.
pub fn min_margin(inst: &Instance, blocks: &[Vec<usize>], centroids: &[Point]) -> f64 {
    let mut m = f64::INFINITY;
    for (k, b) in blocks.iter().enumerate() {
        for &c in b {
            let p = inst.pos(c);
            let own = p.dist_sq(centroids[k]);
            for (j, mu) in centroids.iter().enumerate() {
                if j != k {
                    m = m.min(p.dist_sq(*mu) - own);
                }
            }
        }
    }
    m
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpResult {
    pub centroids: Vec<Point>,
    /// `sum_k |mu_k - mu_k^c|^2`.
    pub objective: f64,
    /// See [`min_margin`]; non-negative for a feasible point.
    pub min_margin: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpError {
    /// Blocks and start centroids differ in count, or a block is empty.
    BadInput,
    /// No feasible combination was found within the iteration budget.
    NoFeasiblePoint,
}

impl fmt::Display for QpError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QpError::BadInput => write!(f, "partition and start centroids do not match"),
            QpError::NoFeasiblePoint => write!(f, "no feasible centroid combination found"),
        }
    }
}

impl core::error::Error for QpError {}

struct Qp<'a> {
    target: &'a [Point],
    /// (customer point, own cluster, competing cluster)
    cons: Vec<(Point, usize, usize)>,
}

impl Qp<'_> {
    fn objective(&self, mu: &[Point]) -> f64 {
        mu.iter().zip(self.target).map(|(a, b)| a.dist_sq(*b)).sum()
    }

    fn violation(&self, mu: &[Point], (c, k, j): (Point, usize, usize), margin: f64) -> f64 {
        c.dist_sq(mu[k]) - c.dist_sq(mu[j]) + margin
    }

    fn penalized(&self, mu: &[Point], rho: f64, margin: f64, grad: &mut [Point]) -> f64 {
        let mut f = 0.0;
        for (k, (m, t)) in mu.iter().zip(self.target).enumerate() {
            f += m.dist_sq(*t);
            grad[k] = Point::new(2.0 * (m.x - t.x), 2.0 * (m.y - t.y));
        }
        for &con in &self.cons {
            let g = self.violation(mu, con, margin);
            if g > 0.0 {
                let (c, k, j) = con;
                f += rho * g * g;
                let s = 2.0 * rho * g;
                grad[k].x += s * 2.0 * (mu[k].x - c.x);
                grad[k].y += s * 2.0 * (mu[k].y - c.y);
                grad[j].x -= s * 2.0 * (mu[j].x - c.x);
                grad[j].y -= s * 2.0 * (mu[j].y - c.y);
            }
        }
        f
    }

    fn descend(&self, mut mu: Vec<Point>, margin: f64) -> Vec<Point> {
        let k = mu.len();
        let mut grad = vec![Point::new(0.0, 0.0); k];
        let mut trial = mu.clone();
        let mut tgrad = grad.clone();
        let mut rho = 1.0;
        while rho <= 1e9 {
            let mut step = 0.5;
            for _ in 0..400 {
                let f = self.penalized(&mu, rho, margin, &mut grad);
                let gnorm: f64 = grad.iter().map(|g| g.x * g.x + g.y * g.y).sum();
                if gnorm < 1e-24 {
                    break;
                }
                // Armijo backtracking
                let mut accepted = false;
                for _ in 0..60 {
                    for i in 0..k {
                        trial[i] = Point::new((mu[i].x - step * grad[i].x).max(0.0), (mu[i].y - step * grad[i].y).max(0.0));
                    }
                    let ft = self.penalized(&trial, rho, margin, &mut tgrad);
                    if ft <= f - 1e-4 * step * gnorm || ft < f - 1e-15 {
                        accepted = true;
                        break;
                    }
                    step *= 0.5;
                }
                if !accepted {
                    break;
                }
                let moved: f64 = mu.iter().zip(&trial).map(|(a, b)| a.dist_sq(*b)).sum();
                mu.clone_from(&trial);
                step = (step * 2.0).min(1.0);
                if moved < 1e-28 {
                    break;
                }
            }
            rho *= 10.0;
        }
        mu
    }

    /// Projects onto violated constraints one at a time.
    fn restore(&self, mu: &mut [Point], margin: f64) -> bool {
        for _ in 0..2000 {
            let mut worst = None;
            let mut worst_g = 0.0;
            for &con in &self.cons {
                let g = self.violation(mu, con, 0.0);
                if g > worst_g {
                    worst_g = g;
                    worst = Some(con);
                }
            }
            let Some((c, k, j)) = worst else {
                return true;
            };
            let g = worst_g + margin;
            let gk = Point::new(2.0 * (mu[k].x - c.x), 2.0 * (mu[k].y - c.y));
            let gj = Point::new(-2.0 * (mu[j].x - c.x), -2.0 * (mu[j].y - c.y));
            let norm = gk.x * gk.x + gk.y * gk.y + gj.x * gj.x + gj.y * gj.y;
            if norm < 1e-300 {
                return false;
            }
            let t = g / norm;
            mu[k] = Point::new((mu[k].x - t * gk.x).max(0.0), (mu[k].y - t * gk.y).max(0.0));
            mu[j] = Point::new((mu[j].x - t * gj.x).max(0.0), (mu[j].y - t * gj.y).max(0.0));
        }
        self.cons.iter().all(|&con| self.violation(mu, con, 0.0) <= 0.0)
    }
}

/// Centroids closest to `start` (sum of squared moves) under which every
/// customer is at least as near to its own block's centroid as to any
/// other, with non-negative coordinates.
///
/// Solved by penalized projected descent from several starts followed by
/// projection onto violated constraints.
pub fn nearest_centroids_qp(
    inst: &Instance,
    blocks: &[Vec<usize>],
    start: &[Point],
    seed: u64,
) -> Result<QpResult, QpError> {
    let k = blocks.len();
    if k == 0 || start.len() != k || blocks.iter().any(Vec::is_empty) {
        return Err(QpError::BadInput);
    }
    let margin0 = min_margin(inst, blocks, start);
    if margin0 >= 0.0 {
        return Ok(QpResult { centroids: start.to_vec(), objective: 0.0, min_margin: margin0 });
    }
    let mut cons = Vec::new();
    for (own, b) in blocks.iter().enumerate() {
        for &c in b {
            for other in 0..k {
                if other != own {
                    cons.push((inst.pos(c), own, other));
                }
            }
        }
    }
    let qp = Qp { target: start, cons };

    let means: Vec<Point> = blocks
        .iter()
        .map(|b| {
            let m = b.len() as f64;
            Point::new(
                b.iter().map(|&c| inst.pos(c).x).sum::<f64>() / m,
                b.iter().map(|&c| inst.pos(c).y).sum::<f64>() / m,
            )
        })
        .collect();
    let clamp = |p: Point| Point::new(p.x.max(0.0), p.y.max(0.0));
    let mut inits: Vec<Vec<Point>> = vec![start.iter().map(|&p| clamp(p)).collect(), means.clone()];
    for t in [0.25, 0.5, 0.75] {
        inits.push(start.iter().zip(&means).map(|(s, m)| clamp(s.lerp_toward(*m, 1.0 - t))).collect());
    }
    let mut r = rng::stream(seed, 0);
    let scale = start
        .iter()
        .chain(means.iter())
        .map(|p| p.x.abs().max(p.y.abs()))
        .fold(1.0, f64::max);
    for _ in 0..6 {
        inits.push(
            means
                .iter()
                .map(|m| clamp(Point::new(m.x + r.gen_range(-0.1..0.1) * scale, m.y + r.gen_range(-0.1..0.1) * scale)))
                .collect(),
        );
    }

    let margin = 1e-9 * scale * scale;
    let mut best: Option<QpResult> = None;
    for init in inits {
        let mut mu = qp.descend(init, margin);
        if !qp.restore(&mut mu, margin) {
            continue;
        }
        let m = min_margin(inst, blocks, &mu);
        if m < 0.0 {
            continue;
        }
        let obj = qp.objective(&mu);
        if best.as_ref().is_none_or(|b| obj < b.objective) {
            best = Some(QpResult { centroids: mu, objective: obj, min_margin: m });
        }
    }
    best.ok_or(QpError::NoFeasiblePoint)
}

/// Whether `centroids[k_star]` is strict: every customer of its block is
/// strictly nearer to it than to any other centroid, and every other
/// customer is strictly nearer to its own centroid than to it.
pub fn is_strict_centroid(inst: &Instance, centroids: &[Point], blocks: &[Vec<usize>], k_star: usize) -> bool {
    let mu = centroids[k_star];
    for (k, b) in blocks.iter().enumerate() {
        for &c in b {
            let p = inst.pos(c);
            if k == k_star {
                let own = p.dist_sq(mu);
                if centroids
                    .iter()
                    .enumerate()
                    .any(|(j, m)| j != k_star && p.dist_sq(*m) - own <= EQ_EPS)
                {
                    return false;
                }
            } else if p.dist_sq(mu) - p.dist_sq(centroids[k]) <= EQ_EPS {
                return false;
            }
        }
    }
    true
}

#[derive(Debug, Clone, PartialEq)]
pub struct CentroidRegion {
    pub k_star: usize,
    /// Smallest squared-distance margin of foreign customers.
    pub beta_sq: f64,
    /// Smallest distance margin of foreign customers.
    pub beta: f64,
    /// Smallest distance margin of own customers.
    pub omega: f64,
    /// Competing cluster attaining `beta_sq`.
    pub e: Option<usize>,
    pub alpha0: f64,
    /// Distance from the centroid to its `alpha0` interpolant toward `mu_e`.
    pub psi: f64,
    /// Every centroid strictly within this distance keeps the partition.
    pub radius: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NotStrict;

impl fmt::Display for NotStrict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "centroid is not strict")
    }
}

impl core::error::Error for NotStrict {}

/// Radius of a disk around `centroids[k_star]` inside which moving that
/// centroid leaves the nearest-centroid partition unchanged.
///
/// `beta_sq`, `e`, `alpha0` and `psi` follow the squared-distance
/// construction along the segment toward `mu_e`. Since a squared-distance
/// margin does not bound displacement in every direction, the radius also
/// takes the plain distance margins: a move of length `r` changes any
/// distance to the moved centroid by at most `r`. The radius is
/// `min(psi, beta, omega)`.
pub fn perturbation_radius(
    inst: &Instance,
    centroids: &[Point],
    blocks: &[Vec<usize>],
    k_star: usize,
) -> Result<CentroidRegion, NotStrict> {
    if !is_strict_centroid(inst, centroids, blocks, k_star) {
        return Err(NotStrict);
    }
    let mu = centroids[k_star];
    let mut region = CentroidRegion {
        k_star,
        beta_sq: f64::INFINITY,
        beta: f64::INFINITY,
        omega: f64::INFINITY,
        e: None,
        alpha0: 0.0,
        psi: f64::INFINITY,
        radius: f64::INFINITY,
    };
    if centroids.len() == 1 {
        return Ok(region);
    }
    for (k, b) in blocks.iter().enumerate() {
        for &c in b {
            let p = inst.pos(c);
            if k == k_star {
                let own = p.dist(mu);
                for (j, m) in centroids.iter().enumerate() {
                    if j != k_star {
                        region.omega = region.omega.min(p.dist(*m) - own);
                    }
                }
            } else {
                let sq = p.dist_sq(mu) - p.dist_sq(centroids[k]);
                if sq < region.beta_sq {
                    region.beta_sq = sq;
                    region.e = Some(k);
                }
                region.beta = region.beta.min(p.dist(mu) - p.dist(centroids[k]));
            }
        }
    }
    if let Some(e) = region.e {
        let mu_e = centroids[e];
        // alpha0 from (1 - alpha0) eta_i = zeta_i at the binding customer
        let mut alpha0: f64 = 0.0;
        for &c in &blocks[k_star] {
            let p = inst.pos(c);
            let own = p.dist_sq(mu);
            let eta = p.dist_sq(mu_e) - own;
            let zeta = centroids
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != k_star)
                .map(|(_, m)| p.dist_sq(*m) - own)
                .fold(f64::INFINITY, f64::min);
            if eta > 0.0 {
                alpha0 = alpha0.max((1.0 - zeta / eta).clamp(0.0, 1.0));
            }
        }
        region.alpha0 = alpha0;
        region.psi = (1.0 - alpha0) * mu.dist(mu_e);
    }
    region.radius = region.psi.min(region.beta).min(region.omega);
    Ok(region)
}

/// Whether moving `centroids[k_star]` to `p` keeps every customer strictly
/// nearest to its own block's centroid.
pub fn keeps_partition(inst: &Instance, centroids: &[Point], blocks: &[Vec<usize>], k_star: usize, p: Point) -> bool {
    let mut moved = centroids.to_vec();
    moved[k_star] = p;
    min_margin(inst, blocks, &moved) > 0.0
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanPoint {
    pub x: f64,
    pub y: f64,
    pub feasible: bool,
}

/// Grid of candidate positions for `centroids[k_star]` over the rectangle
/// `[x0, x1] x [y0, y1]`, each flagged by [`keeps_partition`].
#[allow(clippy::too_many_arguments)]
pub fn region_scan(
    inst: &Instance,
    centroids: &[Point],
    blocks: &[Vec<usize>],
    k_star: usize,
    (x0, x1): (f64, f64),
    (y0, y1): (f64, f64),
    steps: usize,
) -> Vec<ScanPoint> {
    let steps = steps.max(1);
    let mut out = Vec::with_capacity((steps + 1) * (steps + 1));
    for iy in 0..=steps {
        let y = y0 + (y1 - y0) * iy as f64 / steps as f64;
        for ix in 0..=steps {
            let x = x0 + (x1 - x0) * ix as f64 / steps as f64;
            out.push(ScanPoint { x, y, feasible: keeps_partition(inst, centroids, blocks, k_star, Point::new(x, y)) });
        }
    }
    out
}
