//! CVRP instance model, distance matrices and the random small-instance
//! generator used by the connection study.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use rand::Rng as _;

use crate::rng;

/// Planar point.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dist_sq(self, other: Point) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    pub fn dist(self, other: Point) -> f64 {
        libm::sqrt(self.dist_sq(other))
    }

    /// `t * self + (1 - t) * other`.
    pub fn lerp_toward(self, other: Point, t: f64) -> Point {
        Point::new(t * self.x + (1.0 - t) * other.x, t * self.y + (1.0 - t) * other.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// A node of the instance. Id 0 is the depot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Customer {
    pub id: usize,
    pub pos: Point,
    pub demand: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DistancePolicy {
    /// Plain euclidean distance.
    Exact,
    /// Euclidean distance rounded to the nearest integer (TSPLIB `nint`).
    Rounded,
}

impl DistancePolicy {
    pub fn apply(self, d: f64) -> f64 {
        match self {
            DistancePolicy::Exact => d,
            DistancePolicy::Rounded => libm::floor(d + 0.5),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InstanceError {
    NoCustomers,
    NonPositiveCapacity(f64),
    NegativeDemand { id: usize, demand: f64 },
    DemandExceedsCapacity { id: usize, demand: f64, capacity: f64 },
    NonFinite { id: usize },
    SizeOutOfRange { n: usize, min: usize, max: usize },
}

impl fmt::Display for InstanceError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::NoCustomers => write!(f, "instance has no customers besides the depot"),
            Self::NonPositiveCapacity(q) => write!(f, "vehicle capacity must be positive, got {q}"),
            Self::NegativeDemand { id, demand } => {
                write!(f, "customer {id} has negative demand {demand}")
            }
            Self::DemandExceedsCapacity { id, demand, capacity } => write!(
                f,
                "customer {id} demand {demand} exceeds vehicle capacity {capacity}"
            ),
            Self::NonFinite { id } => write!(f, "node {id} has a non-finite coordinate or demand"),
            Self::SizeOutOfRange { n, min, max } => {
                write!(f, "instance size {n} outside supported range {min}..={max}")
            }
        }
    }
}

impl core::error::Error for InstanceError {}

/// A validated CVRP instance: depot at index 0, customers `1..=N`.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub name: String,
    customers: Vec<Customer>,
    capacity: f64,
    pub distance_policy: DistancePolicy,
    /// Vehicle count encoded in the instance name (`-kX`), metadata only.
    pub optimal_k: Option<usize>,
    pub best_known: Option<f64>,
}

impl Instance {
    /// Builds an instance from the depot location and `(position, demand)`
    /// pairs for the customers, which receive ids `1..=N` in order.
    pub fn new(
        name: impl Into<String>,
        depot: Point,
        customers: &[(Point, f64)],
        capacity: f64,
        distance_policy: DistancePolicy,
    ) -> Result<Self, InstanceError> {
        if customers.is_empty() {
            return Err(InstanceError::NoCustomers);
        }
        if capacity <= 0.0 || !capacity.is_finite() {
            return Err(InstanceError::NonPositiveCapacity(capacity));
        }
        if !depot.is_finite() {
            return Err(InstanceError::NonFinite { id: 0 });
        }
        let mut nodes = Vec::with_capacity(customers.len() + 1);
        nodes.push(Customer { id: 0, pos: depot, demand: 0.0 });
        for (i, &(pos, demand)) in customers.iter().enumerate() {
            let id = i + 1;
            if !pos.is_finite() || !demand.is_finite() {
                return Err(InstanceError::NonFinite { id });
            }
            if demand < 0.0 {
                return Err(InstanceError::NegativeDemand { id, demand });
            }
            if demand > capacity {
                return Err(InstanceError::DemandExceedsCapacity { id, demand, capacity });
            }
            nodes.push(Customer { id, pos, demand });
        }
        let name = name.into();
        let optimal_k = k_from_name(&name);
        Ok(Self {
            name,
            customers: nodes,
            capacity,
            distance_policy,
            optimal_k,
            best_known: None,
        })
    }

    pub fn with_best_known(mut self, value: Option<f64>) -> Self {
        self.best_known = value;
        self
    }

    /// Number of non-depot customers.
    pub fn n_customers(&self) -> usize {
        self.customers.len() - 1
    }

    /// All nodes, depot first.
    pub fn nodes(&self) -> &[Customer] {
        &self.customers
    }

    pub fn depot(&self) -> Point {
        self.customers[0].pos
    }

    pub fn pos(&self, id: usize) -> Point {
        self.customers[id].pos
    }

    pub fn demand(&self, id: usize) -> f64 {
        self.customers[id].demand
    }

    pub fn capacity(&self) -> f64 {
        self.capacity
    }

    pub fn total_demand(&self) -> f64 {
        self.customers.iter().map(|c| c.demand).sum()
    }

    /// Customer ids `1..=N`.
    pub fn customer_ids(&self) -> core::ops::RangeInclusive<usize> {
        1..=self.n_customers()
    }
}

/// Parses the `-kX` vehicle-count suffix of CVRPLIB names such as `E-n22-k4`.
pub fn k_from_name(name: &str) -> Option<usize> {
    let idx = name.rfind("-k")?;
    let digits: String = name[idx + 2..].chars().take_while(char::is_ascii_digit).collect();
    digits.parse().ok()
}

/// Symmetric pairwise distances over all nodes (depot included).
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DistanceMatrix {
    pub fn size(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    /// Cost of the closed tour `0 -> seq... -> 0`.
    pub fn tour_cost(&self, seq: &[usize]) -> f64 {
        let mut prev = 0;
        let mut cost = 0.0;
        for &c in seq {
            cost += self.get(prev, c);
            prev = c;
        }
        if !seq.is_empty() {
            cost += self.get(prev, 0);
        }
        cost
    }
}

pub fn distance_matrix(inst: &Instance) -> DistanceMatrix {
    let nodes = inst.nodes();
    let n = nodes.len();
    let mut data = alloc::vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = inst.distance_policy.apply(nodes[i].pos.dist(nodes[j].pos));
            data[i * n + j] = d;
            data[j * n + i] = d;
        }
    }
    DistanceMatrix { n, data }
}

pub const GENERATOR_MAX_CUSTOMERS: usize = 10;
pub const GENERATOR_SIDE: f64 = 10.0;
pub const GENERATOR_MAX_DEMAND: f64 = 10.0;
pub const GENERATOR_CAPACITY: f64 = 10.0;

/// Random instance with `n` customers on `[0,10]^2`, demands uniform on
/// `[0,10]` and capacity 10, exact euclidean distances.
///
/// `n + 1` points are drawn; the first becomes the depot and its demand is
/// discarded.
pub fn generate_small_instance(n: usize, seed: u64) -> Result<Instance, InstanceError> {
    if !(1..=GENERATOR_MAX_CUSTOMERS).contains(&n) {
        return Err(InstanceError::SizeOutOfRange {
            n,
            min: 1,
            max: GENERATOR_MAX_CUSTOMERS,
        });
    }
    let mut rng = rng::stream(seed, 0);
    let draw = |rng: &mut rng::Rng| {
        let x = rng.gen_range(0.0..=GENERATOR_SIDE);
        let y = rng.gen_range(0.0..=GENERATOR_SIDE);
        let q = rng.gen_range(0.0..=GENERATOR_MAX_DEMAND);
        (Point::new(x, y), q)
    };
    let (depot, _) = draw(&mut rng);
    let customers: Vec<(Point, f64)> = (0..n).map(|_| draw(&mut rng)).collect();
    Instance::new(
        format!("rand-n{n}-s{seed}"),
        depot,
        &customers,
        GENERATOR_CAPACITY,
        DistancePolicy::Exact,
    )
}
