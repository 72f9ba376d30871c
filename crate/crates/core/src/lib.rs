//! Capacitated vehicle routing through constrained centroid-based clustering.
//!
//! The solver runs in three stages:
//!
//! 1. [`ccbc`] partitions customers into capacity-feasible clusters with a
//!    multi-start, capacity-aware k-means variant that self-adjusts the
//!    number of clusters.
//! 2. [`routing`] orders each cluster into a depot-anchored tour (Held-Karp
//!    for small clusters, nearest neighbour plus 2-opt above a threshold).
//! 3. [`relink`] cuts every routed solution of every start into depot-prefix
//!    and depot-suffix pieces and recombines them optimally with a
//!    set-partitioning branch-and-bound.
//!
//! [`oracles`] holds exact enumeration solvers for instances with at most ten
//! customers, [`explorer`] the clustering/routing connection analysis built on
//! them, and [`validate`] an independent feasibility checker.
//!
//! The crate is `no_std` and only needs `alloc`; IO, file formats and
//! threading live in the `ctr3` companion crate.
#![no_std]

extern crate alloc;

pub mod bitset;
pub mod ccbc;
pub mod explorer;
pub mod instance;
pub mod oracles;
pub mod relink;
pub mod rng;
pub mod routing;
pub mod validate;

#[cfg(test)]
mod testutil;

pub use bitset::CustomerSet;
pub use ccbc::{
    assignment_metric, ccbc_multistart, ccbc_single_start, ccbc_start, lower_bound_k,
    AssignmentMetric, CcbcConfig, CentroidSet, ClusterSolution, Initializer,
};
pub use instance::{
    distance_matrix, generate_small_instance, Customer, DistanceMatrix, DistancePolicy, Instance,
    InstanceError, Point,
};
pub use relink::{ctr3_solve, Ctr3Config, Ctr3Result};
pub use routing::{route_all, solve_tsp, Route, RoutingConfig, Solution};
pub use validate::{validate_clusters, validate_solution, Violation, ViolationKind};
