//! File formats, benchmark harness and parallel drivers for [`ctr3_core`].

pub mod bench;
pub mod cvrplib;
pub mod parallel;
pub mod report;

pub use ctr3_core as core;
