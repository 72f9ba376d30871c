#![allow(dead_code)]

use ctr3_core::relink::RelinkModel;
use ctr3_core::{DistanceMatrix, DistancePolicy, Instance, Point};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Customers on a 100x100 square, integer-ish demands, capacity 30.
pub fn random_instance(rng: &mut ChaCha8Rng, n: usize, policy: DistancePolicy) -> Instance {
    let depot = Point::new(rng.gen_range(0.0..100.0), rng.gen_range(0.0..100.0));
    let customers: Vec<(Point, f64)> = (0..n)
        .map(|_| {
            let p = Point::new(rng.gen_range(0.0..100.0), rng.gen_range(0.0..100.0));
            (p, rng.gen_range(1..=12) as f64)
        })
        .collect();
    Instance::new("random", depot, &customers, 30.0, policy).unwrap()
}

/// Capacity-feasible partition: customers in random order, each dropped into a
/// random block with room or a new one.
pub fn random_partition(inst: &Instance, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let mut ids: Vec<usize> = inst.customer_ids().collect();
    ids.shuffle(rng);
    let mut blocks: Vec<(Vec<usize>, f64)> = Vec::new();
    for c in ids {
        let q = inst.demand(c);
        let open: Vec<usize> = (0..blocks.len())
            .filter(|&b| blocks[b].1 + q <= inst.capacity())
            .collect();
        if open.is_empty() || rng.gen_bool(0.2) {
            blocks.push((vec![c], q));
        } else {
            let b = open[rng.gen_range(0..open.len())];
            blocks[b].0.push(c);
            blocks[b].1 += q;
        }
    }
    blocks.into_iter().map(|(b, _)| b).collect()
}

fn closed_cost(dm: &DistanceMatrix, seq: &[usize]) -> f64 {
    let mut cost = 0.0;
    let mut prev = 0;
    for &c in seq {
        cost += dm.get(prev, c);
        prev = c;
    }
    cost + dm.get(prev, 0)
}

/// Minimum tour cost over every permutation (Heap's algorithm).
pub fn brute_force_tour(dm: &DistanceMatrix, cluster: &[usize]) -> f64 {
    let mut a = cluster.to_vec();
    let n = a.len();
    let mut best = closed_cost(dm, &a);
    let mut c = vec![0usize; n];
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                a.swap(0, i);
            } else {
                a.swap(c[i], i);
            }
            best = best.min(closed_cost(dm, &a));
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    best
}

/// Cheapest exact cover of `1..=n` by the model's candidates, by plain
/// recursion on the lowest uncovered customer.
pub fn exact_cover_cost(model: &RelinkModel) -> Option<f64> {
    let n = model.n_customers;
    let sets: Vec<(u64, f64)> = model
        .candidates
        .iter()
        .map(|c| (c.customers.iter().fold(0u64, |m, i| m | 1 << (i - 1)), c.delta))
        .collect();
    let full = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
    fn go(sets: &[(u64, f64)], covered: u64, full: u64) -> Option<f64> {
        if covered == full {
            return Some(0.0);
        }
        let low = (!covered).trailing_zeros();
        let mut best: Option<f64> = None;
        for &(m, d) in sets {
            if m & (1 << low) != 0 && m & covered == 0 {
                if let Some(rest) = go(sets, covered | m, full) {
                    let v = d + rest;
                    if best.map_or(true, |b| v < b) {
                        best = Some(v);
                    }
                }
            }
        }
        best
    }
    go(&sets, 0, full)
}
