//! Benchmark harness: runs the pipeline over instances and seeds, computes
//! gaps against best-known values, and runs ablations.

use std::fmt::Write as _;
use std::io;
use std::time::Instant;

use ctr3_core::relink::{Ctr3Config, Ctr3Result};
use ctr3_core::{validate_solution, AssignmentMetric, Initializer, Instance};
use rayon::prelude::*;
use serde::Serialize;

use crate::parallel;

/// Published value of one CVRPLIB instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BestKnown {
    pub name: &'static str,
    /// Proven optimum.
    pub value: f64,
    /// Value the reference implementation reported.
    pub reference: f64,
}

const fn bk(name: &'static str, reference: f64, value: f64) -> BestKnown {
    BestKnown { name, value, reference }
}

/// Proven optima of the A, B, E and P instances used for evaluation, with the
/// reference implementation's result next to each.
pub const BEST_KNOWN: &[BestKnown] = &[
    bk("A-n32-k5", 791.0, 784.0),
    bk("A-n33-k5", 674.0, 661.0),
    bk("A-n33-k6", 745.0, 742.0),
    bk("A-n34-k5", 788.0, 778.0),
    bk("A-n36-k5", 808.0, 799.0),
    bk("A-n37-k5", 679.0, 669.0),
    bk("A-n37-k6", 963.0, 949.0),
    bk("A-n38-k5", 746.0, 730.0),
    bk("A-n39-k5", 833.0, 822.0),
    bk("A-n39-k6", 845.0, 831.0),
    bk("A-n44-k6", 937.0, 937.0),
    bk("A-n48-k7", 1091.0, 1073.0),
    bk("A-n53-k7", 1023.0, 1010.0),
    bk("A-n54-k7", 1181.0, 1167.0),
    bk("A-n63-k10", 1320.0, 1314.0),
    bk("A-n64-k9", 1422.0, 1401.0),
    bk("A-n69-k9", 1171.0, 1159.0),
    bk("A-n80-k10", 1780.0, 1763.0),
    bk("B-n34-k5", 789.0, 788.0),
    bk("B-n35-k5", 968.0, 955.0),
    bk("B-n38-k6", 808.0, 805.0),
    bk("B-n39-k5", 557.0, 549.0),
    bk("B-n41-k6", 833.0, 829.0),
    bk("B-n43-k6", 754.0, 742.0),
    bk("B-n44-k7", 917.0, 909.0),
    bk("B-n50-k7", 747.0, 741.0),
    bk("B-n52-k7", 753.0, 747.0),
    bk("B-n63-k10", 1538.0, 1496.0),
    bk("E-n22-k4", 375.0, 375.0),
    bk("E-n23-k3", 569.0, 569.0),
    bk("E-n30-k3", 557.0, 534.0),
    bk("E-n33-k4", 846.0, 835.0),
    bk("E-n51-k5", 521.0, 521.0),
    bk("E-n76-k7", 696.0, 682.0),
    bk("P-n20-k2", 216.0, 216.0),
    bk("P-n21-k2", 211.0, 211.0),
    bk("P-n22-k2", 216.0, 216.0),
    bk("P-n40-k5", 458.0, 458.0),
    bk("P-n45-k5", 510.0, 510.0),
    bk("P-n50-k7", 560.0, 554.0),
    bk("P-n55-k10", 698.0, 694.0),
    bk("P-n76-k4", 608.0, 593.0),
    bk("P-n76-k5", 641.0, 627.0),
    bk("P-n101-k4", 693.0, 681.0),
];

pub fn best_known(name: &str) -> Option<&'static BestKnown> {
    BEST_KNOWN.iter().find(|b| b.name == name)
}

/// Customer count from a CVRPLIB name (`-nX` counts the depot).
pub fn customers_from_name(name: &str) -> Option<usize> {
    let i = name.find("-n")?;
    let digits: String = name[i + 2..].chars().take_while(char::is_ascii_digit).collect();
    digits.parse::<usize>().ok().map(|n| n.saturating_sub(1))
}

pub fn gap_pct(value: f64, best_known: f64) -> f64 {
    100.0 * (value - best_known) / best_known
}

/// Unused vehicle capacity in percent: `(K Q - sum q) / (K Q) * 100`.
pub fn vehicle_fill_gap(k: usize, capacity: f64, total_demand: f64) -> f64 {
    let kq = k as f64 * capacity;
    100.0 * (kq - total_demand) / kq
}

/// Short stable description of a configuration.
pub fn fingerprint(cfg: &Ctr3Config) -> String {
    let init = match cfg.ccbc.initializer {
        Initializer::RandomMultistart => "multistart",
        Initializer::KMeansPlusPlus => "kmeanspp",
        Initializer::NaiveSharding => "sharding",
    };
    let metric = match cfg.ccbc.metric {
        AssignmentMetric::Customized => "customized",
        AssignmentMetric::Classical => "classical",
    };
    let depth = if cfg.skip_relink { "2step" } else { "3step" };
    format!(
        "nit{}-g{:e}-t{}-{init}-{metric}-{depth}",
        cfg.ccbc.n_starts, cfg.ccbc.gap_limit, cfg.routing.exact_threshold
    )
}

/// One (instance, seed) run. Only the first nine fields go to CSV.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub instance: String,
    pub value: f64,
    pub best_known: Option<f64>,
    pub gap_pct: Option<f64>,
    pub runtime_s: f64,
    pub k: usize,
    pub k_opt: Option<usize>,
    pub seed: u64,
    pub config: String,
    /// Best cost after clustering and routing only, same seed and config.
    #[serde(skip)]
    pub two_step_value: f64,
    /// Whether the solution passed the independent validator.
    #[serde(skip)]
    pub valid: bool,
    #[serde(skip)]
    pub vehicle_fill_gap: f64,
}

pub const CSV_HEADER: &str = "instance,value,best_known,gap_pct,runtime_s,k,k_opt,seed,config";

/// Turns a pipeline result into a report. The gap is left out when the
/// solution fails validation or no reference value is known.
pub fn make_report(inst: &Instance, cfg: &Ctr3Config, res: &Ctr3Result, runtime_s: f64) -> BenchReport {
    let sol = &res.solution;
    let violations = validate_solution(inst, sol);
    let valid = violations.is_empty();
    if !valid {
        log::error!("{}: invalid solution: {}", inst.name, violations[0]);
    }
    let best = best_known(&inst.name).map(|b| b.value).or(inst.best_known);
    if best.is_none() {
        log::warn!("{}: no best-known value, gap omitted", inst.name);
    }
    BenchReport {
        instance: inst.name.clone(),
        value: sol.total_cost,
        best_known: best,
        gap_pct: best.filter(|_| valid).map(|b| gap_pct(sol.total_cost, b)),
        runtime_s,
        k: sol.k(),
        k_opt: inst.optimal_k,
        seed: cfg.ccbc.seed,
        config: fingerprint(cfg),
        two_step_value: res.routed_best.total_cost,
        valid,
        vehicle_fill_gap: vehicle_fill_gap(sol.k(), inst.capacity(), inst.total_demand()),
    }
}

/// Runs every (instance, seed) pair on the current rayon pool. Reports come
/// back ordered by instance, then seed.
pub fn run_suite(instances: &[Instance], cfg: &Ctr3Config, seeds: &[u64]) -> Vec<BenchReport> {
    let jobs: Vec<(usize, u64)> = (0..instances.len())
        .flat_map(|i| seeds.iter().map(move |&s| (i, s)))
        .collect();
    jobs.par_iter()
        .map(|&(i, seed)| {
            let inst = &instances[i];
            let mut cfg = cfg.clone();
            cfg.ccbc.seed = seed;
            let t = Instant::now();
            let res = parallel::solve(inst, &cfg);
            let elapsed = t.elapsed().as_secs_f64();
            log::info!("{} seed {seed}: {} in {elapsed:.2}s", inst.name, res.solution.total_cost);
            make_report(inst, &cfg, &res, elapsed)
        })
        .collect()
}

/// Lowest-value report per instance, first seed on ties, in input order.
pub fn best_per_instance(reports: &[BenchReport]) -> Vec<BenchReport> {
    let mut out: Vec<BenchReport> = Vec::new();
    for r in reports {
        match out.iter_mut().find(|b| b.instance == r.instance) {
            Some(b) if r.value < b.value => *b = r.clone(),
            Some(_) => {}
            None => out.push(r.clone()),
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub runs: usize,
    /// Mean over reports that have a gap.
    pub mean_gap_pct: Option<f64>,
    /// Reports whose gap is zero.
    pub n_opt: usize,
    pub mean_runtime_s: f64,
}

pub fn summarize(reports: &[BenchReport]) -> Summary {
    let gaps: Vec<f64> = reports.iter().filter_map(|r| r.gap_pct).collect();
    Summary {
        runs: reports.len(),
        mean_gap_pct: (!gaps.is_empty()).then(|| gaps.iter().sum::<f64>() / gaps.len() as f64),
        n_opt: gaps.iter().filter(|g| g.abs() < 1e-9).count(),
        mean_runtime_s: reports.iter().map(|r| r.runtime_s).sum::<f64>() / reports.len().max(1) as f64,
    }
}

pub fn write_csv<W: io::Write>(out: W, reports: &[BenchReport]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in reports {
        w.serialize(r)?;
    }
    if reports.is_empty() {
        w.write_record(CSV_HEADER.split(','))?;
    }
    w.flush()?;
    Ok(())
}

/// Plain-text table: one row per group with run count, mean gap, optimum
/// count and mean `K - K_opt`.
pub fn format_summary(groups: &[(String, Vec<BenchReport>)]) -> String {
    let mut s = format!("{:<24} {:>6} {:>10} {:>6} {:>10}\n", "group", "runs", "mean_gap%", "n_opt", "mean_dK");
    for (label, reports) in groups {
        let sum = summarize(reports);
        let dk: Vec<f64> = reports
            .iter()
            .filter_map(|r| r.k_opt.map(|k| r.k as f64 - k as f64))
            .collect();
        let gap = sum.mean_gap_pct.map_or("-".to_string(), |g| format!("{g:.2}"));
        let dk = if dk.is_empty() {
            "-".to_string()
        } else {
            format!("{:.2}", dk.iter().sum::<f64>() / dk.len() as f64)
        };
        writeln!(s, "{label:<24} {:>6} {gap:>10} {:>6} {dk:>10}", sum.runs, sum.n_opt).unwrap();
    }
    s
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AblationAxis {
    Initializer,
    Metric,
    PipelineDepth,
    NStarts(Vec<usize>),
}

/// Labelled configurations for one ablation axis, derived from `base`.
pub fn ablation_levels(axis: &AblationAxis, base: &Ctr3Config) -> Vec<(String, Ctr3Config)> {
    let with = |f: &dyn Fn(&mut Ctr3Config)| {
        let mut c = base.clone();
        f(&mut c);
        c
    };
    match axis {
        AblationAxis::Initializer => [
            ("multistart", Initializer::RandomMultistart),
            ("kmeanspp", Initializer::KMeansPlusPlus),
            ("sharding", Initializer::NaiveSharding),
        ]
        .into_iter()
        .map(|(l, i)| (l.to_string(), with(&|c| c.ccbc.initializer = i)))
        .collect(),
        AblationAxis::Metric => [("customized", AssignmentMetric::Customized), ("classical", AssignmentMetric::Classical)]
            .into_iter()
            .map(|(l, m)| (l.to_string(), with(&|c| c.ccbc.metric = m)))
            .collect(),
        AblationAxis::PipelineDepth => vec![
            ("2step".to_string(), with(&|c| c.skip_relink = true)),
            ("3step".to_string(), with(&|c| c.skip_relink = false)),
        ],
        AblationAxis::NStarts(levels) => levels
            .iter()
            .map(|&n| (format!("nit{n}"), with(&|c| c.ccbc.n_starts = n)))
            .collect(),
    }
}

pub fn run_ablation(
    axis: &AblationAxis,
    base: &Ctr3Config,
    instances: &[Instance],
    seeds: &[u64],
) -> Vec<(String, Vec<BenchReport>)> {
    ablation_levels(axis, base)
        .into_iter()
        .map(|(label, cfg)| {
            let reports = run_suite(instances, &cfg, seeds);
            (label, reports)
        })
        .collect()
}

/// Running minimum of each instance's gap across ordered levels (for the
/// start-count sweep).
pub fn best_so_far(groups: &[(String, Vec<BenchReport>)]) -> Vec<(String, Vec<Option<f64>>)> {
    let mut best: Vec<Option<f64>> = Vec::new();
    groups
        .iter()
        .map(|(label, reports)| {
            best.resize(reports.len(), None);
            for (b, r) in best.iter_mut().zip(reports) {
                *b = match (*b, r.gap_pct) {
                    (Some(x), Some(y)) => Some(x.min(y)),
                    (x, y) => x.or(y),
                };
            }
            (label.clone(), best.clone())
        })
        .collect()
}
