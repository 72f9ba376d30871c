use std::path::Path;
use std::process::{Command, Output};

use ctr3::cvrplib::write_vrp;
use ctr3_core::{DistancePolicy, Instance, Point};

fn ctr3(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ctr3"))
        .args(args)
        .env_remove("CTR3_INSTANCE_DIR")
        .output()
        .unwrap()
}

/// Customers on a ring around the depot, rounded distances.
fn ring(name: &str, n: usize, capacity: f64) -> Instance {
    let customers: Vec<(Point, f64)> = (0..n)
        .map(|i| {
            let a = i as f64 * std::f64::consts::TAU / n as f64;
            let r = 20.0 + (i * 7 % 11) as f64;
            (Point::new(50.0 + r * a.cos(), 50.0 + r * a.sin()), (1 + i % 5) as f64)
        })
        .collect();
    Instance::new(name, Point::new(50.0, 50.0), &customers, capacity, DistancePolicy::Rounded).unwrap()
}

fn write(dir: &Path, inst: &Instance) -> String {
    let p = dir.join(format!("{}.vrp", inst.name));
    std::fs::write(&p, write_vrp(inst, None)).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn solve_prints_a_sol_listing() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), &ring("R-n13-k3", 12, 15.0));
    let out = ctr3(&["solve", &path, "--n-starts", "10", "--seed", "1"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let sol = ctr3::cvrplib::parse_sol(&text).unwrap();
    let mut ids: Vec<usize> = sol.routes.concat();
    ids.sort_unstable();
    assert_eq!(ids, (1..=12).collect::<Vec<_>>());
    assert!(sol.cost.unwrap() > 0.0);
    assert_eq!(text.lines().filter(|l| l.starts_with("Load #")).count(), sol.routes.len());
}

#[test]
fn outputs_do_not_depend_on_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), &ring("R-n21-k4", 20, 14.0));
    let run = |threads: &str| ctr3(&["solve", &path, "--n-starts", "30", "--seed", "3", "--threads", threads, "--format", "csv"]).stdout;
    let one = run("1");
    assert!(!one.is_empty());
    assert_eq!(one, run("4"));
}

#[test]
fn bench_writes_one_row_per_instance_and_seed() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), &ring("E-n11-k2", 10, 20.0));
    write(dir.path(), &ring("E-n9-k2", 8, 15.0));
    write(dir.path(), &ring("P-n9-k2", 8, 15.0));
    let d = dir.path().to_string_lossy().into_owned();
    let out = ctr3(&["bench", "--instances", &d, "--group", "E", "--seeds", "1..3", "--n-starts", "5", "--format", "csv"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some(ctr3::bench::CSV_HEADER));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 6);
    assert!(rows.iter().all(|r| r.starts_with("E-")));
}

#[test]
fn explore_accounts_for_every_instance() {
    let out = ctr3(&["explore", "--n", "5", "--count", "60", "--seed", "7", "--format", "csv"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[1].parse::<usize>().unwrap() + row[2].parse::<usize>().unwrap(), 60);
}

#[test]
fn explore_scan_writes_point_cloud() {
    let dir = tempfile::tempdir().unwrap();
    let scan = dir.path().join("scan.csv");
    let s = scan.to_string_lossy().into_owned();
    let out = ctr3(&["explore", "--n", "4", "--count", "1", "--scan-index", "0", "--scan-out", &s, "--scan-steps", "10"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(scan).unwrap();
    assert_eq!(text.lines().next(), Some("k_star,x,y,feasible"));
    assert!(text.lines().count() > 121);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(ctr3(&["solve", "--frobnicate"]).status.code(), Some(2));
    assert_eq!(ctr3(&["bench"]).status.code(), Some(2));
    assert_eq!(ctr3(&["ablate", "--axis", "n-starts"]).status.code(), Some(2));
    let missing = dir.path().join("missing.vrp");
    assert_eq!(ctr3(&["solve", &missing.to_string_lossy()]).status.code(), Some(3));
    let garbled = dir.path().join("garbled.vrp");
    std::fs::write(&garbled, "NAME : x\nDIMENSION : two\n").unwrap();
    assert_eq!(ctr3(&["solve", &garbled.to_string_lossy()]).status.code(), Some(3));
    let heavy = dir.path().join("heavy.vrp");
    std::fs::write(
        &heavy,
        "NAME : heavy\nTYPE : CVRP\nDIMENSION : 2\nEDGE_WEIGHT_TYPE : EUC_2D\nCAPACITY : 5\nNODE_COORD_SECTION\n1 0 0\n2 1 1\nDEMAND_SECTION\n1 0\n2 9\nDEPOT_SECTION\n1\n-1\nEOF\n",
    )
    .unwrap();
    assert_eq!(ctr3(&["solve", &heavy.to_string_lossy()]).status.code(), Some(4));
}
