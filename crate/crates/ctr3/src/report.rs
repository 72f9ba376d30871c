//! CSV and JSON-lines output for the connection study and centroid scans.

use std::io;

use ctr3_core::explorer::{Classification, ConnectionStats, InstanceClass, ScanPoint};
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    JsonLines,
    Human,
}

#[derive(Debug, Serialize)]
struct StatsRow {
    n: usize,
    count_i1: usize,
    count_i2: usize,
    i1_fraction: f64,
    mean_gap_withinss: f64,
}

impl From<&ConnectionStats> for StatsRow {
    fn from(s: &ConnectionStats) -> Self {
        Self {
            n: s.n,
            count_i1: s.count_i1,
            count_i2: s.count_i2,
            i1_fraction: s.i1_fraction(),
            mean_gap_withinss: s.mean_gap_withinss,
        }
    }
}

#[derive(Debug, Serialize)]
struct ClassificationRow {
    index: usize,
    class: &'static str,
    k: usize,
    cvrp_optimum: f64,
    ccbc_routed: f64,
    withinss_ccbc: f64,
    withinss_routing: Option<f64>,
    gap_withinss_pct: Option<f64>,
    ccbc_partition: String,
    cvrp_partition: String,
}

fn blocks(p: &[Vec<usize>]) -> String {
    p.iter()
        .map(|b| b.iter().map(usize::to_string).collect::<Vec<_>>().join(" "))
        .collect::<Vec<_>>()
        .join("|")
}

fn emit<W: io::Write, T: Serialize>(out: W, rows: &[T], format: Format) -> anyhow::Result<()> {
    match format {
        Format::Csv | Format::Human => {
            let mut w = csv::Writer::from_writer(out);
            for r in rows {
                w.serialize(r)?;
            }
            w.flush()?;
        }
        Format::JsonLines => {
            let mut out = out;
            for r in rows {
                serde_json::to_writer(&mut out, r)?;
                out.write_all(b"\n")?;
            }
        }
    }
    Ok(())
}

pub fn write_stats<W: io::Write>(out: W, stats: &[ConnectionStats], format: Format) -> anyhow::Result<()> {
    if format == Format::Human {
        let mut out = out;
        for s in stats {
            writeln!(
                out,
                "n={} I1={} I2={} I1 fraction={:.3} mean withinss gap={:.2}%",
                s.n,
                s.count_i1,
                s.count_i2,
                s.i1_fraction(),
                s.mean_gap_withinss
            )?;
        }
        return Ok(());
    }
    let rows: Vec<StatsRow> = stats.iter().map(StatsRow::from).collect();
    emit(out, &rows, format)
}

pub fn write_classifications<W: io::Write>(out: W, items: &[Classification], format: Format) -> anyhow::Result<()> {
    let rows: Vec<ClassificationRow> = items
        .iter()
        .enumerate()
        .map(|(index, c)| ClassificationRow {
            index,
            class: match c.class {
                InstanceClass::I1 => "I1",
                InstanceClass::I2 => "I2",
            },
            k: c.k,
            cvrp_optimum: c.cvrp_optimum,
            ccbc_routed: c.ccbc_routed,
            withinss_ccbc: c.withinss_ccbc,
            withinss_routing: c.withinss_routing,
            gap_withinss_pct: c.gap_withinss_pct,
            ccbc_partition: blocks(&c.ccbc_partition),
            cvrp_partition: blocks(&c.cvrp_partition),
        })
        .collect();
    emit(out, &rows, format)
}

#[derive(Debug, Serialize)]
struct ScanRow {
    x: f64,
    y: f64,
    feasible: bool,
}

/// Point cloud of a centroid-region scan.
pub fn write_scan<W: io::Write>(out: W, points: &[ScanPoint]) -> anyhow::Result<()> {
    let rows: Vec<ScanRow> = points.iter().map(|p| ScanRow { x: p.x, y: p.y, feasible: p.feasible }).collect();
    emit(out, &rows, Format::Csv)
}
