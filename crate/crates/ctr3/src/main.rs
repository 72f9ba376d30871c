use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use ctr3::bench::{self, AblationAxis, BenchReport};
use ctr3::cvrplib::{self, VrpError};
use ctr3::parallel;
use ctr3::report::{self, Format};
use ctr3_core::explorer::{self, ClassifyOptions, KChoice};
use ctr3_core::relink::Ctr3Config;
use ctr3_core::{
    AssignmentMetric, CcbcConfig, DistancePolicy, Initializer, Instance, InstanceError, Point, RoutingConfig,
};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "ctr3", version, about = "Cluster, route and relink CVRP solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one .vrp instance.
    Solve {
        instance: PathBuf,
        #[command(flatten)]
        solver: SolverArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Run the solver over a directory of CVRPLIB instances.
    Bench {
        #[command(flatten)]
        suite: SuiteArgs,
        #[command(flatten)]
        solver: SolverArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Classify random small instances by whether optimal clustering yields
    /// optimal routing.
    Explore {
        #[arg(long, default_value_t = 5)]
        n: usize,
        #[arg(long, default_value_t = 500)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long, value_enum, default_value_t = KArg::OptimalRoutes)]
        k_choice: KArg,
        /// Leave the depot out of cluster centroids and withinss.
        #[arg(long)]
        no_depot: bool,
        /// Also write one row per instance here.
        #[arg(long)]
        per_instance: Option<PathBuf>,
        /// Write a centroid-region scan of this study instance to --scan-out.
        #[arg(long, requires = "scan_out")]
        scan_index: Option<u64>,
        #[arg(long)]
        scan_out: Option<PathBuf>,
        #[arg(long, default_value_t = 100)]
        scan_steps: usize,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Compare solver variants along one axis.
    Ablate {
        #[arg(long, value_enum)]
        axis: AxisArg,
        /// Start counts for `--axis n-starts`, comma separated.
        #[arg(long, value_delimiter = ',')]
        levels: Vec<usize>,
        #[command(flatten)]
        suite: SuiteArgs,
        #[command(flatten)]
        solver: SolverArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
}

#[derive(Args)]
struct SolverArgs {
    #[arg(long, default_value_t = 100)]
    n_starts: usize,
    #[arg(long, default_value_t = 1e-4)]
    gap_limit: f64,
    #[arg(long, default_value_t = 14)]
    exact_threshold: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, value_enum, default_value_t = MetricArg::Customized)]
    metric: MetricArg,
    #[arg(long, value_enum, default_value_t = InitArg::Multistart)]
    init: InitArg,
    /// Stop after clustering and routing.
    #[arg(long)]
    skip_relink: bool,
    /// Unrounded euclidean distances (CVRPLIB values assume rounding).
    #[arg(long)]
    exact_distances: bool,
}

#[derive(Args)]
struct SuiteArgs {
    /// Directory of .vrp files.
    #[arg(long, env = "CTR3_INSTANCE_DIR")]
    instances: Option<PathBuf>,
    /// Instance groups by name prefix, e.g. `A,E`.
    #[arg(long, value_delimiter = ',')]
    group: Vec<String>,
    /// Seeds as `1..5` (inclusive) or a comma list.
    #[arg(long, default_value = "1..5")]
    seeds: String,
    #[arg(long)]
    max_customers: Option<usize>,
}

#[derive(Args)]
struct OutputArgs {
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = FormatArg::Human)]
    format: FormatArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricArg {
    Customized,
    Classical,
}

#[derive(Clone, Copy, ValueEnum)]
enum InitArg {
    Multistart,
    Kmeanspp,
    Sharding,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    JsonLines,
    Human,
}

#[derive(Clone, Copy, ValueEnum)]
enum KArg {
    OptimalRoutes,
    MinFeasible,
}

#[derive(Clone, Copy, ValueEnum)]
enum AxisArg {
    Init,
    Metric,
    Depth,
    NStarts,
}

enum Failure {
    Usage(String),
    Io(anyhow::Error),
    Infeasible(anyhow::Error),
    Other(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Other(e)
    }
}

fn io_err(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Io(e.into())
}

impl FormatArg {
    fn format(self) -> Format {
        match self {
            FormatArg::Csv => Format::Csv,
            FormatArg::JsonLines => Format::JsonLines,
            FormatArg::Human => Format::Human,
        }
    }
}

impl SolverArgs {
    fn config(&self) -> Result<Ctr3Config, Failure> {
        if self.n_starts == 0 {
            return Err(Failure::Usage("--n-starts must be at least 1".into()));
        }
        if self.gap_limit.is_nan() || self.gap_limit < 0.0 {
            return Err(Failure::Usage("--gap-limit must be non-negative".into()));
        }
        if self.exact_threshold > ctr3_core::routing::MAX_EXACT {
            return Err(Failure::Usage(format!(
                "--exact-threshold must be at most {}",
                ctr3_core::routing::MAX_EXACT
            )));
        }
        Ok(Ctr3Config {
            ccbc: CcbcConfig {
                n_starts: self.n_starts,
                gap_limit: self.gap_limit,
                seed: self.seed,
                initializer: match self.init {
                    InitArg::Multistart => Initializer::RandomMultistart,
                    InitArg::Kmeanspp => Initializer::KMeansPlusPlus,
                    InitArg::Sharding => Initializer::NaiveSharding,
                },
                metric: match self.metric {
                    MetricArg::Customized => AssignmentMetric::Customized,
                    MetricArg::Classical => AssignmentMetric::Classical,
                },
                ..CcbcConfig::default()
            },
            routing: RoutingConfig { exact_threshold: self.exact_threshold },
            skip_relink: self.skip_relink,
            ..Ctr3Config::default()
        })
    }

    fn policy(&self) -> DistancePolicy {
        if self.exact_distances {
            DistancePolicy::Exact
        } else {
            DistancePolicy::Rounded
        }
    }
}

fn parse_seeds(s: &str) -> Result<Vec<u64>, Failure> {
    let bad = || Failure::Usage(format!("bad --seeds `{s}`; use `1..5` or `1,2,3`"));
    if let Some((a, b)) = s.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|_| bad())?;
        let b: u64 = b.trim().trim_start_matches('=').parse().map_err(|_| bad())?;
        if a > b {
            return Err(bad());
        }
        return Ok((a..=b).collect());
    }
    s.split(',').map(|t| t.trim().parse().map_err(|_| bad())).collect()
}

fn load_instance(path: &Path, policy: DistancePolicy) -> Result<Instance, Failure> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(io_err)?;
    match cvrplib::parse_vrp(&text, policy) {
        Ok(f) => Ok(f.instance),
        Err(VrpError::Instance(e @ InstanceError::DemandExceedsCapacity { .. })) => {
            Err(Failure::Infeasible(anyhow::anyhow!("{}: {e}", path.display())))
        }
        Err(e) => Err(io_err(anyhow::anyhow!("{}: {e}", path.display()))),
    }
}

fn load_suite(args: &SuiteArgs, policy: DistancePolicy) -> Result<Vec<Instance>, Failure> {
    let dir = args
        .instances
        .as_ref()
        .ok_or_else(|| Failure::Usage("no instance directory: pass --instances or set CTR3_INSTANCE_DIR".into()))?;
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("listing {}", dir.display()))
        .map_err(io_err)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "vrp"))
        .collect();
    paths.sort();
    let mut out = Vec::new();
    for p in paths {
        let stem = p.file_stem().unwrap_or_default().to_string_lossy().to_string();
        let group = stem.split('-').next().unwrap_or("");
        if !args.group.is_empty() && !args.group.iter().any(|g| g.eq_ignore_ascii_case(group)) {
            continue;
        }
        if let (Some(max), Some(n)) = (args.max_customers, bench::customers_from_name(&stem)) {
            if n > max {
                continue;
            }
        }
        out.push(load_instance(&p, policy)?);
    }
    if out.is_empty() {
        return Err(Failure::Io(anyhow::anyhow!("no matching .vrp files in {}", dir.display())));
    }
    Ok(out)
}

fn sink(out: &Option<PathBuf>) -> Result<Box<dyn Write>, Failure> {
    match out {
        Some(p) => {
            let f = File::create(p).with_context(|| format!("creating {}", p.display())).map_err(io_err)?;
            Ok(Box::new(BufWriter::new(f)))
        }
        None => Ok(Box::new(io::stdout().lock())),
    }
}

#[derive(Serialize)]
struct RouteRow<'a> {
    route: usize,
    load: f64,
    cost: f64,
    sequence: &'a str,
}

fn solve(instance: &Path, solver: &SolverArgs, output: &OutputArgs) -> Result<(), Failure> {
    let cfg = solver.config()?;
    let inst = load_instance(instance, solver.policy())?;
    let pool = parallel::thread_pool(solver.threads)?;
    let res = pool.install(|| parallel::solve(&inst, &cfg));
    let sol = &res.solution;
    let violations = ctr3_core::validate_solution(&inst, sol);
    if let Some(v) = violations.first() {
        return Err(Failure::Other(anyhow::anyhow!("solver produced an invalid solution: {v}")));
    }
    let mut out = sink(&output.out)?;
    let seqs: Vec<String> = sol
        .routes
        .iter()
        .map(|r| r.sequence.iter().map(usize::to_string).collect::<Vec<_>>().join(" "))
        .collect();
    match output.format {
        FormatArg::Human => {
            write!(out, "{}", cvrplib::write_sol(sol)).map_err(io_err)?;
            for (k, r) in sol.routes.iter().enumerate() {
                writeln!(out, "Load #{}: {}", k + 1, r.load).map_err(io_err)?;
            }
            writeln!(out, "Vehicles {}", sol.k()).map_err(io_err)?;
        }
        FormatArg::Csv => {
            let mut w = csv::Writer::from_writer(out);
            for (k, r) in sol.routes.iter().enumerate() {
                w.serialize(RouteRow { route: k + 1, load: r.load, cost: r.cost, sequence: &seqs[k] })
                    .map_err(io_err)?;
            }
            w.flush().map_err(io_err)?;
            return Ok(());
        }
        FormatArg::JsonLines => {
            for (k, r) in sol.routes.iter().enumerate() {
                let row = RouteRow { route: k + 1, load: r.load, cost: r.cost, sequence: &seqs[k] };
                serde_json::to_writer(&mut out, &row).map_err(io_err)?;
                out.write_all(b"\n").map_err(io_err)?;
            }
            let total = serde_json::json!({ "instance": inst.name, "cost": sol.total_cost, "vehicles": sol.k() });
            writeln!(out, "{total}").map_err(io_err)?;
        }
    }
    out.flush().map_err(io_err)?;
    Ok(())
}

fn write_reports(reports: &[BenchReport], groups: &[(String, Vec<BenchReport>)], output: &OutputArgs) -> Result<(), Failure> {
    let mut out = sink(&output.out)?;
    match output.format {
        FormatArg::Csv => bench::write_csv(&mut out, reports).map_err(io_err)?,
        FormatArg::JsonLines => {
            for r in reports {
                serde_json::to_writer(&mut out, r).map_err(io_err)?;
                out.write_all(b"\n").map_err(io_err)?;
            }
        }
        FormatArg::Human => {
            for r in reports {
                let gap = r.gap_pct.map_or("-".into(), |g| format!("{g:.2}%"));
                writeln!(out, "{:<12} seed {:>3} value {:>10} gap {gap:>8} K {:>3} {:.2}s", r.instance, r.seed, r.value, r.k, r.runtime_s)
                    .map_err(io_err)?;
            }
            write!(out, "{}", bench::format_summary(groups)).map_err(io_err)?;
        }
    }
    out.flush().map_err(io_err)?;
    Ok(())
}

fn bench_cmd(suite: &SuiteArgs, solver: &SolverArgs, output: &OutputArgs) -> Result<(), Failure> {
    let cfg = solver.config()?;
    let seeds = parse_seeds(&suite.seeds)?;
    let instances = load_suite(suite, solver.policy())?;
    let pool = parallel::thread_pool(solver.threads)?;
    let reports = pool.install(|| bench::run_suite(&instances, &cfg, &seeds));
    let best = bench::best_per_instance(&reports);
    let groups = vec![("all runs".to_string(), reports.clone()), ("best over seeds".to_string(), best)];
    write_reports(&reports, &groups, output)
}

fn ablate_cmd(axis: AxisArg, levels: &[usize], suite: &SuiteArgs, solver: &SolverArgs, output: &OutputArgs) -> Result<(), Failure> {
    let axis = match (axis, levels.is_empty()) {
        (AxisArg::NStarts, false) => AblationAxis::NStarts(levels.to_vec()),
        (AxisArg::NStarts, true) => return Err(Failure::Usage("--axis n-starts needs --levels".into())),
        (_, false) => return Err(Failure::Usage("--levels only applies to --axis n-starts".into())),
        (AxisArg::Init, true) => AblationAxis::Initializer,
        (AxisArg::Metric, true) => AblationAxis::Metric,
        (AxisArg::Depth, true) => AblationAxis::PipelineDepth,
    };
    let cfg = solver.config()?;
    let seeds = parse_seeds(&suite.seeds)?;
    let instances = load_suite(suite, solver.policy())?;
    let pool = parallel::thread_pool(solver.threads)?;
    let groups = pool.install(|| bench::run_ablation(&axis, &cfg, &instances, &seeds));
    let all: Vec<BenchReport> = groups.iter().flat_map(|g| g.1.iter().cloned()).collect();
    write_reports(&all, &groups, output)
}

fn block_means(inst: &Instance, blocks: &[Vec<usize>]) -> Vec<Point> {
    blocks
        .iter()
        .map(|b| {
            let m = b.len() as f64;
            Point::new(
                b.iter().map(|&c| inst.pos(c).x).sum::<f64>() / m,
                b.iter().map(|&c| inst.pos(c).y).sum::<f64>() / m,
            )
        })
        .collect()
}

#[derive(Serialize)]
struct ScanRow {
    k_star: usize,
    x: f64,
    y: f64,
    feasible: bool,
}

/// Scans where each centroid of a nearest-centroid witness of the optimal
/// routing partition may move.
fn scan(n: usize, seed: u64, index: u64, steps: usize, opts: ClassifyOptions, path: &Path) -> Result<(), Failure> {
    let inst = explorer::study_instance(n, seed, index).map_err(|e| Failure::Other(e.into()))?;
    let c = explorer::classify_instance(&inst, opts).map_err(|e| Failure::Other(e.into()))?;
    let blocks = &c.cvrp_partition;
    let start = if c.ccbc_partition.len() == blocks.len() {
        block_means(&inst, &c.ccbc_partition)
    } else {
        block_means(&inst, blocks)
    };
    let qp = explorer::nearest_centroids_qp(&inst, blocks, &start, seed)
        .map_err(|e| Failure::Other(anyhow::anyhow!("instance {index}: {e}")))?;
    log::info!("instance {index}: witness objective {:.4}, margin {:.2e}", qp.objective, qp.min_margin);
    let side = ctr3_core::instance::GENERATOR_SIDE;
    let file = File::create(path).with_context(|| format!("creating {}", path.display())).map_err(io_err)?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    for k_star in 0..blocks.len() {
        for p in explorer::region_scan(&inst, &qp.centroids, blocks, k_star, (0.0, side), (0.0, side), steps) {
            w.serialize(ScanRow { k_star, x: p.x, y: p.y, feasible: p.feasible }).map_err(io_err)?;
        }
    }
    w.flush().map_err(io_err)?;
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn explore_cmd(
    n: usize,
    count: usize,
    seed: u64,
    threads: Option<usize>,
    k_choice: KArg,
    no_depot: bool,
    per_instance: &Option<PathBuf>,
    scan_index: Option<u64>,
    scan_out: &Option<PathBuf>,
    scan_steps: usize,
    output: &OutputArgs,
) -> Result<(), Failure> {
    if !(1..=ctr3_core::oracles::MAX_ORACLE_CUSTOMERS).contains(&n) {
        return Err(Failure::Usage(format!("--n must be in 1..={}", ctr3_core::oracles::MAX_ORACLE_CUSTOMERS)));
    }
    let opts = ClassifyOptions {
        k_choice: match k_choice {
            KArg::OptimalRoutes => KChoice::OptimalRoutes,
            KArg::MinFeasible => KChoice::MinFeasible,
        },
        include_depot: !no_depot,
    };
    let pool = parallel::thread_pool(threads)?;
    let (stats, items) = pool
        .install(|| parallel::connection_study(n, count, seed, opts))
        .map_err(|e| Failure::Other(e.into()))?;
    let format = output.format.format();
    let mut out = sink(&output.out)?;
    report::write_stats(&mut out, &[stats], format).map_err(io_err)?;
    out.flush().map_err(io_err)?;
    if let Some(p) = per_instance {
        let f = File::create(p).with_context(|| format!("creating {}", p.display())).map_err(io_err)?;
        let fmt = if format == Format::Human { Format::Csv } else { format };
        report::write_classifications(BufWriter::new(f), &items, fmt).map_err(io_err)?;
    }
    if let (Some(i), Some(p)) = (scan_index, scan_out) {
        scan(n, seed, i, scan_steps, opts, p)?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Solve { instance, solver, output } => solve(&instance, &solver, &output),
        Command::Bench { suite, solver, output } => bench_cmd(&suite, &solver, &output),
        Command::Explore {
            n,
            count,
            seed,
            threads,
            k_choice,
            no_depot,
            per_instance,
            scan_index,
            scan_out,
            scan_steps,
            output,
        } => explore_cmd(n, count, seed, threads, k_choice, no_depot, &per_instance, scan_index, &scan_out, scan_steps, &output),
        Command::Ablate { axis, levels, suite, solver, output } => ablate_cmd(axis, &levels, &suite, &solver, &output),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            Cli::command().error(clap::error::ErrorKind::ArgumentConflict, msg).exit();
        }
        Err(Failure::Io(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(3)
        }
        Err(Failure::Infeasible(e)) => {
            eprintln!("infeasible instance: {e:#}");
            ExitCode::from(4)
        }
        Err(Failure::Other(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
