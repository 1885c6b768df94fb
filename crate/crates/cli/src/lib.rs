//! Experiment runner behind the `synergy` binary.
//!
//! Exit codes: 0 success (or convergence for `run`), 1 configuration or
//! input error, 2 a single run that hit `t_max` without converging.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;
use synergy_core::analysis::metrics::{median, std_dev};
use synergy_core::analysis::{untraceability_report_from, UntraceabilityReport};
use synergy_core::engine::{check_params, run_with, RunOptions, Severity};
use synergy_core::output::{read_trajectory_csv, write_trajectory_csv, RunSummary};
use synergy_core::scenario::{Layout, Scenario};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_NOT_CONVERGED: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "synergy",
    version,
    about = "Swarm community formation simulator"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one scenario and write its trajectory log and summary.
    Run(RunArgs),
    /// Seeded repeats, optionally across the values of one parameter.
    Sweep(SweepArgs),
    /// Membership, minimum-size and untraceability tables for finished runs.
    Report(ReportArgs),
    /// Print parameter diagnostics for a scenario.
    Check(CheckArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    /// Overrides the seed in the scenario file.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, env = "SYNERGY_OUT", default_value = "runs")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    /// Seed of the first repeat; repeat `k` uses `seed + k`.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 5)]
    pub repeats: usize,
    /// Worker threads; 0 lets the pool decide.
    #[arg(long, default_value_t = 0)]
    pub workers: usize,
    /// `name=v1,v2,...`; without it the base scenario is repeated.
    #[arg(long)]
    pub sweep: Option<String>,
    #[arg(long, env = "SYNERGY_OUT", default_value = "runs")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Directory searched recursively for `summary_*.json`.
    pub dir: PathBuf,
    /// Where `report.txt` and `report.json` go; defaults to `dir`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[arg(long)]
    pub scenario: PathBuf,
}

/// Runs a parsed command line and returns the process exit code.
pub fn execute(cli: Cli) -> i32 {
    let result = match cli.command {
        Command::Run(a) => cmd_run(&a),
        Command::Sweep(a) => cmd_sweep(&a).map(|_| EXIT_OK),
        Command::Report(a) => cmd_report(&a).map(|_| EXIT_OK),
        Command::Check(a) => cmd_check(&a),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e:#}");
        EXIT_CONFIG
    })
}

fn load(path: &Path) -> Result<Scenario> {
    Scenario::load(path).map_err(|e| anyhow!("{}: {e}", path.display()))
}

/// Fails on any ERROR diagnostic; INFO lines go to stderr.
fn gate(scenario: &Scenario) -> Result<()> {
    let diags = check_params(&scenario.params, scenario.swarm_size());
    for d in &diags {
        eprintln!("{d}");
    }
    if diags.iter().any(|d| d.severity == Severity::Error) {
        bail!("scenario rejected by parameter checks");
    }
    Ok(())
}

/// Runs `scenario` and writes `trajectory_s{seed}.csv` and
/// `summary_s{seed}.json` into `dir`.
pub fn run_to_dir(scenario: &Scenario, dir: &Path) -> Result<RunSummary> {
    let seed = scenario.params.seed;
    let initial = scenario.initial_poses()?;
    let record = run_with(
        scenario.params.clone(),
        initial,
        scenario.spawns.clone(),
        RunOptions {
            record_stride: scenario.record_stride,
        },
    )?;
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let traj_name = format!("trajectory_s{seed}.csv");
    let traj = File::create(dir.join(&traj_name))?;
    write_trajectory_csv(&record, 1, BufWriter::new(traj))?;
    let mut summary = RunSummary::from_record(&record);
    summary.trajectory_file = Some(traj_name);
    fs::write(dir.join(format!("summary_s{seed}.json")), summary.to_json())?;
    Ok(summary)
}

pub fn cmd_run(args: &RunArgs) -> Result<i32> {
    let mut scenario = load(&args.scenario)?;
    if let Some(seed) = args.seed {
        scenario = scenario.with_seed(seed);
    }
    gate(&scenario)?;
    let s = run_to_dir(&scenario, &args.out)?;
    match s.synergy_time {
        Some(t) => println!(
            "seed {}: synergy at {t:.1} s, {} communities {:?}",
            s.seed, s.n_communities, s.communities
        ),
        None => println!(
            "seed {}: no synergy by {:.1} s ({} communities, {} robots moving or unassigned)",
            s.seed,
            s.t_end,
            s.n_communities,
            s.outliers.len()
        ),
    }
    for w in &s.warnings {
        eprintln!("warning: {w}");
    }
    Ok(if s.converged {
        EXIT_OK
    } else {
        EXIT_NOT_CONVERGED
    })
}

pub fn cmd_check(args: &CheckArgs) -> Result<i32> {
    let scenario = load(&args.scenario)?;
    let diags = check_params(&scenario.params, scenario.swarm_size());
    if diags.is_empty() {
        println!("no diagnostics");
    }
    for d in &diags {
        println!("{d}");
    }
    Ok(if diags.iter().any(|d| d.severity == Severity::Error) {
        EXIT_CONFIG
    } else {
        EXIT_OK
    })
}

/// Names accepted by `--sweep`.
pub const SWEEPABLE: &[&str] = &[
    "sensing_range",
    "fov_half_angle",
    "fov_half_angle_deg",
    "safe_distance",
    "goal_radius",
    "min_community_size",
    "v_max",
    "turn_gain",
    "avoid_turn_gain",
    "avoid_bearing_gain",
    "decel",
    "dt",
    "t_max",
    "hold_window",
    "body_radius",
    "brake_distance",
    "env_size",
    "goal_size",
    "swarm_size",
    "specific_area",
];

/// Parses `name=v1,v2,...`.
pub fn parse_sweep(text: &str) -> Result<(String, Vec<f64>)> {
    let (name, values) = text
        .split_once('=')
        .ok_or_else(|| anyhow!("--sweep expects name=v1,v2,...; got {text:?}"))?;
    let name = name.trim();
    if !SWEEPABLE.contains(&name) {
        bail!("cannot sweep {name:?}; known: {}", SWEEPABLE.join(", "));
    }
    let values = values
        .split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| anyhow!("bad sweep value {v:?}"))
        })
        .collect::<Result<Vec<_>>>()?;
    if values.is_empty() {
        bail!("--sweep needs at least one value");
    }
    Ok((name.to_string(), values))
}

fn as_count(name: &str, value: f64) -> Result<usize> {
    if value < 0.0 || value.fract() != 0.0 {
        bail!("{name} must be a non-negative integer, got {value}");
    }
    Ok(value as usize)
}

/// The scenario with one parameter replaced. `specific_area` resizes the
/// environment to that many square metres per robot.
pub fn apply_override(base: &Scenario, name: &str, value: f64) -> Result<Scenario> {
    let mut s = base.clone();
    let p = &mut s.params;
    match name {
        "sensing_range" => p.sensing_range = value,
        "fov_half_angle" => p.fov_half_angle = value,
        "fov_half_angle_deg" => p.fov_half_angle = value.to_radians(),
        "safe_distance" => p.safe_distance = value,
        "goal_radius" => p.goal_radius = value,
        "min_community_size" => p.min_community_size = as_count(name, value)?,
        "v_max" => p.v_max = value,
        "turn_gain" => p.turn_gain = value,
        "avoid_turn_gain" => p.avoid_turn_gain = value,
        "avoid_bearing_gain" => p.avoid_bearing_gain = value,
        "decel" => p.decel = value,
        "dt" => p.dt = value,
        "t_max" => p.t_max = value,
        "hold_window" => p.hold_window = value,
        "body_radius" => p.body_radius = value,
        "brake_distance" => p.brake_distance = value,
        "env_size" => p.env_bounds = synergy_core::Rect64::centered_square(value),
        "goal_size" => p.goal_bounds = synergy_core::Rect64::centered_square(value),
        "swarm_size" => match &mut s.layout {
            Layout::Random { count, .. } => *count = as_count(name, value)?,
            Layout::Explicit(_) => bail!("swarm_size cannot be swept with explicit robots"),
        },
        "specific_area" => {
            let n = s.swarm_size();
            s.params = s.params.clone().with_specific_area(value, n);
        }
        other => bail!("cannot sweep {other:?}"),
    }
    s.params
        .validate()
        .map_err(|e| anyhow!("{name} = {value}: {e}"))?;
    Ok(s)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRow {
    pub param_value: String,
    pub run: usize,
    pub seed: u64,
    pub synergy_time: Option<f64>,
    pub n_communities: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateRow {
    pub param_value: String,
    pub n_runs: usize,
    pub n_converged: usize,
    pub n_failed: usize,
    /// Over converged runs.
    pub st_median: Option<f64>,
    pub st_std: Option<f64>,
    pub communities_median: Option<f64>,
    pub communities_std: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct FailureRow {
    param_value: String,
    run: usize,
    seed: u64,
    error: String,
}

fn value_label(v: f64) -> String {
    format!("{v}")
}

fn aggregate(label: &str, rows: &[&RunRow]) -> AggregateRow {
    let st: Vec<f64> = rows.iter().filter_map(|r| r.synergy_time).collect();
    let comm: Vec<f64> = rows
        .iter()
        .filter(|r| r.synergy_time.is_some())
        .filter_map(|r| r.n_communities.map(|c| c as f64))
        .collect();
    AggregateRow {
        param_value: label.to_string(),
        n_runs: rows.len(),
        n_converged: st.len(),
        n_failed: rows.iter().filter(|r| r.n_communities.is_none()).count(),
        st_median: median(&st),
        st_std: std_dev(&st),
        communities_median: median(&comm),
        communities_std: std_dev(&comm),
    }
}

fn write_csv<S: Serialize>(path: &Path, rows: &[S], header: &[&str]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("{}", path.display()))?;
    if rows.is_empty() {
        w.write_record(header)?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Per-value subdirectories hold each run's files; `runs.csv`,
/// `aggregate.csv` and, if anything failed, `failures.csv` go in `out`.
pub fn cmd_sweep(args: &SweepArgs) -> Result<Vec<AggregateRow>> {
    if args.repeats == 0 {
        bail!("--repeats must be at least 1");
    }
    let base = load(&args.scenario)?;
    let seed_base = args.seed.unwrap_or(base.params.seed);
    let axis = args.sweep.as_deref().map(parse_sweep).transpose()?;

    let mut jobs = Vec::new();
    match &axis {
        None => jobs.push(("base".to_string(), Ok(base.clone()), args.out.clone())),
        Some((name, values)) => {
            for &v in values {
                let label = value_label(v);
                let dir = args.out.join(format!("{name}={label}"));
                jobs.push((label, apply_override(&base, name, v), dir));
            }
        }
    }

    let mut tasks = Vec::new();
    for (label, scenario, dir) in &jobs {
        for run in 0..args.repeats {
            tasks.push((label.clone(), scenario, dir.clone(), run));
        }
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.workers)
        .build()?;
    let outcomes: Vec<(RunRow, Option<String>)> = pool.install(|| {
        tasks
            .par_iter()
            .map(|(label, scenario, dir, run)| {
                let seed = seed_base + *run as u64;
                let result = match scenario {
                    Ok(s) => {
                        let s = s.with_seed(seed);
                        let diags = check_params(&s.params, s.swarm_size());
                        match diags.iter().find(|d| d.severity == Severity::Error) {
                            Some(d) => Err(anyhow!("{d}")),
                            None => run_to_dir(&s, dir),
                        }
                    }
                    Err(e) => Err(anyhow!("{e}")),
                };
                let (synergy_time, n_communities, error) = match result {
                    Ok(summary) => (summary.synergy_time, Some(summary.n_communities), None),
                    Err(e) => (None, None, Some(format!("{e:#}"))),
                };
                (
                    RunRow {
                        param_value: label.clone(),
                        run: *run,
                        seed,
                        synergy_time,
                        n_communities,
                    },
                    error,
                )
            })
            .collect()
    });

    fs::create_dir_all(&args.out)?;
    let rows: Vec<RunRow> = outcomes.iter().map(|(r, _)| r.clone()).collect();
    let failures: Vec<FailureRow> = outcomes
        .iter()
        .filter_map(|(r, e)| {
            e.as_ref().map(|e| FailureRow {
                param_value: r.param_value.clone(),
                run: r.run,
                seed: r.seed,
                error: e.clone(),
            })
        })
        .collect();
    for f in &failures {
        eprintln!(
            "run {} (value {}, seed {}) failed: {}",
            f.run, f.param_value, f.seed, f.error
        );
    }
    write_csv(
        &args.out.join("runs.csv"),
        &rows,
        &[
            "param_value",
            "run",
            "seed",
            "synergy_time",
            "n_communities",
        ],
    )?;
    if !failures.is_empty() {
        write_csv(&args.out.join("failures.csv"), &failures, &[])?;
    }

    let aggregates: Vec<AggregateRow> = jobs
        .iter()
        .map(|(label, _, _)| {
            let group: Vec<&RunRow> = rows.iter().filter(|r| &r.param_value == label).collect();
            aggregate(label, &group)
        })
        .collect();
    write_csv(&args.out.join("aggregate.csv"), &aggregates, &[])?;
    for a in &aggregates {
        println!(
            "{:>10}: {}/{} converged, median ST {}, median communities {}",
            a.param_value,
            a.n_converged,
            a.n_runs,
            a.st_median.map_or("-".into(), |v| format!("{v:.1}")),
            a.communities_median
                .map_or("-".into(), |v| format!("{v:.1}")),
        );
    }
    Ok(aggregates)
}

/// A summary together with the directory it was found in.
#[derive(Debug, Clone)]
pub struct FoundRun {
    pub dir: PathBuf,
    pub summary: RunSummary,
}

/// Every `summary_*.json` under `dir`, in path order.
pub fn collect_summaries(dir: &Path) -> Result<Vec<FoundRun>> {
    if !dir.is_dir() {
        bail!("{} is not a directory", dir.display());
    }
    let mut paths: Vec<PathBuf> = walkdir::WalkDir::new(dir)
        .into_iter()
        .filter_map(|e| e.ok())
        .map(|e| e.into_path())
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("summary_") && n.ends_with(".json"))
        })
        .collect();
    paths.sort();
    paths
        .into_iter()
        .map(|p| {
            let text = fs::read_to_string(&p)?;
            let summary =
                RunSummary::from_json(&text).with_context(|| format!("{}", p.display()))?;
            let dir = p.parent().map(Path::to_path_buf).unwrap_or_default();
            Ok(FoundRun { dir, summary })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SizeRow {
    pub swarm_size: usize,
    pub min_community_size: usize,
    pub n_runs: usize,
    pub n_converged: usize,
    /// Over converged runs.
    pub mean_communities: Option<f64>,
    pub mean_synergy_time: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SwarmGroup {
    pub swarm_size: usize,
    pub runs: Vec<RunSummary>,
    pub untraceability: Option<UntraceabilityReport>,
    pub notice: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub groups: Vec<SwarmGroup>,
    pub minimum_size: Vec<SizeRow>,
}

fn mean_of(v: &[f64]) -> Option<f64> {
    synergy_core::analysis::metrics::mean(v)
}

pub fn build_report(found: &[FoundRun]) -> Result<Report> {
    if found.is_empty() {
        bail!("no run summaries found");
    }
    let mut by_size: BTreeMap<usize, Vec<&FoundRun>> = BTreeMap::new();
    for f in found {
        by_size.entry(f.summary.swarm_size).or_default().push(f);
    }

    let mut groups = Vec::new();
    for (&swarm_size, runs) in &by_size {
        let mut traces = Vec::new();
        let mut notice = None;
        for f in runs {
            let Some(name) = &f.summary.trajectory_file else {
                notice = Some(format!("seed {} has no trajectory log", f.summary.seed));
                break;
            };
            let path = f.dir.join(name);
            let rows = File::open(&path)
                .map_err(anyhow::Error::from)
                .and_then(|file| read_trajectory_csv(file).map_err(anyhow::Error::from))
                .with_context(|| format!("{}", path.display()))?;
            traces.push(f.summary.trace(&rows));
        }
        let untraceability = if notice.is_none() {
            match untraceability_report_from(&traces) {
                Ok(r) => Some(r),
                Err(e) => {
                    notice = Some(e.to_string());
                    None
                }
            }
        } else {
            None
        };
        groups.push(SwarmGroup {
            swarm_size,
            runs: runs.iter().map(|f| f.summary.clone()).collect(),
            untraceability,
            notice,
        });
    }

    let mut by_m: BTreeMap<(usize, usize), Vec<&RunSummary>> = BTreeMap::new();
    for f in found {
        by_m.entry((f.summary.swarm_size, f.summary.params.min_community_size))
            .or_default()
            .push(&f.summary);
    }
    let minimum_size = by_m
        .into_iter()
        .map(|((swarm_size, m), runs)| {
            let conv: Vec<&&RunSummary> = runs.iter().filter(|r| r.converged).collect();
            let comm: Vec<f64> = conv.iter().map(|r| r.n_communities as f64).collect();
            let st: Vec<f64> = conv.iter().filter_map(|r| r.synergy_time).collect();
            SizeRow {
                swarm_size,
                min_community_size: m,
                n_runs: runs.len(),
                n_converged: conv.len(),
                mean_communities: mean_of(&comm),
                mean_synergy_time: mean_of(&st),
            }
        })
        .collect();
    Ok(Report {
        groups,
        minimum_size,
    })
}

fn members_text(communities: &[Vec<usize>]) -> String {
    communities
        .iter()
        .map(|c| {
            let ids: Vec<String> = c.iter().map(|m| m.to_string()).collect();
            format!("{{{}}}", ids.join(","))
        })
        .collect::<Vec<_>>()
        .join(" ")
}

impl Report {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        if self.groups.len() > 1 {
            let sizes: Vec<String> = self
                .groups
                .iter()
                .map(|g| g.swarm_size.to_string())
                .collect();
            let _ = writeln!(
                s,
                "note: runs have mixed swarm sizes ({}); grouped per size\n",
                sizes.join(", ")
            );
        }
        for g in &self.groups {
            let _ = writeln!(s, "== Swarm size {} ==", g.swarm_size);
            let _ = writeln!(
                s,
                "{:>6}  {:>3}  {:>10}  {:>11}  Members",
                "Seed", "M", "ST (s)", "Communities"
            );
            for r in &g.runs {
                let _ = writeln!(
                    s,
                    "{:>6}  {:>3}  {:>10}  {:>11}  {}",
                    r.seed,
                    r.params.min_community_size,
                    r.synergy_time.map_or("-".into(), |t| format!("{t:.1}")),
                    r.n_communities,
                    members_text(&r.communities)
                );
            }
            if let Some(n) = &g.notice {
                let _ = writeln!(s, "untraceability skipped: {n}");
            }
            if let Some(u) = &g.untraceability {
                let _ = writeln!(s);
                s.push_str(&u.to_text());
            }
            let _ = writeln!(s);
        }
        let _ = writeln!(s, "== Minimum community size ==");
        let _ = writeln!(
            s,
            "{:>4}  {:>3}  {:>5}  {:>9}  {:>16}  {:>11}",
            "S", "M", "Runs", "Converged", "Mean communities", "Mean ST (s)"
        );
        for r in &self.minimum_size {
            let _ = writeln!(
                s,
                "{:>4}  {:>3}  {:>5}  {:>9}  {:>16}  {:>11}",
                r.swarm_size,
                r.min_community_size,
                r.n_runs,
                r.n_converged,
                r.mean_communities.map_or("-".into(), |v| format!("{v:.2}")),
                r.mean_synergy_time
                    .map_or("-".into(), |v| format!("{v:.1}")),
            );
        }
        s
    }
}

pub fn cmd_report(args: &ReportArgs) -> Result<Report> {
    let found = collect_summaries(&args.dir)?;
    let report = build_report(&found)?;
    let out = args.out.clone().unwrap_or_else(|| args.dir.clone());
    fs::create_dir_all(&out)?;
    let text = report.to_text();
    fs::write(out.join("report.txt"), &text)?;
    fs::write(
        out.join("report.json"),
        serde_json::to_string_pretty(&report)?,
    )?;
    print!("{text}");
    Ok(report)
}
