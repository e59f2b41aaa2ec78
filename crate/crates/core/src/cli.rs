//! Command-line front end. `run` returns the process exit code: 0 on
//! success, 1 when a solve or check fails, 2 on usage errors.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::bench::{read_results_csv, run_sweep, write_report, SweepConfig};
use crate::cost::{check_feasibility, check_plan, derive_assignment, evaluate, AssignmentPlan, CostBreakdown, Schedule, SettlementMode};
use crate::driver::{solve, Algorithm, SolveReport, SolverConfig, REPORT_SCHEMA};
use crate::error::{McspError, Result};
use crate::instance::{generate_instance, load_instance, save_instance, CellLayout, GeneratorConfig, Violation};
use crate::lp::BackendChoice;
use crate::verify::{verify_pricing_oracle, verify_sandwich};

#[derive(Debug, Parser)]
#[command(name = "mcsp", version, about = "Joint caching and updating across overlapping cells")]
struct Cli {
    /// Worker threads for pricing and sweeps.
    #[arg(long, global = true, env = "MCSP_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a random instance.
    Gen(GenArgs),
    /// Solve an instance and write a JSON report.
    Solve(SolveArgs),
    /// Recompute the cost of a schedule or report and check feasibility.
    Eval(EvalArgs),
    /// Run a grid of instances and algorithms, appending to a CSV file.
    Sweep(SweepArgs),
    /// Summarize a results CSV into per-figure data and SVG files.
    Report(ReportArgs),
    /// Run the randomized self-checks.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
struct GenArgs {
    /// 3 or 7.
    #[arg(long, default_value_t = 3)]
    cells: usize,
    #[arg(long, default_value_t = 100)]
    contents: usize,
    #[arg(long, default_value_t = 500)]
    requests: usize,
    #[arg(long, default_value_t = 12)]
    slots: usize,
    #[arg(long, default_value_t = 0.4)]
    rho_m: f64,
    #[arg(long, default_value_t = 1.0)]
    rho_tt: f64,
    #[arg(long, default_value_t = 0.3)]
    rho_b: f64,
    /// Cache capacity as a fraction of the total content size.
    #[arg(long, default_value_t = 0.5)]
    cache_scale: f64,
    #[arg(long, default_value_t = 2)]
    window_max: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Mode {
    Paper,
    Min,
}

impl From<Mode> for SettlementMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Paper => SettlementMode::Paper,
            Mode::Min => SettlementMode::Min,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Backend {
    Auto,
    Dense,
    Highs,
}

impl From<Backend> for BackendChoice {
    fn from(b: Backend) -> Self {
        match b {
            Backend::Auto => BackendChoice::Auto,
            Backend::Dense => BackendChoice::Dense,
            Backend::Highs => BackendChoice::Highs,
        }
    }
}

#[derive(Debug, Args)]
struct SolveArgs {
    #[arg(long, value_enum)]
    algo: Algorithm,
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, value_enum, default_value = "paper")]
    mode: Mode,
    #[arg(long, value_enum, default_value = "auto")]
    backend: Backend,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    instance: PathBuf,
    /// A schedule file or a solve report.
    #[arg(long)]
    schedule: PathBuf,
    /// Settlement used to derive the assignment when the file carries none.
    #[arg(long, value_enum, default_value = "min")]
    mode: Mode,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ReportArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Directory receiving one data file and one SVG per figure.
    #[arg(long)]
    emit: PathBuf,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[command(subcommand)]
    check: VerifyCheck,
}

#[derive(Debug, Subcommand)]
enum VerifyCheck {
    /// Pricing graph against brute-force enumeration.
    Pricing {
        #[arg(long, default_value_t = 200)]
        trials: usize,
        #[arg(long, default_value_t = 6)]
        max_slots: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Directory for replay files of failing trials.
        #[arg(long)]
        artifacts: Option<PathBuf>,
    },
    /// Bound, exact optimum and solver ordering on tiny instances.
    Sandwich {
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        artifacts: Option<PathBuf>,
    },
}

/// Parses `argv` (including the program name) and runs the command.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return 2;
        }
        // a second call in the same process keeps the existing pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                McspError::Config(_) => 2,
                _ => 1,
            }
        }
    }
}

fn dispatch(cmd: Command) -> Result<i32> {
    match cmd {
        Command::Gen(a) => gen(a),
        Command::Solve(a) => solve_cmd(a),
        Command::Eval(a) => eval(a),
        Command::Sweep(a) => {
            let cfg = SweepConfig::load(&a.config)?;
            let s = run_sweep(&cfg, &a.out)?;
            println!("{} runs, {} already present", s.ran, s.skipped);
            Ok(0)
        }
        Command::Report(a) => {
            let rows = read_results_csv(&a.input)?;
            for path in write_report(&rows, &a.emit)? {
                println!("{}", path.display());
            }
            Ok(0)
        }
        Command::Verify(a) => verify(a.check),
    }
}

fn gen(a: GenArgs) -> Result<i32> {
    let cells = match a.cells {
        3 => CellLayout::Three,
        7 => CellLayout::Seven,
        n => return Err(McspError::Config(format!("--cells must be 3 or 7, got {n}"))),
    };
    let cfg = GeneratorConfig {
        cells,
        num_contents: a.contents,
        num_requests: a.requests,
        horizon: a.slots,
        rho_m: a.rho_m,
        rho_tt: a.rho_tt,
        rho_b: a.rho_b,
        cache_scale: a.cache_scale,
        window_max: a.window_max,
        seed: a.seed,
        ..GeneratorConfig::default()
    };
    let inst = generate_instance(&cfg)?;
    save_instance(&inst, &a.out)?;
    Ok(0)
}

fn write_json(value: &impl Serialize, out: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("report serializes");
    match out {
        Some(path) => fs::write(path, text + "\n").map_err(|e| McspError::io(path, e)),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn solve_cmd(a: SolveArgs) -> Result<i32> {
    let inst = load_instance(&a.instance)?;
    let cfg = SolverConfig { backend: a.backend.into(), ..SolverConfig::with_mode(a.mode.into()) };
    let report = solve(&inst, a.algo, &cfg)?;
    write_json(&report, a.out.as_deref())?;
    if report.success {
        eprintln!(
            "{}: total {:.6} (aoi {:.6}, download {:.6}, update {:.6}) in {:.2}s",
            report.algorithm,
            report.cost.total,
            report.cost.aoi_cost,
            report.cost.download_cost,
            report.cost.update_cost,
            report.wall_time_s
        );
        Ok(0)
    } else {
        eprintln!("{} failed: {}", report.algorithm, report.failure.as_deref().unwrap_or("unknown reason"));
        Ok(1)
    }
}

/// Result of `eval`, printed as JSON.
#[derive(Debug, Serialize)]
struct EvalOutcome {
    cost: CostBreakdown,
    violations: Vec<Violation>,
    /// Cost stored in the report, when the input was one.
    #[serde(skip_serializing_if = "Option::is_none")]
    reported: Option<CostBreakdown>,
    #[serde(skip_serializing_if = "Option::is_none")]
    matches_report: Option<bool>,
}

fn same_cost(a: &CostBreakdown, b: &CostBreakdown) -> bool {
    let close = |x: f64, y: f64| (x - y).abs() <= 1e-9 * x.abs().max(y.abs()).max(1.0);
    close(a.total, b.total)
        && close(a.aoi_cost, b.aoi_cost)
        && close(a.download_cost, b.download_cost)
        && close(a.update_cost, b.update_cost)
}

fn eval(a: EvalArgs) -> Result<i32> {
    let inst = load_instance(&a.instance)?;
    let text = fs::read_to_string(&a.schedule).map_err(|e| McspError::io(&a.schedule, e))?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| McspError::Schema(e.to_string()))?;
    let (schedule, plan, reported): (Schedule, Option<AssignmentPlan>, Option<CostBreakdown>) =
        if value.get("schema").and_then(|s| s.as_str()) == Some(REPORT_SCHEMA) {
            let report: SolveReport = serde_json::from_value(value).map_err(|e| McspError::Schema(e.to_string()))?;
            let schedule = report.schedule.ok_or_else(|| McspError::Schema(format!("{} report carries no schedule", report.algorithm)))?;
            (schedule, report.assignment, Some(report.cost))
        } else {
            let schedule = serde_json::from_value(value).map_err(|e| McspError::Schema(e.to_string()))?;
            (schedule, None, None)
        };
    let mut violations = check_feasibility(&schedule, &inst);
    if !violations.is_empty() {
        write_json(&EvalOutcome { cost: CostBreakdown::default(), violations, reported, matches_report: None }, None)?;
        return Ok(1);
    }
    let plan = plan.unwrap_or_else(|| derive_assignment(&schedule, &inst, a.mode.into()));
    violations.extend(check_plan(&schedule, &plan, &inst));
    let cost = evaluate(&inst, &schedule, &plan);
    let matches_report = reported.as_ref().map(|r| same_cost(r, &cost));
    let ok = violations.is_empty() && matches_report != Some(false);
    write_json(&EvalOutcome { cost, violations, reported, matches_report }, None)?;
    Ok(if ok { 0 } else { 1 })
}

fn verify(check: VerifyCheck) -> Result<i32> {
    match check {
        VerifyCheck::Pricing { trials, max_slots, seed, artifacts } => {
            if max_slots == 0 || max_slots > 8 {
                return Err(McspError::Config("--max-slots must lie in 1..=8".into()));
            }
            let r = verify_pricing_oracle(trials, max_slots, seed, artifacts.as_deref())?;
            println!(
                "{} trials, {} comparisons, max |diff| {:.3e}, {} mismatches",
                r.trials,
                r.comparisons,
                r.max_abs_diff,
                r.mismatches.len()
            );
            Ok(if r.passed() { 0 } else { 1 })
        }
        VerifyCheck::Sandwich { trials, seed, artifacts } => {
            let r = verify_sandwich(trials, seed, artifacts.as_deref())?;
            println!("{} trials, max gap to exact {:.4}, {} violations", r.trials, r.max_gap_to_exact, r.violations.len());
            for v in &r.violations {
                println!("  {v}");
            }
            Ok(if r.passed() { 0 } else { 1 })
        }
    }
}
