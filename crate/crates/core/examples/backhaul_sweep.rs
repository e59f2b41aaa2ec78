//! Sweeps the backhaul scaling factor on 3-cell instances, appends runs to a
//! CSV file (rerunning skips finished rows) and writes per-figure data and
//! SVG plots.
//!
//! cargo run --release --example backhaul_sweep -- [results.csv] [figures-dir]

use mcsp::bench::{read_results_csv, run_sweep, write_report, SweepConfig};
use mcsp::driver::Algorithm;

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args: Vec<String> = std::env::args().skip(1).collect();
    let csv = args.first().cloned().unwrap_or_else(|| "results.csv".into());
    let figs = args.get(1).cloned().unwrap_or_else(|| "figures".into());
    let cfg = SweepConfig {
        contents: vec![60],
        requests: vec![300],
        rho_b: vec![0.02, 0.05, 0.1, 0.2, 0.3],
        seeds: (0..3).collect(),
        algos: vec![Algorithm::Rcga, Algorithm::Pba],
        ..SweepConfig::default()
    };
    let summary = run_sweep(&cfg, &csv)?;
    println!("{} new runs, {} already in {csv}", summary.ran, summary.skipped);
    for path in write_report(&read_results_csv(&csv)?, &figs)? {
        println!("wrote {}", path.display());
    }
    Ok(())
}
