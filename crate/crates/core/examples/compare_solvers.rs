//! Solves one generated instance with the repeated rounding solver, the
//! naive rounding solver and the popularity greedy, and prints their costs.
//!
//! cargo run --release --example compare_solvers -- [3|7] [seed]

use mcsp::baselines::run_pba;
use mcsp::driver::{run_nrs, run_rcga, SolveReport, SolverConfig};
use mcsp::instance::{generate_instance, CellLayout, GeneratorConfig};

fn line(r: &SolveReport) {
    println!(
        "{:<5} ok={:<5} total={:>12.3} aoi={:>10.3} download={:>10.3} update={:>10.3} lb={:>12} gap={:>8} rounds={}/{} time={:.2}s{}",
        r.algorithm.as_str(),
        r.success,
        r.cost.total,
        r.cost.aoi_cost,
        r.cost.download_cost,
        r.cost.update_cost,
        r.lower_bound.map_or("-".into(), |v| format!("{v:.3}")),
        r.gap.map_or("-".into(), |g| format!("{:.3}%", 100.0 * g)),
        r.pricing_rounds,
        r.rounding_rounds,
        r.wall_time_s,
        r.failure.as_deref().map_or(String::new(), |f| format!("  ({f})")),
    );
}

fn main() -> anyhow::Result<()> {
    env_logger::init();
    let args: Vec<String> = std::env::args().skip(1).collect();
    let seven = args.first().is_some_and(|a| a == "7");
    let seed = args.get(1).map(|s| s.parse()).transpose()?.unwrap_or(1);
    let cfg = if seven {
        GeneratorConfig { cells: CellLayout::Seven, num_contents: 200, num_requests: 2000, seed, ..GeneratorConfig::default() }
    } else {
        GeneratorConfig { seed, ..GeneratorConfig::default() }
    };
    let inst = generate_instance(&cfg)?;
    println!("{} cells, {} contents, {} requests, {} slots", inst.num_servers(), inst.num_contents(), inst.requests.len(), inst.horizon);
    let solver = SolverConfig::default();
    line(&run_rcga(&inst, &solver)?);
    line(&run_nrs(&inst, &solver)?);
    line(&run_pba(&inst));
    Ok(())
}
