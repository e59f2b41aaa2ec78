//! Writes the compact integer program of a small instance in LP format and
//! solves it with HiGHS for comparison with the column generation solver.
//!
//! cargo run --release --example export_ilp -- [seed] [out.lp]

use mcsp::baselines::{export_ilp, IlpModel};
use mcsp::driver::{run_rcga, SolverConfig};
use mcsp::instance::{generate_instance, GeneratorConfig};

fn main() -> anyhow::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let seed = args.first().map(|s| s.parse()).transpose()?.unwrap_or(0);
    let out = args.get(1).cloned().unwrap_or_else(|| "mcsp.lp".into());
    let inst = generate_instance(&GeneratorConfig { num_contents: 20, num_requests: 80, horizon: 6, seed, ..GeneratorConfig::default() })?;
    std::fs::write(&out, export_ilp(&inst))?;
    let model = IlpModel::new(&inst);
    println!("wrote {out}: {} x, {} z, {} y variables, {} rows", model.num_x(), model.num_z(), model.num_y(), model.lp.num_rows());
    let optimum = model.solve(Some(60.0))?;
    let rcga = run_rcga(&inst, &SolverConfig::with_mode(mcsp::cost::SettlementMode::Min))?;
    println!("integer optimum {optimum:?}");
    println!("rcga total {:.6}, lower bound {:.6}", rcga.cost.total, rcga.lower_bound.unwrap_or(f64::NAN));
    Ok(())
}
