//! The one-server, one-content, two-slot instance end to end: every column
//! with its standalone cost, the first pricing round, the bound and the
//! schedules found by each solver.
//!
//! cargo run --example tiny_walkthrough

use mcsp::baselines::{exact_optimum, ExactCaps};
use mcsp::column::{column_cost_s, enumerate_columns, AllowedStates, ColumnPool};
use mcsp::cost::{Settlement, SettlementMode};
use mcsp::driver::{run_lb, run_rcga, SolverConfig};
use mcsp::instance::{Instance, RequestIndex};
use mcsp::pricing::price_all;
use mcsp::rmp::Rmp;

fn main() -> anyhow::Result<()> {
    let inst = Instance::tiny();
    let idx = RequestIndex::new(&inst);

    println!("columns and standalone costs:");
    for col in enumerate_columns(inst.horizon)? {
        println!(
            "  {col}  deadline {:>6.3}  best slot {:>6.3}",
            column_cost_s(&col, 0, 0, &inst, &idx, Settlement::Paper),
            column_cost_s(&col, 0, 0, &inst, &idx, Settlement::Flexible)
        );
    }

    let pool = ColumnPool::initial(&inst, &idx, Settlement::Paper);
    let mut rmp = Rmp::new(&inst, &idx, &pool, Default::default())?;
    let sol = rmp.solve(&inst, &idx, &pool)?;
    println!("\nmaster over the empty column: objective {}, lambda {}", sol.objective, sol.duals.lambda(0, 0));
    for c in price_all(&pool, &sol.duals, &inst, &idx, &AllowedStates::all(&inst)) {
        println!("priced column {} with reduced cost {}", c.column, c.reduced_cost);
    }

    let cfg = SolverConfig::default();
    let lb = run_lb(&inst, &cfg)?;
    let rcga = run_rcga(&inst, &cfg)?;
    let (exact, best) = exact_optimum(&inst, SettlementMode::Paper, ExactCaps::default())?;
    println!("\nlower bound {:?}", lb.lower_bound);
    println!("rcga        {} with schedule {}", rcga.cost.total, rcga.schedule.as_ref().unwrap().column(0, 0));
    println!("exact       {exact} with schedule {}", best.column(0, 0));
    Ok(())
}
