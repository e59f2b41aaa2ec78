//! Runs the randomized self-checks: pricing graph against brute force, and
//! the bound / exact optimum / solver ordering on tiny instances.
//!
//! cargo run --release --example verify_oracles -- [trials] [seed]

use mcsp::verify::{verify_pricing_oracle, verify_sandwich};

fn main() -> anyhow::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let trials = args.first().map(|s| s.parse()).transpose()?.unwrap_or(200);
    let seed = args.get(1).map(|s| s.parse()).transpose()?.unwrap_or(0);

    let oracle = verify_pricing_oracle(trials, 6, seed, Some("oracle-failures".as_ref()))?;
    println!(
        "pricing: {} comparisons over {} trials, {} mismatches, max |diff| {:.2e}",
        oracle.comparisons,
        oracle.trials,
        oracle.mismatches.len(),
        oracle.max_abs_diff
    );
    let sandwich = verify_sandwich(trials / 2, seed, Some("oracle-failures".as_ref()))?;
    println!(
        "ordering: {} tiny instances, {} violations, worst gap to the exact optimum {:.1}%",
        sandwich.cases.len(),
        sandwich.violations.len(),
        100.0 * sandwich.max_gap_to_exact
    );
    for v in &sandwich.violations {
        println!("  {v}");
    }
    Ok(())
}
