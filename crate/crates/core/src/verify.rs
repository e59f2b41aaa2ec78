//! Randomized self-checks: pricing against brute force, and the
//! lower bound / exact optimum / solver cost ordering on tiny instances.

use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::baselines::{exact_optimum, ExactCaps};
use crate::column::{enumerate_columns, AllowedStates, SlotState};
use crate::cost::{Settlement, SettlementMode};
use crate::driver::{run_rcga, SolverConfig};
use crate::error::{McspError, Result};
use crate::instance::{save_instance, ContentSpec, CostParams, Instance, Request, RequestIndex, ServerSpec, Topology};
use crate::pricing::build_graph;
use crate::rmp::{reduced_cost, DualPrices};

/// Shape of random tiny instances.
#[derive(Clone, Copy, Debug)]
pub struct TinyShape {
    pub servers: usize,
    pub max_contents: usize,
    pub max_horizon: usize,
    pub max_requests: usize,
}

/// A random instance within `shape`. With two or more servers, every
/// consecutive pair overlaps and about half the requests list two servers.
pub fn random_tiny_instance(rng: &mut impl Rng, shape: TinyShape) -> Instance {
    let h_count = shape.servers.max(1);
    let i_count = rng.random_range(1..=shape.max_contents.max(1));
    let horizon = rng.random_range(1..=shape.max_horizon.max(1));
    let contents: Vec<ContentSpec> = (0..i_count).map(|_| ContentSpec { size: rng.random_range(1..=3) }).collect();
    let total: u32 = contents.iter().map(|c| c.size).sum();
    let servers = (0..h_count)
        .map(|_| ServerSpec { cache_capacity: rng.random_range(1..=total) as f64, backhaul_capacity: rng.random_range(1..=total) as f64 })
        .collect();
    let edges: Vec<(usize, usize)> = (1..h_count).map(|h| (h - 1, h)).collect();
    let n_req = rng.random_range(0..=shape.max_requests);
    let requests = (0..n_req)
        .map(|_| {
            let origin = rng.random_range(0..horizon);
            let deadline = rng.random_range(origin..horizon);
            let candidates = match edges.choose(rng) {
                Some(&(a, b)) if rng.random_bool(0.5) => vec![a, b],
                _ => vec![rng.random_range(0..h_count)],
            };
            Request { content: rng.random_range(0..i_count), origin, deadline, candidates }
        })
        .collect();
    Instance {
        servers,
        contents,
        requests,
        horizon,
        cost: CostParams { alpha: rng.random_range(1.0..12.0), beta: rng.random_range(0.5..1.0), ..CostParams::default() },
        topology: Topology { edges, triples: vec![] },
    }
}

/// Random duals: `pi`, `mu`, `phi` in `[-3, 3]`, `lambda` in `[0, 50]`.
pub fn random_duals(rng: &mut impl Rng, inst: &Instance) -> DualPrices {
    let mut d = DualPrices::zeros(inst);
    for v in d.pi.iter_mut().flatten().flatten() {
        *v = rng.random_range(-3.0..=3.0);
    }
    for v in d.mu.iter_mut().chain(d.phi.iter_mut()) {
        *v = rng.random_range(-3.0..=3.0);
    }
    for v in d.lambda.iter_mut() {
        *v = rng.random_range(0.0..=50.0);
    }
    d
}

/// Forbids a few random slot states.
fn random_masks(rng: &mut impl Rng, inst: &Instance) -> AllowedStates {
    let mut allowed = AllowedStates::all(inst);
    if rng.random_bool(0.5) {
        return allowed;
    }
    for h in 0..inst.num_servers() {
        for i in 0..inst.num_contents() {
            for t in 0..inst.horizon {
                if rng.random_bool(0.15) {
                    let s = *SlotState::ALL.choose(rng).expect("three states");
                    allowed.forbid(h, i, t, s);
                }
            }
        }
    }
    allowed
}

#[derive(Clone, Debug, Serialize)]
pub struct OracleMismatch {
    pub trial: usize,
    pub server: usize,
    pub content: usize,
    pub rule: Settlement,
    pub graph: Option<f64>,
    pub brute_force: Option<f64>,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct OracleReport {
    pub trials: usize,
    pub comparisons: usize,
    pub max_abs_diff: f64,
    pub mismatches: Vec<OracleMismatch>,
}

impl OracleReport {
    pub fn passed(&self) -> bool {
        self.mismatches.is_empty()
    }
}

fn write_artifacts(dir: &Path, name: &str, inst: &Instance, extra: &impl Serialize) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| McspError::io(dir, e))?;
    save_instance(inst, dir.join(format!("{name}-instance.json")))?;
    let path = dir.join(format!("{name}-detail.json"));
    let text = serde_json::to_string_pretty(extra).expect("artifact serializes");
    fs::write(&path, text).map_err(|e| McspError::io(&path, e))?;
    Ok(path)
}

/// Compares the pricing graph's shortest path with the minimum reduced cost
/// over every admitted column, for every pair and both deadline rules.
/// Mismatching trials are written to `artifacts` when given.
pub fn verify_pricing_oracle(trials: usize, max_horizon: usize, seed: u64, artifacts: Option<&Path>) -> Result<OracleReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = OracleReport { trials, ..OracleReport::default() };
    for trial in 0..trials {
        let shape = TinyShape { servers: rng.random_range(1..=2), max_contents: 2, max_horizon, max_requests: 8 };
        let inst = random_tiny_instance(&mut rng, shape);
        let idx = RequestIndex::new(&inst);
        let duals = random_duals(&mut rng, &inst);
        let allowed = random_masks(&mut rng, &inst);
        let columns = enumerate_columns(inst.horizon)?;
        let before = report.mismatches.len();
        for h in 0..inst.num_servers() {
            for i in 0..inst.num_contents() {
                for rule in [Settlement::Paper, Settlement::Clamped] {
                    let graph = build_graph(h, i, &duals, &inst, &idx, &allowed, rule).shortest_path().map(|(_, v)| v);
                    let brute = columns
                        .iter()
                        .filter(|c| allowed.admits(h, i, c))
                        .map(|c| reduced_cost(c, h, i, &duals, &inst, &idx, rule))
                        .min_by(f64::total_cmp);
                    report.comparisons += 1;
                    let ok = match (graph, brute) {
                        (Some(g), Some(b)) => {
                            report.max_abs_diff = report.max_abs_diff.max((g - b).abs());
                            (g - b).abs() <= 1e-6
                        }
                        (None, None) => true,
                        _ => false,
                    };
                    if !ok {
                        report.mismatches.push(OracleMismatch { trial, server: h, content: i, rule, graph, brute_force: brute });
                    }
                }
            }
        }
        if report.mismatches.len() > before {
            if let Some(dir) = artifacts {
                write_artifacts(dir, &format!("pricing-{trial}"), &inst, &duals)?;
            }
        }
    }
    Ok(report)
}

#[derive(Clone, Debug, Serialize)]
pub struct SandwichCase {
    pub trial: usize,
    pub lower_bound: f64,
    pub exact_paper: f64,
    pub exact_min: f64,
    pub solver_paper: f64,
    pub solver_final: f64,
    pub solver_ok: bool,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct SandwichReport {
    pub trials: usize,
    pub cases: Vec<SandwichCase>,
    pub violations: Vec<String>,
    /// Largest `(solver - exact) / exact` under deadline settlement.
    pub max_gap_to_exact: f64,
    pub integrality_mismatches: usize,
}

impl SandwichReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks `LB <= exact <= solver` under deadline settlement and
/// `exact <= solver` under best-slot settlement on random two-server
/// instances with at most 3 contents, 4 slots and 10 requests.
pub fn verify_sandwich(trials: usize, seed: u64, artifacts: Option<&Path>) -> Result<SandwichReport> {
    const TOL: f64 = 1e-6;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = SandwichReport { trials, ..SandwichReport::default() };
    let shape = TinyShape { servers: 2, max_contents: 3, max_horizon: 4, max_requests: 10 };
    for trial in 0..trials {
        let inst = random_tiny_instance(&mut rng, shape);
        let rcga = run_rcga(&inst, &SolverConfig::with_mode(SettlementMode::Paper))?;
        let (exact_paper, _) = exact_optimum(&inst, SettlementMode::Paper, ExactCaps::default())?;
        let (exact_min, _) = exact_optimum(&inst, SettlementMode::Min, ExactCaps::default())?;
        let lb = rcga.lower_bound.expect("rcga records its bound");
        let paper = rcga.paper_cost.map_or(f64::INFINITY, |c| c.total);
        let case = SandwichCase {
            trial,
            lower_bound: lb,
            exact_paper,
            exact_min,
            solver_paper: paper,
            solver_final: rcga.cost.total,
            solver_ok: rcga.success,
        };
        report.integrality_mismatches += rcga.integrality_mismatches;
        let tol = |v: f64| TOL * (1.0 + v.abs());
        let mut bad = Vec::new();
        if !rcga.success {
            bad.push(format!("trial {trial}: solver failed: {}", rcga.failure.clone().unwrap_or_default()));
        }
        if lb > exact_paper + tol(exact_paper) {
            bad.push(format!("trial {trial}: bound {lb} above exact {exact_paper}"));
        }
        if rcga.success && exact_paper > paper + tol(paper) {
            bad.push(format!("trial {trial}: exact {exact_paper} above solver {paper}"));
        }
        if rcga.success && exact_min > rcga.cost.total + tol(exact_min) {
            bad.push(format!("trial {trial}: best-slot exact {exact_min} above solver {}", rcga.cost.total));
        }
        if rcga.success && exact_paper > 0.0 {
            report.max_gap_to_exact = report.max_gap_to_exact.max((paper - exact_paper) / exact_paper);
        }
        if !bad.is_empty() {
            if let Some(dir) = artifacts {
                write_artifacts(dir, &format!("sandwich-{trial}"), &inst, &case)?;
            }
            report.violations.extend(bad);
        }
        report.cases.push(case);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::validate_instance;

    #[test]
    fn random_instances_are_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let inst = random_tiny_instance(&mut rng, TinyShape { servers: 2, max_contents: 3, max_horizon: 4, max_requests: 10 });
            let problems = validate_instance(&inst);
            assert!(problems.is_empty(), "{problems:?}");
        }
    }

    #[test]
    fn small_oracle_run() {
        let r = verify_pricing_oracle(20, 4, 11, None).unwrap();
        assert!(r.passed(), "{:?}", r.mismatches);
        assert!(r.comparisons >= 40);
    }
}
