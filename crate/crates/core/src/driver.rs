//! Column generation to LP optimality, repeated rounding until the column
//! weights are integral, and the naive whole-column rounding it is compared
//! against.

use std::fmt;
use std::time::Instant;

use log::{debug, info, warn};
use serde::{Deserialize, Serialize};

use crate::column::{purge_incompatible, AllowedStates, ColumnPool};
use crate::cost::{
    assign_with, check_feasibility, derive_assignment, evaluate, AssignmentPlan, CostBreakdown, Schedule, Settlement, SettlementMode,
};
use crate::error::{McspError, Result};
use crate::instance::{Instance, RequestIndex};
use crate::lp::BackendChoice;
use crate::pricing::price_all;
use crate::rmp::{fractional_breakdown, reduced_cost, DualPrices, Rmp, RmpSolution};
use crate::rounding::{chi_integral, chi_integral_iff, compute_indicators, RoundingState, TOL_INT};

pub const REPORT_SCHEMA: &str = "mcsp-report/1";

/// Overflow above this much capacity counts as an infeasible schedule.
const TOL_OVERFLOW: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    /// Column generation plus repeated rounding.
    Rcga,
    /// Column generation plus whole-column rounding.
    Nrs,
    /// Popularity-based greedy.
    Pba,
    /// LP lower bound only.
    Lb,
    /// Exhaustive search, tiny instances only.
    Exact,
}

impl Algorithm {
    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Rcga => "rcga",
            Algorithm::Nrs => "nrs",
            Algorithm::Pba => "pba",
            Algorithm::Lb => "lb",
            Algorithm::Exact => "exact",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Algorithm {
    type Err = McspError;

    fn from_str(s: &str) -> Result<Self> {
        <Algorithm as clap::ValueEnum>::from_str(s, true).map_err(|_| McspError::Config(format!("unknown algorithm {s:?}")))
    }
}

#[derive(Clone, Debug)]
pub struct SolverConfig {
    pub mode: SettlementMode,
    pub backend: BackendChoice,
    pub max_pricing_rounds: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { mode: SettlementMode::Paper, backend: BackendChoice::Auto, max_pricing_rounds: 10_000 }
    }
}

impl SolverConfig {
    pub fn with_mode(mode: SettlementMode) -> Self {
        SolverConfig { mode, ..Default::default() }
    }
}

/// Outcome of a solver run, as written to JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub schema: String,
    pub algorithm: Algorithm,
    pub settlement_mode: SettlementMode,
    pub success: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
    /// Cost of the final schedule and assignment; for `lb`, of the fractional optimum.
    pub cost: CostBreakdown,
    /// The same schedule with deadline settlement.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub paper_cost: Option<CostBreakdown>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lower_bound: Option<f64>,
    /// `(total - LB) / LB`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gap: Option<f64>,
    pub pricing_rounds: usize,
    pub rounding_rounds: usize,
    pub columns_generated: usize,
    /// Cycles where indicator and column-weight integrality disagreed.
    pub integrality_mismatches: usize,
    pub integrality_checks: usize,
    /// Smallest reduced cost of an admitted pool column over every
    /// column generation fixpoint of the run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_reduced_cost: Option<f64>,
    pub wall_time_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<Schedule>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub assignment: Option<AssignmentPlan>,
}

impl SolveReport {
    pub fn new(algorithm: Algorithm, mode: SettlementMode) -> Self {
        SolveReport {
            schema: REPORT_SCHEMA.into(),
            algorithm,
            settlement_mode: mode,
            success: false,
            failure: None,
            cost: CostBreakdown::default(),
            paper_cost: None,
            lower_bound: None,
            gap: None,
            pricing_rounds: 0,
            rounding_rounds: 0,
            columns_generated: 0,
            integrality_mismatches: 0,
            integrality_checks: 0,
            min_reduced_cost: None,
            wall_time_s: 0.0,
            schedule: None,
            assignment: None,
        }
    }

    pub fn total(&self) -> f64 {
        self.cost.total
    }

    /// Records `schedule` with its final (flexible) assignment and costs.
    pub fn finish_with(&mut self, inst: &Instance, schedule: Schedule) {
        let plan = derive_assignment(&schedule, inst, SettlementMode::Min);
        self.cost = evaluate(inst, &schedule, &plan);
        self.paper_cost = Some(evaluate(inst, &schedule, &assign_with(&schedule, inst, Settlement::Paper)));
        let violations = check_feasibility(&schedule, inst);
        if violations.is_empty() {
            self.success = true;
        } else {
            self.success = false;
            self.failure = Some(format!("schedule violates {} constraint(s), first: {}", violations.len(), violations[0]));
        }
        self.schedule = Some(schedule);
        self.assignment = Some(plan);
        self.update_gap();
    }

    fn record_fixpoint(&mut self, out: &CgaOutcome) {
        self.min_reduced_cost = Some(self.min_reduced_cost.map_or(out.min_reduced_cost, |m| m.min(out.min_reduced_cost)));
    }

    fn update_gap(&mut self) {
        self.gap = self.lower_bound.map(|lb| relative_gap(self.cost.total, lb));
    }

    fn fail(&mut self, err: &McspError) {
        warn!("{} failed: {err}", self.algorithm);
        self.success = false;
        self.failure = Some(err.to_string());
    }
}

pub fn relative_gap(total: f64, lb: f64) -> f64 {
    if lb.abs() < 1e-12 {
        if total.abs() < 1e-12 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (total - lb) / lb
    }
}

/// Column generation state shared by the drivers.
pub struct CgaRun<'a> {
    pub inst: &'a Instance,
    pub idx: RequestIndex,
    pub pool: ColumnPool,
    pub allowed: AllowedStates,
    pub rmp: Rmp,
    pub max_rounds: usize,
}

#[derive(Clone, Debug)]
pub struct CgaOutcome {
    pub solution: RmpSolution,
    pub pricing_rounds: usize,
    pub columns_added: usize,
    /// Master objective after each solve.
    pub objectives: Vec<f64>,
    /// Smallest reduced cost over admitted pool columns at the final duals.
    pub min_reduced_cost: f64,
}

impl<'a> CgaRun<'a> {
    pub fn new(inst: &'a Instance, cfg: &SolverConfig) -> Result<Self> {
        let idx = RequestIndex::new(inst);
        let pool = ColumnPool::initial(inst, &idx, cfg.mode.pricing());
        let rmp = Rmp::new(inst, &idx, &pool, cfg.backend)?;
        Ok(CgaRun { inst, idx, pool, allowed: AllowedStates::all(inst), rmp, max_rounds: cfg.max_pricing_rounds })
    }

    /// Solves the master LP and adds priced columns until none improves.
    pub fn run_cga(&mut self) -> Result<CgaOutcome> {
        let mut rounds = 0;
        let mut added = 0;
        let mut objectives = Vec::new();
        loop {
            let sol = self.rmp.solve(self.inst, &self.idx, &self.pool)?;
            objectives.push(sol.objective);
            let cands = price_all(&self.pool, &sol.duals, self.inst, &self.idx, &self.allowed);
            if cands.is_empty() {
                debug!("column generation settled at {:.6} after {rounds} rounds, {} columns", sol.objective, self.pool.len());
                let min_reduced_cost = self.min_pool_reduced_cost(&sol.duals);
                return Ok(CgaOutcome { solution: sol, pricing_rounds: rounds, columns_added: added, objectives, min_reduced_cost });
            }
            for c in cands {
                added += self.pool.insert(self.inst, &self.idx, c.server, c.content, c.column).is_some() as usize;
            }
            rounds += 1;
            if rounds >= self.max_rounds {
                return Err(McspError::NonConvergence { rounds });
            }
        }
    }

    pub fn min_pool_reduced_cost(&self, duals: &DualPrices) -> f64 {
        let mut min = f64::INFINITY;
        for h in 0..self.inst.num_servers() {
            for i in 0..self.inst.num_contents() {
                for e in self.pool.get(h, i) {
                    if self.allowed.admits(h, i, &e.column) {
                        min = min.min(reduced_cost(&e.column, h, i, duals, self.inst, &self.idx, self.pool.rule()));
                    }
                }
            }
        }
        min
    }

    /// Applies new slot masks: drops incompatible columns, reinserts floors.
    pub fn restrict(&mut self, allowed: AllowedStates) -> Result<()> {
        self.allowed = allowed;
        purge_incompatible(&mut self.pool, &self.allowed, self.inst, &self.idx)?;
        Ok(())
    }

    /// The schedule of an integral solution: per pair, its heaviest column.
    pub fn decode(&self, sol: &RmpSolution) -> Schedule {
        let mut schedule = Schedule::empty(self.inst);
        for h in 0..self.inst.num_servers() {
            for i in 0..self.inst.num_contents() {
                let p = self.pool.pair_index(h, i);
                let k = (0..sol.chi[p].len())
                    .max_by(|&a, &b| sol.chi[p][a].total_cmp(&sol.chi[p][b]).then(b.cmp(&a)))
                    .expect("every pair keeps at least one column");
                schedule.set(h, i, self.pool.by_pair(p)[k].column.clone());
            }
        }
        schedule
    }
}

/// Runs `algo` on `inst`. The greedy ignores `cfg`; the exhaustive search
/// uses its default size limits.
pub fn solve(inst: &Instance, algo: Algorithm, cfg: &SolverConfig) -> Result<SolveReport> {
    match algo {
        Algorithm::Rcga => run_rcga(inst, cfg),
        Algorithm::Nrs => run_nrs(inst, cfg),
        Algorithm::Lb => run_lb(inst, cfg),
        Algorithm::Pba => Ok(crate::baselines::run_pba(inst)),
        Algorithm::Exact => crate::baselines::solve_exact(inst, cfg.mode, crate::baselines::ExactCaps::default()),
    }
}

/// LP lower bound: column generation without rounding.
pub fn run_lb(inst: &Instance, cfg: &SolverConfig) -> Result<SolveReport> {
    let start = Instant::now();
    let mut report = SolveReport::new(Algorithm::Lb, cfg.mode);
    let mut run = CgaRun::new(inst, cfg)?;
    let out = run.run_cga()?;
    report.record_fixpoint(&out);
    report.cost = fractional_breakdown(inst, &run.idx, &run.pool, &out.solution);
    report.lower_bound = Some(out.solution.objective);
    report.gap = Some(0.0);
    report.success = true;
    report.pricing_rounds = out.pricing_rounds;
    report.columns_generated = run.pool.len();
    report.wall_time_s = start.elapsed().as_secs_f64();
    Ok(report)
}

/// Column generation, then rounding of the caching/updating indicators
/// alternated with column generation until every pair uses one column.
///
/// Failures after the lower bound is known (no fixable column, capacity
/// overflow left in the master) are reported with `success = false`.
pub fn run_rcga(inst: &Instance, cfg: &SolverConfig) -> Result<SolveReport> {
    let start = Instant::now();
    let mut report = SolveReport::new(Algorithm::Rcga, cfg.mode);
    let mut run = CgaRun::new(inst, cfg)?;
    let first = run.run_cga()?;
    report.record_fixpoint(&first);
    let lb = first.solution.objective;
    report.lower_bound = Some(lb);
    report.pricing_rounds = first.pricing_rounds;
    info!("lower bound {lb:.6} after {} pricing rounds", first.pricing_rounds);

    let guard = 10 * inst.num_servers() * inst.num_contents() * inst.horizon.max(1);
    let result = (|| -> Result<RmpSolution> {
        run.rmp.open_elastic()?;
        let mut state = RoundingState::new(inst);
        let mut sol = first.solution;
        loop {
            report.integrality_checks += 1;
            if !chi_integral_iff(&run.pool, &sol.chi) {
                report.integrality_mismatches += 1;
                warn!("indicator and column integrality disagree in rounding cycle {}", report.rounding_rounds);
            }
            if chi_integral(&sol.chi) {
                return Ok(sol);
            }
            if report.rounding_rounds >= guard {
                return Err(McspError::NonConvergence { rounds: report.rounding_rounds });
            }
            let ind = compute_indicators(&run.pool, &sol.chi);
            let step = state.round_once(&ind)?;
            debug!("rounding cycle {}: {} integral fixings, picks {:?}", report.rounding_rounds, step.integral_fixed, step.picks);
            run.restrict(state.allowed(inst))?;
            let out = run.run_cga()?;
            report.record_fixpoint(&out);
            report.pricing_rounds += out.pricing_rounds;
            report.rounding_rounds += 1;
            sol = out.solution;
        }
    })();
    report.columns_generated = run.pool.len();
    match result {
        Ok(sol) => {
            let schedule = run.decode(&sol);
            report.finish_with(inst, schedule);
            if sol.overflow > TOL_OVERFLOW {
                report.success = false;
                report.failure = Some(format!("master needs {:.3} units of capacity overflow", sol.overflow));
            }
        }
        Err(e) => report.fail(&e),
    }
    report.wall_time_s = start.elapsed().as_secs_f64();
    info!("rcga total {:.6} (lb {:.6}), {} rounding cycles, {:.2}s", report.cost.total, lb, report.rounding_rounds, report.wall_time_s);
    Ok(report)
}

/// Naive rounding: per server, the fractional column weight closest to one
/// is fixed to one, then column generation reruns. Any infeasible master
/// along the way is a failure.
pub fn run_nrs(inst: &Instance, cfg: &SolverConfig) -> Result<SolveReport> {
    let start = Instant::now();
    let mut report = SolveReport::new(Algorithm::Nrs, cfg.mode);
    let mut run = CgaRun::new(inst, cfg)?;
    let first = run.run_cga()?;
    report.record_fixpoint(&first);
    report.lower_bound = Some(first.solution.objective);
    report.pricing_rounds = first.pricing_rounds;
    let guard = inst.num_servers() * inst.num_contents() + 1;
    let result = (|| -> Result<RmpSolution> {
        let mut sol = first.solution;
        loop {
            if chi_integral(&sol.chi) {
                return Ok(sol);
            }
            if report.rounding_rounds >= guard {
                return Err(McspError::NonConvergence { rounds: report.rounding_rounds });
            }
            let mut allowed = run.allowed.clone();
            let ni = inst.num_contents();
            for h in 0..inst.num_servers() {
                let mut best: Option<(f64, usize, usize)> = None;
                for i in 0..ni {
                    let p = run.pool.pair_index(h, i);
                    for (k, &w) in sol.chi[p].iter().enumerate() {
                        if w > TOL_INT && w < 1.0 - TOL_INT && best.is_none_or(|(b, _, _)| w > b) {
                            best = Some((w, i, k));
                        }
                    }
                }
                if let Some((_, i, k)) = best {
                    let col = run.pool.get(h, i)[k].column.clone();
                    allowed.pin(h, i, &col);
                }
            }
            run.restrict(allowed)?;
            let out = run.run_cga()?;
            report.record_fixpoint(&out);
            report.pricing_rounds += out.pricing_rounds;
            report.rounding_rounds += 1;
            sol = out.solution;
        }
    })();
    report.columns_generated = run.pool.len();
    match result {
        Ok(sol) => {
            let schedule = run.decode(&sol);
            report.finish_with(inst, schedule);
        }
        Err(e) => report.fail(&e),
    }
    report.wall_time_s = start.elapsed().as_secs_f64();
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tiny_rcga_is_exact() {
        let inst = Instance::tiny();
        for mode in [SettlementMode::Paper, SettlementMode::Min] {
            let r = run_rcga(&inst, &SolverConfig::with_mode(mode)).unwrap();
            assert!(r.success, "{:?}", r.failure);
            assert_eq!(r.lower_bound, Some(3.0));
            assert_eq!(r.cost.total, 3.0);
            assert_eq!(r.gap, Some(0.0));
            assert_eq!(r.schedule.as_ref().unwrap().column(0, 0).to_string(), "UC");
        }
    }

    #[test]
    fn tiny_lb_matches() {
        let r = run_lb(&Instance::tiny(), &SolverConfig::default()).unwrap();
        assert_eq!(r.lower_bound, Some(3.0));
        assert!((r.cost.total - 3.0).abs() < 1e-9);
    }

    #[test]
    fn report_round_trips() {
        let r = run_rcga(&Instance::tiny(), &SolverConfig::default()).unwrap();
        let text = serde_json::to_string(&r).unwrap();
        let back: SolveReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn algorithm_names() {
        for a in [Algorithm::Rcga, Algorithm::Nrs, Algorithm::Pba, Algorithm::Lb, Algorithm::Exact] {
            assert_eq!(a.as_str().parse::<Algorithm>().unwrap(), a);
        }
        assert!("opt".parse::<Algorithm>().is_err());
    }
}
