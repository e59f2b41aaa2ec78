//! Linear programs with exact dual prices.
//!
//! Two interchangeable backends solve an [`LpProblem`]:
//! * [`DenseSimplex`], a bounded-variable two-phase primal simplex on a dense
//!   tableau, used for small problems and as a reference;
//! * [`HighsBackend`], a wrapper around the HiGHS simplex for the
//!   thousands-of-rows master problems of desk-scale instances.
//!
//! Dual sign convention (both backends): reduced costs are `c - A^T y`, so
//! for a minimisation a `<=` row has `y <= 0` and a `>=` row has `y >= 0`.

mod dense;
mod format;
mod highs;

pub use dense::DenseSimplex;
pub use format::write_lp_format;
pub use highs::{solve_mip, HighsBackend, HighsSession};

use thiserror::Error;

pub const TOL_FEAS: f64 = 1e-8;
pub const TOL_GAP: f64 = 1e-6;
pub const TOL_CS: f64 = 1e-7;
pub const TOL_PIVOT: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpRow {
    pub coeffs: Vec<(usize, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

/// `min c.x + offset` subject to rows and `lower <= x <= upper`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LpProblem {
    pub costs: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub rows: Vec<LpRow>,
    pub offset: f64,
    pub col_names: Vec<String>,
    pub row_names: Vec<String>,
}

impl LpProblem {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn num_cols(&self) -> usize {
        self.costs.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn add_var(&mut self, cost: f64, lower: f64, upper: f64) -> usize {
        self.costs.push(cost);
        self.lower.push(lower);
        self.upper.push(upper);
        self.costs.len() - 1
    }

    pub fn add_named_var(&mut self, name: impl Into<String>, cost: f64, lower: f64, upper: f64) -> usize {
        let j = self.add_var(cost, lower, upper);
        self.col_names.resize(j, String::new());
        self.col_names.push(name.into());
        j
    }

    pub fn add_row(&mut self, coeffs: Vec<(usize, f64)>, relation: Relation, rhs: f64) -> usize {
        self.rows.push(LpRow { coeffs, relation, rhs });
        self.rows.len() - 1
    }

    pub fn add_named_row(&mut self, name: impl Into<String>, coeffs: Vec<(usize, f64)>, relation: Relation, rhs: f64) -> usize {
        let i = self.add_row(coeffs, relation, rhs);
        self.row_names.resize(i, String::new());
        self.row_names.push(name.into());
        i
    }

    pub fn col_name(&self, j: usize) -> String {
        match self.col_names.get(j) {
            Some(n) if !n.is_empty() => n.clone(),
            _ => format!("x{j}"),
        }
    }

    pub fn row_name(&self, i: usize) -> String {
        match self.row_names.get(i) {
            Some(n) if !n.is_empty() => n.clone(),
            _ => format!("r{i}"),
        }
    }

    pub fn check(&self) -> Result<(), LpError> {
        let n = self.num_cols();
        if self.lower.len() != n || self.upper.len() != n {
            return Err(LpError::Malformed("bound vectors differ in length from costs".into()));
        }
        for j in 0..n {
            if !self.costs[j].is_finite() {
                return Err(LpError::Malformed(format!("cost of column {j} is not finite")));
            }
            if !self.lower[j].is_finite() || self.upper[j].is_nan() || self.upper[j] < self.lower[j] {
                return Err(LpError::Malformed(format!("bad bounds on column {j}")));
            }
        }
        for (i, row) in self.rows.iter().enumerate() {
            if !row.rhs.is_finite() {
                return Err(LpError::Malformed(format!("rhs of row {i} is not finite")));
            }
            for &(j, a) in &row.coeffs {
                if j >= n || !a.is_finite() {
                    return Err(LpError::Malformed(format!("bad coefficient in row {i}")));
                }
            }
        }
        Ok(())
    }

    pub fn objective_at(&self, x: &[f64]) -> f64 {
        self.offset + self.costs.iter().zip(x).map(|(c, v)| c * v).sum::<f64>()
    }

    pub fn row_activity(&self, x: &[f64]) -> Vec<f64> {
        self.rows.iter().map(|r| r.coeffs.iter().map(|&(j, a)| a * x[j]).sum()).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Clone, Debug)]
pub struct LpSolution {
    pub status: LpStatus,
    pub primal: Vec<f64>,
    /// One per row, `c - A^T y` convention.
    pub duals: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
}

impl LpSolution {
    pub(crate) fn without_values(status: LpStatus, iterations: usize) -> Self {
        LpSolution { status, primal: Vec::new(), duals: Vec::new(), objective: f64::NAN, iterations }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("malformed LP: {0}")]
    Malformed(String),
    #[error("simplex hit its iteration limit after {iterations} iterations")]
    IterationLimit { iterations: usize },
    #[error("LP backend failure: {0}")]
    Backend(String),
}

pub trait LpBackend: Send + Sync {
    fn name(&self) -> &'static str;
    fn solve(&self, lp: &LpProblem) -> Result<LpSolution, LpError>;
}

/// Backend selection; `Auto` uses the dense simplex for small tableaus.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum BackendChoice {
    #[default]
    Auto,
    Dense,
    Highs,
}

/// Largest `rows * (rows + cols)` that `Auto` hands to the dense simplex.
pub const DENSE_AUTO_LIMIT: usize = 250_000;

impl BackendChoice {
    pub fn resolve(self, rows: usize, cols: usize) -> BackendChoice {
        match self {
            BackendChoice::Auto if rows * (rows + cols) <= DENSE_AUTO_LIMIT => BackendChoice::Dense,
            BackendChoice::Auto => BackendChoice::Highs,
            other => other,
        }
    }
}

pub fn solve_lp(lp: &LpProblem) -> Result<LpSolution, LpError> {
    solve_lp_with(lp, BackendChoice::Auto)
}

pub fn solve_lp_with(lp: &LpProblem, choice: BackendChoice) -> Result<LpSolution, LpError> {
    match choice.resolve(lp.num_rows(), lp.num_cols()) {
        BackendChoice::Highs => HighsBackend.solve(lp),
        _ => DenseSimplex::default().solve(lp),
    }
}

/// Optimality certificate measured on a solution.
#[derive(Clone, Copy, Debug, Default)]
pub struct KktReport {
    pub primal_infeasibility: f64,
    /// Largest reduced cost pointing the wrong way at a bound.
    pub dual_infeasibility: f64,
    /// Largest `|y_i * slack_i|`.
    pub complementary_slackness: f64,
    pub primal_objective: f64,
    pub dual_objective: f64,
}

impl KktReport {
    pub fn gap(&self) -> f64 {
        (self.primal_objective - self.dual_objective).abs()
    }

    pub fn holds(&self) -> bool {
        let scale = 1.0f64.max(self.primal_objective.abs());
        self.primal_infeasibility <= TOL_FEAS * 1e2
            && self.dual_infeasibility <= TOL_CS * scale
            && self.complementary_slackness <= TOL_CS * scale
            && self.gap() <= TOL_GAP * scale
    }
}

pub fn reduced_costs(lp: &LpProblem, duals: &[f64]) -> Vec<f64> {
    let mut d = lp.costs.clone();
    for (row, &y) in lp.rows.iter().zip(duals) {
        for &(j, a) in &row.coeffs {
            d[j] -= a * y;
        }
    }
    d
}

pub fn kkt_report(lp: &LpProblem, sol: &LpSolution) -> KktReport {
    let x = &sol.primal;
    let y = &sol.duals;
    let activity = lp.row_activity(x);
    let mut rep = KktReport { primal_objective: lp.objective_at(x), ..KktReport::default() };

    for j in 0..lp.num_cols() {
        let viol = (lp.lower[j] - x[j]).max(x[j] - lp.upper[j]).max(0.0);
        rep.primal_infeasibility = rep.primal_infeasibility.max(viol);
    }
    let mut dual_obj = lp.offset;
    for (i, row) in lp.rows.iter().enumerate() {
        let slack = row.rhs - activity[i];
        let viol = match row.relation {
            Relation::Le => (-slack).max(0.0),
            Relation::Ge => slack.max(0.0),
            Relation::Eq => slack.abs(),
        };
        rep.primal_infeasibility = rep.primal_infeasibility.max(viol);
        let wrong_sign = match row.relation {
            Relation::Le => y[i].max(0.0),
            Relation::Ge => (-y[i]).max(0.0),
            Relation::Eq => 0.0,
        };
        rep.dual_infeasibility = rep.dual_infeasibility.max(wrong_sign);
        rep.complementary_slackness = rep.complementary_slackness.max((y[i] * slack).abs());
        dual_obj += row.rhs * y[i];
    }
    let d = reduced_costs(lp, y);
    for j in 0..lp.num_cols() {
        // split d_j between the two bounds; an infinite upper bound cannot absorb d_j < 0
        if d[j] >= 0.0 {
            dual_obj += d[j] * lp.lower[j];
            rep.complementary_slackness = rep.complementary_slackness.max((d[j] * (x[j] - lp.lower[j])).abs());
        } else if lp.upper[j].is_finite() {
            dual_obj += d[j] * lp.upper[j];
            rep.complementary_slackness = rep.complementary_slackness.max((d[j] * (lp.upper[j] - x[j])).abs());
        } else {
            rep.dual_infeasibility = rep.dual_infeasibility.max(-d[j]);
        }
    }
    rep.dual_objective = dual_obj;
    rep
}
