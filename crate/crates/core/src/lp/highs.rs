use std::ffi::{c_void, CString};
use std::ptr;

use highs_sys as hs;

use super::{LpBackend, LpError, LpProblem, LpSolution, LpStatus, Relation};

/// One-shot solves through HiGHS.
#[derive(Clone, Copy, Debug, Default)]
pub struct HighsBackend;

impl LpBackend for HighsBackend {
    fn name(&self) -> &'static str {
        "highs"
    }

    fn solve(&self, lp: &LpProblem) -> Result<LpSolution, LpError> {
        HighsSession::new(lp)?.solve()
    }
}

/// A HiGHS model kept alive between solves, so that added columns and bound
/// changes restart from the previous optimal basis.
pub struct HighsSession {
    ptr: *mut c_void,
    num_cols: usize,
    num_rows: usize,
    costs: Vec<f64>,
    offset: f64,
}

// The instance is only ever touched through `&mut self` or by value.
unsafe impl Send for HighsSession {}

impl Drop for HighsSession {
    fn drop(&mut self) {
        unsafe { hs::Highs_destroy(self.ptr) };
    }
}

fn check(status: hs::HighsInt, call: &str) -> Result<(), LpError> {
    if status == hs::kHighsStatusError {
        Err(LpError::Backend(format!("{call} returned an error")))
    } else {
        Ok(())
    }
}

fn row_bounds(rel: Relation, rhs: f64) -> (f64, f64) {
    match rel {
        Relation::Le => (f64::NEG_INFINITY, rhs),
        Relation::Ge => (rhs, f64::INFINITY),
        Relation::Eq => (rhs, rhs),
    }
}

struct ColumnWise {
    start: Vec<hs::HighsInt>,
    index: Vec<hs::HighsInt>,
    value: Vec<f64>,
    row_lower: Vec<f64>,
    row_upper: Vec<f64>,
}

fn column_wise(lp: &LpProblem) -> ColumnWise {
    let n = lp.num_cols();
    let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    let mut row_lower = Vec::with_capacity(lp.num_rows());
    let mut row_upper = Vec::with_capacity(lp.num_rows());
    for (i, row) in lp.rows.iter().enumerate() {
        for &(j, a) in &row.coeffs {
            cols[j].push((i, a));
        }
        let (l, u) = row_bounds(row.relation, row.rhs);
        row_lower.push(l);
        row_upper.push(u);
    }
    let mut start = Vec::with_capacity(n + 1);
    let mut index = Vec::new();
    let mut value = Vec::new();
    for col in cols {
        start.push(index.len() as hs::HighsInt);
        for (i, a) in col {
            index.push(i as hs::HighsInt);
            value.push(a);
        }
    }
    ColumnWise { start, index, value, row_lower, row_upper }
}

impl HighsSession {
    pub fn new(lp: &LpProblem) -> Result<Self, LpError> {
        lp.check()?;
        let ptr = unsafe { hs::Highs_create() };
        if ptr.is_null() {
            return Err(LpError::Backend("Highs_create returned null".into()));
        }
        let session = HighsSession { ptr, num_cols: lp.num_cols(), num_rows: lp.num_rows(), costs: lp.costs.clone(), offset: lp.offset };
        session.set_bool("output_flag", false)?;
        // warm starts need the unreduced model
        session.set_string("presolve", "off")?;

        let cw = column_wise(lp);
        let status = unsafe {
            hs::Highs_passLp(
                ptr,
                lp.num_cols() as hs::HighsInt,
                lp.num_rows() as hs::HighsInt,
                cw.value.len() as hs::HighsInt,
                hs::kHighsMatrixFormatColwise,
                hs::kHighsObjSenseMinimize,
                lp.offset,
                lp.costs.as_ptr(),
                lp.lower.as_ptr(),
                lp.upper.as_ptr(),
                cw.row_lower.as_ptr(),
                cw.row_upper.as_ptr(),
                cw.start.as_ptr(),
                cw.index.as_ptr(),
                cw.value.as_ptr(),
            )
        };
        check(status, "Highs_passLp")?;
        Ok(session)
    }

    fn set_bool(&self, name: &str, value: bool) -> Result<(), LpError> {
        let key = CString::new(name).expect("option names have no NUL");
        check(unsafe { hs::Highs_setBoolOptionValue(self.ptr, key.as_ptr(), value as hs::HighsInt) }, name)
    }

    fn set_string(&self, name: &str, value: &str) -> Result<(), LpError> {
        let key = CString::new(name).expect("option names have no NUL");
        let val = CString::new(value).expect("option values have no NUL");
        check(unsafe { hs::Highs_setStringOptionValue(self.ptr, key.as_ptr(), val.as_ptr()) }, name)
    }

    pub fn set_time_limit(&self, seconds: f64) -> Result<(), LpError> {
        let key = CString::new("time_limit").unwrap();
        check(unsafe { hs::Highs_setDoubleOptionValue(self.ptr, key.as_ptr(), seconds) }, "time_limit")
    }

    pub fn num_cols(&self) -> usize {
        self.num_cols
    }

    pub fn num_rows(&self) -> usize {
        self.num_rows
    }

    pub fn add_col(&mut self, cost: f64, lower: f64, upper: f64, entries: &[(usize, f64)]) -> Result<usize, LpError> {
        if !cost.is_finite() || entries.iter().any(|&(i, a)| i >= self.num_rows || !a.is_finite()) {
            return Err(LpError::Malformed("bad column passed to add_col".into()));
        }
        let index: Vec<hs::HighsInt> = entries.iter().map(|&(i, _)| i as hs::HighsInt).collect();
        let value: Vec<f64> = entries.iter().map(|&(_, a)| a).collect();
        let status = unsafe { hs::Highs_addCol(self.ptr, cost, lower, upper, index.len() as hs::HighsInt, index.as_ptr(), value.as_ptr()) };
        check(status, "Highs_addCol")?;
        self.costs.push(cost);
        self.num_cols += 1;
        Ok(self.num_cols - 1)
    }

    pub fn set_col_bounds(&mut self, col: usize, lower: f64, upper: f64) -> Result<(), LpError> {
        if col >= self.num_cols || lower > upper {
            return Err(LpError::Malformed(format!("bad bound change on column {col}")));
        }
        check(unsafe { hs::Highs_changeColBounds(self.ptr, col as hs::HighsInt, lower, upper) }, "Highs_changeColBounds")
    }

    pub fn solve(&mut self) -> Result<LpSolution, LpError> {
        check(unsafe { hs::Highs_run(self.ptr) }, "Highs_run")?;
        let mut iterations: hs::HighsInt = 0;
        let key = CString::new("simplex_iteration_count").unwrap();
        unsafe { hs::Highs_getIntInfoValue(self.ptr, key.as_ptr(), &mut iterations) };
        let iterations = iterations.max(0) as usize;

        let status = match unsafe { hs::Highs_getModelStatus(self.ptr) } {
            hs::kHighsModelStatusOptimal | hs::kHighsModelStatusModelEmpty => LpStatus::Optimal,
            hs::kHighsModelStatusInfeasible => LpStatus::Infeasible,
            hs::kHighsModelStatusUnbounded | hs::kHighsModelStatusUnboundedOrInfeasible => LpStatus::Unbounded,
            other => return Err(LpError::Backend(format!("HiGHS model status {other}"))),
        };
        if status != LpStatus::Optimal {
            return Ok(LpSolution::without_values(status, iterations));
        }

        let mut primal = vec![0.0; self.num_cols];
        let mut col_dual = vec![0.0; self.num_cols];
        let mut row_value = vec![0.0; self.num_rows];
        let mut duals = vec![0.0; self.num_rows];
        let st = unsafe {
            hs::Highs_getSolution(self.ptr, primal.as_mut_ptr(), col_dual.as_mut_ptr(), row_value.as_mut_ptr(), duals.as_mut_ptr())
        };
        check(st, "Highs_getSolution")?;
        let objective = self.offset + self.costs.iter().zip(&primal).map(|(c, x)| c * x).sum::<f64>();
        Ok(LpSolution { status, primal, duals, objective, iterations })
    }
}

/// Solves `lp` with the listed columns restricted to integers.
///
/// Returns `None` when HiGHS proves the model infeasible.
pub fn solve_mip(lp: &LpProblem, integer: &[bool], time_limit: Option<f64>) -> Result<Option<(Vec<f64>, f64)>, LpError> {
    lp.check()?;
    if integer.len() != lp.num_cols() {
        return Err(LpError::Malformed("integrality vector has the wrong length".into()));
    }
    let session = HighsSession {
        ptr: unsafe { hs::Highs_create() },
        num_cols: lp.num_cols(),
        num_rows: lp.num_rows(),
        costs: lp.costs.clone(),
        offset: lp.offset,
    };
    session.set_bool("output_flag", false)?;
    if let Some(t) = time_limit {
        session.set_time_limit(t)?;
    }
    let cw = column_wise(lp);
    let integrality: Vec<hs::HighsInt> =
        integer.iter().map(|&b| if b { hs::kHighsVarTypeInteger } else { hs::kHighsVarTypeContinuous }).collect();
    let status = unsafe {
        hs::Highs_passMip(
            session.ptr,
            lp.num_cols() as hs::HighsInt,
            lp.num_rows() as hs::HighsInt,
            cw.value.len() as hs::HighsInt,
            hs::kHighsMatrixFormatColwise,
            hs::kHighsObjSenseMinimize,
            lp.offset,
            lp.costs.as_ptr(),
            lp.lower.as_ptr(),
            lp.upper.as_ptr(),
            cw.row_lower.as_ptr(),
            cw.row_upper.as_ptr(),
            cw.start.as_ptr(),
            cw.index.as_ptr(),
            cw.value.as_ptr(),
            integrality.as_ptr(),
        )
    };
    check(status, "Highs_passMip")?;
    check(unsafe { hs::Highs_run(session.ptr) }, "Highs_run")?;
    match unsafe { hs::Highs_getModelStatus(session.ptr) } {
        hs::kHighsModelStatusOptimal | hs::kHighsModelStatusModelEmpty => {}
        hs::kHighsModelStatusInfeasible => return Ok(None),
        other => return Err(LpError::Backend(format!("HiGHS MIP status {other}"))),
    }
    let mut x = vec![0.0; lp.num_cols()];
    let st = unsafe { hs::Highs_getSolution(session.ptr, x.as_mut_ptr(), ptr::null_mut(), ptr::null_mut(), ptr::null_mut()) };
    check(st, "Highs_getSolution")?;
    let obj = lp.objective_at(&x);
    Ok(Some((x, obj)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::{kkt_report, DenseSimplex};

    #[test]
    fn warm_started_column_addition_matches_cold_solve() {
        // min x0 + 3 x1 st x0 + x1 >= 2, x0 <= 1.5
        let mut lp = LpProblem::new();
        let x0 = lp.add_var(1.0, 0.0, 1.5);
        let x1 = lp.add_var(3.0, 0.0, f64::INFINITY);
        lp.add_row(vec![(x0, 1.0), (x1, 1.0)], Relation::Ge, 2.0);
        let mut s = HighsSession::new(&lp).unwrap();
        let first = s.solve().unwrap();
        assert!((first.objective - 3.0).abs() < 1e-9);
        assert!((first.duals[0] - 3.0).abs() < 1e-9);

        // a cheaper column prices out at 2 - 3 < 0
        s.add_col(2.0, 0.0, f64::INFINITY, &[(0, 1.0)]).unwrap();
        lp.add_var(2.0, 0.0, f64::INFINITY);
        lp.rows[0].coeffs.push((2, 1.0));
        let warm = s.solve().unwrap();
        let cold = DenseSimplex::default().solve(&lp).unwrap();
        assert!((warm.objective - cold.objective).abs() < 1e-9);
        assert!((warm.objective - 2.5).abs() < 1e-9);
        assert!(kkt_report(&lp, &warm).holds());

        s.set_col_bounds(2, 0.0, 0.0).unwrap();
        assert!((s.solve().unwrap().objective - 3.0).abs() < 1e-9);
    }

    #[test]
    fn small_knapsack_mip() {
        // max 5a + 4b + 3c st 2a + 3b + c <= 5 over binaries: {a, b} is worth 9
        let mut lp = LpProblem::new();
        let a = lp.add_var(-5.0, 0.0, 1.0);
        let b = lp.add_var(-4.0, 0.0, 1.0);
        let c = lp.add_var(-3.0, 0.0, 1.0);
        lp.add_row(vec![(a, 2.0), (b, 3.0), (c, 1.0)], Relation::Le, 5.0);
        let (x, obj) = solve_mip(&lp, &[true; 3], None).unwrap().unwrap();
        assert!((obj + 9.0).abs() < 1e-9, "{x:?}");
    }
}
