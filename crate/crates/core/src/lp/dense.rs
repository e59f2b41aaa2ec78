use super::{LpBackend, LpError, LpProblem, LpSolution, LpStatus, Relation, TOL_FEAS, TOL_PIVOT};

/// Bounded-variable two-phase primal simplex on a dense tableau.
///
/// Dantzig pricing, switching to Bland's rule once a run of degenerate
/// pivots exceeds `5 * (rows + cols)`.
#[derive(Clone, Debug)]
pub struct DenseSimplex {
    pub tol_dual: f64,
    pub max_iterations: Option<usize>,
}

impl Default for DenseSimplex {
    fn default() -> Self {
        DenseSimplex { tol_dual: 1e-9, max_iterations: None }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Pos {
    Basic,
    Lower,
    Upper,
}

struct Tableau {
    n: usize,
    m: usize,
    width: usize,
    t: Vec<f64>,
    basis: Vec<usize>,
    pos: Vec<Pos>,
    x: Vec<f64>,
    lo: Vec<f64>,
    up: Vec<f64>,
    d: Vec<f64>,
    cost: Vec<f64>,
    /// Columns allowed to enter.
    enterable: Vec<bool>,
}

enum PhaseEnd {
    Optimal,
    Unbounded,
}

impl Tableau {
    fn row(&self, i: usize) -> &[f64] {
        &self.t[i * self.width..(i + 1) * self.width]
    }

    fn price(&mut self) {
        self.d.clone_from(&self.cost);
        for i in 0..self.m {
            let cb = self.cost[self.basis[i]];
            if cb != 0.0 {
                let row = &self.t[i * self.width..(i + 1) * self.width];
                for (dj, a) in self.d.iter_mut().zip(row) {
                    *dj -= cb * a;
                }
            }
        }
        for i in 0..self.m {
            self.d[self.basis[i]] = 0.0;
        }
    }

    fn pivot(&mut self, r: usize, q: usize) {
        let w = self.width;
        let piv = self.t[r * w + q];
        for v in &mut self.t[r * w..(r + 1) * w] {
            *v /= piv;
        }
        let (before, rest) = self.t.split_at_mut(r * w);
        let (prow, after) = rest.split_at_mut(w);
        for chunk in before.chunks_mut(w).chain(after.chunks_mut(w)) {
            let f = chunk[q];
            if f != 0.0 {
                for (v, p) in chunk.iter_mut().zip(prow.iter()) {
                    *v -= f * p;
                }
                chunk[q] = 0.0;
            }
        }
        let f = self.d[q];
        if f != 0.0 {
            for (dj, p) in self.d.iter_mut().zip(prow.iter()) {
                *dj -= f * p;
            }
        }
        self.d[q] = 0.0;
        self.basis[r] = q;
    }

    fn entering(&self, tol: f64, bland: bool) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        let mut best_score = 0.0;
        for j in 0..self.width {
            if !self.enterable[j] {
                continue;
            }
            let dir = match self.pos[j] {
                Pos::Lower if self.d[j] < -tol => 1.0,
                Pos::Upper if self.d[j] > tol => -1.0,
                _ => continue,
            };
            if bland {
                return Some((j, dir));
            }
            let score = self.d[j].abs();
            if score > best_score {
                best_score = score;
                best = Some((j, dir));
            }
        }
        best
    }

    fn run(&mut self, tol: f64, budget: &mut usize, iterations: &mut usize) -> Result<PhaseEnd, LpError> {
        let degenerate_limit = 5 * (self.m + self.width);
        let mut degenerate_run = 0usize;
        let mut bland = false;
        let mut since_price = 0usize;
        loop {
            let Some((q, dir)) = self.entering(tol, bland) else {
                self.price();
                since_price = 0;
                match self.entering(tol, bland) {
                    Some(_) => continue,
                    None => return Ok(PhaseEnd::Optimal),
                }
            };
            if *budget == 0 {
                return Err(LpError::IterationLimit { iterations: *iterations });
            }
            *budget -= 1;
            *iterations += 1;

            // ratio test; the entering column's own bound range is the first candidate
            let mut theta = self.up[q] - self.lo[q];
            let mut leave: Option<usize> = None;
            let mut leave_alpha = 0.0f64;
            for i in 0..self.m {
                let alpha = dir * self.t[i * self.width + q];
                let b = self.basis[i];
                let limit = if alpha > TOL_PIVOT {
                    (self.x[b] - self.lo[b]).max(0.0) / alpha
                } else if alpha < -TOL_PIVOT && self.up[b].is_finite() {
                    (self.up[b] - self.x[b]).max(0.0) / -alpha
                } else {
                    continue;
                };
                let better = match leave {
                    _ if limit < theta - 1e-12 => true,
                    Some(l) if limit <= theta + 1e-12 => {
                        if bland {
                            b < self.basis[l]
                        } else {
                            alpha.abs() > leave_alpha.abs()
                        }
                    }
                    _ => false,
                };
                if better {
                    theta = limit.min(theta);
                    leave = Some(i);
                    leave_alpha = alpha;
                }
            }
            if !theta.is_finite() {
                return Ok(PhaseEnd::Unbounded);
            }

            self.x[q] += dir * theta;
            for i in 0..self.m {
                let a = self.t[i * self.width + q];
                if a != 0.0 {
                    let b = self.basis[i];
                    self.x[b] -= a * dir * theta;
                }
            }
            match leave {
                None => {
                    // bound flip
                    if dir > 0.0 {
                        self.x[q] = self.up[q];
                        self.pos[q] = Pos::Upper;
                    } else {
                        self.x[q] = self.lo[q];
                        self.pos[q] = Pos::Lower;
                    }
                }
                Some(r) => {
                    let b = self.basis[r];
                    if leave_alpha > 0.0 {
                        self.x[b] = self.lo[b];
                        self.pos[b] = Pos::Lower;
                    } else {
                        self.x[b] = self.up[b];
                        self.pos[b] = Pos::Upper;
                    }
                    self.pos[q] = Pos::Basic;
                    self.pivot(r, q);
                }
            }

            if theta <= 1e-12 {
                degenerate_run += 1;
                if degenerate_run > degenerate_limit {
                    bland = true;
                }
            } else {
                degenerate_run = 0;
            }
            since_price += 1;
            if since_price >= 200 {
                self.price();
                since_price = 0;
            }
        }
    }

    fn recompute_basics(&mut self, rhs: &[f64]) {
        // x_B = B^{-1} b - sum over nonbasic j of T[:, j] x_j, with B^{-1} b read off the slack columns
        let slack0 = self.n;
        for i in 0..self.m {
            let row = self.row(i);
            let mut v = 0.0;
            for (k, &b) in rhs.iter().enumerate() {
                v += row[slack0 + k] * b;
            }
            for j in 0..self.width {
                if self.pos[j] != Pos::Basic {
                    v -= row[j] * self.x[j];
                }
            }
            let b = self.basis[i];
            self.x[b] = v;
        }
    }
}

impl DenseSimplex {
    pub fn solve(&self, lp: &LpProblem) -> Result<LpSolution, LpError> {
        lp.check()?;
        let n = lp.num_cols();
        let m = lp.num_rows();

        // internal rows are all `<=` or `=`; `>=` rows are negated
        let mut sign = vec![1.0; m];
        let mut rhs = vec![0.0; m];
        for (i, row) in lp.rows.iter().enumerate() {
            if row.relation == Relation::Ge {
                sign[i] = -1.0;
            }
            rhs[i] = sign[i] * row.rhs;
        }

        let x0 = lp.lower.clone();
        let mut resid = rhs.clone();
        for (i, row) in lp.rows.iter().enumerate() {
            for &(j, a) in &row.coeffs {
                resid[i] -= sign[i] * a * x0[j];
            }
        }

        let mut art_rows = Vec::new();
        let mut art_sign = Vec::new();
        for (i, row) in lp.rows.iter().enumerate() {
            let needs = match row.relation {
                Relation::Eq => true,
                _ => resid[i] < 0.0,
            };
            if needs {
                art_rows.push(i);
                art_sign.push(if resid[i] >= 0.0 { 1.0 } else { -1.0 });
            }
        }
        let na = art_rows.len();
        let width = n + m + na;

        let mut t = vec![0.0; m * width];
        for (i, row) in lp.rows.iter().enumerate() {
            for &(j, a) in &row.coeffs {
                t[i * width + j] += sign[i] * a;
            }
            t[i * width + n + i] = 1.0;
        }
        let mut basis: Vec<usize> = (0..m).map(|i| n + i).collect();
        let mut lo = lp.lower.clone();
        let mut up = lp.upper.clone();
        for row in &lp.rows {
            lo.push(0.0);
            up.push(if row.relation == Relation::Eq { 0.0 } else { f64::INFINITY });
        }
        lo.extend(std::iter::repeat_n(0.0, na));
        up.extend(std::iter::repeat_n(f64::INFINITY, na));

        let mut x = x0;
        x.extend(std::iter::repeat_n(0.0, m + na));
        let mut pos = vec![Pos::Lower; width];
        for i in 0..m {
            x[n + i] = resid[i];
            pos[n + i] = Pos::Basic;
        }
        for (k, (&i, &s)) in art_rows.iter().zip(&art_sign).enumerate() {
            let a = n + m + k;
            t[i * width + a] = s;
            // basis column of row i becomes s * e_i; scale the row so it is the identity again
            for v in &mut t[i * width..(i + 1) * width] {
                *v *= s;
            }
            basis[i] = a;
            pos[a] = Pos::Basic;
            pos[n + i] = Pos::Lower;
            x[n + i] = 0.0;
            x[a] = s * resid[i];
        }

        let mut enterable = vec![true; width];
        for j in 0..width {
            if up[j] - lo[j] <= 0.0 {
                enterable[j] = false;
            }
        }

        let mut phase1_cost = vec![0.0; width];
        for k in 0..na {
            phase1_cost[n + m + k] = 1.0;
        }
        let mut tab = Tableau { n, m, width, t, basis, pos, x, lo, up, d: vec![0.0; width], cost: phase1_cost, enterable };

        let mut budget = self.max_iterations.unwrap_or(50 * (m + width) + 1000);
        let mut iterations = 0;

        if na > 0 {
            tab.price();
            tab.run(self.tol_dual, &mut budget, &mut iterations)?;
            let infeas: f64 = (0..na).map(|k| tab.x[n + m + k]).sum();
            let scale = 1.0 + rhs.iter().fold(0.0f64, |a, b| a.max(b.abs()));
            if infeas > TOL_FEAS * scale {
                return Ok(LpSolution::without_values(LpStatus::Infeasible, iterations));
            }
            // drive basic artificials out where possible, otherwise pin them at zero
            for r in 0..m {
                let b = tab.basis[r];
                if b < n + m {
                    continue;
                }
                let pick = (0..n + m)
                    .filter(|&j| tab.pos[j] != Pos::Basic)
                    .max_by(|&a, &b2| tab.t[r * width + a].abs().total_cmp(&tab.t[r * width + b2].abs()))
                    .filter(|&j| tab.t[r * width + j].abs() > 1e-7);
                if let Some(j) = pick {
                    tab.pos[b] = Pos::Lower;
                    tab.x[b] = 0.0;
                    tab.pos[j] = Pos::Basic;
                    tab.pivot(r, j);
                }
            }
            for k in 0..na {
                let a = n + m + k;
                tab.enterable[a] = false;
                tab.up[a] = 0.0;
                if tab.pos[a] != Pos::Basic {
                    tab.x[a] = 0.0;
                }
            }
            tab.recompute_basics(&rhs);
        }

        let mut cost = lp.costs.clone();
        cost.extend(std::iter::repeat_n(0.0, m + na));
        tab.cost = cost;
        tab.price();
        if let PhaseEnd::Unbounded = tab.run(self.tol_dual, &mut budget, &mut iterations)? {
            return Ok(LpSolution::without_values(LpStatus::Unbounded, iterations));
        }
        tab.recompute_basics(&rhs);
        tab.price();

        let primal: Vec<f64> = tab.x[..n].to_vec();
        let duals: Vec<f64> = (0..m).map(|i| -tab.d[n + i] * sign[i]).collect();
        Ok(LpSolution { status: LpStatus::Optimal, objective: lp.objective_at(&primal), primal, duals, iterations })
    }
}

impl LpBackend for DenseSimplex {
    fn name(&self) -> &'static str {
        "dense-simplex"
    }

    fn solve(&self, lp: &LpProblem) -> Result<LpSolution, LpError> {
        DenseSimplex::solve(self, lp)
    }
}
