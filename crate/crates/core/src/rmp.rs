//! The restricted master problem over the current column pools.
//!
//! Rows, in order: one assignment row per multiple-choice request
//! (`sum y <= 1`), one coverage row per service variable
//! (`y - sum B chi <= 0`), cache rows and backhaul rows per (server, slot),
//! and one convexity row per (server, content) (`sum chi = 1`).
//!
//! Service variables `y(r, h, a)` are only created where serving is cheaper
//! than the cloud and the AoI is reachable at the request's first slot.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::column::{column_cost_s, coverage_b, Column, ColumnPool};
use crate::cost::{CostBreakdown, Settlement};
use crate::error::{McspError, Result};
use crate::instance::{Instance, RequestIndex};
use crate::lp::{BackendChoice, DenseSimplex, HighsSession, LpProblem, LpSolution, LpStatus, Relation};

/// Penalty per size unit of capacity overflow once elastic slack is opened.
pub const ELASTIC_PENALTY: f64 = 1e6;

/// Dual prices in the `c - A^T y` convention: `pi`, `mu`, `phi` are `<= 0` at
/// an optimum, `lambda` is free.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualPrices {
    pub horizon: usize,
    pub num_contents: usize,
    /// `pi[r][k][a]` for candidate `k` of request `r`; empty for single-choice requests.
    pub pi: Vec<Vec<Vec<f64>>>,
    /// `mu[h * T + t]`
    pub mu: Vec<f64>,
    pub phi: Vec<f64>,
    /// `lambda[h * I + i]`
    pub lambda: Vec<f64>,
}

impl DualPrices {
    pub fn zeros(inst: &Instance) -> Self {
        let t = inst.horizon;
        DualPrices {
            horizon: t,
            num_contents: inst.num_contents(),
            pi: inst
                .requests
                .iter()
                .map(|r| if r.is_mcr() { vec![vec![0.0; r.origin + 1]; r.candidates.len()] } else { Vec::new() })
                .collect(),
            mu: vec![0.0; inst.num_servers() * t],
            phi: vec![0.0; inst.num_servers() * t],
            lambda: vec![0.0; inst.num_servers() * inst.num_contents()],
        }
    }

    pub fn pi(&self, inst: &Instance, r: usize, h: usize, a: usize) -> f64 {
        let Ok(k) = inst.requests[r].candidates.binary_search(&h) else {
            return 0.0;
        };
        self.pi.get(r).and_then(|v| v.get(k)).and_then(|v| v.get(a)).copied().unwrap_or(0.0)
    }

    pub fn mu(&self, h: usize, t: usize) -> f64 {
        self.mu[h * self.horizon + t]
    }

    pub fn phi(&self, h: usize, t: usize) -> f64 {
        self.phi[h * self.horizon + t]
    }

    pub fn lambda(&self, h: usize, i: usize) -> f64 {
        self.lambda[h * self.num_contents + i]
    }
}

/// `S + sum B pi - s sum (q mu + p phi) - lambda`.
pub fn reduced_cost(col: &Column, h: usize, i: usize, duals: &DualPrices, inst: &Instance, idx: &RequestIndex, rule: Settlement) -> f64 {
    let s = inst.size(i);
    let mut d = column_cost_s(col, h, i, inst, idx, rule) - duals.lambda(h, i);
    for &r in idx.mcr(h, i) {
        let req = &inst.requests[r];
        for a in 0..=req.origin {
            if coverage_b(col, req, a) {
                d += duals.pi(inst, r, h, a);
            }
        }
    }
    for t in 0..inst.horizon {
        if col.q(t) {
            d -= s * duals.mu(h, t);
        }
        if col.p(t) {
            d -= s * duals.phi(h, t);
        }
    }
    d
}

#[derive(Clone, Debug)]
pub struct ServiceVar {
    pub request: usize,
    pub server: usize,
    pub aoi: usize,
    col: usize,
}

#[derive(Clone, Debug)]
pub struct RmpSolution {
    /// `chi[pair][k]` for the `k`-th column of the pool's pair.
    pub chi: Vec<Vec<f64>>,
    /// `(request, server, aoi, value)` for every service variable.
    pub y: Vec<(usize, usize, usize, f64)>,
    pub objective: f64,
    pub duals: DualPrices,
    /// Total capacity overflow carried by elastic slack.
    pub overflow: f64,
    pub lp_iterations: usize,
}

impl RmpSolution {
    pub fn is_integral(&self, tol: f64) -> bool {
        self.chi.iter().flatten().all(|&v| v <= tol || v >= 1.0 - tol)
    }
}

enum Engine {
    Dense,
    Highs(HighsSession),
}

/// The master LP, kept in step with a column pool across pricing rounds.
pub struct Rmp {
    lp: LpProblem,
    engine: Engine,
    services: Vec<ServiceVar>,
    /// Coverage row of `(request, candidate position, aoi)`.
    cover_rows: HashMap<(usize, usize, usize), usize>,
    cache_row0: usize,
    backhaul_row0: usize,
    convex_row0: usize,
    elastic_cols: Vec<usize>,
    elastic_open: bool,
    col_of_id: HashMap<usize, usize>,
    /// `(pair, pool id)` of each chi column, by LP column minus `chi_col0`.
    chi_ids: Vec<usize>,
    chi_live: Vec<bool>,
    horizon: usize,
    servers: usize,
    contents: usize,
}

impl Rmp {
    pub fn new(inst: &Instance, idx: &RequestIndex, pool: &ColumnPool, choice: BackendChoice) -> Result<Self> {
        let t_count = inst.horizon;
        let h_count = inst.num_servers();
        let i_count = inst.num_contents();
        let mut lp = LpProblem::new();
        let mut services = Vec::new();
        let mut cover_rows = HashMap::new();

        let mut constant = 0.0;
        for &r in idx.mcr_ids() {
            let req = &inst.requests[r];
            let cloud = inst.cloud_cost(req.content);
            constant += cloud;
            let assign_row = lp.add_named_row(format!("assign_{}", r + 1), Vec::new(), Relation::Le, 1.0);
            for (k, &h) in req.candidates.iter().enumerate() {
                for a in 0..=req.origin {
                    let gain = inst.f(a) - cloud;
                    if gain >= 0.0 {
                        continue;
                    }
                    // no explicit upper bound: the assign and coverage rows imply y <= 1,
                    // and a redundant bound would let optimal duals drift
                    let col = lp.add_named_var(format!("y_{}_{}_{}", r + 1, h + 1, a), gain, 0.0, f64::INFINITY);
                    let row = lp.add_named_row(format!("cover_{}_{}_{}", r + 1, h + 1, a), vec![(col, 1.0)], Relation::Le, 0.0);
                    lp.rows[assign_row].coeffs.push((col, 1.0));
                    cover_rows.insert((r, k, a), row);
                    services.push(ServiceVar { request: r, server: h, aoi: a, col });
                }
            }
        }
        lp.offset = constant;

        let cache_row0 = lp.num_rows();
        for h in 0..h_count {
            for t in 0..t_count {
                lp.add_named_row(format!("cache_{}_{}", h + 1, t + 1), Vec::new(), Relation::Le, inst.servers[h].cache_capacity);
            }
        }
        let backhaul_row0 = lp.num_rows();
        for h in 0..h_count {
            for t in 0..t_count {
                lp.add_named_row(format!("backhaul_{}_{}", h + 1, t + 1), Vec::new(), Relation::Le, inst.servers[h].backhaul_capacity);
            }
        }
        let convex_row0 = lp.num_rows();
        for h in 0..h_count {
            for i in 0..i_count {
                lp.add_named_row(format!("convex_{}_{}", h + 1, i + 1), Vec::new(), Relation::Eq, 1.0);
            }
        }
        let mut elastic_cols = Vec::new();
        for row in cache_row0..convex_row0 {
            let col = lp.add_named_var(format!("overflow_{row}"), ELASTIC_PENALTY, 0.0, 0.0);
            lp.rows[row].coeffs.push((col, -1.0));
            elastic_cols.push(col);
        }

        let rows = lp.num_rows();
        let engine = match choice.resolve(rows, lp.num_cols() + pool.len()) {
            BackendChoice::Highs => Engine::Highs(HighsSession::new(&lp)?),
            _ => Engine::Dense,
        };
        let mut rmp = Rmp {
            lp,
            engine,
            services,
            cover_rows,
            cache_row0,
            backhaul_row0,
            convex_row0,
            elastic_cols,
            elastic_open: false,
            col_of_id: HashMap::new(),
            chi_ids: Vec::new(),
            chi_live: Vec::new(),
            horizon: t_count,
            servers: h_count,
            contents: i_count,
        };
        rmp.sync(inst, idx, pool)?;
        Ok(rmp)
    }

    pub fn num_rows(&self) -> usize {
        self.lp.num_rows()
    }

    pub fn num_cols(&self) -> usize {
        self.lp.num_cols()
    }

    /// The LP as currently built (chi columns of purged pool entries are
    /// fixed at zero).
    pub fn problem(&self) -> &LpProblem {
        &self.lp
    }

    pub fn backend_name(&self) -> &'static str {
        match self.engine {
            Engine::Dense => "dense-simplex",
            Engine::Highs(_) => "highs",
        }
    }

    /// Lets capacity rows overflow at a large penalty, keeping the LP
    /// feasible after rounding fixings.
    pub fn open_elastic(&mut self) -> Result<()> {
        if self.elastic_open {
            return Ok(());
        }
        self.elastic_open = true;
        for k in 0..self.elastic_cols.len() {
            let c = self.elastic_cols[k];
            self.set_bounds(c, 0.0, f64::INFINITY)?;
        }
        Ok(())
    }

    fn set_bounds(&mut self, col: usize, lo: f64, up: f64) -> Result<()> {
        self.lp.lower[col] = lo;
        self.lp.upper[col] = up;
        if let Engine::Highs(s) = &mut self.engine {
            s.set_col_bounds(col, lo, up)?;
        }
        Ok(())
    }

    fn column_entries(&self, inst: &Instance, idx: &RequestIndex, h: usize, i: usize, col: &Column) -> Vec<(usize, f64)> {
        let s = inst.size(i);
        let mut entries = Vec::new();
        for &r in idx.mcr(h, i) {
            let req = &inst.requests[r];
            let k = req.candidates.binary_search(&h).expect("request indexed under a candidate");
            for a in 0..=req.origin {
                if let Some(&row) = self.cover_rows.get(&(r, k, a)) {
                    if coverage_b(col, req, a) {
                        entries.push((row, -1.0));
                    }
                }
            }
        }
        for t in 0..self.horizon {
            if col.q(t) {
                entries.push((self.cache_row0 + h * self.horizon + t, s));
            }
            if col.p(t) {
                entries.push((self.backhaul_row0 + h * self.horizon + t, s));
            }
        }
        entries.push((self.convex_row0 + h * self.contents + i, 1.0));
        entries
    }

    /// Adds pool columns the LP lacks and fixes columns no longer in the pool at zero.
    pub fn sync(&mut self, inst: &Instance, idx: &RequestIndex, pool: &ColumnPool) -> Result<()> {
        let mut seen = vec![false; self.chi_ids.len()];
        for h in 0..self.servers {
            for i in 0..self.contents {
                for entry in pool.get(h, i) {
                    if let Some(&c) = self.col_of_id.get(&entry.id) {
                        let k = c - self.chi_col0();
                        seen[k] = true;
                        if !self.chi_live[k] {
                            self.chi_live[k] = true;
                            self.set_bounds(c, 0.0, f64::INFINITY)?;
                        }
                        continue;
                    }
                    let entries = self.column_entries(inst, idx, h, i, &entry.column);
                    let c = self.lp.add_named_var(format!("chi_{}_{}_{}", h + 1, i + 1, entry.column), entry.cost, 0.0, f64::INFINITY);
                    for &(row, a) in &entries {
                        self.lp.rows[row].coeffs.push((c, a));
                    }
                    if let Engine::Highs(s) = &mut self.engine {
                        let hc = s.add_col(entry.cost, 0.0, f64::INFINITY, &entries)?;
                        debug_assert_eq!(hc, c);
                    }
                    self.col_of_id.insert(entry.id, c);
                    self.chi_ids.push(entry.id);
                    self.chi_live.push(true);
                    seen.push(true);
                }
            }
        }
        for k in 0..seen.len() {
            if !seen[k] && self.chi_live[k] {
                self.chi_live[k] = false;
                let c = self.chi_col0() + k;
                self.set_bounds(c, 0.0, 0.0)?;
            }
        }
        Ok(())
    }

    fn chi_col0(&self) -> usize {
        self.lp.num_cols() - self.chi_ids.len()
    }

    pub fn solve(&mut self, inst: &Instance, idx: &RequestIndex, pool: &ColumnPool) -> Result<RmpSolution> {
        self.sync(inst, idx, pool)?;
        let sol: LpSolution = match &mut self.engine {
            Engine::Dense => DenseSimplex::default().solve(&self.lp)?,
            Engine::Highs(s) => s.solve()?,
        };
        match sol.status {
            LpStatus::Optimal => {}
            LpStatus::Infeasible => {
                return Err(McspError::InfeasibleMaster("no combination of pooled columns satisfies the capacity rows".into()))
            }
            LpStatus::Unbounded => {
                return Err(McspError::InfeasibleMaster("master LP reported unbounded".into()));
            }
        }
        Ok(self.extract(inst, idx, pool, sol))
    }

    fn extract(&self, inst: &Instance, idx: &RequestIndex, pool: &ColumnPool, sol: LpSolution) -> RmpSolution {
        let mut duals = DualPrices::zeros(inst);
        for (&(r, k, a), &row) in &self.cover_rows {
            duals.pi[r][k][a] = sol.duals[row];
        }
        let ht = self.servers * self.horizon;
        duals.mu.copy_from_slice(&sol.duals[self.cache_row0..self.cache_row0 + ht]);
        duals.phi.copy_from_slice(&sol.duals[self.backhaul_row0..self.backhaul_row0 + ht]);
        duals.lambda.copy_from_slice(&sol.duals[self.convex_row0..self.convex_row0 + self.servers * self.contents]);

        let chi: Vec<Vec<f64>> = (0..pool.num_pairs())
            .map(|p| pool.by_pair(p).iter().map(|e| sol.primal[self.col_of_id[&e.id]].clamp(0.0, 1.0)).collect())
            .collect();
        let y = self.services.iter().map(|v| (v.request, v.server, v.aoi, sol.primal[v.col])).collect();
        let overflow = self.elastic_cols.iter().map(|&c| sol.primal[c]).sum();
        let _ = idx;
        RmpSolution { chi, y, objective: sol.objective, duals, overflow, lp_iterations: sol.iterations }
    }

    pub fn services(&self) -> &[ServiceVar] {
        &self.services
    }
}

/// The master LP for `pool`, as a standalone problem.
pub fn build_rmp(pool: &ColumnPool, inst: &Instance, idx: &RequestIndex) -> Result<LpProblem> {
    for p in 0..pool.num_pairs() {
        if pool.by_pair(p).is_empty() {
            return Err(McspError::InfeasibleMaster(format!("column pool of pair {p} is empty")));
        }
    }
    Ok(Rmp::new(inst, idx, pool, BackendChoice::Dense)?.lp)
}

/// Objective split of a fractional master solution into AoI, download and update parts.
pub fn fractional_breakdown(inst: &Instance, idx: &RequestIndex, pool: &ColumnPool, sol: &RmpSolution) -> CostBreakdown {
    use crate::cost::settle_scr;
    let (mut aoi, mut download, mut update) = (0.0, 0.0, 0.0);
    for h in 0..inst.num_servers() {
        for i in 0..inst.num_contents() {
            let p = pool.pair_index(h, i);
            for (e, &w) in pool.get(h, i).iter().zip(&sol.chi[p]) {
                if w <= 0.0 {
                    continue;
                }
                update += w * inst.cost.beta * inst.size(i) * e.column.num_updates() as f64;
                let profile = e.column.aoi_profile();
                for &r in idx.scr(h, i) {
                    match settle_scr(inst, &inst.requests[r], &profile, pool.rule()) {
                        Some((_, a)) => aoi += w * inst.f(a),
                        None => {
                            aoi += w * inst.f(0);
                            download += w * inst.cost.alpha * inst.size(i);
                        }
                    }
                }
            }
        }
    }
    let mut served = vec![0.0; inst.requests.len()];
    for &(r, _, a, v) in &sol.y {
        served[r] += v;
        aoi += v * inst.f(a);
    }
    for &r in idx.mcr_ids() {
        let rest = (1.0 - served[r]).max(0.0);
        let i = inst.requests[r].content;
        aoi += rest * inst.f(0);
        download += rest * inst.cost.alpha * inst.size(i);
    }
    CostBreakdown::new(aoi, download, update)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::column::enumerate_columns;
    use crate::instance::{ContentSpec, Request, ServerSpec, Topology};

    fn full_tiny_pool(inst: &Instance, idx: &RequestIndex) -> ColumnPool {
        let mut pool = ColumnPool::initial(inst, idx, Settlement::Paper);
        for c in enumerate_columns(inst.horizon).unwrap() {
            pool.insert(inst, idx, 0, 0, c);
        }
        pool
    }

    #[test]
    fn tiny_rows_and_objective() {
        let inst = Instance::tiny();
        let idx = RequestIndex::new(&inst);
        let pool = full_tiny_pool(&inst, &idx);
        let lp = build_rmp(&pool, &inst, &idx).unwrap();
        // 2 cache + 2 backhaul + 1 convexity
        assert_eq!(lp.num_rows(), 5);
        assert_eq!(lp.offset, 0.0);
        for backend in [BackendChoice::Dense, BackendChoice::Highs] {
            let mut rmp = Rmp::new(&inst, &idx, &pool, backend).unwrap();
            let sol = rmp.solve(&inst, &idx, &pool).unwrap();
            assert!((sol.objective - 3.0).abs() < 1e-9);
            let sum: f64 = sol.chi[0].iter().sum();
            assert!((sum - 1.0).abs() < 1e-7);
            for e in pool.get(0, 0) {
                let d = reduced_cost(&e.column, 0, 0, &sol.duals, &inst, &idx, Settlement::Paper);
                assert!(d >= -1e-6, "{} has reduced cost {d}", e.column);
            }
        }
    }

    #[test]
    fn absent_only_pool_costs_cloud() {
        let inst = Instance::tiny();
        let idx = RequestIndex::new(&inst);
        let pool = ColumnPool::initial(&inst, &idx, Settlement::Paper);
        let mut rmp = Rmp::new(&inst, &idx, &pool, BackendChoice::Auto).unwrap();
        let sol = rmp.solve(&inst, &idx, &pool).unwrap();
        assert_eq!(sol.objective, 23.0);
        // the convexity dual prices the only column at zero reduced cost
        assert!((sol.duals.lambda(0, 0) - 23.0).abs() < 1e-9);
    }

    #[test]
    fn reduced_cost_with_lambda_only() {
        let inst = Instance::tiny();
        let idx = RequestIndex::new(&inst);
        let mut duals = DualPrices::zeros(&inst);
        duals.lambda[0] = 23.0;
        let d = reduced_cost(&Column::absent(2), 0, 0, &duals, &inst, &idx, Settlement::Paper);
        assert_eq!(d, 0.0);
    }

    fn one_mcr_instance(size: u32) -> Instance {
        Instance {
            servers: vec![ServerSpec { cache_capacity: 10.0, backhaul_capacity: 10.0 }; 2],
            contents: vec![ContentSpec { size }],
            requests: vec![Request { content: 0, origin: 0, deadline: 0, candidates: vec![0, 1] }],
            horizon: 1,
            topology: Topology { edges: vec![(0, 1)], triples: vec![] },
            ..Instance::tiny()
        }
    }

    #[test]
    fn single_mcr_rows_and_constant() {
        let inst = one_mcr_instance(3);
        let idx = RequestIndex::new(&inst);
        let pool = ColumnPool::initial(&inst, &idx, Settlement::Paper);
        let lp = build_rmp(&pool, &inst, &idx).unwrap();
        let assign = lp.row_names.iter().filter(|n| n.starts_with("assign")).count();
        let cover = lp.row_names.iter().filter(|n| n.starts_with("cover")).count();
        assert_eq!((assign, cover), (1, 2));
        assert_eq!(lp.offset, 34.0);
    }

    #[test]
    fn mcr_served_by_cheapest_server() {
        let inst = one_mcr_instance(3);
        let idx = RequestIndex::new(&inst);
        let mut pool = ColumnPool::initial(&inst, &idx, Settlement::Paper);
        pool.insert(&inst, &idx, 0, 0, "U".parse().unwrap());
        pool.insert(&inst, &idx, 1, 0, "U".parse().unwrap());
        let mut rmp = Rmp::new(&inst, &idx, &pool, BackendChoice::Dense).unwrap();
        let sol = rmp.solve(&inst, &idx, &pool).unwrap();
        // update 3 on one server, serve at f(0) = 1
        assert!((sol.objective - 4.0).abs() < 1e-9);
        for h in 0..2 {
            for e in pool.get(h, 0) {
                let d = reduced_cost(&e.column, h, 0, &sol.duals, &inst, &idx, Settlement::Paper);
                assert!(d >= -1e-7);
            }
        }
        let fb = fractional_breakdown(&inst, &idx, &pool, &sol);
        assert!((fb.total - sol.objective).abs() < 1e-9);
    }

    #[test]
    fn purged_columns_are_fixed_at_zero() {
        let inst = Instance::tiny();
        let idx = RequestIndex::new(&inst);
        let mut pool = full_tiny_pool(&inst, &idx);
        let mut rmp = Rmp::new(&inst, &idx, &pool, BackendChoice::Highs).unwrap();
        assert!((rmp.solve(&inst, &idx, &pool).unwrap().objective - 3.0).abs() < 1e-9);
        pool.retain(0, 0, |c| c.to_string() == "AA" || c.to_string() == "UU");
        let sol = rmp.solve(&inst, &idx, &pool).unwrap();
        assert!((sol.objective - 5.0).abs() < 1e-9);
        assert_eq!(sol.chi[0].len(), 2);
    }
}
