//! Reference solvers: the popularity-based greedy, an exhaustive search for
//! tiny instances, and the compact integer program in LP-file form.

use std::time::Instant;

use crate::column::{column_cost_s, enumerate_columns, Column, SlotState};
use crate::cost::AssignmentPlan;
use crate::cost::{request_cost, settle_mcr, Schedule, Service, Settlement, SettlementMode};
use crate::driver::{Algorithm, SolveReport};
use crate::error::{McspError, Result};
use crate::instance::{Instance, RequestIndex};
use crate::lp::{solve_mip, write_lp_format, LpProblem, Relation};

/// Greedy caching by popularity.
///
/// A content's popularity at a server counts the requests listing that
/// server. Per slot, cached contents are refreshed (in popularity order)
/// once their AoI cost reaches half their download cost and backhaul
/// allows; then uncached contents are admitted while cache and backhaul
/// allow. Nothing is evicted. Contents nobody asks a server for are never
/// cached there.
pub fn run_pba(inst: &Instance) -> SolveReport {
    let start = Instant::now();
    let tc = inst.horizon;
    let ni = inst.num_contents();
    let mut schedule = Schedule::empty(inst);
    for h in 0..inst.num_servers() {
        let mut popularity = vec![0usize; ni];
        for r in &inst.requests {
            if r.covers(h) {
                popularity[r.content] += 1;
            }
        }
        let mut order: Vec<usize> = (0..ni).filter(|&i| popularity[i] > 0).collect();
        order.sort_by(|&a, &b| popularity[b].cmp(&popularity[a]).then(a.cmp(&b)));

        let mut states = vec![vec![SlotState::Absent; tc]; ni];
        let mut aoi: Vec<Option<usize>> = vec![None; ni];
        let mut cache_used = 0.0;
        let cap = inst.servers[h].cache_capacity;
        let bh = inst.servers[h].backhaul_capacity;
        for t in 0..tc {
            let mut backhaul_used = 0.0;
            for &i in &order {
                let Some(prev) = aoi[i] else { continue };
                let s = inst.size(i);
                let age = prev + 1;
                if inst.f(age) >= inst.cost.alpha * s / 2.0 && backhaul_used + s <= bh {
                    backhaul_used += s;
                    states[i][t] = SlotState::Update;
                    aoi[i] = Some(0);
                } else {
                    states[i][t] = SlotState::Cached;
                    aoi[i] = Some(age);
                }
            }
            for &i in &order {
                if aoi[i].is_some() {
                    continue;
                }
                let s = inst.size(i);
                if cache_used + s <= cap && backhaul_used + s <= bh {
                    cache_used += s;
                    backhaul_used += s;
                    states[i][t] = SlotState::Update;
                    aoi[i] = Some(0);
                }
            }
        }
        for (i, st) in states.into_iter().enumerate() {
            schedule.set(h, i, Column::new(st).expect("greedy states form a valid column"));
        }
    }
    let mut report = SolveReport::new(Algorithm::Pba, SettlementMode::Min);
    report.finish_with(inst, schedule);
    report.wall_time_s = start.elapsed().as_secs_f64();
    report
}

/// Size limits for [`solve_exact`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ExactCaps {
    pub max_servers: usize,
    pub max_contents: usize,
    pub max_horizon: usize,
    pub max_requests: usize,
}

impl Default for ExactCaps {
    fn default() -> Self {
        ExactCaps { max_servers: 2, max_contents: 3, max_horizon: 4, max_requests: 12 }
    }
}

struct Search<'a> {
    inst: &'a Instance,
    pairs: Vec<(usize, usize)>,
    /// Candidate columns per pair with their standalone cost, cheapest first.
    cands: Vec<Vec<(Column, f64)>>,
    /// `rest_min[k]`: cheapest standalone cost of pairs `k..`.
    rest_min: Vec<f64>,
    /// Multiple-choice requests whose last candidate pair is pair `k`.
    closes: Vec<Vec<usize>>,
    open_mcr_floor: Vec<f64>,
    cache: Vec<f64>,
    backhaul: Vec<f64>,
    schedule: Schedule,
    best: f64,
    best_schedule: Option<Schedule>,
}

impl Search<'_> {
    fn dfs(&mut self, k: usize, partial: f64) {
        if partial + self.rest_min[k] + self.open_mcr_floor[k] >= self.best - 1e-12 {
            return;
        }
        if k == self.pairs.len() {
            self.best = partial;
            self.best_schedule = Some(self.schedule.clone());
            return;
        }
        let (h, i) = self.pairs[k];
        let s = self.inst.size(i);
        let tc = self.inst.horizon;
        let (cap, bh) = (self.inst.servers[h].cache_capacity, self.inst.servers[h].backhaul_capacity);
        for c in 0..self.cands[k].len() {
            let (col, cost) = self.cands[k][c].clone();
            let fits = (0..tc).all(|t| {
                (!col.q(t) || self.cache[h * tc + t] + s <= cap + 1e-9) && (!col.p(t) || self.backhaul[h * tc + t] + s <= bh + 1e-9)
            });
            if !fits {
                continue;
            }
            for t in 0..tc {
                self.cache[h * tc + t] += s * col.q(t) as u8 as f64;
                self.backhaul[h * tc + t] += s * col.p(t) as u8 as f64;
            }
            self.schedule.set(h, i, col.clone());
            let closed: f64 = self.closes[k].iter().map(|&r| mcr_cost(self.inst, r, &self.schedule)).sum();
            self.dfs(k + 1, partial + cost + closed);
            for t in 0..tc {
                self.cache[h * tc + t] -= s * col.q(t) as u8 as f64;
                self.backhaul[h * tc + t] -= s * col.p(t) as u8 as f64;
            }
        }
    }
}

fn mcr_cost(inst: &Instance, r: usize, schedule: &Schedule) -> f64 {
    let req = &inst.requests[r];
    match settle_mcr(inst, req, schedule) {
        Service::Cloud => request_cost(inst, req.content, None),
        Service::Cache { aoi, .. } => request_cost(inst, req.content, Some(aoi)),
    }
}

/// Columns worth trying for a pair: nothing held after the last slot any of
/// its requests can use.
fn useful_columns(inst: &Instance, idx: &RequestIndex, h: usize, i: usize) -> Result<Vec<Column>> {
    let last = idx.scr(h, i).iter().chain(idx.mcr(h, i)).map(|&r| inst.requests[r].deadline).max();
    let all = enumerate_columns(inst.horizon)?;
    Ok(match last {
        None => vec![Column::absent(inst.horizon)],
        Some(d) => all.into_iter().filter(|c| (d + 1..inst.horizon).all(|t| c.state(t) == SlotState::Absent)).collect(),
    })
}

/// Optimal objective and schedule by exhaustive search.
///
/// `Paper` scores single-choice requests at their deadlines; `Min` serves
/// every request at its best slot. Multiple-choice requests are served at
/// their best candidate and slot in both.
pub fn exact_optimum(inst: &Instance, mode: SettlementMode, caps: ExactCaps) -> Result<(f64, Schedule)> {
    let too_large = |detail: String| McspError::TooLarge { what: "exhaustive search", detail };
    if inst.num_servers() > caps.max_servers {
        return Err(too_large(format!("{} servers > {}", inst.num_servers(), caps.max_servers)));
    }
    if inst.num_contents() > caps.max_contents {
        return Err(too_large(format!("{} contents > {}", inst.num_contents(), caps.max_contents)));
    }
    if inst.horizon > caps.max_horizon {
        return Err(too_large(format!("{} slots > {}", inst.horizon, caps.max_horizon)));
    }
    if inst.requests.len() > caps.max_requests {
        return Err(too_large(format!("{} requests > {}", inst.requests.len(), caps.max_requests)));
    }
    let rule = match mode {
        SettlementMode::Paper => Settlement::Paper,
        SettlementMode::Min => Settlement::Flexible,
    };
    let idx = RequestIndex::new(inst);
    let mut pairs = Vec::new();
    let mut cands = Vec::new();
    for h in 0..inst.num_servers() {
        for i in 0..inst.num_contents() {
            let mut cs: Vec<(Column, f64)> = useful_columns(inst, &idx, h, i)?
                .into_iter()
                .map(|c| {
                    let v = column_cost_s(&c, h, i, inst, &idx, rule);
                    (c, v)
                })
                .collect();
            cs.sort_by(|a, b| a.1.total_cmp(&b.1));
            pairs.push((h, i));
            cands.push(cs);
        }
    }
    let n = pairs.len();
    let mut rest_min = vec![0.0; n + 1];
    for k in (0..n).rev() {
        rest_min[k] = rest_min[k + 1] + cands[k][0].1;
    }
    let mut closes = vec![Vec::new(); n];
    let mut open_mcr_floor = vec![0.0; n + 1];
    for &r in idx.mcr_ids() {
        let req = &inst.requests[r];
        let last = req.candidates.iter().map(|&h| h * inst.num_contents() + req.content).max().expect("requests have candidates");
        closes[last].push(r);
        for floor in open_mcr_floor.iter_mut().take(last + 1) {
            *floor += inst.f(0).min(inst.cloud_cost(req.content));
        }
    }
    let mut search = Search {
        inst,
        pairs,
        cands,
        rest_min,
        closes,
        open_mcr_floor,
        cache: vec![0.0; inst.num_servers() * inst.horizon],
        backhaul: vec![0.0; inst.num_servers() * inst.horizon],
        schedule: Schedule::empty(inst),
        best: f64::INFINITY,
        best_schedule: None,
    };
    search.dfs(0, 0.0);
    let schedule = search.best_schedule.expect("the all-absent schedule is always feasible");
    Ok((search.best, schedule))
}

pub fn solve_exact(inst: &Instance, mode: SettlementMode, caps: ExactCaps) -> Result<SolveReport> {
    let start = Instant::now();
    let (_, schedule) = exact_optimum(inst, mode, caps)?;
    let mut report = SolveReport::new(Algorithm::Exact, mode);
    report.finish_with(inst, schedule);
    report.wall_time_s = start.elapsed().as_secs_f64();
    Ok(report)
}

/// The compact integer program: AoI-state variables `x(h,i,t,a)`, caching
/// variables `z(h,i,t)` and service variables `y(r,h,a)`.
#[derive(Clone, Debug)]
pub struct IlpModel {
    pub lp: LpProblem,
    pub integer: Vec<bool>,
    horizon: usize,
    contents: usize,
    x0: usize,
    z0: usize,
    /// First `y` column of each request, with one block of `d + 1` AoIs per candidate.
    y_start: Vec<usize>,
}

impl IlpModel {
    pub fn new(inst: &Instance) -> Self {
        let tc = inst.horizon;
        let ni = inst.num_contents();
        let mut lp = LpProblem::new();
        let x0 = 0;
        for h in 0..inst.num_servers() {
            for i in 0..ni {
                for t in 0..tc {
                    for a in 0..=t {
                        let cost = if a == 0 { inst.cost.beta * inst.size(i) } else { 0.0 };
                        lp.add_named_var(format!("x_{}_{}_{}_{}", h + 1, i + 1, t + 1, a), cost, 0.0, 1.0);
                    }
                }
            }
        }
        let z0 = lp.num_cols();
        for h in 0..inst.num_servers() {
            for i in 0..ni {
                for t in 0..tc {
                    lp.add_named_var(format!("z_{}_{}_{}", h + 1, i + 1, t + 1), 0.0, 0.0, 1.0);
                }
            }
        }
        let mut y_start = Vec::new();
        for (r, req) in inst.requests.iter().enumerate() {
            y_start.push(lp.num_cols());
            lp.offset += inst.cloud_cost(req.content);
            for &h in &req.candidates {
                for a in 0..=req.deadline {
                    lp.add_named_var(format!("y_{}_{}_{}", r + 1, h + 1, a), inst.f(a) - inst.cloud_cost(req.content), 0.0, 1.0);
                }
            }
        }
        let mut model = IlpModel { integer: vec![true; lp.num_cols()], lp, horizon: tc, contents: ni, x0, z0, y_start };
        model.add_rows(inst);
        model
    }

    fn x(&self, h: usize, i: usize, t: usize, a: usize) -> usize {
        // each slot t holds t + 1 AoI values
        let per_pair = self.horizon * (self.horizon + 1) / 2;
        self.x0 + (h * self.contents + i) * per_pair + t * (t + 1) / 2 + a
    }

    fn z(&self, h: usize, i: usize, t: usize) -> usize {
        self.z0 + (h * self.contents + i) * self.horizon + t
    }

    fn y(&self, inst: &Instance, r: usize, h: usize, a: usize) -> usize {
        let req = &inst.requests[r];
        let k = req.candidates.iter().position(|&c| c == h).expect("candidate server");
        self.y_start[r] + k * (req.deadline + 1) + a
    }

    fn add_rows(&mut self, inst: &Instance) {
        let tc = self.horizon;
        let mut rows = Vec::new();
        for h in 0..inst.num_servers() {
            for i in 0..self.contents {
                for t in 1..tc {
                    for a in 1..=t {
                        rows.push((
                            format!("age_{}_{}_{}_{}", h + 1, i + 1, t + 1, a),
                            vec![(self.x(h, i, t, a), 1.0), (self.x(h, i, t - 1, a - 1), -1.0)],
                            Relation::Le,
                            0.0,
                        ));
                    }
                }
                for t in 0..tc {
                    let mut coeffs: Vec<(usize, f64)> = (0..=t).map(|a| (self.x(h, i, t, a), 1.0)).collect();
                    coeffs.push((self.z(h, i, t), -1.0));
                    rows.push((format!("hold_{}_{}_{}", h + 1, i + 1, t + 1), coeffs, Relation::Eq, 0.0));
                }
            }
        }
        for (r, req) in inst.requests.iter().enumerate() {
            let mut once = Vec::new();
            for &h in &req.candidates {
                for a in 0..=req.deadline {
                    let y = self.y(inst, r, h, a);
                    once.push((y, 1.0));
                    let mut cover = vec![(y, 1.0)];
                    for t in req.origin.max(a)..=req.deadline {
                        cover.push((self.x(h, req.content, t, a), -1.0));
                    }
                    rows.push((format!("serve_{}_{}_{}", r + 1, h + 1, a), cover, Relation::Le, 0.0));
                }
            }
            rows.push((format!("once_{}", r + 1), once, Relation::Le, 1.0));
        }
        for h in 0..inst.num_servers() {
            for t in 0..tc {
                let cache = (0..self.contents).map(|i| (self.z(h, i, t), inst.size(i))).collect();
                rows.push((format!("cache_{}_{}", h + 1, t + 1), cache, Relation::Le, inst.servers[h].cache_capacity));
                let bh = (0..self.contents).map(|i| (self.x(h, i, t, 0), inst.size(i))).collect();
                rows.push((format!("backhaul_{}_{}", h + 1, t + 1), bh, Relation::Le, inst.servers[h].backhaul_capacity));
            }
        }
        for (name, coeffs, rel, rhs) in rows {
            self.lp.add_named_row(name, coeffs, rel, rhs);
        }
    }

    pub fn num_x(&self) -> usize {
        self.z0 - self.x0
    }

    pub fn num_z(&self) -> usize {
        self.y_start.first().copied().unwrap_or(self.lp.num_cols()) - self.z0
    }

    pub fn num_y(&self) -> usize {
        self.lp.num_cols() - self.z0 - self.num_z()
    }

    /// The variable vector of a schedule and its assignment.
    pub fn point(&self, inst: &Instance, schedule: &Schedule, plan: &AssignmentPlan) -> Vec<f64> {
        let mut v = vec![0.0; self.lp.num_cols()];
        for h in 0..inst.num_servers() {
            for i in 0..self.contents {
                for (t, a) in schedule.column(h, i).aoi_profile().into_iter().enumerate() {
                    if let Some(a) = a {
                        v[self.x(h, i, t, a)] = 1.0;
                        v[self.z(h, i, t)] = 1.0;
                    }
                }
            }
        }
        for (r, s) in plan.services.iter().enumerate() {
            if let Service::Cache { server, aoi, .. } = *s {
                v[self.y(inst, r, server, aoi)] = 1.0;
            }
        }
        v
    }

    pub fn to_lp_format(&self) -> String {
        write_lp_format(&self.lp, &self.integer)
    }

    /// Optimal objective by branch and bound; `None` only if infeasible.
    pub fn solve(&self, time_limit: Option<f64>) -> Result<Option<f64>> {
        Ok(solve_mip(&self.lp, &self.integer, time_limit)?.map(|(_, obj)| obj))
    }
}

/// The integer program of `inst` in CPLEX LP format.
pub fn export_ilp(inst: &Instance) -> String {
    IlpModel::new(inst).to_lp_format()
}
