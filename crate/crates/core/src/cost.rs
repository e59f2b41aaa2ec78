//! Schedules, request service plans and their cost.

use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::column::{Column, SlotState};
use crate::error::{McspError, Result};
use crate::instance::{Instance, Request, Violation};

pub const SCHEDULE_SCHEMA: &str = "mcsp-schedule/1";

/// When a request's service is decided.
///
/// * `Paper`: a single-choice request is settled at its deadline from the
///   server state there, at AoI `max(0, a - (d - o))`, even when the cloud
///   would be cheaper; absent at the deadline means cloud.
/// * `Clamped`: as `Paper`, but falls back to the cloud when that is cheaper.
/// * `Flexible`: best AoI over any slot of the window, clamped at cloud cost.
///
/// Multiple-choice requests are always served flexibly (best candidate,
/// best slot, clamped), matching their service variables in the master LP.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Settlement {
    Paper,
    Clamped,
    Flexible,
}

/// User-facing mode: `paper` reproduces the graph's deadline settlement,
/// `min` picks the cheaper option.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SettlementMode {
    #[default]
    Paper,
    Min,
}

impl SettlementMode {
    /// Settlement a column's standalone cost uses while pricing.
    pub fn pricing(self) -> Settlement {
        match self {
            SettlementMode::Paper => Settlement::Paper,
            SettlementMode::Min => Settlement::Clamped,
        }
    }

    /// Settlement used when assigning requests for a fixed schedule.
    pub fn assignment(self) -> Settlement {
        match self {
            SettlementMode::Paper => Settlement::Paper,
            SettlementMode::Min => Settlement::Flexible,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SettlementMode::Paper => "paper",
            SettlementMode::Min => "min",
        }
    }
}

impl fmt::Display for SettlementMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for SettlementMode {
    type Err = McspError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(SettlementMode::Paper),
            "min" => Ok(SettlementMode::Min),
            other => Err(McspError::Config(format!("unknown settlement mode {other:?}"))),
        }
    }
}

/// One column per (server, content) pair, indexed by `Instance::pair`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Schedule {
    pub horizon: usize,
    pub num_servers: usize,
    pub num_contents: usize,
    pub columns: Vec<Column>,
}

impl Schedule {
    pub fn empty(inst: &Instance) -> Self {
        Schedule {
            horizon: inst.horizon,
            num_servers: inst.num_servers(),
            num_contents: inst.num_contents(),
            columns: vec![Column::absent(inst.horizon); inst.num_servers() * inst.num_contents()],
        }
    }

    pub fn column(&self, h: usize, i: usize) -> &Column {
        &self.columns[h * self.num_contents + i]
    }

    pub fn set(&mut self, h: usize, i: usize, col: Column) {
        self.columns[h * self.num_contents + i] = col;
    }

    pub fn state(&self, h: usize, i: usize, t: usize) -> SlotState {
        self.column(h, i).state(t)
    }
}

/// Per-slot AoI of one (server, content) pair; `None` where not cached.
pub fn derive_aoi(schedule: &Schedule, h: usize, i: usize) -> Vec<Option<usize>> {
    schedule.column(h, i).aoi_profile()
}

/// AoI trajectory of a raw state sequence.
pub fn aoi_of_states(states: &[SlotState]) -> Result<Vec<Option<usize>>> {
    let mut out = Vec::with_capacity(states.len());
    let mut prev: Option<usize> = None;
    for (t, s) in states.iter().enumerate() {
        let cur = match s {
            SlotState::Absent => None,
            SlotState::Update => Some(0),
            SlotState::Cached => match prev {
                Some(a) => Some(a + 1),
                None => {
                    return Err(McspError::MalformedColumn(format!(
                        "slot {} keeps a content that is not cached in the previous slot",
                        t + 1
                    )))
                }
            },
        };
        out.push(cur);
        prev = cur;
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Service {
    Cloud,
    Cache { server: usize, slot: usize, aoi: usize },
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AssignmentPlan {
    pub services: Vec<Service>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub aoi_cost: f64,
    pub download_cost: f64,
    pub update_cost: f64,
    pub total: f64,
}

impl CostBreakdown {
    pub fn new(aoi_cost: f64, download_cost: f64, update_cost: f64) -> Self {
        CostBreakdown { aoi_cost, download_cost, update_cost, total: aoi_cost + download_cost + update_cost }
    }

    pub fn download_share(&self) -> f64 {
        if self.total > 0.0 {
            self.download_cost / self.total
        } else {
            0.0
        }
    }
}

pub fn aoi_cost(plan: &AssignmentPlan, inst: &Instance) -> f64 {
    plan.services
        .iter()
        .map(|s| match s {
            Service::Cloud => inst.f(0),
            Service::Cache { aoi, .. } => inst.f(*aoi),
        })
        .fold(0.0, |a, b| a + b)
}

pub fn download_cost(plan: &AssignmentPlan, inst: &Instance) -> f64 {
    let units: f64 = plan
        .services
        .iter()
        .zip(&inst.requests)
        .filter(|(s, _)| matches!(s, Service::Cloud))
        .map(|(_, r)| inst.size(r.content))
        .fold(0.0, |a, b| a + b);
    inst.cost.alpha * units
}

pub fn update_cost(schedule: &Schedule, inst: &Instance) -> f64 {
    let mut units = 0.0;
    for h in 0..schedule.num_servers {
        for i in 0..schedule.num_contents {
            units += schedule.column(h, i).num_updates() as f64 * inst.size(i);
        }
    }
    inst.cost.beta * units
}

pub fn evaluate(inst: &Instance, schedule: &Schedule, plan: &AssignmentPlan) -> CostBreakdown {
    CostBreakdown::new(aoi_cost(plan, inst), download_cost(plan, inst), update_cost(schedule, inst))
}

/// Cost of one request given where it is served (`None` = cloud).
pub fn request_cost(inst: &Instance, content: usize, aoi: Option<usize>) -> f64 {
    match aoi {
        Some(a) => inst.f(a),
        None => inst.cloud_cost(content),
    }
}

/// Service of a single-choice request from one server's AoI profile.
pub fn settle_scr(inst: &Instance, req: &Request, aoi: &[Option<usize>], rule: Settlement) -> Option<(usize, usize)> {
    let (o, d) = (req.origin, req.deadline);
    match rule {
        Settlement::Flexible => {
            let (slot, a) = best_in_window(aoi, o, d)?;
            (inst.f(a) <= inst.cloud_cost(req.content)).then_some((slot, a))
        }
        Settlement::Paper | Settlement::Clamped => {
            let a = aoi[d]?;
            let w = d - o;
            let (slot, served) = if a >= w { (o, a - w) } else { (d - a, 0) };
            if rule == Settlement::Clamped && inst.f(served) > inst.cloud_cost(req.content) {
                return None;
            }
            Some((slot, served))
        }
    }
}

/// Smallest AoI within slots `o..=d`, at its earliest slot.
fn best_in_window(aoi: &[Option<usize>], o: usize, d: usize) -> Option<(usize, usize)> {
    let mut best: Option<(usize, usize)> = None;
    for (t, a) in aoi.iter().enumerate().take(d + 1).skip(o) {
        if let Some(a) = *a {
            if best.is_none_or(|(_, b)| a < b) {
                best = Some((t, a));
            }
        }
    }
    best
}

/// Service of a multiple-choice request: lowest AoI over candidates and
/// window slots, ties to the lowest server, clamped at the cloud cost.
pub fn settle_mcr(inst: &Instance, req: &Request, schedule: &Schedule) -> Service {
    let mut best: Option<(usize, usize, usize)> = None;
    for &h in &req.candidates {
        let profile = schedule.column(h, req.content).aoi_profile();
        if let Some((slot, a)) = best_in_window(&profile, req.origin, req.deadline) {
            if best.is_none_or(|(b, _, _)| a < b) {
                best = Some((a, h, slot));
            }
        }
    }
    match best {
        Some((a, h, slot)) if inst.f(a) <= inst.cloud_cost(req.content) => Service::Cache { server: h, slot, aoi: a },
        _ => Service::Cloud,
    }
}

pub fn derive_assignment(schedule: &Schedule, inst: &Instance, mode: SettlementMode) -> AssignmentPlan {
    assign_with(schedule, inst, mode.assignment())
}

pub fn assign_with(schedule: &Schedule, inst: &Instance, rule: Settlement) -> AssignmentPlan {
    let services = inst
        .requests
        .iter()
        .map(|req| {
            if req.is_mcr() {
                return settle_mcr(inst, req, schedule);
            }
            let h = req.candidates[0];
            let profile = schedule.column(h, req.content).aoi_profile();
            match settle_scr(inst, req, &profile, rule) {
                Some((slot, aoi)) => Service::Cache { server: h, slot, aoi },
                None => Service::Cloud,
            }
        })
        .collect();
    AssignmentPlan { services }
}

/// Capacity and shape violations of a schedule.
pub fn check_feasibility(schedule: &Schedule, inst: &Instance) -> Vec<Violation> {
    let mut out = Vec::new();
    if schedule.horizon != inst.horizon
        || schedule.num_servers != inst.num_servers()
        || schedule.num_contents != inst.num_contents()
        || schedule.columns.len() != inst.num_servers() * inst.num_contents()
    {
        out.push(Violation::new("schedule", "dimensions do not match the instance"));
        return out;
    }
    for h in 0..schedule.num_servers {
        for i in 0..schedule.num_contents {
            let col = schedule.column(h, i);
            if col.len() != inst.horizon {
                out.push(Violation::new(format!("schedule[{}][{}]", h + 1, i + 1), "state string length differs from the horizon"));
            } else if let Err(e) = aoi_of_states(col.states()) {
                out.push(Violation::new(format!("schedule[{}][{}]", h + 1, i + 1), e.to_string()));
            }
        }
    }
    if !out.is_empty() {
        return out;
    }
    // capacities are compared with a relative slack so float capacities like 0.3 * 550 pass
    for (h, server) in inst.servers.iter().enumerate() {
        for t in 0..inst.horizon {
            let mut cached = 0.0;
            let mut updated = 0.0;
            for i in 0..inst.num_contents() {
                match schedule.state(h, i, t) {
                    SlotState::Absent => {}
                    SlotState::Update => {
                        cached += inst.size(i);
                        updated += inst.size(i);
                    }
                    SlotState::Cached => cached += inst.size(i),
                }
            }
            if cached > server.cache_capacity * (1.0 + 1e-9) + 1e-9 {
                out.push(Violation::new(
                    format!("server {} slot {}", h + 1, t + 1),
                    format!("cache holds {cached} > capacity {}", server.cache_capacity),
                ));
            }
            if updated > server.backhaul_capacity * (1.0 + 1e-9) + 1e-9 {
                out.push(Violation::new(
                    format!("server {} slot {}", h + 1, t + 1),
                    format!("backhaul carries {updated} > capacity {}", server.backhaul_capacity),
                ));
            }
        }
    }
    out
}

/// Checks that every cache service in `plan` is realisable by `schedule`.
pub fn check_plan(schedule: &Schedule, plan: &AssignmentPlan, inst: &Instance) -> Vec<Violation> {
    let mut out = Vec::new();
    if plan.services.len() != inst.requests.len() {
        out.push(Violation::new("assignment", "one service per request is required"));
        return out;
    }
    for (r, (svc, req)) in plan.services.iter().zip(&inst.requests).enumerate() {
        if let Service::Cache { server, slot, aoi } = *svc {
            let field = format!("assignment[{}]", r + 1);
            if !req.covers(server) {
                out.push(Violation::new(field, "server is not a candidate"));
            } else if slot < req.origin || slot > req.deadline {
                out.push(Violation::new(field, "slot outside the request window"));
            } else if schedule.column(server, req.content).aoi(slot) != Some(aoi) {
                out.push(Violation::new(field, "schedule does not hold the content at that AoI"));
            }
        }
    }
    out
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScheduleFile {
    schema: String,
    horizon: usize,
    servers: usize,
    contents: usize,
    states: Vec<PairRecord>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PairRecord {
    server: usize,
    content: usize,
    states: String,
}

impl Serialize for Schedule {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        let mut states = Vec::new();
        for h in 0..self.num_servers {
            for i in 0..self.num_contents {
                states.push(PairRecord { server: h + 1, content: i + 1, states: self.column(h, i).to_string() });
            }
        }
        ScheduleFile {
            schema: SCHEDULE_SCHEMA.into(),
            horizon: self.horizon,
            servers: self.num_servers,
            contents: self.num_contents,
            states,
        }
        .serialize(ser)
    }
}

impl<'de> Deserialize<'de> for Schedule {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error;
        let f = ScheduleFile::deserialize(de)?;
        if f.schema != SCHEDULE_SCHEMA {
            return Err(D::Error::custom(format!("expected schema {SCHEDULE_SCHEMA:?}, found {:?}", f.schema)));
        }
        let mut columns = vec![Column::absent(f.horizon); f.servers * f.contents];
        for rec in f.states {
            if rec.server == 0 || rec.server > f.servers || rec.content == 0 || rec.content > f.contents {
                return Err(D::Error::custom(format!("state record for server {} content {} is out of range", rec.server, rec.content)));
            }
            let col: Column = rec.states.parse().map_err(D::Error::custom)?;
            if col.len() != f.horizon {
                return Err(D::Error::custom(format!("state string {:?} does not have length {}", rec.states, f.horizon)));
            }
            columns[(rec.server - 1) * f.contents + rec.content - 1] = col;
        }
        Ok(Schedule { horizon: f.horizon, num_servers: f.servers, num_contents: f.contents, columns })
    }
}

#[derive(Serialize, Deserialize)]
struct ServiceRecord {
    request: usize,
    #[serde(flatten)]
    service: Service,
}

/// Written with 1-based request, server and slot ids.
impl Serialize for AssignmentPlan {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        let recs: Vec<ServiceRecord> = self
            .services
            .iter()
            .enumerate()
            .map(|(r, s)| ServiceRecord {
                request: r + 1,
                service: match *s {
                    Service::Cloud => Service::Cloud,
                    Service::Cache { server, slot, aoi } => Service::Cache { server: server + 1, slot: slot + 1, aoi },
                },
            })
            .collect();
        recs.serialize(ser)
    }
}

impl<'de> Deserialize<'de> for AssignmentPlan {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error;
        let recs = Vec::<ServiceRecord>::deserialize(de)?;
        let mut services = Vec::with_capacity(recs.len());
        for (k, rec) in recs.into_iter().enumerate() {
            if rec.request != k + 1 {
                return Err(D::Error::custom(format!("service record {} is for request {}", k + 1, rec.request)));
            }
            services.push(match rec.service {
                Service::Cloud => Service::Cloud,
                Service::Cache { server, slot, aoi } if server > 0 && slot > 0 => {
                    Service::Cache { server: server - 1, slot: slot - 1, aoi }
                }
                Service::Cache { .. } => return Err(D::Error::custom("server and slot ids start at 1")),
            });
        }
        Ok(AssignmentPlan { services })
    }
}

pub fn save_schedule(schedule: &Schedule, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(schedule).expect("schedule serializes");
    fs::write(path, text).map_err(|e| McspError::io(path, e))
}

pub fn load_schedule(path: impl AsRef<Path>) -> Result<Schedule> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| McspError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| McspError::Schema(e.to_string()))
}
