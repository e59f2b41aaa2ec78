//! Problem data: cells (cache servers), contents, timestamped requests and
//! cost parameters.
//!
//! Everything in memory is 0-based: server `h`, content `i` and slot `t`
//! index directly into vectors. Files and user-facing output use 1-based ids.

mod generate;
mod index;
mod io;

pub use generate::{generate_instance, CellLayout, GeneratorConfig};
pub use index::RequestIndex;
pub use io::{load_instance, read_instance, save_instance, write_instance, INSTANCE_SCHEMA};

use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq)]
pub struct ServerSpec {
    /// `C_h`, in size units.
    pub cache_capacity: f64,
    /// `G_h`, in size units per slot.
    pub backhaul_capacity: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ContentSpec {
    pub size: u32,
}

/// The AoI penalty `f(a)`, shared by all contents.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AoiCost {
    /// `scale * exp(rate * a)`
    Exponential { scale: f64, rate: f64 },
    /// `intercept + slope * a`
    Linear { intercept: f64, slope: f64 },
    /// `values[a]`; must cover every AoI below the horizon.
    Table { values: Vec<f64> },
}

impl Default for AoiCost {
    fn default() -> Self {
        AoiCost::Exponential { scale: 1.0, rate: 1.0 }
    }
}

impl AoiCost {
    pub fn eval(&self, aoi: usize) -> f64 {
        match self {
            AoiCost::Exponential { scale, rate } => scale * (rate * aoi as f64).exp(),
            AoiCost::Linear { intercept, slope } => intercept + slope * aoi as f64,
            AoiCost::Table { values } => values.get(aoi).or_else(|| values.last()).copied().unwrap_or(0.0),
        }
    }

    /// Checks monotonicity and finiteness on `0..horizon`.
    fn violations(&self, horizon: usize) -> Vec<Violation> {
        let mut out = Vec::new();
        if let AoiCost::Table { values } = self {
            if values.len() < horizon {
                out.push(Violation::new("cost.aoi.values", format!("table has {} entries, horizon needs {}", values.len(), horizon)));
                return out;
            }
        }
        let mut prev = f64::NEG_INFINITY;
        for a in 0..horizon {
            let v = self.eval(a);
            if !v.is_finite() {
                out.push(Violation::new("cost.aoi", format!("f({a}) is not finite")));
                break;
            }
            if v < 0.0 {
                out.push(Violation::new("cost.aoi", format!("f({a}) is negative")));
                break;
            }
            if v < prev {
                out.push(Violation::new("cost.aoi", format!("f is decreasing between AoI {} and {a}", a - 1)));
                break;
            }
            prev = v;
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CostParams {
    /// Unit cost of a user downloading directly from the cloud.
    pub alpha: f64,
    /// Unit cost of a cache server downloading over its backhaul.
    pub beta: f64,
    pub aoi: AoiCost,
}

impl Default for CostParams {
    fn default() -> Self {
        CostParams { alpha: 11.0, beta: 1.0, aoi: AoiCost::default() }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Request {
    pub content: usize,
    pub origin: usize,
    pub deadline: usize,
    /// Sorted, duplicate-free candidate servers.
    pub candidates: Vec<usize>,
}

impl Request {
    /// Multiple-choice request: served by one of several overlapping cells.
    pub fn is_mcr(&self) -> bool {
        self.candidates.len() >= 2
    }

    /// Slots between origin and deadline.
    pub fn window(&self) -> usize {
        self.deadline - self.origin
    }

    pub fn covers(&self, server: usize) -> bool {
        self.candidates.binary_search(&server).is_ok()
    }
}

/// Which server subsets may appear as candidate sets.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Topology {
    pub edges: Vec<(usize, usize)>,
    pub triples: Vec<[usize; 3]>,
}

impl Topology {
    /// Triangle: every pair adjacent, one triple.
    pub fn three_cell() -> Self {
        Topology { edges: vec![(0, 1), (0, 2), (1, 2)], triples: vec![[0, 1, 2]] }
    }

    /// Hexagonal cluster: server 0 in the middle, 1..=6 around it.
    pub fn seven_cell() -> Self {
        let mut edges = Vec::new();
        for j in 1..=6 {
            edges.push((0, j));
        }
        for j in 1..=6 {
            let next = if j == 6 { 1 } else { j + 1 };
            edges.push((j.min(next), j.max(next)));
        }
        let mut triples = Vec::new();
        for j in 1..=6 {
            let next = if j == 6 { 1 } else { j + 1 };
            let mut t = [0, j, next];
            t.sort_unstable();
            triples.push(t);
        }
        Topology { edges, triples }
    }

    pub fn adjacent(&self, a: usize, b: usize) -> bool {
        let key = (a.min(b), a.max(b));
        self.edges.iter().any(|&(x, y)| (x.min(y), x.max(y)) == key)
    }

    pub fn has_triple(&self, set: &[usize]) -> bool {
        let mut key = [set[0], set[1], set[2]];
        key.sort_unstable();
        self.triples.iter().any(|t| {
            let mut s = *t;
            s.sort_unstable();
            s == key
        })
    }

    /// Whether `set` (sorted) may be the candidate set of one request.
    pub fn admits(&self, set: &[usize]) -> bool {
        match set.len() {
            0 => false,
            1 => true,
            2 => self.adjacent(set[0], set[1]),
            3 => self.has_triple(set),
            _ => set.iter().enumerate().all(|(k, &a)| set[k + 1..].iter().all(|&b| self.adjacent(a, b))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    pub servers: Vec<ServerSpec>,
    pub contents: Vec<ContentSpec>,
    pub requests: Vec<Request>,
    pub horizon: usize,
    pub cost: CostParams,
    pub topology: Topology,
}

impl Instance {
    pub fn num_servers(&self) -> usize {
        self.servers.len()
    }

    pub fn num_contents(&self) -> usize {
        self.contents.len()
    }

    pub fn size(&self, content: usize) -> f64 {
        self.contents[content].size as f64
    }

    pub fn f(&self, aoi: usize) -> f64 {
        self.cost.aoi.eval(aoi)
    }

    /// `f(0) + alpha * s_i`: what a request for `content` costs when the cloud serves it.
    pub fn cloud_cost(&self, content: usize) -> f64 {
        self.f(0) + self.cost.alpha * self.size(content)
    }

    pub fn num_mcrs(&self) -> usize {
        self.requests.iter().filter(|r| r.is_mcr()).count()
    }

    /// Index into per-(server, content) tables.
    pub fn pair(&self, server: usize, content: usize) -> usize {
        server * self.contents.len() + content
    }

    /// TINY-1: one server, one content of size 2, two slots, `C = G = 2`,
    /// `alpha = 11`, `beta = 1`, `f(a) = e^a`, one request spanning both slots.
    pub fn tiny() -> Self {
        Instance {
            servers: vec![ServerSpec { cache_capacity: 2.0, backhaul_capacity: 2.0 }],
            contents: vec![ContentSpec { size: 2 }],
            requests: vec![Request { content: 0, origin: 0, deadline: 1, candidates: vec![0] }],
            horizon: 2,
            cost: CostParams::default(),
            topology: Topology::default(),
        }
    }
}

/// A broken invariant, reported as data.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub field: String,
    pub rule: String,
}

impl Violation {
    pub fn new(field: impl Into<String>, rule: impl Into<String>) -> Self {
        Violation { field: field.into(), rule: rule.into() }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.rule)
    }
}

// negated comparisons so that NaN fields are rejected too
#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub fn validate_instance(inst: &Instance) -> Vec<Violation> {
    let mut out = Vec::new();
    let h_count = inst.servers.len();
    let i_count = inst.contents.len();

    if inst.horizon == 0 {
        out.push(Violation::new("horizon", "must be at least 1"));
    }
    for (h, s) in inst.servers.iter().enumerate() {
        if !(s.cache_capacity > 0.0) {
            out.push(Violation::new(format!("servers[{}].cache_capacity", h + 1), "must be positive"));
        }
        if !(s.backhaul_capacity > 0.0) {
            out.push(Violation::new(format!("servers[{}].backhaul_capacity", h + 1), "must be positive"));
        }
    }
    for (i, c) in inst.contents.iter().enumerate() {
        if c.size < 1 {
            out.push(Violation::new(format!("contents[{}].size", i + 1), "must be at least 1"));
        }
    }
    let cost = &inst.cost;
    if !(cost.beta > 0.0) {
        out.push(Violation::new("cost.beta", "must be positive"));
    }
    if !(cost.alpha > cost.beta) {
        out.push(Violation::new("cost.alpha", "must exceed beta"));
    }
    out.extend(cost.aoi.violations(inst.horizon));

    for &(a, b) in &inst.topology.edges {
        if a >= h_count || b >= h_count || a == b {
            out.push(Violation::new("topology.edges", format!("edge ({}, {}) is not a pair of distinct servers", a + 1, b + 1)));
        }
    }
    for t in &inst.topology.triples {
        let ok = t.iter().all(|&x| x < h_count)
            && t[0] != t[1]
            && t[1] != t[2]
            && t[0] != t[2]
            && inst.topology.adjacent(t[0], t[1])
            && inst.topology.adjacent(t[1], t[2])
            && inst.topology.adjacent(t[0], t[2]);
        if !ok {
            out.push(Violation::new("topology.triples", format!("triple ({}, {}, {}) is not a clique", t[0] + 1, t[1] + 1, t[2] + 1)));
        }
    }

    for (r, req) in inst.requests.iter().enumerate() {
        let field = |name: &str| format!("requests[{}].{}", r + 1, name);
        if req.content >= i_count {
            out.push(Violation::new(field("content"), "unknown content id"));
        }
        if req.origin > req.deadline {
            out.push(Violation::new(field("deadline"), "deadline precedes origin"));
        }
        if req.deadline >= inst.horizon {
            out.push(Violation::new(field("deadline"), "beyond the horizon"));
        }
        if req.candidates.is_empty() {
            out.push(Violation::new(field("candidates"), "empty candidate set"));
            continue;
        }
        if req.candidates.windows(2).any(|w| w[0] >= w[1]) {
            out.push(Violation::new(field("candidates"), "not sorted or has duplicates"));
        }
        if req.candidates.iter().any(|&h| h >= h_count) {
            out.push(Violation::new(field("candidates"), "unknown server id"));
        } else if !inst.topology.admits(&req.candidates) {
            out.push(Violation::new(field("candidates"), "servers do not overlap in the configured topology"));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tiny_is_valid() {
        assert!(validate_instance(&Instance::tiny()).is_empty());
    }

    #[test]
    fn deadline_before_origin_is_reported() {
        let mut inst = Instance::tiny();
        inst.requests[0].origin = 1;
        inst.requests[0].deadline = 0;
        let v = validate_instance(&inst);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].field, "requests[1].deadline");
    }

    #[test]
    fn non_adjacent_candidates_violate_topology() {
        let mut inst = Instance::tiny();
        inst.servers = vec![inst.servers[0].clone(); 3];
        inst.topology = Topology { edges: vec![(0, 1), (1, 2)], triples: vec![] };
        inst.requests[0].candidates = vec![0, 2];
        let v = validate_instance(&inst);
        assert_eq!(v.len(), 1);
        assert!(v[0].rule.contains("topology"));
    }

    #[test]
    fn seven_cell_layout() {
        let topo = Topology::seven_cell();
        assert_eq!(topo.edges.len(), 12);
        assert_eq!(topo.triples.len(), 6);
        assert!(topo.admits(&[0, 1, 2]));
        assert!(topo.admits(&[0, 1, 6]));
        assert!(!topo.admits(&[1, 2, 3]));
        assert!(!topo.admits(&[1, 3]));
    }

    #[test]
    fn table_cost_must_be_monotone() {
        let mut inst = Instance::tiny();
        inst.cost.aoi = AoiCost::Table { values: vec![2.0, 1.0] };
        assert_eq!(validate_instance(&inst).len(), 1);
        inst.cost.aoi = AoiCost::Table { values: vec![1.0] };
        assert_eq!(validate_instance(&inst).len(), 1);
    }
}
