//! Column pricing as a shortest path over a layered DAG.
//!
//! Layer `t` holds the states a column can be in at slot `t`:
//! `Theta(t, xi)` is "absent, last update `xi` slots ago" (`xi = t + 1`
//! means never updated), `Kappa(t, a)` is "cached with AoI `a`".
//! Every source-to-sink path spells exactly one valid column and its length
//! equals the column's reduced cost.

use std::fmt::Write;

use rayon::prelude::*;

use crate::column::{AllowedStates, Column, ColumnPool, SlotState};
use crate::cost::Settlement;
use crate::instance::{Instance, RequestIndex};
use crate::rmp::DualPrices;

/// Columns whose reduced cost is not below `-TOL_PRICE` are not added.
pub const TOL_PRICE: f64 = 1e-6;

const TIE_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Node {
    Source,
    Theta { t: usize, xi: usize },
    Kappa { t: usize, a: usize },
    Sink,
}

impl Node {
    fn state(self) -> Option<SlotState> {
        match self {
            Node::Theta { .. } => Some(SlotState::Absent),
            Node::Kappa { a: 0, .. } => Some(SlotState::Update),
            Node::Kappa { .. } => Some(SlotState::Cached),
            _ => None,
        }
    }

    /// Slot of the most recent update, if any, as seen from this node.
    fn last_update(self) -> Option<usize> {
        match self {
            Node::Theta { t, xi } => (xi <= t).then(|| t - xi),
            Node::Kappa { t, a } => Some(t - a),
            _ => None,
        }
    }

    fn label(self) -> String {
        match self {
            Node::Source => "src".into(),
            Node::Sink => "sink".into(),
            Node::Theta { t, xi } => format!("theta_{t}_{xi}"),
            Node::Kappa { t, a } => format!("kappa_{t}_{a}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Arc {
    pub from: usize,
    pub to: usize,
    pub weight: f64,
}

/// The pricing DAG of one (server, content) pair. Nodes are stored in
/// topological order.
#[derive(Clone, Debug)]
pub struct PricingGraph {
    pub server: usize,
    pub content: usize,
    pub horizon: usize,
    pub nodes: Vec<Node>,
    pub arcs: Vec<Arc>,
    incoming: Vec<Vec<usize>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PricedColumn {
    pub server: usize,
    pub content: usize,
    pub column: Column,
    pub reduced_cost: f64,
}

/// Per-pair dual aggregates feeding the arc weights.
struct Weights {
    /// Single-choice requests due at each slot, as their windows `d - o`.
    due: Vec<Vec<usize>>,
    /// `g0_prefix[t][k] = sum_{tau < k} g0(tau, t)` where `g0(tau, t)` sums
    /// the AoI-0 duals of multiple-choice requests starting at `tau` and due
    /// no earlier than `t`.
    g0_prefix: Vec<Vec<f64>>,
    /// `ga[t][a]`: AoI-`a` duals of multiple-choice requests starting at `t`.
    ga: Vec<Vec<f64>>,
    num_scr: usize,
}

impl Weights {
    fn new(inst: &Instance, idx: &RequestIndex, duals: &DualPrices, h: usize, i: usize) -> Self {
        let tc = inst.horizon;
        let mut due = vec![Vec::new(); tc];
        for &r in idx.scr(h, i) {
            let req = &inst.requests[r];
            due[req.deadline].push(req.deadline - req.origin);
        }
        let mut g0 = vec![vec![0.0; tc]; tc];
        let mut ga = (0..tc).map(|t| vec![0.0; t + 1]).collect::<Vec<_>>();
        for &r in idx.mcr(h, i) {
            let req = &inst.requests[r];
            for t in req.origin..=req.deadline {
                g0[req.origin][t] += duals.pi(inst, r, h, 0);
            }
            for a in 1..=req.origin {
                ga[req.origin][a] += duals.pi(inst, r, h, a);
            }
        }
        let g0_prefix = (0..tc)
            .map(|t| {
                let mut acc = vec![0.0; t + 2];
                for tau in 0..=t {
                    acc[tau + 1] = acc[tau] + g0[tau][t];
                }
                acc
            })
            .collect();
        Weights { due, g0_prefix, ga, num_scr: idx.scr(h, i).len() }
    }
}

fn settle_gain(inst: &Instance, i: usize, a: usize, window: usize, rule: Settlement) -> f64 {
    let cloud = inst.cloud_cost(i);
    let f = inst.f(a.saturating_sub(window));
    match rule {
        Settlement::Paper => f - cloud,
        _ => f.min(cloud) - cloud,
    }
}

/// Builds the pricing DAG of pair `(h, i)`. Nodes whose state `allowed`
/// forbids are left out, together with their arcs.
///
/// `rule` must be `Paper` or `Clamped`; the flexible rule does not
/// decompose over slots.
pub fn build_graph(
    h: usize,
    i: usize,
    duals: &DualPrices,
    inst: &Instance,
    idx: &RequestIndex,
    allowed: &AllowedStates,
    rule: Settlement,
) -> PricingGraph {
    assert!(rule != Settlement::Flexible, "flexible settlement cannot be priced slot by slot");
    let tc = inst.horizon;
    let s = inst.size(i);
    let cost = &inst.cost;
    let w = Weights::new(inst, idx, duals, h, i);

    let mut nodes = vec![Node::Source];
    let mut layer_start = Vec::with_capacity(tc + 1);
    for t in 0..tc {
        layer_start.push(nodes.len());
        if allowed.allows(h, i, t, SlotState::Absent) {
            for xi in 1..=t + 1 {
                nodes.push(Node::Theta { t, xi });
            }
        }
        if allowed.allows(h, i, t, SlotState::Update) {
            nodes.push(Node::Kappa { t, a: 0 });
        }
        if allowed.allows(h, i, t, SlotState::Cached) {
            for a in 1..=t {
                nodes.push(Node::Kappa { t, a });
            }
        }
    }
    layer_start.push(nodes.len());
    nodes.push(Node::Sink);
    let sink = nodes.len() - 1;

    let mut arcs = Vec::new();
    let prev_layer = |t: usize| -> std::ops::Range<usize> {
        if t == 0 {
            0..1
        } else {
            layer_start[t - 1]..layer_start[t]
        }
    };
    for t in 0..tc {
        for to in layer_start[t]..layer_start[t + 1] {
            match nodes[to] {
                Node::Theta { xi, .. } => {
                    for from in prev_layer(t) {
                        let ok = match nodes[from] {
                            Node::Source => xi == 1,
                            Node::Theta { xi: px, .. } => px + 1 == xi,
                            Node::Kappa { a, .. } => a + 1 == xi,
                            Node::Sink => false,
                        };
                        if ok {
                            arcs.push(Arc { from, to, weight: 0.0 });
                        }
                    }
                }
                Node::Kappa { a: 0, .. } => {
                    let base = -(w.due[t].len() as f64) * cost.alpha * s - s * (duals.mu(h, t) + duals.phi(h, t)) + cost.beta * s;
                    let pre = &w.g0_prefix[t];
                    for from in prev_layer(t) {
                        // duals of requests starting after the previous update
                        let k = nodes[from].last_update().map_or(0, |u| u + 1);
                        let weight = base + pre[t + 1] - pre[k];
                        arcs.push(Arc { from, to, weight });
                    }
                }
                Node::Kappa { a, .. } => {
                    let settle: f64 = w.due[t].iter().map(|&win| settle_gain(inst, i, a, win, rule)).sum();
                    let weight = settle + w.ga[t][a] - s * duals.mu(h, t);
                    for from in prev_layer(t) {
                        if nodes[from] == (Node::Kappa { t: t - 1, a: a - 1 }) {
                            arcs.push(Arc { from, to, weight });
                        }
                    }
                }
                _ => unreachable!(),
            }
        }
    }
    let exit = w.num_scr as f64 * inst.cloud_cost(i) - duals.lambda(h, i);
    let last = if tc == 0 { 0..1 } else { layer_start[tc - 1]..layer_start[tc] };
    for from in last {
        arcs.push(Arc { from, to: sink, weight: exit });
    }

    let mut incoming = vec![Vec::new(); nodes.len()];
    for (k, arc) in arcs.iter().enumerate() {
        incoming[arc.to].push(k);
    }
    PricingGraph { server: h, content: i, horizon: tc, nodes, arcs, incoming }
}

#[derive(Clone)]
struct Label {
    value: f64,
    states: Vec<SlotState>,
    updates: usize,
}

impl Label {
    /// Lower value wins; near-ties go to fewer updates, then to the
    /// lexicographically earliest update slots.
    fn better_than(&self, other: &Label) -> bool {
        let scale = 1.0 + self.value.abs().max(other.value.abs());
        if self.value < other.value - TIE_TOL * scale {
            return true;
        }
        if self.value > other.value + TIE_TOL * scale {
            return false;
        }
        if self.updates != other.updates {
            return self.updates < other.updates;
        }
        let slots = |l: &Label| -> Vec<usize> { (0..l.states.len()).filter(|&t| l.states[t].updated()).collect() };
        slots(self) < slots(other)
    }
}

impl PricingGraph {
    /// The shortest source-to-sink path, decoded as a column with its length.
    pub fn shortest_path(&self) -> Option<(Column, f64)> {
        let mut best: Vec<Option<Label>> = vec![None; self.nodes.len()];
        best[0] = Some(Label { value: 0.0, states: Vec::new(), updates: 0 });
        for v in 1..self.nodes.len() {
            let mut cur: Option<Label> = None;
            for &k in &self.incoming[v] {
                let arc = self.arcs[k];
                let Some(prev) = &best[arc.from] else { continue };
                let mut cand = Label { value: prev.value + arc.weight, states: prev.states.clone(), updates: prev.updates };
                if let Some(st) = self.nodes[v].state() {
                    cand.states.push(st);
                    cand.updates += st.updated() as usize;
                }
                if cur.as_ref().is_none_or(|c| cand.better_than(c)) {
                    cur = Some(cand);
                }
            }
            best[v] = cur;
        }
        let label = best.pop().flatten()?;
        let col = Column::new(label.states).expect("every path spells a valid column");
        Some((col, label.value))
    }

    /// Every source-to-sink path with its length. Exponential; meant for
    /// small horizons in tests and verification.
    pub fn enumerate_paths(&self) -> Vec<(Column, f64)> {
        let mut out_arcs = vec![Vec::new(); self.nodes.len()];
        for (k, arc) in self.arcs.iter().enumerate() {
            out_arcs[arc.from].push(k);
        }
        let sink = self.nodes.len() - 1;
        let mut out = Vec::new();
        let mut stack = vec![(0usize, Vec::new(), 0.0)];
        while let Some((v, states, value)) = stack.pop() {
            if v == sink {
                out.push((Column::new(states).expect("valid path"), value));
                continue;
            }
            for &k in &out_arcs[v] {
                let arc = self.arcs[k];
                let mut next = states.clone();
                if let Some(st) = self.nodes[arc.to].state() {
                    next.push(st);
                }
                stack.push((arc.to, next, value + arc.weight));
            }
        }
        out
    }

    /// Graphviz rendering with arc weights as labels.
    pub fn to_dot(&self) -> String {
        let mut out = format!("digraph pricing_{}_{} {{\n  rankdir=LR;\n", self.server + 1, self.content + 1);
        for node in &self.nodes {
            let _ = writeln!(out, "  {};", node.label());
        }
        for arc in &self.arcs {
            let _ = writeln!(out, "  {} -> {} [label=\"{:.4}\"];", self.nodes[arc.from].label(), self.nodes[arc.to].label(), arc.weight);
        }
        out.push_str("}\n");
        out
    }
}

/// Best column of every pair with reduced cost below `-TOL_PRICE` that the
/// pool does not hold yet; at most one per pair, in pair order.
pub fn price_all(pool: &ColumnPool, duals: &DualPrices, inst: &Instance, idx: &RequestIndex, allowed: &AllowedStates) -> Vec<PricedColumn> {
    let contents = inst.num_contents();
    let rule = pool.rule();
    (0..inst.num_servers() * contents)
        .into_par_iter()
        .filter_map(|p| {
            let (h, i) = (p / contents, p % contents);
            let graph = build_graph(h, i, duals, inst, idx, allowed, rule);
            let (column, value) = graph.shortest_path()?;
            (value < -TOL_PRICE && !pool.contains(h, i, &column)).then_some(PricedColumn {
                server: h,
                content: i,
                column,
                reduced_cost: value,
            })
        })
        .collect()
}
