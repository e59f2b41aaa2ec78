//! Columns: the caching/updating decisions of one (server, content) pair over
//! the whole horizon, and the pools of columns the master LP chooses from.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use crate::cost::{aoi_of_states, settle_scr, Settlement};
use crate::error::{McspError, Result};
use crate::instance::{Instance, Request, RequestIndex};

/// Largest horizon `enumerate_columns` accepts.
pub const ENUMERATION_CAP: usize = 12;

/// `(q, p)` of one slot: absent `(0,0)`, updated `(1,1)` or kept `(1,0)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SlotState {
    Absent,
    Update,
    Cached,
}

impl SlotState {
    pub const ALL: [SlotState; 3] = [SlotState::Absent, SlotState::Update, SlotState::Cached];

    pub fn cached(self) -> bool {
        self != SlotState::Absent
    }

    pub fn updated(self) -> bool {
        self == SlotState::Update
    }

    pub fn as_char(self) -> char {
        match self {
            SlotState::Absent => 'A',
            SlotState::Update => 'U',
            SlotState::Cached => 'C',
        }
    }

    pub(crate) fn bit(self) -> u8 {
        match self {
            SlotState::Absent => 1,
            SlotState::Update => 2,
            SlotState::Cached => 4,
        }
    }

    pub fn from_flags(q: u8, p: u8) -> Result<SlotState> {
        match (q, p) {
            (0, 0) => Ok(SlotState::Absent),
            (1, 1) => Ok(SlotState::Update),
            (1, 0) => Ok(SlotState::Cached),
            _ => Err(McspError::MalformedColumn(format!("pattern ({q},{p}) is not a slot state"))),
        }
    }
}

/// A valid state sequence: `Cached` never follows `Absent` or starts the horizon.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Column(Vec<SlotState>);

impl Column {
    pub fn new(states: Vec<SlotState>) -> Result<Column> {
        aoi_of_states(&states)?;
        Ok(Column(states))
    }

    pub fn absent(horizon: usize) -> Column {
        Column(vec![SlotState::Absent; horizon])
    }

    /// Builds from `(q, p)` pairs.
    pub fn from_flags(flags: &[(u8, u8)]) -> Result<Column> {
        let states = flags.iter().map(|&(q, p)| SlotState::from_flags(q, p)).collect::<Result<Vec<_>>>()?;
        Column::new(states)
    }

    pub fn states(&self) -> &[SlotState] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn state(&self, t: usize) -> SlotState {
        self.0[t]
    }

    pub fn q(&self, t: usize) -> bool {
        self.0[t].cached()
    }

    pub fn p(&self, t: usize) -> bool {
        self.0[t].updated()
    }

    pub fn is_absent(&self) -> bool {
        self.0.iter().all(|s| *s == SlotState::Absent)
    }

    pub fn num_updates(&self) -> usize {
        self.0.iter().filter(|s| s.updated()).count()
    }

    pub fn update_slots(&self) -> Vec<usize> {
        (0..self.len()).filter(|&t| self.p(t)).collect()
    }

    pub fn aoi_profile(&self) -> Vec<Option<usize>> {
        let mut out = Vec::with_capacity(self.len());
        let mut prev = None;
        for s in &self.0 {
            prev = match s {
                SlotState::Absent => None,
                SlotState::Update => Some(0),
                SlotState::Cached => prev.map(|a: usize| a + 1),
            };
            out.push(prev);
        }
        out
    }

    pub fn aoi(&self, t: usize) -> Option<usize> {
        self.aoi_profile()[t]
    }
}

impl fmt::Display for Column {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.0 {
            write!(f, "{}", s.as_char())?;
        }
        Ok(())
    }
}

impl FromStr for Column {
    type Err = McspError;

    fn from_str(s: &str) -> Result<Column> {
        let states = s
            .chars()
            .map(|c| match c {
                'A' => Ok(SlotState::Absent),
                'U' => Ok(SlotState::Update),
                'C' => Ok(SlotState::Cached),
                other => Err(McspError::MalformedColumn(format!("unknown state character {other:?}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Column::new(states)
    }
}

pub fn column_aoi(col: &Column, t: usize) -> Option<usize> {
    col.aoi(t)
}

/// Standalone cost `S`: the column's update cost plus the cost of serving the
/// pair's single-choice requests under `rule`.
pub fn column_cost_s(col: &Column, h: usize, i: usize, inst: &Instance, idx: &RequestIndex, rule: Settlement) -> f64 {
    let size = inst.size(i);
    let mut total = inst.cost.beta * size * col.num_updates() as f64;
    let profile = col.aoi_profile();
    for &r in idx.scr(h, i) {
        let req = &inst.requests[r];
        total += match settle_scr(inst, req, &profile, rule) {
            Some((_, a)) => inst.f(a),
            None => inst.cloud_cost(i),
        };
    }
    total
}

/// Coverage coefficient of `col` for multiple-choice request `req` at AoI `a`.
///
/// `a = 0` is covered when the column updates inside the window; `a > 0` when
/// the content is held at the window's first slot with that AoI. These are
/// the smallest AoIs the column can offer the request, which is all an
/// optimal service ever uses.
pub fn coverage_b(col: &Column, req: &Request, a: usize) -> bool {
    if a == 0 {
        (req.origin..=req.deadline).any(|t| col.p(t))
    } else {
        col.aoi(req.origin) == Some(a)
    }
}

/// All valid columns of length `horizon`, in lexicographic state order.
pub fn enumerate_columns(horizon: usize) -> Result<Vec<Column>> {
    if horizon > ENUMERATION_CAP {
        return Err(McspError::TooLarge {
            what: "column enumeration",
            detail: format!("horizon {horizon} exceeds the cap {ENUMERATION_CAP}"),
        });
    }
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(horizon);
    fn rec(cur: &mut Vec<SlotState>, horizon: usize, out: &mut Vec<Column>) {
        if cur.len() == horizon {
            out.push(Column(cur.clone()));
            return;
        }
        let prev_cached = cur.last().is_some_and(|s| s.cached());
        for s in SlotState::ALL {
            if s == SlotState::Cached && !prev_cached {
                continue;
            }
            cur.push(s);
            rec(cur, horizon, out);
            cur.pop();
        }
    }
    rec(&mut cur, horizon, &mut out);
    Ok(out)
}

/// Which slot states each (server, content, slot) may still take.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AllowedStates {
    horizon: usize,
    contents: usize,
    bits: Vec<u8>,
}

impl AllowedStates {
    const ALL_BITS: u8 = 7;

    pub fn all(inst: &Instance) -> Self {
        AllowedStates {
            horizon: inst.horizon,
            contents: inst.num_contents(),
            bits: vec![Self::ALL_BITS; inst.num_servers() * inst.num_contents() * inst.horizon],
        }
    }

    fn at(&self, h: usize, i: usize, t: usize) -> usize {
        (h * self.contents + i) * self.horizon + t
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn allows(&self, h: usize, i: usize, t: usize, s: SlotState) -> bool {
        self.bits[self.at(h, i, t)] & s.bit() != 0
    }

    pub fn forbid(&mut self, h: usize, i: usize, t: usize, s: SlotState) {
        let k = self.at(h, i, t);
        self.bits[k] &= !s.bit();
    }

    /// Restricts slot `t` to exactly `states`.
    pub fn restrict(&mut self, h: usize, i: usize, t: usize, states: &[SlotState]) {
        let keep = states.iter().fold(0u8, |m, s| m | s.bit());
        let k = self.at(h, i, t);
        self.bits[k] &= keep;
    }

    /// Restricts the pair to a single column.
    pub fn pin(&mut self, h: usize, i: usize, col: &Column) {
        for t in 0..self.horizon {
            self.restrict(h, i, t, &[col.state(t)]);
        }
    }

    pub fn allowed(&self, h: usize, i: usize, t: usize) -> Vec<SlotState> {
        SlotState::ALL.into_iter().filter(|&s| self.allows(h, i, t, s)).collect()
    }

    pub fn is_unrestricted(&self, h: usize, i: usize) -> bool {
        (0..self.horizon).all(|t| self.bits[self.at(h, i, t)] == Self::ALL_BITS)
    }

    pub fn admits(&self, h: usize, i: usize, col: &Column) -> bool {
        (0..self.horizon).all(|t| self.allows(h, i, t, col.state(t)))
    }

    /// The admitted column with the fewest cached slots, then fewest updates,
    /// then earliest updates; `None` when no valid column is admitted.
    pub fn min_footprint(&self, h: usize, i: usize) -> Option<Column> {
        // best[s] = (cached, updates, path) over prefixes ending in state s
        type Entry = Option<(usize, usize, Vec<SlotState>)>;
        let mut best: [Entry; 3] = [None, None, None];
        for t in 0..self.horizon {
            let mut next: [Entry; 3] = [None, None, None];
            for (k, s) in SlotState::ALL.into_iter().enumerate() {
                if !self.allows(h, i, t, s) {
                    continue;
                }
                let preds: Vec<&Entry> = if t == 0 {
                    Vec::new()
                } else if s == SlotState::Cached {
                    vec![&best[1], &best[2]]
                } else {
                    best.iter().collect()
                };
                let start: Entry = if t == 0 {
                    (s != SlotState::Cached).then(|| (0, 0, Vec::new()))
                } else {
                    preds.into_iter().flatten().min_by(|a, b| footprint_key(a).cmp(&footprint_key(b))).cloned()
                };
                if let Some((c, u, mut path)) = start {
                    path.push(s);
                    next[k] = Some((c + s.cached() as usize, u + s.updated() as usize, path));
                }
            }
            best = next;
        }
        best.into_iter().flatten().min_by(|a, b| footprint_key(a).cmp(&footprint_key(b))).map(|(_, _, path)| Column(path))
    }
}

fn footprint_key(e: &(usize, usize, Vec<SlotState>)) -> (usize, usize, Vec<usize>) {
    let updates = (0..e.2.len()).filter(|&t| e.2[t].updated()).collect();
    (e.0, e.1, updates)
}

#[derive(Clone, Debug, PartialEq)]
pub struct PoolEntry {
    /// Unique within the pool's lifetime; never reused after removal.
    pub id: usize,
    pub column: Column,
    /// Standalone cost under the pool's settlement rule.
    pub cost: f64,
}

/// Columns generated so far, per (server, content) pair.
#[derive(Clone, Debug)]
pub struct ColumnPool {
    contents: usize,
    horizon: usize,
    rule: Settlement,
    entries: Vec<Vec<PoolEntry>>,
    keys: Vec<HashSet<Column>>,
    next_id: usize,
}

impl ColumnPool {
    /// One all-absent column per pair.
    pub fn initial(inst: &Instance, idx: &RequestIndex, rule: Settlement) -> Self {
        let pairs = inst.num_servers() * inst.num_contents();
        let mut pool = ColumnPool {
            contents: inst.num_contents(),
            horizon: inst.horizon,
            rule,
            entries: vec![Vec::new(); pairs],
            keys: vec![HashSet::new(); pairs],
            next_id: 0,
        };
        for h in 0..inst.num_servers() {
            for i in 0..inst.num_contents() {
                pool.insert(inst, idx, h, i, Column::absent(inst.horizon));
            }
        }
        pool
    }

    pub fn rule(&self) -> Settlement {
        self.rule
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn num_pairs(&self) -> usize {
        self.entries.len()
    }

    pub fn pair_index(&self, h: usize, i: usize) -> usize {
        h * self.contents + i
    }

    pub fn get(&self, h: usize, i: usize) -> &[PoolEntry] {
        &self.entries[self.pair_index(h, i)]
    }

    pub fn by_pair(&self, pair: usize) -> &[PoolEntry] {
        &self.entries[pair]
    }

    pub fn contains(&self, h: usize, i: usize, col: &Column) -> bool {
        self.keys[self.pair_index(h, i)].contains(col)
    }

    pub fn len(&self) -> usize {
        self.entries.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Adds `col` unless already present; returns the new entry's id.
    pub fn insert(&mut self, inst: &Instance, idx: &RequestIndex, h: usize, i: usize, col: Column) -> Option<usize> {
        let p = self.pair_index(h, i);
        if col.len() != self.horizon || self.keys[p].contains(&col) {
            return None;
        }
        let cost = column_cost_s(&col, h, i, inst, idx, self.rule);
        let id = self.next_id;
        self.next_id += 1;
        self.keys[p].insert(col.clone());
        self.entries[p].push(PoolEntry { id, column: col, cost });
        Some(id)
    }

    /// Removes the pair's columns failing `keep`; returns how many went.
    pub fn retain(&mut self, h: usize, i: usize, mut keep: impl FnMut(&Column) -> bool) -> usize {
        let p = self.pair_index(h, i);
        let before = self.entries[p].len();
        let keys = &mut self.keys[p];
        self.entries[p].retain(|e| {
            let k = keep(&e.column);
            if !k {
                keys.remove(&e.column);
            }
            k
        });
        before - self.entries[p].len()
    }
}

/// Drops every column that uses a state `allowed` forbids, then makes sure
/// each pair still holds its minimum-footprint admitted column.
///
/// Fails with `UnfixablePool` when some pair admits no valid column at all.
pub fn purge_incompatible(pool: &mut ColumnPool, allowed: &AllowedStates, inst: &Instance, idx: &RequestIndex) -> Result<usize> {
    let mut removed = 0;
    for h in 0..inst.num_servers() {
        for i in 0..inst.num_contents() {
            if allowed.is_unrestricted(h, i) {
                continue;
            }
            removed += pool.retain(h, i, |c| allowed.admits(h, i, c));
            let Some(floor) = allowed.min_footprint(h, i) else {
                return Err(McspError::UnfixablePool { server: h, content: i });
            };
            pool.insert(inst, idx, h, i, floor);
        }
    }
    Ok(removed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use SlotState::{Absent as A, Cached as C, Update as U};

    fn col(s: &str) -> Column {
        s.parse().unwrap()
    }

    #[test]
    fn flags_and_validation() {
        assert_eq!(Column::from_flags(&[(1, 1), (1, 0)]).unwrap(), col("UC"));
        assert!(Column::from_flags(&[(0, 1)]).is_err());
        assert!(Column::from_flags(&[(1, 0)]).is_err());
        assert!(Column::from_flags(&[(0, 0), (1, 0)]).is_err());
        assert!("UX".parse::<Column>().is_err());
        assert_eq!(col("AUC").to_string(), "AUC");
    }

    #[test]
    fn column_aoi_examples() {
        assert_eq!(column_aoi(&col("UC"), 1), Some(1));
        assert_eq!(column_aoi(&col("AU"), 0), None);
        assert_eq!(column_aoi(&col("UCC"), 2), Some(2));
    }

    #[test]
    fn tiny_column_costs() {
        let inst = Instance::tiny();
        let idx = RequestIndex::new(&inst);
        let s = |c: &str, rule| column_cost_s(&col(c), 0, 0, &inst, &idx, rule);
        assert_eq!(s("AA", Settlement::Paper), 23.0);
        assert_eq!(s("UC", Settlement::Paper), 3.0);
        assert_eq!(s("AU", Settlement::Paper), 3.0);
        assert_eq!(s("UU", Settlement::Paper), 5.0);
        assert_eq!(s("UA", Settlement::Paper), 25.0);
        assert_eq!(s("UA", Settlement::Clamped), 25.0);
        assert_eq!(s("UA", Settlement::Flexible), 3.0);
    }

    #[test]
    fn coverage_examples() {
        let r = Request { content: 0, origin: 0, deadline: 1, candidates: vec![0, 1] };
        assert!(coverage_b(&col("UC"), &r, 0));
        assert!(!coverage_b(&col("UC"), &r, 1));
        assert!(!coverage_b(&col("AA"), &r, 0));
        let later = Request { origin: 1, ..r.clone() };
        assert!(coverage_b(&col("UC"), &later, 1));
        assert!(!coverage_b(&col("UC"), &later, 0));
        assert!(coverage_b(&col("UU"), &later, 0));
    }

    #[test]
    fn enumeration_counts() {
        let counts: Vec<usize> = (1..=6).map(|t| enumerate_columns(t).unwrap().len()).collect();
        assert_eq!(counts, vec![2, 5, 13, 34, 89, 233]);
        assert_eq!(enumerate_columns(1).unwrap(), vec![col("A"), col("U")]);
        assert!(matches!(enumerate_columns(13), Err(McspError::TooLarge { .. })));
    }

    #[test]
    fn enumeration_matches_filtered_product() {
        for t in 1..=6usize {
            let mut expected = HashSet::new();
            for code in 0..3usize.pow(t as u32) {
                let mut c = code;
                let states: Vec<SlotState> = (0..t)
                    .map(|_| {
                        let s = SlotState::ALL[c % 3];
                        c /= 3;
                        s
                    })
                    .collect();
                if let Ok(colm) = Column::new(states) {
                    expected.insert(colm);
                }
            }
            let got: HashSet<Column> = enumerate_columns(t).unwrap().into_iter().collect();
            assert_eq!(got, expected);
        }
    }

    #[test]
    fn pool_rejects_duplicates() {
        let inst = Instance::tiny();
        let idx = RequestIndex::new(&inst);
        let mut pool = ColumnPool::initial(&inst, &idx, Settlement::Paper);
        assert_eq!(pool.len(), 1);
        assert_eq!(pool.get(0, 0)[0].cost, 23.0);
        assert!(pool.insert(&inst, &idx, 0, 0, col("AA")).is_none());
        assert!(pool.insert(&inst, &idx, 0, 0, col("UC")).is_some());
        assert_eq!(pool.len(), 2);
    }

    #[test]
    fn purge_by_fixings_and_capacity() {
        let mut inst = Instance::tiny();
        inst.horizon = 3;
        let idx = RequestIndex::new(&inst);
        let mut pool = ColumnPool::initial(&inst, &idx, Settlement::Paper);
        for c in enumerate_columns(3).unwrap() {
            pool.insert(&inst, &idx, 0, 0, c);
        }
        assert_eq!(pool.len(), 13);

        // update fixed at the first slot
        let mut allowed = AllowedStates::all(&inst);
        allowed.restrict(0, 0, 0, &[U]);
        purge_incompatible(&mut pool, &allowed, &inst, &idx).unwrap();
        assert!(pool.get(0, 0).iter().all(|e| e.column.p(0)));

        // not cached at the second slot
        allowed.restrict(0, 0, 1, &[A]);
        purge_incompatible(&mut pool, &allowed, &inst, &idx).unwrap();
        assert!(pool.get(0, 0).iter().all(|e| !e.column.q(1)));

        // no backhaul left at the third slot
        allowed.forbid(0, 0, 2, U);
        purge_incompatible(&mut pool, &allowed, &inst, &idx).unwrap();
        let left: Vec<String> = pool.get(0, 0).iter().map(|e| e.column.to_string()).collect();
        assert_eq!(left, vec!["UAA"]);
    }

    #[test]
    fn purge_reinserts_floor_and_reports_contradiction() {
        let mut inst = Instance::tiny();
        inst.horizon = 3;
        let idx = RequestIndex::new(&inst);
        let mut pool = ColumnPool::initial(&inst, &idx, Settlement::Paper);
        let mut allowed = AllowedStates::all(&inst);
        // cached at slot 3 without an update there: must be kept from an earlier update
        allowed.restrict(0, 0, 2, &[C]);
        purge_incompatible(&mut pool, &allowed, &inst, &idx).unwrap();
        let left: Vec<String> = pool.get(0, 0).iter().map(|e| e.column.to_string()).collect();
        assert_eq!(left, vec!["AUC"]);

        allowed.forbid(0, 0, 0, U);
        allowed.forbid(0, 0, 1, U);
        assert!(matches!(purge_incompatible(&mut pool, &allowed, &inst, &idx), Err(McspError::UnfixablePool { server: 0, content: 0 })));
    }

    #[test]
    fn min_footprint_prefers_fewer_cached_slots() {
        let inst = Instance { horizon: 4, ..Instance::tiny() };
        let mut allowed = AllowedStates::all(&inst);
        assert_eq!(allowed.min_footprint(0, 0), Some(col("AAAA")));
        allowed.restrict(0, 0, 1, &[U, C]);
        allowed.restrict(0, 0, 3, &[U, C]);
        assert_eq!(allowed.min_footprint(0, 0), Some(col("AUAU")));
        allowed.forbid(0, 0, 3, U);
        assert_eq!(allowed.min_footprint(0, 0), Some(col("AUCC")));
    }
}
