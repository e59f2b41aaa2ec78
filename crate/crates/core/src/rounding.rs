//! Rounding of the fractional master solution through the per-slot
//! indicators `Gamma(h, i, t)` (content cached) and `Omega(h, i, t)`
//! (content updated).
//!
//! Each call to [`RoundingState::round_once`] fixes indicators that are
//! already integral, then one fractional indicator per server. Fixings and
//! the capacity they consume become slot masks for pricing and pool purging.

use crate::column::{AllowedStates, ColumnPool, SlotState};
use crate::error::{McspError, Result};
use crate::instance::Instance;

/// Indicator values within this distance of 0 or 1 count as integral.
pub const TOL_INT: f64 = 1e-6;

const CAP_EPS: f64 = 1e-9;

const A: u8 = 1;
const U: u8 = 2;
const C: u8 = 4;

/// `gamma[(h * I + i) * T + t]`, likewise `omega`.
#[derive(Clone, Debug, PartialEq)]
pub struct Indicators {
    pub gamma: Vec<f64>,
    pub omega: Vec<f64>,
}

pub fn compute_indicators(pool: &ColumnPool, chi: &[Vec<f64>]) -> Indicators {
    let tc = pool.horizon();
    let mut gamma = vec![0.0; pool.num_pairs() * tc];
    let mut omega = vec![0.0; pool.num_pairs() * tc];
    for p in 0..pool.num_pairs() {
        for (e, &w) in pool.by_pair(p).iter().zip(&chi[p]) {
            for t in 0..tc {
                if e.column.q(t) {
                    gamma[p * tc + t] += w;
                }
                if e.column.p(t) {
                    omega[p * tc + t] += w;
                }
            }
        }
    }
    Indicators { gamma, omega }
}

fn near_integral(v: f64) -> bool {
    v <= TOL_INT || v >= 1.0 - TOL_INT
}

pub fn is_integral(ind: &Indicators) -> bool {
    ind.gamma.iter().chain(&ind.omega).all(|&v| near_integral(v))
}

pub fn chi_integral(chi: &[Vec<f64>]) -> bool {
    chi.iter().flatten().all(|&v| near_integral(v))
}

/// Checks, pair by pair, that the indicators are integral exactly when the
/// pair's column weights are.
pub fn chi_integral_iff(pool: &ColumnPool, chi: &[Vec<f64>]) -> bool {
    let ind = compute_indicators(pool, chi);
    let tc = pool.horizon();
    (0..pool.num_pairs()).all(|p| {
        let by_ind = (p * tc..(p + 1) * tc).all(|k| near_integral(ind.gamma[k]) && near_integral(ind.omega[k]));
        by_ind == chi[p].iter().all(|&v| near_integral(v))
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Indicator {
    Gamma,
    Omega,
}

/// Fixings and remaining capacities of one server.
#[derive(Clone, Debug)]
struct ServerFixings {
    gamma: Vec<Option<bool>>,
    omega: Vec<Option<bool>>,
    rem_cache: Vec<f64>,
    rem_backhaul: Vec<f64>,
}

/// Fixed indicators and what they leave of each capacity.
#[derive(Clone, Debug)]
pub struct RoundingState {
    horizon: usize,
    sizes: Vec<f64>,
    servers: Vec<ServerFixings>,
}

/// What one rounding cycle did.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RoundStep {
    /// Indicators fixed because they were already integral.
    pub integral_fixed: usize,
    /// `(server, content, slot, indicator, value)` picked among fractional ones.
    pub picks: Vec<(usize, usize, usize, Indicator, bool)>,
}

impl RoundingState {
    pub fn new(inst: &Instance) -> Self {
        let tc = inst.horizon;
        let cells = inst.num_contents() * tc;
        RoundingState {
            horizon: tc,
            sizes: (0..inst.num_contents()).map(|i| inst.size(i)).collect(),
            servers: inst
                .servers
                .iter()
                .map(|s| ServerFixings {
                    gamma: vec![None; cells],
                    omega: vec![None; cells],
                    rem_cache: vec![s.cache_capacity; tc],
                    rem_backhaul: vec![s.backhaul_capacity; tc],
                })
                .collect(),
        }
    }

    fn at(&self, i: usize, t: usize) -> usize {
        i * self.horizon + t
    }

    pub fn fixed(&self, h: usize, i: usize, t: usize, which: Indicator) -> Option<bool> {
        let k = self.at(i, t);
        match which {
            Indicator::Gamma => self.servers[h].gamma[k],
            Indicator::Omega => self.servers[h].omega[k],
        }
    }

    pub fn remaining_cache(&self, h: usize, t: usize) -> f64 {
        self.servers[h].rem_cache[t]
    }

    pub fn remaining_backhaul(&self, h: usize, t: usize) -> f64 {
        self.servers[h].rem_backhaul[t]
    }

    pub fn num_fixed(&self) -> usize {
        self.servers.iter().map(|s| s.gamma.iter().chain(&s.omega).filter(|v| v.is_some()).count()).sum()
    }

    /// Slot masks implied by the fixings and remaining capacities.
    pub fn allowed(&self, inst: &Instance) -> AllowedStates {
        let mut allowed = AllowedStates::all(inst);
        for (h, sf) in self.servers.iter().enumerate() {
            for i in 0..self.sizes.len() {
                for t in 0..self.horizon {
                    let bits = mask(sf, self.sizes[i], self.at(i, t), t);
                    let states: Vec<SlotState> = SlotState::ALL.into_iter().filter(|s| bits & s.bit() != 0).collect();
                    allowed.restrict(h, i, t, &states);
                }
            }
        }
        allowed
    }

    /// Fixes `which(h, i, t) = value` with its implications, unless that
    /// overdraws a capacity or leaves some pair of server `h` without a
    /// valid column. Returns whether the fixing was applied.
    pub fn try_fix(&mut self, h: usize, i: usize, t: usize, which: Indicator, value: bool) -> bool {
        let mut trial = self.servers[h].clone();
        let ok = set(&mut trial, &self.sizes, self.horizon, i, t, which, value)
            && propagate(&mut trial, &self.sizes, self.horizon, i)
            && (0..self.sizes.len()).all(|j| supportable(&trial, self.sizes[j], self.horizon, j));
        if ok {
            self.servers[h] = trial;
        }
        ok
    }

    fn fix_or_flip(&mut self, h: usize, i: usize, t: usize, which: Indicator, prefer: bool) -> Result<bool> {
        if self.try_fix(h, i, t, which, prefer) {
            return Ok(prefer);
        }
        if self.try_fix(h, i, t, which, !prefer) {
            return Ok(!prefer);
        }
        Err(McspError::UnfixablePool { server: h, content: i })
    }

    /// One rounding cycle over all servers.
    pub fn round_once(&mut self, ind: &Indicators) -> Result<RoundStep> {
        let mut step = RoundStep::default();
        let tc = self.horizon;
        let ni = self.sizes.len();
        for h in 0..self.servers.len() {
            let base = h * ni * tc;
            // already-integral indicators
            for i in 0..ni {
                for t in 0..tc {
                    let k = base + i * tc + t;
                    if ind.omega[k] >= 1.0 - TOL_INT && self.fixed(h, i, t, Indicator::Omega).is_none() {
                        step.integral_fixed += self.try_fix(h, i, t, Indicator::Omega, true) as usize;
                    }
                    if ind.gamma[k] <= TOL_INT && self.fixed(h, i, t, Indicator::Gamma).is_none() {
                        step.integral_fixed += self.try_fix(h, i, t, Indicator::Gamma, false) as usize;
                    }
                }
            }

            let frac = |v: &[f64], which: Indicator, me: &Self| -> Option<(usize, usize)> {
                let mut best: Option<(f64, usize, usize)> = None;
                for i in 0..ni {
                    for t in 0..tc {
                        let x = v[base + i * tc + t];
                        if near_integral(x) || me.fixed(h, i, t, which).is_some() {
                            continue;
                        }
                        let dist = x.min(1.0 - x);
                        if best.is_none_or(|(d, _, _)| dist < d) {
                            best = Some((dist, i, t));
                        }
                    }
                }
                best.map(|(_, i, t)| (i, t))
            };

            if let Some((i, t)) = frac(&ind.omega, Indicator::Omega, self) {
                let x = ind.omega[base + i * tc + t];
                let s = self.sizes[i];
                let sf = &self.servers[h];
                let no_room = s > sf.rem_backhaul[t] + CAP_EPS || (sf.gamma[self.at(i, t)] != Some(true) && s > sf.rem_cache[t] + CAP_EPS);
                let prefer = !(x < 0.5 || no_room);
                let v = self.fix_or_flip(h, i, t, Indicator::Omega, prefer)?;
                step.picks.push((h, i, t, Indicator::Omega, v));
                continue;
            }

            for i in 0..ni {
                for t in 0..tc {
                    if ind.gamma[base + i * tc + t] >= 1.0 - TOL_INT && self.fixed(h, i, t, Indicator::Gamma).is_none() {
                        step.integral_fixed += self.try_fix(h, i, t, Indicator::Gamma, true) as usize;
                    }
                }
            }
            if let Some((i, t)) = frac(&ind.gamma, Indicator::Gamma, self) {
                let x = ind.gamma[base + i * tc + t];
                let prefer = !(x < 0.5 || self.sizes[i] > self.servers[h].rem_cache[t] + CAP_EPS);
                let v = self.fix_or_flip(h, i, t, Indicator::Gamma, prefer)?;
                step.picks.push((h, i, t, Indicator::Gamma, v));
            }
        }
        Ok(step)
    }
}

fn mask(sf: &ServerFixings, size: f64, k: usize, t: usize) -> u8 {
    let mut bits = A | U | C;
    match sf.gamma[k] {
        Some(true) => bits &= !A,
        Some(false) => bits &= A,
        None => {
            if size > sf.rem_cache[t] + CAP_EPS {
                bits &= A;
            }
        }
    }
    match sf.omega[k] {
        Some(true) => bits &= U,
        Some(false) => bits &= !U,
        None => {
            if size > sf.rem_backhaul[t] + CAP_EPS {
                bits &= !U;
            }
        }
    }
    bits
}

fn set(sf: &mut ServerFixings, sizes: &[f64], tc: usize, i: usize, t: usize, which: Indicator, value: bool) -> bool {
    let k = i * tc + t;
    let s = sizes[i];
    match which {
        Indicator::Gamma => match sf.gamma[k] {
            Some(v) => v == value,
            None => {
                sf.gamma[k] = Some(value);
                if value {
                    sf.rem_cache[t] -= s;
                    sf.rem_cache[t] >= -CAP_EPS
                } else {
                    set(sf, sizes, tc, i, t, Indicator::Omega, false)
                }
            }
        },
        Indicator::Omega => match sf.omega[k] {
            Some(v) => v == value,
            None => {
                sf.omega[k] = Some(value);
                if value {
                    sf.rem_backhaul[t] -= s;
                    sf.rem_backhaul[t] >= -CAP_EPS && set(sf, sizes, tc, i, t, Indicator::Gamma, true)
                } else {
                    true
                }
            }
        },
    }
}

/// A slot that can only be `Cached` needs the content cached one slot earlier.
fn propagate(sf: &mut ServerFixings, sizes: &[f64], tc: usize, i: usize) -> bool {
    loop {
        let mut changed = false;
        for t in (0..tc).rev() {
            let bits = mask(sf, sizes[i], i * tc + t, t);
            if bits == 0 {
                return false;
            }
            if bits == C {
                if t == 0 {
                    return false;
                }
                if sf.gamma[i * tc + t - 1].is_none() {
                    if !set(sf, sizes, tc, i, t - 1, Indicator::Gamma, true) {
                        return false;
                    }
                    changed = true;
                } else if sf.gamma[i * tc + t - 1] == Some(false) {
                    return false;
                }
            }
        }
        if !changed {
            return true;
        }
    }
}

/// Whether some valid column fits the pair's masks.
fn supportable(sf: &ServerFixings, size: f64, tc: usize, i: usize) -> bool {
    // some admitted prefix exists / some admitted prefix ends holding the content
    let (mut any, mut holds) = (true, false);
    for t in 0..tc {
        let bits = mask(sf, size, i * tc + t, t);
        let update = any && bits & U != 0;
        let cache = holds && bits & C != 0;
        any = (any && bits & A != 0) || update || cache;
        holds = update || cache;
    }
    any
}
