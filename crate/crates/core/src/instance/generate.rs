use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};

use super::{ContentSpec, CostParams, Instance, Request, ServerSpec, Topology};
use crate::error::{McspError, Result};

#[derive(Clone, Debug, PartialEq)]
pub enum CellLayout {
    Three,
    Seven,
    Custom { servers: usize, topology: Topology },
}

impl CellLayout {
    pub fn num_servers(&self) -> usize {
        match self {
            CellLayout::Three => 3,
            CellLayout::Seven => 7,
            CellLayout::Custom { servers, .. } => *servers,
        }
    }

    pub fn topology(&self) -> Topology {
        match self {
            CellLayout::Three => Topology::three_cell(),
            CellLayout::Seven => Topology::seven_cell(),
            CellLayout::Custom { topology, .. } => topology.clone(),
        }
    }

    pub fn label(&self) -> String {
        match self {
            CellLayout::Three => "3".into(),
            CellLayout::Seven => "7".into(),
            CellLayout::Custom { servers, .. } => format!("custom{servers}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorConfig {
    pub cells: CellLayout,
    pub num_contents: usize,
    pub num_requests: usize,
    pub horizon: usize,
    /// Fraction of requests that are multiple-choice.
    pub rho_m: f64,
    /// Ratio of 3-candidate to 2-candidate multiple-choice requests.
    pub rho_tt: f64,
    /// Backhaul capacity as a fraction of the total content size.
    pub rho_b: f64,
    /// Cache capacity as a fraction of the total content size.
    pub cache_scale: f64,
    pub size_range: (u32, u32),
    /// Largest `deadline - origin`.
    pub window_max: usize,
    pub seed: u64,
    pub cost: CostParams,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            cells: CellLayout::Three,
            num_contents: 100,
            num_requests: 500,
            horizon: 12,
            rho_m: 0.4,
            rho_tt: 1.0,
            rho_b: 0.3,
            cache_scale: 0.5,
            size_range: (1, 10),
            window_max: 2,
            seed: 0,
            cost: CostParams::default(),
        }
    }
}

impl GeneratorConfig {
    #[allow(clippy::neg_cmp_op_on_partial_ord)] // NaN must fail these checks
    fn check(&self) -> Result<()> {
        let fail = |msg: &str| Err(McspError::Config(msg.to_string()));
        if !(self.rho_m > 0.0 && self.rho_m < 1.0) {
            return fail("rho_m must lie in (0, 1)");
        }
        if !(self.rho_b > 0.0 && self.rho_b <= 1.0) {
            return fail("rho_b must lie in (0, 1]");
        }
        if !(self.rho_tt >= 0.0) {
            return fail("rho_tt must be non-negative");
        }
        if !(self.cache_scale > 0.0) {
            return fail("cache_scale must be positive");
        }
        if self.size_range.0 < 1 || self.size_range.0 > self.size_range.1 {
            return fail("size_range must satisfy 1 <= lo <= hi");
        }
        if self.horizon == 0 {
            return fail("horizon must be at least 1");
        }
        if self.num_contents == 0 {
            return fail("at least one content is required");
        }
        if self.cells.num_servers() == 0 {
            return fail("at least one cell is required");
        }
        Ok(())
    }

    /// Number of (3-candidate, 2-candidate) multiple-choice requests.
    pub fn mcr_split(&self) -> (usize, usize) {
        let mcr = (self.rho_m * self.num_requests as f64).round() as usize;
        let three = if self.rho_tt.is_infinite() { mcr } else { (mcr as f64 * self.rho_tt / (1.0 + self.rho_tt)).round() as usize };
        (three, mcr - three)
    }
}

pub fn generate_instance(cfg: &GeneratorConfig) -> Result<Instance> {
    cfg.check()?;
    let topology = cfg.cells.topology();
    let h_count = cfg.cells.num_servers();
    let (n_three, n_two) = cfg.mcr_split();
    if n_three > 0 && topology.triples.is_empty() {
        return Err(McspError::Config("3-candidate requests requested but the layout has no overlapping triple".into()));
    }
    if n_two > 0 && topology.edges.is_empty() {
        return Err(McspError::Config("2-candidate requests requested but the layout has no overlapping pair".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let contents: Vec<ContentSpec> =
        (0..cfg.num_contents).map(|_| ContentSpec { size: rng.random_range(cfg.size_range.0..=cfg.size_range.1) }).collect();
    let total_size: f64 = contents.iter().map(|c| c.size as f64).sum();
    let servers = vec![ServerSpec { cache_capacity: cfg.cache_scale * total_size, backhaul_capacity: cfg.rho_b * total_size }; h_count];

    // popularity: content id 1 + Binomial(I - 1, 1/2), so middle ids dominate
    let popularity = Binomial::new((cfg.num_contents - 1) as u64, 0.5).map_err(|e| McspError::Config(e.to_string()))?;
    let n_scr = cfg.num_requests - n_three - n_two;
    let mut kinds: Vec<u8> =
        std::iter::repeat_n(1u8, n_scr).chain(std::iter::repeat_n(2u8, n_two)).chain(std::iter::repeat_n(3u8, n_three)).collect();
    kinds.shuffle(&mut rng);

    let mut requests = Vec::with_capacity(cfg.num_requests);
    for kind in kinds {
        let content = popularity.sample(&mut rng) as usize;
        let origin = rng.random_range(0..cfg.horizon);
        let deadline = (origin + rng.random_range(0..=cfg.window_max)).min(cfg.horizon - 1);
        let mut candidates = match kind {
            1 => vec![rng.random_range(0..h_count)],
            2 => {
                let &(a, b) = topology.edges.choose(&mut rng).expect("edges checked above");
                vec![a, b]
            }
            _ => topology.triples.choose(&mut rng).expect("triples checked above").to_vec(),
        };
        candidates.sort_unstable();
        requests.push(Request { content, origin, deadline, candidates });
    }

    Ok(Instance { servers, contents, requests, horizon: cfg.horizon, cost: cfg.cost.clone(), topology })
}
