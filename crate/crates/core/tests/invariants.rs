use mcsp::bench::{read_results_csv, write_results_csv, ResultRow};
use mcsp::column::{enumerate_columns, AllowedStates, Column, SlotState};
use mcsp::cost::{assign_with, check_feasibility, evaluate, AssignmentPlan, Schedule, Service, Settlement, SettlementMode};
use mcsp::driver::{run_rcga, Algorithm, SolveReport, SolverConfig};
use mcsp::instance::{
    generate_instance, read_instance, validate_instance, write_instance, CellLayout, GeneratorConfig, Instance, RequestIndex,
};
use mcsp::pricing::build_graph;
use mcsp::rmp::reduced_cost;
use mcsp::rounding::{Indicator, RoundingState};
use mcsp::verify::{random_duals, random_tiny_instance, TinyShape};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn tiny(seed: u64, servers: usize, max_horizon: usize) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_tiny_instance(&mut rng, TinyShape { servers, max_contents: 3, max_horizon, max_requests: 10 })
}

fn state_vec() -> impl Strategy<Value = Vec<SlotState>> {
    prop::collection::vec(prop_oneof![Just(SlotState::Absent), Just(SlotState::Update), Just(SlotState::Cached)], 1..9)
}

fn random_schedule(inst: &Instance, rng: &mut impl Rng) -> Schedule {
    let cols = enumerate_columns(inst.horizon).unwrap();
    let mut s = Schedule::empty(inst);
    for h in 0..inst.num_servers() {
        for i in 0..inst.num_contents() {
            s.set(h, i, cols[rng.random_range(0..cols.len())].clone());
        }
    }
    s
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn column_validity_and_aoi(states in state_vec()) {
        let ok = states.iter().enumerate().all(|(t, s)| *s != SlotState::Cached || (t > 0 && states[t - 1] != SlotState::Absent));
        match Column::new(states.clone()) {
            Ok(col) => {
                prop_assert!(ok);
                let aoi = col.aoi_profile();
                for t in 0..states.len() {
                    let expect = match states[t] {
                        SlotState::Absent => None,
                        SlotState::Update => Some(0),
                        SlotState::Cached => Some(aoi[t - 1].unwrap() + 1),
                    };
                    prop_assert_eq!(aoi[t], expect);
                }
                let text = col.to_string();
                prop_assert_eq!(text.parse::<Column>().unwrap(), col);
            }
            Err(_) => prop_assert!(!ok),
        }
    }

    #[test]
    fn enumeration_counts_valid_columns(horizon in 1usize..8) {
        // columns are strings over {A, U, C} with no C right after A or at slot 0
        let mut ends = [1u64, 1, 0]; // ending in A, U, C after the first slot
        for _ in 1..horizon {
            ends = [ends[0] + ends[1] + ends[2], ends[0] + ends[1] + ends[2], ends[1] + ends[2]];
        }
        let cols = enumerate_columns(horizon).unwrap();
        prop_assert_eq!(cols.len() as u64, ends.iter().sum::<u64>());
    }

    #[test]
    fn cost_decomposition_adds_up(seed in any::<u64>(), rule_pick in 0usize..3) {
        let inst = tiny(seed, 2, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let schedule = random_schedule(&inst, &mut rng);
        let rule = [Settlement::Paper, Settlement::Clamped, Settlement::Flexible][rule_pick];
        let plan = assign_with(&schedule, &inst, rule);
        let c = evaluate(&inst, &schedule, &plan);
        prop_assert!((c.total - (c.aoi_cost + c.download_cost + c.update_cost)).abs() <= 1e-9 * c.total.max(1.0));
        let cloud = AssignmentPlan { services: vec![Service::Cloud; inst.requests.len()] };
        let cc = evaluate(&inst, &Schedule::empty(&inst), &cloud);
        let expect: f64 = inst.requests.iter().map(|r| inst.f(0) + inst.cost.alpha * inst.size(r.content)).sum();
        prop_assert!((cc.total - expect).abs() <= 1e-9 * expect.max(1.0));
        // flexible settlement never costs more than deadline settlement
        let flex = evaluate(&inst, &schedule, &assign_with(&schedule, &inst, Settlement::Flexible));
        let paper = evaluate(&inst, &schedule, &assign_with(&schedule, &inst, Settlement::Paper));
        prop_assert!(flex.total <= paper.total + 1e-9);
    }

    #[test]
    fn shortest_path_is_minimal(seed in any::<u64>()) {
        let inst = tiny(seed, 2, 4);
        let idx = RequestIndex::new(&inst);
        let mut rng = ChaCha8Rng::seed_from_u64(seed.rotate_left(7));
        let duals = random_duals(&mut rng, &inst);
        let allowed = AllowedStates::all(&inst);
        let cols = enumerate_columns(inst.horizon).unwrap();
        for h in 0..inst.num_servers() {
            for i in 0..inst.num_contents() {
                for rule in [Settlement::Paper, Settlement::Clamped] {
                    let (col, v) = build_graph(h, i, &duals, &inst, &idx, &allowed, rule).shortest_path().unwrap();
                    let rc = reduced_cost(&col, h, i, &duals, &inst, &idx, rule);
                    prop_assert!((rc - v).abs() <= 1e-6 * (1.0 + rc.abs()));
                    for c in &cols {
                        prop_assert!(reduced_cost(c, h, i, &duals, &inst, &idx, rule) >= v - 1e-6 * (1.0 + v.abs()));
                    }
                }
            }
        }
    }

    #[test]
    fn fixings_respect_implications(seed in any::<u64>(), ops in prop::collection::vec((0usize..2, 0usize..3, 0usize..5, any::<bool>(), any::<bool>()), 1..30)) {
        let inst = tiny(seed, 2, 5);
        let mut state = RoundingState::new(&inst);
        for (h, i, t, omega, value) in ops {
            let (i, t) = (i % inst.num_contents(), t % inst.horizon);
            let which = if omega { Indicator::Omega } else { Indicator::Gamma };
            state.try_fix(h % inst.num_servers(), i, t, which, value);
        }
        for h in 0..inst.num_servers() {
            for t in 0..inst.horizon {
                prop_assert!(state.remaining_cache(h, t) >= -1e-9);
                prop_assert!(state.remaining_backhaul(h, t) >= -1e-9);
                for i in 0..inst.num_contents() {
                    if state.fixed(h, i, t, Indicator::Omega) == Some(true) {
                        prop_assert_eq!(state.fixed(h, i, t, Indicator::Gamma), Some(true));
                    }
                    if state.fixed(h, i, t, Indicator::Gamma) == Some(false) {
                        prop_assert_eq!(state.fixed(h, i, t, Indicator::Omega), Some(false));
                    }
                }
            }
        }
        // every mask still admits some column per pair
        let allowed = state.allowed(&inst);
        for h in 0..inst.num_servers() {
            for i in 0..inst.num_contents() {
                prop_assert!(allowed.min_footprint(h, i).is_some());
            }
        }
    }

    #[test]
    fn instance_json_round_trips(seed in any::<u64>()) {
        let inst = tiny(seed, 2, 6);
        prop_assert!(validate_instance(&inst).is_empty());
        let back = read_instance(&write_instance(&inst)).unwrap();
        prop_assert_eq!(back, inst);
    }

    #[test]
    fn csv_round_trips_to_12_digits(vals in prop::collection::vec((any::<u64>(), 1e-6f64..1e7, 0.0f64..1.0, any::<bool>()), 0..6)) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        let rows: Vec<ResultRow> = vals
            .iter()
            .map(|&(seed, total, frac, ok)| {
                let mut report = SolveReport::new(Algorithm::Rcga, SettlementMode::Paper);
                report.success = ok;
                report.cost.total = total;
                report.cost.aoi_cost = total * frac;
                report.cost.update_cost = total - total * frac;
                report.lower_bound = Some(total * (1.0 - frac / 10.0));
                report.gap = Some(frac / 10.0);
                report.wall_time_s = frac * 3.0;
                let g = GeneratorConfig { seed, rho_b: 0.1 + frac / 2.0, ..GeneratorConfig::default() };
                ResultRow::new(&g, &report)
            })
            .collect();
        write_results_csv(&path, &rows).unwrap();
        let back = read_results_csv(&path).unwrap();
        prop_assert_eq!(back.len(), rows.len());
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1e-300);
        for (a, b) in rows.iter().zip(&back) {
            prop_assert_eq!(a.seed, b.seed);
            prop_assert_eq!(a.total.is_some(), b.total.is_some());
            if let (Some(x), Some(y)) = (a.total, b.total) {
                prop_assert!(close(x, y));
            }
            if let (Some(x), Some(y)) = (a.aoi_cost, b.aoi_cost) {
                prop_assert!(close(x, y));
            }
            prop_assert!(close(a.rho_b, b.rho_b));
            prop_assert!(close(a.wall_time_s, b.wall_time_s) || a.wall_time_s == b.wall_time_s);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn rcga_is_feasible_and_above_its_bound(seed in any::<u64>()) {
        let inst = tiny(seed, 2, 4);
        let r = run_rcga(&inst, &SolverConfig::default()).unwrap();
        let lb = r.lower_bound.unwrap();
        prop_assert_eq!(r.integrality_mismatches, 0);
        prop_assert!(r.min_reduced_cost.unwrap() >= -1e-6);
        if r.success {
            let s = r.schedule.as_ref().unwrap();
            prop_assert!(check_feasibility(s, &inst).is_empty());
            let paper = r.paper_cost.unwrap().total;
            prop_assert!(paper >= lb - 1e-6 * (1.0 + lb.abs()));
            prop_assert!(r.cost.total <= paper + 1e-9 * paper.max(1.0));
        }
    }

    #[test]
    fn generator_honours_its_configuration(seed in any::<u64>(), seven in any::<bool>(), requests in 0usize..300) {
        let cfg = GeneratorConfig {
            cells: if seven { CellLayout::Seven } else { CellLayout::Three },
            num_contents: 30,
            num_requests: requests,
            seed,
            ..GeneratorConfig::default()
        };
        let inst = generate_instance(&cfg).unwrap();
        prop_assert_eq!(&generate_instance(&cfg).unwrap(), &inst);
        prop_assert!(validate_instance(&inst).is_empty());
        let (three, two) = cfg.mcr_split();
        prop_assert_eq!(inst.requests.iter().filter(|r| r.candidates.len() == 3).count(), three);
        prop_assert_eq!(inst.requests.iter().filter(|r| r.candidates.len() == 2).count(), two);
        let total: f64 = inst.contents.iter().map(|c| c.size as f64).sum();
        for s in &inst.servers {
            prop_assert!((s.cache_capacity - cfg.cache_scale * total).abs() < 1e-9);
            prop_assert!((s.backhaul_capacity - cfg.rho_b * total).abs() < 1e-9);
        }
        for r in &inst.requests {
            prop_assert!(r.deadline - r.origin <= cfg.window_max && r.deadline < cfg.horizon);
            prop_assert!(inst.topology.admits(&r.candidates));
        }
    }
}
