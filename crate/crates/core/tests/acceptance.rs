//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any fails.
//!
//! Runs without the libtest harness so the lines are always printed.

use std::collections::HashSet;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use mcsp::baselines::{exact_optimum, run_pba, ExactCaps};
use mcsp::column::{enumerate_columns, AllowedStates};
use mcsp::cost::{Service, Settlement, SettlementMode};
use mcsp::driver::{run_lb, run_nrs, run_rcga, SolveReport, SolverConfig};
use mcsp::instance::{generate_instance, save_instance, CellLayout, GeneratorConfig, Instance, RequestIndex};
use mcsp::pricing::build_graph;
use mcsp::rmp::reduced_cost;
use mcsp::verify::{random_duals, random_tiny_instance, verify_pricing_oracle, verify_sandwich, TinyShape};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

struct Outcome {
    id: usize,
    name: &'static str,
    pass: bool,
    detail: String,
}

/// Every solver run made by the suite, for the cross-cutting criteria.
#[derive(Default)]
struct Ledger {
    runs: Vec<(Instance, SolveReport)>,
}

impl Ledger {
    fn keep(&mut self, inst: &Instance, report: &SolveReport) {
        self.runs.push((inst.clone(), report.clone()));
    }
}

fn desk(cells: CellLayout, seed: u64, rho_b: f64) -> GeneratorConfig {
    let (contents, requests) = match cells {
        CellLayout::Three => (100, 500),
        _ => (200, 2000),
    };
    GeneratorConfig {
        cells,
        num_contents: contents,
        num_requests: requests,
        horizon: 12,
        rho_m: 0.4,
        rho_tt: 1.0,
        rho_b,
        seed,
        ..GeneratorConfig::default()
    }
}

/// Cost and capacity recomputation straight from the schedule, the
/// assignment and the instance data. Returns (aoi, download, update) and
/// a list of problems.
fn recompute(inst: &Instance, report: &SolveReport) -> ((f64, f64, f64), Vec<String>) {
    let mut problems = Vec::new();
    let (Some(schedule), Some(plan)) = (&report.schedule, &report.assignment) else {
        return ((0.0, 0.0, 0.0), vec!["report has no schedule or assignment".into()]);
    };
    let t_count = inst.horizon;
    let mut update = 0.0;
    for (h, server) in inst.servers.iter().enumerate() {
        let mut cached = vec![0.0; t_count];
        let mut updated = vec![0.0; t_count];
        for i in 0..inst.num_contents() {
            let s = inst.contents[i].size as f64;
            let col = schedule.column(h, i);
            if col.len() != t_count {
                problems.push(format!("server {h} content {i}: column length {}", col.len()));
                continue;
            }
            for t in 0..t_count {
                let st = col.state(t);
                if st.cached() {
                    cached[t] += s;
                }
                if st.updated() {
                    updated[t] += s;
                    update += inst.cost.beta * s;
                }
                if st.cached() && !st.updated() && (t == 0 || !col.state(t - 1).cached()) {
                    problems.push(format!("server {h} content {i} slot {t}: kept without being held"));
                }
            }
        }
        for t in 0..t_count {
            if cached[t] > server.cache_capacity + 1e-9 * server.cache_capacity.max(1.0) {
                problems.push(format!("server {h} slot {t}: cache {} > {}", cached[t], server.cache_capacity));
            }
            if updated[t] > server.backhaul_capacity + 1e-9 * server.backhaul_capacity.max(1.0) {
                problems.push(format!("server {h} slot {t}: backhaul {} > {}", updated[t], server.backhaul_capacity));
            }
        }
    }
    let mut aoi = 0.0;
    let mut download = 0.0;
    if plan.services.len() != inst.requests.len() {
        problems.push("assignment length differs from request count".into());
    }
    for (r, (req, svc)) in inst.requests.iter().zip(&plan.services).enumerate() {
        match *svc {
            Service::Cloud => {
                // a cloud download is fresh: AoI 0 plus the download itself
                aoi += inst.f(0);
                download += inst.cost.alpha * inst.contents[req.content].size as f64;
            }
            Service::Cache { server, slot, aoi: a } => {
                if !req.candidates.contains(&server) || slot < req.origin || slot > req.deadline {
                    problems.push(format!("request {r}: served outside its candidates or window"));
                }
                // age at `slot`: slots since the most recent update, if held throughout
                let col = schedule.column(server, req.content);
                let mut age = None;
                for t in (0..=slot).rev() {
                    let st = col.state(t);
                    if !st.cached() {
                        break;
                    }
                    if st.updated() {
                        age = Some(slot - t);
                        break;
                    }
                }
                if age != Some(a) {
                    problems.push(format!("request {r}: claimed AoI {a}, schedule gives {age:?}"));
                }
                aoi += inst.f(a);
            }
        }
    }
    ((aoi, download, update), problems)
}

fn rel_close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let r = verify_pricing_oracle(200, 6, 20_241, None).expect("oracle runs");
    let secs = start.elapsed().as_secs_f64();
    Outcome {
        id: 1,
        name: "pricing graph equals brute-force minimum reduced cost",
        pass: r.passed() && r.trials == 200 && secs < 30.0,
        detail: format!(
            "{} trials, {} comparisons, {} mismatches, max |diff| {:.2e}, {:.2}s",
            r.trials,
            r.comparisons,
            r.mismatches.len(),
            r.max_abs_diff,
            secs
        ),
    }
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut checked = 0;
    let mut problems = Vec::new();
    for horizon in 1..=5 {
        let valid: HashSet<String> = enumerate_columns(horizon).unwrap().iter().map(|c| c.to_string()).collect();
        for _ in 0..6 {
            let mut inst = random_tiny_instance(&mut rng, TinyShape { servers: 2, max_contents: 2, max_horizon: horizon, max_requests: 8 });
            inst.horizon = horizon;
            for req in &mut inst.requests {
                req.deadline = req.deadline.min(horizon - 1);
                req.origin = req.origin.min(req.deadline);
            }
            let idx = RequestIndex::new(&inst);
            let duals = random_duals(&mut rng, &inst);
            let allowed = AllowedStates::all(&inst);
            for h in 0..inst.num_servers() {
                for i in 0..inst.num_contents() {
                    for rule in [Settlement::Paper, Settlement::Clamped] {
                        let g = build_graph(h, i, &duals, &inst, &idx, &allowed, rule);
                        let paths = g.enumerate_paths();
                        let decoded: HashSet<String> = paths.iter().map(|(c, _)| c.to_string()).collect();
                        if paths.len() != valid.len() || decoded != valid {
                            problems.push(format!("T={horizon}: {} paths for {} columns", paths.len(), valid.len()));
                        }
                        for (col, len) in &paths {
                            let rc = reduced_cost(col, h, i, &duals, &inst, &idx, rule);
                            if (rc - len).abs() > 1e-6 * (1.0 + rc.abs()) {
                                problems.push(format!("T={horizon} {col}: path {len} vs reduced cost {rc}"));
                            }
                        }
                        checked += 1;
                    }
                }
            }
        }
    }
    Outcome {
        id: 2,
        name: "path/column bijection with equal lengths for T <= 5",
        pass: problems.is_empty() && checked > 0,
        detail: format!("{checked} graphs, {} problems{}", problems.len(), first(&problems)),
    }
}

fn first(problems: &[String]) -> String {
    problems.first().map(|p| format!(" (first: {p})")).unwrap_or_default()
}

fn criterion_3(ledger: &mut Ledger) -> (Outcome, usize) {
    let r = verify_sandwich(100, 4_242, None).expect("sandwich runs");
    let tiny = Instance::tiny();
    let paper = SolverConfig::with_mode(SettlementMode::Paper);
    let lb = run_lb(&tiny, &paper).unwrap();
    let rcga = run_rcga(&tiny, &paper).unwrap();
    ledger.keep(&tiny, &rcga);
    let (exact, _) = exact_optimum(&tiny, SettlementMode::Paper, ExactCaps::default()).unwrap();
    let tiny_ok = lb.lower_bound == Some(3.0) && exact == 3.0 && rcga.success && rcga.cost.total == 3.0;
    (
        Outcome {
            id: 3,
            name: "LB <= exact <= RCGA on tiny instances; TINY-1 all equal 3",
            pass: r.passed() && r.cases.len() == 100 && tiny_ok,
            detail: format!(
                "{} instances, {} violations, max gap to exact {:.3}; TINY-1 lb {:?} exact {exact} rcga {}{}",
                r.cases.len(),
                r.violations.len(),
                r.max_gap_to_exact,
                lb.lower_bound,
                rcga.cost.total,
                first(&r.violations)
            ),
        },
        r.integrality_mismatches,
    )
}

struct Batches {
    three: Vec<(Instance, SolveReport)>,
    seven: Vec<(Instance, SolveReport)>,
    seven_nrs: Vec<SolveReport>,
}

fn run_batches(ledger: &mut Ledger, seeds: u64) -> Batches {
    let cfg = SolverConfig::default();
    let mut b = Batches { three: Vec::new(), seven: Vec::new(), seven_nrs: Vec::new() };
    for seed in 0..seeds {
        let inst = generate_instance(&desk(CellLayout::Three, seed, 0.3)).unwrap();
        let r = run_rcga(&inst, &cfg).unwrap();
        ledger.keep(&inst, &r);
        b.three.push((inst, r));
    }
    for seed in 0..seeds {
        let inst = generate_instance(&desk(CellLayout::Seven, seed, 0.3)).unwrap();
        let r = run_rcga(&inst, &cfg).unwrap();
        ledger.keep(&inst, &r);
        let n = run_nrs(&inst, &cfg).unwrap();
        ledger.keep(&inst, &n);
        b.seven_nrs.push(n);
        b.seven.push((inst, r));
    }
    b
}

fn criterion_5(b: &Batches) -> Outcome {
    let mut ok = 0;
    let mut problems = Vec::new();
    for (inst, r) in b.three.iter().chain(&b.seven) {
        let (_, p) = recompute(inst, r);
        if r.success && p.is_empty() {
            ok += 1;
        } else {
            problems.push(r.failure.clone().unwrap_or_else(|| p.join("; ")));
        }
    }
    let total = b.three.len() + b.seven.len();
    let nrs_ok = b.seven_nrs.iter().filter(|r| r.success).count();
    let nrs_rate = nrs_ok as f64 / b.seven_nrs.len() as f64;
    Outcome {
        id: 5,
        name: "RCGA feasible on every desk instance; NRS success <= 90% on the 7-cell batch",
        pass: ok == total && nrs_rate <= 0.9,
        detail: format!(
            "RCGA {ok}/{total} feasible; NRS {nrs_ok}/{} on 7-cell ({:.0}%){}",
            b.seven_nrs.len(),
            100.0 * nrs_rate,
            first(&problems)
        ),
    }
}

fn criterion_6(b: &Batches) -> Outcome {
    let gaps: Vec<f64> = b.three.iter().take(20).map(|(_, r)| r.gap.unwrap_or(f64::INFINITY)).collect();
    let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
    let max = gaps.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Outcome {
        id: 6,
        name: "3-cell gap to LB: mean <= 2.5%, max <= 6%",
        pass: gaps.len() == 20 && mean <= 0.025 && max <= 0.06,
        detail: format!("{} instances, mean {:.4}%, max {:.4}%", gaps.len(), 100.0 * mean, 100.0 * max),
    }
}

fn criterion_7(b: &Batches, ledger: &mut Ledger) -> Outcome {
    let mut wins = 0;
    let mut n = 0;
    for (inst, r) in b.three.iter().take(20).chain(b.seven.iter().take(20)) {
        let pba = run_pba(inst);
        ledger.keep(inst, &pba);
        n += 1;
        if r.success && r.cost.total <= pba.cost.total + 1e-9 * pba.cost.total.abs().max(1.0) {
            wins += 1;
        }
    }
    Outcome {
        id: 7,
        name: "RCGA <= PBA on >= 95% of 40 desk instances",
        pass: n == 40 && wins as f64 >= 0.95 * n as f64,
        detail: format!("RCGA no worse on {wins}/{n}"),
    }
}

fn criterion_8(b: &Batches, ledger: &mut Ledger, seeds: u64) -> Outcome {
    const LEVELS: [f64; 5] = [0.1, 0.15, 0.2, 0.25, 0.3];
    let cfg = SolverConfig::default();
    let mut total_bad = Vec::new();
    let mut share_bad = Vec::new();
    let mut zero_at_top = 0;
    let mut failed = 0;
    for seed in 0..seeds {
        let mut series = Vec::new();
        for &rho_b in &LEVELS {
            let r = if rho_b == 0.3 {
                b.seven[seed as usize].1.clone()
            } else {
                let inst = generate_instance(&desk(CellLayout::Seven, seed, rho_b)).unwrap();
                let r = run_rcga(&inst, &cfg).unwrap();
                ledger.keep(&inst, &r);
                r
            };
            failed += !r.success as usize;
            series.push((r.cost.total, r.cost.download_share()));
        }
        for w in series.windows(2) {
            if w[1].0 > w[0].0 + 1e-9 * w[0].0.abs() {
                total_bad.push(format!("seed {seed}: {:.6} -> {:.6}", w[0].0, w[1].0));
            }
            if w[1].1 > w[0].1 + 1e-12 {
                share_bad.push(format!("seed {seed}: share {:.6} -> {:.6}", w[0].1, w[1].1));
            }
        }
        zero_at_top += (series[LEVELS.len() - 1].1 <= 1e-12) as usize;
    }
    Outcome {
        id: 8,
        name: "7-cell backhaul sweep: total and download share non-increasing, share 0 at top on >= half",
        pass: failed == 0 && total_bad.is_empty() && share_bad.is_empty() && 2 * zero_at_top >= seeds as usize,
        detail: format!(
            "{seeds} seeds; total increases {}, share increases {}, zero share at 0.3 on {zero_at_top}, failed runs {failed}{}",
            total_bad.len(),
            share_bad.len(),
            first(&total_bad)
        ),
    }
}

fn criterion_9(ledger: &Ledger, dir: &Path) -> Outcome {
    let mut checked = 0;
    let mut problems = Vec::new();
    for (inst, r) in ledger.runs.iter().filter(|(_, r)| r.success) {
        let ((aoi, download, update), p) = recompute(inst, r);
        checked += 1;
        if !p.is_empty() {
            problems.push(p.join("; "));
        }
        let c = &r.cost;
        if !(rel_close(aoi, c.aoi_cost) && rel_close(download, c.download_cost) && rel_close(update, c.update_cost))
            || !rel_close(aoi + download + update, c.total)
        {
            problems.push(format!(
                "{}: recomputed ({aoi}, {download}, {update}) vs reported ({}, {}, {})",
                r.algorithm, c.aoi_cost, c.download_cost, c.update_cost
            ));
        }
    }
    // the command-line evaluator on one report per distinct algorithm and size
    let mut seen = HashSet::new();
    let mut cli_runs = 0;
    for (k, (inst, r)) in ledger.runs.iter().enumerate() {
        if !r.success || !seen.insert((r.algorithm, inst.num_servers())) {
            continue;
        }
        let ip = dir.join(format!("inst-{k}.json"));
        let rp = dir.join(format!("report-{k}.json"));
        save_instance(inst, &ip).unwrap();
        std::fs::write(&rp, serde_json::to_string(r).unwrap()).unwrap();
        let out = Command::new(env!("CARGO_BIN_EXE_mcsp"))
            .args(["eval", "--instance"])
            .arg(&ip)
            .arg("--schedule")
            .arg(&rp)
            .output()
            .expect("mcsp runs");
        cli_runs += 1;
        let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap_or_default();
        if !out.status.success() || v["matches_report"] != serde_json::Value::Bool(true) {
            problems.push(format!("eval rejected {} report {k}: {}", r.algorithm, String::from_utf8_lossy(&out.stdout)));
        }
    }
    Outcome {
        id: 9,
        name: "independent re-evaluation matches every report, zero violations",
        pass: problems.is_empty() && checked > 0 && cli_runs > 0,
        detail: format!("{checked} reports recomputed, {cli_runs} via `mcsp eval`, {} problems{}", problems.len(), first(&problems)),
    }
}

fn criterion_10(b: &Batches) -> Outcome {
    let times: Vec<f64> = b.seven.iter().map(|(_, r)| r.wall_time_s).collect();
    let max = times.iter().cloned().fold(0.0, f64::max);
    Outcome {
        id: 10,
        name: "7-cell I=200 R=2000 T=12 RCGA within 60 s",
        pass: !times.is_empty() && max <= 60.0,
        detail: format!(
            "{} runs, max {:.2}s, mean {:.2}s (threads: {})",
            times.len(),
            max,
            times.iter().sum::<f64>() / times.len() as f64,
            rayon::current_num_threads()
        ),
    }
}

fn criterion_4(ledger: &Ledger, sandwich_mismatches: usize) -> Outcome {
    let rcga: Vec<&SolveReport> = ledger.runs.iter().map(|(_, r)| r).filter(|r| r.algorithm == mcsp::driver::Algorithm::Rcga).collect();
    let checks: usize = rcga.iter().map(|r| r.integrality_checks).sum();
    let mismatches: usize = rcga.iter().map(|r| r.integrality_mismatches).sum::<usize>() + sandwich_mismatches;
    Outcome {
        id: 4,
        name: "indicator integrality iff column-weight integrality in every rounding cycle",
        pass: mismatches == 0 && checks > 0,
        detail: format!("{} RCGA runs, {checks} cycles checked, {mismatches} mismatches (plus sandwich runs)", rcga.len()),
    }
}

fn criterion_11(ledger: &Ledger) -> Outcome {
    let mut runs = 0;
    let mut problems = Vec::new();
    for (inst, r) in &ledger.runs {
        let Some(min_rc) = r.min_reduced_cost else { continue };
        runs += 1;
        if min_rc < -1e-6 {
            problems.push(format!("{}: pool reduced cost {min_rc}", r.algorithm));
        }
        let bound = inst.num_contents() * inst.horizon;
        if r.rounding_rounds > bound {
            problems.push(format!("{}: {} rounding cycles > I*T = {bound}", r.algorithm, r.rounding_rounds));
        }
    }
    Outcome {
        id: 11,
        name: "pool reduced costs >= -1e-6 at every fixpoint; rounding cycles <= I*T",
        pass: problems.is_empty() && runs > 0,
        detail: format!("{runs} runs, {} problems{}", problems.len(), first(&problems)),
    }
}

fn main() {
    let start = Instant::now();
    let dir = tempfile::tempdir().expect("temp dir");
    let mut ledger = Ledger::default();
    let mut out = vec![criterion_1(), criterion_2()];
    let (c3, sandwich_mismatches) = criterion_3(&mut ledger);
    out.push(c3);
    let batches = run_batches(&mut ledger, 50);
    out.push(criterion_5(&batches));
    out.push(criterion_6(&batches));
    out.push(criterion_7(&batches, &mut ledger));
    out.push(criterion_8(&batches, &mut ledger, 8));
    out.push(criterion_10(&batches));
    out.push(criterion_4(&ledger, sandwich_mismatches));
    out.push(criterion_9(&ledger, dir.path()));
    out.push(criterion_11(&ledger));
    out.sort_by_key(|o| o.id);

    println!();
    for o in &out {
        println!("[{}] {:>2}. {}: {}", if o.pass { "PASS" } else { "FAIL" }, o.id, o.name, o.detail);
    }
    let failed = out.iter().filter(|o| !o.pass).count();
    println!("\nacceptance: {} passed, {failed} failed in {:.1}s", out.len() - failed, start.elapsed().as_secs_f64());
    if failed > 0 {
        std::process::exit(1);
    }
}
