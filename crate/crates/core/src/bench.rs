//! Parameter sweeps with resumable CSV output, and per-figure summaries.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::fs::{self, File, OpenOptions};
use std::path::{Path, PathBuf};

use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cost::SettlementMode;
use crate::driver::{solve, Algorithm, SolveReport, SolverConfig};
use crate::error::{McspError, Result};
use crate::instance::{generate_instance, CellLayout, GeneratorConfig};

/// Column name, axis label and extractor for one figure series.
type Metric = fn(&ResultRow) -> f64;

/// Column order of the results file.
pub const RESULT_COLUMNS: [&str; 19] = [
    "seed",
    "cells",
    "I",
    "R",
    "T",
    "rho_m",
    "rho_tt",
    "rho_b",
    "algo",
    "mode",
    "total",
    "aoi_cost",
    "download_cost",
    "update_cost",
    "lb",
    "gap",
    "pricing_rounds",
    "rounding_rounds",
    "wall_time_s",
];

/// One solver run. Cost fields are empty when the run found no feasible schedule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub seed: u64,
    pub cells: usize,
    #[serde(rename = "I")]
    pub contents: usize,
    #[serde(rename = "R")]
    pub requests: usize,
    #[serde(rename = "T")]
    pub horizon: usize,
    pub rho_m: f64,
    pub rho_tt: f64,
    pub rho_b: f64,
    pub algo: Algorithm,
    pub mode: SettlementMode,
    pub total: Option<f64>,
    pub aoi_cost: Option<f64>,
    pub download_cost: Option<f64>,
    pub update_cost: Option<f64>,
    pub lb: Option<f64>,
    pub gap: Option<f64>,
    pub pricing_rounds: usize,
    pub rounding_rounds: usize,
    pub wall_time_s: f64,
}

impl ResultRow {
    pub fn new(cfg: &GeneratorConfig, report: &SolveReport) -> Self {
        let ok = report.success;
        let cost = report.cost;
        ResultRow {
            seed: cfg.seed,
            cells: cfg.cells.num_servers(),
            contents: cfg.num_contents,
            requests: cfg.num_requests,
            horizon: cfg.horizon,
            rho_m: cfg.rho_m,
            rho_tt: cfg.rho_tt,
            rho_b: cfg.rho_b,
            algo: report.algorithm,
            mode: report.settlement_mode,
            total: ok.then_some(cost.total),
            aoi_cost: ok.then_some(cost.aoi_cost),
            download_cost: ok.then_some(cost.download_cost),
            update_cost: ok.then_some(cost.update_cost),
            lb: report.lower_bound,
            gap: if ok { report.gap } else { None },
            pricing_rounds: report.pricing_rounds,
            rounding_rounds: report.rounding_rounds,
            wall_time_s: report.wall_time_s,
        }
    }

    pub fn succeeded(&self) -> bool {
        self.total.is_some()
    }

    /// Identifies the run for resuming a sweep.
    pub fn key(&self) -> String {
        format!(
            "{}|{}|{}|{}|{}|{}|{}|{}|{}|{}",
            self.seed, self.cells, self.contents, self.requests, self.horizon, self.rho_m, self.rho_tt, self.rho_b, self.algo, self.mode
        )
    }
}

/// Writes `rows` with a header, replacing `path`.
pub fn write_results_csv(path: impl AsRef<Path>, rows: &[ResultRow]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| McspError::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    for row in rows {
        w.serialize(row)?;
    }
    if rows.is_empty() {
        w.write_record(RESULT_COLUMNS)?;
    }
    w.flush().map_err(|e| McspError::io(path, e))
}

fn append_row(path: &Path, row: &ResultRow) -> Result<()> {
    let fresh = fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    let file = OpenOptions::new().create(true).append(true).open(path).map_err(|e| McspError::io(path, e))?;
    let mut w = csv::WriterBuilder::new().has_headers(fresh).from_writer(file);
    w.serialize(row)?;
    w.flush().map_err(|e| McspError::io(path, e))
}

pub fn read_results_csv(path: impl AsRef<Path>) -> Result<Vec<ResultRow>> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != RESULT_COLUMNS {
        return Err(McspError::Schema(format!("{} does not have the results header: {}", path.display(), header.join(","))));
    }
    r.deserialize().map(|row| row.map_err(McspError::from)).collect()
}

/// A grid of generator settings, seeds and algorithms. Unset lists take
/// the generator defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    /// 3 or 7.
    pub cells: Vec<usize>,
    pub contents: Vec<usize>,
    pub requests: Vec<usize>,
    pub slots: Vec<usize>,
    pub rho_m: Vec<f64>,
    pub rho_tt: Vec<f64>,
    pub rho_b: Vec<f64>,
    pub seeds: Vec<u64>,
    pub algos: Vec<Algorithm>,
    pub mode: SettlementMode,
    pub cache_scale: f64,
    pub window_max: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        let g = GeneratorConfig::default();
        SweepConfig {
            cells: vec![3],
            contents: vec![g.num_contents],
            requests: vec![g.num_requests],
            slots: vec![g.horizon],
            rho_m: vec![g.rho_m],
            rho_tt: vec![g.rho_tt],
            rho_b: vec![g.rho_b],
            seeds: vec![0],
            algos: vec![Algorithm::Rcga, Algorithm::Pba],
            mode: SettlementMode::Paper,
            cache_scale: g.cache_scale,
            window_max: g.window_max,
        }
    }
}

impl SweepConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| McspError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| McspError::Config(format!("{}: {e}", path.display())))
    }

    /// Every generator configuration of the grid, seeds innermost.
    pub fn instances(&self) -> Result<Vec<GeneratorConfig>> {
        let mut out = Vec::new();
        for &cells in &self.cells {
            let layout = match cells {
                3 => CellLayout::Three,
                7 => CellLayout::Seven,
                n => return Err(McspError::Config(format!("cells must be 3 or 7, got {n}"))),
            };
            for &i in &self.contents {
                for &r in &self.requests {
                    for &t in &self.slots {
                        for &rho_m in &self.rho_m {
                            for &rho_tt in &self.rho_tt {
                                for &rho_b in &self.rho_b {
                                    for &seed in &self.seeds {
                                        out.push(GeneratorConfig {
                                            cells: layout.clone(),
                                            num_contents: i,
                                            num_requests: r,
                                            horizon: t,
                                            rho_m,
                                            rho_tt,
                                            rho_b,
                                            cache_scale: self.cache_scale,
                                            window_max: self.window_max,
                                            seed,
                                            ..GeneratorConfig::default()
                                        });
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SweepSummary {
    pub ran: usize,
    pub skipped: usize,
}

/// Runs every (instance, algorithm) of the grid not already in `out`.
/// Runs execute in parallel batches of the rayon pool size; each batch is
/// appended in grid order, so an interrupted sweep resumes where it stopped.
pub fn run_sweep(cfg: &SweepConfig, out: impl AsRef<Path>) -> Result<SweepSummary> {
    let out = out.as_ref();
    let done: HashSet<String> = if out.exists() && fs::metadata(out).map(|m| m.len() > 0).unwrap_or(false) {
        read_results_csv(out)?.iter().map(ResultRow::key).collect()
    } else {
        HashSet::new()
    };
    let mut summary = SweepSummary::default();
    let solver = SolverConfig::with_mode(cfg.mode);
    let mut jobs = Vec::new();
    for gen in cfg.instances()? {
        for &algo in &cfg.algos {
            let probe = ResultRow {
                algo,
                mode: if algo == Algorithm::Pba { SettlementMode::Min } else { cfg.mode },
                ..ResultRow::new(&gen, &SolveReport::new(algo, cfg.mode))
            };
            if done.contains(&probe.key()) {
                summary.skipped += 1;
            } else {
                jobs.push((gen.clone(), algo));
            }
        }
    }
    for batch in jobs.chunks(rayon::current_num_threads().max(1)) {
        let rows: Vec<Result<ResultRow>> = batch
            .par_iter()
            .map(|(gen, algo)| {
                let inst = generate_instance(gen)?;
                let report = solve(&inst, *algo, &solver)?;
                Ok(ResultRow::new(gen, &report))
            })
            .collect();
        for row in rows {
            let row = row?;
            info!(
                "seed {} cells {} I {} R {} rho_b {} {}: total {:?} in {:.2}s",
                row.seed, row.cells, row.contents, row.requests, row.rho_b, row.algo, row.total, row.wall_time_s
            );
            append_row(out, &row)?;
            summary.ran += 1;
        }
    }
    Ok(summary)
}

/// Averages of one (x value, algorithm) group.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FigurePoint {
    pub x: f64,
    pub algo: Algorithm,
    pub runs: usize,
    pub successes: usize,
    pub mean_total: Option<f64>,
    pub mean_aoi_cost: Option<f64>,
    pub mean_download_cost: Option<f64>,
    pub mean_update_cost: Option<f64>,
    pub mean_download_share: Option<f64>,
    pub mean_lb: Option<f64>,
    pub mean_gap: Option<f64>,
    pub mean_wall_time_s: f64,
}

fn mean(v: impl Iterator<Item = f64>) -> Option<f64> {
    let (n, s) = v.fold((0usize, 0.0), |(n, s), x| (n + 1, s + x));
    (n > 0).then(|| s / n as f64)
}

/// Groups `rows` by `x(row)` and algorithm.
pub fn figure_points(rows: &[ResultRow], x: impl Fn(&ResultRow) -> f64) -> Vec<FigurePoint> {
    let mut groups: BTreeMap<(u64, Algorithm), Vec<&ResultRow>> = BTreeMap::new();
    for r in rows {
        groups.entry((x(r).to_bits(), r.algo)).or_default().push(r);
    }
    let mut points: Vec<FigurePoint> = groups
        .into_iter()
        .map(|((xb, algo), rs)| {
            let ok: Vec<&&ResultRow> = rs.iter().filter(|r| r.succeeded()).collect();
            FigurePoint {
                x: f64::from_bits(xb),
                algo,
                runs: rs.len(),
                successes: ok.len(),
                mean_total: mean(ok.iter().filter_map(|r| r.total)),
                mean_aoi_cost: mean(ok.iter().filter_map(|r| r.aoi_cost)),
                mean_download_cost: mean(ok.iter().filter_map(|r| r.download_cost)),
                mean_update_cost: mean(ok.iter().filter_map(|r| r.update_cost)),
                mean_download_share: mean(ok.iter().filter_map(|r| match (r.download_cost, r.total) {
                    (Some(d), Some(t)) if t > 0.0 => Some(d / t),
                    _ => None,
                })),
                mean_lb: mean(rs.iter().filter_map(|r| r.lb)),
                mean_gap: mean(ok.iter().filter_map(|r| r.gap)),
                mean_wall_time_s: mean(rs.iter().map(|r| r.wall_time_s)).unwrap_or(0.0),
            }
        })
        .collect();
    points.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.algo.as_str().cmp(b.algo.as_str())));
    points
}

/// A line chart of `mean_total` per algorithm.
pub fn render_svg(title: &str, x_label: &str, points: &[FigurePoint]) -> String {
    const W: f64 = 640.0;
    const H: f64 = 400.0;
    const M: f64 = 60.0;
    let pts: Vec<(f64, f64, Algorithm)> = points.iter().filter_map(|p| p.mean_total.map(|y| (p.x, y, p.algo))).collect();
    let mut out = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" font-family=\"sans-serif\" font-size=\"12\">\n\
         <text x=\"{}\" y=\"20\" text-anchor=\"middle\">{title}</text>\n",
        W / 2.0
    );
    if pts.is_empty() {
        out.push_str("</svg>\n");
        return out;
    }
    let (x0, x1) = pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.0), b.max(p.0)));
    let y1 = pts.iter().fold(0.0f64, |a, p| a.max(p.1)) * 1.05;
    let sx = |x: f64| if x1 > x0 { M + (x - x0) / (x1 - x0) * (W - 2.0 * M) } else { W / 2.0 };
    let sy = |y: f64| if y1 > 0.0 { H - M - y / y1 * (H - 2.0 * M) } else { H - M };
    let _ = writeln!(
        out,
        "<line x1=\"{M}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n<line x1=\"{M}\" y1=\"{M}\" x2=\"{M}\" y2=\"{}\" stroke=\"black\"/>",
        H - M,
        W - M,
        H - M,
        H - M
    );
    let _ = writeln!(out, "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{x_label}</text>", W / 2.0, H - 15.0);
    let _ = writeln!(out, "<text x=\"{M}\" y=\"{}\" text-anchor=\"end\">0</text>", H - M + 4.0);
    let _ = writeln!(out, "<text x=\"{M}\" y=\"{}\" text-anchor=\"end\">{y1:.0}</text>", M + 4.0);
    let colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"];
    let mut algos: Vec<Algorithm> = pts.iter().map(|p| p.2).collect();
    algos.dedup();
    algos.sort_by_key(|a| a.as_str());
    algos.dedup();
    for (k, algo) in algos.iter().enumerate() {
        let color = colors[k % colors.len()];
        let line: Vec<String> = pts.iter().filter(|p| p.2 == *algo).map(|p| format!("{:.1},{:.1}", sx(p.0), sy(p.1))).collect();
        let _ = writeln!(out, "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"2\" points=\"{}\"/>", line.join(" "));
        let _ = writeln!(out, "<text x=\"{}\" y=\"{}\" fill=\"{color}\">{algo}</text>", W - M + 5.0, M + 15.0 * k as f64);
    }
    out.push_str("</svg>\n");
    out
}

/// Writes one summary CSV and SVG per swept parameter, plus a per-algorithm
/// success and runtime table. Returns the files written.
pub fn write_report(rows: &[ResultRow], dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| McspError::io(dir, e))?;
    let mut written = Vec::new();
    let figures: [(&str, &str, Metric); 3] = [
        ("cost_vs_contents", "contents I", |r| r.contents as f64),
        ("cost_vs_requests", "requests R", |r| r.requests as f64),
        ("cost_vs_backhaul", "backhaul ratio rho_b", |r| r.rho_b),
    ];
    for (name, label, x) in figures {
        let points = figure_points(rows, x);
        let csv_path = dir.join(format!("{name}.csv"));
        let mut w = csv::Writer::from_path(&csv_path)?;
        for p in &points {
            w.serialize(p)?;
        }
        w.flush().map_err(|e| McspError::io(&csv_path, e))?;
        let svg_path = dir.join(format!("{name}.svg"));
        fs::write(&svg_path, render_svg(name, label, &points)).map_err(|e| McspError::io(&svg_path, e))?;
        written.push(csv_path);
        written.push(svg_path);
    }
    let table = figure_points(rows, |r| r.cells as f64);
    let path = dir.join("success_and_runtime.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["cells", "algo", "runs", "successes", "success_rate", "mean_wall_time_s"])?;
    for p in &table {
        w.write_record([
            p.x.to_string(),
            p.algo.to_string(),
            p.runs.to_string(),
            p.successes.to_string(),
            format!("{:.4}", p.successes as f64 / p.runs.max(1) as f64),
            format!("{:.4}", p.mean_wall_time_s),
        ])?;
    }
    w.flush().map_err(|e| McspError::io(&path, e))?;
    written.push(path);
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(seed: u64, algo: Algorithm, rho_b: f64, total: Option<f64>) -> ResultRow {
        ResultRow {
            seed,
            cells: 3,
            contents: 100,
            requests: 500,
            horizon: 12,
            rho_m: 0.4,
            rho_tt: 1.0,
            rho_b,
            algo,
            mode: SettlementMode::Paper,
            total,
            aoi_cost: total.map(|t| t / 2.0),
            download_cost: total.map(|t| t / 4.0),
            update_cost: total.map(|t| t / 4.0),
            lb: Some(10.0),
            gap: total.map(|t| (t - 10.0) / 10.0),
            pricing_rounds: 4,
            rounding_rounds: 2,
            wall_time_s: 0.5,
        }
    }

    #[test]
    fn header_order_and_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        let rows = vec![row(1, Algorithm::Rcga, 0.3, Some(12.0)), row(1, Algorithm::Nrs, 0.3, None)];
        write_results_csv(&path, &rows).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().next().unwrap(), RESULT_COLUMNS.join(","));
        assert_eq!(read_results_csv(&path).unwrap(), rows);
    }

    #[test]
    fn appending_keeps_one_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        append_row(&path, &row(1, Algorithm::Rcga, 0.3, Some(12.0))).unwrap();
        append_row(&path, &row(2, Algorithm::Rcga, 0.3, Some(11.0))).unwrap();
        assert_eq!(read_results_csv(&path).unwrap().len(), 2);
    }

    #[test]
    fn figure_means() {
        let rows =
            vec![row(1, Algorithm::Rcga, 0.1, Some(12.0)), row(2, Algorithm::Rcga, 0.1, Some(14.0)), row(1, Algorithm::Rcga, 0.2, None)];
        let pts = figure_points(&rows, |r| r.rho_b);
        assert_eq!(pts.len(), 2);
        assert_eq!(pts[0].mean_total, Some(13.0));
        assert_eq!(pts[0].mean_download_share, Some(0.25));
        assert_eq!((pts[1].runs, pts[1].successes, pts[1].mean_total), (1, 0, None));
        let svg = render_svg("t", "x", &pts);
        assert!(svg.starts_with("<svg") && svg.contains("polyline"));
    }

    #[test]
    fn sweep_config_defaults_and_unknown_fields() {
        let cfg: SweepConfig = serde_json::from_str(r#"{"rho_b": [0.1, 0.2], "seeds": [1, 2, 3]}"#).unwrap();
        assert_eq!(cfg.instances().unwrap().len(), 6);
        assert!(serde_json::from_str::<SweepConfig>(r#"{"rhob": [0.1]}"#).is_err());
    }
}
