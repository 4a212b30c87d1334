use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::runner::{RunResult, StepsizeFlag};

pub const METRICS_HEADER: [&str; 11] =
    ["run_id", "seed", "algorithm", "epoch", "iter", "wall_time_s", "objective", "feasible", "psi", "stationarity", "upsilon"];

const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];
const GRID_POINTS: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmSummary {
    pub algorithm: String,
    pub runs: usize,
    pub failed: usize,
    pub stepsize_violations: usize,
    pub mean_final_objective: f64,
    pub std_final_objective: f64,
    pub final_objectives: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub algorithms: Vec<AlgorithmSummary>,
}

/// Per-algorithm statistics of the final objective, in first-seen order.
pub fn summarize(runs: &[RunResult]) -> Summary {
    let mut order: Vec<String> = Vec::new();
    let mut groups: BTreeMap<String, Vec<&RunResult>> = BTreeMap::new();
    for r in runs {
        if !groups.contains_key(&r.algorithm) {
            order.push(r.algorithm.clone());
        }
        groups.entry(r.algorithm.clone()).or_default().push(r);
    }
    let algorithms = order
        .into_iter()
        .map(|name| {
            let rs = &groups[&name];
            let finals: Vec<f64> = rs.iter().map(|r| r.final_objective()).collect();
            let n = finals.len() as f64;
            let mean = finals.iter().sum::<f64>() / n;
            let var = if finals.len() > 1 { finals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
            AlgorithmSummary {
                algorithm: name,
                runs: rs.len(),
                failed: rs.iter().filter(|r| r.failed()).count(),
                stepsize_violations: rs.iter().filter(|r| matches!(r.stepsize, StepsizeFlag::Violated { .. })).count(),
                mean_final_objective: mean,
                std_final_objective: var.sqrt(),
                final_objectives: finals,
            }
        })
        .collect();
    Summary { algorithms }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:?}")).unwrap_or_default()
}

/// Writes `metrics.csv` rows ordered by run id, then iteration.
pub fn write_metrics_csv(path: &Path, runs: &[RunResult]) -> Result<()> {
    let mut sorted: Vec<&RunResult> = runs.iter().collect();
    sorted.sort_by(|a, b| a.run_id.cmp(&b.run_id));
    let csv_err = |e: csv::Error| Error::parse(path, e.to_string());
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(METRICS_HEADER).map_err(csv_err)?;
    for r in sorted {
        for m in &r.records {
            w.write_record([
                r.run_id.clone(),
                r.seed.to_string(),
                r.algorithm.clone(),
                format!("{:?}", m.epoch),
                m.iter.to_string(),
                format!("{:.6}", m.wall_time_s),
                format!("{:?}", m.objective),
                m.feasible.to_string(),
                opt(m.psi),
                opt(m.stationarity),
                opt(m.upsilon),
            ])
            .map_err(csv_err)?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// A seed-averaged curve of one algorithm.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

/// Averages each algorithm's runs on a common grid of `x`, holding every run
/// at its last value at or before the grid point. The initial objective sits
/// at `x = 0`.
pub fn mean_curves(runs: &[RunResult], x_of: impl Fn(&crate::harness::runner::MetricRecord) -> f64) -> Vec<Curve> {
    let summary = summarize(runs);
    summary
        .algorithms
        .iter()
        .map(|a| {
            let rs: Vec<Vec<(f64, f64)>> = runs
                .iter()
                .filter(|r| r.algorithm == a.algorithm)
                .map(|r| {
                    let mut pts = vec![(0.0, r.initial_objective)];
                    pts.extend(r.records.iter().map(|m| (x_of(m), m.objective)));
                    pts
                })
                .collect();
            let x_max = rs.iter().filter_map(|p| p.last().map(|l| l.0)).fold(0.0, f64::max);
            let points = (0..=GRID_POINTS)
                .map(|i| {
                    let x = x_max * i as f64 / GRID_POINTS as f64;
                    let ys = rs.iter().map(|p| {
                        let idx = p.partition_point(|q| q.0 <= x);
                        p[idx.saturating_sub(1)].1
                    });
                    (x, ys.sum::<f64>() / rs.len() as f64)
                })
                .collect();
            Curve { label: a.algorithm.clone(), points }
        })
        .collect()
}

/// Minimal line chart: axes, tick labels, one polyline per curve, legend.
pub fn render_svg(curves: &[Curve], x_label: &str, y_label: &str, log_y: bool) -> String {
    let (w, h, ml, mr, mt, mb) = (720.0, 460.0, 80.0, 190.0, 20.0, 50.0);
    let finite: Vec<(f64, f64)> =
        curves.iter().flat_map(|c| c.points.iter().copied()).filter(|p| p.1.is_finite() && (!log_y || p.1 > 0.0)).collect();
    let ty = |y: f64| if log_y { y.log10() } else { y };
    let (mut x0, mut x1) = (0.0f64, finite.iter().map(|p| p.0).fold(0.0f64, f64::max));
    let (mut y0, mut y1) = finite
        .iter()
        .map(|p| ty(p.1))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !(y0.is_finite() && y1.is_finite()) {
        (y0, y1) = (0.0, 1.0);
    }
    if y1 - y0 < 1e-12 {
        y0 -= 0.5;
        y1 += 0.5;
    }
    if x1 - x0 < 1e-12 {
        x0 = 0.0;
        x1 = 1.0;
    }
    let px = |x: f64| ml + (x - x0) / (x1 - x0) * (w - ml - mr);
    let py = |y: f64| mt + (1.0 - (ty(y) - y0) / (y1 - y0)) * (h - mt - mb);

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let (bx, by) = (h - mb, w - mr);
    let _ = writeln!(s, r#"<path d="M{ml} {mt} L{ml} {bx} L{by} {bx}" stroke="black" fill="none"/>"#);
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let (xv, yv) = (x0 + f * (x1 - x0), y0 + f * (y1 - y0));
        let (tx, tyy) = (ml + f * (w - ml - mr), mt + (1.0 - f) * (h - mt - mb));
        let ylab = if log_y { format!("1e{yv:.1}") } else { format!("{yv:.3e}") };
        let _ = writeln!(s, r#"<text x="{tx}" y="{}" text-anchor="middle">{xv:.3}</text>"#, bx + 18.0);
        let _ = writeln!(s, r#"<text x="{}" y="{tyy}" text-anchor="end">{ylab}</text>"#, ml - 6.0);
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{x_label}</text>"#, (ml + by) / 2.0, h - 10.0);
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{y_label}</text>"#,
        (mt + bx) / 2.0,
        (mt + bx) / 2.0
    );
    for (i, c) in curves.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = c
            .points
            .iter()
            .filter(|p| p.1.is_finite() && (!log_y || p.1 > 0.0))
            .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
            .collect();
        let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, pts.join(" "));
        let ly = mt + 16.0 * (i as f64 + 1.0);
        let _ = writeln!(s, r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#, by + 10.0, by + 30.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, by + 36.0, ly + 4.0, c.label);
    }
    s.push_str("</svg>\n");
    s
}

/// Files written by [`emit_report`].
#[derive(Debug, Clone)]
pub struct ReportFiles {
    pub metrics: PathBuf,
    pub summary: PathBuf,
    pub plot_epoch: PathBuf,
    pub plot_time: PathBuf,
}

pub fn emit_report(runs: &[RunResult], dir: &Path, log_y: bool) -> Result<ReportFiles> {
    if runs.is_empty() {
        return Err(Error::InvalidParameter("no runs to report".into()));
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let files = ReportFiles {
        metrics: dir.join("metrics.csv"),
        summary: dir.join("summary.json"),
        plot_epoch: dir.join("plot_epoch.svg"),
        plot_time: dir.join("plot_time.svg"),
    };
    write_metrics_csv(&files.metrics, runs)?;
    let summary = serde_json::json!({
        "algorithms": summarize(runs).algorithms,
        "runs": runs.iter().map(|r| serde_json::json!({
            "run_id": r.run_id,
            "algorithm": r.algorithm,
            "seed": r.seed,
            "initial_objective": r.initial_objective,
            "final_objective": r.final_objective(),
            "iterations": r.records.len(),
            "status": r.status,
            "stepsize": r.stepsize,
        })).collect::<Vec<_>>(),
    });
    let text = serde_json::to_string_pretty(&summary).map_err(|e| Error::parse(&files.summary, e.to_string()))?;
    fs::write(&files.summary, text + "\n").map_err(|e| Error::io(&files.summary, e))?;
    let by_epoch = mean_curves(runs, |m| m.epoch);
    let by_time = mean_curves(runs, |m| m.wall_time_s);
    fs::write(&files.plot_epoch, render_svg(&by_epoch, "epoch", "objective", log_y))
        .map_err(|e| Error::io(&files.plot_epoch, e))?;
    fs::write(&files.plot_time, render_svg(&by_time, "wall time (s)", "objective", log_y))
        .map_err(|e| Error::io(&files.plot_time, e))?;
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::runner::{MetricRecord, RunStatus};

    fn run(alg: &str, seed: u64, objectives: &[f64]) -> RunResult {
        RunResult {
            run_id: format!("000-{alg}-s{seed}"),
            algorithm: alg.into(),
            seed,
            initial_objective: 10.0,
            status: RunStatus::Completed,
            stepsize: StepsizeFlag::Satisfied { margin: 1.0 },
            records: objectives
                .iter()
                .enumerate()
                .map(|(i, &o)| MetricRecord {
                    epoch: (i + 1) as f64,
                    iter: i + 1,
                    wall_time_s: 0.1 * i as f64,
                    objective: o,
                    feasible: true,
                    psi: None,
                    stationarity: Some(0.5),
                    upsilon: None,
                })
                .collect(),
        }
    }

    #[test]
    fn csv_has_one_row_per_iteration() {
        let dir = tempfile::tempdir().unwrap();
        let files = emit_report(&[run("PALM", 1, &[3.0, 2.0, 1.0])], dir.path(), true).unwrap();
        let text = fs::read_to_string(files.metrics).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[0], METRICS_HEADER.join(","));
        assert_eq!(lines[1].split(',').nth(8), Some(""));
        assert_eq!(lines[1].split(',').nth(9), Some("0.5"));
    }

    #[test]
    fn summary_groups_by_algorithm() {
        let mut runs = Vec::new();
        for s in 0..10 {
            runs.push(run("PALM", s, &[s as f64]));
            runs.push(run("SPRING-SARAH", s, &[2.0 * s as f64]));
        }
        let sum = summarize(&runs);
        assert_eq!(sum.algorithms.len(), 2);
        assert_eq!(sum.algorithms[0].final_objectives.len(), 10);
        assert!((sum.algorithms[0].mean_final_objective - 4.5).abs() < 1e-12);
        assert!((sum.algorithms[1].mean_final_objective - 9.0).abs() < 1e-12);
    }

    #[test]
    fn flat_curve_renders() {
        let mut r = run("PALM", 1, &[10.0, 10.0, 10.0]);
        r.initial_objective = 10.0;
        let curves = mean_curves(&[r], |m| m.epoch);
        assert!(curves[0].points.iter().all(|p| p.1 == 10.0));
        let svg = render_svg(&curves, "epoch", "objective", false);
        assert!(svg.starts_with("<svg") && svg.contains("<polyline"));
        let ys: Vec<&str> = svg
            .split("points=\"")
            .nth(1)
            .unwrap()
            .split('"')
            .next()
            .unwrap()
            .split(' ')
            .map(|p| p.split(',').nth(1).unwrap())
            .collect();
        assert!(ys.windows(2).all(|w| w[0] == w[1]));
    }
}
