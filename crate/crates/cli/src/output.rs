//! Report emission: the raw record table, per-epoch quantile summaries, and
//! self-contained SVG plots (median line with two shaded quantile bands on a
//! log error axis).

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

use crate::experiment::RunRecord;

pub const RAW_HEADER: &str = "trial,method,k,epoch,rse,flops,wall_seconds";
pub const SUMMARY_HEADER: &str = "method,epoch,min,q25,median,q75,max";
const GRID_POINTS: usize = 101;

/// Nearest-rank quantile of already sorted values.
pub fn nearest_rank(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let rank = (q * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quantiles {
    pub min: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub max: f64,
}

pub fn quantiles(values: &[f64]) -> Quantiles {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Quantiles {
        min: sorted[0],
        q25: nearest_rank(&sorted, 0.25),
        median: nearest_rank(&sorted, 0.5),
        q75: nearest_rank(&sorted, 0.75),
        max: *sorted.last().unwrap(),
    }
}

pub fn render_raw_csv(records: &[RunRecord]) -> String {
    let mut out = String::with_capacity(64 * (records.len() + 1));
    out.push_str(RAW_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.trial, r.method, r.k, r.epoch, r.rse, r.flops, r.wall_seconds
        );
    }
    out
}

/// Metric axes a trajectory can be summarized over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricAxis {
    Epoch,
    Flops,
    WallSeconds,
}

impl MetricAxis {
    pub fn name(&self) -> &'static str {
        match self {
            MetricAxis::Epoch => "epoch",
            MetricAxis::Flops => "flops",
            MetricAxis::WallSeconds => "wall_seconds",
        }
    }

    fn value(&self, r: &RunRecord) -> f64 {
        match self {
            MetricAxis::Epoch => r.epoch,
            MetricAxis::Flops => r.flops as f64,
            MetricAxis::WallSeconds => r.wall_seconds,
        }
    }
}

/// Per-method quantile band over an evenly spaced metric grid. The error is
/// piecewise constant between records, carried forward from the last one.
#[derive(Debug, Clone)]
pub struct MethodSummary {
    pub method: String,
    pub grid: Vec<f64>,
    pub bands: Vec<Quantiles>,
}

fn method_names(records: &[RunRecord]) -> Vec<String> {
    let mut names: Vec<String> = Vec::new();
    for r in records {
        if !names.contains(&r.method) {
            names.push(r.method.clone());
        }
    }
    names
}

pub fn summarize(records: &[RunRecord], axis: MetricAxis) -> Vec<MethodSummary> {
    let names = method_names(records);
    let grid_max = records
        .iter()
        .map(|r| axis.value(r))
        .fold(0.0f64, f64::max);
    let grid: Vec<f64> = (0..GRID_POINTS)
        .map(|i| grid_max * i as f64 / (GRID_POINTS - 1) as f64)
        .collect();

    names
        .into_iter()
        .map(|method| {
            let mut trials: Vec<usize> = records
                .iter()
                .filter(|r| r.method == method)
                .map(|r| r.trial)
                .collect();
            trials.sort_unstable();
            trials.dedup();

            let mut bands = Vec::with_capacity(grid.len());
            for &g in &grid {
                let mut values = Vec::with_capacity(trials.len());
                for &t in &trials {
                    // Last value carried forward along the metric axis.
                    let mut last = f64::NAN;
                    for r in records.iter().filter(|r| r.method == method && r.trial == t) {
                        if axis.value(r) <= g {
                            last = r.rse;
                        } else {
                            break;
                        }
                    }
                    if !last.is_nan() {
                        values.push(last);
                    }
                }
                if values.is_empty() {
                    values.push(f64::NAN);
                }
                bands.push(quantiles(&values));
            }
            MethodSummary {
                method,
                grid: grid.clone(),
                bands,
            }
        })
        .collect()
}

pub fn render_summary_csv(records: &[RunRecord]) -> String {
    let mut out = String::new();
    out.push_str(SUMMARY_HEADER);
    out.push('\n');
    for summary in summarize(records, MetricAxis::Epoch) {
        for (g, b) in summary.grid.iter().zip(&summary.bands) {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                summary.method, g, b.min, b.q25, b.median, b.q75, b.max
            );
        }
    }
    out
}

const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf",
];
const PLOT_W: f64 = 640.0;
const PLOT_H: f64 = 420.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 150.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 50.0;

/// Geometry of one method's series in plot coordinates: the median polyline
/// and the two band polygons. Pure so determinism is testable.
pub fn series_geometry(
    summary: &MethodSummary,
    x_max: f64,
    log_floor: f64,
    log_ceil: f64,
) -> (String, String, String) {
    let x_of = |v: f64| MARGIN_L + (PLOT_W - MARGIN_L - MARGIN_R) * (v / x_max.max(1e-300));
    let y_of = |rse: f64| {
        let l = rse.max(10f64.powf(log_floor)).log10().clamp(log_floor, log_ceil);
        let frac = (log_ceil - l) / (log_ceil - log_floor);
        MARGIN_T + (PLOT_H - MARGIN_T - MARGIN_B) * frac
    };
    let fmt = |v: f64| format!("{:.2}", v);

    let mut median = String::new();
    for (g, b) in summary.grid.iter().zip(&summary.bands) {
        if b.median.is_nan() {
            continue;
        }
        let _ = write!(median, "{},{} ", fmt(x_of(*g)), fmt(y_of(b.median)));
    }

    let band = |lo: fn(&Quantiles) -> f64, hi: fn(&Quantiles) -> f64| -> String {
        let mut path = String::new();
        for (g, b) in summary.grid.iter().zip(&summary.bands) {
            if hi(b).is_nan() {
                continue;
            }
            let _ = write!(path, "{},{} ", fmt(x_of(*g)), fmt(y_of(hi(b))));
        }
        for (g, b) in summary.grid.iter().zip(&summary.bands).rev() {
            if lo(b).is_nan() {
                continue;
            }
            let _ = write!(path, "{},{} ", fmt(x_of(*g)), fmt(y_of(lo(b))));
        }
        path
    };
    let outer = band(|b| b.min, |b| b.max);
    let inner = band(|b| b.q25, |b| b.q75);
    (median.trim().to_string(), inner.trim().to_string(), outer.trim().to_string())
}

/// Renders one plot: RSE (log axis) against the chosen metric, one series
/// per method with min-max and quartile bands. The file is self-contained.
pub fn render_svg(records: &[RunRecord], axis: MetricAxis) -> String {
    let summaries = summarize(records, axis);
    let x_max = records
        .iter()
        .map(|r| axis.value(r))
        .fold(0.0f64, f64::max)
        .max(1e-300);
    let positive_min = records
        .iter()
        .map(|r| r.rse)
        .filter(|v| v.is_finite() && *v > 0.0)
        .fold(f64::INFINITY, f64::min);
    let log_floor = if positive_min.is_finite() {
        (positive_min.log10() - 0.5).floor()
    } else {
        -1.0
    };
    let rse_max = records
        .iter()
        .map(|r| r.rse)
        .filter(|v| v.is_finite())
        .fold(0.0f64, f64::max)
        .max(1e-300);
    let log_ceil = (rse_max.log10() + 0.2).ceil().max(log_floor + 1.0);

    let mut svg = String::new();
    let _ = write!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{PLOT_W}" height="{PLOT_H}" viewBox="0 0 {PLOT_W} {PLOT_H}">"#
    );
    svg.push_str(r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = write!(
        svg,
        r#"<text x="{}" y="20" font-family="sans-serif" font-size="14">relative solution error vs {}</text>"#,
        MARGIN_L,
        axis.name()
    );

    // Axes.
    let x0 = MARGIN_L;
    let x1 = PLOT_W - MARGIN_R;
    let y0 = PLOT_H - MARGIN_B;
    let y1 = MARGIN_T;
    let _ = write!(
        svg,
        r#"<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/><line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>"#
    );
    // Log ticks on the error axis.
    let mut dec = log_floor.ceil() as i64;
    while dec <= log_ceil as i64 {
        let frac = (log_ceil - dec as f64) / (log_ceil - log_floor);
        let y = MARGIN_T + (PLOT_H - MARGIN_T - MARGIN_B) * frac;
        let _ = write!(
            svg,
            r##"<line x1="{}" y1="{y:.2}" x2="{}" y2="{y:.2}" stroke="#dddddd"/><text x="8" y="{:.2}" font-family="sans-serif" font-size="10">1e{dec}</text>"##,
            x0, x1, y + 3.0
        );
        dec += 1;
    }
    // A few metric ticks.
    for i in 0..=4 {
        let v = x_max * i as f64 / 4.0;
        let x = x0 + (x1 - x0) * i as f64 / 4.0;
        let _ = write!(
            svg,
            r#"<text x="{:.2}" y="{}" font-family="sans-serif" font-size="10" text-anchor="middle">{:.3e}</text>"#,
            x,
            y0 + 16.0,
            v
        );
    }

    for (mi, summary) in summaries.iter().enumerate() {
        let color = PALETTE[mi % PALETTE.len()];
        let (median, inner, outer) = series_geometry(summary, x_max, log_floor, log_ceil);
        let _ = write!(
            svg,
            r#"<polygon points="{outer}" fill="{color}" fill-opacity="0.12" stroke="none"/>"#
        );
        let _ = write!(
            svg,
            r#"<polygon points="{inner}" fill="{color}" fill-opacity="0.28" stroke="none"/>"#
        );
        let _ = write!(
            svg,
            r#"<polyline points="{median}" fill="none" stroke="{color}" stroke-width="2"/>"#
        );
        let ly = MARGIN_T + 16.0 * mi as f64;
        let _ = write!(
            svg,
            r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}" font-family="sans-serif" font-size="11">{}</text>"#,
            x1 + 10.0,
            x1 + 34.0,
            x1 + 40.0,
            ly + 4.0,
            summary.method
        );
    }
    svg.push_str("</svg>");
    svg
}

/// Writes the raw table, the summary table, and one SVG per metric axis.
pub fn emit_outputs(records: &[RunRecord], out_dir: &Path) -> Result<Vec<PathBuf>> {
    if records.is_empty() {
        bail!("no records to emit");
    }
    fs::create_dir_all(out_dir)
        .with_context(|| format!("creating output directory {}", out_dir.display()))?;
    let mut written = Vec::new();

    let raw = out_dir.join("raw.csv");
    fs::write(&raw, render_raw_csv(records)).with_context(|| format!("{}", raw.display()))?;
    written.push(raw);

    let summary = out_dir.join("summary.csv");
    fs::write(&summary, render_summary_csv(records))
        .with_context(|| format!("{}", summary.display()))?;
    written.push(summary);

    for (axis, file) in [
        (MetricAxis::Epoch, "rse_vs_epoch.svg"),
        (MetricAxis::WallSeconds, "rse_vs_wall.svg"),
        (MetricAxis::Flops, "rse_vs_flops.svg"),
    ] {
        let path = out_dir.join(file);
        fs::write(&path, render_svg(records, axis))
            .with_context(|| format!("{}", path.display()))?;
        written.push(path);
    }
    Ok(written)
}
