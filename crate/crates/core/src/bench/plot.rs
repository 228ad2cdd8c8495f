//! Deterministic SVG line plot of the seed-averaged value curve.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::runner::read_seed_csv;
use crate::error::{Error, Result};

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 420.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 30.0;
const MARGIN_BOTTOM: f64 = 50.0;

/// Seed-averaged `v_exact` per episode and the reference value, if any.
#[derive(Clone, Debug, PartialEq)]
pub struct ValueSeries {
    pub episodes: Vec<usize>,
    pub mean_value: Vec<f64>,
    pub v_star: Option<f64>,
}

/// `seed_*.csv` files in `dir`, sorted by name.
pub fn seed_csvs_in(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("seed_") && n.ends_with(".csv"))
        })
        .collect();
    paths.sort();
    Ok(paths)
}

pub fn load_series(paths: &[PathBuf]) -> Result<ValueSeries> {
    if paths.is_empty() {
        return Err(Error::MalformedCsv("no per-seed csv files".into()));
    }
    let mut series: Option<ValueSeries> = None;
    for path in paths {
        let rows = read_seed_csv(path)?;
        if rows.is_empty() {
            return Err(Error::MalformedCsv(format!("{}: no data rows", path.display())));
        }
        match &mut series {
            None => {
                series = Some(ValueSeries {
                    episodes: rows.iter().map(|r| r.episode).collect(),
                    mean_value: rows.iter().map(|r| r.v_exact).collect(),
                    v_star: rows[0].v_star,
                })
            }
            Some(acc) => {
                if rows.len() != acc.episodes.len() || rows.iter().zip(&acc.episodes).any(|(r, e)| r.episode != *e) {
                    return Err(Error::MalformedCsv(format!(
                        "{}: episodes differ from the first file",
                        path.display()
                    )));
                }
                for (m, r) in acc.mean_value.iter_mut().zip(&rows) {
                    *m += r.v_exact;
                }
            }
        }
    }
    let mut series = series.expect("at least one file");
    let n = paths.len() as f64;
    for m in &mut series.mean_value {
        *m /= n;
    }
    Ok(series)
}

fn escape_free_label(x: f64) -> String {
    format!("{x:.3}")
}

/// Renders the curve with a dashed horizontal reference line.
pub fn render_svg(series: &ValueSeries) -> String {
    let first = *series.episodes.first().unwrap_or(&1) as f64;
    let last = *series.episodes.last().unwrap_or(&1) as f64;
    let x_span = if last > first { last - first } else { 1.0 };
    let mut lo = series.mean_value.iter().copied().fold(f64::INFINITY, f64::min);
    let mut hi = series.mean_value.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if let Some(v) = series.v_star {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    let pad = ((hi - lo) * 0.05).max(0.05);
    let (lo, hi) = (lo - pad, hi + pad);
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let px = |e: f64| MARGIN_LEFT + (e - first) / x_span * plot_w;
    let py = |v: f64| MARGIN_TOP + (hi - v) / (hi - lo) * plot_h;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let (x0, x1, y0, y1) = (MARGIN_LEFT, WIDTH - MARGIN_RIGHT, MARGIN_TOP, HEIGHT - MARGIN_BOTTOM);
    let _ = writeln!(
        svg,
        r#"<path d="M{x0:.2} {y0:.2} V{y1:.2} H{x1:.2}" stroke="black" fill="none"/>"#
    );
    for i in 0..=4 {
        let v = lo + (hi - lo) * i as f64 / 4.0;
        let y = py(v);
        let _ = writeln!(
            svg,
            r#"<line x1="{:.2}" y1="{y:.2}" x2="{x0:.2}" y2="{y:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            x0 - 4.0,
            x0 - 6.0,
            y + 4.0,
            escape_free_label(v)
        );
    }
    for i in 0..=4 {
        let e = first + x_span * i as f64 / 4.0;
        let x = px(e);
        let _ = writeln!(
            svg,
            r#"<line x1="{x:.2}" y1="{y1:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            y1 + 4.0,
            y1 + 18.0,
            e.round()
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">episode</text>"#,
        x0 + plot_w / 2.0,
        HEIGHT - 10.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">value at the initial state</text>"#,
        y0 + plot_h / 2.0,
        y0 + plot_h / 2.0
    );
    if let Some(v) = series.v_star {
        let y = py(v);
        let _ = writeln!(
            svg,
            r##"<line x1="{x0:.2}" y1="{y:.2}" x2="{x1:.2}" y2="{y:.2}" stroke="#c0392b" stroke-dasharray="6 4"/>"##
        );
    }
    let mut points = String::with_capacity(series.episodes.len() * 16);
    for (e, v) in series.episodes.iter().zip(&series.mean_value) {
        let _ = write!(points, "{:.2},{:.2} ", px(*e as f64), py(*v));
    }
    let _ = writeln!(
        svg,
        r##"<polyline points="{}" fill="none" stroke="#2c7fb8" stroke-width="1.5"/>"##,
        points.trim_end()
    );
    let _ = writeln!(
        svg,
        r##"<text x="{:.2}" y="20" fill="#2c7fb8">mean value</text>"##,
        x0 + 10.0
    );
    if series.v_star.is_some() {
        let _ = writeln!(
            svg,
            r##"<text x="{:.2}" y="20" fill="#c0392b">reference</text>"##,
            x0 + 110.0
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// Reads the per-seed CSVs, averages them and writes the SVG.
pub fn emit_plot(paths: &[PathBuf], out: &Path) -> Result<()> {
    let series = load_series(paths)?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(out, render_svg(&series))?;
    Ok(())
}
