//! Static SVG line charts for the result CSVs. Output depends only on the
//! input data, so identical tables give byte-identical files.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::Result;
use crate::output::{ALPHA_TREND_CSV, BETA_SWEEP_CSV, FMIN_CSV, LATENCY_CSV, SWAP_CSV};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 130.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 55.0;
const TICKS: usize = 5;
const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Chart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn tick_label(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && !(1e-3..1e5).contains(&a) {
        format!("{v:.2e}")
    } else {
        let s = format!("{v:.4}");
        let s = s.trim_end_matches('0').trim_end_matches('.');
        if s == "-0" { "0".into() } else { s.to_string() }
    }
}

fn range(values: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if lo > hi {
        return None;
    }
    if lo == hi {
        let pad = if lo == 0.0 { 1.0 } else { lo.abs() * 0.1 };
        return Some((lo - pad, hi + pad));
    }
    Some((lo, hi))
}

impl Chart {
    pub fn render(&self) -> String {
        let pw = WIDTH - LEFT - RIGHT;
        let ph = HEIGHT - TOP - BOTTOM;
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
            LEFT + pw / 2.0,
            escape(&self.title)
        );
        let _ = writeln!(
            s,
            r#"<line x1="{LEFT}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="black"/>"#,
            TOP + ph,
            LEFT + pw,
            TOP + ph
        );
        let _ = writeln!(s, r#"<line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{:.1}" stroke="black"/>"#, TOP + ph);
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            LEFT + pw / 2.0,
            HEIGHT - 12.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            s,
            r#"<text x="18" y="{:.1}" text-anchor="middle" transform="rotate(-90 18 {:.1})">{}</text>"#,
            TOP + ph / 2.0,
            TOP + ph / 2.0,
            escape(&self.y_label)
        );

        let points = || self.series.iter().flat_map(|se| se.points.iter());
        let (Some((x0, x1)), Some((y0, y1))) = (range(points().map(|p| p.0)), range(points().map(|p| p.1))) else {
            let _ = writeln!(
                s,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" fill="gray">no data</text>"#,
                LEFT + pw / 2.0,
                TOP + ph / 2.0
            );
            s.push_str("</svg>\n");
            return s;
        };
        let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
        let sy = |y: f64| TOP + ph - (y - y0) / (y1 - y0) * ph;

        for i in 0..=TICKS {
            let t = i as f64 / TICKS as f64;
            let (xv, yv) = (x0 + t * (x1 - x0), y0 + t * (y1 - y0));
            let (px, py) = (sx(xv), sy(yv));
            let _ = writeln!(
                s,
                r#"<line x1="{px:.1}" y1="{:.1}" x2="{px:.1}" y2="{:.1}" stroke="black"/><text x="{px:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
                TOP + ph,
                TOP + ph + 5.0,
                TOP + ph + 18.0,
                tick_label(xv)
            );
            let _ = writeln!(
                s,
                r#"<line x1="{:.1}" y1="{py:.1}" x2="{LEFT}" y2="{py:.1}" stroke="black"/><text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
                LEFT - 5.0,
                LEFT - 8.0,
                py + 4.0,
                tick_label(yv)
            );
        }

        for (i, se) in self.series.iter().enumerate() {
            let color = COLORS[i % COLORS.len()];
            let coords: Vec<String> = se.points.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
            if coords.len() > 1 {
                let _ = writeln!(
                    s,
                    r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                    coords.join(" ")
                );
            }
            for c in &coords {
                let (cx, cy) = c.split_once(',').expect("formatted as x,y");
                let _ = writeln!(s, r#"<circle cx="{cx}" cy="{cy}" r="2.5" fill="{color}"/>"#);
            }
            let ly = TOP + 14.0 + 18.0 * i as f64;
            let lx = LEFT + pw + 12.0;
            let _ = writeln!(
                s,
                r#"<rect x="{lx:.1}" y="{:.1}" width="10" height="10" fill="{color}"/><text x="{:.1}" y="{ly:.1}">{}</text>"#,
                ly - 9.0,
                lx + 15.0,
                escape(&se.name)
            );
        }
        s.push_str("</svg>\n");
        s
    }
}

/// Builds a chart from a CSV: x from column `x`, one series per column in
/// `ys`. Empty or non-finite cells are skipped.
pub fn chart_from_csv(path: &Path, title: &str, x: &str, ys: &[&str]) -> Result<Chart> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    let col = |name: &str| header.iter().position(|h| h == name);
    let xi = col(x);
    let mut series: Vec<Series> = ys
        .iter()
        .map(|y| Series { name: (*y).to_string(), points: Vec::new() })
        .collect();
    for rec in r.records() {
        let rec = rec?;
        let num = |i: Option<usize>| i.and_then(|i| rec.get(i)).and_then(|v| v.parse::<f64>().ok()).filter(|v| v.is_finite());
        let Some(xv) = num(xi) else { continue };
        for (se, y) in series.iter_mut().zip(ys) {
            if let Some(yv) = num(col(y)) {
                se.points.push((xv, yv));
            }
        }
    }
    Ok(Chart {
        title: title.to_string(),
        x_label: x.to_string(),
        y_label: ys.join(", "),
        series,
    })
}

struct PlotSpec {
    csv: &'static str,
    title: &'static str,
    x: &'static str,
    ys: &'static [&'static str],
}

const PLOTS: [PlotSpec; 5] = [
    PlotSpec { csv: BETA_SWEEP_CSV, title: "Revenue per block by strategy", x: "beta", ys: &["fifo_avg", "greedy_avg"] },
    PlotSpec { csv: LATENCY_CSV, title: "Processing latency vs aggression", x: "eta_lo", ys: &["mean_latency"] },
    PlotSpec { csv: FMIN_CSV, title: "Price of consumption per epoch", x: "epoch", ys: &["fmin"] },
    PlotSpec {
        csv: ALPHA_TREND_CSV,
        title: "Trend with FIFO share",
        x: "alpha",
        ys: &["breakpoint", "sub_breakpoint_latency"],
    },
    PlotSpec { csv: SWAP_CSV, title: "Swap-attack bound per run", x: "run", ys: &["ratio"] },
];

/// Writes one SVG next to each result CSV present in `dir`. Returns the
/// files written.
pub fn render_plots(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for spec in &PLOTS {
        let csv = dir.join(spec.csv);
        if !csv.exists() {
            continue;
        }
        let chart = chart_from_csv(&csv, spec.title, spec.x, spec.ys)?;
        let out = csv.with_extension("svg");
        std::fs::write(&out, chart.render())?;
        written.push(out);
    }
    Ok(written)
}

/// Renders the SVG for a single CSV if it is one of the known tables.
pub fn render_one(csv: &Path) -> Result<Option<PathBuf>> {
    let name = csv.file_name().and_then(|n| n.to_str()).unwrap_or_default();
    let Some(spec) = PLOTS.iter().find(|p| p.csv == name) else {
        return Ok(None);
    };
    if !csv.exists() {
        log::warn!("{} missing; plot skipped", csv.display());
        return Ok(None);
    }
    let chart = chart_from_csv(csv, spec.title, spec.x, spec.ys)?;
    let out = csv.with_extension("svg");
    std::fs::write(&out, chart.render())?;
    Ok(Some(out))
}
