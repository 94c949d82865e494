//! Minimal standalone SVG plots of rank over time.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{io_err, HarnessError, Result};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 20.0;
const BOTTOM: f64 = 50.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, usize)>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn polyline(points: &[(f64, usize)], map: impl Fn(f64, f64) -> (f64, f64)) -> String {
    points
        .iter()
        .map(|&(t, r)| {
            let (x, y) = map(t, r as f64);
            format!("{x:.2},{y:.2}")
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// Solid polyline per scheme, dashed polyline for the reference curve.
pub fn rank_svg(series: &[Series], reference: Option<&Series>) -> Result<String> {
    let all = || series.iter().chain(reference).flat_map(|s| s.points.iter());
    if series.is_empty() || series.iter().any(|s| s.points.is_empty()) {
        return Err(HarnessError::Config {
            line: None,
            msg: "rank plot needs at least one nonempty series".into(),
        });
    }
    let t_min = all().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let mut t_max = all().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    if t_max <= t_min {
        t_max = t_min + 1.0;
    }
    let r_max = (all().map(|p| p.1).max().unwrap_or(0) + 1) as f64;
    let (pw, ph) = (WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM);
    let map = |t: f64, r: f64| (LEFT + (t - t_min) / (t_max - t_min) * pw, TOP + ph - r / r_max * ph);

    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );

    let rank_step = ((r_max / 8.0).ceil() as usize).max(1);
    for r in (0..=r_max as usize).step_by(rank_step) {
        let (_, y) = map(t_min, r as f64);
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{r}</text>"#,
            LEFT - 6.0,
            y + 4.0
        );
    }
    for i in 0..=4 {
        let t = t_min + (t_max - t_min) * f64::from(i) / 4.0;
        let (x, _) = map(t, 0.0);
        let _ = writeln!(
            s,
            r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{t:.3}</text>"#,
            TOP + ph + 16.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">t</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 10.0
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">rank</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0
    );

    let mut legend_y = TOP + 10.0;
    let mut legend = |s: &mut String, label: &str, color: &str, dash: &str| {
        let x = WIDTH - RIGHT + 10.0;
        let _ = writeln!(
            s,
            r#"<line x1="{x:.2}" y1="{legend_y:.2}" x2="{:.2}" y2="{legend_y:.2}" stroke="{color}" stroke-width="2"{dash}/>"#,
            x + 24.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}">{}</text>"#,
            x + 30.0,
            legend_y + 4.0,
            escape(label)
        );
        legend_y += 18.0;
    };
    for (i, series) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            polyline(&series.points, map)
        );
        legend(&mut s, &series.label, color, "");
    }
    if let Some(reference) = reference.filter(|r| !r.points.is_empty()) {
        let dash = r#" stroke-dasharray="6,4""#;
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="black" stroke-width="1.5"{dash} points="{}"/>"#,
            polyline(&reference.points, map)
        );
        legend(&mut s, &reference.label, "black", dash);
    }
    s.push_str("</svg>\n");
    Ok(s)
}

pub fn emit_rank_svg(series: &[Series], reference: Option<&Series>, path: &Path) -> Result<()> {
    fs::write(path, rank_svg(series, reference)?).map_err(io_err(path))
}
