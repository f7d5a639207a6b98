//! Self-contained SVG trend plots: one line per learner over the knob grid
//! with a ±1 standard-error band.

use std::fmt::Write as _;
use std::path::Path;

use crate::report::{AggregateRow, Metric};
use crate::HarnessError;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const COLORS: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf"];

/// Log scale when every grid value is positive and the grid spans at least
/// two decades.
pub fn use_log_axis(values: &[f64]) -> bool {
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    min > 0.0 && max / min >= 100.0
}

fn nice_step(span: f64) -> f64 {
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    [1.0, 2.0, 2.5, 5.0, 10.0].into_iter().map(|m| m * mag).find(|&s| s >= raw).unwrap_or(10.0 * mag)
}

fn label(v: f64) -> String {
    let r = (v * 1e9).round() / 1e9;
    if r == 0.0 { "0".into() } else { format!("{r}") }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

pub fn render_svg(rows: &[AggregateRow], metric: Metric) -> Result<String, HarnessError> {
    let points: Vec<&AggregateRow> = rows.iter().filter(|r| r.metric(metric).mean.is_finite()).collect();
    if points.is_empty() {
        return Err(HarnessError::Runtime(format!("no finite {} values to plot", metric.name())));
    }
    let mut learners: Vec<&str> = Vec::new();
    for r in &points {
        if !learners.contains(&r.learner.as_str()) {
            learners.push(&r.learner);
        }
    }
    let xs: Vec<f64> = points.iter().map(|r| r.knob_value).collect();
    let log_x = use_log_axis(&xs);
    let tx = |v: f64| if log_x { v.log10() } else { v };
    let (mut x0, mut x1) = xs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(tx(v)), b.max(tx(v))));
    if x1 - x0 < 1e-12 {
        (x0, x1) = (x0 - 0.5, x1 + 0.5);
    }
    let (mut y0, mut y1) = points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), r| {
        let s = r.metric(metric);
        let se = if s.se.is_finite() { s.se } else { 0.0 };
        (a.min(s.mean - se), b.max(s.mean + se))
    });
    if y1 - y0 < 1e-12 {
        (y0, y1) = (y0 - 0.5, y1 + 0.5);
    }
    let pad = 0.05 * (y1 - y0);
    (y0, y1) = (y0 - pad, y1 + pad);
    let (pw, ph) = (WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM);
    let px = |v: f64| LEFT + (tx(v) - x0) / (x1 - x0) * pw;
    let py = |v: f64| TOP + (y1 - v) / (y1 - y0) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let knob = escape(&points[0].knob);
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="22" text-anchor="middle" font-size="14">{} vs {knob}</text>"#,
        LEFT + pw / 2.0,
        metric.name()
    );
    let _ = writeln!(s, r##"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="#333"/>"##);

    // x ticks
    let xticks: Vec<f64> = if log_x {
        (x0.ceil() as i32..=x1.floor() as i32).map(|k| 10f64.powi(k)).collect()
    } else {
        let step = nice_step(x1 - x0);
        let first = (x0 / step).ceil() as i64;
        let last = (x1 / step).floor() as i64;
        (first..=last).map(|k| k as f64 * step).collect()
    };
    for v in xticks {
        let x = px(v);
        let _ = writeln!(s, r##"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="#333"/>"##, TOP + ph, TOP + ph + 5.0);
        let _ = writeln!(s, r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, TOP + ph + 18.0, label(v));
    }
    let step = nice_step(y1 - y0);
    for k in (y0 / step).ceil() as i64..=(y1 / step).floor() as i64 {
        let v = k as f64 * step;
        let y = py(v);
        let _ = writeln!(s, r##"<line x1="{:.2}" y1="{y:.2}" x2="{LEFT}" y2="{y:.2}" stroke="#333"/>"##, LEFT - 5.0);
        let _ = writeln!(s, r##"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#ddd"/>"##, LEFT + pw);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#, LEFT - 8.0, y + 4.0, label(v));
    }
    let axis_name = if log_x { format!("{knob} (log scale)") } else { knob.clone() };
    let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{axis_name}</text>"#, LEFT + pw / 2.0, HEIGHT - 15.0);
    let _ = writeln!(
        s,
        r#"<text x="18" y="{:.1}" text-anchor="middle" transform="rotate(-90 18 {:.1})">{}</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0,
        metric.name()
    );

    for (i, learner) in learners.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let series: Vec<(f64, f64, f64)> = points
            .iter()
            .filter(|r| r.learner == *learner)
            .map(|r| {
                let m = r.metric(metric);
                (r.knob_value, m.mean, if m.se.is_finite() { m.se } else { 0.0 })
            })
            .collect();
        let _ = writeln!(s, r#"<g class="series" data-learner="{}">"#, escape(learner));
        if series.len() > 1 {
            let upper = series.iter().map(|&(x, m, e)| format!("{:.2},{:.2}", px(x), py(m + e)));
            let lower = series.iter().rev().map(|&(x, m, e)| format!("{:.2},{:.2}", px(x), py(m - e)));
            let band: Vec<String> = upper.chain(lower).collect();
            let _ = writeln!(s, r#"<polygon class="band" points="{}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#, band.join(" "));
            let line: Vec<String> = series.iter().map(|&(x, m, _)| format!("{:.2},{:.2}", px(x), py(m))).collect();
            let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#, line.join(" "));
        } else {
            let (x, m, e) = series[0];
            let _ = writeln!(
                s,
                r#"<line class="band" x1="{0:.2}" y1="{1:.2}" x2="{0:.2}" y2="{2:.2}" stroke="{color}" stroke-opacity="0.4" stroke-width="6"/>"#,
                px(x),
                py(m + e),
                py(m - e)
            );
        }
        for &(x, m, _) in &series {
            let _ = writeln!(s, r#"<circle class="marker" cx="{:.2}" cy="{:.2}" r="3.5" fill="{color}"/>"#, px(x), py(m));
        }
        let ly = TOP + 10.0 + 20.0 * i as f64;
        let lx = WIDTH - RIGHT + 15.0;
        let _ = writeln!(s, r#"<line x1="{lx:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"/>"#, lx + 20.0);
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}">{}</text>"#, lx + 26.0, ly + 4.0, escape(learner));
        let _ = writeln!(s, "</g>");
    }
    s.push_str("</svg>\n");
    Ok(s)
}

pub fn emit_plot_svg(rows: &[AggregateRow], metric: Metric, path: &Path) -> Result<(), HarnessError> {
    let svg = render_svg(rows, metric)?;
    std::fs::write(path, svg).map_err(|e| HarnessError::Runtime(format!("{}: {e}", path.display())))
}
