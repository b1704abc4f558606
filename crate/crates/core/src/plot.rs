//! Deterministic SVG rendering of CLI CSV outputs.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 60.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlotKind {
    /// Three columns `x,y,z` on a rectangular grid.
    Heatmap,
    /// First column `x`, every further column one series.
    Line,
}

impl FromStr for PlotKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "heatmap" | "chevron" => Ok(PlotKind::Heatmap),
            "line" | "trajectory" => Ok(PlotKind::Line),
            _ => Err(format!("unknown plot kind `{s}` (heatmap, line)")),
        }
    }
}

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<f64>>,
}

fn read_table(csv_text: &str) -> Result<Table> {
    let mut r = csv::Reader::from_reader(csv_text.as_bytes());
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|s| s.trim().parse::<f64>().map_err(|_| invalid(format!("non-numeric CSV field `{s}`"))))
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(invalid("CSV has no data rows"));
    }
    Ok(Table { header, rows })
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if hi > lo {
        (lo, hi)
    } else {
        (lo - 0.5, lo + 0.5)
    }
}

fn header(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="24" font-family="sans-serif" font-size="14" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
}

fn axes(out: &mut String, xlabel: &str, ylabel: &str, (x0, x1): (f64, f64), (y0, y1): (f64, f64)) {
    let (l, r, t, b) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
    let _ = writeln!(out, r#"<path d="M{l} {t} L{l} {b} L{r} {b}" fill="none" stroke="black"/>"#);
    let font = r#"font-family="sans-serif" font-size="11""#;
    let _ = writeln!(out, r#"<text x="{l}" y="{}" {font}>{}</text>"#, b + 16.0, fmt(x0));
    let _ = writeln!(out, r#"<text x="{r}" y="{}" {font} text-anchor="end">{}</text>"#, b + 16.0, fmt(x1));
    let _ = writeln!(out, r#"<text x="{}" y="{b}" {font} text-anchor="end">{}</text>"#, l - 4.0, fmt(y0));
    let _ = writeln!(out, r#"<text x="{}" y="{}" {font} text-anchor="end">{}</text>"#, l - 4.0, t + 10.0, fmt(y1));
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" {font} text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        b + 36.0,
        escape(xlabel)
    );
    let _ = writeln!(
        out,
        r#"<text x="16" y="{}" {font} text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        escape(ylabel)
    );
}

fn fmt(v: f64) -> String {
    format!("{v:.4e}")
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Blue-to-yellow ramp for `v ∈ [0, 1]`.
fn color(v: f64) -> String {
    let v = v.clamp(0.0, 1.0);
    let r = (68.0 + v * (253.0 - 68.0)).round() as u8;
    let g = (1.0 + v * (231.0 - 1.0)).round() as u8;
    let b = (84.0 + v * (37.0 - 84.0)).round() as u8;
    format!("#{r:02x}{g:02x}{b:02x}")
}

fn sorted_unique(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

fn heatmap(t: &Table, title: &str) -> Result<String> {
    if t.header.len() != 3 || t.rows.iter().any(|r| r.len() != 3) {
        return Err(invalid("heatmap needs exactly three columns x,y,z"));
    }
    let xs = sorted_unique(t.rows.iter().map(|r| r[0]).collect());
    let ys = sorted_unique(t.rows.iter().map(|r| r[1]).collect());
    let (z0, z1) = range(t.rows.iter().map(|r| r[2]));
    let cw = (WIDTH - 2.0 * MARGIN) / xs.len() as f64;
    let ch = (HEIGHT - 2.0 * MARGIN) / ys.len() as f64;

    let mut out = String::new();
    header(&mut out, title);
    for r in &t.rows {
        let i = xs.partition_point(|&x| x < r[0]);
        let j = ys.partition_point(|&y| y < r[1]);
        let _ = writeln!(
            out,
            r#"<rect x="{:.3}" y="{:.3}" width="{:.3}" height="{:.3}" fill="{}"/>"#,
            MARGIN + i as f64 * cw,
            HEIGHT - MARGIN - (j + 1) as f64 * ch,
            cw,
            ch,
            color((r[2] - z0) / (z1 - z0))
        );
    }
    axes(
        &mut out,
        &t.header[0],
        &t.header[1],
        (xs[0], xs[xs.len() - 1]),
        (ys[0], ys[ys.len() - 1]),
    );
    out.push_str("</svg>\n");
    Ok(out)
}

fn line(t: &Table, title: &str) -> Result<String> {
    let cols = t.header.len();
    if cols < 2 || t.rows.iter().any(|r| r.len() != cols) {
        return Err(invalid("line plot needs an x column and at least one y column"));
    }
    let xr = range(t.rows.iter().map(|r| r[0]));
    let yr = range(t.rows.iter().flat_map(|r| r[1..].iter().copied()));
    let px = |x: f64| MARGIN + (x - xr.0) / (xr.1 - xr.0) * (WIDTH - 2.0 * MARGIN);
    let py = |y: f64| HEIGHT - MARGIN - (y - yr.0) / (yr.1 - yr.0) * (HEIGHT - 2.0 * MARGIN);

    let mut out = String::new();
    header(&mut out, title);
    for c in 1..cols {
        let points: Vec<String> = t
            .rows
            .iter()
            .map(|r| format!("{:.3},{:.3}", px(r[0]), py(r[c])))
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="1.5"/>"#,
            points.join(" "),
            COLORS[(c - 1) % COLORS.len()]
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11" fill="{}" text-anchor="end">{}</text>"#,
            WIDTH - MARGIN,
            MARGIN + 14.0 * c as f64,
            COLORS[(c - 1) % COLORS.len()],
            escape(&t.header[c])
        );
    }
    let ylabel = if cols == 2 { t.header[1].as_str() } else { "value" };
    axes(&mut out, &t.header[0], ylabel, xr, yr);
    out.push_str("</svg>\n");
    Ok(out)
}

/// Renders CSV text as an SVG document. Output depends only on the inputs.
pub fn emit_plot(csv_text: &str, kind: PlotKind, title: &str) -> Result<String> {
    let t = read_table(csv_text)?;
    if t.rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(invalid("CSV contains non-finite values"));
    }
    match kind {
        PlotKind::Heatmap => heatmap(&t, title),
        PlotKind::Line => line(&t, title),
    }
}
