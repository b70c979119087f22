//! File formats: sweep grids (CSV, JSON, SVG heatmap) and weak-trace maps (CSV).
//!
//! Floats are written with Rust's shortest round-trip formatting, so every emitted
//! CSV/JSON parses back to bit-identical values.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::analysis::tsvf::{WeakCell, WeakTraceMap};
use crate::counterport::FidelityGrid;
use crate::error::{Error, Result};
use crate::optics::TimeLabel;
use crate::qstate::{Arm, C64};

/// Average fidelity of the best classical strategy for an unknown qubit.
pub const CLASSICAL_LIMIT: f64 = 2.0 / 3.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridCsvRow {
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub avg_fidelity: f64,
    pub avg_success_prob: f64,
}

fn csv_err(e: impl std::fmt::Display) -> Error {
    Error::Parse(format!("csv: {e}"))
}

pub fn grid_to_csv(g: &FidelityGrid) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for c in &g.cells {
        w.serialize(GridCsvRow {
            m: c.m,
            n: c.n,
            avg_fidelity: c.avg_fidelity,
            avg_success_prob: c.avg_success_prob,
        })
        .expect("in-memory csv write");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv flush")).expect("csv is utf-8")
}

pub fn grid_from_csv(text: &str) -> Result<Vec<GridCsvRow>> {
    csv::Reader::from_reader(text.as_bytes())
        .deserialize()
        .map(|r| r.map_err(csv_err))
        .collect()
}

pub fn grid_to_json(g: &FidelityGrid) -> String {
    serde_json::to_string_pretty(g).expect("grids serialize")
}

pub fn grid_from_json(text: &str) -> Result<FidelityGrid> {
    let g: FidelityGrid = serde_json::from_str(text).map_err(|e| Error::Parse(format!("grid json: {e}")))?;
    if !g.is_well_formed() {
        return Err(Error::Parse("grid json is not a rectangular grid of values in [0, 1]".into()));
    }
    Ok(g)
}

/// Linear ramp from dark blue (0) through white (2/3) to dark red (1).
fn color(v: f64) -> String {
    let lerp = |a: f64, b: f64, t: f64| (a + (b - a) * t).round() as u8;
    let (lo, mid, hi) = ((33.0, 64.0, 154.0), (247.0, 247.0, 247.0), (178.0, 24.0, 43.0));
    let v = v.clamp(0.0, 1.0);
    let (a, b, t) = if v < CLASSICAL_LIMIT {
        (lo, mid, v / CLASSICAL_LIMIT)
    } else {
        (mid, hi, (v - CLASSICAL_LIMIT) / (1.0 - CLASSICAL_LIMIT))
    };
    format!("#{:02x}{:02x}{:02x}", lerp(a.0, b.0, t), lerp(a.1, b.1, t), lerp(a.2, b.2, t))
}

/// Heatmap of `avg_fidelity`: `N` on the x axis, `M` on the y axis (increasing
/// upwards), a colour bar, and the classical-limit contour drawn along cell edges
/// that separate values above and below 2/3.
pub fn grid_to_svg(g: &FidelityGrid, title: &str) -> String {
    const CELL: f64 = 24.0;
    const LEFT: f64 = 56.0;
    const TOP: f64 = 40.0;
    let (rows, cols) = (g.m_values.len(), g.n_values.len());
    let (w, h) = (cols as f64 * CELL, rows as f64 * CELL);
    let bar_x = LEFT + w + 24.0;
    let width = bar_x + 70.0;
    let height = TOP + h + 56.0;
    let value = |i: usize, j: usize| g.cells[i * cols + j].avg_fidelity;
    // Row i (M index) is drawn from the bottom.
    let x = |j: usize| LEFT + j as f64 * CELL;
    let y = |i: usize| TOP + (rows - 1 - i) as f64 * CELL;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<title>{}</title>"#, escape(title));
    let _ = writeln!(s, r#"<text x="{LEFT}" y="20" font-size="13">{}</text>"#, escape(title));
    for i in 0..rows {
        for j in 0..cols {
            let v = value(i, j);
            let _ = writeln!(
                s,
                r#"<rect x="{}" y="{}" width="{CELL}" height="{CELL}" fill="{}"><title>M={} N={} F={:.4} P={:.4}</title></rect>"#,
                x(j),
                y(i),
                color(v),
                g.m_values[i],
                g.n_values[j],
                v,
                g.cells[i * cols + j].avg_success_prob
            );
        }
    }
    let above = |i: usize, j: usize| value(i, j) > CLASSICAL_LIMIT;
    let mut path = String::new();
    for i in 0..rows {
        for j in 0..cols {
            if j + 1 < cols && above(i, j) != above(i, j + 1) {
                let _ = write!(path, "M{} {}v{CELL}", x(j + 1), y(i));
            }
            if i + 1 < rows && above(i, j) != above(i + 1, j) {
                let _ = write!(path, "M{} {}h{CELL}", x(j), y(i));
            }
        }
    }
    if !path.is_empty() {
        let _ = writeln!(
            s,
            r#"<path d="{path}" fill="none" stroke="black" stroke-width="2" stroke-dasharray="4 2"><title>classical limit 2/3</title></path>"#
        );
    }
    let step = |n: usize| if n > 12 { 5 } else { 1 };
    for (j, n) in g.n_values.iter().enumerate() {
        if j % step(cols) == 0 || j + 1 == cols {
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{}" text-anchor="middle">{n}</text>"#,
                x(j) + CELL / 2.0,
                TOP + h + 14.0
            );
        }
    }
    for (i, m) in g.m_values.iter().enumerate() {
        if i % step(rows) == 0 || i + 1 == rows {
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{}" text-anchor="end">{m}</text>"#,
                LEFT - 6.0,
                y(i) + CELL / 2.0 + 4.0
            );
        }
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">inner cycles N</text>"#,
        LEFT + w / 2.0,
        TOP + h + 32.0
    );
    let _ = writeln!(
        s,
        r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">outer cycles M</text>"#,
        TOP + h / 2.0,
        TOP + h / 2.0
    );
    const STEPS: usize = 50;
    for k in 0..STEPS {
        let v = 1.0 - (k as f64 + 0.5) / STEPS as f64;
        let _ = writeln!(
            s,
            r#"<rect x="{bar_x}" y="{}" width="14" height="{}" fill="{}"/>"#,
            TOP + k as f64 * h / STEPS as f64,
            h / STEPS as f64 + 0.5,
            color(v)
        );
    }
    for (v, label) in [(1.0, "1"), (CLASSICAL_LIMIT, "2/3"), (0.0, "0")] {
        let yy = TOP + (1.0 - v) * h;
        let _ = writeln!(
            s,
            r#"<line x1="{bar_x}" y1="{yy}" x2="{}" y2="{yy}" stroke="black"/><text x="{}" y="{}">{label}</text>"#,
            bar_x + 18.0,
            bar_x + 20.0,
            yy + 4.0
        );
    }
    s.push_str("</svg>\n");
    s
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeakCsvRow {
    pub time: String,
    pub arm: String,
    pub re: Option<f64>,
    pub im: Option<f64>,
    pub orthogonal: bool,
}

/// One row per `(time, arm)`; orthogonal boundaries leave `re`/`im` empty.
pub fn weak_map_to_csv(map: &WeakTraceMap) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for (t, row) in map.times.iter().zip(&map.cells) {
        for (a, cell) in map.arms.iter().zip(row) {
            let v = cell.value();
            w.serialize(WeakCsvRow {
                time: t.0.clone(),
                arm: a.name().into(),
                re: v.map(|v| v.re),
                im: v.map(|v| v.im),
                orthogonal: v.is_none(),
            })
            .expect("in-memory csv write");
        }
    }
    String::from_utf8(w.into_inner().expect("in-memory csv flush")).expect("csv is utf-8")
}

/// Rebuilds a map from [`weak_map_to_csv`] output.
pub fn weak_map_from_csv(text: &str) -> Result<WeakTraceMap> {
    let rows: Vec<WeakCsvRow> = csv::Reader::from_reader(text.as_bytes())
        .deserialize()
        .map(|r| r.map_err(csv_err))
        .collect::<Result<_>>()?;
    let mut times: Vec<TimeLabel> = Vec::new();
    let mut arms: Vec<Arm> = Vec::new();
    for r in &rows {
        if times.last().is_none_or(|t| t.0 != r.time) {
            times.push(TimeLabel::new(r.time.clone()));
        }
        let a = Arm::parse(&r.arm).ok_or_else(|| Error::Parse(format!("unknown arm `{}`", r.arm)))?;
        if !arms.contains(&a) {
            arms.push(a);
        }
    }
    if rows.len() != times.len() * arms.len() {
        return Err(Error::Parse("weak-value csv is not a full time × arm table".into()));
    }
    let cells = rows
        .chunks(arms.len())
        .map(|chunk| {
            chunk
                .iter()
                .map(|r| match (r.orthogonal, r.re, r.im) {
                    (true, _, _) => Ok(WeakCell::Orthogonal),
                    (false, Some(re), Some(im)) => Ok(WeakCell::Value(C64::new(re, im))),
                    _ => Err(Error::Parse(format!("missing weak value at {} {}", r.time, r.arm))),
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    Ok(WeakTraceMap { arms, times, cells })
}
