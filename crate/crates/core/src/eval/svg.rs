//! Stand-alone SVG rendering of the CVGA grid.
//!
//! The nine cells are drawn at equal size, so both axes are piecewise linear.
//! Every patient gets a `<circle class="marker">`; each arm also gets a mean
//! dot and a standard-deviation ellipse.

use std::fmt::Write as _;

use super::compare::Summary;
use super::cvga::{CvgaRecord, X_RANGE, Y_RANGE};

const SIZE: f64 = 480.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_RIGHT: f64 = 150.0;
const MARGIN_BOTTOM: f64 = 60.0;

const X_EDGES: [f64; 4] = [110.0, 90.0, 70.0, 50.0];
const Y_EDGES: [f64; 4] = [110.0, 180.0, 300.0, 400.0];

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

const CELL_LABELS: [[&str; 3]; 3] = [["A", "Lower B", "Lower C"], ["Upper B", "B", "Lower D"], ["Upper C", "Upper D", "E"]];
const CELL_FILLS: [[&str; 3]; 3] =
    [["#e6f4e6", "#f1f7e0", "#fbf1dc"], ["#f1f7e0", "#f7f3dc", "#fbe6dc"], ["#fbf1dc", "#fbe6dc", "#f8d8d8"]];

/// Maps a value onto `[0, 1]` where each edge interval takes one third.
fn piecewise(v: f64, edges: &[f64; 4]) -> f64 {
    for k in 0..3 {
        let (a, b) = (edges[k], edges[k + 1]);
        let (lo, hi) = (a.min(b), a.max(b));
        if v >= lo && v <= hi {
            return (k as f64 + (v - a) / (b - a)) / 3.0;
        }
    }
    // values arrive clamped; anything else sticks to the nearest side
    if (v - edges[0]).abs() < (v - edges[3]).abs() {
        0.0
    } else {
        1.0
    }
}

fn px(x: f64) -> f64 {
    MARGIN_LEFT + SIZE * piecewise(x.clamp(X_RANGE.0, X_RANGE.1), &X_EDGES)
}

fn py(y: f64) -> f64 {
    MARGIN_TOP + SIZE * (1.0 - piecewise(y.clamp(Y_RANGE.0, Y_RANGE.1), &Y_EDGES))
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Arms appear in order of first occurrence.
fn arms(records: &[CvgaRecord]) -> Vec<&str> {
    let mut out: Vec<&str> = Vec::new();
    for r in records {
        if !out.contains(&r.arm.as_str()) {
            out.push(&r.arm);
        }
    }
    out
}

pub fn render_cvga_svg(records: &[CvgaRecord], title: &str) -> String {
    let width = MARGIN_LEFT + SIZE + MARGIN_RIGHT;
    let height = MARGIN_TOP + SIZE + MARGIN_BOTTOM;
    let cell = SIZE / 3.0;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#, MARGIN_LEFT + SIZE / 2.0, escape(title));

    for (row, labels) in CELL_LABELS.iter().enumerate() {
        for (col, label) in labels.iter().enumerate() {
            let x = MARGIN_LEFT + col as f64 * cell;
            let y = MARGIN_TOP + (2 - row) as f64 * cell;
            let _ = writeln!(
                s,
                r##"<rect class="zone" x="{x:.1}" y="{y:.1}" width="{cell:.1}" height="{cell:.1}" fill="{}" stroke="#888"/>"##,
                CELL_FILLS[row][col]
            );
            let _ = writeln!(s, r##"<text x="{:.1}" y="{:.1}" fill="#777">{label}</text>"##, x + 6.0, y + 16.0);
        }
    }

    for (k, v) in X_EDGES.iter().enumerate() {
        let x = MARGIN_LEFT + k as f64 * cell;
        let _ = writeln!(s, r#"<text x="{x:.1}" y="{:.1}" text-anchor="middle">{v}</text>"#, MARGIN_TOP + SIZE + 18.0);
    }
    for (k, v) in Y_EDGES.iter().enumerate() {
        let y = MARGIN_TOP + SIZE - k as f64 * cell;
        let label = if k == 3 { ">400".to_string() } else { v.to_string() };
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{label}</text>"#, MARGIN_LEFT - 6.0, y + 4.0);
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">Minimum BG [mg/dL]</text>"#,
        MARGIN_LEFT + SIZE / 2.0,
        MARGIN_TOP + SIZE + 44.0
    );
    let _ = writeln!(
        s,
        r#"<text x="18" y="{:.1}" text-anchor="middle" transform="rotate(-90 18 {:.1})">Maximum BG [mg/dL]</text>"#,
        MARGIN_TOP + SIZE / 2.0,
        MARGIN_TOP + SIZE / 2.0
    );

    for (i, arm) in arms(records).into_iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let points: Vec<&CvgaRecord> = records.iter().filter(|r| r.arm == arm).collect();
        let _ = writeln!(s, r#"<g class="arm" data-arm="{}">"#, escape(arm));
        for r in &points {
            let _ = writeln!(
                s,
                r#"<circle class="marker" data-patient="{}" cx="{:.2}" cy="{:.2}" r="4" fill="{color}" fill-opacity="0.75"/>"#,
                r.patient_id,
                px(r.x),
                py(r.y)
            );
        }
        let xs: Vec<f64> = points.iter().map(|r| r.x).collect();
        let ys: Vec<f64> = points.iter().map(|r| r.y).collect();
        let (sx, sy) = (Summary::of(&xs), Summary::of(&ys));
        let (x0, x1) = (px(sx.mean - sx.std), px(sx.mean + sx.std));
        let (y0, y1) = (py(sy.mean - sy.std), py(sy.mean + sy.std));
        let _ = writeln!(
            s,
            r#"<ellipse class="spread" cx="{:.2}" cy="{:.2}" rx="{:.2}" ry="{:.2}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            (x0 + x1) / 2.0,
            (y0 + y1) / 2.0,
            (x1 - x0).abs() / 2.0,
            (y1 - y0).abs() / 2.0
        );
        let _ =
            writeln!(s, r##"<circle class="mean" cx="{:.2}" cy="{:.2}" r="6" fill="{color}" stroke="#000"/>"##, px(sx.mean), py(sy.mean));
        let ly = MARGIN_TOP + 20.0 + 22.0 * i as f64;
        let lx = MARGIN_LEFT + SIZE + 20.0;
        let _ = writeln!(s, r#"<circle cx="{lx:.1}" cy="{ly:.1}" r="5" fill="{color}"/>"#);
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}">{}</text>"#, lx + 12.0, ly + 4.0, escape(arm));
        s.push_str("</g>\n");
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::CvgaZone;

    fn rec(id: u32, arm: &str, x: f64, y: f64) -> CvgaRecord {
        CvgaRecord { patient_id: id, arm: arm.into(), x, y, zone: crate::eval::cvga_zone(x, y) }
    }

    #[test]
    fn axes_are_piecewise() {
        assert_eq!(piecewise(110.0, &X_EDGES), 0.0);
        assert_eq!(piecewise(50.0, &X_EDGES), 1.0);
        assert!((piecewise(90.0, &X_EDGES) - 1.0 / 3.0).abs() < 1e-12);
        assert!((piecewise(240.0, &Y_EDGES) - 0.5).abs() < 1e-12);
        assert!(px(110.0) < px(50.0));
        assert!(py(400.0) < py(110.0));
    }

    #[test]
    fn one_marker_per_patient_and_arm() {
        let records: Vec<CvgaRecord> =
            (0..3).flat_map(|i| [rec(i, "conventional", 60.0 + 5.0 * i as f64, 300.0), rec(i, "rl", 95.0, 170.0 + i as f64)]).collect();
        let svg = render_cvga_svg(&records, "Scenario A");
        assert_eq!(svg.matches(r#"class="marker""#).count(), 6);
        assert_eq!(svg.matches(r#"class="mean""#).count(), 2);
        assert_eq!(svg.matches(r#"class="spread""#).count(), 2);
        assert_eq!(svg.matches(r#"class="zone""#).count(), 9);
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert_eq!(records[1].zone, CvgaZone::A);
    }

    #[test]
    fn labels_are_escaped() {
        let svg = render_cvga_svg(&[rec(0, "a<b", 100.0, 150.0)], "x & y");
        assert!(svg.contains("a&lt;b") && svg.contains("x &amp; y"));
    }
}
