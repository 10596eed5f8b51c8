//! Self-contained SVG plot of a detection curve.

use std::fmt::Write;

use ddsb_core::{ExpansionCurve, PhaseResult};

const WIDTH: f64 = 800.0;
const PANEL_HEIGHT: f64 = 200.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const GAP: f64 = 40.0;

struct Panel {
    top: f64,
    lo: f64,
    hi: f64,
}

impl Panel {
    fn new(top: f64, values: &[f64]) -> Self {
        let mut lo = values.iter().copied().fold(0.0f64, f64::min);
        let mut hi = values.iter().copied().fold(0.0f64, f64::max);
        if hi - lo < 1e-9 {
            lo -= 1.0;
            hi += 1.0;
        }
        Self { top, lo, hi }
    }

    fn y(&self, v: f64) -> f64 {
        self.top + PANEL_HEIGHT * (self.hi - v) / (self.hi - self.lo)
    }
}

fn x_of(frame: f64, frames: usize) -> f64 {
    let span = (frames.max(2) - 1) as f64;
    LEFT + (WIDTH - LEFT - RIGHT) * (frame - 1.0) / span
}

fn polyline(out: &mut String, points: &[(f64, f64)], colour: &str) {
    let pts: Vec<String> = points.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
    let _ = writeln!(out, r#"<polyline fill="none" stroke="{colour}" stroke-width="2" points="{}"/>"#, pts.join(" "));
}

fn axes(out: &mut String, p: &Panel, frames: usize, label: &str) {
    let (x0, x1) = (LEFT, WIDTH - RIGHT);
    let (y0, y1) = (p.top, p.top + PANEL_HEIGHT);
    let _ = writeln!(
        out,
        r##"<rect x="{x0}" y="{y0}" width="{}" height="{PANEL_HEIGHT}" fill="none" stroke="#444"/>"##,
        x1 - x0
    );
    if p.lo < 0.0 && p.hi > 0.0 {
        let yz = p.y(0.0);
        let _ = writeln!(
            out,
            r##"<line x1="{x0}" y1="{yz:.2}" x2="{x1}" y2="{yz:.2}" stroke="#bbb" stroke-dasharray="3,3"/>"##
        );
    }
    for (v, anchor_y) in [(p.hi, y0 + 4.0), (p.lo, y1)] {
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{anchor_y:.2}" font-size="11" text-anchor="end">{v:.2}</text>"#,
            x0 - 6.0
        );
    }
    let _ = writeln!(out, r#"<text x="{x0}" y="{:.2}" font-size="13">{label}</text>"#, y0 - 8.0);
    let step = ((frames as f64 / 10.0).ceil() as usize).max(1);
    let mut f = 1;
    while f <= frames {
        let x = x_of(f as f64, frames);
        let _ = writeln!(out, r##"<line x1="{x:.2}" y1="{y1}" x2="{x:.2}" y2="{:.2}" stroke="#444"/>"##, y1 + 4.0);
        let _ =
            writeln!(out, r#"<text x="{x:.2}" y="{:.2}" font-size="11" text-anchor="middle">{f}</text>"#, y1 + 16.0);
        f += step;
    }
}

/// Cumulative curve A on top, rates E below, ED/ES as vertical markers.
pub fn render_svg(curve: &ExpansionCurve, phase: &PhaseResult, title: &str) -> String {
    let frames = curve.frame_count();
    let height = TOP + 2.0 * PANEL_HEIGHT + GAP + 40.0;
    let top = Panel::new(TOP, &curve.cumulative);
    let bottom = Panel::new(TOP + PANEL_HEIGHT + GAP, &curve.rates);

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" viewBox="0 0 {WIDTH} {height}" font-family="sans-serif">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{LEFT}" y="20" font-size="14">{}</text>"#, escape(title));
    axes(&mut out, &top, frames, "A (cumulative expansion)");
    axes(&mut out, &bottom, frames, "E (expansion rate, transition m to m+1)");

    let a: Vec<(f64, f64)> =
        curve.cumulative.iter().enumerate().map(|(i, &v)| (x_of(i as f64 + 1.0, frames), top.y(v))).collect();
    polyline(&mut out, &a, "#1f77b4");
    // Rate m sits halfway between frames m and m+1.
    let e: Vec<(f64, f64)> =
        curve.rates.iter().enumerate().map(|(i, &v)| (x_of(i as f64 + 1.5, frames), bottom.y(v))).collect();
    polyline(&mut out, &e, "#2ca02c");

    if !phase.degenerate {
        let y_end = bottom.top + PANEL_HEIGHT;
        for (frame, name, colour) in [(phase.t_ed, "ED", "#d62728"), (phase.t_es, "ES", "#9467bd")] {
            let x = x_of(frame as f64, frames);
            let _ = writeln!(
                out,
                r#"<line x1="{x:.2}" y1="{TOP}" x2="{x:.2}" y2="{y_end:.2}" stroke="{colour}" stroke-width="1.5" stroke-dasharray="6,4"/>"#
            );
            let _ = writeln!(
                out,
                r#"<text x="{:.2}" y="{:.2}" font-size="12" fill="{colour}">{name} {frame}</text>"#,
                x + 4.0,
                TOP + 14.0
            );
        }
    } else {
        let _ =
            writeln!(out, r##"<text x="{:.2}" y="20" font-size="13" fill="#d62728">degenerate</text>"##, WIDTH - 120.0);
    }
    out.push_str("</svg>\n");
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use ddsb_core::discriminator::{cumulative_curve, find_phase_pair};

    #[test]
    fn svg_has_markers_and_both_curves() {
        let curve = cumulative_curve(&[-1.0, -1.0, -1.0, 1.0, 1.0]).unwrap();
        let phase = find_phase_pair(&curve).unwrap();
        let svg = render_svg(&curve, &phase, "a<b");
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("ED 1") && svg.contains("ES 4"));
        assert!(svg.contains("a&lt;b"));
    }

    #[test]
    fn flat_curve_is_marked_degenerate() {
        let curve = cumulative_curve(&[0.0, 0.0]).unwrap();
        let phase = find_phase_pair(&curve).unwrap();
        let svg = render_svg(&curve, &phase, "flat");
        assert!(svg.contains("degenerate"));
        assert!(!svg.contains("NaN"));
    }
}
