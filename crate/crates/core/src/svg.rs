//! Plain-text SVG rendering of a phase diagram: accuracy gap against `n` on a
//! log axis, with the analytic retraining window shaded.

use std::fmt::Write;

use crate::experiments::PhaseDiagram;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 30.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

struct Axes {
    log_lo: f64,
    log_hi: f64,
    y_lo: f64,
    y_hi: f64,
}

impl Axes {
    fn x(&self, n: f64) -> f64 {
        let t = (n.log10() - self.log_lo) / (self.log_hi - self.log_lo);
        LEFT + t.clamp(0.0, 1.0) * (WIDTH - LEFT - RIGHT)
    }

    fn y(&self, v: f64) -> f64 {
        let t = (v - self.y_lo) / (self.y_hi - self.y_lo);
        HEIGHT - BOTTOM - t.clamp(0.0, 1.0) * (HEIGHT - TOP - BOTTOM)
    }
}

/// Renders the diagram as a standalone SVG document.
pub fn phase_diagram_svg(diagram: &PhaseDiagram) -> String {
    let ns: Vec<f64> = diagram.points.iter().map(|p| p.n as f64).collect();
    let n_min = ns.iter().copied().fold(f64::INFINITY, f64::min);
    let n_max = ns.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut log_lo = n_min.log10().floor();
    let mut log_hi = n_max.log10().ceil();
    if log_hi <= log_lo {
        log_lo -= 1.0;
        log_hi += 1.0;
    }

    let mut y_lo: f64 = 0.0;
    let mut y_hi: f64 = 0.0;
    for p in &diagram.points {
        if p.mean_gap.is_finite() {
            y_lo = y_lo.min(p.mean_gap - p.half_width);
            y_hi = y_hi.max(p.mean_gap + p.half_width);
        }
    }
    let pad = ((y_hi - y_lo) * 0.1).max(1e-3);
    let axes = Axes {
        log_lo,
        log_hi,
        y_lo: y_lo - pad,
        y_hi: y_hi + pad,
    };

    let mut svg = String::new();
    let _ = writeln!(svg, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(
        svg,
        r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );

    // analytic window
    let w = diagram.window;
    if w.n_high > 0.0 && w.n_low < w.n_high {
        let x0 = axes.x(w.n_low.max(10f64.powf(log_lo)));
        let x1 = axes.x(w.n_high.min(10f64.powf(log_hi)));
        if x1 > x0 {
            let _ = writeln!(
                svg,
                r##"<rect class="window" x="{x0:.2}" y="{TOP:.2}" width="{:.2}" height="{:.2}" fill="#cfe8cf" fill-opacity="0.6"/>"##,
                x1 - x0,
                HEIGHT - TOP - BOTTOM
            );
        }
    }

    // axes and ticks
    let (x_axis_y, plot_right) = (HEIGHT - BOTTOM, WIDTH - RIGHT);
    let _ = writeln!(
        svg,
        r#"<line x1="{LEFT}" y1="{x_axis_y}" x2="{plot_right}" y2="{x_axis_y}" stroke="black"/>"#
    );
    let _ = writeln!(
        svg,
        r#"<line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{x_axis_y}" stroke="black"/>"#
    );
    let mut decade = log_lo as i32;
    while decade <= log_hi as i32 {
        let x = axes.x(10f64.powi(decade));
        let _ = writeln!(
            svg,
            r#"<line x1="{x:.2}" y1="{x_axis_y}" x2="{x:.2}" y2="{:.2}" stroke="black"/>"#,
            x_axis_y + 5.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{x:.2}" y="{:.2}" font-size="12" text-anchor="middle">1e{decade}</text>"#,
            x_axis_y + 20.0
        );
        decade += 1;
    }
    for k in 0..=4 {
        let v = axes.y_lo + (axes.y_hi - axes.y_lo) * f64::from(k) / 4.0;
        let y = axes.y(v);
        let _ = writeln!(
            svg,
            r#"<line x1="{:.2}" y1="{y:.2}" x2="{LEFT}" y2="{y:.2}" stroke="black"/>"#,
            LEFT - 5.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="end">{v:.3}</text>"#,
            LEFT - 8.0,
            y + 4.0
        );
    }
    let zero = axes.y(0.0);
    let _ = writeln!(
        svg,
        r#"<line x1="{LEFT}" y1="{zero:.2}" x2="{plot_right}" y2="{zero:.2}" stroke="gray" stroke-dasharray="4 3"/>"#
    );

    // error bars and curve
    let mut path = Vec::new();
    for p in &diagram.points {
        if !p.mean_gap.is_finite() {
            continue;
        }
        let x = axes.x(p.n as f64);
        let y = axes.y(p.mean_gap);
        let (y_top, y_bot) = (axes.y(p.mean_gap + p.half_width), axes.y(p.mean_gap - p.half_width));
        let _ = writeln!(
            svg,
            r#"<line class="band" x1="{x:.2}" y1="{y_top:.2}" x2="{x:.2}" y2="{y_bot:.2}" stroke="steelblue"/>"#
        );
        let _ = writeln!(svg, r#"<circle cx="{x:.2}" cy="{y:.2}" r="3" fill="steelblue"/>"#);
        path.push(format!("{x:.2},{y:.2}"));
    }
    if !path.is_empty() {
        let _ = writeln!(
            svg,
            r#"<polyline class="gap" points="{}" fill="none" stroke="steelblue" stroke-width="2"/>"#,
            path.join(" ")
        );
    }

    let title = escape(&format!(
        "accuracy(retrained) - accuracy(initial), {:.0}% band; shaded: window [{:.3e}, {:.3e}]",
        (1.0 - diagram.alpha) * 100.0,
        w.n_low,
        w.n_high
    ));
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="24" font-size="13" text-anchor="middle">{title}</text>"#,
        WIDTH / 2.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" font-size="12" text-anchor="middle">training set size n (log scale)</text>"#,
        (LEFT + WIDTH - RIGHT) / 2.0,
        HEIGHT - 15.0
    );
    svg.push_str("</svg>\n");
    svg
}
