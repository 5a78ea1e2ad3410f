//! Minimal SVG emitter for side-by-side log-scale error plots.

use std::fmt::Write;

const PANEL_W: f64 = 420.0;
const PANEL_H: f64 = 300.0;
const MARGIN_L: f64 = 60.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 30.0;
const MARGIN_B: f64 = 40.0;
const LEGEND_H: f64 = 24.0;

const PALETTE: [&str; 8] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"];

pub struct Series<'a> {
    pub label: &'a str,
    pub values: &'a [f64],
}

pub struct Panel<'a> {
    pub title: &'a str,
    pub series: Vec<Series<'a>>,
}

fn decade_range(panels: &[Panel<'_>]) -> (i32, i32) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in panels.iter().flat_map(|p| p.series.iter()).flat_map(|s| s.values.iter()) {
        if *v > 0.0 && v.is_finite() {
            lo = lo.min(*v);
            hi = hi.max(*v);
        }
    }
    if !lo.is_finite() {
        return (-1, 0);
    }
    let (a, b) = (lo.log10().floor() as i32, hi.log10().ceil() as i32);
    if a == b {
        (a - 1, b)
    } else {
        (a, b)
    }
}

/// Renders panels left to right with a shared log-y axis and a shared legend.
/// Non-positive values are dropped from the path (they cannot be shown on a
/// log axis).
pub fn render_log_panels(panels: &[Panel<'_>], x_label: &str) -> String {
    let (dlo, dhi) = decade_range(panels);
    let width = panels.len().max(1) as f64 * PANEL_W;
    let height = PANEL_H + LEGEND_H;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);

    let plot_w = PANEL_W - MARGIN_L - MARGIN_R;
    let plot_h = PANEL_H - MARGIN_T - MARGIN_B;
    let y_of = |v: f64| {
        let t = (v.log10() - dlo as f64) / (dhi - dlo) as f64;
        MARGIN_T + plot_h * (1.0 - t)
    };

    for (pi, panel) in panels.iter().enumerate() {
        let ox = pi as f64 * PANEL_W;
        let len = panel.series.iter().map(|s| s.values.len()).max().unwrap_or(0);
        let span = (len.saturating_sub(1)).max(1) as f64;
        let x_of = |k: usize| ox + MARGIN_L + plot_w * k as f64 / span;

        let _ = writeln!(
            out,
            r#"<rect x="{:.1}" y="{MARGIN_T}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"#,
            ox + MARGIN_L
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="13">{}</text>"#,
            ox + MARGIN_L + plot_w / 2.0,
            MARGIN_T - 10.0,
            escape(panel.title)
        );
        let step = ((dhi - dlo) as f64 / 8.0).ceil().max(1.0) as i32;
        let mut d = dlo;
        while d <= dhi {
            let y = y_of(10f64.powi(d));
            let _ = writeln!(
                out,
                r##"<line x1="{:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#dddddd"/><text x="{:.1}" y="{:.1}" text-anchor="end">1e{d}</text>"##,
                ox + MARGIN_L,
                ox + MARGIN_L + plot_w,
                ox + MARGIN_L - 4.0,
                y + 4.0
            );
            d += step;
        }
        for frac in [0.0, 0.25, 0.5, 0.75, 1.0] {
            let k = (frac * span).round() as usize;
            let _ = writeln!(
                out,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{k}</text>"#,
                x_of(k),
                MARGIN_T + plot_h + 14.0
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            ox + MARGIN_L + plot_w / 2.0,
            MARGIN_T + plot_h + 30.0,
            escape(x_label)
        );

        for (si, s) in panel.series.iter().enumerate() {
            let mut path = String::new();
            let mut pen_down = false;
            for (k, &v) in s.values.iter().enumerate() {
                if !(v > 0.0 && v.is_finite()) {
                    pen_down = false;
                    continue;
                }
                let cmd = if pen_down { 'L' } else { 'M' };
                let _ = write!(path, "{cmd}{:.2},{:.2} ", x_of(k), y_of(v));
                pen_down = true;
            }
            let _ = writeln!(
                out,
                r#"<path d="{}" fill="none" stroke="{}" stroke-width="1.5"/>"#,
                path.trim_end(),
                PALETTE[si % PALETTE.len()]
            );
        }
    }

    if let Some(first) = panels.first() {
        let mut x = MARGIN_L;
        let y = PANEL_H + LEGEND_H / 2.0;
        for (si, s) in first.series.iter().enumerate() {
            let _ = writeln!(
                out,
                r#"<line x1="{x:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="{}" stroke-width="2"/><text x="{:.1}" y="{:.1}">{}</text>"#,
                x + 18.0,
                PALETTE[si % PALETTE.len()],
                x + 22.0,
                y + 4.0,
                escape(s.label)
            );
            x += 30.0 + 7.0 * s.label.len() as f64;
        }
    }
    out.push_str("</svg>\n");
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
