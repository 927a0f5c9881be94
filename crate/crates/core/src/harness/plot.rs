use std::fmt::Write as _;
use std::path::Path;

use super::aggregate::AggregateCurve;
use crate::{Error, Result};

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 180.0;
const TOP: f64 = 20.0;
const BOTTOM: f64 = 50.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Renders curves as a standalone SVG: one polyline and shaded 99% band per curve, plus a legend.
pub fn render_svg(curves: &[AggregateCurve], log_y: bool) -> Result<String> {
    if curves.is_empty() {
        return Err(Error::InvalidParameter("nothing to plot".into()));
    }
    let floor = curves
        .iter()
        .flat_map(|c| {
            c.stat
                .iter()
                .zip(&c.half_width)
                .map(|(v, h)| v - h)
                .chain(c.stat.iter().copied())
        })
        .filter(|v| *v > 0.0 && v.is_finite())
        .fold(f64::INFINITY, f64::min);
    let floor = if floor.is_finite() { floor } else { 1e-12 };
    let ty = |v: f64| if log_y { v.max(floor).log10() } else { v };

    let (mut x0, mut x1, mut y0, mut y1) = (
        f64::INFINITY,
        f64::NEG_INFINITY,
        f64::INFINITY,
        f64::NEG_INFINITY,
    );
    for c in curves {
        for ((&s, &v), &h) in c.steps.iter().zip(&c.stat).zip(&c.half_width) {
            x0 = x0.min(s as f64);
            x1 = x1.max(s as f64);
            for y in [ty(v - h), ty(v + h)] {
                if y.is_finite() {
                    y0 = y0.min(y);
                    y1 = y1.max(y);
                }
            }
        }
    }
    if !x0.is_finite() || !y0.is_finite() {
        return Err(Error::InvalidParameter(
            "curves contain no finite points".into(),
        ));
    }
    if x1 == x0 {
        x1 = x0 + 1.0;
    }
    if y1 == y0 {
        y1 = y0 + 1.0;
    }
    let (pw, ph) = (WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM);
    let px = |s: f64| LEFT + (s - x0) / (x1 - x0) * pw;
    let py = |y: f64| TOP + (1.0 - (y - y0) / (y1 - y0)) * ph;

    let mut svg = String::new();
    let _ = writeln!(svg, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(
        svg,
        r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );
    let _ = writeln!(
        svg,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let xs = x0 + f * (x1 - x0);
        let ys = y0 + f * (y1 - y0);
        let ylab = if log_y {
            format!("1e{ys:.1}")
        } else {
            format!("{ys:.3e}")
        };
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{xs:.0}</text>"#,
            px(xs),
            HEIGHT - BOTTOM + 18.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{ylab}</text>"#,
            LEFT - 6.0,
            py(ys) + 4.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">step</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 10.0
    );

    for (i, c) in curves.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let upper: Vec<String> = c
            .steps
            .iter()
            .zip(&c.stat)
            .zip(&c.half_width)
            .map(|((&s, &v), &h)| format!("{:.2},{:.2}", px(s as f64), py(ty(v + h))))
            .collect();
        let lower: Vec<String> = c
            .steps
            .iter()
            .zip(&c.stat)
            .zip(&c.half_width)
            .rev()
            .map(|((&s, &v), &h)| format!("{:.2},{:.2}", px(s as f64), py(ty(v - h))))
            .collect();
        let line: Vec<String> = c
            .steps
            .iter()
            .zip(&c.stat)
            .map(|(&s, &v)| format!("{:.2},{:.2}", px(s as f64), py(ty(v))))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polygon points="{} {}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#,
            upper.join(" "),
            lower.join(" ")
        );
        let _ = writeln!(
            svg,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            line.join(" ")
        );
        let ly = TOP + 16.0 + 18.0 * i as f64;
        let lx = WIDTH - RIGHT + 12.0;
        let _ = writeln!(
            svg,
            r#"<g class="legend"><line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">{}</text></g>"#,
            lx + 20.0,
            lx + 26.0,
            ly + 4.0,
            escape(&c.label)
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Writes the SVG; nothing is created on error.
pub fn plot_emit(curves: &[AggregateCurve], path: impl AsRef<Path>, log_y: bool) -> Result<()> {
    let svg = render_svg(curves, log_y)?;
    std::fs::write(path, svg)?;
    Ok(())
}
