//! SVG line chart of mean efficiency against instance size, one line per method.

use std::fmt::Write;

use crate::bench::{aggregate, BenchRow};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 56.0;
const COLORS: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b",
];

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub method: String,
    pub points: Vec<(usize, f64)>,
}

/// Mean efficiency per (method, n); rows without an efficiency are skipped.
pub fn efficiency_series(rows: &[BenchRow]) -> Vec<Series> {
    let mut out: Vec<Series> = Vec::new();
    for a in aggregate(rows) {
        let (Some(n), Some(mean)) = (a.n, a.mean_efficiency) else {
            continue;
        };
        match out.iter_mut().find(|s| s.method == a.method) {
            Some(s) => s.points.push((n, mean)),
            None => out.push(Series {
                method: a.method,
                points: vec![(n, mean)],
            }),
        }
    }
    for s in &mut out {
        s.points.sort_by_key(|p| p.0);
    }
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

pub fn render_svg(series: &[Series], title: &str) -> String {
    let ns = series.iter().flat_map(|s| s.points.iter().map(|p| p.0));
    let (n_lo, n_hi) = ns.fold((usize::MAX, 0), |(lo, hi), n| (lo.min(n), hi.max(n)));
    let ys = series.iter().flat_map(|s| s.points.iter().map(|p| p.1));
    let y_min = ys.fold(1.0f64, f64::min);
    // round the floor down to a tenth so small gaps stay visible
    let y_lo = ((y_min * 10.0).floor() / 10.0).clamp(0.0, 0.9);
    let y_hi = 1.0;

    let plot_w = WIDTH - 2.0 * MARGIN;
    let plot_h = HEIGHT - 2.0 * MARGIN;
    let x_of = |n: usize| {
        if n_hi <= n_lo {
            MARGIN + plot_w / 2.0
        } else {
            MARGIN + plot_w * (n - n_lo) as f64 / (n_hi - n_lo) as f64
        }
    };
    let y_of = |v: f64| MARGIN + plot_h * (y_hi - v) / (y_hi - y_lo);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    let (x0, x1, y0, y1) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
    let _ = writeln!(
        svg,
        r#"<path d="M{x0},{y0} L{x0},{y1} L{x1},{y1}" fill="none" stroke="black"/>"#
    );
    for k in 0..=5 {
        let v = y_lo + (y_hi - y_lo) * k as f64 / 5.0;
        let y = y_of(v);
        let _ = writeln!(
            svg,
            r##"<line x1="{x0}" y1="{y:.1}" x2="{x1}" y2="{y:.1}" stroke="#ddd"/><text x="{}" y="{:.1}" text-anchor="end">{v:.2}</text>"##,
            x0 - 6.0,
            y + 4.0
        );
    }
    let mut sizes: Vec<usize> = series
        .iter()
        .flat_map(|s| s.points.iter().map(|p| p.0))
        .collect();
    sizes.sort_unstable();
    sizes.dedup();
    for n in &sizes {
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{}" text-anchor="middle">{n}</text>"#,
            x_of(*n),
            y1 + 18.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">n</text>"#,
        WIDTH / 2.0,
        HEIGHT - 12.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">mean efficiency</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0
    );
    for (k, s) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let pts: Vec<String> = s
            .points
            .iter()
            .map(|&(n, v)| format!("{:.1},{:.1}", x_of(n), y_of(v)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            pts.join(" ")
        );
        for &(n, v) in &s.points {
            let _ = writeln!(
                svg,
                r#"<circle cx="{:.1}" cy="{:.1}" r="3" fill="{color}"/>"#,
                x_of(n),
                y_of(v)
            );
        }
        let ly = MARGIN + 16.0 * k as f64;
        let _ = writeln!(
            svg,
            r#"<rect x="{}" y="{}" width="10" height="10" fill="{color}"/><text x="{}" y="{}">{}</text>"#,
            x1 - 130.0,
            ly - 9.0,
            x1 - 115.0,
            ly,
            escape(&s.method)
        );
    }
    svg.push_str("</svg>\n");
    svg
}
