//! Minimal line charts: mean macro F1 against train size, one series per
//! condition, on a fixed 800×500 canvas.

use std::fmt::Write;

use super::SummaryRow;

pub const WIDTH: f64 = 800.0;
pub const HEIGHT: f64 = 500.0;

const PLOT_LEFT: f64 = 60.0;
const PLOT_RIGHT: f64 = 540.0;
const PLOT_TOP: f64 = 40.0;
const PLOT_BOTTOM: f64 = 450.0;
const LEGEND_X: f64 = 555.0;

const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Renders `summary` (rows in condition order) as an SVG document.
pub fn learning_curves(title: &str, summary: &[SummaryRow]) -> String {
    let mut conditions: Vec<&str> = Vec::new();
    for row in summary {
        if !conditions.contains(&row.condition.as_str()) {
            conditions.push(&row.condition);
        }
    }
    let mut sizes: Vec<usize> = summary.iter().map(|r| r.train_size).collect();
    sizes.sort_unstable();
    sizes.dedup();
    let (lo, hi) = match (sizes.first(), sizes.last()) {
        (Some(&lo), Some(&hi)) if hi > lo => (lo as f64, hi as f64),
        (Some(&lo), _) => (lo as f64 - 1.0, lo as f64 + 1.0),
        _ => (0.0, 1.0),
    };
    let x = |size: usize| PLOT_LEFT + (size as f64 - lo) / (hi - lo) * (PLOT_RIGHT - PLOT_LEFT);
    let y = |f1: f64| PLOT_BOTTOM - f1.clamp(0.0, 1.0) * (PLOT_BOTTOM - PLOT_TOP);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif">"#
    );
    let _ = writeln!(svg, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="22" font-size="15" text-anchor="middle">{}</text>"#,
        (PLOT_LEFT + PLOT_RIGHT) / 2.0,
        escape(title)
    );

    for i in 0..=5 {
        let v = i as f64 / 5.0;
        let yy = y(v);
        let _ = writeln!(
            svg,
            r##"<line x1="{PLOT_LEFT}" y1="{yy:.1}" x2="{PLOT_RIGHT}" y2="{yy:.1}" stroke="#dddddd"/>"##
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" font-size="11" text-anchor="end">{v:.1}</text>"#,
            PLOT_LEFT - 6.0,
            yy + 4.0
        );
    }
    for &size in &sizes {
        let xx = x(size);
        let _ = writeln!(
            svg,
            r#"<line x1="{xx:.1}" y1="{PLOT_BOTTOM}" x2="{xx:.1}" y2="{:.1}" stroke="black"/>"#,
            PLOT_BOTTOM + 5.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{xx:.1}" y="{:.1}" font-size="11" text-anchor="middle">{size}</text>"#,
            PLOT_BOTTOM + 18.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<polyline points="{PLOT_LEFT},{PLOT_TOP} {PLOT_LEFT},{PLOT_BOTTOM} {PLOT_RIGHT},{PLOT_BOTTOM}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" font-size="12" text-anchor="middle">train samples per patient</text>"#,
        (PLOT_LEFT + PLOT_RIGHT) / 2.0,
        HEIGHT - 14.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{:.1}" font-size="12" text-anchor="middle" transform="rotate(-90 16 {:.1})">macro F1</text>"#,
        (PLOT_TOP + PLOT_BOTTOM) / 2.0,
        (PLOT_TOP + PLOT_BOTTOM) / 2.0
    );

    let legend_step = ((PLOT_BOTTOM - PLOT_TOP) / conditions.len().max(1) as f64).min(16.0);
    for (i, condition) in conditions.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let dash = if i >= PALETTE.len() { r#" stroke-dasharray="5,3""# } else { "" };
        let points: Vec<String> = summary
            .iter()
            .filter(|r| r.condition == *condition && r.mean_macro_f1.is_finite())
            .map(|r| format!("{:.1},{:.1}", x(r.train_size), y(r.mean_macro_f1)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"{dash}/>"#,
            points.join(" ")
        );
        let ly = PLOT_TOP + legend_step * i as f64 + 6.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{LEGEND_X}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"{dash}/>"#,
            LEGEND_X + 18.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" font-size="10">{}</text>"#,
            LEGEND_X + 24.0,
            ly + 3.5,
            escape(condition)
        );
    }
    svg.push_str("</svg>\n");
    svg
}
