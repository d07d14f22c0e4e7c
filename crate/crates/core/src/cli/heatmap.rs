//! Minimal SVG rendering of an order × lag score map.

use std::fmt::Write;

const CELL: f64 = 44.0;
const MARGIN_LEFT: f64 = 64.0;
const MARGIN_TOP: f64 = 48.0;
const MARGIN_BOTTOM: f64 = 44.0;

/// Viridis control points, low to high.
const STOPS: [(f64, f64, f64); 5] = [
    (68.0, 1.0, 84.0),
    (59.0, 82.0, 139.0),
    (33.0, 145.0, 140.0),
    (94.0, 201.0, 98.0),
    (253.0, 231.0, 37.0),
];

fn color(t: f64) -> String {
    let t = t.clamp(0.0, 1.0) * (STOPS.len() - 1) as f64;
    let i = (t.floor() as usize).min(STOPS.len() - 2);
    let f = t - i as f64;
    let (a, b) = (STOPS[i], STOPS[i + 1]);
    let mix = |x: f64, y: f64| (x + (y - x) * f).round() as u8;
    format!("#{:02x}{:02x}{:02x}", mix(a.0, b.0), mix(a.1, b.1), mix(a.2, b.2))
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Rows are orders (top to bottom), columns lags. Unscored cells are grey
/// and the best cell is outlined.
pub fn render_svg(title: &str, orders: &[usize], lags: &[usize], rows: &[Vec<Option<f64>>]) -> String {
    let scores: Vec<f64> = rows.iter().flatten().flatten().copied().collect();
    let lo = scores.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = MARGIN_LEFT + CELL * lags.len() as f64 + 16.0;
    let height = MARGIN_TOP + CELL * orders.len() as f64 + MARGIN_BOTTOM;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(svg, r#"<text x="{MARGIN_LEFT}" y="20" font-size="13">{}</text>"#, escape(title));
    let mut best_drawn = false;
    for (i, (order, row)) in orders.iter().zip(rows).enumerate() {
        let y = MARGIN_TOP + CELL * i as f64;
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="end">{order}</text>"#,
            MARGIN_LEFT - 6.0,
            y + CELL / 2.0 + 4.0
        );
        for (j, cell) in row.iter().enumerate() {
            let x = MARGIN_LEFT + CELL * j as f64;
            let (fill, label) = match cell {
                Some(s) => {
                    let t = if hi > lo { (s - lo) / (hi - lo) } else { 0.5 };
                    (color(t), format!("{s:.2}"))
                }
                None => ("#d0d0d0".to_string(), String::new()),
            };
            let is_best = !best_drawn && *cell == Some(hi);
            best_drawn |= is_best;
            let stroke = if is_best { r##" stroke="#e41a1c" stroke-width="3""## } else { r##" stroke="#ffffff""## };
            let _ = writeln!(
                svg,
                r#"<rect x="{x}" y="{y}" width="{CELL}" height="{CELL}" fill="{fill}"{stroke}/>"#
            );
            if !label.is_empty() {
                let text = if cell.is_some_and(|s| hi > lo && (s - lo) / (hi - lo) > 0.6) { "#000000" } else { "#ffffff" };
                let _ = writeln!(
                    svg,
                    r#"<text x="{}" y="{}" text-anchor="middle" fill="{text}">{label}</text>"#,
                    x + CELL / 2.0,
                    y + CELL / 2.0 + 4.0
                );
            }
        }
    }
    let base = MARGIN_TOP + CELL * orders.len() as f64;
    for (j, lag) in lags.iter().enumerate() {
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="middle">{lag}</text>"#,
            MARGIN_LEFT + CELL * (j as f64 + 0.5),
            base + 16.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">lag</text>"#,
        MARGIN_LEFT + CELL * lags.len() as f64 / 2.0,
        base + 34.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="14" y="{}" transform="rotate(-90 14 {})" text-anchor="middle">order</text>"#,
        MARGIN_TOP + CELL * orders.len() as f64 / 2.0,
        MARGIN_TOP + CELL * orders.len() as f64 / 2.0
    );
    svg.push_str("</svg>\n");
    svg
}
