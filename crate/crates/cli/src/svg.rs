//! Minimal SVG line charts. The CSV tables are the contract; these renders
//! are a convenience for eyeballing runs without extra tooling.

use std::fmt::Write as _;

const WIDTH: f64 = 900.0;
const HEIGHT: f64 = 420.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 45.0;

const PALETTE: [&str; 6] = [
    "#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
];

/// Render one chart with a shared x axis (sample index) and a legend.
pub fn line_chart(title: &str, y_label: &str, series: &[(String, Vec<f64>)]) -> String {
    let mut y_min = f64::INFINITY;
    let mut y_max = f64::NEG_INFINITY;
    let mut x_max = 1.0_f64;
    for (_, values) in series {
        x_max = x_max.max(values.len().saturating_sub(1) as f64);
        for &v in values {
            if v.is_finite() {
                y_min = y_min.min(v);
                y_max = y_max.max(v);
            }
        }
    }
    if !y_min.is_finite() || !y_max.is_finite() {
        y_min = 0.0;
        y_max = 1.0;
    }
    if y_max - y_min < 1e-12 {
        y_max = y_min + 1.0;
    }
    let pad = 0.05 * (y_max - y_min);
    y_min -= pad;
    y_max += pad;

    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let x_of = |i: f64| MARGIN_LEFT + plot_w * i / x_max.max(1.0);
    let y_of = |v: f64| MARGIN_TOP + plot_h * (1.0 - (v - y_min) / (y_max - y_min));

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">"
    );
    let _ = writeln!(svg, "<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>");
    let _ = writeln!(
        svg,
        "<text x=\"{}\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\" text-anchor=\"middle\">{}</text>",
        WIDTH / 2.0,
        escape(title)
    );
    // Axes.
    let _ = writeln!(
        svg,
        "<line x1=\"{MARGIN_LEFT}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#444\"/>",
        HEIGHT - MARGIN_BOTTOM,
        WIDTH - MARGIN_RIGHT,
        HEIGHT - MARGIN_BOTTOM
    );
    let _ = writeln!(
        svg,
        "<line x1=\"{MARGIN_LEFT}\" y1=\"{MARGIN_TOP}\" x2=\"{MARGIN_LEFT}\" y2=\"{}\" stroke=\"#444\"/>",
        HEIGHT - MARGIN_BOTTOM
    );
    // Y tick labels at min / mid / max.
    for (frac, value) in [
        (0.0_f64, y_max),
        (0.5, 0.5 * (y_min + y_max)),
        (1.0, y_min),
    ] {
        let y = MARGIN_TOP + plot_h * frac;
        let _ = writeln!(
            svg,
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">{value:.3}</text>",
            MARGIN_LEFT - 6.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        svg,
        "<text x=\"16\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" transform=\"rotate(-90 16 {})\" text-anchor=\"middle\">{}</text>",
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        escape(y_label)
    );

    for (idx, (name, values)) in series.iter().enumerate() {
        let color = PALETTE[idx % PALETTE.len()];
        let mut points = String::new();
        for (i, &v) in values.iter().enumerate() {
            if v.is_finite() {
                let _ = write!(points, "{:.2},{:.2} ", x_of(i as f64), y_of(v));
            }
        }
        let _ = writeln!(
            svg,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.3\"/>",
            points.trim_end()
        );
        // Legend entry.
        let lx = MARGIN_LEFT + 10.0 + 170.0 * (idx as f64);
        let ly = HEIGHT - 12.0;
        let _ = writeln!(
            svg,
            "<line x1=\"{lx}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"{color}\" stroke-width=\"2\"/>",
            ly - 4.0,
            lx + 18.0,
            ly - 4.0
        );
        let _ = writeln!(
            svg,
            "<text x=\"{}\" y=\"{ly}\" font-family=\"sans-serif\" font-size=\"12\">{}</text>",
            lx + 24.0,
            escape(name)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chart_contains_every_series() {
        let svg = line_chart(
            "demo",
            "W",
            &[
                ("one".into(), vec![1.0, 2.0, 3.0]),
                ("two".into(), vec![3.0, 1.0, 2.0]),
            ],
        );
        assert!(svg.starts_with("<svg"));
        assert!(svg.contains("polyline"));
        assert!(svg.contains(">one<"));
        assert!(svg.contains(">two<"));
        assert!(svg.ends_with("</svg>\n"));
    }

    #[test]
    fn degenerate_inputs_do_not_panic() {
        let svg = line_chart("flat", "y", &[("c".into(), vec![5.0, 5.0])]);
        assert!(svg.contains("polyline"));
        let empty = line_chart("empty", "y", &[]);
        assert!(empty.starts_with("<svg"));
    }
}
