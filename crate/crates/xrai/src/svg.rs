//! Minimal deterministic SVG emission for the two plot shapes the crate
//! needs: scatter plots and overlaid line charts. No external renderer;
//! fixed canvas, fixed float formatting.

use std::fmt::Write as _;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 56.0;

pub struct Series<'a> {
    pub label: &'a str,
    pub color: &'a str,
    pub points: Vec<(f64, f64)>,
}

pub const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

fn scale(v: f64, lo: f64, hi: f64, out_lo: f64, out_hi: f64) -> f64 {
    if hi <= lo {
        return (out_lo + out_hi) / 2.0;
    }
    out_lo + (v - lo) / (hi - lo) * (out_hi - out_lo)
}

fn header(title: &str, x_label: &str, y_label: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">"
    );
    let _ = writeln!(s, "<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>");
    let _ = writeln!(
        s,
        "<text x=\"{:.1}\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\" text-anchor=\"middle\">{title}</text>",
        WIDTH / 2.0
    );
    let _ = writeln!(
        s,
        "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">{x_label}</text>",
        WIDTH / 2.0,
        HEIGHT - 12.0
    );
    let _ = writeln!(
        s,
        "<text x=\"16\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 16 {:.1})\">{y_label}</text>",
        HEIGHT / 2.0,
        HEIGHT / 2.0
    );
    // Plot frame.
    let _ = writeln!(
        s,
        "<rect x=\"{MARGIN}\" y=\"{MARGIN}\" width=\"{:.1}\" height=\"{:.1}\" fill=\"none\" stroke=\"#444\"/>",
        WIDTH - 2.0 * MARGIN,
        HEIGHT - 2.0 * MARGIN
    );
    s
}

fn axis_ticks(s: &mut String, x_range: (f64, f64), y_range: (f64, f64)) {
    for i in 0..=4 {
        let t = i as f64 / 4.0;
        let xv = x_range.0 + t * (x_range.1 - x_range.0);
        let yv = y_range.0 + t * (y_range.1 - y_range.0);
        let xp = scale(xv, x_range.0, x_range.1, MARGIN, WIDTH - MARGIN);
        let yp = scale(yv, y_range.0, y_range.1, HEIGHT - MARGIN, MARGIN);
        let _ = writeln!(
            s,
            "<text x=\"{xp:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"middle\">{xv:.2}</text>",
            HEIGHT - MARGIN + 16.0
        );
        let _ = writeln!(
            s,
            "<text x=\"{:.1}\" y=\"{yp:.1}\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"end\">{yv:.2}</text>",
            MARGIN - 6.0
        );
    }
}

/// Overlaid line chart; one polyline per series plus a legend.
pub fn line_chart(
    title: &str,
    x_label: &str,
    y_label: &str,
    x_range: (f64, f64),
    y_range: (f64, f64),
    series: &[Series],
) -> String {
    let mut s = header(title, x_label, y_label);
    axis_ticks(&mut s, x_range, y_range);
    for sr in series {
        let mut path = String::new();
        for (x, y) in &sr.points {
            let xp = scale(*x, x_range.0, x_range.1, MARGIN, WIDTH - MARGIN);
            let yp = scale(*y, y_range.0, y_range.1, HEIGHT - MARGIN, MARGIN);
            let _ = write!(path, "{xp:.2},{yp:.2} ");
        }
        let _ = writeln!(
            s,
            "<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\" points=\"{}\"/>",
            sr.color,
            path.trim_end()
        );
    }
    for (i, sr) in series.iter().enumerate() {
        let y = MARGIN + 16.0 + 16.0 * i as f64;
        let _ = writeln!(
            s,
            "<line x1=\"{:.1}\" y1=\"{y:.1}\" x2=\"{:.1}\" y2=\"{y:.1}\" stroke=\"{}\" stroke-width=\"2\"/>",
            WIDTH - MARGIN - 140.0,
            WIDTH - MARGIN - 116.0,
            sr.color
        );
        let _ = writeln!(
            s,
            "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"11\">{}</text>",
            WIDTH - MARGIN - 110.0,
            y + 4.0,
            sr.label
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Scatter plot with per-point colors.
pub fn scatter(
    title: &str,
    x_label: &str,
    y_label: &str,
    x_range: (f64, f64),
    y_range: (f64, f64),
    points: &[(f64, f64, &str)],
) -> String {
    let mut s = header(title, x_label, y_label);
    axis_ticks(&mut s, x_range, y_range);
    for (x, y, color) in points {
        let xp = scale(*x, x_range.0, x_range.1, MARGIN, WIDTH - MARGIN);
        let yp = scale(*y, y_range.0, y_range.1, HEIGHT - MARGIN, MARGIN);
        let _ = writeln!(
            s,
            "<circle cx=\"{xp:.2}\" cy=\"{yp:.2}\" r=\"2.5\" fill=\"{color}\" fill-opacity=\"0.7\"/>"
        );
    }
    s.push_str("</svg>\n");
    s
}
