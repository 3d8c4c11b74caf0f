//! CSV and SVG rendering.

use crate::SweepOutput;

/// Shortest representation that parses back to the same `f64`.
pub fn csv_float(v: f64) -> String {
    format!("{v:?}")
}

/// Comma-separated rows with a header and `\n` line endings.
pub struct CsvTable {
    text: String,
}

impl CsvTable {
    pub fn new(header: &[&str]) -> Self {
        let mut text = header.join(",");
        text.push('\n');
        Self { text }
    }

    pub fn row(&mut self, fields: &[String]) {
        self.text.push_str(&fields.join(","));
        self.text.push('\n');
    }

    pub fn finish(self) -> String {
        self.text
    }
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 40.0;

/// `log10 p_hat` against `L` as a single polyline; rows with `p_hat = 0` are skipped.
pub fn sweep_svg(out: &SweepOutput) -> String {
    let pts: Vec<(f64, f64)> = out.rows.iter().filter(|r| r.p_hat > 0.0).map(|r| (r.length, r.p_hat.log10())).collect();
    let (x_lo, x_hi) = bounds(pts.iter().map(|p| p.0));
    let (y_lo, y_hi) = bounds(pts.iter().map(|p| p.1));
    let sx = |x: f64| MARGIN + (x - x_lo) / (x_hi - x_lo) * (WIDTH - 2.0 * MARGIN);
    let sy = |y: f64| HEIGHT - MARGIN - (y - y_lo) / (y_hi - y_lo) * (HEIGHT - 2.0 * MARGIN);
    let points: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
    let mut s = String::new();
    s.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    ));
    s.push_str(&format!(
        "<rect x=\"{MARGIN}\" y=\"{MARGIN}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#999\"/>\n",
        WIDTH - 2.0 * MARGIN,
        HEIGHT - 2.0 * MARGIN
    ));
    s.push_str(&format!(
        "<text x=\"{MARGIN}\" y=\"{}\" font-size=\"12\">L from {x_lo:.3} to {x_hi:.3}; log10 p_hat from {y_lo:.3} to {y_hi:.3}</text>\n",
        HEIGHT - 12.0
    ));
    s.push_str(&format!("<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"2\" points=\"{}\"/>\n", points.join(" ")));
    s.push_str("</svg>\n");
    s
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi - lo < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}
