//! Minimal SVG plots (heatmap, scatter, histogram) for inspecting results.

use std::fmt::Write;

const WIDTH: f64 = 480.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 40.0;

fn header(title: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"20\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\">{}</text>\n",
        WIDTH / 2.0,
        escape(title)
    )
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Maps `t ∈ [0, 1]` to a blue–white–red diverging color.
pub fn diverging_color(t: f64) -> String {
    let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 0.5 };
    let (r, g, b) = if t < 0.5 {
        let u = t / 0.5;
        (40.0 + 215.0 * u, 70.0 + 185.0 * u, 200.0 + 55.0 * u)
    } else {
        let u = (t - 0.5) / 0.5;
        (255.0, 255.0 - 200.0 * u, 255.0 - 215.0 * u)
    };
    format!("rgb({},{},{})", r as u8, g as u8, b as u8)
}

/// Linear map from data extent to plot coordinates.
struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        let span = (self.x1 - self.x0).max(f64::EPSILON);
        MARGIN + (x - self.x0) / span * (WIDTH - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        let span = (self.y1 - self.y0).max(f64::EPSILON);
        HEIGHT - MARGIN - (y - self.y0) / span * (HEIGHT - 2.0 * MARGIN)
    }
}

fn finite_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) =
        values.filter(|v| v.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if lo.is_finite() {
        (lo, hi)
    } else {
        (0.0, 1.0)
    }
}

/// Heatmap of a row-major `ny × nx` matrix over `[x0, x1] × [y0, y1]`, with
/// optional marker points drawn on top (e.g. training data, memorized point).
pub fn heatmap(
    title: &str,
    values: &[f64],
    nx: usize,
    ny: usize,
    extent: (f64, f64, f64, f64),
    markers: &[(f64, f64, &str)],
) -> String {
    let (x0, x1, y0, y1) = extent;
    let frame = Frame { x0, x1, y0, y1 };
    // Robust color limits: 2nd and 98th percentiles.
    let mut sorted: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let (lo, hi) = if sorted.is_empty() {
        (0.0, 1.0)
    } else {
        let q = |f: f64| sorted[((sorted.len() - 1) as f64 * f).round() as usize];
        (q(0.02), q(0.98))
    };
    let cw = (WIDTH - 2.0 * MARGIN) / nx as f64;
    let ch = (HEIGHT - 2.0 * MARGIN) / ny as f64;
    let mut out = header(title);
    for iy in 0..ny {
        for ix in 0..nx {
            let v = values[iy * nx + ix];
            let t = if hi > lo { (v - lo) / (hi - lo) } else { 0.5 };
            let _ = writeln!(
                out,
                "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"{}\"/>",
                MARGIN + ix as f64 * cw,
                HEIGHT - MARGIN - (iy + 1) as f64 * ch,
                cw + 0.3,
                ch + 0.3,
                diverging_color(t)
            );
        }
    }
    for (x, y, color) in markers {
        let _ = writeln!(
            out,
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2\" fill=\"{}\" fill-opacity=\"0.6\"/>",
            frame.px(*x),
            frame.py(*y),
            color
        );
    }
    let _ = writeln!(
        out,
        "<text x=\"{MARGIN}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\">color range [{lo:.3}, {hi:.3}]</text>",
        HEIGHT - 12.0
    );
    out.push_str("</svg>\n");
    out
}

/// Scatter plot of `(x, y)` points, each with its own color.
pub fn scatter(title: &str, points: &[(f64, f64, &str)], x_label: &str, y_label: &str) -> String {
    let (x0, x1) = finite_range(points.iter().map(|p| p.0));
    let (y0, y1) = finite_range(points.iter().map(|p| p.1));
    let frame = Frame { x0, x1, y0, y1 };
    let mut out = header(title);
    axes(&mut out, &frame, x_label, y_label);
    for (x, y, color) in points {
        if x.is_finite() && y.is_finite() {
            let _ = writeln!(
                out,
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2.5\" fill=\"{}\" fill-opacity=\"0.7\"/>",
                frame.px(*x),
                frame.py(*y),
                color
            );
        }
    }
    out.push_str("</svg>\n");
    out
}

/// Histogram of `values` with `bins` equal-width bins.
pub fn histogram(title: &str, values: &[f64], bins: usize, x_label: &str) -> String {
    let bins = bins.max(1);
    let (lo, hi) = finite_range(values.iter().copied());
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
    let mut counts = vec![0usize; bins];
    for v in values.iter().filter(|v| v.is_finite()) {
        let b = (((v - lo) / width) as usize).min(bins - 1);
        counts[b] += 1;
    }
    let max = counts.iter().copied().max().unwrap_or(1).max(1) as f64;
    let frame = Frame { x0: lo, x1: lo + width * bins as f64, y0: 0.0, y1: max };
    let mut out = header(title);
    axes(&mut out, &frame, x_label, "count");
    for (i, c) in counts.iter().enumerate() {
        let xa = frame.px(lo + i as f64 * width);
        let xb = frame.px(lo + (i + 1) as f64 * width);
        let ya = frame.py(*c as f64);
        let _ = writeln!(
            out,
            "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"steelblue\"/>",
            xa,
            ya,
            (xb - xa - 0.5).max(0.5),
            frame.py(0.0) - ya
        );
    }
    out.push_str("</svg>\n");
    out
}

fn axes(out: &mut String, frame: &Frame, x_label: &str, y_label: &str) {
    let (bx, by) = (MARGIN, HEIGHT - MARGIN);
    let _ = writeln!(
        out,
        "<line x1=\"{bx}\" y1=\"{by}\" x2=\"{}\" y2=\"{by}\" stroke=\"black\"/>\n\
         <line x1=\"{bx}\" y1=\"{by}\" x2=\"{bx}\" y2=\"{MARGIN}\" stroke=\"black\"/>",
        WIDTH - MARGIN
    );
    let _ = writeln!(
        out,
        "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">{} [{:.3}, {:.3}]</text>",
        WIDTH / 2.0,
        HEIGHT - 8.0,
        escape(x_label),
        frame.x0,
        frame.x1
    );
    let _ = writeln!(
        out,
        "<text x=\"12\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" transform=\"rotate(-90 12 {})\" text-anchor=\"middle\">{} [{:.3}, {:.3}]</text>",
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        escape(y_label),
        frame.y0,
        frame.y1
    );
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heatmap_has_one_cell_per_value() {
        let svg = heatmap("t", &[0.0, 1.0, 2.0, 3.0, 4.0, 5.0], 3, 2, (0.0, 1.0, 0.0, 1.0), &[(0.5, 0.5, "black")]);
        assert_eq!(svg.matches("<rect x=").count(), 6);
        assert_eq!(svg.matches("<circle").count(), 1);
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn histogram_counts_all_values() {
        let svg = histogram("h", &[0.0, 0.1, 0.9, 1.0, f64::NAN], 2, "x");
        assert_eq!(svg.matches("fill=\"steelblue\"").count(), 2);
    }

    #[test]
    fn colors_are_clamped() {
        assert_eq!(diverging_color(-3.0), diverging_color(0.0));
        assert_eq!(diverging_color(f64::NAN), diverging_color(0.5));
    }
}
