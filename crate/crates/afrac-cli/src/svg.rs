//! Minimal static SVG line charts for the plot-ready outputs.

use std::path::Path;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 56.0;
const PALETTE: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#7f7f7f"];

/// One polyline; points with `None` y break the line (gap markers).
pub struct Line<'a> {
    pub label: &'a str,
    pub points: Vec<(f64, Option<f64>)>,
}

/// Optional shaded band between two curves sharing x coordinates.
pub struct Band {
    pub low: Vec<(f64, f64)>,
    pub high: Vec<(f64, f64)>,
}

pub fn write_chart(
    path: &Path,
    title: &str,
    lines: &[Line],
    band: Option<&Band>,
) -> std::io::Result<()> {
    let mut xs: Vec<f64> = Vec::new();
    let mut ys: Vec<f64> = Vec::new();
    for line in lines {
        for (x, y) in &line.points {
            xs.push(*x);
            if let Some(y) = y {
                ys.push(*y);
            }
        }
    }
    if let Some(b) = band {
        for (x, y) in b.low.iter().chain(&b.high) {
            xs.push(*x);
            ys.push(*y);
        }
    }
    let (xmin, xmax) = bounds(&xs);
    let (ymin, ymax) = bounds(&ys);
    let sx = |x: f64| MARGIN + (x - xmin) / (xmax - xmin).max(1e-12) * (WIDTH - 2.0 * MARGIN);
    let sy = |y: f64| HEIGHT - MARGIN - (y - ymin) / (ymax - ymin).max(1e-12) * (HEIGHT - 2.0 * MARGIN);

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\" text-anchor=\"middle\">{}</text>\n",
        WIDTH / 2.0,
        escape(title)
    ));

    if let Some(b) = band {
        let mut d = String::from("M");
        for (x, y) in &b.low {
            d.push_str(&format!(" {:.2},{:.2}", sx(*x), sy(*y)));
        }
        for (x, y) in b.high.iter().rev() {
            d.push_str(&format!(" L {:.2},{:.2}", sx(*x), sy(*y)));
        }
        d.push_str(" Z");
        svg.push_str(&format!(
            "<path d=\"{d}\" fill=\"#d62728\" fill-opacity=\"0.15\" stroke=\"none\"/>\n"
        ));
    }

    // axes
    svg.push_str(&format!(
        "<line x1=\"{m}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"black\"/>\n<line x1=\"{m}\" y1=\"{t}\" x2=\"{m}\" y2=\"{b}\" stroke=\"black\"/>\n",
        m = MARGIN,
        b = HEIGHT - MARGIN,
        r = WIDTH - MARGIN,
        t = MARGIN
    ));
    for (pos, value, anchor) in [
        (sx(xmin), xmin, "start"),
        (sx(xmax), xmax, "end"),
    ] {
        svg.push_str(&format!(
            "<text x=\"{pos:.1}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"{anchor}\">{value:.0}</text>\n",
            HEIGHT - MARGIN + 18.0
        ));
    }
    for value in [ymin, ymax] {
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"end\">{value:.3}</text>\n",
            MARGIN - 6.0,
            sy(value) + 4.0
        ));
    }

    for (i, line) in lines.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let mut d = String::new();
        let mut pen_down = false;
        for (x, y) in &line.points {
            match y {
                Some(y) => {
                    d.push_str(if pen_down { " L" } else { " M" });
                    d.push_str(&format!(" {:.2},{:.2}", sx(*x), sy(*y)));
                    pen_down = true;
                }
                None => pen_down = false,
            }
        }
        if !d.is_empty() {
            svg.push_str(&format!(
                "<path d=\"{d}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>\n"
            ));
        }
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" fill=\"{color}\">{}</text>\n",
            WIDTH - MARGIN - 150.0,
            MARGIN + 16.0 * (i as f64 + 1.0),
            escape(line.label)
        ));
    }
    svg.push_str("</svg>\n");
    std::fs::write(path, svg)
}

fn bounds(values: &[f64]) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in values {
        lo = lo.min(*v);
        hi = hi.max(*v);
    }
    if !lo.is_finite() || !hi.is_finite() {
        (0.0, 1.0)
    } else if lo == hi {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
