//! Minimal hand-written SVG charts.

use std::fmt::Write;

const W: f64 = 640.0;
const H: f64 = 400.0;
const PAD: f64 = 50.0;

fn header(title: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\">{}</text>\n",
        W / 2.0,
        escape(title)
    )
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn axes(svg: &mut String) {
    let _ = writeln!(
        svg,
        "<line x1=\"{PAD}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n<line x1=\"{PAD}\" y1=\"{PAD}\" x2=\"{PAD}\" y2=\"{}\" stroke=\"black\"/>",
        H - PAD,
        W - PAD,
        H - PAD,
        H - PAD
    );
}

/// Bar chart of `values` with one label per bar.
pub fn bar_chart(title: &str, labels: &[String], values: &[f64]) -> String {
    let mut svg = header(title);
    axes(&mut svg);
    let max = values.iter().copied().fold(0.0, f64::max).max(1e-300);
    let slot = (W - 2.0 * PAD) / values.len().max(1) as f64;
    for (k, (&v, label)) in values.iter().zip(labels).enumerate() {
        let h = (H - 2.0 * PAD) * v / max;
        let x = PAD + k as f64 * slot;
        let _ = writeln!(
            svg,
            "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"steelblue\"><title>{} {:e}</title></rect>",
            x + 0.1 * slot,
            H - PAD - h,
            0.8 * slot,
            h,
            escape(label),
            v
        );
        let _ = writeln!(
            svg,
            "<text x=\"{:.2}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">{}</text>",
            x + 0.5 * slot,
            H - PAD + 14.0,
            escape(label)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// Heatmap of a `rows x cols` grid in row-major order; white is zero.
pub fn heatmap(title: &str, rows: usize, cols: usize, values: &[f64]) -> String {
    let mut svg = header(title);
    let max = values.iter().copied().fold(0.0, f64::max).max(1e-300);
    let cell = ((W - 2.0 * PAD) / cols.max(1) as f64).min((H - 2.0 * PAD) / rows.max(1) as f64);
    for i in 0..rows {
        for j in 0..cols {
            let v = values[i * cols + j];
            let shade = (255.0 * (1.0 - v / max)).round() as u8;
            let _ = writeln!(
                svg,
                "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{cell:.2}\" height=\"{cell:.2}\" fill=\"rgb({shade},{shade},255)\" stroke=\"#ccc\"><title>({}, {}) {:e}</title></rect>",
                PAD + j as f64 * cell,
                PAD + i as f64 * cell,
                i + 1,
                j + 1,
                v
            );
        }
    }
    svg.push_str("</svg>\n");
    svg
}

/// Categorical map of a grid; `classes[k]` indexes `palette`, `None` is blank.
pub fn category_map(title: &str, rows: usize, cols: usize, classes: &[Option<usize>], legend: &[(&str, &str)]) -> String {
    let mut svg = header(title);
    let cell = ((W - 2.0 * PAD - 120.0) / cols.max(1) as f64).min((H - 2.0 * PAD) / rows.max(1) as f64);
    for i in 0..rows {
        for j in 0..cols {
            let fill = classes[i * cols + j].map_or("white", |k| legend[k].1);
            let _ = writeln!(
                svg,
                "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{cell:.2}\" height=\"{cell:.2}\" fill=\"{fill}\" stroke=\"#999\"/>",
                PAD + j as f64 * cell,
                PAD + i as f64 * cell
            );
        }
    }
    for (k, (name, color)) in legend.iter().enumerate() {
        let y = PAD + 20.0 * k as f64;
        let _ = writeln!(
            svg,
            "<rect x=\"{}\" y=\"{y}\" width=\"12\" height=\"12\" fill=\"{color}\"/><text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\">{}</text>",
            W - 140.0,
            W - 122.0,
            y + 11.0,
            escape(name)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// Polyline through `(x, y)` points with linear axes.
pub fn line_plot(title: &str, xs: &[f64], ys: &[f64]) -> String {
    let mut svg = header(title);
    axes(&mut svg);
    let finite: Vec<(f64, f64)> = xs.iter().zip(ys).filter(|(_, y)| y.is_finite()).map(|(&x, &y)| (x, y)).collect();
    if finite.is_empty() {
        svg.push_str("</svg>\n");
        return svg;
    }
    let (x0, x1) = finite.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |a, p| (a.0.min(p.0), a.1.max(p.0)));
    let (y0, y1) = finite.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |a, p| (a.0.min(p.1), a.1.max(p.1)));
    let sx = |x: f64| PAD + (W - 2.0 * PAD) * if x1 > x0 { (x - x0) / (x1 - x0) } else { 0.5 };
    let sy = |y: f64| H - PAD - (H - 2.0 * PAD) * if y1 > y0 { (y - y0) / (y1 - y0) } else { 0.5 };
    let points: Vec<String> = finite.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
    let _ = writeln!(svg, "<polyline fill=\"none\" stroke=\"crimson\" stroke-width=\"2\" points=\"{}\"/>", points.join(" "));
    for &(x, y) in &finite {
        let _ = writeln!(svg, "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"crimson\"><title>{x} {y:e}</title></circle>", sx(x), sy(y));
    }
    let _ = writeln!(
        svg,
        "<text x=\"{PAD}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"10\">x {x0:.3} .. {x1:.3}, y {y0:.3e} .. {y1:.3e}</text>",
        H - 10.0
    );
    svg.push_str("</svg>\n");
    svg
}
