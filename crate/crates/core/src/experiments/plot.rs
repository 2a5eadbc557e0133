//! Minimal SVG line chart for sweep curves: mean with a +/- std band.

use std::fmt::Write as _;

use super::report::CurvePoint;

const W: f64 = 640.0;
const H: f64 = 400.0;
const PAD: f64 = 56.0;

pub fn curve_svg(points: &[CurvePoint], title: &str, x_label: &str) -> String {
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="24" text-anchor="middle" font-family="sans-serif" font-size="16">{}</text>"#,
        W / 2.0,
        escape(title)
    );
    if points.is_empty() {
        svg.push_str("</svg>\n");
        return svg;
    }

    let (x_min, x_max) = span(points.iter().map(|p| p.x));
    let (y_lo, y_hi) = span(points.iter().flat_map(|p| [p.mean - p.std, p.mean + p.std]));
    let y_min = (y_lo - 0.01).max(0.0);
    let y_max = (y_hi + 0.01).min(1.0);
    let sx = |x: f64| PAD + (x - x_min) / nonzero(x_max - x_min) * (W - 2.0 * PAD);
    let sy = |y: f64| H - PAD - (y - y_min) / nonzero(y_max - y_min) * (H - 2.0 * PAD);

    // Axes.
    let _ = writeln!(
        svg,
        r#"<path d="M{PAD},{} L{PAD},{} L{},{}" stroke="black" fill="none"/>"#,
        PAD,
        H - PAD,
        W - PAD,
        H - PAD
    );
    for i in 0..=4 {
        let y = y_min + (y_max - y_min) * i as f64 / 4.0;
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{:.1}" text-anchor="end" font-family="sans-serif" font-size="11">{:.3}</text>"#,
            PAD - 6.0,
            sy(y) + 4.0,
            y
        );
    }
    for p in points {
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="11">{}</text>"#,
            sx(p.x),
            H - PAD + 16.0,
            p.x
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="12">{}</text>"#,
        W / 2.0,
        H - 12.0,
        escape(x_label)
    );

    // Std band, then the mean line.
    let mut band = String::new();
    for p in points {
        let _ = write!(band, "{:.2},{:.2} ", sx(p.x), sy((p.mean + p.std).min(y_max)));
    }
    for p in points.iter().rev() {
        let _ = write!(band, "{:.2},{:.2} ", sx(p.x), sy((p.mean - p.std).max(y_min)));
    }
    let _ = writeln!(
        svg,
        r##"<polygon points="{}" fill="#9ecae1" opacity="0.5"/>"##,
        band.trim_end()
    );
    let line: Vec<String> = points
        .iter()
        .map(|p| format!("{:.2},{:.2}", sx(p.x), sy(p.mean)))
        .collect();
    let _ = writeln!(
        svg,
        r##"<polyline points="{}" fill="none" stroke="#08519c" stroke-width="2"/>"##,
        line.join(" ")
    );
    for p in points {
        let _ = writeln!(
            svg,
            r##"<circle cx="{:.2}" cy="{:.2}" r="3" fill="#08519c"/>"##,
            sx(p.x),
            sy(p.mean)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn span(it: impl Iterator<Item = f64>) -> (f64, f64) {
    it.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

fn nonzero(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        x
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
