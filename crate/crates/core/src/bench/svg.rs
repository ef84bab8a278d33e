//! Oblique-projection scatter plot of a robustness field.

use std::fmt::Write;

use nalgebra::Vector3;

use crate::statics::normalize_robustness;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 40.0;

fn project(p: &Vector3<f64>) -> (f64, f64) {
    // cabinet projection: depth recedes up and to the right
    let (c, s) = (0.5 * 30f64.to_radians().cos(), 0.5 * 30f64.to_radians().sin());
    (p.x + c * p.y, p.z + s * p.y)
}

/// Dark for weak points, lighter as robustness grows.
fn color(feature: f64) -> (u8, u8, u8) {
    const RAMP: [(f64, f64, f64); 3] = [(70.0, 0.0, 40.0), (225.0, 90.0, 30.0), (255.0, 240.0, 160.0)];
    let t = feature.clamp(0.0, 1.0) * 2.0;
    let (a, b, f) = if t < 1.0 { (RAMP[0], RAMP[1], t) } else { (RAMP[1], RAMP[2], t - 1.0) };
    let mix = |x: f64, y: f64| (x + (y - x) * f).round() as u8;
    (mix(a.0, b.0), mix(a.1, b.1), mix(a.2, b.2))
}

/// Black for unbounded points, grey where the solver failed.
fn point_color(value: f64) -> (u8, u8, u8) {
    if value.is_nan() {
        (128, 128, 128)
    } else if value.is_infinite() {
        (0, 0, 0)
    } else {
        color(normalize_robustness(value))
    }
}

/// SVG of `points` coloured by their robustness `values` (N), `NaN` marking
/// failed points; drawn back to front.
pub fn render_field_svg(title: &str, points: &[Vector3<f64>], values: &[f64]) -> String {
    assert_eq!(points.len(), values.len(), "one value per point");
    let projected: Vec<(f64, f64)> = points.iter().map(project).collect();
    let (mut lo_u, mut hi_u, mut lo_v, mut hi_v) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(u, v) in &projected {
        lo_u = lo_u.min(u);
        hi_u = hi_u.max(u);
        lo_v = lo_v.min(v);
        hi_v = hi_v.max(v);
    }
    let span = (hi_u - lo_u).max(hi_v - lo_v).max(1e-9);
    let scale = ((WIDTH - 2.0 * MARGIN).min(HEIGHT - 2.0 * MARGIN)) / span;

    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| points[b].y.total_cmp(&points[a].y).then(a.cmp(&b)));

    let mut out = String::new();
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    )
    .unwrap();
    writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    writeln!(out, r#"<text x="{MARGIN}" y="24" font-family="sans-serif" font-size="16">{title}</text>"#).unwrap();
    for i in order {
        let (u, v) = projected[i];
        let x = MARGIN + (u - lo_u) * scale;
        let y = HEIGHT - MARGIN - (v - lo_v) * scale;
        let (r, g, b) = point_color(values[i]);
        writeln!(out, r#"<circle cx="{x:.2}" cy="{y:.2}" r="2.5" fill="rgb({r},{g},{b})"/>"#).unwrap();
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_one_circle_per_point() {
        let pts = vec![Vector3::new(0.0, 0.0, 0.0), Vector3::new(1.0, 0.5, 1.0), Vector3::new(0.5, 1.0, 0.0)];
        let svg = render_field_svg("demo", &pts, &[1.0, f64::INFINITY, f64::NAN]);
        assert!(svg.starts_with("<svg"));
        assert_eq!(svg.matches("<circle").count(), 3);
        assert!(svg.contains("rgb(0,0,0)") && svg.contains("rgb(128,128,128)"));
        assert_eq!(svg, render_field_svg("demo", &pts, &[1.0, f64::INFINITY, f64::NAN]));
    }

    #[test]
    fn higher_robustness_is_lighter() {
        let brightness = |v: f64| {
            let (r, g, b) = point_color(v);
            r as u32 + g as u32 + b as u32
        };
        assert!(brightness(0.5) < brightness(5.0));
        assert!(brightness(5.0) < brightness(500.0));
        assert_eq!(point_color(f64::INFINITY), (0, 0, 0));
    }
}
