//! SVG 1.1 diagnostic plot of a calibration report: the image frame, every
//! principal line clipped to it, and the fitted principal point.

use std::fmt::Write;

use crate::files::ReportFile;

const KEPT_STROKE: &str = "#1f5fa8";
const SCREENED_STROKE: &str = "#999999";
const PP_STROKE: &str = "#c0392b";

/// Renders `report`. The frame comes from `image_size`, else from the
/// report, else from twice the principal point.
pub fn render_svg(report: &ReportFile, image_size: Option<[u32; 2]>) -> String {
    let pp = &report.principal_point;
    let [w, h] = image_size
        .or(report.image_size)
        .filter(|s| s[0] > 0 && s[1] > 0)
        .unwrap_or_else(|| fallback_size(pp.u, pp.v));
    let (wf, hf) = (w as f64, h as f64);

    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\" standalone=\"no\"?>\n");
    out.push_str("<!DOCTYPE svg PUBLIC \"-//W3C//DTD SVG 1.1//EN\" \"http://www.w3.org/Graphics/SVG/1.1/DTD/svg11.dtd\">\n");
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">"
    );
    let _ = writeln!(
        out,
        "  <rect x=\"0\" y=\"0\" width=\"{w}\" height=\"{h}\" fill=\"#ffffff\" stroke=\"#000000\" stroke-width=\"1\"/>"
    );

    out.push_str("  <g id=\"principal-lines\" stroke-width=\"1.5\" fill=\"none\">\n");
    let mut kept = 0;
    for p in &report.patterns {
        let Some([a, b, c]) = p.line else { continue };
        let Some((p0, p1)) = clip_line(a, b, c, wf, hf) else { continue };
        let style = if p.screened {
            format!("stroke=\"{SCREENED_STROKE}\" stroke-dasharray=\"6,4\"")
        } else {
            kept += 1;
            format!("stroke=\"{KEPT_STROKE}\"")
        };
        let _ = writeln!(
            out,
            "    <line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" {style}><title>pattern {}</title></line>",
            num(p0.0),
            num(p0.1),
            num(p1.0),
            num(p1.1),
            p.id
        );
    }
    out.push_str("  </g>\n");

    if pp.u.is_finite() && pp.v.is_finite() {
        let (x, y) = (num(pp.u), num(pp.v));
        let _ = writeln!(
            out,
            "  <g id=\"principal-point\" stroke=\"{PP_STROKE}\" stroke-width=\"1.5\" fill=\"none\">\n    <circle cx=\"{x}\" cy=\"{y}\" r=\"5\"/>\n    <line x1=\"{}\" y1=\"{y}\" x2=\"{}\" y2=\"{y}\"/>\n    <line x1=\"{x}\" y1=\"{}\" x2=\"{x}\" y2=\"{}\"/>\n  </g>",
            num(pp.u - 9.0),
            num(pp.u + 9.0),
            num(pp.v - 9.0),
            num(pp.v + 9.0),
        );
    }
    if kept == 0 {
        let _ = writeln!(
            out,
            "  <text x=\"8\" y=\"18\" font-family=\"sans-serif\" font-size=\"14\" fill=\"{PP_STROKE}\">warning: no principal lines kept</text>"
        );
    }
    out.push_str("</svg>\n");
    out
}

fn fallback_size(u: f64, v: f64) -> [u32; 2] {
    let side = |x: f64| {
        if x.is_finite() && x > 0.0 {
            (2.0 * x).ceil().min(1e5) as u32
        } else {
            0
        }
    };
    match (side(u), side(v)) {
        (w, h) if w > 0 && h > 0 => [w, h],
        _ => [640, 480],
    }
}

/// Fixed three-decimal formatting keeps the output byte-stable.
fn num(x: f64) -> String {
    let s = format!("{x:.3}");
    if s == "-0.000" { "0.000".into() } else { s }
}

/// Segment of `a·x + b·y + c = 0` inside `[0, w] × [0, h]`
/// (Liang-Barsky on the parametrized line).
fn clip_line(a: f64, b: f64, c: f64, w: f64, h: f64) -> Option<((f64, f64), (f64, f64))> {
    let n = a.hypot(b);
    if !(n > 0.0) || !c.is_finite() {
        return None;
    }
    let (a, b, c) = (a / n, b / n, c / n);
    let (x0, y0) = (-a * c, -b * c);
    let (dx, dy) = (-b, a);
    let mut t0 = f64::NEG_INFINITY;
    let mut t1 = f64::INFINITY;
    for (p, q) in [(-dx, x0), (dx, w - x0), (-dy, y0), (dy, h - y0)] {
        if p.abs() < 1e-15 {
            if q < 0.0 {
                return None;
            }
            continue;
        }
        let r = q / p;
        if p < 0.0 {
            t0 = t0.max(r);
        } else {
            t1 = t1.min(r);
        }
    }
    if t0 > t1 {
        return None;
    }
    Some(((x0 + t0 * dx, y0 + t0 * dy), (x0 + t1 * dx, y0 + t1 * dy)))
}
