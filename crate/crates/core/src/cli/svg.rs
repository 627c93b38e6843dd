//! Layered SVG overlays in raster pixel units.

use std::fmt::Write;

use super::document::Ring;

const GT_COLOR: &str = "#2ca02c";
const INITIAL_COLOR: &str = "#9e9e9e";
const FINAL_COLOR: &str = "#d62728";

/// One instance's layers.
#[derive(Debug, Clone, Default)]
pub struct SvgInstance {
    pub gt: Vec<Ring>,
    /// Initial contour first, final contour last; may be a single set.
    pub stages: Vec<Vec<Ring>>,
}

fn path(rings: &[Ring]) -> String {
    let mut d = String::new();
    for r in rings {
        for (k, [x, y]) in r.iter().enumerate() {
            let _ = write!(d, "{}{:.3} {:.3} ", if k == 0 { "M" } else { "L" }, x, y);
        }
        d.push_str("Z ");
    }
    d.trim_end().to_string()
}

fn layer(out: &mut String, rings: &[Ring], color: &str, width: f64, class: &str) {
    if rings.is_empty() {
        return;
    }
    let _ = writeln!(
        out,
        r#"  <path class="{class}" d="{}" fill="none" fill-rule="evenodd" stroke="{color}" stroke-width="{width}"/>"#,
        path(rings)
    );
}

/// Blue ramp for intermediate iterations, light to dark.
fn iteration_color(k: usize, count: usize) -> String {
    let t = if count <= 1 { 1.0 } else { k as f64 / (count - 1) as f64 };
    let lerp = |a: f64, b: f64| (a + (b - a) * t).round() as u8;
    format!("#{:02x}{:02x}{:02x}", lerp(158.0, 8.0), lerp(202.0, 48.0), lerp(225.0, 107.0))
}

/// Renders ground truth (green), initial (gray), intermediate iterations
/// (blue gradient) and final (red) contours.
pub fn render_svg(width: usize, height: usize, instances: &[SvgInstance]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#);
    let _ = writeln!(out, r#"  <rect width="{width}" height="{height}" fill="white"/>"#);
    for inst in instances {
        layer(&mut out, &inst.gt, GT_COLOR, 1.0, "gt");
        let n = inst.stages.len();
        if n >= 2 {
            layer(&mut out, &inst.stages[0], INITIAL_COLOR, 0.75, "initial");
            let mids = n.saturating_sub(2);
            for (k, stage) in inst.stages[1..n - 1].iter().enumerate() {
                layer(&mut out, stage, &iteration_color(k, mids), 0.5, "iteration");
            }
        }
        if let Some(last) = inst.stages.last() {
            layer(&mut out, last, FINAL_COLOR, 1.0, "final");
        }
    }
    out.push_str("</svg>\n");
    out
}
