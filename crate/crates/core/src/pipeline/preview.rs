use std::fmt::Write as _;

use crate::landmarks::topology::polylines;
use crate::landmarks::LandmarkSequence;

const MARGIN: f64 = 10.0;

/// Shared viewBox `(x, y, w, h)` covering every frame so previews line up.
pub fn view_box(seq: &LandmarkSequence) -> (f64, f64, f64, f64) {
    let (mut x0, mut y0) = (f64::INFINITY, f64::INFINITY);
    let (mut x1, mut y1) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in seq.data().chunks(2) {
        x0 = x0.min(p[0]);
        x1 = x1.max(p[0]);
        y0 = y0.min(p[1]);
        y1 = y1.max(p[1]);
    }
    (
        x0 - MARGIN,
        y0 - MARGIN,
        (x1 - x0).max(1e-6) + 2.0 * MARGIN,
        (y1 - y0).max(1e-6) + 2.0 * MARGIN,
    )
}

/// Wireframe of one frame: one `<polyline>` or `<polygon>` per facial part.
pub fn frame_svg(seq: &LandmarkSequence, m: usize, vb: (f64, f64, f64, f64)) -> String {
    let stroke = (vb.2.max(vb.3) / 300.0).max(1e-3);
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="{:.3} {:.3} {:.3} {:.3}">"#,
        vb.0, vb.1, vb.2, vb.3
    );
    let _ = writeln!(out, "<!-- frame {m} -->");
    for line in polylines() {
        let pts: Vec<String> = line
            .points
            .clone()
            .map(|p| {
                let (x, y) = seq.point(m, p);
                format!("{x:.3},{y:.3}")
            })
            .collect();
        let tag = if line.closed { "polygon" } else { "polyline" };
        let _ = writeln!(
            out,
            r#"<{tag} id="{}" points="{}" fill="none" stroke="black" stroke-width="{stroke:.4}"/>"#,
            line.name,
            pts.join(" ")
        );
    }
    out.push_str("</svg>\n");
    out
}
