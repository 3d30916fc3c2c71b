//! Static SVG frames of the boundary. All frames of a run share one viewBox,
//! computed from the global bounding box of every emitted state, so the
//! animation does not rescale between frames.

use aggpatch_core::Vec2;
use std::fmt::Write as _;

pub fn frame_name(step: usize) -> String {
    format!("frame_{step:06}.svg")
}

/// Smallest box containing every point of every frame.
pub fn global_bbox<'a>(frames: impl IntoIterator<Item = &'a [Vec2]>) -> Option<(Vec2, Vec2)> {
    let mut lo = Vec2::new(f64::INFINITY, f64::INFINITY);
    let mut hi = Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    let mut any = false;
    for pts in frames {
        for p in pts {
            lo = Vec2::new(lo.x.min(p.x), lo.y.min(p.y));
            hi = Vec2::new(hi.x.max(p.x), hi.y.max(p.y));
            any = true;
        }
    }
    any.then_some((lo, hi))
}

/// One closed boundary as a standalone SVG document. The y axis is flipped
/// (SVG y grows downward) and the viewBox pads `bbox` by 5 percent.
pub fn render(points: &[Vec2], bbox: (Vec2, Vec2), label: &str) -> String {
    let (lo, hi) = bbox;
    let span = (hi.x - lo.x).max(hi.y - lo.y).max(1e-12);
    let margin = 0.05 * span;
    let vx = lo.x - margin;
    let vy = -hi.y - margin;
    let vw = hi.x - lo.x + 2.0 * margin;
    let vh = hi.y - lo.y + 2.0 * margin;
    let stroke = 0.004 * span;

    let mut path = String::with_capacity(24 * (points.len() + 1));
    for p in points.iter().chain(points.first()) {
        let _ = write!(path, "{:.6},{:.6} ", p.x, -p.y);
    }
    let path = path.trim_end();

    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" \
         viewBox=\"{vx:.6} {vy:.6} {vw:.6} {vh:.6}\">\n\
         <title>{label}</title>\n\
         <polyline points=\"{path}\" fill=\"#c6dbef\" fill-opacity=\"0.6\" \
         stroke=\"#08519c\" stroke-width=\"{stroke:.6}\" stroke-linejoin=\"round\"/>\n\
         </svg>\n"
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_names_are_zero_padded() {
        assert_eq!(frame_name(0), "frame_000000.svg");
        assert_eq!(frame_name(1234), "frame_001234.svg");
    }

    #[test]
    fn bbox_covers_all_frames() {
        let a = [Vec2::new(-1.0, 0.0), Vec2::new(1.0, 0.5)];
        let b = [Vec2::new(0.0, -2.0)];
        let (lo, hi) = global_bbox([&a[..], &b[..]]).unwrap();
        assert_eq!(lo, Vec2::new(-1.0, -2.0));
        assert_eq!(hi, Vec2::new(1.0, 0.5));
        assert!(global_bbox(std::iter::empty()).is_none());
    }

    #[test]
    fn render_flips_y_and_pads_the_viewbox() {
        let pts = [Vec2::new(0.0, 1.0), Vec2::new(1.0, 0.0), Vec2::new(-1.0, 0.0)];
        let doc = render(&pts, (Vec2::new(-1.0, 0.0), Vec2::new(1.0, 1.0)), "s=0");
        // Marker (0, 1) appears at svg y = -1; viewBox top edge is -1 - 0.1.
        assert!(doc.contains("0.000000,-1.000000"), "{doc}");
        assert!(doc.contains("viewBox=\"-1.100000 -1.100000 2.200000 1.200000\""), "{doc}");
        assert!(doc.contains("<polyline"));
    }
}
