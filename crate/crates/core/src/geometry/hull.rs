use super::polygon::{ConvexPolygon, Pt};
use super::{Domain, SamplingDesign};
use crate::error::{invalid, Error, Result};

/// Closed convex hull of the sites (monotone chain in d = 2).
pub fn convex_hull(design: &SamplingDesign) -> Result<Domain> {
    match design.d() {
        1 => {
            let (lo, hi) = design
                .coords()
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
            Domain::interval(lo, hi)
        }
        2 => {
            let mut pts: Vec<Pt> = (0..design.n()).map(|i| [design.point(i)[0], design.point(i)[1]]).collect();
            if pts.len() < 3 {
                return Err(Error::Degenerate("need at least three sites for a planar hull".into()));
            }
            pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
            let cross = |o: Pt, a: Pt, b: Pt| (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
            let mut lower: Vec<Pt> = Vec::new();
            for &p in &pts {
                while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
                    lower.pop();
                }
                lower.push(p);
            }
            let mut upper: Vec<Pt> = Vec::new();
            for &p in pts.iter().rev() {
                while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
                    upper.pop();
                }
                upper.push(p);
            }
            lower.pop();
            upper.pop();
            lower.extend(upper);
            if lower.len() < 3 {
                return Err(Error::Degenerate("sites are collinear".into()));
            }
            Ok(Domain::Polygon(ConvexPolygon::new(lower)?))
        }
        d => Err(invalid(format!("convex hulls are only supported for d ≤ 2, got {d}"))),
    }
}
