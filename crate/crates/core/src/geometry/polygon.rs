//! Convex polygons: clipping, areas, widths.

use crate::error::{invalid, Error, Result};

/// On-edge classification tolerance used by clipping.
pub const CLIP_EPS: f64 = 1e-12;

pub type Pt = [f64; 2];

#[derive(Debug, Clone, PartialEq)]
pub struct ConvexPolygon {
    verts: Vec<Pt>,
}

fn cross(o: Pt, a: Pt, b: Pt) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

fn dist(a: Pt, b: Pt) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Shoelace area with Kahan-compensated summation (signed, positive for ccw).
pub fn signed_area(verts: &[Pt]) -> f64 {
    let n = verts.len();
    if n < 3 {
        return 0.0;
    }
    // translate to the first vertex to limit cancellation
    let o = verts[0];
    let mut sum = 0.0;
    let mut comp = 0.0;
    for i in 1..n - 1 {
        let term = cross(o, verts[i], verts[i + 1]);
        let y = term - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    0.5 * sum
}

impl ConvexPolygon {
    /// Builds a polygon from counterclockwise vertices, checking convexity.
    pub fn new(verts: Vec<Pt>) -> Result<Self> {
        if verts.len() < 3 {
            return Err(Error::Degenerate("polygon needs at least three vertices".into()));
        }
        if verts.iter().flatten().any(|v| !v.is_finite()) {
            return Err(invalid("polygon vertices must be finite"));
        }
        let n = verts.len();
        let scale = verts.iter().map(|v| v[0].abs().max(v[1].abs())).fold(1.0, f64::max);
        for i in 0..n {
            let c = cross(verts[i], verts[(i + 1) % n], verts[(i + 2) % n]);
            if c < -1e-12 * scale * scale {
                return Err(invalid("polygon is not convex and counterclockwise"));
            }
        }
        let poly = Self { verts };
        if poly.area() <= 0.0 {
            return Err(Error::Degenerate("polygon has zero area".into()));
        }
        Ok(poly)
    }

    pub fn rectangle(lo: Pt, hi: Pt) -> Result<Self> {
        if !(hi[0] > lo[0] && hi[1] > lo[1]) {
            return Err(Error::Degenerate("rectangle must have positive side lengths".into()));
        }
        Self::new(vec![lo, [hi[0], lo[1]], hi, [lo[0], hi[1]]])
    }

    pub fn vertices(&self) -> &[Pt] {
        &self.verts
    }

    pub fn is_empty(&self) -> bool {
        self.verts.len() < 3
    }

    pub fn area(&self) -> f64 {
        signed_area(&self.verts).max(0.0)
    }

    pub fn translate(&self, h: Pt) -> Self {
        Self { verts: self.verts.iter().map(|v| [v[0] + h[0], v[1] + h[1]]).collect() }
    }

    /// Keeps the part with `n·x ≤ c` (Sutherland–Hodgman against one half-plane).
    pub fn clip_halfplane(&self, n: Pt, c: f64) -> Self {
        let m = self.verts.len();
        if m == 0 {
            return self.clone();
        }
        let scale = n[0].abs().max(n[1].abs()).max(c.abs()).max(1.0);
        let side = |p: Pt| n[0] * p[0] + n[1] * p[1] - c;
        let mut out = Vec::with_capacity(m + 1);
        for i in 0..m {
            let p = self.verts[i];
            let q = self.verts[(i + 1) % m];
            let (sp, sq) = (side(p), side(q));
            let p_in = sp <= CLIP_EPS * scale;
            let q_in = sq <= CLIP_EPS * scale;
            if p_in {
                out.push(p);
            }
            if p_in != q_in && (sp - sq).abs() > 0.0 {
                let t = sp / (sp - sq);
                if t > 0.0 && t < 1.0 {
                    out.push([p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]);
                }
            }
        }
        out.dedup_by(|a, b| dist(*a, *b) <= CLIP_EPS * scale);
        if out.len() > 1 && dist(out[0], out[out.len() - 1]) <= CLIP_EPS * scale {
            out.pop();
        }
        Self { verts: out }
    }

    /// Intersection with another convex polygon.
    pub fn intersect(&self, other: &ConvexPolygon) -> Self {
        let mut cur = self.clone();
        let m = other.verts.len();
        for i in 0..m {
            if cur.is_empty() {
                return Self { verts: Vec::new() };
            }
            let a = other.verts[i];
            let b = other.verts[(i + 1) % m];
            // outward normal of a ccw edge a→b is (dy, −dx)
            let n = [b[1] - a[1], a[0] - b[0]];
            cur = cur.clip_halfplane(n, n[0] * a[0] + n[1] * a[1]);
        }
        cur
    }

    pub fn contains(&self, p: Pt, eps: f64) -> bool {
        let m = self.verts.len();
        (0..m).all(|i| {
            let a = self.verts[i];
            let b = self.verts[(i + 1) % m];
            cross(a, b, p) >= -eps * dist(a, b).max(1.0)
        })
    }

    /// Largest distance from `p` to a vertex, i.e. `sup_{x ∈ P} ‖x − p‖`.
    pub fn max_distance_from(&self, p: Pt) -> f64 {
        self.verts.iter().map(|v| dist(*v, p)).fold(0.0, f64::max)
    }

    /// Minimum width over all directions (attained perpendicular to an edge).
    pub fn min_width(&self) -> f64 {
        let m = self.verts.len();
        let mut best = f64::INFINITY;
        for i in 0..m {
            let a = self.verts[i];
            let b = self.verts[(i + 1) % m];
            let len = dist(a, b);
            if len == 0.0 {
                continue;
            }
            let w = self.verts.iter().map(|v| cross(a, b, *v) / len).fold(0.0, f64::max);
            best = best.min(w);
        }
        best
    }

    pub fn bounding_box(&self) -> (Pt, Pt) {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for v in &self.verts {
            for k in 0..2 {
                lo[k] = lo[k].min(v[k]);
                hi[k] = hi[k].max(v[k]);
            }
        }
        (lo, hi)
    }
}
