//! Sampling designs, convex domains, Voronoi tessellations and overlap volumes.

mod hull;
pub mod io;
pub mod polygon;
mod voronoi;

pub use hull::convex_hull;
pub use polygon::ConvexPolygon;
pub use voronoi::{voronoi, Tessellation};

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum DesignKind {
    /// Sites `δ·(i₁+1, …, i_d+1)` with `0 ≤ i_ℓ < counts[ℓ]`, last axis fastest.
    Grid { delta: f64, counts: Vec<usize> },
    Irregular,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplingDesign {
    d: usize,
    coords: Vec<f64>,
    kind: DesignKind,
}

impl SamplingDesign {
    /// Irregular design from row-major coordinates (`n·d` values).
    pub fn irregular(d: usize, coords: Vec<f64>) -> Result<Self> {
        if d == 0 || coords.len() % d != 0 {
            return Err(invalid(format!("{} coordinates cannot form {d}-dimensional sites", coords.len())));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(invalid("site coordinates must be finite"));
        }
        let design = Self { d, coords, kind: DesignKind::Irregular };
        design.check_distinct()?;
        Ok(design)
    }

    pub fn from_points(points: &[Vec<f64>]) -> Result<Self> {
        let d = points.first().map(|p| p.len()).unwrap_or(1);
        if points.iter().any(|p| p.len() != d) {
            return Err(invalid("all sites must have the same dimension"));
        }
        Self::irregular(d, points.concat())
    }

    pub fn grid(delta: f64, counts: Vec<usize>) -> Result<Self> {
        if !(delta > 0.0) || counts.is_empty() || counts.contains(&0) {
            return Err(invalid("grid needs positive spacing and positive counts"));
        }
        let d = counts.len();
        let n: usize = counts.iter().product();
        let mut coords = Vec::with_capacity(n * d);
        let mut idx = vec![0usize; d];
        for _ in 0..n {
            coords.extend(idx.iter().map(|&i| delta * (i as f64 + 1.0)));
            for ax in (0..d).rev() {
                idx[ax] += 1;
                if idx[ax] < counts[ax] {
                    break;
                }
                idx[ax] = 0;
            }
        }
        Ok(Self { d, coords, kind: DesignKind::Grid { delta, counts } })
    }

    /// Regular grid in one dimension with `n` sites.
    pub fn grid_1d(delta: f64, n: usize) -> Result<Self> {
        Self::grid(delta, vec![n])
    }

    fn check_distinct(&self) -> Result<()> {
        let mut order: Vec<usize> = (0..self.n()).collect();
        order.sort_by(|&a, &b| {
            self.point(a).iter().zip(self.point(b)).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal)
        });
        for w in order.windows(2) {
            if self.point(w[0]) == self.point(w[1]) {
                return Err(Error::DuplicateSites(w[0].min(w[1]), w[0].max(w[1])));
            }
        }
        Ok(())
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n(&self) -> usize {
        self.coords.len() / self.d
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.d..(i + 1) * self.d]
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn kind(&self) -> &DesignKind {
        &self.kind
    }

    pub fn is_grid(&self) -> bool {
        matches!(self.kind, DesignKind::Grid { .. })
    }

    /// Same sites with the grid structure forgotten.
    pub fn as_irregular(&self) -> Self {
        Self { kind: DesignKind::Irregular, ..self.clone() }
    }

    pub fn min_pairwise_distance(&self) -> f64 {
        let mut best = f64::INFINITY;
        for i in 0..self.n() {
            for j in i + 1..self.n() {
                best = best.min(euclid(self.point(i), self.point(j)));
            }
        }
        best
    }
}

pub(crate) fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Convex sampling region `T`.
#[derive(Debug, Clone, PartialEq)]
pub enum Domain {
    Interval { a: f64, b: f64 },
    Polygon(ConvexPolygon),
}

impl Domain {
    pub fn interval(a: f64, b: f64) -> Result<Self> {
        if !(b > a) {
            return Err(Error::Degenerate(format!("interval [{a}, {b}] has no length")));
        }
        Ok(Domain::Interval { a, b })
    }

    pub fn rectangle(lo: [f64; 2], hi: [f64; 2]) -> Result<Self> {
        Ok(Domain::Polygon(ConvexPolygon::rectangle(lo, hi)?))
    }

    /// Cell-centred region of a regular grid: each site owns a cube of side `δ`.
    pub fn for_grid(design: &SamplingDesign) -> Result<Self> {
        let DesignKind::Grid { delta, counts } = design.kind() else {
            return Err(invalid("design is not a grid"));
        };
        let lo = delta / 2.0;
        match counts.len() {
            1 => Self::interval(lo, lo + delta * counts[0] as f64),
            2 => Self::rectangle([lo, lo], [lo + delta * counts[0] as f64, lo + delta * counts[1] as f64]),
            d => Err(invalid(format!("grid domains are only available for d ≤ 2, got {d}"))),
        }
    }

    pub fn d(&self) -> usize {
        match self {
            Domain::Interval { .. } => 1,
            Domain::Polygon(_) => 2,
        }
    }

    pub fn volume(&self) -> f64 {
        match self {
            Domain::Interval { a, b } => b - a,
            Domain::Polygon(p) => p.area(),
        }
    }

    /// Smallest width of `T` over all directions.
    pub fn min_width(&self) -> f64 {
        match self {
            Domain::Interval { a, b } => b - a,
            Domain::Polygon(p) => p.min_width(),
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        let scale = self.volume().max(1.0);
        match self {
            Domain::Interval { a, b } => x[0] >= a - 1e-12 * scale && x[0] <= b + 1e-12 * scale,
            Domain::Polygon(p) => p.contains([x[0], x[1]], 1e-12 * scale),
        }
    }

    /// `|T ∩ (T − h)|`.
    pub fn overlap_volume(&self, h: &[f64]) -> f64 {
        match self {
            Domain::Interval { a, b } => (b - a - h[0].abs()).max(0.0),
            Domain::Polygon(p) => {
                if h[0] == 0.0 && h[1] == 0.0 {
                    return p.area();
                }
                p.intersect(&p.translate([-h[0], -h[1]])).area()
            }
        }
    }
}
