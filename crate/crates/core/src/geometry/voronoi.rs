use super::polygon::ConvexPolygon;
use super::{Domain, SamplingDesign};
use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Interval { lo: f64, hi: f64 },
    Polygon(ConvexPolygon),
}

impl Cell {
    pub fn vertex_count(&self) -> usize {
        match self {
            Cell::Interval { .. } => 2,
            Cell::Polygon(p) => p.vertices().len(),
        }
    }
}

/// Voronoi cells clipped to the domain, their volumes, and the tessellation
/// diameter `δ = max_i sup_{x ∈ V_i} ‖x − t_i‖`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tessellation {
    volumes: Vec<f64>,
    cells: Vec<Cell>,
    diameter: f64,
}

impl Tessellation {
    pub fn volumes(&self) -> &[f64] {
        &self.volumes
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    pub fn n(&self) -> usize {
        self.volumes.len()
    }

    pub fn total_volume(&self) -> f64 {
        let mut sum = 0.0;
        let mut comp = 0.0;
        for &v in &self.volumes {
            let y = v - comp;
            let t = sum + y;
            comp = (t - sum) - y;
            sum = t;
        }
        sum
    }

    /// Equal-volume cells for a regular grid on its cell-centred domain.
    pub fn for_grid(design: &SamplingDesign) -> Result<Self> {
        let domain = Domain::for_grid(design)?;
        voronoi(design, &domain)
    }
}

pub fn voronoi(design: &SamplingDesign, domain: &Domain) -> Result<Tessellation> {
    if design.d() != domain.d() {
        return Err(Error::DimensionMismatch { expected: domain.d(), actual: design.d() });
    }
    if design.n() == 0 {
        return Err(invalid("design has no sites"));
    }
    for i in 0..design.n() {
        if !domain.contains(design.point(i)) {
            return Err(Error::SiteOutsideDomain { index: i });
        }
    }
    match domain {
        Domain::Interval { a, b } => Ok(voronoi_1d(design, *a, *b)),
        Domain::Polygon(poly) => Ok(voronoi_2d(design, poly)),
    }
}

fn voronoi_1d(design: &SamplingDesign, a: f64, b: f64) -> Tessellation {
    let n = design.n();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| design.point(i)[0].total_cmp(&design.point(j)[0]));
    let mut cells = vec![Cell::Interval { lo: a, hi: b }; n];
    let mut volumes = vec![0.0; n];
    let mut diameter: f64 = 0.0;
    for (rank, &i) in order.iter().enumerate() {
        let t = design.point(i)[0];
        let lo = if rank == 0 { a } else { 0.5 * (design.point(order[rank - 1])[0] + t) };
        let hi = if rank + 1 == n { b } else { 0.5 * (design.point(order[rank + 1])[0] + t) };
        cells[i] = Cell::Interval { lo, hi };
        volumes[i] = hi - lo;
        diameter = diameter.max(t - lo).max(hi - t);
    }
    Tessellation { volumes, cells, diameter }
}

/// Uniform bins over the domain's bounding box for neighbour pruning.
struct Bins {
    lo: [f64; 2],
    size: f64,
    nx: usize,
    ny: usize,
    members: Vec<Vec<usize>>,
}

impl Bins {
    fn new(design: &SamplingDesign, poly: &ConvexPolygon) -> Self {
        let (lo, hi) = poly.bounding_box();
        let n = design.n().max(1) as f64;
        let size = (poly.area() / n).sqrt().max(1e-12 * (hi[0] - lo[0]).max(hi[1] - lo[1]));
        let nx = (((hi[0] - lo[0]) / size).ceil() as usize).max(1);
        let ny = (((hi[1] - lo[1]) / size).ceil() as usize).max(1);
        let mut members = vec![Vec::new(); nx * ny];
        let mut bins = Self { lo, size, nx, ny, members: Vec::new() };
        for i in 0..design.n() {
            let (bx, by) = bins.locate(design.point(i));
            members[by * nx + bx].push(i);
        }
        bins.members = members;
        bins
    }

    fn locate(&self, p: &[f64]) -> (usize, usize) {
        let bx = (((p[0] - self.lo[0]) / self.size).floor().max(0.0) as usize).min(self.nx - 1);
        let by = (((p[1] - self.lo[1]) / self.size).floor().max(0.0) as usize).min(self.ny - 1);
        (bx, by)
    }

    /// Sites in bins at Chebyshev ring distance exactly `r` from `(bx, by)`.
    fn ring(&self, bx: usize, by: usize, r: usize, out: &mut Vec<usize>) -> bool {
        out.clear();
        let (bx, by, r) = (bx as isize, by as isize, r as isize);
        let mut any_bin = false;
        for y in by - r..=by + r {
            if y < 0 || y >= self.ny as isize {
                continue;
            }
            for x in bx - r..=bx + r {
                if x < 0 || x >= self.nx as isize {
                    continue;
                }
                if (x - bx).abs() != r && (y - by).abs() != r {
                    continue;
                }
                any_bin = true;
                out.extend_from_slice(&self.members[y as usize * self.nx + x as usize]);
            }
        }
        any_bin
    }
}

fn voronoi_2d(design: &SamplingDesign, poly: &ConvexPolygon) -> Tessellation {
    let n = design.n();
    let bins = Bins::new(design, poly);
    let mut cells = Vec::with_capacity(n);
    let mut volumes = Vec::with_capacity(n);
    let mut diameter: f64 = 0.0;
    let mut ring = Vec::new();
    for i in 0..n {
        let t = design.point(i);
        let ti = [t[0], t[1]];
        let (bx, by) = bins.locate(t);
        let mut cell = poly.clone();
        let mut r = 0usize;
        loop {
            let reach = cell.max_distance_from(ti);
            // sites outside the ring block are at least r·size away; they can only
            // cut the cell if closer than twice its current radius
            if r > 0 && (r - 1) as f64 * bins.size > 2.0 * reach {
                break;
            }
            if !bins.ring(bx, by, r, &mut ring) {
                break;
            }
            for &j in &ring {
                if j == i {
                    continue;
                }
                let s = design.point(j);
                // keep x with ‖x − t‖ ≤ ‖x − s‖  ⇔  (s − t)·x ≤ (‖s‖² − ‖t‖²)/2
                let nrm = [s[0] - ti[0], s[1] - ti[1]];
                let c = 0.5 * (s[0] * s[0] + s[1] * s[1] - ti[0] * ti[0] - ti[1] * ti[1]);
                cell = cell.clip_halfplane(nrm, c);
            }
            r += 1;
        }
        diameter = diameter.max(cell.max_distance_from(ti));
        volumes.push(cell.area());
        cells.push(Cell::Polygon(cell));
    }
    Tessellation { volumes, cells, diameter }
}
