//! Gaussian product moments and Hilbertian fourth-order cumulants.

use std::fmt;
use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::models::{CovarianceModel, RhoFamily};
use crate::simulate::LinearProcess;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Largest number of variables accepted by the pairing enumerator.
pub const MAX_ISSERLIS_VARS: usize = 12;

type Pairing = Vec<(usize, usize)>;

fn build_pairings(items: &[usize]) -> Vec<Pairing> {
    if items.is_empty() {
        return vec![Vec::new()];
    }
    let first = items[0];
    let mut out = Vec::new();
    for k in 1..items.len() {
        let rest: Vec<usize> = items[1..].iter().enumerate().filter(|&(i, _)| i + 1 != k).map(|(_, &v)| v).collect();
        for mut tail in build_pairings(&rest) {
            tail.insert(0, (first, items[k]));
            out.push(tail);
        }
    }
    out
}

/// All perfect matchings of `{0, …, m−1}` (memoised, `m` even and ≤ 12).
pub fn pairings(m: usize) -> &'static [Pairing] {
    static CACHE: [OnceLock<Vec<Pairing>>; MAX_ISSERLIS_VARS / 2 + 1] = [const { OnceLock::new() }; MAX_ISSERLIS_VARS / 2 + 1];
    assert!(m % 2 == 0 && m <= MAX_ISSERLIS_VARS, "pairings need an even m ≤ {MAX_ISSERLIS_VARS}");
    CACHE[m / 2].get_or_init(|| build_pairings(&(0..m).collect::<Vec<_>>()))
}

/// Relation matrix `r_ab = E[Z_a Z_b]` of centred jointly Gaussian variables.
#[derive(Debug, Clone, PartialEq)]
pub struct JointGaussianSpec {
    relation: DMatrix<Complex64>,
}

/// One (possibly conjugated) coordinate of a process at a site.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcessVar {
    pub t: Vec<f64>,
    pub coord: usize,
    pub conj: bool,
}

impl ProcessVar {
    pub fn new(t: Vec<f64>, coord: usize, conj: bool) -> Self {
        Self { t, coord, conj }
    }
}

impl JointGaussianSpec {
    pub fn new(relation: DMatrix<Complex64>) -> Result<Self> {
        if !relation.is_square() {
            return Err(Error::DimensionMismatch { expected: relation.nrows(), actual: relation.ncols() });
        }
        let scale = relation.iter().map(|c| c.norm()).fold(1.0, f64::max);
        let asym = (&relation - relation.transpose()).iter().map(|c| c.norm()).fold(0.0, f64::max);
        if asym > 1e-12 * scale {
            return Err(invalid(format!("relation matrix is not symmetric (defect {asym:.3e})")));
        }
        Ok(Self { relation })
    }

    /// Builds `E[Z_a Z_b]` from `C` and `Č` of a stationary model.
    pub fn from_process(model: &CovarianceModel, vars: &[ProcessVar]) -> Result<Self> {
        let m = vars.len();
        let mut r = DMatrix::from_element(m, m, ZERO);
        for a in 0..m {
            for b in a..m {
                let (va, vb) = (&vars[a], &vars[b]);
                if va.coord >= model.p() || vb.coord >= model.p() {
                    return Err(invalid("coordinate index out of range"));
                }
                let h: Vec<f64> = va.t.iter().zip(&vb.t).map(|(x, y)| x - y).collect();
                let v = match (va.conj, vb.conj) {
                    (false, false) => model.pseudo_cov_at(&h)?.get(va.coord, vb.coord),
                    (false, true) => model.cov_at(&h)?.get(va.coord, vb.coord),
                    (true, false) => model.cov_at(&h)?.get(va.coord, vb.coord).conj(),
                    (true, true) => model.pseudo_cov_at(&h)?.get(va.coord, vb.coord).conj(),
                };
                r[(a, b)] = v;
                r[(b, a)] = v;
            }
        }
        Ok(Self { relation: r })
    }

    pub fn m(&self) -> usize {
        self.relation.nrows()
    }

    pub fn relation(&self) -> &DMatrix<Complex64> {
        &self.relation
    }
}

/// `E ∏ Z_j = Σ_π ∏_{(a,b)∈π} r_ab`; zero for odd `m`.
pub fn isserlis_complex(spec: &JointGaussianSpec) -> Result<Complex64> {
    pairing_sum(spec.relation(), |_| true)
}

fn pairing_sum<F: Fn(&[(usize, usize)]) -> bool>(r: &DMatrix<Complex64>, keep: F) -> Result<Complex64> {
    let m = r.nrows();
    if m > MAX_ISSERLIS_VARS {
        return Err(invalid(format!("at most {MAX_ISSERLIS_VARS} variables are supported, got {m}")));
    }
    if m % 2 == 1 {
        return Ok(ZERO);
    }
    Ok(pairings(m)
        .iter()
        .filter(|p| keep(p))
        .map(|p| p.iter().fold(Complex64::new(1.0, 0.0), |acc, &(a, b)| acc * r[(a, b)]))
        .sum())
}

/// Joint second and fourth moments of four zero-mean `ℍ`-valued variables in one frame.
pub trait JointMoments {
    fn p(&self) -> usize;
    /// `E(Y_a ⊗ Y_b) = E[Y_a Y_bᴴ]`.
    fn cov(&self, a: usize, b: usize) -> DMatrix<Complex64>;
    /// `E(Y_a ⊗ Ȳ_b) = E[Y_a Y_bᵀ]`.
    fn pseudo(&self, a: usize, b: usize) -> DMatrix<Complex64>;
    /// `E⟨Y₁⊗Y₂, Y₃⊗Y₄⟩_HS`.
    fn fourth(&self) -> Complex64;
}

fn hs(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> Complex64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y.conj()).sum()
}

/// Hilbertian fourth-order cumulant of `(Y₁, Y₂, Y₃, Y₄)`.
pub fn cum4<M: JointMoments + ?Sized>(y: &M) -> Complex64 {
    let e_13: Complex64 = y.cov(0, 2).trace();
    let e_42: Complex64 = y.cov(3, 1).trace();
    y.fourth() - hs(&y.cov(0, 1), &y.cov(2, 3)) - e_13 * e_42 - hs(&y.pseudo(0, 3), &y.pseudo(2, 1))
}

/// Jointly Gaussian quadruple given by its covariance and pseudo-covariance blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianBlocks {
    p: usize,
    cov: Vec<DMatrix<Complex64>>,
    pseudo: Vec<DMatrix<Complex64>>,
}

impl GaussianBlocks {
    /// `cov[4a+b] = E[Y_a Y_bᴴ]`, `pseudo[4a+b] = E[Y_a Y_bᵀ]`.
    pub fn new(cov: Vec<DMatrix<Complex64>>, pseudo: Vec<DMatrix<Complex64>>) -> Result<Self> {
        if cov.len() != 16 || pseudo.len() != 16 {
            return Err(invalid("expected 4×4 blocks"));
        }
        let p = cov[0].nrows();
        if let Some(bad) = cov.iter().chain(&pseudo).find(|m| m.nrows() != p || m.ncols() != p) {
            return Err(Error::DimensionMismatch { expected: p, actual: bad.nrows() });
        }
        for a in 0..4 {
            for b in 0..4 {
                let dc = (&cov[4 * a + b] - cov[4 * b + a].adjoint()).iter().map(|c| c.norm()).fold(0.0, f64::max);
                let dp = (&pseudo[4 * a + b] - pseudo[4 * b + a].transpose()).iter().map(|c| c.norm()).fold(0.0, f64::max);
                if dc > 1e-12 || dp > 1e-12 {
                    return Err(invalid("blocks are not consistent under swapping"));
                }
            }
        }
        Ok(Self { p, cov, pseudo })
    }

    /// `Y_a = X(t_a)` for a stationary model.
    pub fn from_process(model: &CovarianceModel, times: &[Vec<f64>; 4]) -> Result<Self> {
        let mut cov = Vec::with_capacity(16);
        let mut pseudo = Vec::with_capacity(16);
        for a in times {
            for b in times {
                let h: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
                cov.push(model.cov_at(&h)?.into_matrix());
                pseudo.push(model.pseudo_cov_at(&h)?.into_matrix());
            }
        }
        Self::new(cov, pseudo)
    }

    /// Relation entry between coordinate `i` of `Y_a` and coordinate `j` of `Y_b`.
    fn rel(&self, a: usize, i: usize, ca: bool, b: usize, j: usize, cb: bool) -> Complex64 {
        match (ca, cb) {
            (false, false) => self.pseudo[4 * a + b][(i, j)],
            (false, true) => self.cov[4 * a + b][(i, j)],
            (true, false) => self.cov[4 * a + b][(i, j)].conj(),
            (true, true) => self.pseudo[4 * a + b][(i, j)].conj(),
        }
    }
}

impl JointMoments for GaussianBlocks {
    fn p(&self) -> usize {
        self.p
    }

    fn cov(&self, a: usize, b: usize) -> DMatrix<Complex64> {
        self.cov[4 * a + b].clone()
    }

    fn pseudo(&self, a: usize, b: usize) -> DMatrix<Complex64> {
        self.pseudo[4 * a + b].clone()
    }

    /// `Σ_{i,j} E[Y_{1i} Ȳ_{2j} Ȳ_{3i} Y_{4j}]` by coordinatewise pairing sums.
    fn fourth(&self) -> Complex64 {
        let mut total = ZERO;
        for i in 0..self.p {
            for j in 0..self.p {
                let vars = [(0, i, false), (1, j, true), (2, i, true), (3, j, false)];
                let r = DMatrix::from_fn(4, 4, |x, y| {
                    let (a, ia, ca) = vars[x];
                    let (b, ib, cb) = vars[y];
                    self.rel(a, ia, ca, b, ib, cb)
                });
                total += pairing_sum(&r, |_| true).expect("four variables");
            }
        }
        total
    }
}

/// Empirical moments of draws `(Y₁, Y₂, Y₃, Y₄)`.
#[derive(Debug, Clone)]
pub struct SampleMoments {
    p: usize,
    draws: Vec<[DVector<Complex64>; 4]>,
}

impl SampleMoments {
    pub fn new(draws: Vec<[DVector<Complex64>; 4]>) -> Result<Self> {
        let Some(first) = draws.first() else {
            return Err(invalid("no draws"));
        };
        let p = first[0].len();
        if draws.iter().flatten().any(|v| v.len() != p) {
            return Err(invalid("draws have inconsistent dimension"));
        }
        Ok(Self { p, draws })
    }

    fn avg<F: Fn(&[DVector<Complex64>; 4]) -> DMatrix<Complex64>>(&self, f: F) -> DMatrix<Complex64> {
        let mut acc = DMatrix::from_element(self.p, self.p, ZERO);
        for d in &self.draws {
            acc += f(d);
        }
        acc / Complex64::new(self.draws.len() as f64, 0.0)
    }
}

impl JointMoments for SampleMoments {
    fn p(&self) -> usize {
        self.p
    }

    fn cov(&self, a: usize, b: usize) -> DMatrix<Complex64> {
        self.avg(|d| &d[a] * d[b].adjoint())
    }

    fn pseudo(&self, a: usize, b: usize) -> DMatrix<Complex64> {
        self.avg(|d| &d[a] * d[b].transpose())
    }

    fn fourth(&self) -> Complex64 {
        let sum: Complex64 = self.draws.iter().map(|d| d[0].dotc(&d[2]).conj() * d[3].dotc(&d[1]).conj()).sum();
        sum / self.draws.len() as f64
    }
}

/// Scalar `X(t) = Z(t)² − 1` at four sites, with moments from pairing sums over `Z`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChiSquareQuad {
    /// `ρ_Z(t_a − t_b)`.
    r: [[f64; 4]; 4],
}

impl ChiSquareQuad {
    pub fn new(rho_z: &RhoFamily, times: &[Vec<f64>; 4]) -> Self {
        let mut r = [[0.0; 4]; 4];
        for a in 0..4 {
            for b in 0..4 {
                let h: Vec<f64> = times[a].iter().zip(&times[b]).map(|(x, y)| x - y).collect();
                r[a][b] = rho_z.eval_vec(&h);
            }
        }
        Self { r }
    }

    /// `E ∏_{a∈S} (Z_a² − 1)` by inclusion–exclusion over the centring terms.
    fn product_moment(&self, set: &[usize]) -> f64 {
        let k = set.len();
        let mut total = 0.0;
        for mask in 0u32..(1 << k) {
            let chosen: Vec<usize> = (0..k).filter(|&i| mask >> i & 1 == 1).map(|i| set[i]).collect();
            let sign = if (k - chosen.len()) % 2 == 0 { 1.0 } else { -1.0 };
            // each chosen Z appears twice
            let vars: Vec<usize> = chosen.iter().flat_map(|&a| [a, a]).collect();
            let r = DMatrix::from_fn(vars.len(), vars.len(), |x, y| Complex64::new(self.r[vars[x]][vars[y]], 0.0));
            total += sign * pairing_sum(&r, |_| true).expect("at most eight variables").re;
        }
        total
    }

    /// Closed form `16(r13 r14 r23 r24 + r12 r14 r23 r34 + r12 r13 r24 r34)`.
    pub fn closed_form(&self) -> f64 {
        let r = &self.r;
        16.0 * (r[0][2] * r[0][3] * r[1][2] * r[1][3] + r[0][1] * r[0][3] * r[1][2] * r[2][3] + r[0][1] * r[0][2] * r[1][3] * r[2][3])
    }
}

impl JointMoments for ChiSquareQuad {
    fn p(&self) -> usize {
        1
    }

    fn cov(&self, a: usize, b: usize) -> DMatrix<Complex64> {
        DMatrix::from_element(1, 1, Complex64::new(self.product_moment(&[a, b]), 0.0))
    }

    fn pseudo(&self, a: usize, b: usize) -> DMatrix<Complex64> {
        self.cov(a, b)
    }

    fn fourth(&self) -> Complex64 {
        Complex64::new(self.product_moment(&[0, 1, 2, 3]), 0.0)
    }
}

/// Chi-square cumulant `cum(X(t₁), …, X(t₄))` from the closed form.
pub fn chi_square_cum4(rho_z: &RhoFamily, times: &[Vec<f64>; 4]) -> f64 {
    ChiSquareQuad::new(rho_z, times).closed_form()
}

/// `E[∏_{n<N} X(t_n) X̄(s_n) · ∏_{m<M} (X(t_{N+m}) X̄(s_{N+m}) − C(t_{N+m} − s_{N+m}))]` for a scalar model.
///
/// Pairings that join a centred pair `{t_{N+m}, s_{N+m}}` are excluded.
pub fn extra_isserlis(model: &CovarianceModel, ts: &[Vec<f64>], ss: &[Vec<f64>], n_plain: usize, m_centred: usize) -> Result<Complex64> {
    if model.p() != 1 {
        return Err(invalid("extra_isserlis needs a scalar model"));
    }
    let k = n_plain + m_centred;
    if ts.len() != k || ss.len() != k {
        return Err(invalid(format!("expected {k} t and s points")));
    }
    if k > 6 {
        return Err(invalid("N + M must be at most 6"));
    }
    // variable 2i is X(t_i), 2i+1 is X̄(s_i)
    let vars: Vec<ProcessVar> = (0..k)
        .flat_map(|i| [ProcessVar::new(ts[i].clone(), 0, false), ProcessVar::new(ss[i].clone(), 0, true)])
        .collect();
    let spec = JointGaussianSpec::from_process(model, &vars)?;
    pairing_sum(spec.relation(), |p| p.iter().all(|&(a, b)| !(a / 2 == b / 2 && a / 2 >= n_plain)))
}

/// Fourth-order structure of a process for the cumulant summability check.
#[derive(Debug, Clone)]
pub enum CumulantModel {
    Gaussian(CovarianceModel),
    /// `Z² − 1` with `Z` a real scalar Gaussian process on `ℝ`.
    ChiSquare { rho_z: RhoFamily },
    /// Real linear process on `ℤ` with innovation cumulant tensor `κ_{ℓ₁ℓ₂ℓ₃ℓ₄}` (flattened, `p⁴` entries).
    Linear { process: LinearProcess, kappa: Vec<f64> },
}

/// Partial sums of `sup_w Σ_{u,v} sup_λ |cum(X(λ₁+u), X(λ₂+v), X(λ₃+w), X(0))|` over growing radii.
#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionVReport {
    pub model: String,
    pub radii: Vec<f64>,
    pub partial_sums: Vec<f64>,
    /// Successive differences of the partial sums.
    pub increments: Vec<f64>,
    /// Increments shrink and the last one is below `1e-3` of the sum.
    pub cauchy_ok: bool,
    /// Analytic upper bound, when one is available.
    pub bound: Option<f64>,
    /// Supremum over `w` and `λ` is taken on a finite grid, so each sum is a lower bound.
    pub lower_bound_only: bool,
}

impl fmt::Display for AssumptionVReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "cumulant summability: {}", self.model)?;
        writeln!(f, "{:>10}  {:>14}  {:>14}", "radius", "partial_sum", "increment")?;
        for (i, (r, s)) in self.radii.iter().zip(&self.partial_sums).enumerate() {
            let inc = if i == 0 { String::from("-") } else { format!("{:.6e}", self.increments[i - 1]) };
            writeln!(f, "{r:>10.3}  {s:>14.6e}  {inc:>14}")?;
        }
        if let Some(b) = self.bound {
            writeln!(f, "analytic bound: {b:.6e}")?;
        }
        if self.lower_bound_only {
            writeln!(f, "note: sup over w and the shifts is sampled on a finite grid; sums are lower bounds")?;
        }
        write!(f, "cauchy: {}", if self.cauchy_ok { "ok" } else { "not settled" })
    }
}

fn finish_report(model: String, radii: Vec<f64>, partial_sums: Vec<f64>, bound: Option<f64>, lower_bound_only: bool) -> AssumptionVReport {
    let increments: Vec<f64> = partial_sums.windows(2).map(|w| w[1] - w[0]).collect();
    let last = partial_sums.last().copied().unwrap_or(0.0);
    let shrinking = increments.windows(2).all(|w| w[1] <= w[0] + 1e-15 * last.abs().max(1e-300));
    let settled = increments.last().is_none_or(|&d| d.abs() <= 1e-3 * last.abs() || last == 0.0);
    AssumptionVReport { model, radii, partial_sums, increments, cauchy_ok: shrinking && settled, bound, lower_bound_only }
}

/// Numeric check of the cumulant summability condition.
///
/// `radii` are the truncation radii for `u, v`; `shift` is the ball radius for `λᵢ`; `step` the
/// Riemann step on continuous index sets.
pub fn check_assumption_v(model: &CumulantModel, radii: &[f64], shift: f64, step: f64) -> Result<AssumptionVReport> {
    if radii.is_empty() || radii.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("radii must be increasing and non-empty"));
    }
    match model {
        CumulantModel::Gaussian(_) => {
            // all fourth-order cumulants of a Gaussian process vanish identically
            Ok(finish_report("gaussian".into(), radii.to_vec(), vec![0.0; radii.len()], Some(0.0), false))
        }
        CumulantModel::ChiSquare { rho_z } => {
            if !(step > 0.0) {
                return Err(invalid("step must be positive"));
            }
            let lam = [-shift, 0.0, shift];
            let cum = |u: f64, v: f64, w: f64| -> f64 {
                let mut best: f64 = 0.0;
                for l1 in lam {
                    for l2 in lam {
                        for l3 in lam {
                            let t = [vec![l1 + u], vec![l2 + v], vec![l3 + w], vec![0.0]];
                            best = best.max(chi_square_cum4(rho_z, &t).abs());
                        }
                    }
                }
                best
            };
            let r_max = *radii.last().expect("non-empty");
            let ws: Vec<f64> = (-4..=4).map(|k| k as f64 * r_max / 8.0).collect();
            let mut sums = Vec::with_capacity(radii.len());
            for &r in radii {
                let k = (r / step).floor() as i64;
                let grid: Vec<f64> = (-k..=k).map(|i| i as f64 * step).collect();
                let best = ws
                    .iter()
                    .map(|&w| grid.iter().map(|&u| grid.iter().map(|&v| cum(u, v, w)).sum::<f64>()).sum::<f64>() * step * step)
                    .fold(0.0, f64::max);
                sums.push(best);
            }
            // 48 |C_Z(0)|² (∫ sup_{|λ|≤2δ} |C_Z(λ+u)| du)²
            let env = crate::quad::integrate_to_infinity(|u| rho_z.eval((u - 2.0 * shift).max(0.0)), 0.0, 1e-10);
            let bound = 48.0 * (2.0 * env).powi(2);
            Ok(finish_report(format!("chi-square, {rho_z:?}"), radii.to_vec(), sums, Some(bound), true))
        }
        CumulantModel::Linear { process, kappa } => {
            let p = process.p();
            if kappa.len() != p.pow(4) {
                return Err(Error::DimensionMismatch { expected: p.pow(4), actual: kappa.len() });
            }
            if process.coeffs().iter().any(|a| a.matrix().iter().any(|c| c.im != 0.0)) {
                return Err(Error::NotApplicable("the linear-process check assumes real coefficients".into()));
            }
            let s_max = process.half_width() as i64;
            let a = |s: i64| -> Option<DMatrix<f64>> { process.coeff(s).map(|m| m.matrix().map(|c| c.re)) };
            // Σ_{i,j} cum(X_i(u), X_j(v), X_i(w), X_j(0)) = Σ_s Σ_ℓ κ_ℓ (A_{u−s}ᵀA_{w−s})_{ℓ₁ℓ₃} (A_{v−s}ᵀA_{−s})_{ℓ₂ℓ₄}
            let cum = |u: i64, v: i64, w: i64| -> f64 {
                let mut total = 0.0;
                for s in -2 * s_max..=2 * s_max {
                    let (Some(au), Some(av), Some(aw), Some(a0)) = (a(u - s), a(v - s), a(w - s), a(-s)) else { continue };
                    let g1 = au.transpose() * aw;
                    let g2 = av.transpose() * a0;
                    for l1 in 0..p {
                        for l2 in 0..p {
                            for l3 in 0..p {
                                for l4 in 0..p {
                                    let k = kappa[((l1 * p + l2) * p + l3) * p + l4];
                                    if k != 0.0 {
                                        total += k * g1[(l1, l3)] * g2[(l2, l4)];
                                    }
                                }
                            }
                        }
                    }
                }
                total
            };
            let w_range = 2 * s_max;
            let mut sums = Vec::with_capacity(radii.len());
            for &r in radii {
                let k = r.floor() as i64;
                let best = (-w_range..=w_range)
                    .map(|w| (-k..=k).map(|u| (-k..=k).map(|v| cum(u, v, w).abs()).sum::<f64>()).sum::<f64>())
                    .fold(0.0, f64::max);
                sums.push(best);
            }
            let b: f64 = kappa.iter().map(|x| x * x).sum();
            let norms: Vec<f64> = process.coeffs().iter().map(|m| m.hs_norm()).collect();
            let sup = norms.iter().copied().fold(0.0, f64::max);
            let total: f64 = norms.iter().sum();
            Ok(finish_report(
                format!("linear process, {} lags", process.coeffs().len()),
                radii.to_vec(),
                sums,
                Some(b.sqrt() * sup * total.powi(3)),
                false,
            ))
        }
    }
}
