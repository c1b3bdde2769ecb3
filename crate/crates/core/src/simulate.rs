//! Realisations of stationary processes on sampling designs.

use std::io::Write;
use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use rand_distr::StandardNormal;
use rustfft::{Fft, FftPlanner};

use crate::error::{invalid, Error, Result};
use crate::geometry::{DesignKind, SamplingDesign};
use crate::models::{CovarianceModel, PseudoSpec, RhoFamily, Structure};
use crate::operator::{OperatorRep, SELF_ADJOINT_TOL};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Master seed plus counter-based substreams keyed by id tuples.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngConfig {
    pub master_seed: u64,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl RngConfig {
    pub fn new(master_seed: u64) -> Self {
        Self { master_seed }
    }

    /// Independent generator for `(experiment, replicate, block, …)`; reproducible in isolation.
    pub fn stream(&self, ids: &[u64]) -> ChaCha8Rng {
        let mut h = splitmix(ids.len() as u64);
        for &id in ids {
            h = splitmix(h ^ id);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(h);
        rng
    }
}

/// Coordinates `X_j(t_i)` of one realisation: row `i` holds `X(t_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcessSample {
    design: Arc<SamplingDesign>,
    values: DMatrix<Complex64>,
    is_real: bool,
}

impl ProcessSample {
    pub fn new(design: Arc<SamplingDesign>, values: DMatrix<Complex64>) -> Result<Self> {
        if values.nrows() != design.n() {
            return Err(Error::DimensionMismatch { expected: design.n(), actual: values.nrows() });
        }
        let is_real = values.iter().all(|c| c.im == 0.0);
        Ok(Self { design, values, is_real })
    }

    pub fn from_real(design: Arc<SamplingDesign>, values: &DMatrix<f64>) -> Result<Self> {
        Self::new(design, values.map(|x| Complex64::new(x, 0.0)))
    }

    pub fn design(&self) -> &SamplingDesign {
        &self.design
    }

    pub fn design_arc(&self) -> Arc<SamplingDesign> {
        Arc::clone(&self.design)
    }

    pub fn values(&self) -> &DMatrix<Complex64> {
        &self.values
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn p(&self) -> usize {
        self.values.ncols()
    }

    pub fn is_real(&self) -> bool {
        self.is_real
    }

    pub fn map_values<F: Fn(Complex64) -> Complex64>(&self, f: F) -> Result<Self> {
        Self::new(Arc::clone(&self.design), self.values.map(f))
    }

    /// Time reversal on a one-dimensional grid: `Y(t_i) = X(t_{n+1−i})`.
    pub fn time_reversed(&self) -> Result<Self> {
        if self.design.d() != 1 || !self.design.is_grid() {
            return Err(invalid("time reversal needs a one-dimensional grid"));
        }
        let n = self.n();
        let values = DMatrix::from_fn(n, self.p(), |i, j| self.values[(n - 1 - i, j)]);
        Self::new(Arc::clone(&self.design), values)
    }

    /// Columns: site coordinates, `j`, `re`, `im`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let d = self.design.d();
        let mut header: Vec<String> = (0..d).map(|k| format!("t{k}")).collect();
        header.extend(["j".into(), "re".into(), "im".into()]);
        w.write_record(&header)?;
        for i in 0..self.n() {
            for j in 0..self.p() {
                let mut rec: Vec<String> = self.design.point(i).iter().map(|x| format!("{x:.17e}")).collect();
                let v = self.values[(i, j)];
                rec.extend([j.to_string(), format!("{:.17e}", v.re), format!("{:.17e}", v.im)]);
                w.write_record(&rec)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the format of [`ProcessSample::write_csv`] back onto a known design.
    pub fn read_csv<R: std::io::Read>(design: Arc<SamplingDesign>, input: R) -> Result<Self> {
        let mut reader = csv::Reader::from_reader(input);
        let d = design.d();
        let rows: Vec<csv::StringRecord> = reader.records().collect::<std::result::Result<_, _>>()?;
        let n = design.n();
        if n == 0 || rows.len() % n != 0 {
            return Err(Error::Parse(format!("{} rows do not fit {n} sites", rows.len())));
        }
        let p = rows.len() / n;
        let mut values = DMatrix::from_element(n, p, ZERO);
        let num = |s: &str| s.trim().parse::<f64>().map_err(|_| Error::Parse(format!("bad number {s:?}")));
        for (r, rec) in rows.iter().enumerate() {
            if rec.len() != d + 3 {
                return Err(Error::Parse(format!("row {r} has {} fields, expected {}", rec.len(), d + 3)));
            }
            let (i, j) = (r / p, num(&rec[d])? as usize);
            if j >= p {
                return Err(Error::Parse(format!("coordinate index {j} out of range")));
            }
            values[(i, j)] = Complex64::new(num(&rec[d + 1])?, num(&rec[d + 2])?);
        }
        Self::new(design, values)
    }
}

fn normal(rng: &mut impl Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn jittered_cholesky(mut m: DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = m.nrows();
    let mean_diag = (0..n).map(|i| m[(i, i)]).sum::<f64>() / n as f64;
    let jitter = 1e-10 * mean_diag.abs().max(f64::MIN_POSITIVE);
    for i in 0..n {
        m[(i, i)] += jitter;
    }
    Cholesky::new(m).map(|c| c.unpack()).ok_or(Error::NotPositiveDefinite)
}

fn scalar_gram(rho: &RhoFamily, design: &SamplingDesign) -> DMatrix<f64> {
    let n = design.n();
    let mut r = DMatrix::zeros(n, n);
    for a in 0..n {
        for b in 0..=a {
            let h: Vec<f64> = design.point(a).iter().zip(design.point(b)).map(|(x, y)| x - y).collect();
            let v = rho.eval_vec(&h);
            r[(a, b)] = v;
            r[(b, a)] = v;
        }
    }
    r
}

enum ExactPlan {
    /// `X = L Z S` for a real separable model (`S` the symmetric root of Σ₀).
    Separable { chol: DMatrix<f64>, root: DMatrix<Complex64> },
    /// Independent coordinates, one factor each.
    Diagonal { chols: Vec<DMatrix<f64>> },
    /// Factor of the real lift `(U, V)` of the `n·p` complex vector.
    Lift { chol: DMatrix<f64> },
}

/// Exact Gaussian sampler with the covariance factorisation cached.
pub struct ExactSampler {
    design: Arc<SamplingDesign>,
    p: usize,
    plan: ExactPlan,
    real: bool,
}

/// Designs larger than this (in `n·p`) are rejected by the exact sampler.
pub const EXACT_MAX_NP: usize = 8000;

impl ExactSampler {
    pub fn new(model: &CovarianceModel, design: Arc<SamplingDesign>) -> Result<Self> {
        if design.d() != model.d() {
            return Err(Error::DimensionMismatch { expected: model.d(), actual: design.d() });
        }
        let n = design.n();
        let p = model.p();
        if n * p > EXACT_MAX_NP {
            return Err(invalid(format!("exact sampling is limited to n·p ≤ {EXACT_MAX_NP}, got {}", n * p)));
        }
        let real = model.is_real();
        let plan = match (model.structure(), real) {
            (Structure::Separable { rho, sigma0 }, true) => {
                let chol = jittered_cholesky(scalar_gram(rho, &design))?;
                let root = sigma0.psd_sqrt(1e-10)?.into_matrix().transpose();
                ExactPlan::Separable { chol, root }
            }
            (Structure::Diagonal { terms }, true) => ExactPlan::Diagonal {
                chols: terms
                    .iter()
                    .map(|(nu, rho)| jittered_cholesky(scalar_gram(rho, &design) * *nu))
                    .collect::<Result<_>>()?,
            },
            _ => ExactPlan::Lift { chol: Self::lift_factor(model, &design)? },
        };
        Ok(Self { design, p, plan, real })
    }

    fn lift_factor(model: &CovarianceModel, design: &SamplingDesign) -> Result<DMatrix<f64>> {
        let (n, p) = (design.n(), model.p());
        let big = n * p;
        let mut gamma = DMatrix::from_element(big, big, ZERO);
        let mut check = DMatrix::from_element(big, big, ZERO);
        for a in 0..n {
            for b in 0..n {
                let h: Vec<f64> = design.point(a).iter().zip(design.point(b)).map(|(x, y)| x - y).collect();
                let c = model.cov_at(&h)?;
                let cc = model.pseudo_cov_at(&h)?;
                for j in 0..p {
                    for k in 0..p {
                        gamma[(a * p + j, b * p + k)] = c.get(j, k);
                        check[(a * p + j, b * p + k)] = cc.get(j, k);
                    }
                }
            }
        }
        let mut lift = DMatrix::zeros(2 * big, 2 * big);
        for r in 0..big {
            for c in 0..big {
                let g = gamma[(r, c)];
                let gc = check[(r, c)];
                let uu = 0.5 * (g.re + gc.re);
                let vv = 0.5 * (g.re - gc.re);
                let uv = 0.5 * (gc.im - g.im);
                lift[(r, c)] = uu;
                lift[(big + r, big + c)] = vv;
                lift[(r, big + c)] = uv;
                lift[(big + c, r)] = uv;
            }
        }
        jittered_cholesky(lift)
    }

    pub fn sample(&self, rng: &mut impl Rng) -> Result<ProcessSample> {
        let n = self.design.n();
        let p = self.p;
        let values = match &self.plan {
            ExactPlan::Separable { chol, root } => {
                let z = DMatrix::from_fn(n, p, |_, _| normal(rng));
                let y = (chol * z).map(|x| Complex64::new(x, 0.0));
                y * root
            }
            ExactPlan::Diagonal { chols } => {
                let mut out = DMatrix::from_element(n, p, ZERO);
                for (j, l) in chols.iter().enumerate() {
                    let z = DVector::from_fn(n, |_, _| normal(rng));
                    let col = l * z;
                    for i in 0..n {
                        out[(i, j)] = Complex64::new(col[i], 0.0);
                    }
                }
                out
            }
            ExactPlan::Lift { chol } => {
                let big = n * p;
                let z = DVector::from_fn(2 * big, |_, _| normal(rng));
                let w = chol * z;
                DMatrix::from_fn(n, p, |i, j| Complex64::new(w[i * p + j], w[big + i * p + j]))
            }
        };
        let mut s = ProcessSample::new(Arc::clone(&self.design), values)?;
        if self.real {
            s.is_real = true;
            s.values.iter_mut().for_each(|c| c.im = 0.0);
        }
        Ok(s)
    }
}

pub fn sample_gaussian_exact(model: &CovarianceModel, design: Arc<SamplingDesign>, rng: &mut impl Rng) -> Result<ProcessSample> {
    ExactSampler::new(model, design)?.sample(rng)
}

/// Circulant-embedding sampler for real models on a one-dimensional grid.
pub struct FftSampler {
    design: Arc<SamplingDesign>,
    m: usize,
    /// `sqrt(λ/m)` per independent scalar field.
    scales: Vec<Vec<f64>>,
    /// Colouring applied to the scalar fields (row vector convention `X = Y R`).
    colour: Option<DMatrix<f64>>,
    fft: Arc<dyn Fft<f64>>,
}

/// Negative embedding eigenvalues above this (relative) level are clipped silently.
pub const EMBEDDING_TOL: f64 = 1e-9;
pub const EMBEDDING_MAX_DOUBLINGS: u32 = 4;

impl FftSampler {
    pub fn new(model: &CovarianceModel, n: usize, delta: f64) -> Result<Self> {
        if model.d() != 1 {
            return Err(Error::NotApplicable("circulant embedding is implemented for d = 1".into()));
        }
        if *model.pseudo() != PseudoSpec::Real {
            return Err(Error::NotApplicable("circulant embedding needs a real model".into()));
        }
        let design = Arc::new(SamplingDesign::grid_1d(delta, n)?);
        let (rhos, weights, colour): (Vec<RhoFamily>, Vec<f64>, Option<DMatrix<f64>>) = match model.structure() {
            Structure::Separable { rho, sigma0 } => {
                let root = sigma0.psd_sqrt(1e-10)?;
                (vec![*rho], vec![1.0], Some(root.real_part().into_matrix().map(|c| c.re)))
            }
            Structure::Diagonal { terms } => (terms.iter().map(|t| t.1).collect(), terms.iter().map(|t| t.0).collect(), None),
        };
        let mut planner = FftPlanner::new();
        let mut m = 2 * n.max(1);
        let mut doublings = 0;
        loop {
            let fft = planner.plan_fft_forward(m);
            let mut worst: f64 = 0.0;
            let mut scales = Vec::with_capacity(rhos.len());
            for (rho, w) in rhos.iter().zip(&weights) {
                let mut buf: Vec<Complex64> =
                    (0..m).map(|k| Complex64::new(rho.eval(k.min(m - k) as f64 * delta), 0.0)).collect();
                fft.process(&mut buf);
                let top = buf.iter().map(|c| c.re).fold(0.0, f64::max);
                let min = buf.iter().map(|c| c.re).fold(f64::INFINITY, f64::min);
                worst = worst.min(min / top);
                scales.push(buf.iter().map(|c| (w * c.re.max(0.0) / m as f64).sqrt()).collect());
            }
            if worst >= -EMBEDDING_TOL {
                return Ok(Self { design, m, scales, colour, fft });
            }
            if doublings == EMBEDDING_MAX_DOUBLINGS {
                return Err(Error::EmbeddingFailed { min_eigenvalue: worst, doublings });
            }
            doublings += 1;
            m *= 2;
        }
    }

    pub fn embedding_size(&self) -> usize {
        self.m
    }

    pub fn design(&self) -> Arc<SamplingDesign> {
        Arc::clone(&self.design)
    }

    fn p(&self) -> usize {
        match &self.colour {
            Some(c) => c.nrows(),
            None => self.scales.len(),
        }
    }

    pub fn sample(&self, rng: &mut impl Rng) -> Result<ProcessSample> {
        let n = self.design.n();
        let p = self.p();
        let mut fields = DMatrix::<f64>::zeros(n, p);
        let mut buf = vec![ZERO; self.m];
        // one transform yields two independent fields with the same spectrum
        let mut draw = |sc: &[f64], buf: &mut Vec<Complex64>| {
            for (b, v) in buf.iter_mut().zip(sc) {
                *b = Complex64::new(v * normal(rng), v * normal(rng));
            }
            self.fft.process(buf);
        };
        if self.colour.is_some() {
            for j in (0..p).step_by(2) {
                draw(&self.scales[0], &mut buf);
                for i in 0..n {
                    fields[(i, j)] = buf[i].re;
                    if j + 1 < p {
                        fields[(i, j + 1)] = buf[i].im;
                    }
                }
            }
        } else {
            for (j, sc) in self.scales.iter().enumerate() {
                draw(sc, &mut buf);
                for i in 0..n {
                    fields[(i, j)] = buf[i].re;
                }
            }
        }
        let values = match &self.colour {
            Some(root) => fields * root,
            None => fields,
        };
        ProcessSample::from_real(Arc::clone(&self.design), &values)
    }
}

pub fn sample_gaussian_grid_fft(model: &CovarianceModel, n: usize, delta: f64, rng: &mut impl Rng) -> Result<ProcessSample> {
    FftSampler::new(model, n, delta)?.sample(rng)
}

/// `X(t) = Z(t)² − 1` with `Z` standard Gaussian with correlation `ρ_Z`.
pub fn sample_chi_square(rho_z: RhoFamily, design: Arc<SamplingDesign>, rng: &mut impl Rng) -> Result<ProcessSample> {
    let model = CovarianceModel::separable(design.d(), rho_z, OperatorRep::identity(1))?;
    let z = sample_gaussian_exact(&model, design, rng)?;
    z.map_values(|c| Complex64::new(c.re * c.re - 1.0, 0.0))
}

/// Truncated moving average `X(t) = Σ_{|s|≤S} A_s ε_{t−s}` with iid `N(0, Σ_ε)` innovations.
#[derive(Debug, Clone)]
pub struct LinearProcess {
    /// `coeffs[s + S] = A_s`.
    coeffs: Vec<OperatorRep>,
    sigma_eps: OperatorRep,
    half_width: usize,
}

impl LinearProcess {
    pub fn new(coeffs: Vec<OperatorRep>, sigma_eps: OperatorRep) -> Result<Self> {
        if coeffs.len() % 2 == 0 {
            return Err(invalid("coefficients must be indexed symmetrically, s = −S..=S"));
        }
        let half_width = coeffs.len() / 2;
        if half_width > 64 {
            return Err(invalid("at most 64 lags on each side are supported"));
        }
        let p = sigma_eps.p();
        if let Some(bad) = coeffs.iter().find(|a| a.p() != p) {
            return Err(Error::DimensionMismatch { expected: p, actual: bad.p() });
        }
        sigma_eps.eig_self_adjoint(SELF_ADJOINT_TOL)?;
        Ok(Self { coeffs, sigma_eps, half_width })
    }

    pub fn p(&self) -> usize {
        self.sigma_eps.p()
    }

    pub fn half_width(&self) -> usize {
        self.half_width
    }

    pub fn coeff(&self, s: i64) -> Option<&OperatorRep> {
        let idx = s + self.half_width as i64;
        if idx < 0 {
            return None;
        }
        self.coeffs.get(idx as usize)
    }

    pub fn coeffs(&self) -> &[OperatorRep] {
        &self.coeffs
    }

    pub fn sigma_eps(&self) -> &OperatorRep {
        &self.sigma_eps
    }

    /// `C(h) = Σ_s A_{s+h} Σ_ε A_s*`.
    pub fn cov(&self, h: i64) -> OperatorRep {
        let mut out = OperatorRep::zeros(self.p());
        let s_max = self.half_width as i64;
        for s in -s_max..=s_max {
            if let Some(a) = self.coeff(s + h) {
                let b = self.coeff(s).expect("index in range");
                out += &OperatorRep::from_matrix(a.matrix() * self.sigma_eps.matrix() * b.matrix().adjoint()).expect("square");
            }
        }
        out
    }

    pub fn sample(&self, n: usize, rng: &mut impl Rng) -> Result<ProcessSample> {
        let design = Arc::new(SamplingDesign::grid_1d(1.0, n)?);
        let p = self.p();
        let s = self.half_width;
        let root = self.sigma_eps.psd_sqrt(1e-10)?;
        // innovations ε_u for u = 1 − S ..= n + S, stored at index u − 1 + S
        let len = n + 2 * s;
        let eps: Vec<DVector<Complex64>> = (0..len)
            .map(|_| {
                let z = DVector::from_fn(p, |_, _| Complex64::new(normal(rng), 0.0));
                root.matrix() * z
            })
            .collect();
        let mut values = DMatrix::from_element(n, p, ZERO);
        for t in 0..n {
            let mut acc = DVector::from_element(p, ZERO);
            for (k, a) in self.coeffs.iter().enumerate() {
                let lag = k as i64 - s as i64;
                // ε_{t−lag} lives at index t − lag + S (t counted from 0)
                let idx = (t as i64 - lag + s as i64) as usize;
                acc += a.matrix() * &eps[idx];
            }
            values.set_row(t, &acc.transpose());
        }
        ProcessSample::new(design, values)
    }
}

/// Grid spacing and per-axis counts of a grid design.
pub fn grid_shape(design: &SamplingDesign) -> Result<(f64, Vec<usize>)> {
    match design.kind() {
        DesignKind::Grid { delta, counts } => Ok((*delta, counts.clone())),
        DesignKind::Irregular => Err(invalid("design is not a grid")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::real_sigma;
    use crate::stats::mean_se;

    fn sigma3() -> OperatorRep {
        real_sigma(3, &[2.0, 0.6, 0.2, 0.6, 1.0, -0.3, 0.2, -0.3, 0.7]).unwrap()
    }

    fn re(c: Complex64) -> f64 {
        c.re
    }

    #[test]
    fn substreams_are_reproducible_and_distinct() {
        let cfg = RngConfig::new(42);
        let a: f64 = cfg.stream(&[1, 2, 3]).random();
        let b: f64 = cfg.stream(&[1, 2, 3]).random();
        let c: f64 = cfg.stream(&[1, 2, 4]).random();
        let d: f64 = RngConfig::new(43).stream(&[1, 2, 3]).random();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
    }

    #[test]
    fn single_site_marginal_covariance() {
        let model = CovarianceModel::separable(1, RhoFamily::Exponential { a: 1.0 }, sigma3()).unwrap();
        let design = Arc::new(SamplingDesign::irregular(1, vec![0.0]).unwrap());
        let sampler = ExactSampler::new(&model, design).unwrap();
        let mut rng = RngConfig::new(1).stream(&[0]);
        let reps = 100_000;
        let mut prods = vec![Vec::with_capacity(reps); 9];
        for _ in 0..reps {
            let x = sampler.sample(&mut rng).unwrap();
            assert!(x.is_real());
            for j in 0..3 {
                for k in 0..3 {
                    prods[j * 3 + k].push(re(x.values()[(0, j)]) * re(x.values()[(0, k)]));
                }
            }
        }
        let sigma = sigma3();
        for j in 0..3 {
            for k in 0..3 {
                let (m, se) = mean_se(&prods[j * 3 + k]);
                assert!((m - sigma.get(j, k).re).abs() < 4.0 * se, "({j},{k}) {m}");
            }
        }
    }

    #[test]
    fn two_sites_cross_covariance() {
        let model = CovarianceModel::separable(1, RhoFamily::Exponential { a: 1.0 }, OperatorRep::identity(2)).unwrap();
        let design = Arc::new(SamplingDesign::irregular(1, vec![0.0, 2f64.ln()]).unwrap());
        let sampler = ExactSampler::new(&model, design).unwrap();
        let mut rng = RngConfig::new(2).stream(&[0]);
        let prods: Vec<f64> = (0..50_000)
            .map(|_| {
                let x = sampler.sample(&mut rng).unwrap();
                re(x.values()[(0, 1)] * x.values()[(1, 1)])
            })
            .collect();
        let (m, se) = mean_se(&prods);
        assert!((m - 0.5).abs() < 4.0 * se);
    }

    #[test]
    fn white_noise_has_no_lag_one_covariance() {
        let model = CovarianceModel::separable(1, RhoFamily::Ar1Lattice { a: 0.0, delta: 1.0 }, OperatorRep::identity(1)).unwrap();
        let x = sample_gaussian_exact(&model, Arc::new(SamplingDesign::grid_1d(1.0, 4000).unwrap().as_irregular()), &mut RngConfig::new(3).stream(&[0]));
        // n·p = 4000 is within the exact limit
        let x = x.unwrap();
        let lag: Vec<f64> = (0..3999).map(|i| re(x.values()[(i, 0)] * x.values()[(i + 1, 0)])).collect();
        let (m, se) = mean_se(&lag);
        assert!(m.abs() < 4.0 * se);
    }

    #[test]
    fn fft_path_autocovariances() {
        let model = CovarianceModel::separable(1, RhoFamily::Exponential { a: 0.5 }, sigma3()).unwrap();
        let sampler = FftSampler::new(&model, 32, 1.0).unwrap();
        let reps = 10_000;
        let mut means = vec![Vec::with_capacity(reps); 3];
        let mut lags = vec![Vec::with_capacity(reps); 6];
        let mut rng = RngConfig::new(4).stream(&[0]);
        for _ in 0..reps {
            let x = sampler.sample(&mut rng).unwrap();
            for j in 0..3 {
                means[j].push(re(x.values()[(5, j)]));
            }
            for k in 0..6 {
                lags[k].push(re(x.values()[(10 + k, 0)] * x.values()[(10, 1)]));
            }
        }
        for m in &means {
            let (mu, se) = mean_se(m);
            assert!(mu.abs() < 4.0 * se);
        }
        for (k, l) in lags.iter().enumerate() {
            let (mu, se) = mean_se(l);
            let target = (-0.5 * k as f64).exp() * 0.6;
            assert!((mu - target).abs() < 4.0 * se, "lag {k}: {mu} vs {target}");
        }
    }

    #[test]
    fn fft_and_exact_paths_agree_on_lag_variances() {
        let model = CovarianceModel::separable(1, RhoFamily::Gaussian { a: 0.1 }, OperatorRep::identity(1)).unwrap();
        let fft = FftSampler::new(&model, 64, 1.0).unwrap();
        let exact = ExactSampler::new(&model, fft.design()).unwrap();
        let mut r1 = RngConfig::new(5).stream(&[0]);
        let mut r2 = RngConfig::new(5).stream(&[1]);
        let reps = 4000;
        for lag in [0usize, 1, 3] {
            let a: Vec<f64> = (0..reps).map(|_| { let x = fft.sample(&mut r1).unwrap(); re(x.values()[(20, 0)] * x.values()[(20 + lag, 0)]) }).collect();
            let b: Vec<f64> = (0..reps).map(|_| { let x = exact.sample(&mut r2).unwrap(); re(x.values()[(20, 0)] * x.values()[(20 + lag, 0)]) }).collect();
            let (ma, sa) = mean_se(&a);
            let (mb, sb) = mean_se(&b);
            // two-sample z test at the 5% level
            assert!((ma - mb).abs() < 1.96 * (sa * sa + sb * sb).sqrt() * 1.5, "lag {lag}");
        }
    }

    #[test]
    fn fft_diagonal_model() {
        let model = CovarianceModel::diagonal(1, vec![(1.0, RhoFamily::Exponential { a: 1.0 }), (0.5, RhoFamily::Gaussian { a: 0.2 }), (2.0, RhoFamily::PowerLaw { beta: 1.0 })]).unwrap();
        let sampler = FftSampler::new(&model, 16, 1.0).unwrap();
        let mut rng = RngConfig::new(6).stream(&[0]);
        let reps = 20_000;
        let mut v = vec![Vec::with_capacity(reps); 3];
        for _ in 0..reps {
            let x = sampler.sample(&mut rng).unwrap();
            for j in 0..3 {
                v[j].push(re(x.values()[(3, j)] * x.values()[(4, j)]));
            }
        }
        let targets = [(-1.0f64).exp(), 0.5 * (-0.2f64).exp(), 2.0 * 0.25];
        for j in 0..3 {
            let (m, se) = mean_se(&v[j]);
            assert!((m - targets[j]).abs() < 4.0 * se, "coord {j}");
        }
    }

    #[test]
    fn embedding_failure_reported() {
        // a Gaussian correlation with a long range on a short grid needs more padding than allowed
        let model = CovarianceModel::separable(1, RhoFamily::Gaussian { a: 1e-6 }, OperatorRep::identity(1)).unwrap();
        assert!(matches!(FftSampler::new(&model, 8, 1.0), Err(Error::EmbeddingFailed { .. })));
    }

    #[test]
    fn reproducible_samples() {
        let model = CovarianceModel::separable(1, RhoFamily::Exponential { a: 1.0 }, sigma3()).unwrap();
        let s = FftSampler::new(&model, 50, 0.5).unwrap();
        let a = s.sample(&mut RngConfig::new(9).stream(&[7])).unwrap();
        let b = s.sample(&mut RngConfig::new(9).stream(&[7])).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn chi_square_moments() {
        let rho = RhoFamily::Exponential { a: 0.7 };
        let design = Arc::new(SamplingDesign::irregular(1, vec![0.0, 0.4, 1.1]).unwrap());
        let model = CovarianceModel::separable(1, rho, OperatorRep::identity(1)).unwrap();
        let sampler = ExactSampler::new(&model, Arc::clone(&design)).unwrap();
        let mut rng = RngConfig::new(10).stream(&[0]);
        let reps = 200_000;
        let (mut m1, mut m2, mut m3) = (Vec::new(), Vec::new(), Vec::new());
        for _ in 0..reps {
            let z = sampler.sample(&mut rng).unwrap();
            let x: Vec<f64> = (0..3).map(|i| z.values()[(i, 0)].re.powi(2) - 1.0).collect();
            m1.push(x[0]);
            m2.push(x[0] * x[1]);
            m3.push(x[0] * x[1] * x[2]);
        }
        let (r12, r13, r23) = (rho.eval(0.4), rho.eval(1.1), rho.eval(0.7));
        let (a, sa) = mean_se(&m1);
        assert!(a.abs() < 4.0 * sa);
        let (b, sb) = mean_se(&m2);
        assert!((b - 2.0 * r12 * r12).abs() < 4.0 * sb);
        let (c, sc) = mean_se(&m3);
        assert!((c - 8.0 * r12 * r13 * r23).abs() < 4.0 * sc);
        let direct = sample_chi_square(rho, design, &mut rng).unwrap();
        assert!(direct.values().iter().all(|v| v.re >= -1.0 && v.im == 0.0));
    }

    #[test]
    fn linear_process_covariance() {
        let lp = LinearProcess::new(
            vec![OperatorRep::zeros(2), OperatorRep::identity(2), OperatorRep::identity(2).scale_real(0.5)],
            OperatorRep::identity(2),
        )
        .unwrap();
        assert!(lp.cov(0).max_abs_diff(&OperatorRep::identity(2).scale_real(1.25)) < 1e-15);
        assert!(lp.cov(1).max_abs_diff(&OperatorRep::identity(2).scale_real(0.5)) < 1e-15);
        assert!(lp.cov(-1).max_abs_diff(&OperatorRep::identity(2).scale_real(0.5)) < 1e-15);
        assert_eq!(lp.cov(2).hs_norm(), 0.0);
        let mut rng = RngConfig::new(11).stream(&[0]);
        let (mut c0, mut c1, mut k4) = (Vec::new(), Vec::new(), Vec::new());
        for _ in 0..20_000 {
            let x = lp.sample(6, &mut rng).unwrap();
            let (a, b) = (x.values()[(3, 0)].re, x.values()[(2, 0)].re);
            c0.push(a * a);
            c1.push(a * b);
            k4.push(a.powi(4));
        }
        let (m0, s0) = mean_se(&c0);
        let (m1, s1) = mean_se(&c1);
        assert!((m0 - 1.25).abs() < 4.0 * s0);
        assert!((m1 - 0.5).abs() < 4.0 * s1);
        // fourth cumulant E X⁴ − 3 (E X²)² of a Gaussian output vanishes
        let (m4, s4) = mean_se(&k4);
        assert!((m4 - 3.0 * 1.25f64.powi(2)).abs() < 4.0 * s4);
    }

    #[test]
    fn white_linear_process() {
        let lp = LinearProcess::new(vec![OperatorRep::identity(3)], OperatorRep::identity(3)).unwrap();
        assert_eq!(lp.cov(1).hs_norm(), 0.0);
        assert_eq!(lp.cov(0), OperatorRep::identity(3));
    }

    #[test]
    fn complex_model_pseudo_covariance() {
        let mix = OperatorRep::from_matrix(DMatrix::from_row_slice(
            2,
            2,
            &[Complex64::new(1.0, 0.5), Complex64::new(0.2, 0.0), Complex64::new(0.0, -0.3), Complex64::new(0.8, 0.1)],
        ))
        .unwrap();
        let model = CovarianceModel::mixed_real(1, RhoFamily::Exponential { a: 1.0 }, &OperatorRep::identity(2), &mix).unwrap();
        let design = Arc::new(SamplingDesign::irregular(1, vec![0.0, 0.5]).unwrap());
        let sampler = ExactSampler::new(&model, design).unwrap();
        let mut rng = RngConfig::new(12).stream(&[0]);
        let reps = 40_000;
        let (mut cov, mut pse) = (Vec::new(), Vec::new());
        for _ in 0..reps {
            let x = sampler.sample(&mut rng).unwrap();
            cov.push(x.values()[(1, 0)] * x.values()[(0, 1)].conj());
            pse.push(x.values()[(1, 0)] * x.values()[(0, 1)]);
        }
        let c = model.cov_at(&[0.5]).unwrap().get(0, 1);
        let cc = model.pseudo_cov_at(&[0.5]).unwrap().get(0, 1);
        for (v, target) in [(cov, c), (pse, cc)] {
            let (mr, sr) = mean_se(&v.iter().map(|z| z.re).collect::<Vec<_>>());
            let (mi, si) = mean_se(&v.iter().map(|z| z.im).collect::<Vec<_>>());
            assert!((mr - target.re).abs() < 4.0 * sr && (mi - target.im).abs() < 4.0 * si);
        }
    }

    #[test]
    fn sample_csv_round_trip() {
        let design = Arc::new(SamplingDesign::grid_1d(0.5, 4).unwrap());
        let values = DMatrix::from_fn(4, 2, |i, j| Complex64::new(i as f64 + 0.25, -(j as f64)));
        let s = ProcessSample::new(Arc::clone(&design), values).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        assert_eq!(ProcessSample::read_csv(design, &buf[..]).unwrap(), s);
    }
}
