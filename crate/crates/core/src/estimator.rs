//! Lag-window spectral density estimators.
//!
//! Three variants share one convention: `f̂(θ) = Σ_h e^{ih·θ} K(h/Δ) w(h) X(t)⊗X(s)` summed over
//! site pairs with `h = t − s`, so that `E f̂(θ)` is a tapered Fourier sum of `C(h)`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::io::Write;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{DesignKind, Domain, SamplingDesign, Tessellation};
use crate::kernels::KernelSpec;
use crate::models::{CovarianceModel, Structure};
use crate::operator::OperatorRep;
use crate::quad;
use crate::simulate::ProcessSample;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Irregular,
    Grid,
    CltD1,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Irregular => "irregular",
            Variant::Grid => "grid",
            Variant::CltD1 => "clt_d1",
        }
    }
}

/// Divide each pair by `|T ∩ (T − h)|` or by `|T|`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    #[default]
    Overlap,
    PlainVolume,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorConfig {
    pub bandwidth: f64,
    pub kernel: KernelSpec,
    pub thetas: Vec<Vec<f64>>,
    pub variant: Variant,
    pub normalization: Normalization,
    pub fast_path: bool,
}

impl EstimatorConfig {
    pub fn new(bandwidth: f64, kernel: KernelSpec, thetas: Vec<Vec<f64>>, variant: Variant) -> Result<Self> {
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(invalid(format!("bandwidth must be positive, got {bandwidth}")));
        }
        if thetas.is_empty() {
            return Err(invalid("no evaluation frequencies"));
        }
        if let Some(t) = thetas.iter().find(|t| t.len() != kernel.d()) {
            return Err(Error::DimensionMismatch { expected: kernel.d(), actual: t.len() });
        }
        Ok(Self { bandwidth, kernel, thetas, variant, normalization: Normalization::Overlap, fast_path: true })
    }

    pub fn with_normalization(mut self, normalization: Normalization) -> Self {
        self.normalization = normalization;
        self
    }

    pub fn with_fast_path(mut self, fast_path: bool) -> Self {
        self.fast_path = fast_path;
        self
    }

    fn reach(&self) -> f64 {
        self.bandwidth * self.kernel.support_radius()
    }

    fn check_support(&self, limit: f64) -> Result<()> {
        if self.reach() > limit * (1.0 + 1e-12) {
            return Err(Error::BandwidthTooLarge { bandwidth: self.bandwidth, limit });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateMeta {
    pub bandwidth: f64,
    pub n: usize,
    /// Grid spacing; `None` for irregular designs.
    pub delta: Option<f64>,
    pub variant: Variant,
    pub kernel: String,
    pub wall_time: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralEstimate {
    pub thetas: Vec<Vec<f64>>,
    pub values: Vec<OperatorRep>,
    pub meta: EstimateMeta,
}

impl SpectralEstimate {
    pub fn get(&self, i: usize) -> &OperatorRep {
        &self.values[i]
    }

    /// Columns: `theta0[,theta1…],j,k,re,im`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let d = self.thetas.first().map_or(1, Vec::len);
        let mut header: Vec<String> = (0..d).map(|k| format!("theta{k}")).collect();
        header.extend(["j", "k", "re", "im"].map(String::from));
        w.write_record(&header)?;
        for (theta, f) in self.thetas.iter().zip(&self.values) {
            for j in 0..f.p() {
                for k in 0..f.p() {
                    let mut rec: Vec<String> = theta.iter().map(|x| format!("{x:.17e}")).collect();
                    let v = f.get(j, k);
                    rec.extend([j.to_string(), k.to_string(), format!("{:.17e}", v.re), format!("{:.17e}", v.im)]);
                    w.write_record(&rec)?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Equispaced points over the fundamental domain `[−π/δ, π/δ]ᵈ`, endpoints included.
pub fn fundamental_thetas(d: usize, delta: f64, per_axis: usize) -> Vec<Vec<f64>> {
    let half = PI / delta;
    let axis: Vec<f64> = if per_axis == 1 {
        vec![0.0]
    } else {
        (0..per_axis).map(|i| -half + 2.0 * half * i as f64 / (per_axis - 1) as f64).collect()
    };
    let mut out = vec![Vec::new()];
    for _ in 0..d {
        out = out.into_iter().flat_map(|p| axis.iter().map(move |&a| [p.clone(), vec![a]].concat())).collect();
    }
    out
}

/// `|T|^{1/(2β+d)}`.
pub fn bandwidth_rule(beta: f64, domain_volume: f64, d: usize) -> f64 {
    domain_volume.powf(1.0 / (2.0 * beta + d as f64))
}

/// `(1 + (2/d + 1/β)γ)^{−1}`.
pub fn alpha_threshold(beta: f64, gamma: f64, d: usize) -> f64 {
    1.0 / (1.0 + (2.0 / d as f64 + 1.0 / beta) * gamma)
}

fn grid_shape(design: &SamplingDesign) -> Result<(f64, Vec<usize>)> {
    match design.kind() {
        DesignKind::Grid { delta, counts } => Ok((*delta, counts.clone())),
        DesignKind::Irregular => Err(invalid("grid estimator needs a grid design")),
    }
}

/// Lags in the half-space `{0} ∪ {k : first nonzero component > 0}` within the kernel support.
fn half_lags(counts: &[usize], delta: f64, reach: f64) -> Vec<Vec<i64>> {
    let d = counts.len();
    let bound: Vec<i64> = counts.iter().map(|&n| ((reach / delta + 1e-9).floor() as i64).min(n as i64 - 1)).collect();
    let mut lags = Vec::new();
    let mut k = vec![0i64; d];
    fn rec(axis: usize, k: &mut Vec<i64>, bound: &[i64], delta: f64, reach: f64, out: &mut Vec<Vec<i64>>) {
        if axis == k.len() {
            let first = k.iter().find(|&&c| c != 0);
            let r2: f64 = k.iter().map(|&c| (c as f64 * delta).powi(2)).sum();
            if first.is_none_or(|&c| c > 0) && r2.sqrt() <= reach * (1.0 + 1e-12) {
                out.push(k.clone());
            }
            return;
        }
        for c in -bound[axis]..=bound[axis] {
            k[axis] = c;
            rec(axis + 1, k, bound, delta, reach, out);
        }
    }
    rec(0, &mut k, &bound, delta, reach, &mut lags);
    // put the zero lag first
    lags.sort_by_key(|k| k.iter().any(|&c| c != 0));
    lags
}

fn flat_index(idx: &[usize], counts: &[usize]) -> usize {
    idx.iter().zip(counts).fold(0, |acc, (&i, &n)| acc * n + i)
}

/// Lag sums `Σ_{t−s=k} X(t) X(s)ᴴ` by direct summation.
fn lag_sums_naive(values: &DMatrix<Complex64>, counts: &[usize], lags: &[Vec<i64>]) -> Vec<DMatrix<Complex64>> {
    let p = values.ncols();
    let n: usize = counts.iter().product();
    lags.par_iter()
        .map(|k| {
            let mut acc = DMatrix::from_element(p, p, ZERO);
            let mut idx = vec![0usize; counts.len()];
            let mut sidx = vec![0usize; counts.len()];
            for flat in 0..n {
                let mut rem = flat;
                for a in (0..counts.len()).rev() {
                    idx[a] = rem % counts[a];
                    rem /= counts[a];
                }
                let ok = idx.iter().zip(k).zip(counts).all(|((&i, &c), &m)| {
                    let s = i as i64 - c;
                    s >= 0 && s < m as i64
                });
                if !ok {
                    continue;
                }
                for a in 0..counts.len() {
                    sidx[a] = (idx[a] as i64 - k[a]) as usize;
                }
                let s = flat_index(&sidx, counts);
                for j in 0..p {
                    let xt = values[(flat, j)];
                    for l in 0..p {
                        acc[(j, l)] += xt * values[(s, l)].conj();
                    }
                }
            }
            acc
        })
        .collect()
}

/// In-place multidimensional FFT of a row-major array (last axis fastest).
fn fft_nd(buf: &mut [Complex64], dims: &[usize], inverse: bool, planner: &mut FftPlanner<f64>) {
    let total: usize = dims.iter().product();
    let mut stride = 1;
    for axis in (0..dims.len()).rev() {
        let len = dims[axis];
        let fft = if inverse { planner.plan_fft_inverse(len) } else { planner.plan_fft_forward(len) };
        let mut line = vec![ZERO; len];
        let block = len * stride;
        for outer in (0..total).step_by(block) {
            for inner in 0..stride {
                let base = outer + inner;
                for (q, v) in line.iter_mut().enumerate() {
                    *v = buf[base + q * stride];
                }
                fft.process(&mut line);
                for (q, v) in line.iter().enumerate() {
                    buf[base + q * stride] = *v;
                }
            }
        }
        stride *= len;
    }
}

/// Lag sums via zero-padded FFT cross-correlations.
fn lag_sums_fft(values: &DMatrix<Complex64>, counts: &[usize], lags: &[Vec<i64>]) -> Vec<DMatrix<Complex64>> {
    let p = values.ncols();
    let dims: Vec<usize> = counts.iter().map(|&n| 2 * n).collect();
    let total: usize = dims.iter().product();
    let n: usize = counts.iter().product();
    let mut planner = FftPlanner::new();
    let mut spectra = Vec::with_capacity(p);
    for j in 0..p {
        let mut buf = vec![ZERO; total];
        let mut idx = vec![0usize; counts.len()];
        for flat in 0..n {
            let mut rem = flat;
            for a in (0..counts.len()).rev() {
                idx[a] = rem % counts[a];
                rem /= counts[a];
            }
            buf[flat_index(&idx, &dims)] = values[(flat, j)];
        }
        fft_nd(&mut buf, &dims, false, &mut planner);
        spectra.push(buf);
    }
    let lag_pos: Vec<usize> = lags
        .iter()
        .map(|k| {
            let idx: Vec<usize> = k.iter().zip(&dims).map(|(&c, &m)| c.rem_euclid(m as i64) as usize).collect();
            flat_index(&idx, &dims)
        })
        .collect();
    let pairs: Vec<(usize, usize)> = (0..p).flat_map(|j| (0..p).map(move |l| (j, l))).collect();
    let cols: Vec<Vec<Complex64>> = pairs
        .par_iter()
        .map(|&(j, l)| {
            let mut buf: Vec<Complex64> = spectra[j].iter().zip(&spectra[l]).map(|(a, b)| a * b.conj()).collect();
            let mut planner = FftPlanner::new();
            fft_nd(&mut buf, &dims, true, &mut planner);
            lag_pos.iter().map(|&q| buf[q] / total as f64).collect()
        })
        .collect();
    (0..lags.len())
        .map(|q| DMatrix::from_fn(p, p, |j, l| cols[j * p + l][q]))
        .collect()
}

/// Half-space lag table `(k, K(kδ/Δ)·M_k)` ready for the Fourier sum.
struct LagTable {
    delta: f64,
    lags: Vec<Vec<i64>>,
    mats: Vec<DMatrix<Complex64>>,
    scale: f64,
}

impl LagTable {
    fn eval(&self, theta: &[f64]) -> OperatorRep {
        let (r0, l0) = (self.delta, &self.lags);
        let p = self.mats[0].nrows();
        let theta = reduce_theta(theta, r0);
        let mut acc = DMatrix::from_element(p, p, ZERO);
        for (k, m) in l0.iter().zip(&self.mats) {
            if k.iter().all(|&c| c == 0) {
                acc += (m + m.adjoint()) * Complex64::new(0.5, 0.0);
                continue;
            }
            let phase: f64 = k.iter().zip(&theta).map(|(&c, t)| c as f64 * r0 * t).sum();
            let term = m * Complex64::from_polar(1.0, phase);
            acc += &term + term.adjoint();
        }
        OperatorRep::from_matrix(acc * Complex64::new(self.scale, 0.0)).expect("square")
    }
}

/// Shifts `θ` by a multiple of `2π/δ` into the fundamental domain.
fn reduce_theta(theta: &[f64], delta: f64) -> Vec<f64> {
    let period = 2.0 * PI / delta;
    theta.iter().map(|t| t - period * (t / period).round()).collect()
}

fn lag_weight(kernel: &KernelSpec, k: &[i64], delta: f64, bandwidth: f64) -> f64 {
    let u: Vec<f64> = k.iter().map(|&c| c as f64 * delta / bandwidth).collect();
    kernel.eval(&u)
}

/// Per-lag divisor: overlap count `∏(n_ℓ − |k_ℓ|)` or the full count.
fn lag_divisor(k: &[i64], counts: &[usize], normalization: Normalization) -> f64 {
    match normalization {
        Normalization::Overlap => k.iter().zip(counts).map(|(&c, &n)| (n as i64 - c.abs()) as f64).product(),
        Normalization::PlainVolume => counts.iter().map(|&n| n as f64).product(),
    }
}

fn grid_setup(design: &SamplingDesign, cfg: &EstimatorConfig) -> Result<(f64, Vec<usize>, Normalization)> {
    let (delta, counts) = grid_shape(design)?;
    if cfg.kernel.d() != counts.len() {
        return Err(Error::DimensionMismatch { expected: counts.len(), actual: cfg.kernel.d() });
    }
    let normalization = match cfg.variant {
        Variant::Grid => cfg.normalization,
        Variant::CltD1 => {
            if counts.len() != 1 {
                return Err(invalid("the CLT-normalised estimator is defined for d = 1 only"));
            }
            Normalization::PlainVolume
        }
        Variant::Irregular => return Err(invalid("irregular variant requested from the grid estimator")),
    };
    let min_side = counts.iter().map(|&n| n as f64 * delta).fold(f64::INFINITY, f64::min);
    cfg.check_support(min_side)?;
    Ok((delta, counts, normalization))
}

fn grid_table(sample: &ProcessSample, cfg: &EstimatorConfig) -> Result<LagTable> {
    let (delta, counts, normalization) = grid_setup(sample.design(), cfg)?;
    let lags = half_lags(&counts, delta, cfg.reach());
    let sums = if cfg.fast_path {
        lag_sums_fft(sample.values(), &counts, &lags)
    } else {
        lag_sums_naive(sample.values(), &counts, &lags)
    };
    let mats = lags
        .iter()
        .zip(sums)
        .map(|(k, s)| s * Complex64::new(lag_weight(&cfg.kernel, k, delta, cfg.bandwidth) / lag_divisor(k, &counts, normalization), 0.0))
        .collect();
    let d = counts.len() as i32;
    Ok(LagTable { delta, lags, mats, scale: (delta / (2.0 * PI)).powi(d) })
}

fn finish(
    thetas: &[Vec<f64>],
    values: Vec<OperatorRep>,
    cfg: &EstimatorConfig,
    n: usize,
    delta: Option<f64>,
    start: Instant,
) -> SpectralEstimate {
    SpectralEstimate {
        thetas: thetas.to_vec(),
        values,
        meta: EstimateMeta {
            bandwidth: cfg.bandwidth,
            n,
            delta,
            variant: cfg.variant,
            kernel: cfg.kernel.name(),
            wall_time: start.elapsed(),
        },
    }
}

/// Gridded estimator `(δᵈ/(2π)ᵈ) Σ_k e^{iδk·θ} K(kδ/Δ) Ĉ(k)`.
pub fn estimate_grid(sample: &ProcessSample, cfg: &EstimatorConfig) -> Result<SpectralEstimate> {
    if cfg.variant != Variant::Grid {
        return Err(invalid("configuration variant is not grid"));
    }
    grid_like(sample, cfg)
}

/// `(δ/2πn) Σ_{i,j} e^{i(i−j)δθ} X(δi) X(δj)ᴴ K((i−j)δ/Δ)` on a one-dimensional grid.
pub fn estimate_clt_d1(sample: &ProcessSample, cfg: &EstimatorConfig) -> Result<SpectralEstimate> {
    if cfg.variant != Variant::CltD1 {
        return Err(invalid("configuration variant is not clt_d1"));
    }
    grid_like(sample, cfg)
}

fn grid_like(sample: &ProcessSample, cfg: &EstimatorConfig) -> Result<SpectralEstimate> {
    let start = Instant::now();
    let table = grid_table(sample, cfg)?;
    let values = cfg.thetas.par_iter().map(|t| table.eval(t)).collect();
    Ok(finish(&cfg.thetas, values, cfg, sample.n(), Some(table.delta), start))
}

/// Dispatches on `cfg.variant`.
pub fn estimate(sample: &ProcessSample, tess: Option<&Tessellation>, domain: Option<&Domain>, cfg: &EstimatorConfig) -> Result<SpectralEstimate> {
    match cfg.variant {
        Variant::Grid => estimate_grid(sample, cfg),
        Variant::CltD1 => estimate_clt_d1(sample, cfg),
        Variant::Irregular => {
            let (tess, domain) = tess.zip(domain).ok_or_else(|| invalid("irregular variant needs a tessellation and a domain"))?;
            estimate_irregular(sample, tess, domain, cfg)
        }
    }
}

/// Unordered site pairs within the kernel reach, with their real weights.
struct PairTable {
    /// `(i, j, t_i − t_j, K·|V_i||V_j|/norm)` for `i < j`.
    pairs: Vec<(usize, usize, Vec<f64>, f64)>,
    /// Lag-zero weights `K(0)|V_i|²/norm`.
    diag: Vec<f64>,
    d: usize,
}

fn pair_table(design: &SamplingDesign, tess: &Tessellation, domain: &Domain, cfg: &EstimatorConfig) -> Result<PairTable> {
    let d = design.d();
    if !(1..=2).contains(&d) {
        return Err(invalid(format!("irregular estimator supports d ∈ {{1, 2}}, got {d}")));
    }
    if domain.d() != d || cfg.kernel.d() != d {
        return Err(Error::DimensionMismatch { expected: d, actual: cfg.kernel.d() });
    }
    if tess.n() != design.n() {
        return Err(Error::DimensionMismatch { expected: design.n(), actual: tess.n() });
    }
    cfg.check_support(domain.min_width())?;
    let reach = cfg.reach();
    let vol = tess.volumes();
    let total = domain.volume();
    let norm = |h: &[f64]| match cfg.normalization {
        Normalization::Overlap => domain.overlap_volume(h),
        Normalization::PlainVolume => total,
    };
    let k0 = cfg.kernel.eval(&vec![0.0; d]);
    let zero = vec![0.0; d];
    let n0 = norm(&zero);
    let diag: Vec<f64> = vol.iter().map(|v| k0 * v * v / n0).collect();

    // bins of side `reach`: partners lie in adjacent bins
    let key = |x: &[f64]| -> [i64; 2] {
        let mut k = [0i64; 2];
        for a in 0..d {
            k[a] = (x[a] / reach).floor() as i64;
        }
        k
    };
    let mut bins: HashMap<[i64; 2], Vec<usize>> = HashMap::new();
    for i in 0..design.n() {
        bins.entry(key(design.point(i))).or_default().push(i);
    }
    let offsets: Vec<[i64; 2]> = if d == 1 {
        (-1..=1).map(|a| [a, 0]).collect()
    } else {
        (-1..=1).flat_map(|a| (-1..=1).map(move |b| [a, b])).collect()
    };
    let found: Vec<Vec<(usize, usize, Vec<f64>, f64)>> = (0..design.n())
        .into_par_iter()
        .map(|i| {
            let ti = design.point(i);
            let ki = key(ti);
            let mut out = Vec::new();
            for off in &offsets {
                let Some(members) = bins.get(&[ki[0] + off[0], ki[1] + off[1]]) else { continue };
                for &j in members {
                    if j <= i {
                        continue;
                    }
                    let h: Vec<f64> = ti.iter().zip(design.point(j)).map(|(a, b)| a - b).collect();
                    let r = h.iter().map(|x| x * x).sum::<f64>().sqrt();
                    if r > reach {
                        continue;
                    }
                    let u: Vec<f64> = h.iter().map(|x| x / cfg.bandwidth).collect();
                    let kw = cfg.kernel.eval(&u);
                    if kw == 0.0 {
                        continue;
                    }
                    let nv = norm(&h);
                    if nv <= 0.0 {
                        continue;
                    }
                    out.push((i, j, h, kw * vol[i] * vol[j] / nv));
                }
            }
            out
        })
        .collect();
    Ok(PairTable { pairs: found.into_iter().flatten().collect(), diag, d })
}

impl PairTable {
    fn scale(&self) -> f64 {
        (2.0 * PI).powi(-(self.d as i32))
    }

    /// Sample version: `Σ_i X_i v_iᴴ` with `v_i = Σ_j w e^{−ih·θ} X_j`, plus adjoint and diagonal.
    fn eval_sample(&self, values: &DMatrix<Complex64>, theta: &[f64]) -> OperatorRep {
        let (n, p) = (values.nrows(), values.ncols());
        let mut v = DMatrix::from_element(n, p, ZERO);
        for (i, j, h, w) in &self.pairs {
            let phase: f64 = h.iter().zip(theta).map(|(a, b)| a * b).sum();
            let c = Complex64::from_polar(*w, -phase);
            for l in 0..p {
                v[(*i, l)] += c * values[(*j, l)];
            }
        }
        // Σ_i X_i v_iᴴ = Xᵀ conj(V)
        let cross = values.transpose() * v.conjugate();
        let mut acc = &cross + cross.adjoint();
        for (i, &w) in self.diag.iter().enumerate() {
            let x = values.row(i).transpose();
            acc += (&x * x.adjoint()) * Complex64::new(w, 0.0);
        }
        let acc = (&acc + acc.adjoint()) * Complex64::new(0.5 * self.scale(), 0.0);
        OperatorRep::from_matrix(acc).expect("square")
    }

    /// Model version with `X(t)⊗X(s)` replaced by `C(t − s)`.
    fn eval_model(&self, covs: &[DMatrix<Complex64>], c0: &DMatrix<Complex64>, theta: &[f64]) -> OperatorRep {
        let p = c0.nrows();
        let mut acc = DMatrix::from_element(p, p, ZERO);
        for ((_, _, h, w), c) in self.pairs.iter().zip(covs) {
            let phase: f64 = h.iter().zip(theta).map(|(a, b)| a * b).sum();
            let term = c * Complex64::from_polar(*w, phase);
            acc += &term + term.adjoint();
        }
        let dsum: f64 = self.diag.iter().sum();
        acc += c0 * Complex64::new(dsum, 0.0);
        OperatorRep::from_matrix(acc * Complex64::new(self.scale(), 0.0)).expect("square")
    }
}

/// Irregular-design estimator with Voronoi weights and overlap normalisation.
pub fn estimate_irregular(sample: &ProcessSample, tess: &Tessellation, domain: &Domain, cfg: &EstimatorConfig) -> Result<SpectralEstimate> {
    if cfg.variant != Variant::Irregular {
        return Err(invalid("configuration variant is not irregular"));
    }
    let start = Instant::now();
    let table = pair_table(sample.design(), tess, domain, cfg)?;
    let values = cfg.thetas.par_iter().map(|t| table.eval_sample(sample.values(), t)).collect();
    Ok(finish(&cfg.thetas, values, cfg, sample.n(), None, start))
}

/// Exact `E f̂(θ)` at every configured `θ` for a second-order model.
pub fn expected_estimate(
    model: &CovarianceModel,
    design: &SamplingDesign,
    tess: Option<&Tessellation>,
    domain: Option<&Domain>,
    cfg: &EstimatorConfig,
) -> Result<Vec<OperatorRep>> {
    if model.d() != design.d() {
        return Err(Error::DimensionMismatch { expected: model.d(), actual: design.d() });
    }
    match cfg.variant {
        Variant::Grid | Variant::CltD1 => {
            let (delta, counts, normalization) = grid_setup(design, cfg)?;
            let lags = half_lags(&counts, delta, cfg.reach());
            let mats = lags
                .iter()
                .map(|k| {
                    let h: Vec<f64> = k.iter().map(|&c| c as f64 * delta).collect();
                    let c = model.cov_at(&h)?;
                    // the lag-k sum has ∏(n−|k|) terms, each with mean C(kδ)
                    let count: f64 = k.iter().zip(&counts).map(|(&c, &n)| (n as i64 - c.abs()) as f64).product();
                    let w = lag_weight(&cfg.kernel, k, delta, cfg.bandwidth) * count / lag_divisor(k, &counts, normalization);
                    Ok(c.into_matrix() * Complex64::new(w, 0.0))
                })
                .collect::<Result<Vec<_>>>()?;
            let table = LagTable { delta, lags, mats, scale: (delta / (2.0 * PI)).powi(counts.len() as i32) };
            Ok(cfg.thetas.par_iter().map(|t| table.eval(t)).collect())
        }
        Variant::Irregular => {
            let (tess, domain) = tess.zip(domain).ok_or_else(|| invalid("irregular variant needs a tessellation and a domain"))?;
            let table = pair_table(design, tess, domain, cfg)?;
            let covs = table
                .pairs
                .par_iter()
                .map(|(_, _, h, _)| model.cov_at(h).map(OperatorRep::into_matrix))
                .collect::<Result<Vec<_>>>()?;
            let c0 = model.cov_at(&vec![0.0; design.d()])?.into_matrix();
            Ok(cfg.thetas.par_iter().map(|t| table.eval_model(&covs, &c0, t)).collect())
        }
    }
}

/// Inside-support kernel deficit `B₁` and outside-support tail `B₂` of the bias, in HS norm.
///
/// With `delta = Some(δ)` the sums run over the lattice `δℤᵈ` and `B₂` is measured against the
/// folded density; with `None` both are integrals against the continuous density (d ≤ 2).
pub fn bias_terms(model: &CovarianceModel, kernel: &KernelSpec, bandwidth: f64, theta: &[f64], delta: Option<f64>) -> Result<(f64, f64)> {
    let d = model.d();
    if theta.len() != d || kernel.d() != d {
        return Err(Error::DimensionMismatch { expected: d, actual: theta.len() });
    }
    let reach = bandwidth * kernel.support_radius();
    let p = model.p();
    match delta {
        Some(delta) => {
            let big = (reach / delta).floor() as usize + 1;
            let counts = vec![2 * big + 1; d];
            let lags = half_lags(&counts, delta, reach);
            let mut deficit = DMatrix::from_element(p, p, ZERO);
            let mut inside = DMatrix::from_element(p, p, ZERO);
            for k in &lags {
                let h: Vec<f64> = k.iter().map(|&c| c as f64 * delta).collect();
                let c = model.cov_at(&h)?.into_matrix();
                let phase: f64 = h.iter().zip(theta).map(|(a, b)| a * b).sum();
                let u: Vec<f64> = h.iter().map(|x| x / bandwidth).collect();
                let kw = kernel.eval(&u);
                // the −k term is the adjoint of the +k term
                let term = if k.iter().all(|&x| x == 0) { c.clone() } else {
                    let t = &c * Complex64::from_polar(1.0, phase);
                    let tm = model.cov_at(&h.iter().map(|x| -x).collect::<Vec<_>>())?.into_matrix() * Complex64::from_polar(1.0, -phase);
                    t + tm
                };
                deficit += &term * Complex64::new(1.0 - kw, 0.0);
                inside += term;
            }
            let s = Complex64::new((delta / (2.0 * PI)).powi(d as i32), 0.0);
            let folded = model.folded_density(theta, delta)?.into_matrix();
            let b1 = (deficit * s).norm();
            let b2 = (folded - inside * s).norm();
            Ok((b1, b2))
        }
        None => {
            let s = (2.0 * PI).powi(-(d as i32));
            let entry_integral = |weight: &dyn Fn(f64) -> f64| -> Result<DMatrix<Complex64>> {
                continuous_integral(model, theta, reach, weight)
            };
            let deficit = entry_integral(&|r| 1.0 - kernel.profile(r / bandwidth))?;
            let inside = entry_integral(&|_| 1.0)?;
            let f = model.spectral_density(theta)?.into_matrix();
            let b1 = (deficit * Complex64::new(s, 0.0)).norm();
            let b2 = (f - inside * Complex64::new(s, 0.0)).norm();
            Ok((b1, b2))
        }
    }
}

/// `∫_{‖h‖≤R} w(‖h‖) e^{ih·θ} C(h) dh`, using the scalar structure of the model.
fn continuous_integral(model: &CovarianceModel, theta: &[f64], reach: f64, weight: &dyn Fn(f64) -> f64) -> Result<DMatrix<Complex64>> {
    let d = model.d();
    let tol = 1e-12;
    let scalar = |rho: &crate::models::RhoFamily| -> Result<f64> {
        // ρ is radial and even, so only the cosine part survives
        match d {
            1 => Ok(2.0 * quad::integrate(|h| weight(h) * rho.eval(h) * (h * theta[0]).cos(), 0.0, reach, tol)),
            2 => Ok(quad::integrate(
                |x| {
                    let half = (reach * reach - x * x).max(0.0).sqrt();
                    quad::integrate(
                        |y| {
                            let r = x.hypot(y);
                            weight(r) * rho.eval(r) * (x * theta[0] + y * theta[1]).cos()
                        },
                        -half,
                        half,
                        tol,
                    )
                },
                -reach,
                reach,
                tol,
            )),
            _ => Err(Error::NotApplicable("continuous bias terms are computed for d ≤ 2".into())),
        }
    };
    match model.structure() {
        Structure::Separable { rho, sigma0 } => Ok(sigma0.matrix() * Complex64::new(scalar(rho)?, 0.0)),
        Structure::Diagonal { terms } => {
            let vals = terms.iter().map(|(nu, rho)| Ok(nu * scalar(rho)?)).collect::<Result<Vec<f64>>>()?;
            Ok(DMatrix::from_diagonal(&DVector::from_iterator(vals.len(), vals.iter().map(|&v| Complex64::new(v, 0.0)))))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;
    use crate::kernels::KernelFamily;
    use crate::models::{real_sigma, RhoFamily};
    use crate::simulate::{ExactSampler, FftSampler, RngConfig};
    use crate::stats::mean_se;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_sample(design: SamplingDesign, p: usize, seed: u64, complex: bool) -> ProcessSample {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = design.n();
        let values = DMatrix::from_fn(n, p, |_, _| {
            Complex64::new(rng.random_range(-1.0..1.0), if complex { rng.random_range(-1.0..1.0) } else { 0.0 })
        });
        ProcessSample::new(Arc::new(design), values).unwrap()
    }

    fn tp3(d: usize) -> KernelSpec {
        KernelSpec::truncated_power(3, d).unwrap()
    }

    /// Literal double sum over all site pairs on a grid.
    fn naive_double_sum(sample: &ProcessSample, cfg: &EstimatorConfig, delta: f64, counts: &[usize], plain: bool) -> Vec<OperatorRep> {
        let d = counts.len();
        let n = sample.n();
        let p = sample.p();
        let total: f64 = counts.iter().map(|&c| c as f64).product();
        cfg.thetas
            .iter()
            .map(|theta| {
                let mut acc = DMatrix::from_element(p, p, ZERO);
                for a in 0..n {
                    for b in 0..n {
                        let ta = sample.design().point(a);
                        let tb = sample.design().point(b);
                        let h: Vec<f64> = ta.iter().zip(tb).map(|(x, y)| x - y).collect();
                        let kw = cfg.kernel.eval(&h.iter().map(|x| x / cfg.bandwidth).collect::<Vec<_>>());
                        if kw == 0.0 {
                            continue;
                        }
                        let count: f64 = if plain {
                            total
                        } else {
                            h.iter().zip(counts).map(|(x, &c)| c as f64 - (x / delta).round().abs()).product()
                        };
                        let phase: f64 = h.iter().zip(theta).map(|(x, t)| x * t).sum();
                        let xa = sample.values().row(a).transpose();
                        let xb = sample.values().row(b).transpose();
                        acc += (&xa * xb.adjoint()) * Complex64::from_polar(kw / count, phase);
                    }
                }
                OperatorRep::from_matrix(acc * Complex64::new((delta / (2.0 * PI)).powi(d as i32), 0.0)).unwrap()
            })
            .collect()
    }

    #[test]
    fn bandwidth_and_threshold_formulas() {
        assert!((bandwidth_rule(1.0, 1000.0, 1) - 10.0).abs() < 1e-12);
        assert!((bandwidth_rule(1.0, 1e4, 2) - 10.0).abs() < 1e-12);
        assert!((bandwidth_rule(1e9, 1e4, 2) - 1.0).abs() < 1e-6);
        assert!((alpha_threshold(1.0, 1.0, 1) - 0.25).abs() < 1e-15);
        assert!((alpha_threshold(1.0, 1e-12, 1) - 1.0).abs() < 1e-9);
        assert!((alpha_threshold(1.0, 1.0, 2) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn fast_path_matches_literal_double_sum() {
        let design = SamplingDesign::grid_1d(0.5, 64).unwrap();
        let sample = random_sample(design, 3, 1, true);
        let thetas = fundamental_thetas(1, 0.5, 9);
        let cfg = EstimatorConfig::new(6.0, tp3(1), thetas, Variant::Grid).unwrap();
        let fast = estimate_grid(&sample, &cfg).unwrap();
        let slow = estimate_grid(&sample, &cfg.clone().with_fast_path(false)).unwrap();
        let oracle = naive_double_sum(&sample, &cfg, 0.5, &[64], false);
        for ((a, b), c) in fast.values.iter().zip(&slow.values).zip(&oracle) {
            assert!((a - c).hs_norm() <= 1e-9, "{}", (a - c).hs_norm());
            assert!((b - c).hs_norm() <= 1e-9);
        }
    }

    #[test]
    fn two_dimensional_grid_matches_literal_double_sum() {
        let design = SamplingDesign::grid(1.0, vec![7, 5]).unwrap();
        let sample = random_sample(design, 2, 2, false);
        let cfg = EstimatorConfig::new(3.0, KernelSpec::new(KernelFamily::Bartlett, 2).unwrap(), fundamental_thetas(2, 1.0, 4), Variant::Grid).unwrap();
        let oracle = naive_double_sum(&sample, &cfg, 1.0, &[7, 5], false);
        for fast in [true, false] {
            let est = estimate_grid(&sample, &cfg.clone().with_fast_path(fast)).unwrap();
            for (a, c) in est.values.iter().zip(&oracle) {
                assert!((a - c).hs_norm() <= 1e-9);
            }
        }
    }

    #[test]
    fn grid_estimate_is_periodic_and_hermitian() {
        let sample = random_sample(SamplingDesign::grid_1d(0.25, 40).unwrap(), 3, 3, true);
        let period = 2.0 * PI / 0.25;
        let thetas = vec![vec![0.3], vec![0.3 + period], vec![0.3 - 3.0 * period]];
        let est = estimate_grid(&sample, &EstimatorConfig::new(2.0, tp3(1), thetas, Variant::Grid).unwrap()).unwrap();
        assert!((&est.values[0] - &est.values[1]).hs_norm() < 1e-12 * est.values[0].hs_norm());
        assert!((&est.values[0] - &est.values[2]).hs_norm() < 1e-12 * est.values[0].hs_norm());
        assert_eq!(est.values[0].self_adjoint_defect(), 0.0);
    }

    #[test]
    fn single_site_and_zero_sample() {
        let design = SamplingDesign::irregular(1, vec![0.5]).unwrap();
        let domain = Domain::interval(0.0, 1.0).unwrap();
        let tess = crate::geometry::voronoi(&design, &domain).unwrap();
        let x = ProcessSample::new(Arc::new(design), DMatrix::from_row_slice(1, 2, &[Complex64::new(2.0, 0.0), Complex64::new(-1.0, 1.0)])).unwrap();
        let cfg = EstimatorConfig::new(0.5, tp3(1), vec![vec![0.0], vec![1.7]], Variant::Irregular).unwrap();
        let est = estimate_irregular(&x, &tess, &domain, &cfg).unwrap();
        let v = x.values().row(0).transpose();
        let want = OperatorRep::from_matrix(&v * v.adjoint() / Complex64::new(2.0 * PI, 0.0)).unwrap();
        for f in &est.values {
            assert!(f.max_abs_diff(&want) < 1e-15);
        }
        let zero = x.map_values(|_| ZERO).unwrap();
        let est = estimate_irregular(&zero, &tess, &domain, &cfg).unwrap();
        assert!(est.values.iter().all(|f| f.hs_norm() == 0.0));
    }

    #[test]
    fn irregular_equals_grid_on_regular_design() {
        let delta = 0.5;
        let n = 50;
        let grid = SamplingDesign::grid_1d(delta, n).unwrap();
        let domain = Domain::for_grid(&grid).unwrap();
        let sample = random_sample(grid.as_irregular(), 3, 4, true);
        let tess = crate::geometry::voronoi(sample.design(), &domain).unwrap();
        let thetas = fundamental_thetas(1, delta, 11);
        let cfg = EstimatorConfig::new(4.0, tp3(1), thetas.clone(), Variant::Irregular).unwrap();
        let irr = estimate_irregular(&sample, &tess, &domain, &cfg).unwrap();
        let gsample = ProcessSample::new(Arc::new(grid), sample.values().clone()).unwrap();
        let g = estimate_grid(&gsample, &EstimatorConfig::new(4.0, tp3(1), thetas, Variant::Grid).unwrap()).unwrap();
        for (a, b) in irr.values.iter().zip(&g.values) {
            assert!((a - b).hs_norm() <= 1e-10, "{}", (a - b).hs_norm());
        }
    }

    #[test]
    fn irregular_matches_literal_pair_sum_in_2d() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pts: Vec<Vec<f64>> = (0..40).map(|_| vec![4.0 * rng.random::<f64>(), 3.0 * rng.random::<f64>()]).collect();
        let design = SamplingDesign::from_points(&pts).unwrap();
        let domain = Domain::rectangle([0.0, 0.0], [4.0, 3.0]).unwrap();
        let tess = crate::geometry::voronoi(&design, &domain).unwrap();
        let sample = random_sample(design, 2, 6, false);
        let theta = vec![0.4, -1.1];
        let cfg = EstimatorConfig::new(1.5, tp3(2), vec![theta.clone()], Variant::Irregular).unwrap();
        let est = estimate_irregular(&sample, &tess, &domain, &cfg).unwrap();
        let mut acc = DMatrix::from_element(2, 2, ZERO);
        for a in 0..40 {
            for b in 0..40 {
                let h: Vec<f64> = sample.design().point(a).iter().zip(sample.design().point(b)).map(|(x, y)| x - y).collect();
                let kw = cfg.kernel.eval(&[h[0] / 1.5, h[1] / 1.5]);
                if kw == 0.0 {
                    continue;
                }
                let w = kw * tess.volumes()[a] * tess.volumes()[b] / domain.overlap_volume(&h);
                let xa = sample.values().row(a).transpose();
                let xb = sample.values().row(b).transpose();
                acc += (&xa * xb.adjoint()) * Complex64::from_polar(w, h[0] * theta[0] + h[1] * theta[1]);
            }
        }
        let want = OperatorRep::from_matrix(acc / Complex64::new(4.0 * PI * PI, 0.0)).unwrap();
        assert!((est.get(0) - &want).hs_norm() < 1e-12);
    }

    #[test]
    fn clt_variant_is_per_lag_reweighting() {
        let n = 30;
        let delta = 1.0;
        let sample = random_sample(SamplingDesign::grid_1d(delta, n).unwrap(), 2, 7, false);
        let thetas = vec![vec![0.0], vec![0.9]];
        let cfg = EstimatorConfig::new(5.0, tp3(1), thetas, Variant::CltD1).unwrap();
        let clt = estimate_clt_d1(&sample, &cfg).unwrap();
        let oracle = naive_double_sum(&sample, &cfg, delta, &[n], true);
        for (a, b) in clt.values.iter().zip(&oracle) {
            assert!((a - b).hs_norm() < 1e-12);
        }
        assert!(clt.values[0].self_adjoint_defect() < 1e-15);
        let one = random_sample(SamplingDesign::grid_1d(delta, 1).unwrap(), 2, 8, false);
        let cfg1 = EstimatorConfig::new(1.0, tp3(1), vec![vec![0.4]], Variant::CltD1).unwrap();
        let f = estimate_clt_d1(&one, &cfg1).unwrap();
        let x = one.values().row(0).transpose();
        let want = OperatorRep::from_matrix(&x * x.adjoint() / Complex64::new(2.0 * PI, 0.0)).unwrap();
        assert!(f.get(0).max_abs_diff(&want) < 1e-15);
    }

    #[test]
    fn clt_requires_one_dimension() {
        let sample = random_sample(SamplingDesign::grid(1.0, vec![4, 4]).unwrap(), 1, 9, false);
        let cfg = EstimatorConfig::new(1.0, tp3(2), vec![vec![0.0, 0.0]], Variant::CltD1).unwrap();
        assert!(estimate_clt_d1(&sample, &cfg).is_err());
    }

    #[test]
    fn support_condition_enforced() {
        let sample = random_sample(SamplingDesign::grid_1d(1.0, 10).unwrap(), 1, 10, false);
        let cfg = EstimatorConfig::new(10.5, tp3(1), vec![vec![0.0]], Variant::Grid).unwrap();
        assert!(matches!(estimate_grid(&sample, &cfg), Err(Error::BandwidthTooLarge { .. })));
        assert!(EstimatorConfig::new(1.0, tp3(1), vec![], Variant::Grid).is_err());
    }

    #[test]
    fn time_reversal_conjugates() {
        let sample = random_sample(SamplingDesign::grid_1d(1.0, 60).unwrap(), 3, 11, false);
        let cfg = EstimatorConfig::new(8.0, tp3(1), fundamental_thetas(1, 1.0, 7), Variant::Grid).unwrap();
        let a = estimate_grid(&sample, &cfg).unwrap();
        let b = estimate_grid(&sample.time_reversed().unwrap(), &cfg).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!(x.conj().max_abs_diff(y) < 1e-12);
        }
    }

    #[test]
    fn bartlett_scalar_estimate_nonnegative() {
        for seed in 0..20 {
            let sample = random_sample(SamplingDesign::grid_1d(1.0, 50).unwrap(), 1, 100 + seed, false);
            let cfg = EstimatorConfig::new(10.0, KernelSpec::new(KernelFamily::Bartlett, 1).unwrap(), vec![vec![0.0]], Variant::CltD1).unwrap();
            assert!(estimate_clt_d1(&sample, &cfg).unwrap().get(0).get(0, 0).re >= -1e-10);
        }
    }

    #[test]
    fn white_noise_expectation() {
        let sigma = real_sigma(2, &[1.0, 0.3, 0.3, 2.0]).unwrap();
        let model = CovarianceModel::separable(1, RhoFamily::Ar1Lattice { a: 0.0, delta: 0.5 }, sigma.clone()).unwrap();
        let design = SamplingDesign::grid_1d(0.5, 100).unwrap();
        let cfg = EstimatorConfig::new(5.0, tp3(1), fundamental_thetas(1, 0.5, 5), Variant::Grid).unwrap();
        let want = sigma.scale_real(0.5 / (2.0 * PI));
        for f in expected_estimate(&model, &design, None, None, &cfg).unwrap() {
            assert!(f.max_abs_diff(&want) < 1e-15);
        }
    }

    #[test]
    fn monte_carlo_mean_matches_expectation() {
        let model = CovarianceModel::separable(1, RhoFamily::Exponential { a: 0.5 }, real_sigma(2, &[1.0, 0.4, 0.4, 0.8]).unwrap()).unwrap();
        let sampler = FftSampler::new(&model, 64, 1.0).unwrap();
        let design = sampler.design();
        let cfg = EstimatorConfig::new(6.0, tp3(1), vec![vec![0.0], vec![1.3]], Variant::Grid).unwrap();
        let expected = expected_estimate(&model, &design, None, None, &cfg).unwrap();
        let rngs = RngConfig::new(77);
        let reps: Vec<SpectralEstimate> =
            (0..2000).map(|r| estimate_grid(&sampler.sample(&mut rngs.stream(&[r])).unwrap(), &cfg).unwrap()).collect();
        for (q, e) in expected.iter().enumerate() {
            for j in 0..2 {
                for k in 0..2 {
                    let re: Vec<f64> = reps.iter().map(|s| s.get(q).get(j, k).re).collect();
                    let im: Vec<f64> = reps.iter().map(|s| s.get(q).get(j, k).im).collect();
                    let (mr, sr) = mean_se(&re);
                    let (mi, si) = mean_se(&im);
                    assert!((mr - e.get(j, k).re).abs() <= 4.0 * sr + 1e-14);
                    assert!((mi - e.get(j, k).im).abs() <= 4.0 * si + 1e-14);
                }
            }
        }
    }

    #[test]
    fn irregular_expectation_matches_monte_carlo() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let pts: Vec<f64> = (0..30).map(|_| 10.0 * rng.random::<f64>()).collect();
        let design = Arc::new(SamplingDesign::irregular(1, pts).unwrap());
        let domain = Domain::interval(0.0, 10.0).unwrap();
        let tess = crate::geometry::voronoi(&design, &domain).unwrap();
        let model = CovarianceModel::separable(1, RhoFamily::Exponential { a: 1.0 }, OperatorRep::identity(1)).unwrap();
        let cfg = EstimatorConfig::new(3.0, tp3(1), vec![vec![0.5]], Variant::Irregular).unwrap();
        let e = expected_estimate(&model, &design, Some(&tess), Some(&domain), &cfg).unwrap()[0].get(0, 0).re;
        let sampler = ExactSampler::new(&model, Arc::clone(&design)).unwrap();
        let rngs = RngConfig::new(5);
        let vals: Vec<f64> = (0..2000)
            .map(|r| estimate_irregular(&sampler.sample(&mut rngs.stream(&[r])).unwrap(), &tess, &domain, &cfg).unwrap().get(0).get(0, 0).re)
            .collect();
        let (m, se) = mean_se(&vals);
        assert!((m - e).abs() < 4.0 * se);
    }

    #[test]
    fn expected_bias_decreases_with_n() {
        let model = CovarianceModel::separable(1, RhoFamily::PowerLaw { beta: 1.0 }, OperatorRep::identity(1)).unwrap();
        let thetas = fundamental_thetas(1, 1.0, 17);
        let mut last = f64::INFINITY;
        for n in [128usize, 512, 2048] {
            let design = SamplingDesign::grid_1d(1.0, n).unwrap();
            let cfg = EstimatorConfig::new((n as f64).cbrt(), tp3(1), thetas.clone(), Variant::Grid).unwrap();
            let e = expected_estimate(&model, &design, None, None, &cfg).unwrap();
            let gap = thetas
                .iter()
                .zip(&e)
                .map(|(t, f)| (f - &model.folded_density(t, 1.0).unwrap()).hs_norm())
                .fold(0.0, f64::max);
            assert!(gap < last);
            last = gap;
        }
    }

    #[test]
    fn plain_volume_normalisation_converges_to_overlap() {
        let model = CovarianceModel::separable(1, RhoFamily::Exponential { a: 1.0 }, OperatorRep::identity(1)).unwrap();
        let mut last = f64::INFINITY;
        for n in [64usize, 256, 1024] {
            let design = SamplingDesign::grid_1d(1.0, n).unwrap();
            let cfg = EstimatorConfig::new(8.0, tp3(1), vec![vec![0.0]], Variant::Grid).unwrap();
            let a = &expected_estimate(&model, &design, None, None, &cfg).unwrap()[0];
            let b = &expected_estimate(&model, &design, None, None, &cfg.clone().with_normalization(Normalization::PlainVolume)).unwrap()[0];
            let gap = ((a - b).hs_norm() / a.hs_norm()).abs();
            assert!(gap < last);
            last = gap;
        }
        assert!(last < 0.01);
    }

    #[test]
    fn flat_top_kernel_has_no_deficit() {
        // correlation numerically zero beyond εΔ
        let model = CovarianceModel::separable(1, RhoFamily::Gaussian { a: 2.0 }, OperatorRep::identity(1)).unwrap();
        let k = KernelSpec::new(KernelFamily::TrapezoidFlatTop { epsilon: 0.5 }, 1).unwrap();
        let (b1, _) = bias_terms(&model, &k, 20.0, &[0.7], Some(0.25)).unwrap();
        assert!(b1 <= 1e-8);
        let (b1c, _) = bias_terms(&model, &k, 20.0, &[0.7], None).unwrap();
        assert!(b1c <= 1e-8);
    }

    #[test]
    fn ar1_tail_is_geometric() {
        let model = CovarianceModel::separable(1, RhoFamily::Ar1Lattice { a: 0.5, delta: 1.0 }, OperatorRep::identity(1)).unwrap();
        let k = tp3(1);
        for theta in [0.0, 1.0, PI] {
            let tails: Vec<f64> = (4..12).map(|bw| bias_terms(&model, &k, bw as f64, &[theta], Some(1.0)).unwrap().1).collect();
            // closed form: (1/2π)|2 Re Σ_{k>Δ} aᵏ e^{ikθ}|
            for (i, b2) in tails.iter().enumerate() {
                let bw = (4 + i) as f64;
                let z = Complex64::from_polar(0.5, theta);
                let tail = z.powf(bw + 1.0) / (Complex64::new(1.0, 0.0) - z);
                let want = (2.0 * tail.re).abs() / (2.0 * PI);
                assert!((b2 - want).abs() < 1e-12, "{b2} vs {want}");
            }
            // at θ ∈ {0, π} the tail is a pure geometric series
            for w in tails.windows(2).filter(|_| theta != 1.0) {
                assert!((w[1] / w[0] - 0.5).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn power_law_bias_rate() {
        let model = CovarianceModel::separable(1, RhoFamily::PowerLaw { beta: 1.0 }, OperatorRep::identity(1)).unwrap();
        let k = KernelSpec::truncated_power(2, 1).unwrap();
        let bws = [8.0, 16.0, 32.0, 64.0, 128.0];
        let b: Vec<f64> = bws
            .iter()
            .map(|&bw| {
                let (b1, b2) = bias_terms(&model, &k, bw, &[0.0], Some(1.0)).unwrap();
                b1 + b2
            })
            .collect();
        let fit = crate::stats::loglog_slope(&bws, &b).unwrap();
        assert!((fit.slope + 1.0).abs() <= 0.1, "{}", fit.slope);
    }

    #[test]
    fn fundamental_grid_layout() {
        let t = fundamental_thetas(1, 2.0, 65);
        assert_eq!(t.len(), 65);
        assert!((t[0][0] + PI / 2.0).abs() < 1e-15 && (t[64][0] - PI / 2.0).abs() < 1e-15);
        assert_eq!(fundamental_thetas(2, 1.0, 3).len(), 9);
    }

    #[test]
    fn estimate_csv_layout() {
        let sample = random_sample(SamplingDesign::grid_1d(1.0, 8).unwrap(), 2, 13, false);
        let est = estimate_grid(&sample, &EstimatorConfig::new(2.0, tp3(1), vec![vec![0.0]], Variant::Grid).unwrap()).unwrap();
        let mut buf = Vec::new();
        est.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 5);
        assert!(text.starts_with("theta0,j,k,re,im\n"));
    }
}
