//! Stationary operator covariance models with ground-truth spectra.
//!
//! Every scalar correlation is radial, `ρ(h) = ρ(‖h‖₂)`, with `ρ(0) = 1`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{invalid, Error, Result};
use crate::operator::{OperatorRep, SELF_ADJOINT_TOL};
use crate::quad;

/// Stop lattice sums once the remaining terms are below this (trace-norm) level.
pub const LATTICE_TAIL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rho", rename_all = "snake_case")]
pub enum RhoFamily {
    /// `e^{−a r}`
    Exponential { a: f64 },
    /// `e^{−a r²}`
    Gaussian { a: f64 },
    /// `a^{r/δ}`: the AR(1) autocorrelation on the lattice `δℤ`, extended to all lags.
    Ar1Lattice { a: f64, delta: f64 },
    /// `(1 + r)^{−β−1}`
    PowerLaw { beta: f64 },
}

impl RhoFamily {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            RhoFamily::Exponential { a } | RhoFamily::Gaussian { a } => a > 0.0 && a.is_finite(),
            RhoFamily::Ar1Lattice { a, delta } => (0.0..1.0).contains(&a) && delta > 0.0,
            RhoFamily::PowerLaw { beta } => beta > 0.0 && beta.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(invalid(format!("invalid correlation parameters {self:?}")))
        }
    }

    pub fn eval(&self, r: f64) -> f64 {
        let r = r.abs();
        match *self {
            RhoFamily::Exponential { a } => (-a * r).exp(),
            RhoFamily::Gaussian { a } => (-a * r * r).exp(),
            RhoFamily::Ar1Lattice { a, delta } => {
                if r == 0.0 {
                    1.0
                } else {
                    a.powf(r / delta)
                }
            }
            RhoFamily::PowerLaw { beta } => (1.0 + r).powf(-beta - 1.0),
        }
    }

    pub fn eval_vec(&self, h: &[f64]) -> f64 {
        self.eval(h.iter().map(|x| x * x).sum::<f64>().sqrt())
    }

    /// Exponential rate of the family when `ρ(r) = e^{−κ r}`.
    fn exponential_rate(&self) -> Option<f64> {
        match *self {
            RhoFamily::Exponential { a } => Some(a),
            RhoFamily::Ar1Lattice { a, delta } if a > 0.0 => Some(-a.ln() / delta),
            _ => None,
        }
    }

    /// `(2π)^{−d} ∫ e^{i h·θ} ρ(h) dh` at `‖θ‖ = w`.
    pub fn spectral_density(&self, d: usize, w: f64) -> Result<f64> {
        if !(1..=3).contains(&d) {
            return Err(Error::NotApplicable(format!("continuous spectra are provided for d ≤ 3, got {d}")));
        }
        if let Some(kappa) = self.exponential_rate() {
            return Ok(exponential_spectrum(d, kappa, w));
        }
        match *self {
            RhoFamily::Gaussian { a } => {
                let df = d as f64;
                Ok((2.0 * PI).powf(-df) * (PI / a).powf(df / 2.0) * (-w * w / (4.0 * a)).exp())
            }
            RhoFamily::PowerLaw { beta } => {
                let s = beta + 1.0;
                if s <= d as f64 {
                    return Err(Error::Divergent(format!("(1+r)^-{s} is not integrable in dimension {d}")));
                }
                // (1+r)^{−s} = Γ(s)^{−1} ∫ t^{s−1} e^{−t} e^{−t r} dt
                let g = |t: f64| {
                    if t == 0.0 {
                        return 0.0;
                    }
                    t.powf(s - 1.0) * (-t).exp() * exponential_spectrum(d, t, w)
                };
                Ok(integrate_positive_line(g, &[w, 1.0]) / gamma(s))
            }
            RhoFamily::Ar1Lattice { .. } => Err(Error::NotApplicable(
                "white-noise lattice correlation has no continuous-parameter density".into(),
            )),
            RhoFamily::Exponential { .. } => unreachable!(),
        }
    }

    /// `Σ_{k∈ℤ} e^{ikφ} ρ(kδ)` (real, since ρ is even).
    pub fn lattice_sum_1d(&self, delta: f64, phi: f64) -> f64 {
        let phi = wrap_angle(phi);
        let q = match *self {
            RhoFamily::Exponential { a } => Some((-a * delta).exp()),
            RhoFamily::Ar1Lattice { a, delta: dm } => Some(if a == 0.0 { 0.0 } else { a.powf(delta / dm) }),
            _ => None,
        };
        if let Some(q) = q {
            return (1.0 - q * q) / (1.0 - 2.0 * q * phi.cos() + q * q);
        }
        match *self {
            RhoFamily::Gaussian { .. } => {
                let mut sum = 1.0;
                let mut k = 1.0;
                loop {
                    let r = self.eval(k * delta);
                    sum += 2.0 * r * (k * phi).cos();
                    if r < 1e-18 {
                        break;
                    }
                    k += 1.0;
                }
                sum
            }
            RhoFamily::PowerLaw { beta } => {
                let s = beta + 1.0;
                const K0: usize = 32;
                let mut sum = 1.0;
                for k in 1..K0 {
                    let kf = k as f64;
                    sum += 2.0 * self.eval(kf * delta) * (kf * phi).cos();
                }
                // Σ_{k≥K0} e^{ikφ}(1+kδ)^{−s} = Γ(s)^{−1} ∫ t^{s−1} e^{−t} z^{K0}/(1−z) dt, z = e^{iφ−tδ}
                let k0 = K0 as f64;
                let tail = |t: f64| {
                    if t == 0.0 {
                        return 0.0;
                    }
                    let z = Complex64::from_polar((-t * delta).exp(), phi);
                    let zk = Complex64::from_polar((-t * delta * k0).exp(), phi * k0);
                    t.powf(s - 1.0) * (-t).exp() * (zk / (1.0 - z)).re
                };
                let brk = [phi.abs() / delta, 1.0 / delta, 1.0];
                sum + 2.0 * integrate_positive_line(tail, &brk) / gamma(s)
            }
            _ => unreachable!(),
        }
    }

    /// `Σ_{k∈ℤᵈ} e^{ik·φ} ρ(δ‖k‖)` by cubic shells (d ≥ 2).
    fn lattice_sum_nd(&self, delta: f64, phi: &[f64]) -> f64 {
        let d = phi.len();
        if d == 1 {
            return self.lattice_sum_1d(delta, phi[0]);
        }
        let mut total = 1.0;
        let mut k = vec![0i64; d];
        for r in 1..=4096i64 {
            let mut shell = 0.0;
            let mut shell_max: f64 = 0.0;
            for_each_in_shell(d, r, &mut k, &mut |k| {
                let norm = k.iter().map(|&x| (x * x) as f64).sum::<f64>().sqrt();
                let rho = self.eval(delta * norm);
                let ph: f64 = k.iter().zip(phi).map(|(&x, p)| x as f64 * p).sum();
                shell += rho * ph.cos();
                shell_max = shell_max.max(rho);
            });
            total += shell;
            let count = ((2 * r + 1) as f64).powi(d as i32) - ((2 * r - 1) as f64).powi(d as i32);
            if shell_max * count < 1e-14 {
                break;
            }
        }
        total
    }

    /// `Σ_{k∈ℤᵈ} |ρ(δk)| (1 + ‖k‖^β)` partial sums on the balls `‖k‖∞ ≤ R`.
    fn discrete_partial_sums(&self, d: usize, delta: f64, beta: f64, radii: &[usize]) -> Vec<f64> {
        let mut out = Vec::with_capacity(radii.len());
        let mut total = 1.0;
        let mut r_done = 0usize;
        let mut k = vec![0i64; d];
        for &radius in radii {
            for r in r_done + 1..=radius {
                let mut shell = 0.0;
                if d == 1 {
                    let kf = r as f64;
                    shell = 2.0 * self.eval(kf * delta).abs() * (1.0 + kf.powf(beta));
                } else {
                    for_each_in_shell(d, r as i64, &mut k, &mut |k| {
                        let norm = k.iter().map(|&x| (x * x) as f64).sum::<f64>().sqrt();
                        shell += self.eval(delta * norm).abs() * (1.0 + norm.powf(beta));
                    });
                }
                total += shell;
            }
            r_done = radius;
            out.push(total);
        }
        out
    }

    fn continuous_partial_sums(&self, d: usize, beta: f64, radii: &[f64]) -> Vec<f64> {
        let area = sphere_area(d);
        let f = |r: f64| area * r.powi(d as i32 - 1) * (1.0 + r.powf(beta)) * self.eval(r).abs();
        let mut out = Vec::with_capacity(radii.len());
        let mut total = 0.0;
        let mut lo = 0.0;
        for &hi in radii {
            total += quad::integrate(f, lo, hi, 1e-12);
            lo = hi;
            out.push(total);
        }
        out
    }
}

fn exponential_spectrum(d: usize, kappa: f64, w: f64) -> f64 {
    let s = kappa * kappa + w * w;
    match d {
        1 => kappa / (PI * s),
        2 => kappa / (2.0 * PI * s.powf(1.5)),
        _ => kappa / (PI * PI * s * s),
    }
}

fn sphere_area(d: usize) -> f64 {
    let h = d as f64 / 2.0;
    2.0 * PI.powf(h) / gamma(h)
}

/// `∫₀^∞ g` with extra breakpoints where the integrand varies quickly.
fn integrate_positive_line<F: Fn(f64) -> f64>(g: F, breaks: &[f64]) -> f64 {
    let mut pts: Vec<f64> = breaks.iter().copied().filter(|b| b.is_finite() && *b > 0.0).collect();
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let mut total = 0.0;
    let mut lo = 0.0;
    for p in pts {
        total += quad::integrate(&g, lo, p, 1e-14);
        lo = p;
    }
    total + quad::integrate_to_infinity(&g, lo, 1e-14)
}

/// Maps an angle to `(−π, π]`.
pub fn wrap_angle(phi: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let mut x = phi - two_pi * (phi / two_pi).round();
    if x <= -PI {
        x += two_pi;
    }
    x
}

fn for_each_in_shell(d: usize, r: i64, k: &mut [i64], f: &mut dyn FnMut(&[i64])) {
    fn rec(d: usize, pos: usize, r: i64, on_shell: bool, k: &mut [i64], f: &mut dyn FnMut(&[i64])) {
        if pos == d {
            if on_shell {
                f(k);
            }
            return;
        }
        for x in -r..=r {
            k[pos] = x;
            rec(d, pos + 1, r, on_shell || x.abs() == r, k, f);
        }
    }
    rec(d, 0, r, false, k, f);
}

#[derive(Debug, Clone, PartialEq)]
pub enum Structure {
    /// `C(h) = ρ(h) Σ₀`
    Separable { rho: RhoFamily, sigma0: OperatorRep },
    /// `C(h) = diag(ν_j ρ_j(h))`
    Diagonal { terms: Vec<(f64, RhoFamily)> },
}

#[derive(Debug, Clone, PartialEq)]
pub enum PseudoSpec {
    /// Real-valued process: `Č = C`.
    Real,
    /// Circularly symmetric: `Č ≡ 0`.
    Zero,
    /// `Č(h) = ρ̌(h) Σ̌`
    Separable { rho: RhoFamily, sigma: OperatorRep },
}

/// Declared regularity (power-law class and Hölder smoothness).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Regularity {
    pub beta: Option<f64>,
    pub l: Option<f64>,
    pub gamma: Option<f64>,
    pub holder_const: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceModel {
    d: usize,
    structure: Structure,
    pseudo: PseudoSpec,
    regularity: Regularity,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerLawReport {
    pub radii: Vec<f64>,
    pub partial_sums: Vec<f64>,
    /// Geometric extrapolation of the remaining tail.
    pub tail_estimate: f64,
    pub value: f64,
    /// Whether the tail estimate is below 1% of the partial sum.
    pub tail_ok: bool,
    /// Verdict against the declared `L`, when one is declared.
    pub member: Option<bool>,
}

fn check_psd(sigma: &OperatorRep) -> Result<()> {
    let eig = sigma.eig_self_adjoint(SELF_ADJOINT_TOL)?;
    let top = eig.values.first().copied().unwrap_or(0.0).abs();
    if eig.values.iter().any(|&l| l < -1e-12 * top.max(1.0)) {
        return Err(Error::NotPositiveDefinite);
    }
    Ok(())
}

impl CovarianceModel {
    pub fn separable(d: usize, rho: RhoFamily, sigma0: OperatorRep) -> Result<Self> {
        if d == 0 {
            return Err(invalid("dimension d must be positive"));
        }
        rho.validate()?;
        check_psd(&sigma0)?;
        Ok(Self { d, structure: Structure::Separable { rho, sigma0 }, pseudo: PseudoSpec::Real, regularity: Regularity::default() }
            .checked_real()?)
    }

    pub fn diagonal(d: usize, terms: Vec<(f64, RhoFamily)>) -> Result<Self> {
        if d == 0 || terms.is_empty() {
            return Err(invalid("diagonal model needs d ≥ 1 and at least one coordinate"));
        }
        for (nu, rho) in &terms {
            if !(*nu >= 0.0) {
                return Err(invalid("diagonal weights must be nonnegative"));
            }
            rho.validate()?;
        }
        Ok(Self { d, structure: Structure::Diagonal { terms }, pseudo: PseudoSpec::Real, regularity: Regularity::default() })
    }

    /// `X = A Y` with `Y` real, `C_Y = ρ Σ`: `C = ρ AΣA*` and `Č = ρ AΣAᵀ`.
    pub fn mixed_real(d: usize, rho: RhoFamily, sigma: &OperatorRep, mix: &OperatorRep) -> Result<Self> {
        if sigma.imag_part().hs_norm() > 0.0 {
            return Err(invalid("latent covariance must be real"));
        }
        let a = mix.matrix();
        let s = sigma.matrix();
        let sigma0 = OperatorRep::from_matrix(a * s * a.adjoint())?;
        let pseudo = OperatorRep::from_matrix(a * s * a.transpose())?;
        rho.validate()?;
        check_psd(&sigma0)?;
        Ok(Self {
            d,
            structure: Structure::Separable { rho, sigma0 },
            pseudo: PseudoSpec::Separable { rho, sigma: pseudo },
            regularity: Regularity::default(),
        })
    }

    fn checked_real(self) -> Result<Self> {
        if let Structure::Separable { sigma0, .. } = &self.structure {
            if sigma0.imag_part().hs_norm() > 1e-14 * sigma0.hs_norm() && self.pseudo == PseudoSpec::Real {
                // a complex Σ₀ cannot belong to a real process; default to circular symmetry
                return Ok(Self { pseudo: PseudoSpec::Zero, ..self });
            }
        }
        Ok(self)
    }

    pub fn with_pseudo(mut self, pseudo: PseudoSpec) -> Result<Self> {
        if let PseudoSpec::Separable { rho, sigma } = &pseudo {
            rho.validate()?;
            if sigma.p() != self.p() {
                return Err(Error::DimensionMismatch { expected: self.p(), actual: sigma.p() });
            }
        }
        if pseudo == PseudoSpec::Real {
            if let Structure::Separable { sigma0, .. } = &self.structure {
                if sigma0.imag_part().hs_norm() > 1e-14 * sigma0.hs_norm() {
                    return Err(invalid("a real process needs a real Σ₀"));
                }
            }
        }
        self.pseudo = pseudo;
        Ok(self)
    }

    pub fn with_regularity(mut self, regularity: Regularity) -> Self {
        self.regularity = regularity;
        self
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn p(&self) -> usize {
        match &self.structure {
            Structure::Separable { sigma0, .. } => sigma0.p(),
            Structure::Diagonal { terms } => terms.len(),
        }
    }

    pub fn structure(&self) -> &Structure {
        &self.structure
    }

    pub fn pseudo(&self) -> &PseudoSpec {
        &self.pseudo
    }

    pub fn regularity(&self) -> Regularity {
        self.regularity
    }

    pub fn is_real(&self) -> bool {
        self.pseudo == PseudoSpec::Real
    }

    /// `C(0)`.
    pub fn sigma0(&self) -> OperatorRep {
        self.combine(|_| 1.0)
    }

    fn combine<F: Fn(&RhoFamily) -> f64>(&self, weight: F) -> OperatorRep {
        match &self.structure {
            Structure::Separable { rho, sigma0 } => sigma0.scale_real(weight(rho)),
            Structure::Diagonal { terms } => {
                let vals: Vec<f64> = terms.iter().map(|(nu, rho)| nu * weight(rho)).collect();
                OperatorRep::diag(&vals)
            }
        }
    }

    fn check_h(&self, h: &[f64]) -> Result<()> {
        if h.len() != self.d {
            return Err(Error::DimensionMismatch { expected: self.d, actual: h.len() });
        }
        Ok(())
    }

    pub fn cov_at(&self, h: &[f64]) -> Result<OperatorRep> {
        self.check_h(h)?;
        Ok(self.combine(|rho| rho.eval_vec(h)))
    }

    pub fn pseudo_cov_at(&self, h: &[f64]) -> Result<OperatorRep> {
        self.check_h(h)?;
        Ok(match &self.pseudo {
            PseudoSpec::Real => self.combine(|rho| rho.eval_vec(h)),
            PseudoSpec::Zero => OperatorRep::zeros(self.p()),
            PseudoSpec::Separable { rho, sigma } => sigma.scale_real(rho.eval_vec(h)),
        })
    }

    /// `‖C(h)‖_tr` as a function of `‖h‖`.
    pub fn cov_trace_norm(&self, r: f64) -> f64 {
        match &self.structure {
            Structure::Separable { rho, sigma0 } => rho.eval(r).abs() * sigma0.trace_norm(),
            Structure::Diagonal { terms } => terms.iter().map(|(nu, rho)| nu * rho.eval(r).abs()).sum(),
        }
    }

    fn norm_theta(theta: &[f64]) -> f64 {
        theta.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Continuous-parameter spectral density `f(θ)`.
    pub fn spectral_density(&self, theta: &[f64]) -> Result<OperatorRep> {
        self.check_h(theta)?;
        let w = Self::norm_theta(theta);
        let d = self.d;
        match &self.structure {
            Structure::Separable { rho, sigma0 } => Ok(sigma0.scale_real(rho.spectral_density(d, w)?)),
            Structure::Diagonal { terms } => {
                let vals = terms.iter().map(|(nu, rho)| Ok(nu * rho.spectral_density(d, w)?)).collect::<Result<Vec<_>>>()?;
                Ok(OperatorRep::diag(&vals))
            }
        }
    }

    fn lattice_scalar(rho: &RhoFamily, delta: f64, phi: &[f64]) -> f64 {
        let d = phi.len() as i32;
        (delta / (2.0 * PI)).powi(d) * rho.lattice_sum_nd(delta, phi)
    }

    /// Folded density `f(θ; δ) = (δ/2π)ᵈ Σ_k e^{ik·θδ} C(kδ)`; periodic in each `θ_ℓ` with period `2π/δ`.
    pub fn folded_density(&self, theta: &[f64], delta: f64) -> Result<OperatorRep> {
        self.check_h(theta)?;
        if !(delta > 0.0) {
            return Err(invalid("grid spacing must be positive"));
        }
        let phi: Vec<f64> = theta.iter().map(|t| wrap_angle(t * delta)).collect();
        Ok(self.combine(|rho| Self::lattice_scalar(rho, delta, &phi)))
    }

    /// Pseudo-spectral density `(δ/2π)ᵈ Σ_k e^{−ik·θδ} Č(kδ)`; `delta = 0` gives the continuous form.
    pub fn pseudo_density(&self, theta: &[f64], delta: f64) -> Result<OperatorRep> {
        self.check_h(theta)?;
        if delta < 0.0 {
            return Err(invalid("grid spacing must be nonnegative"));
        }
        // ρ is even, so the phase sign does not change the scalar sums
        let scalar = |rho: &RhoFamily| -> Result<f64> {
            if delta == 0.0 {
                rho.spectral_density(self.d, Self::norm_theta(theta))
            } else {
                let phi: Vec<f64> = theta.iter().map(|t| wrap_angle(-t * delta)).collect();
                Ok(Self::lattice_scalar(rho, delta, &phi))
            }
        };
        match &self.pseudo {
            PseudoSpec::Real => match &self.structure {
                Structure::Separable { rho, sigma0 } => Ok(sigma0.scale_real(scalar(rho)?)),
                Structure::Diagonal { terms } => {
                    let vals = terms.iter().map(|(nu, rho)| Ok(nu * scalar(rho)?)).collect::<Result<Vec<_>>>()?;
                    Ok(OperatorRep::diag(&vals))
                }
            },
            PseudoSpec::Zero => Ok(OperatorRep::zeros(self.p())),
            PseudoSpec::Separable { rho, sigma } => Ok(sigma.scale_real(scalar(rho)?)),
        }
    }

    /// Power-law class norm `Σ_k ‖C(kδ)‖_tr (1+‖k‖^β)` (with `spacing = Some(δ)`) or
    /// `∫ (1+‖x‖^β) ‖C(x)‖_tr dx` (with `spacing = None`), from partial sums over doubling
    /// radii up to `cutoff`.
    pub fn powerlaw_norm(&self, beta: f64, cutoff: f64, spacing: Option<f64>) -> Result<PowerLawReport> {
        if !(beta >= 0.0) || !(cutoff >= 8.0) {
            return Err(invalid("powerlaw_norm needs β ≥ 0 and cutoff ≥ 8"));
        }
        let mut radii = Vec::new();
        let mut r = 1.0;
        while r <= cutoff {
            radii.push(r);
            r *= 2.0;
        }
        let per_rho = |rho: &RhoFamily| -> Vec<f64> {
            match spacing {
                Some(delta) => {
                    let ri: Vec<usize> = radii.iter().map(|&r| r as usize).collect();
                    rho.discrete_partial_sums(self.d, delta, beta, &ri)
                }
                None => rho.continuous_partial_sums(self.d, beta, &radii),
            }
        };
        let sums: Vec<f64> = match &self.structure {
            Structure::Separable { rho, sigma0 } => {
                let tn = sigma0.trace_norm();
                per_rho(rho).into_iter().map(|s| s * tn).collect()
            }
            Structure::Diagonal { terms } => {
                let mut acc = vec![0.0; radii.len()];
                for (nu, rho) in terms {
                    for (a, s) in acc.iter_mut().zip(per_rho(rho)) {
                        *a += nu * s;
                    }
                }
                acc
            }
        };
        let m = sums.len();
        let inc_last = sums[m - 1] - sums[m - 2];
        let inc_prev = sums[m - 2] - sums[m - 3];
        let partial = sums[m - 1];
        let tail = if inc_last <= 1e-15 * partial {
            0.0
        } else {
            let ratio = inc_last / inc_prev;
            if !(ratio < 0.99) {
                return Err(Error::Divergent(format!(
                    "doubling-radius increments do not shrink (ratio {ratio:.3}) for β = {beta}"
                )));
            }
            inc_last * ratio / (1.0 - ratio)
        };
        let value = partial + tail;
        Ok(PowerLawReport {
            radii,
            partial_sums: sums,
            tail_estimate: tail,
            value,
            tail_ok: tail < 0.01 * partial,
            member: self.regularity.l.map(|l| value <= l),
        })
    }

    /// `∫ sup_{|y−x|≤δ} ‖C(y) − C(x)‖_tr dx` (d = 1); the Hölder ratio is this over `δ^γ`.
    pub fn holder_increment(&self, delta: f64) -> Result<f64> {
        if self.d != 1 {
            return Err(Error::NotApplicable("Hölder diagnostic is implemented for d = 1".into()));
        }
        let diff = |x: f64, y: f64| -> f64 {
            match &self.structure {
                Structure::Separable { rho, sigma0 } => (rho.eval(y) - rho.eval(x)).abs() * sigma0.trace_norm(),
                Structure::Diagonal { terms } => terms.iter().map(|(nu, rho)| nu * (rho.eval(y) - rho.eval(x)).abs()).sum(),
            }
        };
        // each ρ is radial and nonincreasing in |h|, so the sup is attained at an endpoint or at 0
        let sup = |x: f64| -> f64 {
            let mut s = diff(x, x - delta).max(diff(x, x + delta));
            if (x - delta..=x + delta).contains(&0.0) {
                s = s.max(diff(x, 0.0));
            }
            s
        };
        let mut reach = 1.0;
        while self.cov_trace_norm(reach) > 1e-14 * self.cov_trace_norm(0.0) && reach < 1e7 {
            reach *= 2.0;
        }
        let half = quad::integrate(sup, 0.0, delta, 1e-13) + quad::integrate(sup, delta, reach + delta, 1e-13);
        Ok(2.0 * half)
    }
}

/// `Σ₀` from a row-major real matrix.
pub fn real_sigma(p: usize, rows: &[f64]) -> Result<OperatorRep> {
    OperatorRep::from_real(&DMatrix::from_row_slice(p, p, rows))
}
