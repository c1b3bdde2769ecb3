use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;

use super::config::{ExperimentConfig, ExperimentKind};
use super::Check;
use crate::error::Result;
use crate::estimator::{estimate, estimate_clt_d1, estimate_grid, estimate_irregular, fundamental_thetas, EstimatorConfig, SpectralEstimate, Variant};
use crate::geometry::{voronoi, Domain, SamplingDesign};
use crate::kernels::KernelSpec;
use crate::models::{CovarianceModel, PseudoSpec, RhoFamily};
use crate::operator::OperatorRep;
use crate::simulate::{sample_gaussian_exact, ProcessSample, RngConfig};

fn max_defect(est: &SpectralEstimate) -> f64 {
    est.values.iter().map(|f| f.self_adjoint_defect()).fold(0.0, f64::max)
}

fn max_diff(a: &[OperatorRep], b: &[OperatorRep]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.max_abs_diff(y)).fold(0.0, f64::max)
}

/// `Σ_k f(θ + 2πk/δ)` by direct summation over `|kᵢ| ≤ reach`.
fn folded_by_summation(model: &CovarianceModel, theta: &[f64], delta: f64, reach: i64) -> Result<OperatorRep> {
    let d = theta.len();
    let mut acc = OperatorRep::zeros(model.p());
    let total = (2 * reach + 1).pow(d as u32);
    for idx in 0..total {
        let mut rem = idx;
        let shifted: Vec<f64> = theta
            .iter()
            .map(|t| {
                let k = rem % (2 * reach + 1) - reach;
                rem /= 2 * reach + 1;
                t + 2.0 * PI * k as f64 / delta
            })
            .collect();
        acc += &model.spectral_density(&shifted)?;
    }
    Ok(acc)
}

/// Structural invariants of the estimators and models on freshly simulated data.
pub fn run_check_suite(cfg: &ExperimentConfig) -> Result<Vec<Check>> {
    let rng = RngConfig::new(cfg.master_seed);
    let kind = ExperimentKind::Check.stream_id();
    let n = cfg.sizes[0];
    let mut checks = Vec::new();

    let sigma = cfg.model.sigma0()?;
    let p = sigma.p();
    let real1 = CovarianceModel::separable(1, RhoFamily::Exponential { a: 0.5 }, sigma.clone())?;
    let real2 = CovarianceModel::separable(2, RhoFamily::Exponential { a: 0.7 }, sigma.clone())?;
    let mut herm = DMatrix::from_fn(p, p, |j, k| Complex64::new(0.5f64.powi(j.abs_diff(k) as i32), 0.3 * (j as f64 - k as f64)));
    for j in 0..p {
        herm[(j, j)] += Complex64::new(1.0, 0.0);
    }
    let complex1 = CovarianceModel::separable(1, RhoFamily::Exponential { a: 0.5 }, OperatorRep::from_matrix(herm)?)?.with_pseudo(PseudoSpec::Zero)?;

    // samples: real and complex on a 1-d grid, real on a 2-d grid, real on random 1-d and 2-d designs
    let delta = 0.5;
    let grid1 = Arc::new(SamplingDesign::grid_1d(delta, n)?);
    let side = (n as f64).sqrt().ceil() as usize;
    let grid2 = Arc::new(SamplingDesign::grid(delta, vec![side, side])?);
    let x_real = sample_gaussian_exact(&real1, Arc::clone(&grid1), &mut rng.stream(&[kind, 0]))?;
    let x_cplx = sample_gaussian_exact(&complex1, Arc::clone(&grid1), &mut rng.stream(&[kind, 1]))?;
    let x_grid2 = sample_gaussian_exact(&real2, Arc::clone(&grid2), &mut rng.stream(&[kind, 2]))?;
    let mut g = rng.stream(&[kind, 3]);
    let len = n as f64 * delta;
    let pts1: Vec<Vec<f64>> = (0..n).map(|_| vec![len * g.random::<f64>()]).collect();
    let pts2: Vec<Vec<f64>> = (0..n).map(|_| vec![side as f64 * delta * g.random::<f64>(), side as f64 * delta * g.random::<f64>()]).collect();
    let irr1 = Arc::new(SamplingDesign::from_points(&pts1)?);
    let irr2 = Arc::new(SamplingDesign::from_points(&pts2)?);
    let dom1 = Domain::interval(0.0, len)?;
    let dom2 = Domain::rectangle([0.0, 0.0], [side as f64 * delta; 2])?;
    let tess1 = voronoi(&irr1, &dom1)?;
    let tess2 = voronoi(&irr2, &dom2)?;
    let x_irr1 = sample_gaussian_exact(&real1, Arc::clone(&irr1), &mut rng.stream(&[kind, 4]))?;
    let x_irr2 = sample_gaussian_exact(&real2, Arc::clone(&irr2), &mut rng.stream(&[kind, 5]))?;

    let k1 = KernelSpec::new(cfg.kernel, 1)?;
    let k2 = KernelSpec::new(cfg.kernel, 2)?;
    let bw1 = (len / 4.0).min(8.0);
    let bw2 = (side as f64 * delta / 4.0).min(4.0);
    let th1 = fundamental_thetas(1, delta, cfg.theta_count);
    let th2 = fundamental_thetas(2, delta, 9);
    let grid_cfg1 = EstimatorConfig::new(bw1, k1, th1.clone(), Variant::Grid)?;
    let grid_cfg2 = EstimatorConfig::new(bw2, k2, th2.clone(), Variant::Grid)?;
    let irr_cfg1 = EstimatorConfig::new(bw1, k1, th1.clone(), Variant::Irregular)?;
    let irr_cfg2 = EstimatorConfig::new(bw2, k2, th2.clone(), Variant::Irregular)?;
    let clt_cfg = EstimatorConfig::new(bw1, k1, th1.clone(), Variant::CltD1)?;

    let e_real = estimate_grid(&x_real, &grid_cfg1)?;
    let e_cplx = estimate_grid(&x_cplx, &grid_cfg1)?;
    let e_grid2 = estimate_grid(&x_grid2, &grid_cfg2)?;
    let e_irr1 = estimate_irregular(&x_irr1, &tess1, &dom1, &irr_cfg1)?;
    let e_irr2 = estimate_irregular(&x_irr2, &tess2, &dom2, &irr_cfg2)?;
    let e_clt = estimate_clt_d1(&x_real, &clt_cfg)?;
    let defect = [&e_real, &e_cplx, &e_grid2, &e_irr1, &e_irr2, &e_clt].iter().map(|e| max_defect(e)).fold(0.0, f64::max);
    checks.push(Check::at_most("Hermitian symmetry of all estimates (max |f - f*|)", defect, 1e-10));

    // fast and naive grid paths
    let naive = estimate_grid(&x_real, &grid_cfg1.clone().with_fast_path(false))?;
    let fast = estimate_grid(&x_real, &grid_cfg1.clone().with_fast_path(true))?;
    let disc = fast.values.iter().zip(&naive.values).map(|(a, b)| (a - b).hs_norm()).fold(0.0, f64::max);
    checks.push(Check::at_most("fast and naive grid paths agree (max HS)", disc, 1e-9));

    // periodicity f̂(θ + 2π/δ) = f̂(θ), in each coordinate
    let period = 2.0 * PI / delta;
    let shifted1: Vec<Vec<f64>> = th1.iter().map(|t| vec![t[0] + period]).collect();
    let p1 = estimate_grid(&x_real, &EstimatorConfig::new(bw1, k1, shifted1, Variant::Grid)?)?;
    let mut per = max_diff(&p1.values, &e_real.values);
    for axis in 0..2 {
        let shifted: Vec<Vec<f64>> = th2
            .iter()
            .map(|t| {
                let mut s = t.clone();
                s[axis] -= 2.0 * period;
                s
            })
            .collect();
        let p2 = estimate_grid(&x_grid2, &EstimatorConfig::new(bw2, k2, shifted, Variant::Grid)?)?;
        per = per.max(max_diff(&p2.values, &e_grid2.values));
    }
    checks.push(Check::at_most("grid periodicity in theta (max abs)", per, 1e-12));

    // time reversal of a real process: conj on the grid, and on a reflected irregular design
    let rev = estimate_grid(&x_real.time_reversed()?, &grid_cfg1)?;
    let conj = |e: &SpectralEstimate| e.values.iter().map(OperatorRep::conj).collect::<Vec<_>>();
    let mut tr = max_diff(&rev.values, &conj(&e_real));
    let reflected: Vec<Vec<f64>> = pts1.iter().map(|p| vec![-p[0]]).collect();
    let irr_rev = Arc::new(SamplingDesign::from_points(&reflected)?);
    let dom_rev = Domain::interval(-len, 0.0)?;
    let tess_rev = voronoi(&irr_rev, &dom_rev)?;
    let x_rev = ProcessSample::new(irr_rev, x_irr1.values().clone())?;
    let e_rev = estimate(&x_rev, Some(&tess_rev), Some(&dom_rev), &irr_cfg1)?;
    tr = tr.max(max_diff(&e_rev.values, &conj(&e_irr1)));
    checks.push(Check::at_most("time reversal conjugates the estimate (max abs)", tr, 1e-10));

    // folded density against direct periodisation of a fast-decaying spectrum
    let gauss1 = CovarianceModel::separable(1, RhoFamily::Gaussian { a: 0.8 }, sigma.clone())?;
    let gauss2 = CovarianceModel::separable(2, RhoFamily::Gaussian { a: 0.8 }, sigma)?;
    let mut fold: f64 = 0.0;
    for fd in [1.0, 0.7] {
        for t in fundamental_thetas(1, fd, 9) {
            fold = fold.max(gauss1.folded_density(&t, fd)?.max_abs_diff(&folded_by_summation(&gauss1, &t, fd, 12)?));
        }
        for t in fundamental_thetas(2, fd, 5) {
            fold = fold.max(gauss2.folded_density(&t, fd)?.max_abs_diff(&folded_by_summation(&gauss2, &t, fd, 8)?));
        }
    }
    checks.push(Check::at_most("folded density equals periodised density (max abs)", fold, 1e-8));
    Ok(checks)
}
