use std::fs;
use std::path::Path;

use rayon::prelude::*;

use super::config::{ExperimentConfig, ExperimentKind};
use super::plot::{self, Series};
use super::{write_checks, write_slopes, write_table, Check, NamedSlope};
use crate::error::{invalid, Result};
use crate::estimator::{alpha_threshold, bandwidth_rule, estimate_grid, expected_estimate, fundamental_thetas, EstimatorConfig, Variant};
use crate::geometry::SamplingDesign;
use crate::models::CovarianceModel;
use crate::operator::OperatorRep;
use crate::simulate::{FftSampler, RngConfig};
use crate::stats::{loglog_slope, SlopeFit};

#[derive(Debug, Clone, PartialEq)]
pub struct RateRow {
    pub n: usize,
    pub delta: f64,
    /// `|T| = nδ`.
    pub volume: f64,
    pub bandwidth: f64,
    /// `sup_θ ‖E f̂(θ) − f(θ)‖_HS`.
    pub sup_bias: f64,
    /// `θ`-average of `‖E f̂(θ) − f(θ)‖²_HS`.
    pub mean_sq_bias: f64,
    /// `θ`-average of `E‖f̂(θ) − E f̂(θ)‖²_HS`.
    pub variance: f64,
    pub variance_se: f64,
}

impl RateRow {
    pub fn mse(&self) -> f64 {
        self.variance + self.mean_sq_bias
    }

    pub fn rmse(&self) -> f64 {
        self.mse().sqrt()
    }
}

#[derive(Debug, Clone)]
pub struct RateReport {
    pub label: String,
    pub rows: Vec<RateRow>,
    /// `(Δ, sup_θ bias)` at fixed spacing, exact.
    pub bias_sweep: Vec<(f64, f64)>,
    pub slopes: Vec<NamedSlope>,
    pub checks: Vec<Check>,
    pub comments: Vec<String>,
}

impl RateReport {
    pub fn slope(&self, name: &str) -> Option<SlopeFit> {
        self.slopes.iter().find(|s| s.name == name).map(|s| s.fit)
    }

    pub fn passed(&self) -> bool {
        super::all_pass(&self.checks)
    }

    /// Writes `rates.csv`, `bias_sweep.csv`, `slopes.csv`, `checks.txt` and SVG plots into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let rows: Vec<Vec<f64>> = self
            .rows
            .iter()
            .map(|r| {
                vec![r.n as f64, r.delta, r.volume, r.bandwidth, r.sup_bias, r.mean_sq_bias, r.variance, r.variance_se, r.mse(), r.rmse()]
            })
            .collect();
        let header = ["n", "delta", "volume", "bandwidth", "sup_bias", "mean_sq_bias", "variance", "variance_se", "mse", "rmse"];
        write_table(&dir.join("rates.csv"), &self.comments, &header, &rows)?;
        if !self.bias_sweep.is_empty() {
            let rows: Vec<Vec<f64>> = self.bias_sweep.iter().map(|&(b, s)| vec![b, s]).collect();
            write_table(&dir.join("bias_sweep.csv"), &self.comments, &["bandwidth", "sup_bias"], &rows)?;
        }
        write_slopes(&dir.join("slopes.csv"), &self.slopes)?;
        write_checks(&dir.join("checks.txt"), &self.checks)?;
        for s in &self.slopes {
            let (x, y, xl, yl) = match s.name.as_str() {
                "bias_vs_bandwidth" => (self.bias_sweep.iter().map(|p| p.0).collect(), self.bias_sweep.iter().map(|p| p.1).collect(), "bandwidth", "sup bias"),
                "variance_vs_bandwidth_over_volume" => (
                    self.rows.iter().map(|r| r.bandwidth / r.volume).collect(),
                    self.rows.iter().map(|r| r.variance).collect(),
                    "bandwidth / volume",
                    "variance",
                ),
                "rmse_vs_volume" => (self.rows.iter().map(|r| r.volume).collect(), self.rows.iter().map(|r| r.rmse()).collect(), "volume", "rmse"),
                "rmse_vs_n" => (self.rows.iter().map(|r| r.n as f64).collect(), self.rows.iter().map(|r| r.rmse()).collect(), "n", "rmse"),
                _ => continue,
            };
            let series = [Series { label: yl.to_string(), x, y }];
            let svg = plot::loglog_svg(&format!("{} ({})", self.label, s.name), xl, yl, &series, Some(&s.fit))?;
            fs::write(dir.join(format!("{}.svg", s.name)), svg)?;
        }
        Ok(())
    }
}

/// `θ`-averaged squared HS error of each replicate against the exact mean, in replicate order.
fn replicate_errors(
    model: &CovarianceModel,
    n: usize,
    delta: f64,
    est: &EstimatorConfig,
    mean: &[OperatorRep],
    rng: &RngConfig,
    stream: &[u64],
    replicates: usize,
) -> Result<Vec<f64>> {
    let sampler = FftSampler::new(model, n, delta)?;
    (0..replicates as u64)
        .into_par_iter()
        .map(|r| {
            let mut ids = stream.to_vec();
            ids.push(r);
            let mut g = rng.stream(&ids);
            let sample = sampler.sample(&mut g)?;
            let fhat = estimate_grid(&sample, est)?;
            let total: f64 = fhat.values.iter().zip(mean).map(|(a, b)| (a - b).hs_norm().powi(2)).sum();
            Ok(total / mean.len() as f64)
        })
        .collect()
}

/// Bias and Monte Carlo variance at one `(n, δ, Δ)`; `truth` gives the target at each `θ`.
#[allow(clippy::too_many_arguments)]
fn rate_row<F: Fn(&[f64]) -> Result<OperatorRep>>(
    model: &CovarianceModel,
    cfg: &ExperimentConfig,
    n: usize,
    delta: f64,
    bandwidth: f64,
    thetas: &[Vec<f64>],
    truth: F,
    stream: &[u64],
) -> Result<RateRow> {
    let design = SamplingDesign::grid_1d(delta, n)?;
    let est = EstimatorConfig::new(bandwidth, cfg.kernel_spec()?, thetas.to_vec(), Variant::Grid)?;
    let mean = expected_estimate(model, &design, None, None, &est)?;
    let mut sup_bias: f64 = 0.0;
    let mut sq = 0.0;
    for (t, m) in thetas.iter().zip(&mean) {
        let b = (m - &truth(t)?).hs_norm();
        sup_bias = sup_bias.max(b);
        sq += b * b;
    }
    let errs = replicate_errors(model, n, delta, &est, &mean, &RngConfig::new(cfg.master_seed), stream, cfg.replicates)?;
    let (variance, variance_se) = crate::stats::mean_se(&errs);
    Ok(RateRow {
        n,
        delta,
        volume: n as f64 * delta,
        bandwidth,
        sup_bias,
        mean_sq_bias: sq / thetas.len() as f64,
        variance,
        variance_se,
    })
}

fn fit(name: &str, x: Vec<f64>, y: Vec<f64>) -> Result<NamedSlope> {
    if x.len() < 4 {
        return Err(invalid(format!("slope fit `{name}` needs at least 4 points, got {}", x.len())));
    }
    Ok(NamedSlope { name: name.to_string(), fit: loglog_slope(&x, &y)? })
}

fn bandwidth_for(cfg: &ExperimentConfig, n: usize, volume: f64) -> f64 {
    match cfg.bandwidth_exponent {
        Some(e) => (n as f64).powf(e),
        None => bandwidth_rule(cfg.beta, volume, 1),
    }
}

/// Exact bias, Monte Carlo variance and MSE on fixed-spacing grids against the folded density.
pub fn run_rate_experiment(cfg: &ExperimentConfig) -> Result<RateReport> {
    cfg.validate()?;
    let model = cfg.model.build()?;
    let kernel = cfg.kernel_spec()?;
    let delta = cfg.delta;
    let thetas = fundamental_thetas(1, delta, cfg.theta_count);
    let truth = |t: &[f64]| model.folded_density(t, delta);
    let kind = ExperimentKind::Rates.stream_id();

    let mut bias_sweep = Vec::new();
    for &b in &cfg.bandwidths {
        // with overlap normalisation E f̂ does not depend on n once the support fits
        let n = cfg.sizes.iter().copied().max().unwrap_or(1).max((2.0 * b * kernel.support_radius() / delta).ceil() as usize + 1);
        let design = SamplingDesign::grid_1d(delta, n)?;
        let est = EstimatorConfig::new(b, kernel, thetas.clone(), Variant::Grid)?;
        let mean = expected_estimate(&model, &design, None, None, &est)?;
        let mut sup: f64 = 0.0;
        for (t, m) in thetas.iter().zip(&mean) {
            sup = sup.max((m - &truth(t)?).hs_norm());
        }
        bias_sweep.push((b, sup));
    }

    let rows = cfg
        .sizes
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let volume = n as f64 * delta;
            rate_row(&model, cfg, n, delta, bandwidth_for(cfg, n, volume), &thetas, truth, &[kind, i as u64])
        })
        .collect::<Result<Vec<_>>>()?;

    let mut slopes = Vec::new();
    let mut checks = Vec::new();
    let d = 1.0;
    let beta = cfg.beta;
    if bias_sweep.len() >= 4 {
        let s = fit("bias_vs_bandwidth", bias_sweep.iter().map(|p| p.0).collect(), bias_sweep.iter().map(|p| p.1).collect())?;
        checks.push(Check::near("bias slope vs log bandwidth", s.fit.slope, -beta, 0.15));
        slopes.push(s);
    }
    if rows.len() >= 4 {
        let s = fit(
            "variance_vs_bandwidth_over_volume",
            rows.iter().map(|r| r.bandwidth / r.volume).collect(),
            rows.iter().map(|r| r.variance).collect(),
        )?;
        checks.push(Check::near("variance slope vs log(bandwidth/volume)", s.fit.slope, 1.0, 0.2));
        slopes.push(s);
        let s = fit("rmse_vs_volume", rows.iter().map(|r| r.volume).collect(), rows.iter().map(|r| r.rmse()).collect())?;
        checks.push(Check::near("rmse slope vs log volume", s.fit.slope, -beta / (2.0 * beta + d), 0.07));
        slopes.push(s);
        let s = fit("mse_vs_volume", rows.iter().map(|r| r.volume).collect(), rows.iter().map(|r| r.mse()).collect())?;
        checks.push(Check::near("mse slope vs log volume", s.fit.slope, -2.0 * beta / (2.0 * beta + d), 0.2));
        slopes.push(s);
    }
    Ok(RateReport {
        label: "rates".into(),
        rows,
        bias_sweep,
        slopes,
        checks,
        comments: vec![
            format!("model {:?}, p = {}, kernel {}", cfg.model.rho, cfg.model.p, kernel.name()),
            format!("sup and averages over {} equispaced theta in [-pi/delta, pi/delta]", cfg.theta_count),
            format!("replicates {}, master seed {}", cfg.replicates, cfg.master_seed),
        ],
    })
}

#[derive(Debug, Clone)]
pub struct MixedRegime {
    pub alpha: f64,
    pub regime: &'static str,
    pub predicted_slope: f64,
    pub report: RateReport,
}

#[derive(Debug, Clone)]
pub struct MixedReport {
    pub alpha_threshold: f64,
    pub regimes: Vec<MixedRegime>,
    pub checks: Vec<Check>,
}

impl MixedReport {
    pub fn passed(&self) -> bool {
        super::all_pass(&self.checks)
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        for r in &self.regimes {
            r.report.write(&dir.join(format!("alpha_{:.4}", r.alpha)))?;
        }
        write_checks(&dir.join("checks.txt"), &self.checks)
    }
}

/// RMSE against the continuous density on grids `δₙ = n^{−α}` for `α` on both sides of `α_{β,γ}`.
pub fn run_mixed_domain_experiment(cfg: &ExperimentConfig) -> Result<MixedReport> {
    cfg.validate()?;
    let model = cfg.model.build()?;
    let kernel = cfg.kernel_spec()?;
    let (beta, gamma, d) = (cfg.beta, cfg.gamma, 1.0);
    let threshold = alpha_threshold(beta, gamma, 1);
    // a fixed window inside every fundamental domain (δ ≤ 1)
    let thetas = fundamental_thetas(1, 1.0, cfg.theta_count);
    let truth = |t: &[f64]| model.spectral_density(t);
    let kind = ExperimentKind::MixedDomain.stream_id();
    let mut regimes = Vec::new();
    let mut checks = Vec::new();
    for (a_idx, &factor) in cfg.alpha_factors.iter().enumerate() {
        let alpha = factor * threshold;
        let rows = cfg
            .sizes
            .iter()
            .enumerate()
            .map(|(i, &n)| {
                let delta = (n as f64).powf(-alpha);
                let volume = n as f64 * delta;
                rate_row(&model, cfg, n, delta, bandwidth_for(cfg, n, volume), &thetas, truth, &[kind, a_idx as u64, i as u64])
            })
            .collect::<Result<Vec<_>>>()?;
        let (regime, predicted) = if alpha < threshold {
            ("coarse", -alpha * gamma / 2.0)
        } else {
            ("fine", -beta * d * (1.0 - alpha) / (2.0 * beta + d))
        };
        let s = fit("rmse_vs_n", rows.iter().map(|r| r.n as f64).collect(), rows.iter().map(|r| r.rmse()).collect())?;
        let check = Check::near(format!("{regime} regime (alpha = {alpha:.4}) rmse slope vs log n"), s.fit.slope, predicted, 0.15);
        checks.push(check.clone());
        regimes.push(MixedRegime {
            alpha,
            regime,
            predicted_slope: predicted,
            report: RateReport {
                label: format!("mixed domain, alpha = {alpha:.4}"),
                rows,
                bias_sweep: vec![],
                slopes: vec![s],
                checks: vec![check],
                comments: vec![
                    format!("model {:?}, p = {}, kernel {}", cfg.model.rho, cfg.model.p, kernel.name()),
                    format!("delta = n^-{alpha:.6}, alpha threshold {threshold:.6}, regime {regime}"),
                    format!("sup and averages over {} equispaced theta in [-pi, pi]", cfg.theta_count),
                    format!("replicates {}, master seed {}", cfg.replicates, cfg.master_seed),
                ],
            },
        });
    }
    Ok(MixedReport { alpha_threshold: threshold, regimes, checks })
}
