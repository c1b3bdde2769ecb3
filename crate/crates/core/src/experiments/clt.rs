use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::config::{ExperimentConfig, ExperimentKind};
use super::{write_checks, write_table, Check};
use crate::error::{invalid, Result};
use crate::estimator::{estimate_clt_d1, expected_estimate, EstimatorConfig, Variant};
use crate::geometry::SamplingDesign;
use crate::simulate::{FftSampler, RngConfig};
use crate::stats::{ks_normal, ks_two_sample, mean, KsResult};

const KS_LEVEL: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub struct CltThetaRow {
    pub theta: f64,
    /// 1 at `θ ∈ {0, ±π/δ}`, else 0.
    pub c: f64,
    /// Limit standard deviation of `⟨𝒯 e₁, e₁⟩`.
    pub target_sd: f64,
    pub sample_mean: f64,
    pub sample_sd: f64,
    pub ks: KsResult,
    /// Third moment of the standardised statistic and its Monte Carlo standard error.
    pub third_moment: f64,
    pub third_moment_se: f64,
    /// Two-sample KS of `‖𝒯ₙ‖_HS` against the Karhunen–Loève limit (only where `c = 0`).
    pub limit_law: Option<KsResult>,
}

#[derive(Debug, Clone)]
pub struct CltAttempt {
    pub seed: u64,
    pub rows: Vec<CltThetaRow>,
    /// Statistics `⟨𝒯ₙ e₁, e₁⟩`, one row per replicate and one column per `θ`.
    pub statistics: Vec<Vec<f64>>,
    pub checks: Vec<Check>,
}

#[derive(Debug, Clone)]
pub struct CltReport {
    pub n: usize,
    pub bandwidth: f64,
    /// First attempt, then the reseeded one if the first failed.
    pub attempts: Vec<CltAttempt>,
}

impl CltReport {
    pub fn last(&self) -> &CltAttempt {
        self.attempts.last().expect("at least one attempt")
    }

    pub fn rows(&self) -> &[CltThetaRow] {
        &self.last().rows
    }

    pub fn checks(&self) -> &[Check] {
        &self.last().checks
    }

    pub fn passed(&self) -> bool {
        super::all_pass(self.checks())
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let mut all_checks = Vec::new();
        for (k, a) in self.attempts.iter().enumerate() {
            let comments = vec![
                format!("attempt {k}, seed {}, n = {}, bandwidth = {:.6}", a.seed, self.n, self.bandwidth),
                "limit_ks_p is NaN where the pseudo term is present".to_string(),
            ];
            let rows: Vec<Vec<f64>> = a
                .rows
                .iter()
                .map(|r| {
                    vec![
                        r.theta,
                        r.c,
                        r.target_sd,
                        r.sample_mean,
                        r.sample_sd,
                        r.ks.statistic,
                        r.ks.p_value,
                        r.third_moment,
                        r.third_moment_se,
                        r.limit_law.map_or(f64::NAN, |k| k.p_value),
                    ]
                })
                .collect();
            let header = ["theta", "c", "target_sd", "mean", "sd", "ks_statistic", "ks_p", "third_moment", "third_moment_se", "limit_ks_p"];
            write_table(&dir.join(format!("clt_summary_{k}.csv")), &comments, &header, &rows)?;
            let header: Vec<String> = a.rows.iter().enumerate().map(|(i, _)| format!("theta{i}")).collect();
            let header: Vec<&str> = header.iter().map(String::as_str).collect();
            write_table(&dir.join(format!("clt_statistics_{k}.csv")), &comments, &header, &a.statistics)?;
            all_checks.extend(a.checks.iter().map(|c| Check { name: format!("attempt {k}: {}", c.name), ..c.clone() }));
        }
        write_checks(&dir.join("checks.txt"), &all_checks)
    }
}

fn pseudo_indicator(theta: f64, delta: f64) -> f64 {
    let half = PI / delta;
    let tol = 1e-9 * half;
    if theta.abs() <= tol || (theta.abs() - half).abs() <= tol {
        1.0
    } else {
        0.0
    }
}

/// `‖K‖₂ (Σᵢⱼ λᵢλⱼ |Zᵢⱼ|²)^{1/2}`: the HS norm of the Karhunen–Loève limit.
fn limit_hs_norm(eigs: &[f64], k_norm: f64, rng: &mut impl Rng) -> f64 {
    let mut s = 0.0;
    for i in 0..eigs.len() {
        let z: f64 = rng.sample(StandardNormal);
        s += eigs[i] * eigs[i] * z * z;
        for j in i + 1..eigs.len() {
            let re: f64 = rng.sample::<f64, _>(StandardNormal) * std::f64::consts::FRAC_1_SQRT_2;
            let im: f64 = rng.sample::<f64, _>(StandardNormal) * std::f64::consts::FRAC_1_SQRT_2;
            s += 2.0 * eigs[i] * eigs[j] * (re * re + im * im);
        }
    }
    k_norm * s.max(0.0).sqrt()
}

fn run_attempt(cfg: &ExperimentConfig, seed: u64, attempt: u64) -> Result<(CltAttempt, usize, f64)> {
    let model = cfg.model.build()?;
    let kernel = cfg.kernel_spec()?;
    let n = cfg.sizes[0];
    let delta = cfg.delta;
    let bandwidth = match cfg.bandwidth_exponent {
        Some(e) => (n as f64).powf(e),
        None => crate::estimator::bandwidth_rule(cfg.beta, n as f64 * delta, 1),
    };
    let thetas: Vec<Vec<f64>> = cfg.thetas.iter().map(|&t| vec![t]).collect();
    if thetas.is_empty() {
        return Err(invalid("the CLT experiment needs at least one theta"));
    }
    let est = EstimatorConfig::new(bandwidth, kernel, thetas.clone(), Variant::CltD1)?;
    let design = SamplingDesign::grid_1d(delta, n)?;
    let mean_op = expected_estimate(&model, &design, None, None, &est)?;
    let scale = (n as f64 * delta / bandwidth).sqrt();
    let sampler = FftSampler::new(&model, n, delta)?;
    let rng = RngConfig::new(seed);
    let kind = ExperimentKind::Clt.stream_id();

    // per replicate: (statistic, HS norm) at each θ
    let draws: Vec<Vec<(f64, f64)>> = (0..cfg.replicates as u64)
        .into_par_iter()
        .map(|r| {
            let s = sampler.sample(&mut rng.stream(&[kind, attempt, 0, r]))?;
            let f = estimate_clt_d1(&s, &est)?;
            Ok(f.values
                .iter()
                .zip(&mean_op)
                .map(|(a, b)| {
                    let t = (a - b).scale_real(scale);
                    (t.get(0, 0).re, t.hs_norm())
                })
                .collect())
        })
        .collect::<Result<_>>()?;

    let k2 = kernel.l2_norm_sq();
    let mut rows = Vec::new();
    let mut checks = Vec::new();
    for (i, th) in cfg.thetas.iter().enumerate() {
        let stats: Vec<f64> = draws.iter().map(|d| d[i].0).collect();
        let norms: Vec<f64> = draws.iter().map(|d| d[i].1).collect();
        let f = model.folded_density(&[*th], delta)?;
        let fc = model.pseudo_density(&[*th], delta)?;
        let c = pseudo_indicator(*th, delta);
        let target_sd = (k2 * (f.get(0, 0).norm_sqr() + c * fc.get(0, 0).norm_sqr())).sqrt();
        let ks = ks_normal(&stats, 0.0, target_sd)?;
        let m = mean(&stats);
        let sd = crate::stats::variance(&stats).sqrt();
        let cubes: Vec<f64> = stats.iter().map(|x| ((x - m) / sd).powi(3)).collect();
        let (third, third_se) = crate::stats::mean_se(&cubes);
        let limit_law = if c == 0.0 {
            let eig = f.eig_self_adjoint(1e-9)?;
            let draws_kl: Vec<f64> = (0..4 * cfg.replicates as u64)
                .into_par_iter()
                .map(|r| limit_hs_norm(&eig.values, k2.sqrt(), &mut rng.stream(&[kind, attempt, 1 + i as u64, r])))
                .collect();
            Some(ks_two_sample(&norms, &draws_kl)?)
        } else {
            None
        };
        checks.push(Check::at_least(format!("KS p-value vs limit normal, theta = {th:.6}"), ks.p_value, KS_LEVEL));
        checks.push(Check::new(
            format!("third moment of standardised statistic, theta = {th:.6}"),
            third.abs(),
            format!("≤ 5 × {third_se:.4}"),
            third.abs() <= 5.0 * third_se,
        ));
        if let Some(k) = limit_law {
            checks.push(Check::at_least(format!("two-sample KS of HS norms vs Karhunen-Loeve limit, theta = {th:.6}"), k.p_value, KS_LEVEL));
        }
        rows.push(CltThetaRow { theta: *th, c, target_sd, sample_mean: m, sample_sd: sd, ks, third_moment: third, third_moment_se: third_se, limit_law });
    }
    let statistics = draws.iter().map(|d| d.iter().map(|p| p.0).collect()).collect();
    Ok((CltAttempt { seed, rows, statistics, checks }, n, bandwidth))
}

/// Normality of `𝒯ₙ(θ)` on a one-dimensional grid; one automatic reseed if any test fails.
pub fn run_clt_experiment(cfg: &ExperimentConfig) -> Result<CltReport> {
    cfg.validate()?;
    if cfg.model.build()?.d() != 1 {
        return Err(invalid("the CLT experiment is one-dimensional"));
    }
    let (first, n, bandwidth) = run_attempt(cfg, cfg.master_seed, 0)?;
    let mut attempts = vec![first];
    if !super::all_pass(&attempts[0].checks) {
        let (second, _, _) = run_attempt(cfg, cfg.master_seed.wrapping_add(1), 1)?;
        attempts.push(second);
    }
    Ok(CltReport { n, bandwidth, attempts })
}
