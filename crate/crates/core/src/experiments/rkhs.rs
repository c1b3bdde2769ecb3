use std::fs;
use std::path::Path;

use super::config::ExperimentConfig;
use super::plot::{self, Series};
use super::{write_checks, write_slopes, write_table, Check, NamedSlope};
use crate::error::{invalid, Result};
use crate::rkhs::{brownian_cholesky_check, EigenExpansion, RkhsFamily, RkhsSpec};
use crate::stats::loglog_slope;

const CHOLESKY_M: usize = 64;

#[derive(Debug, Clone)]
pub struct RkhsReport {
    pub sizes: Vec<usize>,
    pub terms: Vec<usize>,
    /// `bias[t][i]`: projection bias with `terms[t]` eigenpairs at `sizes[i]` nodes.
    pub bias: Vec<Vec<f64>>,
    /// Omitted squared norm `Σ_{j>J} νⱼ²` for each truncation.
    pub tails: Vec<f64>,
    pub slopes: Vec<NamedSlope>,
    pub cholesky_residual: f64,
    pub checks: Vec<Check>,
}

impl RkhsReport {
    pub fn passed(&self) -> bool {
        super::all_pass(&self.checks)
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let mut header = vec!["m".to_string()];
        header.extend(self.terms.iter().map(|j| format!("bias_j{j}")));
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        let rows: Vec<Vec<f64>> = self
            .sizes
            .iter()
            .enumerate()
            .map(|(i, &m)| std::iter::once(m as f64).chain(self.bias.iter().map(|b| b[i])).collect())
            .collect();
        let comments = vec![
            format!("brownian nodes i/m, cholesky residual at m = {CHOLESKY_M}: {:e}", self.cholesky_residual),
            format!("truncation tails {:?}", self.tails),
        ];
        write_table(&dir.join("rkhs.csv"), &comments, &header, &rows)?;
        write_slopes(&dir.join("slopes.csv"), &self.slopes)?;
        write_checks(&dir.join("checks.txt"), &self.checks)?;
        let series: Vec<Series> = self
            .terms
            .iter()
            .zip(&self.bias)
            .map(|(j, b)| Series { label: format!("J = {j}"), x: self.sizes.iter().map(|&m| m as f64).collect(), y: b.clone() })
            .collect();
        let svg = plot::loglog_svg("projection bias", "m", "bias", &series, self.slopes.first().map(|s| &s.fit))?;
        fs::write(dir.join("bias_vs_m.svg"), svg)?;
        Ok(())
    }
}

/// Projection bias `‖Πₘ f Πₘ − f‖_HS` in the Brownian space over node counts `m`.
pub fn run_rkhs_experiment(cfg: &ExperimentConfig) -> Result<RkhsReport> {
    cfg.validate()?;
    if cfg.eigen_terms.is_empty() || cfg.sizes.len() < 4 {
        return Err(invalid("the RKHS experiment needs truncation levels and at least 4 node counts"));
    }
    let specs = cfg.sizes.iter().map(|&m| RkhsSpec::uniform(RkhsFamily::Brownian, m)).collect::<Result<Vec<_>>>()?;
    let mut bias = Vec::new();
    let mut tails = Vec::new();
    let mut slopes = Vec::new();
    for &j in &cfg.eigen_terms {
        let eig = EigenExpansion::brownian_sines(cfg.eigen_power, j);
        let b: Vec<f64> = specs.iter().map(|s| s.projected_bias(&eig)).collect();
        let x: Vec<f64> = cfg.sizes.iter().map(|&m| m as f64).collect();
        slopes.push(NamedSlope { name: format!("bias_vs_m_j{j}"), fit: loglog_slope(&x, &b)? });
        bias.push(b);
        tails.push(eig.tail);
    }
    let cholesky_residual = brownian_cholesky_check(CHOLESKY_M)?;
    let mut checks = vec![
        Check::at_most(format!("brownian cholesky identity residual, m = {CHOLESKY_M}"), cholesky_residual, 1e-13),
        Check::near(format!("bias slope vs log m, J = {}", cfg.eigen_terms[0]), slopes[0].fit.slope, -0.5, 0.1),
    ];
    for (i, w) in cfg.sizes.windows(2).enumerate() {
        if w[1] == 2 * w[0] {
            let ratio = bias[0][i + 1] / bias[0][i];
            checks.push(Check::new(format!("bias ratio m = {} -> {}", w[0], w[1]), ratio, "in [0.6, 0.8]", (0.6..=0.8).contains(&ratio)));
        }
    }
    for (t, s) in slopes.iter().enumerate().skip(1) {
        let diff = (s.fit.slope - slopes[0].fit.slope).abs();
        checks.push(Check::at_most(format!("slope change J = {} -> {}", cfg.eigen_terms[0], cfg.eigen_terms[t]), diff, 0.02));
    }
    Ok(RkhsReport { sizes: cfg.sizes.clone(), terms: cfg.eigen_terms.clone(), bias, tails, slopes, cholesky_residual, checks })
}
