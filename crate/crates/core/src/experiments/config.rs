use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::kernels::{KernelFamily, KernelSpec};
use crate::models::{CovarianceModel, RhoFamily};
use crate::operator::OperatorRep;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Rates,
    MixedDomain,
    Clt,
    Rkhs,
    Check,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Rates => "rates",
            ExperimentKind::MixedDomain => "mixed_domain",
            ExperimentKind::Clt => "clt",
            ExperimentKind::Rkhs => "rkhs",
            ExperimentKind::Check => "check",
        }
    }

    /// Stream tag separating the random substreams of different experiments.
    pub(crate) fn stream_id(self) -> u64 {
        self as u64 + 1
    }
}

/// A real separable model `C(h) = ρ(h) Σ₀` on `ℝ¹`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBlock {
    #[serde(flatten)]
    pub rho: RhoFamily,
    pub p: usize,
    /// Row-major `Σ₀`; defaults to `0.5^{|j−k|}`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma0: Option<Vec<f64>>,
}

impl ModelBlock {
    pub fn new(rho: RhoFamily, p: usize) -> Self {
        Self { rho, p, sigma0: None }
    }

    pub fn sigma0(&self) -> Result<OperatorRep> {
        match &self.sigma0 {
            Some(rows) => OperatorRep::from_real_rows(self.p, rows),
            None => {
                let rows: Vec<f64> = (0..self.p * self.p)
                    .map(|i| 0.5f64.powi((i / self.p).abs_diff(i % self.p) as i32))
                    .collect();
                OperatorRep::from_real_rows(self.p, &rows)
            }
        }
    }

    pub fn build(&self) -> Result<CovarianceModel> {
        CovarianceModel::separable(1, self.rho, self.sigma0()?)
    }
}

/// Flat configuration shared by all experiments; fields irrelevant to a kind are ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub master_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    pub model: ModelBlock,
    pub kernel: KernelFamily,
    /// Sample sizes `n` (or node counts `m` for the RKHS experiment).
    pub sizes: Vec<usize>,
    /// Fixed grid spacing.
    pub delta: f64,
    /// Mixed domain: `α = factor · α_{β,γ}`, `δₙ = n^{−α}`.
    pub alpha_factors: Vec<f64>,
    pub beta: f64,
    pub gamma: f64,
    /// Bandwidths of the exact bias sweep.
    pub bandwidths: Vec<f64>,
    /// `Δ = n^e` when set, otherwise `Δ = |T|^{1/(2β+1)}`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bandwidth_exponent: Option<f64>,
    pub replicates: usize,
    /// Number of equispaced `θ` for sup/average norms.
    pub theta_count: usize,
    /// Explicit `θ` list (CLT).
    pub thetas: Vec<f64>,
    /// RKHS eigenvalues `νⱼ = j^{−power}`.
    pub eigen_power: f64,
    /// RKHS truncation levels; the first one is the reported fit.
    pub eigen_terms: Vec<usize>,
}

impl ExperimentConfig {
    /// Default configuration of each experiment.
    pub fn preset(kind: ExperimentKind) -> Self {
        let base = Self {
            kind,
            master_seed: 20_240_611,
            out_dir: None,
            threads: None,
            model: ModelBlock::new(RhoFamily::PowerLaw { beta: 1.0 }, 3),
            kernel: KernelFamily::TruncatedPower { lambda: 3 },
            sizes: vec![256, 512, 1024, 2048],
            delta: 1.0,
            alpha_factors: vec![],
            beta: 1.0,
            gamma: 1.0,
            bandwidths: vec![],
            bandwidth_exponent: None,
            replicates: 200,
            theta_count: 65,
            thetas: vec![],
            eigen_power: 3.0,
            eigen_terms: vec![],
        };
        match kind {
            ExperimentKind::Rates => Self { bandwidths: vec![8.0, 16.0, 32.0, 64.0, 128.0], ..base },
            ExperimentKind::MixedDomain => Self {
                model: ModelBlock::new(RhoFamily::Exponential { a: 1.0 }, 2),
                sizes: vec![512, 1024, 2048, 4096, 8192],
                alpha_factors: vec![0.5, 1.5],
                replicates: 100,
                ..base
            },
            ExperimentKind::Clt => Self {
                model: ModelBlock::new(RhoFamily::Ar1Lattice { a: 0.5, delta: 1.0 }, 2),
                sizes: vec![4096],
                bandwidth_exponent: Some(0.4),
                replicates: 500,
                thetas: vec![std::f64::consts::FRAC_PI_3, 0.0, std::f64::consts::PI],
                ..base
            },
            ExperimentKind::Rkhs => Self { sizes: vec![8, 16, 32, 64, 128], eigen_terms: vec![20, 40], ..base },
            ExperimentKind::Check => Self { sizes: vec![64], replicates: 2, ..base },
        }
    }

    /// Parses TOML; keys not given fall back to the preset of the declared `kind`.
    pub fn from_toml(text: &str) -> Result<Self> {
        let user: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Parse(e.to_string()))?;
        let kind: ExperimentKind = user
            .get("kind")
            .cloned()
            .ok_or_else(|| Error::Parse("missing `kind`".into()))?
            .try_into()
            .map_err(|e: toml::de::Error| Error::Parse(e.to_string()))?;
        let mut merged = toml::Table::try_from(Self::preset(kind)).map_err(|e| Error::Parse(e.to_string()))?;
        merged.extend(user);
        let cfg: Self = merged.try_into().map_err(|e: toml::de::Error| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.sizes.is_empty() || self.sizes.contains(&0) {
            return Err(invalid("sizes must be nonempty and positive"));
        }
        if self.replicates < 2 {
            return Err(invalid("at least two replicates are needed for variance estimation"));
        }
        if !(self.delta > 0.0) || self.theta_count == 0 || self.model.p == 0 {
            return Err(invalid("delta, theta_count and model.p must be positive"));
        }
        if self.bandwidths.iter().any(|b| !(*b > 0.0)) {
            return Err(invalid("bandwidths must be positive"));
        }
        self.model.rho.validate()?;
        KernelSpec::new(self.kernel, 1)?;
        Ok(())
    }

    pub fn kernel_spec(&self) -> Result<KernelSpec> {
        KernelSpec::new(self.kernel, 1)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.master_seed = seed;
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_round_trip() {
        for kind in [ExperimentKind::Rates, ExperimentKind::MixedDomain, ExperimentKind::Clt, ExperimentKind::Rkhs, ExperimentKind::Check] {
            let cfg = ExperimentConfig::preset(kind);
            cfg.validate().unwrap();
            let text = cfg.to_toml().unwrap();
            assert_eq!(ExperimentConfig::from_toml(&text).unwrap(), cfg);
        }
    }

    #[test]
    fn partial_config_uses_preset() {
        let cfg = ExperimentConfig::from_toml("kind = \"clt\"\nreplicates = 50\n[model]\nrho = \"exponential\"\na = 2.0\np = 1\n").unwrap();
        assert_eq!(cfg.replicates, 50);
        assert_eq!(cfg.model.rho, RhoFamily::Exponential { a: 2.0 });
        assert_eq!(cfg.sizes, vec![4096]);
    }

    #[test]
    fn rejects_bad_config() {
        assert!(ExperimentConfig::from_toml("replicates = 5").is_err());
        assert!(ExperimentConfig::from_toml("kind = \"rates\"\nreplicates = 1").is_err());
        assert!(ExperimentConfig::from_toml("kind = \"rates\"\nsizes = [0, 4]").is_err());
        assert!(ExperimentConfig::from_toml("kind = \"rates\"\nbogus = 1").is_err());
    }

    #[test]
    fn default_sigma_is_positive_definite() {
        let s = ModelBlock::new(RhoFamily::Exponential { a: 1.0 }, 4).sigma0().unwrap();
        assert!(s.eig_self_adjoint(1e-9).unwrap().values.iter().all(|&v| v > 0.0));
    }
}
