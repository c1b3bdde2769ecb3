//! Monte Carlo experiment drivers, reports and plots.
//!
//! Every driver is deterministic in `(config, master_seed)`: replicate `r` of size index `i`
//! draws from the substream `[kind, i, r]` and results are merged in index order.

mod check;
mod clt;
mod config;
pub mod plot;
mod rates;
mod rkhs;

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::Result;
use crate::stats::SlopeFit;

pub use check::run_check_suite;
pub use clt::{run_clt_experiment, CltReport, CltThetaRow};
pub use config::{ExperimentConfig, ExperimentKind, ModelBlock};
pub use rates::{run_mixed_domain_experiment, run_rate_experiment, MixedReport, RateReport, RateRow};
pub use rkhs::{run_rkhs_experiment, RkhsReport};

/// One thresholded outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub target: String,
    pub pass: bool,
}

impl Check {
    pub fn new(name: impl Into<String>, value: f64, target: impl Into<String>, pass: bool) -> Self {
        Self { name: name.into(), value, target: target.into(), pass }
    }

    /// `|value − want| ≤ tol`.
    pub fn near(name: impl Into<String>, value: f64, want: f64, tol: f64) -> Self {
        Self::new(name, value, format!("{want:.4} ± {tol}"), (value - want).abs() <= tol)
    }

    pub fn at_most(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self::new(name, value, format!("≤ {limit:e}"), value <= limit)
    }

    pub fn at_least(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self::new(name, value, format!("> {limit}"), value > limit)
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.pass { "PASS" } else { "FAIL" };
        write!(f, "[{tag}] {}: {:.6e} (target {})", self.name, self.value, self.target)
    }
}

pub fn all_pass(checks: &[Check]) -> bool {
    checks.iter().all(|c| c.pass)
}

/// A named slope fit as written to `slopes.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct NamedSlope {
    pub name: String,
    pub fit: SlopeFit,
}

fn write_slopes(path: &Path, slopes: &[NamedSlope]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["name", "slope", "slope_se", "intercept", "points"])?;
    for s in slopes {
        w.write_record([
            s.name.clone(),
            fmt_num(s.fit.slope),
            fmt_num(s.fit.slope_se),
            fmt_num(s.fit.intercept),
            s.fit.points.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn write_checks(path: &Path, checks: &[Check]) -> Result<()> {
    let mut f = fs::File::create(path)?;
    for c in checks {
        writeln!(f, "{c}")?;
    }
    Ok(())
}

/// Fixed-width rendering so identical runs produce identical files.
pub(crate) fn fmt_num(x: f64) -> String {
    format!("{x:.12e}")
}

/// Writes a table with `#`-prefixed header comments.
fn write_table(path: &Path, comments: &[String], header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut f = fs::File::create(path)?;
    for c in comments {
        writeln!(f, "# {c}")?;
    }
    let mut w = csv::Writer::from_writer(f);
    w.write_record(header)?;
    for r in rows {
        w.write_record(r.iter().map(|&x| fmt_num(x)))?;
    }
    w.flush()?;
    Ok(())
}
