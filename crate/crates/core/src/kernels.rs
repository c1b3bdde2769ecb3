//! Radial lag-window kernels supported on the closed unit ball.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::quad;

/// Flatness threshold used by [`KernelSpec::check_flatness`].
pub const FLATNESS_TOL: f64 = 1e-4;
/// Default finite-difference step for flatness checks.
pub const DEFAULT_FLATNESS_STEP: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kernel", rename_all = "snake_case")]
pub enum KernelFamily {
    /// `[1 − r^{λ+1}]₊`
    TruncatedPower { lambda: u32 },
    /// 1 on `r ≤ ε`, linear down to 0 at `r = 1`.
    TrapezoidFlatTop { epsilon: f64 },
    Bartlett,
    Parzen,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    family: KernelFamily,
    d: usize,
}

/// Per-order finite-difference values at the origin.
#[derive(Debug, Clone, PartialEq)]
pub struct FlatnessReport {
    pub values: Vec<f64>,
    pub passed: bool,
}

impl KernelSpec {
    pub fn new(family: KernelFamily, d: usize) -> Result<Self> {
        if d == 0 {
            return Err(invalid("kernel dimension must be positive"));
        }
        match family {
            KernelFamily::TruncatedPower { lambda } if lambda == 0 => {
                return Err(invalid("truncated_power needs lambda >= 1"))
            }
            KernelFamily::TrapezoidFlatTop { epsilon } if !(epsilon > 0.0 && epsilon < 1.0) => {
                return Err(invalid(format!("trapezoid plateau must lie in (0,1), got {epsilon}")))
            }
            _ => {}
        }
        Ok(Self { family, d })
    }

    pub fn truncated_power(lambda: u32, d: usize) -> Result<Self> {
        Self::new(KernelFamily::TruncatedPower { lambda }, d)
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn support_radius(&self) -> f64 {
        1.0
    }

    /// Order λ up to which the kernel is flat at the origin; `u32::MAX` for flat tops.
    pub fn flatness_order(&self) -> u32 {
        match self.family {
            KernelFamily::TruncatedPower { lambda } => lambda,
            KernelFamily::TrapezoidFlatTop { .. } => u32::MAX,
            KernelFamily::Bartlett | KernelFamily::Parzen => 0,
        }
    }

    pub fn name(&self) -> String {
        match self.family {
            KernelFamily::TruncatedPower { lambda } => format!("truncated_power(lambda={lambda})"),
            KernelFamily::TrapezoidFlatTop { epsilon } => format!("trapezoid_flat_top(epsilon={epsilon})"),
            KernelFamily::Bartlett => "bartlett".into(),
            KernelFamily::Parzen => "parzen".into(),
        }
    }

    /// Radial profile `k(r)`, `r ≥ 0`.
    pub fn profile(&self, r: f64) -> f64 {
        let r = r.abs();
        if r > 1.0 {
            return 0.0;
        }
        match self.family {
            KernelFamily::TruncatedPower { lambda } => (1.0 - r.powi(lambda as i32 + 1)).max(0.0),
            KernelFamily::TrapezoidFlatTop { epsilon } => {
                if r <= epsilon {
                    1.0
                } else {
                    (1.0 - r) / (1.0 - epsilon)
                }
            }
            KernelFamily::Bartlett => 1.0 - r,
            KernelFamily::Parzen => {
                if r <= 0.5 {
                    1.0 - 6.0 * r * r + 6.0 * r * r * r
                } else {
                    2.0 * (1.0 - r).powi(3)
                }
            }
        }
    }

    pub fn eval(&self, u: &[f64]) -> f64 {
        self.profile(u.iter().map(|x| x * x).sum::<f64>().sqrt())
    }

    /// `∫_{ℝᵈ} K(u)² du`.
    pub fn l2_norm_sq(&self) -> f64 {
        match (self.family, self.d) {
            (KernelFamily::TruncatedPower { lambda }, 1) => {
                let q = f64::from(lambda) + 1.0;
                2.0 * (1.0 - 2.0 / (q + 1.0) + 1.0 / (2.0 * q + 1.0))
            }
            (KernelFamily::TruncatedPower { lambda }, 2) => {
                let q = f64::from(lambda) + 1.0;
                2.0 * PI * (0.5 - 2.0 / (q + 2.0) + 1.0 / (2.0 * q + 2.0))
            }
            (KernelFamily::TrapezoidFlatTop { epsilon }, 1) => 2.0 * (epsilon + (1.0 - epsilon) / 3.0),
            (KernelFamily::Bartlett, 1) => 2.0 / 3.0,
            (KernelFamily::Bartlett, 2) => PI / 6.0,
            (KernelFamily::Parzen, 1) => 151.0 / 280.0,
            _ => {
                let d = self.d as i32;
                let surface = unit_sphere_area(self.d);
                let f = |r: f64| self.profile(r).powi(2) * r.powi(d - 1);
                let mut total = 0.0;
                for (a, b) in self.breakpoints().windows(2).map(|w| (w[0], w[1])) {
                    total += quad::integrate(f, a, b, 1e-13);
                }
                surface * total
            }
        }
    }

    fn breakpoints(&self) -> Vec<f64> {
        match self.family {
            KernelFamily::TrapezoidFlatTop { epsilon } => vec![0.0, epsilon, 1.0],
            KernelFamily::Parzen => vec![0.0, 0.5, 1.0],
            _ => vec![0.0, 1.0],
        }
    }

    /// Finite-difference derivatives of the radial profile at the origin for orders `1..=order`.
    ///
    /// Order 1 uses the one-sided second-order difference `(−3k(0)+4k(h)−k(2h))/(2h)`,
    /// since a central first difference vanishes identically for any even function and
    /// cannot detect a kink. Orders `m ≥ 2` use the central difference
    /// `Σ_i (−1)^i C(m,i) k((m/2−i)h) / h^m` of the even extension.
    pub fn check_flatness(&self, order: u32, h_step: f64) -> Result<FlatnessReport> {
        if order > 6 {
            return Err(invalid("flatness checks are limited to order 6"));
        }
        if !(h_step > 0.0) {
            return Err(invalid("flatness step must be positive"));
        }
        let k = |x: f64| self.profile(x);
        let h = h_step;
        let mut values = Vec::with_capacity(order as usize);
        for m in 1..=order {
            let v = if m == 1 {
                (-3.0 * k(0.0) + 4.0 * k(h) - k(2.0 * h)) / (2.0 * h)
            } else {
                let mut acc = 0.0;
                let mut binom = 1.0;
                for i in 0..=m {
                    let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
                    acc += sign * binom * k((f64::from(m) / 2.0 - f64::from(i)) * h);
                    binom = binom * f64::from(m - i) / f64::from(i + 1);
                }
                acc / h.powi(m as i32)
            };
            values.push(v);
        }
        let passed = values.iter().all(|v| v.abs() <= FLATNESS_TOL);
        Ok(FlatnessReport { values, passed })
    }
}

fn unit_sphere_area(d: usize) -> f64 {
    let half = d as f64 / 2.0;
    2.0 * PI.powf(half) / statrs::function::gamma::gamma(half)
}
