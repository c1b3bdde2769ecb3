//! Lag-window spectral density estimation for stationary processes that take
//! values in a (truncated) separable Hilbert space.
//!
//! The crate is organised bottom-up:
//!
//! - [`operator`]: coordinates of Hilbert-space elements and trace-class operators.
//! - [`kernels`]: compactly supported smoothing kernels (lag windows).
//! - [`geometry`]: sampling designs, convex domains, Voronoi cells, overlap volumes.
//! - [`models`]: stationary operator covariances with ground-truth spectra.
//! - [`simulate`]: Gaussian and non-Gaussian process generators.
//! - [`estimator`]: the irregular, gridded and CLT-normalised estimators.
//! - [`moments`]: Isserlis pairings and Hilbertian fourth-order cumulants.
//! - [`rkhs`]: interpolation and projection in reproducing-kernel spaces.
//! - [`experiments`]: Monte Carlo drivers, slope fits, reports and plots.

pub mod error;
pub mod estimator;
pub mod experiments;
pub mod geometry;
pub mod kernels;
pub mod models;
pub mod moments;
pub mod operator;
pub mod quad;
pub mod rkhs;
pub mod simulate;
pub mod stats;

pub use error::{Error, Result};
pub use num_complex::Complex64;
