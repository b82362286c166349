//! Goodness-of-fit testing for elliptical models in high dimensions.
//!
//! An elliptical random vector has the form ξ·Σ^{1/2}·u, where u is uniform on
//! the unit sphere of ℝᵖ, ξ ≥ 0 is independent of u, and E(ξ²) = p. Every
//! covariate of such a vector has the same kurtosis κ, and κ can also be
//! computed "coordinate-free" from var(‖x‖₂²) and the trace powers of Σ. This
//! crate tests ellipticity by playing two estimates of κ off each other:
//!
//! * `κ̃` — the average of entrywise kurtosis estimates over the first half of
//!   the sample,
//! * `κ̌` — a plug-in estimate built from the squared-norm variance and trace
//!   powers of the second half,
//!
//! and rejecting when the normalized discrepancy `T_n/σ̂_n` is large. The test
//! statistic is asymptotically standard normal when p and n diverge
//! proportionally, with no restrictions on Σ.
//!
//! Module map:
//!
//! * [`numkit`] — symmetric-matrix numerics: trace powers (with a Gram-dual
//!   fast path for p > n), entrywise norms, correlation conversion, symmetric
//!   square root, Haar-orthogonal sampling, Gaussian quadratic-form moments,
//!   and the standard normal CDF/quantile.
//! * [`models`] — data generation: mixing distributions for ξ², covariance
//!   models, the elliptical sampler, and a perturbation family for power
//!   studies.
//! * [`estimators`] — the kurtosis estimators, the discrepancy statistic, and
//!   its variance estimate.
//! * [`gof`] — the end-to-end test pipeline (preprocessing, split, z-score,
//!   p-value, decision).
//! * [`harness`] — Monte Carlo level/power experiments, CSV ingestion, and
//!   report emission.

pub mod error;
pub mod estimators;
pub mod gof;
pub mod harness;
pub mod models;
pub mod numkit;

pub use error::{Error, Result};

/// An n×p observation matrix; rows are observations.
pub type DataMatrix = ndarray::Array2<f64>;

pub use estimators::{KurtosisPair, VarianceEstimate};
pub use gof::{run_test, TestOptions, TestResult};
pub use harness::{simulate_level, simulate_power, SimulationConfig, SimulationReport};
pub use models::{AlternativeModel, CovarianceModel, MixingDistribution};
pub use numkit::{SpectralSummary, SymMatrix};
