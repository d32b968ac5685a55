//! Spectral anomaly detection for network flow traces.
//!
//! The core idea: lag-embed a multivariate flow-feature series into a block
//! Hankel (trajectory) matrix, eigendecompose its lag covariance, and flag
//! windows that leave the leading subspace. Capturing lagged copies of every
//! feature makes the detector sensitive to breaks in correlation both within
//! one flow over time and across flows in a localized window, which is what
//! separates volume spikes (DoS-like) from distributed low-volume events
//! (scan-like).
//!
//! Around that core the crate provides:
//!
//! - [`timeseries`]: flow-record ingestion, time binning, normalization;
//! - [`hankel`]: trajectory embedding and diagonal averaging;
//! - [`mssa`]: the subspace detector, component reconstruction, grouping,
//!   and the Q-statistic threshold;
//! - [`lds`]: the generative-model view with subspace identification and a
//!   residual detector;
//! - [`baselines`]: Fourier, wavelet, Kalman-innovation, and flow-equilibrium
//!   comparison detectors;
//! - [`simulator`]: labeled anomaly injection for evaluation;
//! - [`eval`]: alarm/ground-truth matching, ROC curves, AUC, per-type counts.
//!
//! All numeric code is generic over [`Scalar`] (`f32` or `f64`); the `*64`
//! aliases below fix the default double-precision instantiations.

pub mod baselines;
pub mod detection;
pub mod eig;
mod error;
pub mod eval;
pub mod hankel;
pub mod lds;
pub mod matrix;
pub mod mssa;
pub mod scalar;
pub mod simulator;
pub mod stats;
pub mod timeseries;
pub mod wavelet;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Double-precision aliases for the main public types.
pub type FlowSeries64 = timeseries::FlowSeries<f64>;
pub type TrajectoryMatrix64 = hankel::TrajectoryMatrix<f64>;
pub type SpectralDecomposition64 = mssa::SpectralDecomposition<f64>;
pub type DetectorConfig64 = mssa::DetectorConfig<f64>;
pub type DetectionResult64 = detection::DetectionResult<f64>;
pub type InjectedTrace64 = simulator::InjectedTrace<f64>;

/// Single-precision aliases.
pub type FlowSeries32 = timeseries::FlowSeries<f32>;
pub type DetectionResult32 = detection::DetectionResult<f32>;
