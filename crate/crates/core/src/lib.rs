//! Pollutant-level and air-quality-index forecasting with ε-support-vector
//! regression.
//!
//! The crate covers the full batch workflow over CSV time series:
//!
//! * [`kernels`] — RBF and polynomial kernels plus Gram-matrix construction.
//! * [`svr`] — the ε-SVR dual solver and prediction.
//! * [`preprocess`] — a fitted, replayable cleaning and feature pipeline
//!   (imputation, sparse-column drop, date exclusion, Yeo-Johnson power
//!   transform, standardization, calendar features, correlation-based
//!   selection, optional PCA).
//! * [`tuning`] — expanding-window time-series splits and random grid search
//!   over `(C, ε)`.
//! * [`metrics`] / [`aqi`] — error metrics, AQI sub-indices, categories, and
//!   confusion matrices.
//! * [`ingest`] / [`artifact`] — CSV schemas and versioned model persistence.

pub mod aqi;
pub mod artifact;
pub mod error;
pub mod frame;
pub mod ingest;
pub mod kernels;
pub mod matrix;
pub mod metrics;
pub mod preprocess;
pub mod svr;
pub mod tuning;

pub use error::{Error, Result};
pub use frame::{Cadence, Column, TimeSeriesFrame};
pub use kernels::{gram_matrix, kernel_eval, KernelSpec};
pub use matrix::FeatureMatrix;
pub use svr::{
    compute_bias, predict, predict_rows, solve_dual, HyperParams, SolverConfig, SvrModel,
    TrainingSet,
};
