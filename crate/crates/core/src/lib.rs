//! Anomaly detection for engine telemetry.
//!
//! An autoencoder is trained on healthy samples only; its reconstruction
//! residuals are turned into anomaly scores (plain MSE or Mahalanobis
//! distance) and thresholded at a percentile of the healthy-score
//! distribution. A family of supervised classifiers serves as the
//! labelled-data baseline, and [`evaluation`] compares both on a shared
//! held-out test set.

pub mod anomaly;
pub mod autoencoder;
pub mod baselines;
pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod numerics;

pub use error::{Error, Result};
