//! Deterministic numerics shared by every other module.

mod linalg;
mod rng;
mod stats;

pub use linalg::{cholesky, covariance, solve_spd, CholeskyFactor, Matrix, SYMMETRY_TOL};
pub use rng::{derive_seed, Rng};
pub use stats::{mean, percentile, percentile_nearest_rank, variance};
