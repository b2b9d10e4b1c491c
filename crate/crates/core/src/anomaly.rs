//! Reconstruction-residual anomaly scoring.
//!
//! A trained autoencoder maps a scaled sample `x` to `x̂`; the residual
//! `r = x̂ − x` is scored either by its mean square or by its Mahalanobis
//! distance `√((r−μ)ᵀ Σ⁻¹ (r−μ))` from the healthy-residual distribution.
//! The decision threshold is an upper percentile of the scores of the
//! healthy training set, and a sample is anomalous only when its score is
//! strictly above it.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::autoencoder::{mse_loss, Network};
use crate::dataset::{Dataset, Label, MinMaxScaler, N_CHANNELS};
use crate::error::{Error, Result};
use crate::numerics::{cholesky, covariance, percentile_nearest_rank, solve_spd, CholeskyFactor, Matrix};

pub const DEFAULT_PERCENTILE: f64 = 85.0;
pub const SCORER_FORMAT_VERSION: u32 = 1;

/// Mean and factored covariance of healthy reconstruction residuals.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualStats {
    mean: Vec<f64>,
    cov: Matrix,
    chol: CholeskyFactor,
    n_fit: usize,
}

impl ResidualStats {
    /// Fits from residual vectors. Needs more rows than dimensions.
    pub fn from_residuals(residuals: &[Vec<f64>]) -> Result<Self> {
        let d = residuals.first().map_or(0, Vec::len);
        if residuals.len() <= d {
            return Err(Error::InsufficientData(format!(
                "{} residuals cannot support a {d}-dimensional covariance",
                residuals.len()
            )));
        }
        let (mean, cov) = covariance(residuals)?;
        Self::from_parts(mean, cov, residuals.len())
    }

    /// Rebuilds stats from a stored mean and covariance.
    pub fn from_parts(mean: Vec<f64>, cov: Matrix, n_fit: usize) -> Result<Self> {
        if cov.rows() != mean.len() || !cov.is_square() {
            return Err(Error::Shape("residual mean and covariance disagree".into()));
        }
        // variance at round-off level of the mean is a constant channel
        if let Some(i) = (0..mean.len())
            .find(|&i| cov[(i, i)] <= (64.0 * f64::EPSILON * mean[i].abs()).powi(2))
        {
            return Err(Error::DegenerateResiduals(format!(
                "residual channel {i} has zero variance"
            )));
        }
        let chol = cholesky(&cov, 0.0).map_err(|e| match e {
            Error::NotPositiveDefinite { cap } => Error::DegenerateResiduals(format!(
                "residual covariance is not positive definite even with jitter up to {cap:e}"
            )),
            other => other,
        })?;
        Ok(Self {
            mean,
            cov,
            chol,
            n_fit,
        })
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn covariance(&self) -> &Matrix {
        &self.cov
    }

    pub fn factor(&self) -> &CholeskyFactor {
        &self.chol
    }

    pub fn n_fit(&self) -> usize {
        self.n_fit
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreKind {
    /// Per-sample reconstruction MSE.
    Mse,
    /// Mahalanobis distance of the residual vector.
    Mahalanobis,
}

impl fmt::Display for ScoreKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScoreKind::Mse => "mse",
            ScoreKind::Mahalanobis => "mahalanobis",
        })
    }
}

impl FromStr for ScoreKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "mse" => Ok(ScoreKind::Mse),
            "mahalanobis" => Ok(ScoreKind::Mahalanobis),
            other => Err(format!("unknown score kind `{other}` (expected mse or mahalanobis)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdPolicy {
    pub kind: ScoreKind,
    pub percentile: f64,
}

impl ThresholdPolicy {
    pub fn new(kind: ScoreKind, percentile: f64) -> Result<Self> {
        let policy = Self { kind, percentile };
        policy.validate()?;
        Ok(policy)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.percentile > 0.0 && self.percentile <= 100.0) {
            return Err(Error::Domain(format!(
                "calibration percentile {} outside (0, 100]",
                self.percentile
            )));
        }
        Ok(())
    }
}

impl Default for ThresholdPolicy {
    fn default() -> Self {
        Self {
            kind: ScoreKind::Mahalanobis,
            percentile: DEFAULT_PERCENTILE,
        }
    }
}

/// `x̂ − x` for a scaled sample.
pub fn residual(net: &Network, x_scaled: &[f64]) -> Result<Vec<f64>> {
    let x_hat = net.predict(x_scaled)?;
    if x_hat.len() != x_scaled.len() {
        return Err(Error::Shape("network output width differs from its input".into()));
    }
    Ok(x_hat.iter().zip(x_scaled).map(|(a, b)| a - b).collect())
}

pub fn score_mse(net: &Network, x_scaled: &[f64]) -> Result<f64> {
    mse_loss(x_scaled, &net.predict(x_scaled)?)
}

/// Residual statistics over a scaled, healthy dataset.
pub fn fit_residual_stats(net: &Network, ae_train: &Dataset) -> Result<ResidualStats> {
    let residuals = ae_train
        .iter()
        .map(|s| residual(net, &s.features))
        .collect::<Result<Vec<_>>>()?;
    ResidualStats::from_residuals(&residuals)
}

/// `√((r−μ)ᵀ Σ⁻¹ (r−μ))`, with `Σ⁻¹` applied through the Cholesky factor.
pub fn score_mahalanobis(stats: &ResidualStats, r: &[f64]) -> Result<f64> {
    if r.len() != stats.dim() {
        return Err(Error::Shape(format!(
            "residual of length {} for {}-dimensional stats",
            r.len(),
            stats.dim()
        )));
    }
    let centered: Vec<f64> = r.iter().zip(&stats.mean).map(|(a, m)| a - m).collect();
    let solved = solve_spd(&stats.chol, &centered)?;
    let q: f64 = centered.iter().zip(&solved).map(|(a, b)| a * b).sum();
    Ok(q.max(0.0).sqrt())
}

/// Label and score for one sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decision {
    pub label: Label,
    pub score: f64,
}

/// Calibrated detector: scaling, scoring and thresholding in one value.
#[derive(Debug, Clone, PartialEq)]
pub struct AnomalyScorer {
    net: Network,
    scaler: MinMaxScaler,
    policy: ThresholdPolicy,
    stats: Option<ResidualStats>,
    threshold: f64,
}

impl AnomalyScorer {
    pub fn network(&self) -> &Network {
        &self.net
    }

    pub fn scaler(&self) -> &MinMaxScaler {
        &self.scaler
    }

    pub fn policy(&self) -> ThresholdPolicy {
        self.policy
    }

    pub fn stats(&self) -> Option<&ResidualStats> {
        self.stats.as_ref()
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    fn score_scaled(&self, x_scaled: &[f64]) -> Result<f64> {
        match (self.policy.kind, &self.stats) {
            (ScoreKind::Mse, _) => score_mse(&self.net, x_scaled),
            (ScoreKind::Mahalanobis, Some(stats)) => {
                score_mahalanobis(stats, &residual(&self.net, x_scaled)?)
            }
            (ScoreKind::Mahalanobis, None) => Err(Error::DegenerateResiduals(
                "Mahalanobis scorer has no residual statistics".into(),
            )),
        }
    }

    /// Anomaly score of a raw (unscaled) sample.
    pub fn score(&self, x_raw: &[f64]) -> Result<f64> {
        self.score_scaled(&self.scaler.transform(x_raw)?)
    }

    /// Anomalous iff the score is strictly above the threshold.
    pub fn classify(&self, x_raw: &[f64]) -> Result<Decision> {
        let score = self.score(x_raw)?;
        Ok(Decision {
            label: Label::from_anomalous(score > self.threshold),
            score,
        })
    }

    /// Writes the scorer as JSON that refers to the network by file name.
    /// The network itself is written next to it by the caller.
    pub fn save(&self, path: impl AsRef<Path>, model_file: &str) -> Result<()> {
        let path = path.as_ref();
        let file = ScorerFile {
            format_version: SCORER_FORMAT_VERSION,
            policy: self.policy.kind,
            percentile: self.policy.percentile,
            threshold: self.threshold,
            model_file: model_file.to_string(),
            scaler: self.scaler.clone(),
            residual_mean: self.stats.as_ref().map(|s| s.mean.clone()),
            residual_covariance: self.stats.as_ref().map(|s| s.cov.as_slice().to_vec()),
            n_fit: self.stats.as_ref().map(|s| s.n_fit),
        };
        let json = serde_json::to_string_pretty(&file)?;
        std::fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    /// Loads a scorer and the network it names (resolved relative to the
    /// scorer file).
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: ScorerFile = serde_json::from_str(&text)?;
        if file.format_version != SCORER_FORMAT_VERSION {
            return Err(Error::FormatVersion {
                found: file.format_version,
                expected: SCORER_FORMAT_VERSION,
            });
        }
        let model_path: PathBuf = path
            .parent()
            .map_or_else(|| PathBuf::from(&file.model_file), |dir| dir.join(&file.model_file));
        let net = Network::load(model_path)?;
        let stats = match (file.policy, file.residual_mean, file.residual_covariance) {
            (ScoreKind::Mahalanobis, Some(mean), Some(cov)) => {
                let d = mean.len();
                let cov = Matrix::from_row_major(d, d, cov)?;
                Some(ResidualStats::from_parts(mean, cov, file.n_fit.unwrap_or(0))?)
            }
            (ScoreKind::Mahalanobis, _, _) => {
                return Err(Error::Schema {
                    column: "residual_covariance".into(),
                    reason: "Mahalanobis scorer file lacks residual statistics".into(),
                })
            }
            (ScoreKind::Mse, _, _) => None,
        };
        Ok(Self {
            net,
            scaler: file.scaler,
            policy: ThresholdPolicy::new(file.policy, file.percentile)?,
            stats,
            threshold: file.threshold,
        })
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScorerFile {
    format_version: u32,
    policy: ScoreKind,
    percentile: f64,
    threshold: f64,
    model_file: String,
    scaler: MinMaxScaler,
    residual_mean: Option<Vec<f64>>,
    residual_covariance: Option<Vec<f64>>,
    n_fit: Option<usize>,
}

/// Calibrates a scorer on raw (unscaled) healthy training samples.
///
/// Every sample is scaled and scored exactly as [`AnomalyScorer::classify`]
/// would, and the threshold is the nearest-rank percentile of those scores,
/// so at most `⌊(100−p)/100·n⌋` calibration samples end up flagged.
pub fn calibrate(
    net: &Network,
    scaler: &MinMaxScaler,
    ae_train_raw: &Dataset,
    policy: ThresholdPolicy,
) -> Result<AnomalyScorer> {
    policy.validate()?;
    if net.input_dim() != N_CHANNELS || net.output_dim() != N_CHANNELS {
        return Err(Error::Shape(format!(
            "scorer needs a {N_CHANNELS}-in, {N_CHANNELS}-out network"
        )));
    }
    if ae_train_raw.is_empty() {
        return Err(Error::InsufficientData("no calibration samples".into()));
    }
    let scaled = scaler.apply(ae_train_raw)?;
    let stats = match policy.kind {
        ScoreKind::Mahalanobis => Some(fit_residual_stats(net, &scaled)?),
        ScoreKind::Mse => None,
    };
    let mut scorer = AnomalyScorer {
        net: net.clone(),
        scaler: scaler.clone(),
        policy,
        stats,
        threshold: f64::INFINITY,
    };
    let scores = scaled
        .iter()
        .map(|s| scorer.score_scaled(&s.features))
        .collect::<Result<Vec<_>>>()?;
    scorer.threshold = percentile_nearest_rank(&scores, policy.percentile)?;
    Ok(scorer)
}
