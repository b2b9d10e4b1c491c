//! Seeded stand-in for engine telemetry.
//!
//! Healthy snapshots come from two latent drivers: ambient temperature
//! `t ~ U(oat_range)` and power demand `d ~ U(demand_range)`. With
//! `ε ~ N(0, 1)` drawn independently per channel and `σ = noise_scale`:
//!
//! ```text
//! oat = t
//! mgt = 480 + 260·d + 2·t          + 6σ·ε
//! pa  = 1150 − 3.5·t + 120·d       + 12σ·ε
//! ias = 40 + 90·d                  + 4σ·ε
//! np  = 950·d                      + 12σ·ε
//! cs  = 88 + 14·d                  + 0.4σ·ε
//! ot  = design_torque(d)           + 1.2σ·ε,   design_torque(d) = 12 + 85·d
//! ```
//!
//! Anomalous snapshots start from a healthy draw and receive one of three
//! faults, chosen uniformly, with severity multiplier
//! `s ~ U(1 − severity_spread, 1 + severity_spread)`:
//!
//! * torque-margin depression: `ot −= s·torque_depression`
//! * over-temperature drift: `mgt += s·mgt_overtemp`
//! * covariance distortion: `np` and `cs` are regenerated from a demand
//!   shifted by `±s·distortion_shift`, decoupling them from `ias`/`ot`.

use serde::{Deserialize, Serialize};

use super::{Dataset, Label, TelemetrySample, N_CHANNELS};
use crate::error::{Error, Result};
use crate::numerics::Rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_samples: usize,
    pub anomaly_fraction: f64,
    pub seed: u64,
    pub oat_range: (f64, f64),
    pub demand_range: (f64, f64),
    pub noise_scale: f64,
    pub torque_depression: f64,
    pub mgt_overtemp: f64,
    pub distortion_shift: f64,
    pub severity_spread: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_samples: 20_000,
            anomaly_fraction: 0.40,
            seed: 7,
            oat_range: (-15.0, 40.0),
            demand_range: (0.25, 1.0),
            noise_scale: 1.0,
            torque_depression: 12.0,
            mgt_overtemp: 45.0,
            distortion_shift: 0.3,
            severity_spread: 0.25,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_samples < 100 {
            return Err(Error::Domain(format!(
                "synthetic data needs at least 100 samples, got {}",
                self.n_samples
            )));
        }
        if !(self.anomaly_fraction > 0.0 && self.anomaly_fraction < 1.0) {
            return Err(Error::Domain(format!(
                "anomaly fraction {} outside (0, 1)",
                self.anomaly_fraction
            )));
        }
        let (lo, hi) = self.demand_range;
        if !(lo >= 0.0 && lo < hi && hi <= 1.5) {
            return Err(Error::Domain(format!("demand range ({lo}, {hi}) is invalid")));
        }
        if !(self.oat_range.0 < self.oat_range.1) {
            return Err(Error::Domain("ambient temperature range is empty".into()));
        }
        if !(0.0..1.0).contains(&self.severity_spread) {
            return Err(Error::Domain(format!(
                "severity spread {} outside [0, 1)",
                self.severity_spread
            )));
        }
        let params = [
            self.noise_scale,
            self.torque_depression,
            self.mgt_overtemp,
            self.distortion_shift,
        ];
        if params.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::Domain("noise and fault magnitudes must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FaultKind {
    TorqueDepression,
    OverTemperature,
    CovarianceDistortion,
}

pub fn design_torque(demand: f64) -> f64 {
    12.0 + 85.0 * demand
}

fn mgt(d: f64, t: f64) -> f64 {
    480.0 + 260.0 * d + 2.0 * t
}

fn np(d: f64) -> f64 {
    950.0 * d
}

fn cs(d: f64) -> f64 {
    88.0 + 14.0 * d
}

fn healthy(cfg: &SynthConfig, rng: &mut Rng) -> ([f64; N_CHANNELS], f64) {
    let sigma = cfg.noise_scale;
    let t = rng.uniform_in(cfg.oat_range.0, cfg.oat_range.1);
    let d = rng.uniform_in(cfg.demand_range.0, cfg.demand_range.1);
    let features = [
        t,
        mgt(d, t) + 6.0 * sigma * rng.normal(),
        1150.0 - 3.5 * t + 120.0 * d + 12.0 * sigma * rng.normal(),
        40.0 + 90.0 * d + 4.0 * sigma * rng.normal(),
        np(d) + 12.0 * sigma * rng.normal(),
        cs(d) + 0.4 * sigma * rng.normal(),
        design_torque(d) + 1.2 * sigma * rng.normal(),
    ];
    (features, d)
}

fn inject(
    cfg: &SynthConfig,
    features: &mut [f64; N_CHANNELS],
    demand: f64,
    rng: &mut Rng,
) -> FaultKind {
    let kind = match rng.below(3) {
        0 => FaultKind::TorqueDepression,
        1 => FaultKind::OverTemperature,
        _ => FaultKind::CovarianceDistortion,
    };
    let severity = rng.uniform_in(1.0 - cfg.severity_spread, 1.0 + cfg.severity_spread);
    match kind {
        FaultKind::TorqueDepression => features[6] -= severity * cfg.torque_depression,
        FaultKind::OverTemperature => features[1] += severity * cfg.mgt_overtemp,
        FaultKind::CovarianceDistortion => {
            let (lo, hi) = cfg.demand_range;
            let shift = severity * cfg.distortion_shift;
            // shift towards whichever side has room
            let shifted = if demand + shift <= hi || demand - shift < lo {
                demand + shift
            } else {
                demand - shift
            };
            let sigma = cfg.noise_scale;
            features[4] = np(shifted) + 12.0 * sigma * rng.normal();
            features[5] = cs(shifted) + 0.4 * sigma * rng.normal();
        }
    }
    kind
}

/// Generates a labelled dataset together with the fault applied to each
/// anomalous sample.
pub fn generate_annotated(cfg: &SynthConfig) -> Result<(Dataset, Vec<Option<FaultKind>>)> {
    cfg.validate()?;
    let n = cfg.n_samples;
    let n_anomalous = (cfg.anomaly_fraction * n as f64).round() as usize;
    let mut flags: Vec<bool> = (0..n).map(|i| i < n_anomalous).collect();
    Rng::derived(cfg.seed, 0).shuffle(&mut flags);

    let mut rng = Rng::derived(cfg.seed, 1);
    let mut samples = Vec::with_capacity(n);
    let mut faults = Vec::with_capacity(n);
    for &anomalous in &flags {
        let (mut features, demand) = healthy(cfg, &mut rng);
        let fault = anomalous.then(|| inject(cfg, &mut features, demand, &mut rng));
        samples.push(TelemetrySample::new(features, Some(Label::from_anomalous(anomalous))));
        faults.push(fault);
    }
    Ok((Dataset::new(samples), faults))
}

pub fn generate_synthetic(cfg: &SynthConfig) -> Result<Dataset> {
    generate_annotated(cfg).map(|(data, _)| data)
}
