use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Dataset, TelemetrySample, N_CHANNELS};
use crate::error::{Error, Result};

/// Per-channel affine map onto `[0, 1]` over the fit set.
///
/// A channel whose range is zero maps to a constant 0. Values outside the
/// fit range are not clamped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinMaxScaler {
    pub mins: Vec<f64>,
    pub ranges: Vec<f64>,
}

impl MinMaxScaler {
    pub fn fit(train: &Dataset) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::InsufficientData("cannot fit a scaler on no data".into()));
        }
        let mut mins = [f64::INFINITY; N_CHANNELS];
        let mut maxs = [f64::NEG_INFINITY; N_CHANNELS];
        for s in train.samples() {
            for j in 0..N_CHANNELS {
                mins[j] = mins[j].min(s.features[j]);
                maxs[j] = maxs[j].max(s.features[j]);
            }
        }
        Ok(Self {
            mins: mins.to_vec(),
            ranges: (0..N_CHANNELS).map(|j| maxs[j] - mins[j]).collect(),
        })
    }

    /// Channels that were constant on the fit set.
    pub fn degenerate_channels(&self) -> Vec<usize> {
        (0..self.ranges.len()).filter(|&j| self.ranges[j] == 0.0).collect()
    }

    pub fn transform(&self, x: &[f64]) -> Result<[f64; N_CHANNELS]> {
        if x.len() != N_CHANNELS || self.mins.len() != N_CHANNELS || self.ranges.len() != N_CHANNELS {
            return Err(Error::Shape(format!(
                "scaler expects {N_CHANNELS} channels, got {}",
                x.len()
            )));
        }
        let mut out = [0.0; N_CHANNELS];
        for j in 0..N_CHANNELS {
            out[j] = if self.ranges[j] == 0.0 {
                0.0
            } else {
                (x[j] - self.mins[j]) / self.ranges[j]
            };
        }
        Ok(out)
    }

    pub fn apply(&self, data: &Dataset) -> Result<Dataset> {
        data.samples()
            .iter()
            .map(|s| Ok(TelemetrySample::new(self.transform(&s.features)?, s.label)))
            .collect::<Result<Vec<_>>>()
            .map(Dataset::new)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let json = serde_json::to_string(self)?;
        std::fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let scaler: Self = serde_json::from_str(&text)?;
        if scaler.mins.len() != N_CHANNELS || scaler.ranges.len() != N_CHANNELS {
            return Err(Error::Shape(format!(
                "scaler file must hold {N_CHANNELS} mins and ranges"
            )));
        }
        Ok(scaler)
    }
}
