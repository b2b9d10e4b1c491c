//! Labelled telemetry: ingestion, min-max scaling, stratified splitting and
//! a seeded synthetic generator.

mod io;
mod scaler;
mod split;
mod synth;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use io::{load_csv, load_labels_csv, write_csv, write_labels_csv};
pub use scaler::MinMaxScaler;
pub use split::{split, SplitIndices, SplitResult};
pub use synth::{design_torque, generate_annotated, generate_synthetic, FaultKind, SynthConfig};

/// Number of sensor channels per snapshot.
pub const N_CHANNELS: usize = 7;

/// Canonical channel order, also the CSV header.
pub const CHANNEL_NAMES: [&str; N_CHANNELS] = ["oat", "mgt", "pa", "ias", "np", "cs", "ot"];

/// Index of the output-torque channel.
pub const OT: usize = 6;
/// Index of the mean-gas-temperature channel.
pub const MGT: usize = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Normal,
    Anomalous,
}

impl Label {
    pub fn is_anomalous(self) -> bool {
        self == Label::Anomalous
    }

    pub fn from_anomalous(flag: bool) -> Self {
        if flag {
            Label::Anomalous
        } else {
            Label::Normal
        }
    }

    /// Integer encoding used in CSV files.
    pub fn as_int(self) -> u8 {
        u8::from(self.is_anomalous())
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Normal => "normal",
            Label::Anomalous => "anomalous",
        })
    }
}

impl FromStr for Label {
    type Err = String;

    /// Accepts `normal`/`anomalous` (any case) and `0`/`1`.
    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "normal" | "0" => Ok(Label::Normal),
            "anomalous" | "1" => Ok(Label::Anomalous),
            other => Err(format!("unrecognised label `{other}`")),
        }
    }
}

/// One sensor snapshot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TelemetrySample {
    pub features: [f64; N_CHANNELS],
    pub label: Option<Label>,
}

impl TelemetrySample {
    pub fn new(features: [f64; N_CHANNELS], label: Option<Label>) -> Self {
        Self { features, label }
    }
}

/// Ordered collection of samples.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    samples: Vec<TelemetrySample>,
}

impl Dataset {
    pub fn new(samples: Vec<TelemetrySample>) -> Self {
        Self { samples }
    }

    pub fn samples(&self) -> &[TelemetrySample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn channel_names(&self) -> [&'static str; N_CHANNELS] {
        CHANNEL_NAMES
    }

    pub fn iter(&self) -> impl Iterator<Item = &TelemetrySample> {
        self.samples.iter()
    }

    /// Feature rows as owned vectors, the layout the models consume.
    pub fn feature_rows(&self) -> Vec<Vec<f64>> {
        self.samples.iter().map(|s| s.features.to_vec()).collect()
    }

    pub fn is_labeled(&self) -> bool {
        !self.samples.is_empty() && self.samples.iter().all(|s| s.label.is_some())
    }

    /// All labels, failing if any sample is unlabelled.
    pub fn labels(&self) -> Result<Vec<Label>> {
        self.samples
            .iter()
            .map(|s| s.label.ok_or(Error::MissingLabels))
            .collect()
    }

    /// `(normal, anomalous)` counts among labelled samples.
    pub fn class_counts(&self) -> (usize, usize) {
        self.samples.iter().fold((0, 0), |(n, a), s| match s.label {
            Some(Label::Normal) => (n + 1, a),
            Some(Label::Anomalous) => (n, a + 1),
            None => (n, a),
        })
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset::new(indices.iter().map(|&i| self.samples[i]).collect())
    }

    /// Copy with every label removed.
    pub fn without_labels(&self) -> Dataset {
        Dataset::new(
            self.samples
                .iter()
                .map(|s| TelemetrySample::new(s.features, None))
                .collect(),
        )
    }

    pub fn with_label(&self, label: Label) -> Dataset {
        Dataset::new(
            self.samples
                .iter()
                .filter(|s| s.label == Some(label))
                .copied()
                .collect(),
        )
    }
}

impl FromIterator<TelemetrySample> for Dataset {
    fn from_iter<I: IntoIterator<Item = TelemetrySample>>(iter: I) -> Self {
        Dataset::new(iter.into_iter().collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn label_parsing() {
        assert_eq!("Normal".parse::<Label>().unwrap(), Label::Normal);
        assert_eq!("ANOMALOUS".parse::<Label>().unwrap(), Label::Anomalous);
        assert_eq!("0".parse::<Label>().unwrap(), Label::Normal);
        assert_eq!(" 1 ".parse::<Label>().unwrap(), Label::Anomalous);
        assert!("2".parse::<Label>().is_err());
    }

    #[test]
    fn class_counts_and_filters() {
        let ds: Dataset = [Label::Normal, Label::Anomalous, Label::Normal]
            .iter()
            .map(|&l| TelemetrySample::new([0.0; N_CHANNELS], Some(l)))
            .collect();
        assert_eq!(ds.class_counts(), (2, 1));
        assert_eq!(ds.with_label(Label::Normal).len(), 2);
        assert!(matches!(
            ds.without_labels().labels(),
            Err(Error::MissingLabels)
        ));
    }
}
