//! Flat pipeline configuration.
//!
//! One TOML table of typed keys. Unknown keys are rejected, every key but
//! `seed` and the data source has a default, and all stochastic stages draw
//! from `seed`.

use std::path::{Path, PathBuf};

use aeromon_core::anomaly::{ScoreKind, ThresholdPolicy};
use aeromon_core::autoencoder::TrainConfig;
use aeromon_core::baselines::{
    ClassifierConfig, ClassifierKind, ForestParams, KnnParams, LogRegParams, MlpParams, TreeParams,
};
use aeromon_core::dataset::SynthConfig;
use aeromon_core::evaluation::DEFAULT_HISTOGRAM_BINS;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const DEFAULT_OUT_DIR: &str = "aeromon-out";

fn default_baselines() -> Vec<ClassifierKind> {
    ClassifierKind::ALL.to_vec()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    #[serde(default)]
    pub synthetic: bool,
    #[serde(default)]
    pub csv_path: Option<PathBuf>,
    /// Where artifacts go; not part of the config hash.
    #[serde(default, skip_serializing)]
    pub out_dir: Option<PathBuf>,

    #[serde(default = "d::synth_n_samples")]
    pub synth_n_samples: usize,
    #[serde(default = "d::synth_anomaly_fraction")]
    pub synth_anomaly_fraction: f64,
    #[serde(default = "d::synth_oat_min")]
    pub synth_oat_min: f64,
    #[serde(default = "d::synth_oat_max")]
    pub synth_oat_max: f64,
    #[serde(default = "d::synth_demand_min")]
    pub synth_demand_min: f64,
    #[serde(default = "d::synth_demand_max")]
    pub synth_demand_max: f64,
    #[serde(default = "d::synth_noise_scale")]
    pub synth_noise_scale: f64,
    #[serde(default = "d::synth_torque_depression")]
    pub synth_torque_depression: f64,
    #[serde(default = "d::synth_mgt_overtemp")]
    pub synth_mgt_overtemp: f64,
    #[serde(default = "d::synth_distortion_shift")]
    pub synth_distortion_shift: f64,
    #[serde(default = "d::synth_severity_spread")]
    pub synth_severity_spread: f64,

    #[serde(default = "d::test_fraction")]
    pub test_fraction: f64,
    #[serde(default = "d::ae_val_fraction")]
    pub ae_val_fraction: f64,

    #[serde(default = "d::ae_max_epochs")]
    pub ae_max_epochs: usize,
    #[serde(default = "d::ae_batch_size")]
    pub ae_batch_size: usize,
    #[serde(default = "d::ae_learning_rate")]
    pub ae_learning_rate: f64,
    #[serde(default = "d::ae_early_stop_patience")]
    pub ae_early_stop_patience: usize,
    #[serde(default = "d::ae_plateau_patience")]
    pub ae_plateau_patience: usize,
    #[serde(default = "d::ae_plateau_factor")]
    pub ae_plateau_factor: f64,
    #[serde(default = "d::ae_min_lr")]
    pub ae_min_lr: f64,
    #[serde(default = "d::ae_min_delta")]
    pub ae_min_delta: f64,

    #[serde(default = "d::threshold_policy")]
    pub threshold_policy: ScoreKind,
    #[serde(default = "d::threshold_percentile")]
    pub threshold_percentile: f64,

    #[serde(default = "default_baselines")]
    pub baselines: Vec<ClassifierKind>,
    #[serde(default = "d::cv_folds")]
    pub cv_folds: usize,
    #[serde(default = "d::logreg_l2_grid")]
    pub logreg_l2_grid: Vec<f64>,
    #[serde(default = "d::logreg_lr")]
    pub logreg_lr: f64,
    #[serde(default = "d::logreg_epochs")]
    pub logreg_epochs: usize,
    #[serde(default = "d::knn_k_grid")]
    pub knn_k_grid: Vec<usize>,
    #[serde(default = "d::tree_max_depth_grid")]
    pub tree_max_depth_grid: Vec<usize>,
    #[serde(default = "d::tree_min_leaf")]
    pub tree_min_leaf: usize,
    #[serde(default = "d::forest_n_trees")]
    pub forest_n_trees: usize,
    #[serde(default = "d::forest_features_per_split")]
    pub forest_features_per_split: usize,
    #[serde(default = "d::forest_max_depth")]
    pub forest_max_depth: usize,
    #[serde(default = "d::forest_min_leaf")]
    pub forest_min_leaf: usize,
    #[serde(default = "d::mlp_hidden_units")]
    pub mlp_hidden_units: usize,
    #[serde(default = "d::mlp_lr")]
    pub mlp_lr: f64,
    #[serde(default = "d::mlp_epochs")]
    pub mlp_epochs: usize,
    #[serde(default = "d::mlp_batch_size")]
    pub mlp_batch_size: usize,

    #[serde(default = "d::histogram_bins")]
    pub histogram_bins: usize,
}

/// Defaults, taken from the library types where they exist.
mod d {
    use super::*;

    fn synth() -> SynthConfig {
        SynthConfig::default()
    }
    fn ae() -> TrainConfig {
        TrainConfig::default()
    }

    pub fn synth_n_samples() -> usize {
        synth().n_samples
    }
    pub fn synth_anomaly_fraction() -> f64 {
        synth().anomaly_fraction
    }
    pub fn synth_oat_min() -> f64 {
        synth().oat_range.0
    }
    pub fn synth_oat_max() -> f64 {
        synth().oat_range.1
    }
    pub fn synth_demand_min() -> f64 {
        synth().demand_range.0
    }
    pub fn synth_demand_max() -> f64 {
        synth().demand_range.1
    }
    pub fn synth_noise_scale() -> f64 {
        synth().noise_scale
    }
    pub fn synth_torque_depression() -> f64 {
        synth().torque_depression
    }
    pub fn synth_mgt_overtemp() -> f64 {
        synth().mgt_overtemp
    }
    pub fn synth_distortion_shift() -> f64 {
        synth().distortion_shift
    }
    pub fn synth_severity_spread() -> f64 {
        synth().severity_spread
    }
    pub fn test_fraction() -> f64 {
        0.10
    }
    pub fn ae_val_fraction() -> f64 {
        0.10
    }
    pub fn ae_max_epochs() -> usize {
        ae().max_epochs
    }
    pub fn ae_batch_size() -> usize {
        ae().batch_size
    }
    pub fn ae_learning_rate() -> f64 {
        ae().learning_rate
    }
    pub fn ae_early_stop_patience() -> usize {
        ae().early_stop_patience
    }
    pub fn ae_plateau_patience() -> usize {
        ae().plateau_patience
    }
    pub fn ae_plateau_factor() -> f64 {
        ae().plateau_factor
    }
    pub fn ae_min_lr() -> f64 {
        ae().min_lr
    }
    pub fn ae_min_delta() -> f64 {
        ae().min_delta
    }
    pub fn threshold_policy() -> ScoreKind {
        ThresholdPolicy::default().kind
    }
    pub fn threshold_percentile() -> f64 {
        ThresholdPolicy::default().percentile
    }
    pub fn cv_folds() -> usize {
        5
    }
    pub fn logreg_l2_grid() -> Vec<f64> {
        vec![0.0, 0.01, 0.1, 1.0]
    }
    pub fn logreg_lr() -> f64 {
        LogRegParams::default().lr
    }
    pub fn logreg_epochs() -> usize {
        LogRegParams::default().epochs
    }
    pub fn knn_k_grid() -> Vec<usize> {
        vec![1, 3, 5, 7]
    }
    pub fn tree_max_depth_grid() -> Vec<usize> {
        vec![8, 16, 32]
    }
    pub fn tree_min_leaf() -> usize {
        TreeParams::default().min_leaf
    }
    pub fn forest_n_trees() -> usize {
        ForestParams::default().n_trees
    }
    pub fn forest_features_per_split() -> usize {
        ForestParams::default().features_per_split
    }
    pub fn forest_max_depth() -> usize {
        ForestParams::default().max_depth
    }
    pub fn forest_min_leaf() -> usize {
        ForestParams::default().min_leaf
    }
    pub fn mlp_hidden_units() -> usize {
        MlpParams::default().hidden_units
    }
    pub fn mlp_lr() -> f64 {
        MlpParams::default().lr
    }
    pub fn mlp_epochs() -> usize {
        MlpParams::default().epochs
    }
    pub fn mlp_batch_size() -> usize {
        MlpParams::default().batch_size
    }
    pub fn histogram_bins() -> usize {
        DEFAULT_HISTOGRAM_BINS
    }
}

/// Where the labelled data comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Synthetic(SynthConfig),
    Csv(PathBuf),
}

impl PipelineConfig {
    /// A synthetic-data config with every other key at its default.
    pub fn synthetic(seed: u64) -> Self {
        Self::parse(&format!("seed = {seed}\nsynthetic = true\n")).expect("default config is valid")
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })?;
        // relative data paths are relative to the config file
        if let (Some(csv), Some(dir)) = (&cfg.csv_path, path.parent()) {
            if csv.is_relative() {
                cfg.csv_path = Some(dir.join(csv));
            }
        }
        Ok(cfg)
    }

    pub fn with_seed(mut self, seed: Option<u64>) -> Self {
        if let Some(s) = seed {
            self.seed = s;
        }
        self
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Config(msg));
        match (self.synthetic, &self.csv_path) {
            (true, Some(_)) => return bad("set exactly one data source: `synthetic = true` or `csv_path`, not both".into()),
            (false, None) => return bad("no data source: set `synthetic = true` or `csv_path`".into()),
            _ => {}
        }
        let core = |r: aeromon_core::Result<()>| r.map_err(|e| CliError::Config(e.to_string()));
        if self.synthetic {
            core(self.synth_config().validate())?;
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return bad(format!("test_fraction {} outside (0, 1)", self.test_fraction));
        }
        if !(self.ae_val_fraction > 0.0 && self.ae_val_fraction < 1.0) {
            return bad(format!("ae_val_fraction {} outside (0, 1)", self.ae_val_fraction));
        }
        core(self.train_config().validate())?;
        core(ThresholdPolicy::new(self.threshold_policy, self.threshold_percentile).map(|_| ()))?;
        if self.cv_folds < 2 {
            return bad(format!("cv_folds must be at least 2, got {}", self.cv_folds));
        }
        if self.histogram_bins < 2 {
            return bad(format!("histogram_bins must be at least 2, got {}", self.histogram_bins));
        }
        let mut seen = Vec::new();
        for &kind in &self.baselines {
            if seen.contains(&kind) {
                return bad(format!("baseline `{kind}` listed twice"));
            }
            seen.push(kind);
            let candidates = self.candidates(kind);
            if candidates.is_empty() {
                return bad(format!("hyperparameter grid for `{kind}` is empty"));
            }
            for c in &candidates {
                core(c.validate())?;
            }
        }
        Ok(())
    }

    pub fn source(&self) -> DataSource {
        match &self.csv_path {
            Some(p) => DataSource::Csv(p.clone()),
            None => DataSource::Synthetic(self.synth_config()),
        }
    }

    pub fn synth_config(&self) -> SynthConfig {
        SynthConfig {
            n_samples: self.synth_n_samples,
            anomaly_fraction: self.synth_anomaly_fraction,
            seed: self.seed,
            oat_range: (self.synth_oat_min, self.synth_oat_max),
            demand_range: (self.synth_demand_min, self.synth_demand_max),
            noise_scale: self.synth_noise_scale,
            torque_depression: self.synth_torque_depression,
            mgt_overtemp: self.synth_mgt_overtemp,
            distortion_shift: self.synth_distortion_shift,
            severity_spread: self.synth_severity_spread,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            max_epochs: self.ae_max_epochs,
            batch_size: self.ae_batch_size,
            learning_rate: self.ae_learning_rate,
            early_stop_patience: self.ae_early_stop_patience,
            plateau_patience: self.ae_plateau_patience,
            plateau_factor: self.ae_plateau_factor,
            min_lr: self.ae_min_lr,
            min_delta: self.ae_min_delta,
            seed: self.seed,
            shuffle_each_epoch: true,
        }
    }

    pub fn threshold(&self) -> ThresholdPolicy {
        ThresholdPolicy {
            kind: self.threshold_policy,
            percentile: self.threshold_percentile,
        }
    }

    /// Hyperparameter candidates for one baseline, in grid order.
    pub fn candidates(&self, kind: ClassifierKind) -> Vec<ClassifierConfig> {
        match kind {
            ClassifierKind::LogReg => self
                .logreg_l2_grid
                .iter()
                .map(|&l2| {
                    ClassifierConfig::LogReg(LogRegParams {
                        l2,
                        lr: self.logreg_lr,
                        epochs: self.logreg_epochs,
                    })
                })
                .collect(),
            ClassifierKind::GaussianNb => vec![ClassifierConfig::GaussianNb],
            ClassifierKind::Knn => self
                .knn_k_grid
                .iter()
                .map(|&k| ClassifierConfig::Knn(KnnParams { k }))
                .collect(),
            ClassifierKind::DecisionTree => self
                .tree_max_depth_grid
                .iter()
                .map(|&max_depth| {
                    ClassifierConfig::DecisionTree(TreeParams {
                        max_depth,
                        min_leaf: self.tree_min_leaf,
                    })
                })
                .collect(),
            ClassifierKind::RandomForest => vec![ClassifierConfig::RandomForest(ForestParams {
                n_trees: self.forest_n_trees,
                features_per_split: self.forest_features_per_split,
                max_depth: self.forest_max_depth,
                min_leaf: self.forest_min_leaf,
                bootstrap: true,
            })],
            ClassifierKind::Mlp => vec![ClassifierConfig::Mlp(MlpParams {
                hidden_units: self.mlp_hidden_units,
                lr: self.mlp_lr,
                epochs: self.mlp_epochs,
                batch_size: self.mlp_batch_size,
            })],
        }
    }

    /// SHA-256 of the resolved config (defaults filled, output directory
    /// excluded).
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config always serializes");
        format!("{:x}", Sha256::digest(canonical.as_bytes()))
    }
}
