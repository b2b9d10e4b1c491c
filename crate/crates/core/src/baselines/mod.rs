//! Supervised baselines trained on labelled, scaled features.
//!
//! Every classifier reports a probability of the anomalous class and
//! predicts Anomalous only when that probability is strictly above 0.5.

mod cv;
pub mod forest;
pub mod gnb;
pub mod knn;
pub mod logreg;
pub mod mlp;
pub mod tree;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use cv::{cross_validate, select_model, stratified_folds, CvResult, Selection};
pub use forest::{ForestModel, ForestParams};
pub use gnb::GnbModel;
pub use knn::{KnnModel, KnnParams};
pub use logreg::{LogRegModel, LogRegParams};
pub use mlp::MlpParams;
pub use tree::{Tree, TreeParams};

use crate::autoencoder::{Activation, Network};
use crate::dataset::{Dataset, Label, MinMaxScaler};
use crate::error::{Error, Result};

pub const CLASSIFIER_FORMAT_VERSION: u32 = 1;

pub(crate) fn sigmoid(z: f64) -> f64 {
    Activation::Sigmoid.apply(z)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierKind {
    LogReg,
    GaussianNb,
    Knn,
    DecisionTree,
    RandomForest,
    Mlp,
}

impl ClassifierKind {
    pub const ALL: [ClassifierKind; 6] = [
        ClassifierKind::LogReg,
        ClassifierKind::GaussianNb,
        ClassifierKind::Knn,
        ClassifierKind::DecisionTree,
        ClassifierKind::RandomForest,
        ClassifierKind::Mlp,
    ];

    pub fn key(self) -> &'static str {
        match self {
            ClassifierKind::LogReg => "log_reg",
            ClassifierKind::GaussianNb => "gaussian_nb",
            ClassifierKind::Knn => "knn",
            ClassifierKind::DecisionTree => "decision_tree",
            ClassifierKind::RandomForest => "random_forest",
            ClassifierKind::Mlp => "mlp",
        }
    }

    /// Human-readable name used in comparison tables.
    pub fn display_name(self) -> &'static str {
        match self {
            ClassifierKind::LogReg => "Logistic Regression",
            ClassifierKind::GaussianNb => "Gaussian Naive Bayes",
            ClassifierKind::Knn => "k-NN",
            ClassifierKind::DecisionTree => "Decision Tree",
            ClassifierKind::RandomForest => "Random Forest",
            ClassifierKind::Mlp => "MLP",
        }
    }

    pub fn default_config(self) -> ClassifierConfig {
        match self {
            ClassifierKind::LogReg => ClassifierConfig::LogReg(LogRegParams::default()),
            ClassifierKind::GaussianNb => ClassifierConfig::GaussianNb,
            ClassifierKind::Knn => ClassifierConfig::Knn(KnnParams::default()),
            ClassifierKind::DecisionTree => ClassifierConfig::DecisionTree(TreeParams::default()),
            ClassifierKind::RandomForest => ClassifierConfig::RandomForest(ForestParams::default()),
            ClassifierKind::Mlp => ClassifierConfig::Mlp(MlpParams::default()),
        }
    }
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for ClassifierKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "log_reg" | "logreg" | "lr" => Ok(ClassifierKind::LogReg),
            "gaussian_nb" | "gnb" | "naive_bayes" => Ok(ClassifierKind::GaussianNb),
            "knn" => Ok(ClassifierKind::Knn),
            "decision_tree" | "tree" => Ok(ClassifierKind::DecisionTree),
            "random_forest" | "forest" | "rf" => Ok(ClassifierKind::RandomForest),
            "mlp" => Ok(ClassifierKind::Mlp),
            other => Err(format!(
                "unknown classifier `{other}` (expected one of log_reg, gaussian_nb, knn, decision_tree, random_forest, mlp)"
            )),
        }
    }
}

/// A classifier kind with its hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClassifierConfig {
    LogReg(LogRegParams),
    GaussianNb,
    Knn(KnnParams),
    DecisionTree(TreeParams),
    RandomForest(ForestParams),
    Mlp(MlpParams),
}

impl ClassifierConfig {
    pub fn kind(&self) -> ClassifierKind {
        match self {
            ClassifierConfig::LogReg(_) => ClassifierKind::LogReg,
            ClassifierConfig::GaussianNb => ClassifierKind::GaussianNb,
            ClassifierConfig::Knn(_) => ClassifierKind::Knn,
            ClassifierConfig::DecisionTree(_) => ClassifierKind::DecisionTree,
            ClassifierConfig::RandomForest(_) => ClassifierKind::RandomForest,
            ClassifierConfig::Mlp(_) => ClassifierKind::Mlp,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: String| Err(Error::Domain(format!("{} config: {what}", self.kind())));
        match self {
            ClassifierConfig::LogReg(p) => {
                if !(p.l2 >= 0.0) {
                    return bad(format!("l2 must be non-negative, got {}", p.l2));
                }
                if !(p.lr > 0.0) {
                    return bad("lr must be positive".into());
                }
            }
            ClassifierConfig::GaussianNb => {}
            ClassifierConfig::Knn(p) => {
                if p.k == 0 || p.k % 2 == 0 {
                    return bad(format!("k must be odd and at least 1, got {}", p.k));
                }
            }
            ClassifierConfig::DecisionTree(p) => {
                check_tree(p.max_depth, p.min_leaf).or_else(bad)?;
            }
            ClassifierConfig::RandomForest(p) => {
                check_tree(p.max_depth, p.min_leaf).or_else(bad)?;
                if p.n_trees == 0 {
                    return bad("n_trees must be at least 1".into());
                }
                if p.features_per_split == 0 {
                    return bad("features_per_split must be at least 1".into());
                }
            }
            ClassifierConfig::Mlp(p) => {
                if p.hidden_units == 0 || p.batch_size == 0 {
                    return bad("hidden_units and batch_size must be at least 1".into());
                }
                if !(p.lr > 0.0) {
                    return bad("lr must be positive".into());
                }
            }
        }
        Ok(())
    }

    /// Compact one-line description of the hyperparameters.
    pub fn describe(&self) -> String {
        serde_json::to_string(self).expect("configs always serialize")
    }
}

fn check_tree(max_depth: usize, min_leaf: usize) -> Result<(), String> {
    if max_depth == 0 || max_depth > tree::MAX_TREE_DEPTH {
        return Err(format!("max_depth must lie in 1..={}", tree::MAX_TREE_DEPTH));
    }
    if min_leaf == 0 {
        return Err("min_leaf must be at least 1".into());
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum Fitted {
    LogReg(LogRegModel),
    GaussianNb(GnbModel),
    Knn(KnnModel),
    DecisionTree(Tree),
    RandomForest(ForestModel),
    Mlp(Network),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub label: Label,
    pub prob_anomalous: f64,
}

/// A fitted classifier plus the scaler its inputs must pass through.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierModel {
    pub config: ClassifierConfig,
    pub dim: usize,
    pub scaler: Option<MinMaxScaler>,
    pub fitted: Fitted,
}

#[derive(Serialize, Deserialize)]
struct ClassifierFile {
    format_version: u32,
    #[serde(flatten)]
    model: ClassifierModel,
}

impl ClassifierModel {
    pub fn kind(&self) -> ClassifierKind {
        self.config.kind()
    }

    pub fn with_scaler(mut self, scaler: MinMaxScaler) -> Self {
        self.scaler = Some(scaler);
        self
    }

    /// Prediction for an already-scaled sample.
    pub fn predict(&self, x: &[f64]) -> Result<Prediction> {
        if x.len() != self.dim {
            return Err(Error::Shape(format!(
                "classifier expects {} features, got {}",
                self.dim,
                x.len()
            )));
        }
        let prob = match &self.fitted {
            Fitted::LogReg(m) => m.prob(x),
            Fitted::GaussianNb(m) => m.prob(x),
            Fitted::Knn(m) => m.prob(x),
            Fitted::DecisionTree(m) => m.prob(x),
            Fitted::RandomForest(m) => m.prob(x),
            Fitted::Mlp(net) => net.predict(x)?[0],
        };
        Ok(Prediction {
            label: Label::from_anomalous(prob > 0.5),
            prob_anomalous: prob,
        })
    }

    /// Prediction for a raw sample, scaled with the stored scaler if any.
    pub fn predict_raw(&self, x: &[f64]) -> Result<Prediction> {
        match &self.scaler {
            Some(s) => self.predict(&s.transform(x)?),
            None => self.predict(x),
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = ClassifierFile {
            format_version: CLASSIFIER_FORMAT_VERSION,
            model: self.clone(),
        };
        std::fs::write(path, serde_json::to_string(&file)?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let probe: serde_json::Value = serde_json::from_str(&text)?;
        let found = probe.get("format_version").and_then(|v| v.as_u64()).unwrap_or(0) as u32;
        if found != CLASSIFIER_FORMAT_VERSION {
            return Err(Error::FormatVersion {
                found,
                expected: CLASSIFIER_FORMAT_VERSION,
            });
        }
        Ok(serde_json::from_value::<ClassifierFile>(probe)?.model)
    }
}

/// Fits on rows of any width. Both classes must be present.
pub fn train_rows<R: AsRef<[f64]> + Sync>(
    cfg: &ClassifierConfig,
    rows: &[R],
    labels: &[Label],
    seed: u64,
) -> Result<ClassifierModel> {
    cfg.validate()?;
    if rows.len() != labels.len() {
        return Err(Error::Shape(format!("{} rows for {} labels", rows.len(), labels.len())));
    }
    let dim = rows.first().map_or(0, |r| r.as_ref().len());
    if dim == 0 || rows.iter().any(|r| r.as_ref().len() != dim) {
        return Err(Error::Shape("training rows must share a non-zero width".into()));
    }
    let y: Vec<bool> = labels.iter().map(|l| l.is_anomalous()).collect();
    let n_pos = y.iter().filter(|&&t| t).count();
    if n_pos == 0 || n_pos == y.len() {
        return Err(Error::DegenerateLabels(format!(
            "{} training set has only one class ({} samples)",
            cfg.kind(),
            y.len()
        )));
    }
    let fitted = match cfg {
        ClassifierConfig::LogReg(p) => Fitted::LogReg(logreg::fit(p, rows, &y)),
        ClassifierConfig::GaussianNb => Fitted::GaussianNb(gnb::fit(rows, &y)),
        ClassifierConfig::Knn(p) => Fitted::Knn(KnnModel::fit(p, rows, &y)),
        ClassifierConfig::DecisionTree(p) => Fitted::DecisionTree(Tree::fit(p, rows, &y)),
        ClassifierConfig::RandomForest(p) => Fitted::RandomForest(ForestModel::fit(p, rows, &y, seed)),
        ClassifierConfig::Mlp(p) => Fitted::Mlp(mlp::fit(p, rows, &y, seed)?),
    };
    Ok(ClassifierModel {
        config: cfg.clone(),
        dim,
        scaler: None,
        fitted,
    })
}

/// Fits on a labelled, scaled dataset.
pub fn train_classifier(cfg: &ClassifierConfig, train: &Dataset, seed: u64) -> Result<ClassifierModel> {
    let labels = train.labels()?;
    train_rows(cfg, &train.feature_rows(), &labels, seed)
}
