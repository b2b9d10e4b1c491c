//! Pipeline stages. Each reads its inputs from and writes its outputs to
//! the output directory, so any stage can be rerun on its own.

use std::path::{Path, PathBuf};

use aeromon_core::anomaly::{calibrate as calibrate_scorer, AnomalyScorer};
use aeromon_core::autoencoder::{default_topology, init_network, train, Network, TrainReport};
use aeromon_core::baselines::{select_model, train_classifier, ClassifierConfig, ClassifierKind, ClassifierModel};
use aeromon_core::dataset::{
    generate_synthetic, load_csv, load_labels_csv, split as split_dataset, write_csv, write_labels_csv, Dataset, Label,
    MinMaxScaler, SplitIndices,
};
use aeromon_core::evaluation::{
    feature_histograms, report_from_decisions, write_comparison_csv, write_histograms_csv, EvalReport,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{DataSource, PipelineConfig};
use crate::error::{CliError, CliResult};

pub const AUTOENCODER: &str = "autoencoder";

/// File layout of an output directory.
#[derive(Debug, Clone)]
pub struct Workspace {
    root: PathBuf,
}

impl Workspace {
    pub const DATA: &'static str = "data.csv";
    pub const TRAIN: &'static str = "train.csv";
    pub const AE_TRAIN: &'static str = "ae_train.csv";
    pub const AE_VAL: &'static str = "ae_val.csv";
    pub const TEST_FEATURES: &'static str = "test_features.csv";
    pub const TEST_LABELS: &'static str = "test_labels.csv";
    pub const SPLIT: &'static str = "split.json";
    pub const AE_SCALER: &'static str = "scaler_ae.json";
    pub const AE_MODEL: &'static str = "ae_model.json";
    pub const TRAIN_LOG: &'static str = "train_log.csv";
    pub const TRAIN_REPORT: &'static str = "train_report.json";
    pub const SCORER: &'static str = "scorer.json";
    pub const CLF_SCALER: &'static str = "scaler_clf.json";
    pub const HISTOGRAMS: &'static str = "histograms.csv";
    pub const COMPARISON: &'static str = "comparison.csv";
    pub const MANIFEST: &'static str = "manifest.json";
    pub const LOCK: &'static str = ".aeromon.lock";

    pub fn new(root: impl Into<PathBuf>) -> CliResult<Self> {
        let root = root.into();
        std::fs::create_dir_all(&root).map_err(CliError::io(&root))?;
        Ok(Self { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn clf_model(&self, kind: ClassifierKind) -> PathBuf {
        self.path(&format!("clf_{kind}.json"))
    }

    pub fn cv_report(&self, kind: ClassifierKind) -> PathBuf {
        self.path(&format!("cv_{kind}.json"))
    }

    pub fn predictions(&self, model: &str) -> PathBuf {
        self.path(&format!("predictions_{model}.csv"))
    }

    pub fn report(&self, model: &str) -> PathBuf {
        self.path(&format!("report_{model}.json"))
    }

    /// Fails with a hint naming the stage that produces `name`.
    fn input(&self, name: &str, producer: &str) -> CliResult<PathBuf> {
        existing(self.path(name), producer)
    }
}

fn existing(path: PathBuf, producer: &str) -> CliResult<PathBuf> {
    if path.exists() {
        Ok(path)
    } else {
        Err(CliError::MissingInput {
            path,
            hint: format!("run `aeromon {producer}` first"),
        })
    }
}

/// Display name for a model key used in file names.
pub fn display_name(model: &str) -> String {
    if model == AUTOENCODER {
        return "Autoencoder".into();
    }
    model
        .parse::<ClassifierKind>()
        .map_or_else(|_| model.to_string(), |k| k.display_name().to_string())
}

pub fn generate(cfg: &PipelineConfig, ws: &Workspace) -> CliResult<Vec<PathBuf>> {
    let DataSource::Synthetic(synth) = cfg.source() else {
        return Err(CliError::Config("`generate` needs `synthetic = true`".into()));
    };
    let data = generate_synthetic(&synth).map_err(CliError::stage("generate"))?;
    let out = ws.path(Workspace::DATA);
    write_csv(&out, &data, true).map_err(CliError::stage("generate"))?;
    Ok(vec![out])
}

/// The labelled dataset: an explicit path, else the generated file, else
/// the configured CSV.
fn source_data(cfg: &PipelineConfig, ws: &Workspace, data: Option<&Path>, stage: &'static str) -> CliResult<Dataset> {
    let path = match (data, cfg.source()) {
        (Some(p), _) => p.to_path_buf(),
        (None, DataSource::Csv(p)) => p,
        (None, DataSource::Synthetic(_)) => ws.input(Workspace::DATA, "generate")?,
    };
    load_csv(&path, true).map_err(CliError::stage(stage))
}

#[derive(Debug, Serialize, Deserialize)]
struct SplitFile {
    n_samples: usize,
    test: Vec<usize>,
    supervised_train: Vec<usize>,
    ae_train: Vec<usize>,
    ae_val: Vec<usize>,
}

impl From<(&SplitIndices, usize)> for SplitFile {
    fn from((idx, n): (&SplitIndices, usize)) -> Self {
        Self {
            n_samples: n,
            test: idx.test.clone(),
            supervised_train: idx.supervised_train.clone(),
            ae_train: idx.ae_train.clone(),
            ae_val: idx.ae_val.clone(),
        }
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T, stage: &'static str) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::stage(stage)(e.into()))?;
    std::fs::write(path, text).map_err(CliError::io(path))
}

/// Writes the test features and test labels to separate files so that no
/// stage before `evaluate` needs to open the labels.
pub fn split(cfg: &PipelineConfig, ws: &Workspace, data: Option<&Path>) -> CliResult<Vec<PathBuf>> {
    let stage = CliError::stage("split");
    let data = source_data(cfg, ws, data, "split")?;
    let s = split_dataset(&data, cfg.test_fraction, cfg.ae_val_fraction, cfg.seed).map_err(stage)?;
    let mut written = Vec::new();
    let mut put = |name: &str, set: &Dataset, labels: bool| -> CliResult<()> {
        let p = ws.path(name);
        write_csv(&p, set, labels).map_err(CliError::stage("split"))?;
        written.push(p);
        Ok(())
    };
    put(Workspace::TRAIN, &s.supervised_train, true)?;
    put(Workspace::AE_TRAIN, &s.ae_train, true)?;
    put(Workspace::AE_VAL, &s.ae_val, true)?;
    put(Workspace::TEST_FEATURES, &s.test, false)?;
    let labels_path = ws.path(Workspace::TEST_LABELS);
    let labels = s.test.labels().map_err(CliError::stage("split"))?;
    write_labels_csv(&labels_path, &labels).map_err(CliError::stage("split"))?;
    written.push(labels_path);
    let split_path = ws.path(Workspace::SPLIT);
    write_json(&split_path, &SplitFile::from((&s.indices, data.len())), "split")?;
    written.push(split_path);
    Ok(written)
}

pub fn histogram(cfg: &PipelineConfig, ws: &Workspace, data: Option<&Path>, bins: Option<usize>) -> CliResult<Vec<PathBuf>> {
    let stage = CliError::stage("histogram");
    let data = source_data(cfg, ws, data, "histogram")?;
    let hists = feature_histograms(&data, bins.unwrap_or(cfg.histogram_bins)).map_err(stage)?;
    let out = ws.path(Workspace::HISTOGRAMS);
    let file = std::fs::File::create(&out).map_err(CliError::io(&out))?;
    write_histograms_csv(file, &hists).map_err(CliError::stage("histogram"))?;
    Ok(vec![out])
}

/// Fits the healthy-data scaler and trains the autoencoder on scaled
/// healthy samples.
pub fn train_ae(cfg: &PipelineConfig, ws: &Workspace) -> CliResult<(Vec<PathBuf>, TrainReport)> {
    let stage = "train-ae";
    let ae_train = load_csv(ws.input(Workspace::AE_TRAIN, "split")?, true).map_err(CliError::stage(stage))?;
    let ae_val = load_csv(ws.input(Workspace::AE_VAL, "split")?, true).map_err(CliError::stage(stage))?;
    let scaler = MinMaxScaler::fit(&ae_train).map_err(CliError::stage(stage))?;
    let scaled_train = scaler.apply(&ae_train).map_err(CliError::stage(stage))?;
    let scaled_val = scaler.apply(&ae_val).map_err(CliError::stage(stage))?;
    let net = init_network(&default_topology(), cfg.seed).map_err(CliError::stage(stage))?;
    let (net, report) = train(net, &scaled_train, &scaled_val, &cfg.train_config()).map_err(CliError::stage(stage))?;

    let scaler_path = ws.path(Workspace::AE_SCALER);
    scaler.save(&scaler_path).map_err(CliError::stage(stage))?;
    let model_path = ws.path(Workspace::AE_MODEL);
    net.save(&model_path).map_err(CliError::stage(stage))?;
    let log_path = ws.path(Workspace::TRAIN_LOG);
    let log = std::fs::File::create(&log_path).map_err(CliError::io(&log_path))?;
    report.write_log(log).map_err(CliError::stage(stage))?;
    let report_path = ws.path(Workspace::TRAIN_REPORT);
    write_json(&report_path, &report, stage)?;
    Ok((vec![scaler_path, model_path, log_path, report_path], report))
}

pub fn calibrate(cfg: &PipelineConfig, ws: &Workspace) -> CliResult<(Vec<PathBuf>, AnomalyScorer)> {
    let stage = "calibrate";
    let net = Network::load(ws.input(Workspace::AE_MODEL, "train-ae")?).map_err(CliError::stage(stage))?;
    let scaler = MinMaxScaler::load(ws.input(Workspace::AE_SCALER, "train-ae")?).map_err(CliError::stage(stage))?;
    let ae_train = load_csv(ws.input(Workspace::AE_TRAIN, "split")?, true).map_err(CliError::stage(stage))?;
    let scorer = calibrate_scorer(&net, &scaler, &ae_train, cfg.threshold()).map_err(CliError::stage(stage))?;
    let out = ws.path(Workspace::SCORER);
    scorer.save(&out, Workspace::AE_MODEL).map_err(CliError::stage(stage))?;
    Ok((vec![out], scorer))
}

/// A fitted model that can label raw samples.
pub enum Scorer {
    Anomaly(AnomalyScorer),
    Classifier(ClassifierModel),
}

impl Scorer {
    /// Loads either a calibrated scorer file or a classifier file.
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
        let probe: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| CliError::stage("score")(e.into()))?;
        if probe.get("threshold").is_some() {
            AnomalyScorer::load(path).map(Scorer::Anomaly)
        } else {
            ClassifierModel::load(path).map(Scorer::Classifier)
        }
        .map_err(CliError::stage("score"))
    }

    /// Key used in prediction and report file names.
    pub fn key(&self) -> String {
        match self {
            Scorer::Anomaly(_) => AUTOENCODER.to_string(),
            Scorer::Classifier(m) => m.kind().to_string(),
        }
    }

    /// Label and score (higher is more anomalous) for a raw sample.
    pub fn decide(&self, x: &[f64]) -> aeromon_core::Result<(Label, f64)> {
        match self {
            Scorer::Anomaly(s) => s.classify(x).map(|d| (d.label, d.score)),
            Scorer::Classifier(m) => m.predict_raw(x).map(|p| (p.label, p.prob_anomalous)),
        }
    }
}

/// Scores unlabelled features into `index,score,decision` rows.
pub fn score(ws: &Workspace, model: &Path, input: Option<&Path>, output: Option<&Path>) -> CliResult<Vec<PathBuf>> {
    let stage = "score";
    let scorer = Scorer::load(model)?;
    let input = match input {
        Some(p) => p.to_path_buf(),
        None => ws.input(Workspace::TEST_FEATURES, "split")?,
    };
    let data = load_csv(&input, false).map_err(CliError::stage(stage))?;
    let decisions = data
        .samples()
        .par_iter()
        .map(|s| scorer.decide(&s.features))
        .collect::<aeromon_core::Result<Vec<_>>>()
        .map_err(CliError::stage(stage))?;
    let out = output.map_or_else(|| ws.predictions(&scorer.key()), Path::to_path_buf);
    write_predictions(&out, &decisions)?;
    Ok(vec![out])
}

fn write_predictions(path: &Path, decisions: &[(Label, f64)]) -> CliResult<()> {
    let csv_err = |e: csv::Error| CliError::stage("score")(e.into());
    let mut wtr = csv::Writer::from_path(path).map_err(csv_err)?;
    wtr.write_record(["index", "score", "decision"]).map_err(csv_err)?;
    for (i, (label, score)) in decisions.iter().enumerate() {
        wtr.write_record([i.to_string(), score.to_string(), label.to_string()])
            .map_err(csv_err)?;
    }
    wtr.flush().map_err(CliError::io(path))
}

fn read_predictions(path: &Path) -> CliResult<(Vec<Label>, Vec<f64>)> {
    let stage = CliError::stage("evaluate");
    let mut rdr = csv::Reader::from_path(path).map_err(|e| CliError::stage("evaluate")(e.into()))?;
    let (mut labels, mut scores) = (Vec::new(), Vec::new());
    for (row, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| CliError::stage("evaluate")(e.into()))?;
        let parse_err = |column: &str, reason: String| aeromon_core::Error::Parse {
            row: row + 1,
            column: column.into(),
            reason,
        };
        if record.len() != 3 || record[0].parse::<usize>().ok() != Some(row) {
            return Err(stage(parse_err("index", "expected `index,score,decision` rows in order".into())));
        }
        let score: f64 = record[1]
            .parse()
            .map_err(|e: std::num::ParseFloatError| CliError::stage("evaluate")(parse_err("score", e.to_string())))?;
        let label: Label = record[2]
            .parse()
            .map_err(|e| CliError::stage("evaluate")(parse_err("decision", e)))?;
        scores.push(score);
        labels.push(label);
    }
    Ok((labels, scores))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CvCandidate {
    pub config: ClassifierConfig,
    pub mean_f1: Option<f64>,
    pub fold_f1: Option<Vec<f64>>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CvFile {
    pub selected_index: usize,
    pub selected: ClassifierConfig,
    pub folds: usize,
    pub candidates: Vec<CvCandidate>,
}

/// Fits the full-training-set scaler and, per kind, selects among
/// `candidates(kind)` by cross-validation (skipped for a single candidate)
/// and refits the winner.
pub fn train_clf(
    cfg: &PipelineConfig,
    ws: &Workspace,
    jobs: &[(ClassifierKind, Vec<ClassifierConfig>)],
) -> CliResult<Vec<PathBuf>> {
    let stage = "train-clf";
    let train = load_csv(ws.input(Workspace::TRAIN, "split")?, true).map_err(CliError::stage(stage))?;
    let scaler = MinMaxScaler::fit(&train).map_err(CliError::stage(stage))?;
    let scaled = scaler.apply(&train).map_err(CliError::stage(stage))?;
    let scaler_path = ws.path(Workspace::CLF_SCALER);
    scaler.save(&scaler_path).map_err(CliError::stage(stage))?;
    let mut written = vec![scaler_path];
    for (kind, candidates) in jobs {
        let (model, cv) = match candidates.as_slice() {
            [single] => {
                let model = train_classifier(single, &scaled, cfg.seed).map_err(CliError::stage(stage))?;
                let cv = CvFile {
                    selected_index: 0,
                    selected: single.clone(),
                    folds: cfg.cv_folds,
                    candidates: vec![CvCandidate {
                        config: single.clone(),
                        mean_f1: None,
                        fold_f1: None,
                    }],
                };
                (model, cv)
            }
            _ => {
                let sel = select_model(candidates, &scaled, cfg.cv_folds, cfg.seed).map_err(CliError::stage(stage))?;
                let cv = CvFile {
                    selected_index: sel.index,
                    selected: sel.config.clone(),
                    folds: cfg.cv_folds,
                    candidates: candidates
                        .iter()
                        .zip(&sel.scores)
                        .map(|(c, s)| CvCandidate {
                            config: c.clone(),
                            mean_f1: s.as_ref().map(|s| s.mean_f1),
                            fold_f1: s.as_ref().map(|s| s.fold_f1.clone()),
                        })
                        .collect(),
                };
                (sel.model, cv)
            }
        };
        let model_path = ws.clf_model(*kind);
        model
            .with_scaler(scaler.clone())
            .save(&model_path)
            .map_err(CliError::stage(stage))?;
        let cv_path = ws.cv_report(*kind);
        write_json(&cv_path, &cv, stage)?;
        written.push(model_path);
        written.push(cv_path);
    }
    Ok(written)
}

/// Reports every named model against the held-out labels.
pub fn evaluate(ws: &Workspace, models: &[String]) -> CliResult<(Vec<PathBuf>, Vec<EvalReport>)> {
    let truth = load_labels_csv(ws.input(Workspace::TEST_LABELS, "split")?).map_err(CliError::stage("evaluate"))?;
    let mut written = Vec::new();
    let mut reports = Vec::new();
    for model in models {
        let path = existing(ws.predictions(model), "score")?;
        let (pred, scores) = read_predictions(&path)?;
        let report =
            report_from_decisions(&display_name(model), &pred, &scores, &truth).map_err(CliError::stage("evaluate"))?;
        let out = ws.report(model);
        report.save(&out).map_err(CliError::stage("evaluate"))?;
        written.push(out);
        reports.push(report);
    }
    Ok((written, reports))
}

pub fn compare(ws: &Workspace, models: &[String]) -> CliResult<Vec<PathBuf>> {
    let reports = models
        .iter()
        .map(|m| EvalReport::load(existing(ws.report(m), "evaluate")?).map_err(CliError::stage("compare")))
        .collect::<CliResult<Vec<_>>>()?;
    let out = ws.path(Workspace::COMPARISON);
    let file = std::fs::File::create(&out).map_err(CliError::io(&out))?;
    write_comparison_csv(file, &reports).map_err(CliError::stage("compare"))?;
    Ok(vec![out])
}

/// Model keys with a file matching `prefix<key>suffix` in the workspace,
/// the autoencoder first and classifiers in canonical order.
pub fn discover(ws: &Workspace, prefix: &str, suffix: &str) -> CliResult<Vec<String>> {
    let mut keys = Vec::new();
    let entries = std::fs::read_dir(ws.root()).map_err(CliError::io(ws.root()))?;
    for entry in entries {
        let entry = entry.map_err(CliError::io(ws.root()))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if let Some(key) = name.strip_prefix(prefix).and_then(|r| r.strip_suffix(suffix)) {
            keys.push(key.to_string());
        }
    }
    let rank = |k: &String| {
        if k == AUTOENCODER {
            0
        } else {
            k.parse::<ClassifierKind>()
                .map_or(usize::MAX, |kind| 1 + ClassifierKind::ALL.iter().position(|&x| x == kind).unwrap())
        }
    };
    keys.sort_by(|a, b| rank(a).cmp(&rank(b)).then(a.cmp(b)));
    Ok(keys)
}

/// Hyperparameter flags for a single `train-clf` fit.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub k: Option<usize>,
    pub l2: Option<f64>,
    pub max_depth: Option<usize>,
    pub n_trees: Option<usize>,
    pub hidden_units: Option<usize>,
}

/// One candidate for `kind`: config values for ungridded keys, library
/// defaults for gridded ones, then the flags on top.
pub fn single_candidate(cfg: &PipelineConfig, kind: ClassifierKind, ov: &Overrides) -> CliResult<ClassifierConfig> {
    let mut c = cfg.candidates(kind).swap_remove(0);
    match (&mut c, kind.default_config()) {
        (ClassifierConfig::LogReg(p), ClassifierConfig::LogReg(d)) => p.l2 = ov.l2.unwrap_or(d.l2),
        (ClassifierConfig::Knn(p), ClassifierConfig::Knn(d)) => p.k = ov.k.unwrap_or(d.k),
        (ClassifierConfig::DecisionTree(p), ClassifierConfig::DecisionTree(d)) => {
            p.max_depth = ov.max_depth.unwrap_or(d.max_depth)
        }
        (ClassifierConfig::RandomForest(p), _) => {
            p.n_trees = ov.n_trees.unwrap_or(p.n_trees);
            p.max_depth = ov.max_depth.unwrap_or(p.max_depth);
        }
        (ClassifierConfig::Mlp(p), _) => p.hidden_units = ov.hidden_units.unwrap_or(p.hidden_units),
        _ => {}
    }
    c.validate().map_err(|e| CliError::Config(e.to_string()))?;
    Ok(c)
}
