//! Metrics for the anomalous-as-positive binary task, AUROC, histogram
//! export and per-model reports.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Label, CHANNEL_NAMES, N_CHANNELS};
use crate::error::{Error, Result};
use crate::numerics::percentile;

pub const DEFAULT_HISTOGRAM_BINS: usize = 50;

/// Counts with Anomalous as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn record(&mut self, pred: Label, truth: Label) {
        match (pred, truth) {
            (Label::Anomalous, Label::Anomalous) => self.tp += 1,
            (Label::Anomalous, Label::Normal) => self.fp += 1,
            (Label::Normal, Label::Anomalous) => self.fn_ += 1,
            (Label::Normal, Label::Normal) => self.tn += 1,
        }
    }
}

pub fn confusion(pred: &[Label], truth: &[Label]) -> Result<ConfusionMatrix> {
    if pred.len() != truth.len() {
        return Err(Error::Shape(format!(
            "{} predictions for {} labels",
            pred.len(),
            truth.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::InsufficientData("confusion matrix of no samples".into()));
    }
    let mut cm = ConfusionMatrix::default();
    for (&p, &t) in pred.iter().zip(truth) {
        cm.record(p, t);
    }
    Ok(cm)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
    pub auroc: Option<f64>,
    /// Set when some ratio had a zero denominator and was reported as 0.
    pub degenerate: bool,
}

pub fn metrics(cm: &ConfusionMatrix) -> Metrics {
    let mut degenerate = false;
    let mut ratio = |num: usize, den: usize| {
        if den == 0 {
            degenerate = true;
            0.0
        } else {
            num as f64 / den as f64
        }
    };
    let precision = ratio(cm.tp, cm.tp + cm.fp);
    let recall = ratio(cm.tp, cm.tp + cm.fn_);
    let accuracy = ratio(cm.tp + cm.tn, cm.total());
    // harmonic mean of precision and recall, as one correctly rounded ratio
    let f1 = if cm.tp > 0 {
        (2 * cm.tp) as f64 / (2 * cm.tp + cm.fp + cm.fn_) as f64
    } else {
        degenerate = true;
        0.0
    };
    Metrics {
        precision,
        recall,
        f1,
        accuracy,
        auroc: None,
        degenerate,
    }
}

/// Probability that a random anomalous sample outscores a random normal
/// one, ties counting ½, computed from mid-ranks.
pub fn auroc(scores: &[f64], truth: &[Label]) -> Result<f64> {
    if scores.len() != truth.len() {
        return Err(Error::Shape(format!(
            "{} scores for {} labels",
            scores.len(),
            truth.len()
        )));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::Domain("AUROC scores must be finite".into()));
    }
    let n_pos = truth.iter().filter(|l| l.is_anomalous()).count();
    let n_neg = truth.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::UndefinedAuroc);
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // Twice the rank sum keeps mid-ranks integral.
    let mut twice_rank_sum: u128 = 0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        // 1-based ranks start+1..=end, mid-rank (start+1+end)/2
        let twice_mid = (start + 1 + end) as u128;
        let pos_in_group = order[start..end]
            .iter()
            .filter(|&&i| truth[i].is_anomalous())
            .count() as u128;
        twice_rank_sum += twice_mid * pos_in_group;
        start = end;
    }
    let (p, q) = (n_pos as u128, n_neg as u128);
    let twice_u = twice_rank_sum - p * (p + 1);
    Ok(twice_u as f64 / (2 * p * q) as f64)
}

/// Equal-width histogram of one channel, split by class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelHistogram {
    pub channel: String,
    pub min: f64,
    pub max: f64,
    pub normal: Vec<usize>,
    pub anomalous: Vec<usize>,
}

impl ChannelHistogram {
    pub fn bins(&self) -> usize {
        self.normal.len()
    }

    /// `[lower, upper)` of bin `b`; the last bin also holds the maximum.
    pub fn bin_edges(&self, b: usize) -> (f64, f64) {
        let width = (self.max - self.min) / self.bins() as f64;
        (self.min + b as f64 * width, self.min + (b + 1) as f64 * width)
    }
}

/// Per-channel histograms spanning each channel's observed range.
pub fn feature_histograms(data: &Dataset, bins: usize) -> Result<Vec<ChannelHistogram>> {
    if bins < 2 {
        return Err(Error::Domain(format!("histograms need at least 2 bins, got {bins}")));
    }
    if data.is_empty() {
        return Err(Error::InsufficientData("histogram of an empty dataset".into()));
    }
    let labels = data.labels()?;
    Ok((0..N_CHANNELS)
        .map(|c| {
            let (min, max) = data.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| {
                (lo.min(s.features[c]), hi.max(s.features[c]))
            });
            let mut h = ChannelHistogram {
                channel: CHANNEL_NAMES[c].to_string(),
                min,
                max,
                normal: vec![0; bins],
                anomalous: vec![0; bins],
            };
            for (s, label) in data.iter().zip(&labels) {
                let b = if max > min {
                    (((s.features[c] - min) / (max - min) * bins as f64) as usize).min(bins - 1)
                } else {
                    0
                };
                match label {
                    Label::Normal => h.normal[b] += 1,
                    Label::Anomalous => h.anomalous[b] += 1,
                }
            }
            h
        })
        .collect())
}

/// `channel,bin,lower,upper,normal,anomalous`
pub fn write_histograms_csv<W: Write>(writer: W, hists: &[ChannelHistogram]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["channel", "bin", "lower", "upper", "normal", "anomalous"])?;
    for h in hists {
        for b in 0..h.bins() {
            let (lo, hi) = h.bin_edges(b);
            wtr.write_record([
                h.channel.clone(),
                b.to_string(),
                lo.to_string(),
                hi.to_string(),
                h.normal[b].to_string(),
                h.anomalous[b].to_string(),
            ])?;
        }
    }
    wtr.flush().map_err(|e| Error::io("<histogram csv>", e))?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreSummary {
    pub min: f64,
    pub median: f64,
    pub p85: f64,
    pub max: f64,
}

impl ScoreSummary {
    fn of(scores: &[f64]) -> Result<Option<Self>> {
        if scores.is_empty() {
            return Ok(None);
        }
        Ok(Some(Self {
            min: percentile(scores, 0.0)?,
            median: percentile(scores, 50.0)?,
            p85: percentile(scores, 85.0)?,
            max: percentile(scores, 100.0)?,
        }))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreSummaries {
    pub normal: Option<ScoreSummary>,
    pub anomalous: Option<ScoreSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model: String,
    #[serde(flatten)]
    pub metrics: Metrics,
    pub confusion: ConfusionMatrix,
    pub scores: ScoreSummaries,
}

impl EvalReport {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let json = serde_json::to_string_pretty(self)?;
        std::fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Builds a report from per-sample decisions and scores.
pub fn report_from_decisions(
    model: &str,
    pred: &[Label],
    scores: &[f64],
    truth: &[Label],
) -> Result<EvalReport> {
    if scores.len() != pred.len() {
        return Err(Error::Shape("one score per prediction required".into()));
    }
    let cm = confusion(pred, truth)?;
    let mut m = metrics(&cm);
    m.auroc = match auroc(scores, truth) {
        Ok(a) => Some(a),
        Err(Error::UndefinedAuroc) => None,
        Err(e) => return Err(e),
    };
    let by_class = |want: Label| -> Vec<f64> {
        scores
            .iter()
            .zip(truth)
            .filter(|(_, &t)| t == want)
            .map(|(&s, _)| s)
            .collect()
    };
    Ok(EvalReport {
        model: model.to_string(),
        metrics: m,
        confusion: cm,
        scores: ScoreSummaries {
            normal: ScoreSummary::of(&by_class(Label::Normal))?,
            anomalous: ScoreSummary::of(&by_class(Label::Anomalous))?,
        },
    })
}

/// Applies `decider` once to every test sample and reports against the
/// labels. The decider returns a label and a score (higher = more anomalous).
pub fn evaluate_model<F>(model: &str, decider: F, test: &Dataset) -> Result<EvalReport>
where
    F: Fn(&[f64; N_CHANNELS]) -> Result<(Label, f64)> + Sync,
{
    let truth = test.labels()?;
    let decisions = test
        .samples()
        .par_iter()
        .map(|s| decider(&s.features))
        .collect::<Result<Vec<_>>>()?;
    let (pred, scores): (Vec<Label>, Vec<f64>) = decisions.into_iter().unzip();
    report_from_decisions(model, &pred, &scores, &truth)
}

/// `Model,Precision,Recall,F1-score,Accuracy` with four decimals.
pub fn write_comparison_csv<W: Write>(writer: W, reports: &[EvalReport]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["Model", "Precision", "Recall", "F1-score", "Accuracy"])?;
    for r in reports {
        let m = &r.metrics;
        wtr.write_record([
            r.model.clone(),
            format!("{:.4}", m.precision),
            format!("{:.4}", m.recall),
            format!("{:.4}", m.f1),
            format!("{:.4}", m.accuracy),
        ])?;
    }
    wtr.flush().map_err(|e| Error::io("<comparison csv>", e))?;
    Ok(())
}
