use serde::{Deserialize, Serialize};

use super::{train_rows, ClassifierConfig, ClassifierModel};
use crate::dataset::{Dataset, Label};
use crate::error::{Error, Result};
use crate::evaluation::{confusion, metrics};
use crate::numerics::Rng;

/// Fold index for every sample.
///
/// Each class is shuffled on its own stream and dealt round-robin, the deal
/// continuing across classes, so per-class fold sizes differ by at most one
/// and so do fold totals.
pub fn stratified_folds(labels: &[Label], folds: usize, seed: u64) -> Result<Vec<usize>> {
    if folds < 2 {
        return Err(Error::Domain(format!("cross-validation needs at least 2 folds, got {folds}")));
    }
    let mut assignment = vec![0; labels.len()];
    let mut next = 0;
    for (stream, class) in [Label::Normal, Label::Anomalous].into_iter().enumerate() {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if members.len() < folds {
            return Err(Error::Stratification(format!(
                "{} {class} samples cannot fill {folds} folds",
                members.len()
            )));
        }
        Rng::derived(seed, stream as u64).shuffle(&mut members);
        for i in members {
            assignment[i] = next;
            next = (next + 1) % folds;
        }
    }
    Ok(assignment)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub mean_f1: f64,
    pub fold_f1: Vec<f64>,
}

/// Anomalous-class F1 on each held-out fold, training on the rest.
pub fn cross_validate(cfg: &ClassifierConfig, train: &Dataset, folds: usize, seed: u64) -> Result<CvResult> {
    cfg.validate()?;
    let labels = train.labels()?;
    let rows = train.feature_rows();
    let assignment = stratified_folds(&labels, folds, seed)?;
    let mut fold_f1 = Vec::with_capacity(folds);
    for fold in 0..folds {
        let (mut fit_rows, mut fit_labels) = (Vec::new(), Vec::new());
        let (mut held_rows, mut held_labels) = (Vec::new(), Vec::new());
        for (i, &a) in assignment.iter().enumerate() {
            if a == fold {
                held_rows.push(rows[i].as_slice());
                held_labels.push(labels[i]);
            } else {
                fit_rows.push(rows[i].as_slice());
                fit_labels.push(labels[i]);
            }
        }
        let model = train_rows(cfg, &fit_rows, &fit_labels, seed)?;
        let pred = held_rows
            .iter()
            .map(|x| model.predict(x).map(|p| p.label))
            .collect::<Result<Vec<_>>>()?;
        fold_f1.push(metrics(&confusion(&pred, &held_labels)?).f1);
    }
    Ok(CvResult {
        mean_f1: fold_f1.iter().sum::<f64>() / folds as f64,
        fold_f1,
    })
}

#[derive(Debug, Clone)]
pub struct Selection {
    pub index: usize,
    pub config: ClassifierConfig,
    /// `None` when there was only one candidate and CV was skipped.
    pub scores: Vec<Option<CvResult>>,
    pub model: ClassifierModel,
}

/// Highest mean CV F1 wins, ties going to the earlier candidate; the
/// winner is refitted on all of `train`.
pub fn select_model(
    candidates: &[ClassifierConfig],
    train: &Dataset,
    folds: usize,
    seed: u64,
) -> Result<Selection> {
    let (index, scores) = match candidates {
        [] => return Err(Error::Domain("model selection needs at least one candidate".into())),
        [only] => {
            only.validate()?;
            (0, vec![None])
        }
        _ => {
            let scores = candidates
                .iter()
                .map(|c| cross_validate(c, train, folds, seed))
                .collect::<Result<Vec<_>>>()?;
            let mut best = 0;
            for (i, s) in scores.iter().enumerate() {
                if s.mean_f1 > scores[best].mean_f1 {
                    best = i;
                }
            }
            (best, scores.into_iter().map(Some).collect())
        }
    };
    let config = candidates[index].clone();
    let model = super::train_classifier(&config, train, seed)?;
    Ok(Selection {
        index,
        config,
        scores,
        model,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::{KnnParams, TreeParams};
    use crate::dataset::TelemetrySample;

    fn labels(n_norm: usize, n_anom: usize) -> Vec<Label> {
        let mut v = vec![Label::Normal; n_norm];
        v.extend(vec![Label::Anomalous; n_anom]);
        v
    }

    #[test]
    fn ten_and_ten_gives_two_and_two() {
        let l = labels(10, 10);
        let a = stratified_folds(&l, 5, 3).unwrap();
        for f in 0..5 {
            let n = (0..20).filter(|&i| a[i] == f && l[i] == Label::Normal).count();
            let p = (0..20).filter(|&i| a[i] == f && l[i] == Label::Anomalous).count();
            assert_eq!((n, p), (2, 2));
        }
        assert_eq!(a, stratified_folds(&l, 5, 3).unwrap());
    }

    #[test]
    fn small_class_cannot_be_stratified() {
        assert!(matches!(
            stratified_folds(&labels(10, 4), 5, 0),
            Err(Error::Stratification(_))
        ));
    }

    fn separable(n: usize) -> Dataset {
        let mut rng = Rng::new(2);
        (0..n)
            .map(|_| {
                let mut f = [0.0; 7];
                for v in &mut f {
                    *v = rng.uniform();
                }
                TelemetrySample::new(f, Some(Label::from_anomalous(f[2] > 0.6)))
            })
            .collect()
    }

    #[test]
    fn separable_tree_scores_perfectly() {
        let data = separable(200);
        // a single threshold on channel 2 separates the classes
        let mut v: Vec<(f64, bool)> = data.iter().map(|s| (s.features[2], s.label.unwrap().is_anomalous())).collect();
        v.sort_by(|a, b| a.0.total_cmp(&b.0));
        let first_pos = v.iter().position(|x| x.1).unwrap();
        assert!(v[first_pos..].iter().all(|x| x.1));

        let cv = cross_validate(&ClassifierConfig::DecisionTree(TreeParams::default()), &data, 5, 1).unwrap();
        assert_eq!(cv.mean_f1, 1.0);
        assert_eq!(cv.fold_f1.len(), 5);
    }

    #[test]
    fn ties_go_to_the_first_candidate() {
        let data = separable(100);
        let tree = ClassifierConfig::DecisionTree(TreeParams::default());
        let deeper = ClassifierConfig::DecisionTree(TreeParams {
            max_depth: 40,
            ..TreeParams::default()
        });
        let sel = select_model(&[tree.clone(), deeper], &data, 5, 0).unwrap();
        assert_eq!(sel.index, 0);
        assert_eq!(sel.config, tree);
    }

    #[test]
    fn single_candidate_skips_cv() {
        let data = separable(60);
        let cfg = ClassifierConfig::Knn(KnnParams { k: 3 });
        let sel = select_model(&[cfg.clone()], &data, 5, 0).unwrap();
        assert_eq!(sel.index, 0);
        assert_eq!(sel.scores, vec![None]);
        assert_eq!(sel.model.config, cfg);
    }

    #[test]
    fn smoother_knn_wins_on_label_noise() {
        // labels are a clean threshold with 20% flips; one neighbour copies
        // the flips, five neighbours mostly vote them away
        let mut rng = Rng::new(8);
        let data: Dataset = (0..400)
            .map(|_| {
                let mut f = [0.5; 7];
                f[0] = rng.uniform();
                let clean = f[0] > 0.5;
                let label = if rng.uniform() < 0.2 { !clean } else { clean };
                TelemetrySample::new(f, Some(Label::from_anomalous(label)))
            })
            .collect();
        let k1 = ClassifierConfig::Knn(KnnParams { k: 1 });
        let k5 = ClassifierConfig::Knn(KnnParams { k: 5 });
        let s1 = cross_validate(&k1, &data, 5, 0).unwrap().mean_f1;
        let s5 = cross_validate(&k5, &data, 5, 0).unwrap().mean_f1;
        assert!(s5 > s1, "k=5 {s5} vs k=1 {s1}");
        assert_eq!(select_model(&[k1, k5.clone()], &data, 5, 0).unwrap().config, k5);
    }
}
