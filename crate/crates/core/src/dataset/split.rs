use super::{Dataset, Label};
use crate::error::{Error, Result};
use crate::numerics::Rng;

/// Positions of each split part in the original dataset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitIndices {
    pub test: Vec<usize>,
    pub supervised_train: Vec<usize>,
    pub ae_train: Vec<usize>,
    pub ae_val: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct SplitResult {
    /// Stratified holdout shared by every model.
    pub test: Dataset,
    /// Everything else, both classes.
    pub supervised_train: Dataset,
    /// Normals of `supervised_train` used to fit the autoencoder.
    pub ae_train: Dataset,
    /// Normals of `supervised_train` held out for early stopping.
    pub ae_val: Dataset,
    pub indices: SplitIndices,
}

/// Splits `total` items into per-class quotas proportional to `counts`
/// using the largest-remainder method. Ties in the remainder go to the
/// class listed first.
pub(crate) fn largest_remainder(counts: &[usize], fraction: f64) -> Vec<usize> {
    let n: usize = counts.iter().sum();
    let total = (fraction * n as f64).round() as usize;
    let exact: Vec<f64> = counts.iter().map(|&c| fraction * c as f64).collect();
    let mut quotas: Vec<usize> = exact.iter().map(|q| q.floor() as usize).collect();
    let mut order: Vec<usize> = (0..counts.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    let mut remaining = total.saturating_sub(quotas.iter().sum());
    for &c in order.iter().cycle().take(order.len() * 2) {
        if remaining == 0 {
            break;
        }
        if quotas[c] < counts[c] {
            quotas[c] += 1;
            remaining -= 1;
        }
    }
    quotas
}

/// Stratified, seeded partition of a labelled dataset.
///
/// The test holdout takes `round(test_fraction·n)` samples allocated to the
/// classes by largest remainder. The normals left over are shuffled and
/// `round(ae_val_fraction·normals)` of them (at least one, never all) go to
/// the autoencoder validation set.
pub fn split(data: &Dataset, test_fraction: f64, ae_val_fraction: f64, seed: u64) -> Result<SplitResult> {
    if !(0.0..1.0).contains(&test_fraction) || !(0.0..1.0).contains(&ae_val_fraction) {
        return Err(Error::Domain(format!(
            "split fractions must lie in [0, 1), got test {test_fraction}, validation {ae_val_fraction}"
        )));
    }
    let labels = data.labels()?;
    let mut by_class: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for (i, l) in labels.iter().enumerate() {
        by_class[usize::from(l.as_int())].push(i);
    }
    for (class, members) in by_class.iter().enumerate() {
        if members.len() < 2 {
            return Err(Error::Stratification(format!(
                "class {} has {} member(s); at least 2 are needed",
                if class == 0 { Label::Normal } else { Label::Anomalous },
                members.len()
            )));
        }
    }

    let mut rng = Rng::derived(seed, 0);
    let quotas = largest_remainder(&[by_class[0].len(), by_class[1].len()], test_fraction);
    let mut test = Vec::new();
    let mut train_normals = Vec::new();
    let mut train_anomalies = Vec::new();
    for (class, members) in by_class.iter().enumerate() {
        let mut shuffled = members.clone();
        rng.shuffle(&mut shuffled);
        let (held, kept) = shuffled.split_at(quotas[class]);
        test.extend_from_slice(held);
        if class == 0 {
            train_normals.extend_from_slice(kept);
        } else {
            train_anomalies.extend_from_slice(kept);
        }
    }
    test.sort_unstable();

    if train_normals.len() < 2 {
        return Err(Error::Stratification(
            "fewer than 2 normal samples remain for autoencoder training".into(),
        ));
    }
    let mut supervised_train: Vec<usize> = train_normals.iter().chain(&train_anomalies).copied().collect();
    supervised_train.sort_unstable();

    let mut normals = train_normals;
    normals.sort_unstable();
    let mut val_rng = Rng::derived(seed, 1);
    val_rng.shuffle(&mut normals);
    let n_val = ((ae_val_fraction * normals.len() as f64).round() as usize).clamp(1, normals.len() - 1);
    let mut ae_val = normals[..n_val].to_vec();
    let mut ae_train = normals[n_val..].to_vec();
    ae_val.sort_unstable();
    ae_train.sort_unstable();

    let indices = SplitIndices {
        test,
        supervised_train,
        ae_train,
        ae_val,
    };
    Ok(SplitResult {
        test: data.subset(&indices.test),
        supervised_train: data.subset(&indices.supervised_train),
        ae_train: data.subset(&indices.ae_train),
        ae_val: data.subset(&indices.ae_val),
        indices,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{TelemetrySample, N_CHANNELS};

    fn toy(normals: usize, anomalies: usize) -> Dataset {
        (0..normals + anomalies)
            .map(|i| {
                TelemetrySample::new(
                    [i as f64; N_CHANNELS],
                    Some(Label::from_anomalous(i >= normals)),
                )
            })
            .collect()
    }

    #[test]
    fn twenty_samples_give_one_of_each() {
        // 12 N -> 1.2, 8 A -> 0.8; total round(2.0) = 2; floors 1 + 0, the
        // spare unit goes to the larger remainder (0.8, anomalous).
        assert_eq!(largest_remainder(&[12, 8], 0.10), vec![1, 1]);
        let s = split(&toy(12, 8), 0.10, 0.10, 3).unwrap();
        assert_eq!(s.test.len(), 2);
        assert_eq!(s.test.class_counts(), (1, 1));
    }

    #[test]
    fn deterministic_per_seed() {
        let data = toy(300, 200);
        let a = split(&data, 0.1, 0.1, 9).unwrap();
        let b = split(&data, 0.1, 0.1, 9).unwrap();
        assert_eq!(a.indices, b.indices);
        let c = split(&data, 0.1, 0.1, 10).unwrap();
        assert_ne!(a.indices.test, c.indices.test);
    }

    #[test]
    fn too_small_class_fails() {
        assert!(matches!(split(&toy(10, 1), 0.1, 0.1, 0), Err(Error::Stratification(_))));
    }

    #[test]
    fn unlabelled_fails() {
        assert!(matches!(
            split(&toy(10, 10).without_labels(), 0.1, 0.1, 0),
            Err(Error::MissingLabels)
        ));
    }

    #[test]
    fn paper_scale_sizes() {
        // 742,625 samples at 60/40, counted without materialising them.
        let n = 742_625_usize;
        let anomalies = (0.4 * n as f64).round() as usize;
        let q = largest_remainder(&[n - anomalies, anomalies], 0.10);
        let test: usize = q.iter().sum();
        assert!((74_262..=74_263).contains(&test), "{test}");
        // The reported count of ~354,566 training normals is approximate;
        // the split arithmetic lands within 2% of it.
        let normals_left = n - anomalies - q[0];
        let ae_train = normals_left - (0.1 * normals_left as f64).round() as usize;
        let rel = (ae_train as f64 - 354_566.0).abs() / 354_566.0;
        assert!(rel < 0.02, "{ae_train}");
    }
}
