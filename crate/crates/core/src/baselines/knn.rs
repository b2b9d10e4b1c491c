use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KnnParams {
    /// Odd, so binary votes cannot tie.
    pub k: usize,
}

impl Default for KnnParams {
    fn default() -> Self {
        Self { k: 5 }
    }
}

/// Stored training set; Euclidean distance, equal distances resolved in
/// favour of the lower training index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub k: usize,
    pub points: Vec<Vec<f64>>,
    pub labels: Vec<bool>,
}

impl KnnModel {
    pub fn fit<R: AsRef<[f64]>>(params: &KnnParams, rows: &[R], y: &[bool]) -> Self {
        Self {
            k: params.k,
            points: rows.iter().map(|r| r.as_ref().to_vec()).collect(),
            labels: y.to_vec(),
        }
    }

    /// Indices of the `k` nearest training points, nearest first.
    pub fn neighbours(&self, x: &[f64]) -> Vec<usize> {
        let mut keyed: Vec<(f64, usize)> = self
            .points
            .iter()
            .enumerate()
            .map(|(i, p)| (p.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum(), i))
            .collect();
        let k = self.k.min(keyed.len());
        let order = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if k < keyed.len() {
            keyed.select_nth_unstable_by(k - 1, order);
            keyed.truncate(k);
        }
        keyed.sort_by(order);
        keyed.into_iter().map(|(_, i)| i).collect()
    }

    /// Fraction of anomalous neighbours.
    pub fn prob(&self, x: &[f64]) -> f64 {
        let nb = self.neighbours(x);
        nb.iter().filter(|&&i| self.labels[i]).count() as f64 / nb.len() as f64
    }
}
