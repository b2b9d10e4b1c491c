use serde::{Deserialize, Serialize};

use super::sigmoid;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LogRegParams {
    /// L2 penalty `λ/2·‖w‖²`; the bias is not penalised.
    pub l2: f64,
    pub lr: f64,
    pub epochs: usize,
}

impl Default for LogRegParams {
    fn default() -> Self {
        Self {
            l2: 0.01,
            lr: 1.0,
            epochs: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRegModel {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LogRegModel {
    pub fn zeros(dim: usize) -> Self {
        Self {
            weights: vec![0.0; dim],
            bias: 0.0,
        }
    }

    pub fn logit(&self, x: &[f64]) -> f64 {
        self.weights.iter().zip(x).fold(self.bias, |acc, (w, v)| acc + w * v)
    }

    pub fn prob(&self, x: &[f64]) -> f64 {
        sigmoid(self.logit(x))
    }

    /// Mean cross-entropy plus the L2 penalty, with its gradient
    /// `(∂/∂w, ∂/∂b)`.
    pub fn loss_and_grad<R: AsRef<[f64]>>(&self, rows: &[R], y: &[bool], l2: f64) -> (f64, Vec<f64>, f64) {
        let n = rows.len() as f64;
        let mut loss = 0.0;
        let mut gw = vec![0.0; self.weights.len()];
        let mut gb = 0.0;
        for (row, &t) in rows.iter().zip(y) {
            let x = row.as_ref();
            let z = self.logit(x);
            let t = if t { 1.0 } else { 0.0 };
            // log(1 + e^z) − t·z, evaluated without overflow
            loss += z.max(0.0) + (-z.abs()).exp().ln_1p() - t * z;
            let err = sigmoid(z) - t;
            for (g, v) in gw.iter_mut().zip(x) {
                *g += err * v;
            }
            gb += err;
        }
        let penalty: f64 = self.weights.iter().map(|w| w * w).sum::<f64>() * l2 / 2.0;
        for (g, w) in gw.iter_mut().zip(&self.weights) {
            *g = *g / n + l2 * w;
        }
        (loss / n + penalty, gw, gb / n)
    }
}

/// Full-batch gradient descent from zero weights.
pub fn fit<R: AsRef<[f64]>>(params: &LogRegParams, rows: &[R], y: &[bool]) -> LogRegModel {
    let dim = rows.first().map_or(0, |r| r.as_ref().len());
    let mut model = LogRegModel::zeros(dim);
    for _ in 0..params.epochs {
        let (_, gw, gb) = model.loss_and_grad(rows, y, params.l2);
        for (w, g) in model.weights.iter_mut().zip(&gw) {
            *w -= params.lr * g;
        }
        model.bias -= params.lr * gb;
    }
    model
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Rng;

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = Rng::new(11);
        for case in 0..10 {
            let rows: Vec<Vec<f64>> = (0..30)
                .map(|_| (0..7).map(|_| rng.uniform()).collect())
                .collect();
            let y: Vec<bool> = (0..30).map(|_| rng.uniform() < 0.4).collect();
            let model = LogRegModel {
                weights: (0..7).map(|_| rng.uniform_in(-2.0, 2.0)).collect(),
                bias: rng.uniform_in(-1.0, 1.0),
            };
            let l2 = [0.0, 0.01, 0.1, 1.0][case % 4];
            let (_, gw, gb) = model.loss_and_grad(&rows, &y, l2);
            let h = 1e-5;
            let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs()).max(1e-8);
            for i in 0..7 {
                let mut plus = model.clone();
                let mut minus = model.clone();
                plus.weights[i] += h;
                minus.weights[i] -= h;
                let fd = (plus.loss_and_grad(&rows, &y, l2).0 - minus.loss_and_grad(&rows, &y, l2).0) / (2.0 * h);
                assert!(rel(fd, gw[i]) < 1e-4, "case {case} w{i}: {fd} vs {}", gw[i]);
            }
            let mut plus = model.clone();
            let mut minus = model.clone();
            plus.bias += h;
            minus.bias -= h;
            let fd = (plus.loss_and_grad(&rows, &y, l2).0 - minus.loss_and_grad(&rows, &y, l2).0) / (2.0 * h);
            assert!(rel(fd, gb) < 1e-4);
        }
    }

    #[test]
    fn zero_weights_give_one_half() {
        assert_eq!(LogRegModel::zeros(7).prob(&[0.3; 7]), 0.5);
    }

    #[test]
    fn separable_data_is_learned() {
        let rows: Vec<Vec<f64>> = (0..40).map(|i| vec![i as f64 / 40.0]).collect();
        let y: Vec<bool> = (0..40).map(|i| i >= 20).collect();
        let model = fit(&LogRegParams { l2: 0.0, lr: 5.0, epochs: 2000 }, &rows, &y);
        assert!(model.prob(&[0.0]) < 0.1);
        assert!(model.prob(&[1.0]) > 0.9);
    }
}
