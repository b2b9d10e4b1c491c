use serde::{Deserialize, Serialize};

use super::sigmoid;

pub const VARIANCE_FLOOR: f64 = 1e-9;

/// Per-class, per-feature Gaussians. Index 0 is Normal, 1 is Anomalous.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GnbModel {
    pub means: [Vec<f64>; 2],
    pub variances: [Vec<f64>; 2],
    pub log_priors: [f64; 2],
}

impl GnbModel {
    fn log_joint(&self, class: usize, x: &[f64]) -> f64 {
        let ln_2pi = (2.0 * std::f64::consts::PI).ln();
        self.means[class]
            .iter()
            .zip(&self.variances[class])
            .zip(x)
            .fold(self.log_priors[class], |acc, ((m, v), xi)| {
                acc - 0.5 * (ln_2pi + v.ln()) - (xi - m) * (xi - m) / (2.0 * v)
            })
    }

    pub fn prob(&self, x: &[f64]) -> f64 {
        sigmoid(self.log_joint(1, x) - self.log_joint(0, x))
    }
}

/// Both classes must be present.
pub fn fit<R: AsRef<[f64]>>(rows: &[R], y: &[bool]) -> GnbModel {
    let dim = rows.first().map_or(0, |r| r.as_ref().len());
    let stats = |class: bool| {
        let members: Vec<&[f64]> = rows
            .iter()
            .zip(y)
            .filter(|(_, &t)| t == class)
            .map(|(r, _)| r.as_ref())
            .collect();
        let n = members.len() as f64;
        let means: Vec<f64> = (0..dim)
            .map(|j| members.iter().map(|r| r[j]).sum::<f64>() / n)
            .collect();
        let vars: Vec<f64> = (0..dim)
            .map(|j| {
                let v = members.iter().map(|r| (r[j] - means[j]).powi(2)).sum::<f64>() / n;
                v.max(VARIANCE_FLOOR)
            })
            .collect();
        (means, vars, (n / rows.len() as f64).ln())
    };
    let (m0, v0, p0) = stats(false);
    let (m1, v1, p1) = stats(true);
    GnbModel {
        means: [m0, m1],
        variances: [v0, v1],
        log_priors: [p0, p1],
    }
}
