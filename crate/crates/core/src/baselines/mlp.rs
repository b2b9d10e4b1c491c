use serde::{Deserialize, Serialize};

use crate::autoencoder::{adam_step, init_network, Activation, AdamState, Gradients, LayerSpec, Network};
use crate::error::Result;
use crate::numerics::Rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MlpParams {
    pub hidden_units: usize,
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
}

impl Default for MlpParams {
    fn default() -> Self {
        Self {
            hidden_units: 8,
            lr: 1e-2,
            epochs: 100,
            batch_size: 256,
        }
    }
}

/// `dim → hidden (ELU) → 1 (sigmoid)`, trained on cross-entropy with Adam.
pub fn fit<R: AsRef<[f64]>>(params: &MlpParams, rows: &[R], y: &[bool], seed: u64) -> Result<Network> {
    let dim = rows.first().map_or(0, |r| r.as_ref().len());
    let specs = [
        LayerSpec::new(dim, params.hidden_units, Activation::Elu),
        LayerSpec::new(params.hidden_units, 1, Activation::Sigmoid),
    ];
    let mut net = init_network(&specs, seed)?;
    let mut adam = AdamState::for_network(&net, params.lr);
    let mut rng = Rng::derived(seed, 1);
    let mut order: Vec<usize> = (0..rows.len()).collect();
    for _ in 0..params.epochs {
        rng.shuffle(&mut order);
        for batch in order.chunks(params.batch_size) {
            let mut acc = Gradients::zeros_like(&net);
            for &i in batch {
                let (out, cache) = net.forward(rows[i].as_ref())?;
                let target = if y[i] { 1.0 } else { 0.0 };
                // sigmoid output with cross-entropy: ∂L/∂z = p − t
                acc.add_assign(&net.backprop_preactivation(&cache, &[out[0] - target])?);
            }
            acc.scale(1.0 / batch.len() as f64);
            adam_step(&mut adam, &mut net, &acc)?;
        }
    }
    Ok(net)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn learns_a_threshold() {
        let rows: Vec<Vec<f64>> = (0..200).map(|i| vec![i as f64 / 200.0, 0.5]).collect();
        let y: Vec<bool> = rows.iter().map(|r| r[0] > 0.5).collect();
        let params = MlpParams {
            epochs: 300,
            batch_size: 32,
            ..MlpParams::default()
        };
        let net = fit(&params, &rows, &y, 3).unwrap();
        let correct = rows
            .iter()
            .zip(&y)
            .filter(|(r, &t)| (net.predict(r).unwrap()[0] > 0.5) == t)
            .count();
        assert!(correct >= 190, "{correct}");
    }

    #[test]
    fn deterministic_per_seed() {
        let rows: Vec<Vec<f64>> = (0..50).map(|i| vec![(i % 7) as f64 / 7.0]).collect();
        let y: Vec<bool> = (0..50).map(|i| i % 3 == 0).collect();
        let p = MlpParams {
            epochs: 5,
            ..MlpParams::default()
        };
        assert_eq!(fit(&p, &rows, &y, 1).unwrap(), fit(&p, &rows, &y, 1).unwrap());
    }
}
