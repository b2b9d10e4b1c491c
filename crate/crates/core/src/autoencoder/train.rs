use std::io::Write;

use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamState};
use super::network::{backward, mse_loss, Gradients, Network};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::numerics::Rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub max_epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub early_stop_patience: usize,
    pub plateau_patience: usize,
    pub plateau_factor: f64,
    pub min_lr: f64,
    /// Validation loss must drop below the best so far by more than this to
    /// count as an improvement.
    pub min_delta: f64,
    pub seed: u64,
    pub shuffle_each_epoch: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            max_epochs: 200,
            batch_size: 1024,
            learning_rate: 1e-3,
            early_stop_patience: 25,
            plateau_patience: 20,
            plateau_factor: 0.2,
            min_lr: 1e-6,
            min_delta: 1e-7,
            seed: 0,
            shuffle_each_epoch: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Domain(format!("training config: {what}")));
        if self.max_epochs == 0 {
            return bad("max_epochs must be at least 1");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if self.early_stop_patience == 0 || self.plateau_patience == 0 {
            return bad("patience values must be at least 1");
        }
        if !(self.plateau_factor > 0.0 && self.plateau_factor < 1.0) {
            return bad("plateau_factor must lie in (0, 1)");
        }
        if !(self.min_lr > 0.0) || !(self.learning_rate > 0.0) {
            return bad("learning rates must be positive");
        }
        if !(self.min_delta >= 0.0) {
            return bad("min_delta must be non-negative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_mse: f64,
    pub val_mse: f64,
    /// Learning rate in effect during this epoch.
    pub lr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs_run: usize,
    /// 1-based epoch whose weights were returned.
    pub best_epoch: usize,
    pub best_val_loss: f64,
    /// Mean reconstruction MSE of the returned weights over the training set.
    pub final_train_mse: f64,
    pub stopped_early: bool,
    pub loss_history: Vec<EpochRecord>,
}

impl TrainReport {
    /// Writes the `epoch,train_mse,val_mse,lr` log.
    pub fn write_log<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["epoch", "train_mse", "val_mse", "lr"])?;
        for r in &self.loss_history {
            wtr.write_record([
                r.epoch.to_string(),
                r.train_mse.to_string(),
                r.val_mse.to_string(),
                r.lr.to_string(),
            ])?;
        }
        wtr.flush().map_err(|e| Error::io("<training log>", e))?;
        Ok(())
    }
}

/// Mean per-sample reconstruction MSE over `rows`, accumulated in order.
pub fn mean_reconstruction_mse<R: AsRef<[f64]>>(net: &Network, rows: &[R]) -> Result<f64> {
    if rows.is_empty() {
        return Err(Error::InsufficientData("no rows to evaluate".into()));
    }
    let mut total = 0.0;
    for r in rows {
        let x = r.as_ref();
        total += mse_loss(x, &net.predict(x)?)?;
    }
    Ok(total / rows.len() as f64)
}

/// Trains on rows of any width matching the network.
///
/// Each epoch shuffles the training rows, takes one Adam step per
/// mini-batch (the last batch may be short; gradients are averaged over
/// the actual batch size) and then measures full-pass MSE on both sets.
/// The weights with the lowest validation MSE are returned. The learning
/// rate is multiplied by `plateau_factor` (never below `min_lr`) after
/// `plateau_patience` epochs without improvement, and training stops after
/// `early_stop_patience` such epochs.
pub fn train_rows<R: AsRef<[f64]>>(
    mut net: Network,
    train: &[R],
    val: &[R],
    cfg: &TrainConfig,
) -> Result<(Network, TrainReport)> {
    cfg.validate()?;
    if train.is_empty() || val.is_empty() {
        return Err(Error::InsufficientData(
            "autoencoder training needs non-empty training and validation sets".into(),
        ));
    }

    let mut adam = AdamState::for_network(&net, cfg.learning_rate);
    let mut rng = Rng::derived(cfg.seed, 0x5eed);
    let mut order: Vec<usize> = (0..train.len()).collect();

    let mut best_net = net.clone();
    let mut best_val = f64::INFINITY;
    let mut best_epoch = 0;
    let mut since_improvement = 0;
    let mut since_reduction = 0;
    let mut history = Vec::new();
    let mut stopped_early = false;

    for epoch in 1..=cfg.max_epochs {
        if cfg.shuffle_each_epoch {
            rng.shuffle(&mut order);
        }
        let lr = adam.lr;
        for batch in order.chunks(cfg.batch_size) {
            let mut acc = Gradients::zeros_like(&net);
            for &i in batch {
                let x = train[i].as_ref();
                let (_, cache) = net.forward(x)?;
                acc.add_assign(&backward(&net, &cache, x)?);
            }
            acc.scale(1.0 / batch.len() as f64);
            adam_step(&mut adam, &mut net, &acc)?;
        }

        let train_mse = mean_reconstruction_mse(&net, train)?;
        let val_mse = mean_reconstruction_mse(&net, val)?;
        if !val_mse.is_finite() {
            return Err(Error::Domain(format!("validation loss diverged at epoch {epoch}")));
        }
        history.push(EpochRecord {
            epoch,
            train_mse,
            val_mse,
            lr,
        });

        let improved = val_mse < best_val - cfg.min_delta;
        if val_mse < best_val {
            best_val = val_mse;
            best_net = net.clone();
            best_epoch = epoch;
        }
        if improved {
            since_improvement = 0;
            since_reduction = 0;
        } else {
            since_improvement += 1;
            since_reduction += 1;
            if since_improvement >= cfg.early_stop_patience {
                stopped_early = epoch < cfg.max_epochs;
                break;
            }
            if since_reduction >= cfg.plateau_patience {
                adam.lr = (adam.lr * cfg.plateau_factor).max(cfg.min_lr);
                since_reduction = 0;
            }
        }
    }

    let final_train_mse = mean_reconstruction_mse(&best_net, train)?;
    let report = TrainReport {
        epochs_run: history.len(),
        best_epoch,
        best_val_loss: best_val,
        final_train_mse,
        stopped_early,
        loss_history: history,
    };
    Ok((best_net, report))
}

/// Trains the autoencoder on (already scaled) healthy samples.
pub fn train(net: Network, ae_train: &Dataset, ae_val: &Dataset, cfg: &TrainConfig) -> Result<(Network, TrainReport)> {
    train_rows(net, &ae_train.feature_rows(), &ae_val.feature_rows(), cfg)
}
