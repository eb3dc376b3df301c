//! Losses, optimisers and the mini-batch loop with early stopping.

mod history;
mod loss;
mod optim;

use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

pub use history::{EarlyStopping, EpochRecord, StopDecision, TrainHistory};
pub use loss::{bce_with_logits, binary_cross_entropy, mae_loss, mae_loss_grad, EPS};
pub use optim::{
    adam_step, rmsprop_step, OptimizerKind, OptimizerState, ADAM_BETA1, ADAM_BETA2, OPTIMIZER_EPS, RMSPROP_RHO,
};

use crate::error::{Error, Result};
use crate::params::Params;
use crate::seed::{rng_for, stream};
use crate::tensor::Tensor;

/// A model the training loop can drive. Inputs are already normalised.
pub trait Trainable {
    fn params(&self) -> &Params;
    fn params_mut(&mut self) -> &mut Params;
    /// Mean loss over the batch.
    fn loss(&self, input: &Tensor, target: &Tensor) -> Result<f64>;
    /// Mean loss and its gradient with respect to every parameter.
    fn loss_and_grad(&self, input: &Tensor, target: &Tensor) -> Result<(f64, Params)>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    Bce,
    Mae,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
    pub loss: LossKind,
}

impl TrainConfig {
    /// Adam at 2e-4 with cross-entropy.
    pub fn wavenet() -> Self {
        Self {
            optimizer: OptimizerKind::Adam,
            learning_rate: 2e-4,
            batch_size: 32,
            max_epochs: 200,
            patience: 10,
            seed: 0,
            loss: LossKind::Bce,
        }
    }

    /// RMSprop at 1e-3 with cross-entropy.
    pub fn lstm() -> Self {
        Self {
            optimizer: OptimizerKind::Rmsprop,
            learning_rate: 1e-3,
            ..Self::wavenet()
        }
    }

    /// Adam at 2e-4 with mean absolute error, batches of 4.
    pub fn unet() -> Self {
        Self {
            loss: LossKind::Mae,
            batch_size: 4,
            ..Self::wavenet()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("learning_rate", "must be positive"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size", "must be positive"));
        }
        if self.max_epochs == 0 {
            return Err(Error::config("max_epochs", "must be positive"));
        }
        if self.patience == 0 {
            return Err(Error::config("patience", "must be >= 1"));
        }
        Ok(())
    }
}

/// Supplies training and validation tensors, already normalised.
pub trait EpochData {
    /// `(inputs [N, ...], targets [N, ...])` for a 1-based epoch. May differ
    /// per epoch, e.g. fresh noise.
    fn train(&mut self, epoch: usize) -> Result<(Tensor, Tensor)>;
    fn validation(&mut self) -> Result<(Tensor, Tensor)>;
}

/// Fixed tensors for every epoch.
pub struct StaticData {
    pub train: (Tensor, Tensor),
    pub validation: (Tensor, Tensor),
}

impl EpochData for StaticData {
    fn train(&mut self, _epoch: usize) -> Result<(Tensor, Tensor)> {
        Ok(self.train.clone())
    }

    fn validation(&mut self) -> Result<(Tensor, Tensor)> {
        Ok(self.validation.clone())
    }
}

/// Rows `indices` of a tensor whose first axis indexes samples.
pub fn gather_rows(x: &Tensor, indices: &[usize]) -> Result<Tensor> {
    let n = x.dim(0);
    let row = x.len() / n;
    let mut values = Vec::with_capacity(indices.len() * row);
    for &i in indices {
        if i >= n {
            return Err(Error::shape(format!("row {i} out of {n}")));
        }
        values.extend_from_slice(&x.data()[i * row..(i + 1) * row]);
    }
    let mut shape = x.shape().to_vec();
    shape[0] = indices.len();
    Tensor::new(shape, values)
}

/// Mean loss over `x` evaluated in chunks of `chunk` rows.
pub fn mean_loss(model: &impl Trainable, x: &Tensor, y: &Tensor, chunk: usize) -> Result<f64> {
    let n = x.dim(0);
    let mut total = 0.0;
    let idx: Vec<usize> = (0..n).collect();
    for part in idx.chunks(chunk.max(1)) {
        let l = model.loss(&gather_rows(x, part)?, &gather_rows(y, part)?)?;
        total += l * part.len() as f64;
    }
    Ok(total / n as f64)
}

fn non_finite(what: &str, epoch: usize) -> Error {
    Error::NonFinite(format!("{what} at epoch {epoch}"))
}

/// Mini-batch training with per-epoch seeded shuffling and early stopping
/// on validation loss. On return the model holds the best-epoch parameters.
pub fn fit(
    model: &mut impl Trainable,
    data: &mut impl EpochData,
    config: &TrainConfig,
) -> Result<(TrainHistory, OptimizerState)> {
    config.validate()?;
    let (val_x, val_y) = data.validation()?;
    if val_x.is_empty() || val_x.dim(0) == 0 {
        return Err(Error::EmptyInput("validation split".into()));
    }
    let mut optimizer = OptimizerState::new(config.optimizer, config.learning_rate, model.params());
    let mut stopper = EarlyStopping::new(config.patience);
    let mut history = TrainHistory::default();
    let mut best = (model.params().clone(), optimizer.clone());

    for epoch in 1..=config.max_epochs {
        let started = Instant::now();
        let (x, y) = data.train(epoch)?;
        let n = x.dim(0);
        if n == 0 {
            return Err(Error::EmptyInput("training split".into()));
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng_for(config.seed, stream::SHUFFLE, epoch as u64));
        let mut total = 0.0;
        for batch in order.chunks(config.batch_size) {
            let bx = gather_rows(&x, batch)?;
            let by = gather_rows(&y, batch)?;
            let (loss, grads) = model.loss_and_grad(&bx, &by)?;
            if !loss.is_finite() || !grads.all_finite() {
                return Err(non_finite("training loss or gradient", epoch));
            }
            optimizer.apply(model.params_mut(), &grads)?;
            total += loss * batch.len() as f64;
        }
        let train_loss = total / n as f64;
        let validation_loss = mean_loss(model, &val_x, &val_y, 256)?;
        if !validation_loss.is_finite() {
            return Err(non_finite("validation loss", epoch));
        }
        history.epochs.push(EpochRecord {
            epoch,
            train_loss,
            validation_loss,
            wall_time_s: started.elapsed().as_secs_f64(),
        });
        match stopper.observe(epoch, validation_loss) {
            StopDecision::Improved => best = (model.params().clone(), optimizer.clone()),
            StopDecision::Continue => {}
            StopDecision::Stop => break,
        }
    }
    history.stopping_epoch = history.epochs.len();
    history.best_epoch = stopper.best_epoch();
    *model.params_mut() = best.0;
    Ok((history, best.1))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_hyperparameters() {
        let w = TrainConfig::wavenet();
        assert_eq!(
            (w.optimizer, w.learning_rate, w.loss),
            (OptimizerKind::Adam, 2e-4, LossKind::Bce)
        );
        let l = TrainConfig::lstm();
        assert_eq!((l.optimizer, l.learning_rate), (OptimizerKind::Rmsprop, 1e-3));
        let u = TrainConfig::unet();
        assert_eq!(
            (u.optimizer, u.learning_rate, u.loss),
            (OptimizerKind::Adam, 2e-4, LossKind::Mae)
        );
        assert_eq!(u.batch_size, 4);
        for c in [w, l, u] {
            assert_eq!((c.max_epochs, c.patience), (200, 10));
        }
    }

    #[test]
    fn invalid_configs_name_their_key() {
        let bad = TrainConfig {
            patience: 0,
            ..TrainConfig::wavenet()
        };
        assert!(bad.validate().unwrap_err().to_string().contains("patience"));
        let bad = TrainConfig {
            learning_rate: 0.0,
            ..TrainConfig::wavenet()
        };
        assert!(bad.validate().unwrap_err().to_string().contains("learning_rate"));
    }

    #[test]
    fn gather_picks_rows() {
        let x = Tensor::from_fn(&[4, 2, 1], |i| i as f64);
        let g = gather_rows(&x, &[3, 0]).unwrap();
        assert_eq!(g.shape(), &[2, 2, 1]);
        assert_eq!(g.data(), &[6.0, 7.0, 0.0, 1.0]);
    }
}
