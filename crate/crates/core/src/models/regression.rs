use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{LstmRegression, TrainConfig, TrainingSet};
use crate::neural::{masked_mse, Adam};
use crate::seed::{self, stream};
use crate::{Error, Result};

/// Mean training loss of one epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossRow {
    pub epoch: usize,
    pub loss: f64,
}

/// Everything needed to continue training exactly where it stopped.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionState {
    pub net: LstmRegression,
    pub adam: Adam,
    pub epochs_done: usize,
}

impl RegressionState {
    pub fn new(eeg_dim: usize, config: &TrainConfig) -> Self {
        let mut rng = seed::rng(seed::derive(config.seed, stream::INIT, 0));
        let net = LstmRegression::new(eeg_dim, config.hidden, &mut rng);
        let adam = Adam::new(config.adam(config.lr), &net);
        Self {
            net,
            adam,
            epochs_done: 0,
        }
    }
}

/// Batch order of one epoch; the same generator then draws that epoch's corruption.
pub(crate) fn epoch_rng(config: &TrainConfig, epoch: usize) -> rand_chacha::ChaCha8Rng {
    seed::rng(seed::derive(config.seed, stream::SHUFFLE, epoch as u64))
}

pub(crate) fn shuffled(n: usize, rng: &mut impl rand::Rng) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    order
}

/// Trains (or resumes) the regressor up to `config.epochs`, calling
/// `on_epoch` after every completed epoch.
pub fn train_lstm_regression(
    data: &TrainingSet,
    config: &TrainConfig,
    resume: Option<RegressionState>,
    on_epoch: &mut dyn FnMut(&RegressionState, &LossRow) -> Result<()>,
) -> Result<(RegressionState, Vec<LossRow>)> {
    config.validate()?;
    let mut state = match resume {
        Some(s) => s,
        None => RegressionState::new(data.eeg_dim(), config),
    };
    if state.net.eeg_dim() != data.eeg_dim() {
        return Err(Error::Shape(format!(
            "model takes {}-wide EEG features, training data has {}",
            state.net.eeg_dim(),
            data.eeg_dim()
        )));
    }
    let mut log = Vec::new();
    for epoch in state.epochs_done..config.epochs {
        let mut rng = epoch_rng(config, epoch);
        let order = shuffled(data.segments().len(), &mut rng);
        let mut total = 0.0;
        let mut batches = 0;
        for (b, chunk) in order.chunks(config.batch_size).enumerate() {
            let batch = data.batch(chunk, config.noise_sigma, &mut rng);
            let (pred, cache) = state.net.forward(batch.noisy.view(), batch.eeg.view())?;
            let (loss, grad) = masked_mse(pred.view(), batch.clean.view(), &batch.lengths)?;
            if !loss.is_finite() {
                return Err(Error::NonFinite(format!(
                    "LSTM regression loss at epoch {} batch {}: {loss}",
                    epoch + 1,
                    b + 1
                )));
            }
            let grads = state.net.backward(&cache, grad.view())?;
            state.adam.step(&mut state.net, &grads).map_err(|e| {
                Error::NonFinite(format!("epoch {} batch {}: {e}", epoch + 1, b + 1))
            })?;
            total += loss;
            batches += 1;
        }
        state.epochs_done = epoch + 1;
        let row = LossRow {
            epoch: epoch + 1,
            loss: total / batches as f64,
        };
        log::debug!("lstm epoch {} loss {:.6}", row.epoch, row.loss);
        on_epoch(&state, &row)?;
        log.push(row);
    }
    Ok((state, log))
}
