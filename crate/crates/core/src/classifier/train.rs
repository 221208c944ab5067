use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamState};
use super::network::{loss_and_gradient, LabeledInput};
use super::params::MlpParameters;
use crate::error::{Error, Result};
use crate::synth::ClientDataset;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub local_epochs: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.001,
            batch_size: 32,
            local_epochs: 5,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if self.local_epochs == 0 {
            return Err(Error::Config("local_epochs must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub params: MlpParameters,
    /// Mean minibatch loss over the final local epoch.
    pub mean_loss: f64,
    pub steps: u64,
}

/// Trains a copy of `params` on `dataset` with a fresh optimizer.
///
/// Examples are first put in a canonical order (label, then phrase), so the
/// result depends only on the dataset's contents and on `rng`, which drives
/// the per-epoch shuffles.
pub fn train_local<R: Rng + ?Sized>(
    params: &MlpParameters,
    dataset: &ClientDataset,
    config: &TrainConfig,
    rng: &mut R,
) -> Result<TrainOutcome> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::EmptyClient);
    }
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    order.sort_by(|&a, &b| {
        let (ea, eb) = (&dataset.examples[a], &dataset.examples[b]);
        (ea.label as u8, &ea.feature.source_phrase).cmp(&(eb.label as u8, &eb.feature.source_phrase))
    });

    let mut params = params.clone();
    let mut state = AdamState::new(config.learning_rate);
    let mut mean_loss = 0.0;
    let mut batch: Vec<LabeledInput> = Vec::with_capacity(config.batch_size);
    for _ in 0..config.local_epochs {
        order.shuffle(rng);
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(config.batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| {
                let e = &dataset.examples[i];
                (e.feature.values.as_slice(), e.label.target())
            }));
            let (loss, grad) = loss_and_gradient(&params, &batch);
            adam_step(&mut params, &grad, &mut state)?;
            if !params.is_finite() || !state.is_finite() {
                return Err(Error::NonFinite("parameters after optimizer step"));
            }
            epoch_loss += loss;
            batches += 1;
        }
        mean_loss = epoch_loss / batches as f64;
    }
    Ok(TrainOutcome {
        params,
        mean_loss,
        steps: state.step_count,
    })
}
