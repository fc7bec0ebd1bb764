//! AdamW with decoupled weight decay and the epoch training loop.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::model::EncoderModel;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 32,
            epochs: 5,
            learning_rate: 2e-5,
            weight_decay: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Error::InvalidConfig(m.to_string());
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(bad("batch_size and epochs must be positive"));
        }
        if self.learning_rate <= 0.0 {
            return Err(bad("learning_rate must be positive"));
        }
        if self.weight_decay < 0.0 {
            return Err(bad("weight_decay must be non-negative"));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(bad("betas must be in [0,1)"));
        }
        if self.eps <= 0.0 {
            return Err(bad("eps must be positive"));
        }
        Ok(())
    }
}

/// AdamW state; decay is applied directly to the weights, not the gradient.
pub struct AdamW {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
    config: TrainConfig,
    /// per-parameter decay flags (layer norms and biases are excluded)
    decay: Vec<bool>,
}

impl AdamW {
    pub fn new(model: &EncoderModel, config: TrainConfig) -> Result<AdamW> {
        config.validate()?;
        let n = model.n_params();
        let mut decay = vec![false; n];
        for info in model.param_infos() {
            if info.decay {
                decay[info.offset..info.offset + info.len].fill(true);
            }
        }
        Ok(AdamW {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
            config,
            decay,
        })
    }

    pub fn step(&mut self, model: &mut EncoderModel, grad: &[f64]) -> Result<()> {
        if grad.len() != model.n_params() {
            return Err(Error::LengthMismatch {
                left: grad.len(),
                right: model.n_params(),
            });
        }
        self.t += 1;
        let c = &self.config;
        let bc1 = 1.0 - c.beta1.powi(self.t as i32);
        let bc2 = 1.0 - c.beta2.powi(self.t as i32);
        for i in 0..grad.len() {
            let g = grad[i];
            self.m[i] = c.beta1 * self.m[i] + (1.0 - c.beta1) * g;
            self.v[i] = c.beta2 * self.v[i] + (1.0 - c.beta2) * g * g;
            let mhat = self.m[i] / bc1;
            let vhat = self.v[i] / bc2;
            let mut update = c.learning_rate * mhat / (vhat.sqrt() + c.eps);
            if self.decay[i] {
                update += c.learning_rate * c.weight_decay * model.params[i];
            }
            model.params[i] -= update;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossCurve {
    /// mean minibatch loss per epoch (losses measured before each update)
    pub train: Vec<f64>,
    /// full-pass validation loss after each epoch
    pub val: Vec<f64>,
}

pub type EncodedSet = Vec<(Vec<usize>, Vec<u8>)>;

/// Seeded mini-batch training; returns the loss curve. Batches are drawn from
/// a fresh shuffle each epoch.
pub fn train(
    model: &mut EncoderModel,
    train_set: &EncodedSet,
    train_labels: &[u8],
    val_set: &EncodedSet,
    val_labels: &[u8],
    config: &TrainConfig,
) -> Result<LossCurve> {
    config.validate()?;
    if train_set.is_empty() {
        return Err(Error::EmptyInput("training set".into()));
    }
    if train_set.len() != train_labels.len() {
        return Err(Error::LengthMismatch {
            left: train_set.len(),
            right: train_labels.len(),
        });
    }
    let mut opt = AdamW::new(model, config.clone())?;
    let mut curve = LossCurve {
        train: Vec::new(),
        val: Vec::new(),
    };
    for epoch in 0..config.epochs {
        let mut order: Vec<usize> = (0..train_set.len()).collect();
        let mut shuffle_rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(epoch as u64));
        order.shuffle(&mut shuffle_rng);
        let mut dropout_rng =
            ChaCha8Rng::seed_from_u64(config.seed.wrapping_mul(0x9e3779b9).wrapping_add(epoch as u64));
        let mut total = 0.0;
        let mut n_batches = 0usize;
        for chunk in order.chunks(config.batch_size) {
            let batch: EncodedSet = chunk.iter().map(|&i| train_set[i].clone()).collect();
            let labels: Vec<u8> = chunk.iter().map(|&i| train_labels[i]).collect();
            let (loss, grad) = model.loss_and_grad(&batch, &labels, Some(&mut dropout_rng))?;
            opt.step(model, &grad)?;
            total += loss;
            n_batches += 1;
        }
        curve.train.push(total / n_batches as f64);
        if val_set.is_empty() {
            curve.val.push(f64::NAN);
        } else {
            curve.val.push(model.loss(val_set, val_labels)?);
        }
    }
    Ok(curve)
}
