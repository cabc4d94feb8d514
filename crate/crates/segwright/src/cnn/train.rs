//! Mini-batch training of the frame CNN with per-neuron binary cross-entropy.

use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::CnnModel;
use crate::error::{Error, Result};
use crate::features::SpectrogramWindow;

/// One training example: a spectrogram window with independent target bits
/// for the speech and non-speech neurons.
#[derive(Debug, Clone)]
pub struct TrainSample {
    pub window: SpectrogramWindow,
    pub speech: bool,
    pub nonspeech: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Optimizer {
    Sgd,
    Adam,
}

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub seed: u64,
    pub optimizer: Optimizer,
    /// Epoch losses are pushed here for callers that want the curve.
    pub log_progress: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            batch_size: 32,
            max_epochs: 10,
            seed: 0,
            optimizer: Optimizer::Adam,
            log_progress: false,
        }
    }
}

/// Outcome of a training run: the model plus the mean per-sample loss after
/// each epoch.
pub struct TrainOutcome {
    pub model: CnnModel,
    pub epoch_losses: Vec<f64>,
}

struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

/// Trains a fresh model on `dataset`, seeded from `cfg.seed`. If
/// `validation` is non-empty the model with the lowest validation loss over
/// the epochs is returned, otherwise the final model.
pub fn cnn_train(
    dataset: &[TrainSample],
    validation: &[TrainSample],
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if cfg.learning_rate < 0.0 || cfg.batch_size == 0 {
        return Err(Error::InvalidConfig(
            "learning_rate must be >= 0 and batch_size >= 1".into(),
        ));
    }
    let mut model = CnnModel::new_random(cfg.seed);
    train_in_place(&mut model, dataset, validation, cfg)
}

/// Same as [`cnn_train`] but continues from an existing model.
pub fn train_in_place(
    model: &mut CnnModel,
    dataset: &[TrainSample],
    validation: &[TrainSample],
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
    let n_params = model.param_count();
    let mut adam = AdamState {
        m: vec![0.0; n_params],
        v: vec![0.0; n_params],
        t: 0,
    };
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut epoch_losses = Vec::with_capacity(cfg.max_epochs);
    let mut best: Option<(f64, CnnModel)> = None;

    for epoch in 0..cfg.max_epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for (batch_idx, batch) in order.chunks(cfg.batch_size).enumerate() {
            let mut grad_sum = vec![0.0; n_params];
            let mut batch_loss = 0.0;
            // Accumulation in index order keeps runs reproducible.
            for &i in batch {
                let sample = &dataset[i];
                let cache = model.forward_cache(&sample.window.values);
                let y = [
                    if sample.speech { 1.0 } else { 0.0 },
                    if sample.nonspeech { 1.0 } else { 0.0 },
                ];
                let (loss, grad) = model.backward(&cache, y);
                batch_loss += loss;
                for (g, s) in grad.iter().zip(grad_sum.iter_mut()) {
                    *s += g;
                }
            }
            if !batch_loss.is_finite() {
                return Err(Error::NonFiniteLoss { batch: batch_idx });
            }
            epoch_loss += batch_loss;
            let scale = 1.0 / batch.len() as f64;
            for g in grad_sum.iter_mut() {
                *g *= scale;
            }
            apply_update(model, &grad_sum, cfg, &mut adam);
        }
        let mean_loss = epoch_loss / dataset.len() as f64;
        epoch_losses.push(mean_loss);
        if cfg.log_progress {
            log::info!("epoch {epoch}: mean train loss {mean_loss:.6}");
        }
        if !validation.is_empty() {
            let val_loss = mean_loss_on(model, validation);
            if best.as_ref().map_or(true, |(b, _)| val_loss < *b) {
                best = Some((val_loss, model.clone()));
            }
        }
    }

    let model = match best {
        Some((_, m)) => m,
        None => model.clone(),
    };
    Ok(TrainOutcome {
        model,
        epoch_losses,
    })
}

fn apply_update(model: &mut CnnModel, grad: &[f64], cfg: &TrainConfig, adam: &mut AdamState) {
    let mut params = model.params_flat();
    match cfg.optimizer {
        Optimizer::Sgd => {
            for (p, g) in params.iter_mut().zip(grad) {
                *p -= cfg.learning_rate * g;
            }
        }
        Optimizer::Adam => {
            let (b1, b2, eps): (f64, f64, f64) = (0.9, 0.999, 1e-8);
            adam.t += 1;
            let t = adam.t as i32;
            let corr1 = 1.0 - b1.powi(t);
            let corr2 = 1.0 - b2.powi(t);
            for i in 0..params.len() {
                adam.m[i] = b1 * adam.m[i] + (1.0 - b1) * grad[i];
                adam.v[i] = b2 * adam.v[i] + (1.0 - b2) * grad[i] * grad[i];
                let m_hat = adam.m[i] / corr1;
                let v_hat = adam.v[i] / corr2;
                params[i] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + eps);
            }
        }
    }
    model.set_params_flat(&params).expect("same length");
}

/// Mean per-sample summed BCE over a set.
pub fn mean_loss_on(model: &CnnModel, samples: &[TrainSample]) -> f64 {
    let total: f64 = samples
        .iter()
        .map(|s| {
            let cache = model.forward_cache(&s.window.values);
            let y = [
                if s.speech { 1.0 } else { 0.0 },
                if s.nonspeech { 1.0 } else { 0.0 },
            ];
            let eps = 1e-12;
            (0..2)
                .map(|i| {
                    let p = cache.output[i].clamp(eps, 1.0 - eps);
                    -(y[i] * p.ln() + (1.0 - y[i]) * (1.0 - p).ln())
                })
                .sum::<f64>()
        })
        .sum();
    total / samples.len() as f64
}
