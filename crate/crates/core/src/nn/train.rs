//! Minibatch gradient descent on the dense regression head.
//!
//! Upstream layers are frozen: callers pass the pooled feature vectors the
//! backbone produces and the driving labels, and get back a fitted `Dense`
//! layer with two outputs (yaw, translation).

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::layer::Dense;
use super::model::glorot_dense;
use crate::{Error, Result};

/// Steering/velocity proxy, both components rescaled into `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriveLabel {
    pub yaw: f64,
    pub translation: f64,
}

impl DriveLabel {
    pub fn new(yaw: f64, translation: f64) -> Result<Self> {
        for v in [yaw, translation] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidParameter(alloc::format!(
                    "drive label component {v} outside [0, 1]"
                )));
            }
        }
        Ok(Self { yaw, translation })
    }

    /// Min-max rescales raw `(yaw, translation)` pairs per component into `[0, 1]`.
    /// A constant component maps to 0.
    pub fn rescale(raw: &[(f64, f64)]) -> Result<Vec<Self>> {
        if raw.is_empty() {
            return Err(Error::EmptyInput);
        }
        let range = |f: fn(&(f64, f64)) -> f64| {
            raw.iter()
                .map(f)
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                    (lo.min(v), hi.max(v))
                })
        };
        let (ylo, yhi) = range(|p| p.0);
        let (tlo, thi) = range(|p| p.1);
        let unit = |v: f64, lo: f64, hi: f64| {
            if hi > lo {
                ((v - lo) / (hi - lo)).clamp(0.0, 1.0)
            } else {
                0.0
            }
        };
        raw.iter()
            .map(|&(y, t)| Self::new(unit(y, ylo, yhi), unit(t, tlo, thi)))
            .collect()
    }

    pub fn as_array(&self) -> [f64; 2] {
        [self.yaw, self.translation]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// Inverted-dropout rate applied to features during training. Off by default.
    pub dropout: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 5,
            batch_size: 8,
            learning_rate: 1e-3,
            seed: 0,
            dropout: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub head: Dense,
    /// Full-dataset MSE after each epoch.
    pub loss_trace: Vec<f64>,
}

/// Trains a Glorot-initialised head seeded from `config.seed`.
pub fn train_head(
    features: &[Vec<f64>],
    targets: &[DriveLabel],
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    let dim = check_dataset(features, targets)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let init = glorot_dense(dim, 2, &mut rng);
    fit(init, features, targets, config, &mut rng)
}

/// Same as [`train_head`] but starting from the given weights.
pub fn train_head_from(
    init: Dense,
    features: &[Vec<f64>],
    targets: &[DriveLabel],
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    let dim = check_dataset(features, targets)?;
    if init.in_features != dim || init.out_features != 2 {
        return Err(Error::InvalidParameter(alloc::format!(
            "initial head is {}x{}, expected {dim}x2",
            init.in_features,
            init.out_features
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    fit(init, features, targets, config, &mut rng)
}

fn check_dataset(features: &[Vec<f64>], targets: &[DriveLabel]) -> Result<usize> {
    if features.is_empty() {
        return Err(Error::EmptyInput);
    }
    if features.len() != targets.len() {
        return Err(Error::LengthMismatch {
            expected: features.len(),
            actual: targets.len(),
        });
    }
    let dim = features[0].len();
    if dim == 0 {
        return Err(Error::ZeroDimension);
    }
    if let Some(bad) = features.iter().find(|f| f.len() != dim) {
        return Err(Error::LengthMismatch {
            expected: dim,
            actual: bad.len(),
        });
    }
    Ok(dim)
}

fn fit(
    mut head: Dense,
    features: &[Vec<f64>],
    targets: &[DriveLabel],
    config: &TrainConfig,
    rng: &mut ChaCha8Rng,
) -> Result<TrainOutcome> {
    if config.batch_size == 0 || config.epochs == 0 {
        return Err(Error::InvalidParameter("epochs and batch size must be positive".into()));
    }
    if !(config.learning_rate > 0.0) {
        return Err(Error::InvalidParameter("learning rate must be positive".into()));
    }
    if let Some(rate) = config.dropout {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::InvalidParameter("dropout rate outside [0, 1)".into()));
        }
    }
    let mut order: Vec<usize> = (0..features.len()).collect();
    let mut loss_trace = Vec::with_capacity(config.epochs);
    let mut dropped: Vec<Vec<f64>> = Vec::new();
    for _ in 0..config.epochs {
        order.shuffle(rng);
        for batch in order.chunks(config.batch_size) {
            let grad = match config.dropout {
                Some(rate) if rate > 0.0 => {
                    let keep = 1.0 - rate;
                    dropped.clear();
                    for &i in batch {
                        dropped.push(
                            features[i]
                                .iter()
                                .map(|&v| if rng.gen::<f64>() < rate { 0.0 } else { v / keep })
                                .collect(),
                        );
                    }
                    let idx: Vec<usize> = (0..batch.len()).collect();
                    let local: Vec<DriveLabel> = batch.iter().map(|&i| targets[i]).collect();
                    mse_gradient(&head, &dropped, &local, &idx)
                }
                _ => mse_gradient(&head, features, targets, batch),
            };
            for (w, g) in head.weights.iter_mut().zip(&grad.weights) {
                *w -= config.learning_rate * g;
            }
            for (b, g) in head.bias.iter_mut().zip(&grad.bias) {
                *b -= config.learning_rate * g;
            }
        }
        let loss = mse_loss(&head, features, targets);
        if !loss.is_finite() {
            return Err(Error::InvalidParameter("training diverged (non-finite loss)".into()));
        }
        loss_trace.push(loss);
    }
    Ok(TrainOutcome { head, loss_trace })
}

/// Mean over samples and both outputs of the squared error.
pub fn mse_loss(head: &Dense, features: &[Vec<f64>], targets: &[DriveLabel]) -> f64 {
    let mut total = 0.0;
    for (x, t) in features.iter().zip(targets) {
        let y = head.apply(x);
        for (p, q) in y.iter().zip(t.as_array()) {
            total += (p - q) * (p - q);
        }
    }
    total / (features.len() * 2) as f64
}

/// Analytic gradient of the batch MSE (same normalisation as [`mse_loss`])
/// over the samples at `indices`. Returned as a `Dense` holding the partials.
pub fn mse_gradient(
    head: &Dense,
    features: &[Vec<f64>],
    targets: &[DriveLabel],
    indices: &[usize],
) -> Dense {
    let mut grad = Dense::zeros(head.in_features, head.out_features);
    let scale = 2.0 / (indices.len() * head.out_features) as f64;
    let mut residual = vec![0.0; head.out_features];
    for &i in indices {
        let x = &features[i];
        let y = head.apply(x);
        for ((r, p), q) in residual.iter_mut().zip(&y).zip(targets[i].as_array()) {
            *r = (p - q) * scale;
        }
        for (j, &xj) in x.iter().enumerate() {
            let row = &mut grad.weights[j * head.out_features..(j + 1) * head.out_features];
            for (g, r) in row.iter_mut().zip(&residual) {
                *g += xj * r;
            }
        }
        for (g, r) in grad.bias.iter_mut().zip(&residual) {
            *g += r;
        }
    }
    grad
}
