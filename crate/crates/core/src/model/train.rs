//! Mini-batch Adam with early stopping.

use std::sync::atomic::{AtomicUsize, Ordering};

use ndarray::{Axis, Zip};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::mlp::{Dense, Mlp, MlpConfig};
use crate::data::{Dataset, TargetVector};
use crate::error::{invalid, Error, Result};
use crate::loss::LossKind;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EarlyStopping {
    /// Epochs without sufficient improvement before stopping.
    pub patience: usize,
    /// Improvement smaller than this does not reset the patience counter.
    pub min_delta: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub step_size: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub early_stopping: Option<EarlyStopping>,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            step_size: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            batch_size: 32,
            max_epochs: 50,
            early_stopping: Some(EarlyStopping { patience: 5, min_delta: 1e-2 }),
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0) {
            return Err(invalid("step size must be positive"));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(b > 0.0 && b < 1.0) {
                return Err(invalid(format!("{name} must lie in (0, 1)")));
            }
        }
        if self.batch_size == 0 {
            return Err(invalid("batch size must be at least 1"));
        }
        if self.max_epochs == 0 {
            return Err(invalid("max_epochs must be at least 1"));
        }
        if let Some(es) = self.early_stopping {
            if es.patience == 0 {
                return Err(invalid("early-stopping patience must be at least 1"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub hidden: Vec<usize>,
    /// Seeds both the initialiser and the epoch shuffles.
    pub seed: u64,
    pub adam: AdamConfig,
    pub loss: LossKind,
    /// Reweight cross-entropy by inverse class frequency on the training set.
    pub class_weighting: bool,
}

impl TrainConfig {
    pub fn regression(hidden: Vec<usize>, seed: u64) -> Self {
        TrainConfig { hidden, seed, adam: AdamConfig::default(), loss: LossKind::SquaredError, class_weighting: false }
    }

    pub fn classification(hidden: Vec<usize>, seed: u64) -> Self {
        TrainConfig { hidden, seed, adam: AdamConfig::default(), loss: LossKind::CrossEntropy, class_weighting: false }
    }

    pub fn mlp_config(&self, data: &Dataset) -> MlpConfig {
        MlpConfig::for_targets(data.x.width(), self.hidden.clone(), &data.y)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub validation_loss: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    /// 1-based epoch whose parameters were kept.
    pub best_epoch: usize,
    pub best_validation_loss: f64,
    pub stopped_early: bool,
    /// Loss actually optimised (class weights filled in when requested).
    pub loss: LossKind,
}

#[derive(Clone, Debug)]
pub struct Trained {
    pub model: Mlp,
    pub history: TrainHistory,
}

/// Inverse class frequency weights `n / (C · n_c)`; empty classes get weight 1.
pub fn inverse_frequency_weights(y: &TargetVector) -> Option<Vec<f64>> {
    let counts = y.class_counts()?;
    let n = y.len() as f64;
    let c = counts.len() as f64;
    Some(counts.iter().map(|&k| if k == 0 { 1.0 } else { n / (c * k as f64) }).collect())
}

struct AdamState {
    m: Vec<Dense>,
    v: Vec<Dense>,
    t: i32,
}

impl AdamState {
    fn new(model: &Mlp) -> Self {
        let zeros: Vec<Dense> = model
            .layers()
            .iter()
            .map(|l| Dense { weights: l.weights.mapv(|_| 0.0), bias: l.bias.mapv(|_| 0.0) })
            .collect();
        AdamState { m: zeros.clone(), v: zeros, t: 0 }
    }

    fn step(&mut self, model: &mut Mlp, grads: &[Dense], cfg: &AdamConfig) {
        self.t += 1;
        let (b1, b2) = (cfg.beta1, cfg.beta2);
        let lr = cfg.step_size;
        let c1 = 1.0 - b1.powi(self.t);
        let c2 = 1.0 - b2.powi(self.t);
        let update = |p: f64, g: f64, m: &mut f64, v: &mut f64| {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            p - lr * (*m / c1) / ((*v / c2).sqrt() + cfg.epsilon)
        };
        for (((layer, g), m), v) in model.layers_mut().iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            Zip::from(&mut layer.weights).and(&g.weights).and(&mut m.weights).and(&mut v.weights).for_each(
                |p, &g, m, v| *p = update(*p, g, m, v),
            );
            Zip::from(&mut layer.bias).and(&g.bias).and(&mut m.bias).and(&mut v.bias).for_each(
                |p, &g, m, v| *p = update(*p, g, m, v),
            );
        }
    }
}

static FITS: AtomicUsize = AtomicUsize::new(0);

/// Number of [`train`] calls made by this process so far.
pub fn fit_count() -> usize {
    FITS.load(Ordering::Relaxed)
}

/// Trains a fresh network on `train`, monitoring `validation` each epoch, and
/// returns the parameters from the epoch with the lowest validation loss.
pub fn train(cfg: &TrainConfig, train: &Dataset, validation: &Dataset) -> Result<Trained> {
    FITS.fetch_add(1, Ordering::Relaxed);
    cfg.adam.validate()?;
    if train.is_empty() || validation.is_empty() {
        return Err(Error::Empty("training or validation set".into()));
    }
    if train.x.width() != validation.x.width() {
        return Err(Error::DimensionMismatch { expected: train.x.width(), found: validation.x.width() });
    }
    let loss = match (&cfg.loss, cfg.class_weighting) {
        (LossKind::CrossEntropy, true) => LossKind::WeightedCrossEntropy(
            inverse_frequency_weights(&train.y).ok_or_else(|| invalid("class weighting needs class targets"))?,
        ),
        (l, _) => l.clone(),
    };
    loss.validate()?;

    let mut model = Mlp::new(cfg.mlp_config(train), cfg.seed)?;
    let mut adam = AdamState::new(&model);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5DEE_CE66_D1CE_5EED);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let x = train.x.values();

    let mut epochs = Vec::new();
    let mut best = (f64::INFINITY, 0usize, model.clone());
    let mut reference = f64::INFINITY;
    let mut wait = 0;
    let mut stopped_early = false;

    for epoch in 1..=cfg.adam.max_epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(cfg.adam.batch_size) {
            let xb = x.select(Axis(0), batch);
            let yb = train.y.select(batch);
            let (value, grads) = model.gradients(xb.view(), &yb, &loss).map_err(|e| match e {
                Error::Diverged { detail, .. } => Error::Diverged { epoch, detail },
                other => other,
            })?;
            total += value * batch.len() as f64;
            adam.step(&mut model, &grads.layers, &cfg.adam);
        }
        let train_loss = total / train.len() as f64;
        let validation_loss = model
            .mean_loss(validation.x.values(), &validation.y, &loss)
            .map_err(|e| Error::Diverged { epoch, detail: e.to_string() })?;
        if !train_loss.is_finite() || !validation_loss.is_finite() {
            return Err(Error::Diverged { epoch, detail: format!("train {train_loss}, validation {validation_loss}") });
        }
        log::debug!("epoch {epoch}: train {train_loss:.6} validation {validation_loss:.6}");
        epochs.push(EpochRecord { epoch, train_loss, validation_loss });

        if validation_loss < best.0 {
            best = (validation_loss, epoch, model.clone());
        }
        if let Some(es) = cfg.adam.early_stopping {
            if validation_loss < reference - es.min_delta {
                reference = validation_loss;
                wait = 0;
            } else {
                wait += 1;
                if wait >= es.patience {
                    stopped_early = true;
                    break;
                }
            }
        }
    }

    let (best_validation_loss, best_epoch, model) = best;
    Ok(Trained {
        model,
        history: TrainHistory { epochs, best_epoch, best_validation_loss, stopped_early, loss },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{DesignMatrix, FeatureSchema};
    use ndarray::Array2;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn linear_data(n: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let feats = Array2::from_shape_simple_fn((n, 1), || rng.sample::<f64, _>(StandardNormal));
        let y: Vec<f64> = feats.column(0).iter().map(|v| 2.0 + v + 0.01 * rng.sample::<f64, _>(StandardNormal)).collect();
        let x = DesignMatrix::with_intercept(feats.view(), FeatureSchema::numeric(1)).unwrap();
        Dataset::new(x, TargetVector::regression(y)).unwrap()
    }

    #[test]
    fn learns_a_line() {
        let (tr, va) = (linear_data(2000, 1), linear_data(500, 2));
        let mut cfg = TrainConfig::regression(vec![8], 3);
        cfg.adam.max_epochs = 30;
        cfg.adam.early_stopping = None;
        let out = train(&cfg, &tr, &va).unwrap();
        let mse = out.model.mean_loss(tr.x.values(), &tr.y, &LossKind::SquaredError).unwrap();
        assert!(mse < 0.01, "mse {mse}");
    }

    #[test]
    fn zero_epochs_rejected() {
        let d = linear_data(10, 1);
        let mut cfg = TrainConfig::regression(vec![2], 0);
        cfg.adam.max_epochs = 0;
        assert!(train(&cfg, &d, &d).is_err());
    }

    #[test]
    fn deterministic_given_seed() {
        let (tr, va) = (linear_data(300, 4), linear_data(100, 5));
        let mut cfg = TrainConfig::regression(vec![4, 3], 9);
        cfg.adam.max_epochs = 3;
        let a = train(&cfg, &tr, &va).unwrap();
        let b = train(&cfg, &tr, &va).unwrap();
        assert_eq!(a.model.flatten(), b.model.flatten());
        assert_eq!(a.history, b.history);
    }

    #[test]
    fn keeps_best_epoch() {
        let (tr, va) = (linear_data(200, 6), linear_data(50, 7));
        let mut cfg = TrainConfig::regression(vec![16], 2);
        cfg.adam.step_size = 0.05;
        cfg.adam.max_epochs = 25;
        cfg.adam.early_stopping = Some(EarlyStopping { patience: 3, min_delta: 1e-3 });
        let out = train(&cfg, &tr, &va).unwrap();
        let min = out.history.epochs.iter().map(|e| e.validation_loss).fold(f64::INFINITY, f64::min);
        assert_eq!(out.history.best_validation_loss, min);
        let returned = out.model.mean_loss(va.x.values(), &va.y, &LossKind::SquaredError).unwrap();
        assert_eq!(returned, min);
    }

    #[test]
    fn first_layer_moves_after_a_step() {
        let d = linear_data(32, 8);
        let mut cfg = TrainConfig::regression(vec![4], 1);
        cfg.adam.max_epochs = 1;
        cfg.adam.early_stopping = None;
        let init = Mlp::new(cfg.mlp_config(&d), cfg.seed).unwrap();
        let out = train(&cfg, &d, &d).unwrap();
        assert_ne!(init.layers()[0].weights, out.model.layers()[0].weights);
    }

    #[test]
    fn inverse_frequency() {
        let y = TargetVector::classification(vec![0, 0, 0, 1], 2).unwrap();
        assert_eq!(inverse_frequency_weights(&y).unwrap(), vec![4.0 / 6.0, 2.0]);
    }
}
