//! Mini-batch gradient descent with early stopping, and forecast metrics.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::data::{Samples, Scaler, Splits};
use super::model::LstmModel;
use crate::rng::seeded;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub max_epochs: usize,
    pub early_stop_patience: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub window_hours: usize,
    pub seed: u64,
    /// Global gradient-norm ceiling per batch.
    pub clip_norm: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            max_epochs: 100,
            early_stop_patience: 10,
            batch_size: 128,
            learning_rate: 0.05,
            window_hours: 24,
            seed: 7,
            clip_norm: 5.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::config("batch_size", "must be >= 1"));
        }
        if self.window_hours == 0 {
            return Err(Error::config("window_hours", "must be >= 1"));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::config("learning_rate", "must be finite and > 0"));
        }
        if self.max_epochs == 0 {
            return Err(Error::config("max_epochs", "must be >= 1"));
        }
        if !(self.clip_norm > 0.0) {
            return Err(Error::config("clip_norm", "must be > 0"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub train_loss: Vec<f64>,
    pub valid_loss: Vec<f64>,
    pub best_epoch: usize,
    pub best_valid_loss: f64,
}

/// Mean squared error of the model on scaled samples.
pub fn mse(model: &LstmModel, samples: &Samples) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Shape("no samples".into()));
    }
    let errs: Result<Vec<f64>> = samples
        .windows
        .par_iter()
        .zip(&samples.targets)
        .map(|(w, t)| model.forward(w).map(|y| (y - t) * (y - t)))
        .collect();
    Ok(errs?.iter().sum::<f64>() / samples.len() as f64)
}

/// Trains in place and leaves the best-validation weights in `model`.
/// Without a validation split the training loss selects the weights.
pub fn train(model: &mut LstmModel, splits: &Splits, cfg: &TrainConfig) -> Result<TrainReport> {
    cfg.validate()?;
    if splits.train.is_empty() {
        return Err(Error::Shape("empty training split".into()));
    }
    let mut rng = seeded(cfg.seed);
    let hidden = model.architecture().hidden_units;
    let keep = 1.0 - model.architecture().dropout_rate;
    let n_params = model.param_count();
    let mut order: Vec<usize> = (0..splits.train.len()).collect();
    let mut report = TrainReport {
        best_valid_loss: f64::INFINITY,
        ..TrainReport::default()
    };
    let mut best = model.params.clone();
    let mut stale = 0;

    for epoch in 0..cfg.max_epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let masks: Vec<Option<Vec<f64>>> = batch
                .iter()
                .map(|_| {
                    (keep < 1.0).then(|| {
                        (0..hidden)
                            .map(|_| if rng.gen::<f64>() < keep { 1.0 / keep } else { 0.0 })
                            .collect()
                    })
                })
                .collect();
            let model_ref = &*model;
            let per_sample: Vec<Result<(f64, Vec<f64>)>> = batch
                .par_iter()
                .zip(&masks)
                .map(|(&i, mask)| {
                    let w = &splits.train.windows[i];
                    let tr = model_ref.trace(w, mask.as_deref())?;
                    let err = tr.output - splits.train.targets[i];
                    let mut g = vec![0.0; n_params];
                    model_ref.backward(w, &tr, 2.0 * err, &mut g);
                    Ok((err * err, g))
                })
                .collect();
            let mut grad = vec![0.0; n_params];
            for item in per_sample {
                let (loss, g) = item?;
                epoch_loss += loss;
                for (a, b) in grad.iter_mut().zip(g) {
                    *a += b;
                }
            }
            let scale = 1.0 / batch.len() as f64;
            let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt() * scale;
            if !norm.is_finite() {
                return Err(Error::Divergence {
                    epoch,
                    reason: "non-finite gradient".into(),
                });
            }
            let step = cfg.learning_rate
                * scale
                * if norm > cfg.clip_norm {
                    cfg.clip_norm / norm
                } else {
                    1.0
                };
            for (p, g) in model.params.iter_mut().zip(&grad) {
                *p -= step * g;
            }
        }
        let train_loss = epoch_loss / splits.train.len() as f64;
        if !train_loss.is_finite() {
            return Err(Error::Divergence {
                epoch,
                reason: format!("training loss {train_loss}"),
            });
        }
        report.train_loss.push(train_loss);
        let valid_loss = if splits.valid.is_empty() {
            mse(model, &splits.train)?
        } else {
            mse(model, &splits.valid)?
        };
        if !valid_loss.is_finite() {
            return Err(Error::Divergence {
                epoch,
                reason: format!("validation loss {valid_loss}"),
            });
        }
        report.valid_loss.push(valid_loss);
        if valid_loss < report.best_valid_loss {
            report.best_valid_loss = valid_loss;
            report.best_epoch = epoch;
            best.clone_from(&model.params);
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.early_stop_patience {
                break;
            }
        }
    }
    model.params = best;
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForecastMetrics {
    pub rmse: f64,
    pub mae: f64,
    /// `None` when the targets have zero variance.
    pub r2: Option<f64>,
}

impl std::fmt::Display for ForecastMetrics {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "RMSE {:.6}  MAE {:.6}  R2 ", self.rmse, self.mae)?;
        match self.r2 {
            Some(r2) => write!(f, "{r2:.6}"),
            None => write!(f, "undefined (constant targets)"),
        }
    }
}

pub fn metrics(predicted: &[f64], actual: &[f64]) -> Result<ForecastMetrics> {
    if actual.is_empty() {
        return Err(Error::Shape("empty evaluation set".into()));
    }
    if predicted.len() != actual.len() {
        return Err(Error::Shape(format!(
            "{} predictions for {} targets",
            predicted.len(),
            actual.len()
        )));
    }
    let n = actual.len() as f64;
    let mean = actual.iter().sum::<f64>() / n;
    let (mut sse, mut sae, mut sst) = (0.0, 0.0, 0.0);
    for (p, a) in predicted.iter().zip(actual) {
        sse += (p - a) * (p - a);
        sae += (p - a).abs();
        sst += (a - mean) * (a - mean);
    }
    Ok(ForecastMetrics {
        rmse: (sse / n).sqrt(),
        mae: sae / n,
        r2: (sst > 0.0).then(|| 1.0 - sse / sst),
    })
}

/// Metrics in the target's original units.
pub fn evaluate(model: &LstmModel, samples: &Samples, scaler: &Scaler) -> Result<ForecastMetrics> {
    let predicted: Result<Vec<f64>> = samples
        .windows
        .par_iter()
        .map(|w| model.forward(w).map(|z| scaler.unscale_target(z)))
        .collect();
    let actual: Vec<f64> = samples.targets.iter().map(|&z| scaler.unscale_target(z)).collect();
    metrics(&predicted?, &actual)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn metric_fixtures() {
        let m = metrics(&[1.0, 2.0, 4.0], &[1.0, 2.0, 3.0]).unwrap();
        assert!((m.rmse - (1.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert!((m.mae - 1.0 / 3.0).abs() < 1e-15);
        assert!((m.r2.unwrap() - 0.5).abs() < 1e-15);

        let perfect = metrics(&[3.0, -1.0], &[3.0, -1.0]).unwrap();
        assert_eq!((perfect.rmse, perfect.mae, perfect.r2), (0.0, 0.0, Some(1.0)));

        let baseline = metrics(&[2.0; 3], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(baseline.r2, Some(0.0));

        assert_eq!(metrics(&[1.0, 2.0], &[5.0, 5.0]).unwrap().r2, None);
        assert!(metrics(&[], &[]).is_err());
        assert!(metrics(&[1.0], &[1.0, 2.0]).is_err());
    }

    proptest! {
        #[test]
        fn rmse_dominates_mae(pairs in prop::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 1..50)) {
            let (p, a): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let m = metrics(&p, &a).unwrap();
            prop_assert!(m.rmse + 1e-9 >= m.mae && m.mae >= 0.0);
            if let Some(r2) = m.r2 {
                prop_assert!(r2 <= 1.0);
            }
        }
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        for bad in [
            TrainConfig {
                batch_size: 0,
                ..TrainConfig::default()
            },
            TrainConfig {
                window_hours: 0,
                ..TrainConfig::default()
            },
            TrainConfig {
                learning_rate: 0.0,
                ..TrainConfig::default()
            },
        ] {
            assert!(matches!(bad.validate(), Err(Error::Config { .. })));
        }
    }
}
