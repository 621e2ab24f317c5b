//! Next-hour expenditure forecaster: an LSTM written from scratch, its
//! training loop, metrics, gradient verification and checkpoints.

pub mod checkpoint;
mod data;
mod gradcheck;
mod model;
mod train;

pub use data::{
    load_series_csv, samples_with, split_many, split_series, synthetic_series, window_before, write_series_csv,
    HourlySeries, Samples, Scaler, Splits, FEATURES,
};
pub use gradcheck::{analytic_gradient, compare_gradients, gradient_check, numeric_gradient, FD_STEP, REL_FLOOR};
pub use model::{Activation, Architecture, LstmModel, Trace};
pub use train::{evaluate, metrics, mse, train, ForecastMetrics, TrainConfig, TrainReport};

use crate::Result;

/// A model together with the scaling and window it was trained with.
#[derive(Clone, Debug, PartialEq)]
pub struct Forecaster {
    pub model: LstmModel,
    pub scaler: Scaler,
    pub window_hours: usize,
}

impl Forecaster {
    /// Predicted expenditure (J) for hour `next`, from the hours before it.
    pub fn predict(&self, series: &HourlySeries, next: usize) -> Result<f64> {
        let w = window_before(series, &self.scaler, next, self.window_hours)?;
        Ok(self.scaler.unscale_target(self.model.forward(&w)?))
    }

    pub fn evaluate(&self, samples: &Samples) -> Result<ForecastMetrics> {
        evaluate(&self.model, samples, &self.scaler)
    }
}

/// Chronological 70/15/15 split used across the crate.
pub const TRAIN_FRAC: f64 = 0.7;
pub const VALID_FRAC: f64 = 0.15;

/// Builds, trains and packages a model for one series.
pub fn fit(series: &HourlySeries, arch: Architecture, cfg: &TrainConfig) -> Result<(Forecaster, Splits, TrainReport)> {
    fit_pooled(std::slice::from_ref(series), arch, cfg)
}

/// One model trained on the pooled windows of several stations.
pub fn fit_pooled(
    series: &[HourlySeries],
    arch: Architecture,
    cfg: &TrainConfig,
) -> Result<(Forecaster, Splits, TrainReport)> {
    let splits = split_many(series, cfg.window_hours, TRAIN_FRAC, VALID_FRAC)?;
    let mut model = LstmModel::new(arch, cfg.seed)?;
    let report = train(&mut model, &splits, cfg)?;
    let forecaster = Forecaster {
        model,
        scaler: splits.scaler.clone(),
        window_hours: cfg.window_hours,
    };
    Ok((forecaster, splits, report))
}
