//! `evaluate`: RMSE, MAE and R² of a checkpoint on held-out hours.

use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use uavgrid_core::forecaster::{
    checkpoint, load_series_csv, samples_with, synthetic_series, HourlySeries, TRAIN_FRAC, VALID_FRAC,
};

use crate::manifest::{read_text, write_json};
use crate::CliError;

/// Days in the synthetic task; its last 15% of hours are held out.
pub const SYNTHETIC_DAYS: usize = 120;

pub fn load_series(data: Option<&Path>, synthetic: bool, seed: u64) -> Result<HourlySeries> {
    match (data, synthetic) {
        (Some(p), _) => {
            if !p.exists() {
                return Err(CliError::Input(format!("data file {} does not exist", p.display())).into());
            }
            Ok(load_series_csv(p).with_context(|| format!("data {}", p.display()))?)
        }
        (None, true) => Ok(synthetic_series(seed, SYNTHETIC_DAYS)),
        (None, false) => Err(CliError::Input("no data: pass --data FILE or --synthetic".into()).into()),
    }
}

#[derive(Serialize)]
struct Report<'a> {
    model: &'a Path,
    data: Option<&'a Path>,
    samples: usize,
    rmse: f64,
    mae: f64,
    r2: Option<f64>,
}

pub fn run(model: &Path, data: Option<&Path>, synthetic: bool, seed: u64, out: &Path) -> Result<()> {
    let text = read_text(model, "model")?;
    let f = checkpoint::from_json(&text).map_err(|e| CliError::Artifact(format!("model {}: {e}", model.display())))?;
    let series = load_series(data, synthetic, seed)?;
    // A data file is scored whole; the synthetic task only on its test tail.
    let from = if data.is_some() {
        f.window_hours
    } else {
        (series.len() as f64 * (TRAIN_FRAC + VALID_FRAC)).round() as usize
    };
    let samples = samples_with(&series, &f.scaler, f.window_hours, from)?;
    let m = f.evaluate(&samples)?;
    println!("samples {}", samples.len());
    println!("RMSE {:.6}", m.rmse);
    println!("MAE {:.6}", m.mae);
    match m.r2 {
        Some(r2) => println!("R2 {r2:.6}"),
        None => println!("R2 undefined (constant target)"),
    }
    write_json(
        out,
        &Report {
            model,
            data,
            samples: samples.len(),
            rmse: m.rmse,
            mae: m.mae,
            r2: m.r2,
        },
    )
}
