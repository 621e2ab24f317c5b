//! JSON checkpoint of a trained forecaster.
//!
//! Layout (version 1):
//! ```text
//! {
//!   "format": "uavgrid-lstm",
//!   "version": 1,
//!   "architecture": { input_dim, hidden_units, dense_layers, activation, dropout_rate, forget_bias },
//!   "window_hours": 24,
//!   "scaler": { "mean": [4 floats], "std": [4 floats] },
//!   "params": [flat parameter vector, order documented in `model`]
//! }
//! ```
//! Floats are written in shortest round-trip form, so a save/load cycle is
//! bit-exact.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::data::Scaler;
use super::model::{Architecture, LstmModel};
use super::Forecaster;
use crate::{Error, Result};

pub const FORMAT: &str = "uavgrid-lstm";
pub const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Checkpoint {
    format: String,
    version: u32,
    architecture: Architecture,
    window_hours: usize,
    scaler: Scaler,
    params: Vec<f64>,
}

pub fn to_json(f: &Forecaster) -> Result<String> {
    let ck = Checkpoint {
        format: FORMAT.into(),
        version: VERSION,
        architecture: f.model.architecture().clone(),
        window_hours: f.window_hours,
        scaler: f.scaler.clone(),
        params: f.model.params.clone(),
    };
    Ok(serde_json::to_string_pretty(&ck)?)
}

/// Every failure here is a [`Error::Checkpoint`], whatever its cause.
pub fn from_json(text: &str) -> Result<Forecaster> {
    let ck: Checkpoint = serde_json::from_str(text).map_err(|e| Error::Checkpoint(e.to_string()))?;
    if ck.format != FORMAT || ck.version != VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported checkpoint {} v{}, expected {FORMAT} v{VERSION}",
            ck.format, ck.version
        )));
    }
    if ck.window_hours == 0 {
        return Err(Error::Checkpoint("window_hours must be >= 1".into()));
    }
    ck.scaler.validate().map_err(|e| Error::Checkpoint(e.to_string()))?;
    if ck.params.iter().any(|p| !p.is_finite()) {
        return Err(Error::Checkpoint("non-finite parameter".into()));
    }
    let model = LstmModel::from_params(ck.architecture, ck.params).map_err(|e| Error::Checkpoint(e.to_string()))?;
    if model.architecture().input_dim != super::FEATURES {
        return Err(Error::Checkpoint(format!(
            "model expects {} features, data provides {}",
            model.architecture().input_dim,
            super::FEATURES
        )));
    }
    Ok(Forecaster {
        model,
        scaler: ck.scaler,
        window_hours: ck.window_hours,
    })
}

pub fn save(f: &Forecaster, path: &Path) -> Result<()> {
    fs::write(path, to_json(f)?)?;
    Ok(())
}

pub fn load(path: &Path) -> Result<Forecaster> {
    let text = fs::read_to_string(path).map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))?;
    from_json(&text)
}
