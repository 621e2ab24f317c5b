//! Hourly series, feature windows, scaling and chronological splits.

use std::f64::consts::PI;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::rng::seeded;
use crate::scenario::diurnal_factor;
use crate::{Error, Result};

/// Users, expenditure, sin(hour), cos(hour).
pub const FEATURES: usize = 4;

/// One station's history: active users and energy expenditure per hour.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HourlySeries {
    /// Hour of day of the first entry.
    pub start_hour: usize,
    pub users: Vec<f64>,
    pub energy_j: Vec<f64>,
}

impl HourlySeries {
    pub fn len(&self) -> usize {
        self.energy_j.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energy_j.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.users.len() != self.energy_j.len() {
            return Err(Error::Shape(format!(
                "{} user entries but {} energy entries",
                self.users.len(),
                self.energy_j.len()
            )));
        }
        if self.users.iter().chain(&self.energy_j).any(|v| !v.is_finite()) {
            return Err(Error::Domain("series contains non-finite values".into()));
        }
        Ok(())
    }

    /// Unscaled feature row for hour index `t`.
    pub fn raw_row(&self, t: usize) -> [f64; FEATURES] {
        let phase = 2.0 * PI * ((self.start_hour + t) % 24) as f64 / 24.0;
        [self.users[t], self.energy_j[t], phase.sin(), phase.cos()]
    }

    pub fn truncated(&self, hours: usize) -> Self {
        let n = hours.min(self.len());
        Self {
            start_hour: self.start_hour,
            users: self.users[..n].to_vec(),
            energy_j: self.energy_j[..n].to_vec(),
        }
    }
}

/// Clean diurnal task: users follow the daily demand curve with a per-day
/// level and 5% hourly jitter; expenditure tracks requests at a fixed
/// per-request cost with its own 5% jitter.
pub fn synthetic_series(seed: u64, days: usize) -> HourlySeries {
    let mut rng = seeded(seed);
    let hours = days * 24;
    let mut users = Vec::with_capacity(hours);
    let mut energy_j = Vec::with_capacity(hours);
    let mut level = 1.0;
    for t in 0..hours {
        if t % 24 == 0 {
            level = rng.gen_range(0.9..1.1);
        }
        let d = diurnal_factor(t % 24, 0.2) * level;
        let u = 200.0 * d * (1.0 + rng.gen_range(-0.05..0.05));
        let requests = 0.6 * u;
        users.push(u);
        energy_j.push(3000.0 * requests * (1.0 + rng.gen_range(-0.05..0.05)));
    }
    HourlySeries {
        start_hour: 0,
        users,
        energy_j,
    }
}

/// Per-feature z-score statistics, fitted on training rows only.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Scaler {
    pub fn fit(series: &HourlySeries, rows: usize) -> Result<Self> {
        Self::fit_many(&[(series, rows)])
    }

    /// Pooled statistics over the first `rows` hours of each series.
    pub fn fit_many(parts: &[(&HourlySeries, usize)]) -> Result<Self> {
        let count: usize = parts.iter().map(|(_, r)| r).sum();
        if count == 0 {
            return Err(Error::Shape("cannot fit a scaler on zero rows".into()));
        }
        let rows = || parts.iter().flat_map(|(s, r)| (0..*r).map(move |t| s.raw_row(t)));
        let mut mean = vec![0.0; FEATURES];
        for row in rows() {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= count as f64);
        let mut var = vec![0.0; FEATURES];
        for row in rows() {
            for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        // a constant feature keeps unit scale rather than dividing by zero
        let std = var
            .into_iter()
            .map(|v| {
                let s = (v / count as f64).sqrt();
                if s > 1e-12 {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Self { mean, std })
    }

    pub fn row(&self, raw: [f64; FEATURES]) -> Vec<f64> {
        raw.iter()
            .zip(&self.mean)
            .zip(&self.std)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }

    pub fn scale_target(&self, energy_j: f64) -> f64 {
        (energy_j - self.mean[1]) / self.std[1]
    }

    pub fn unscale_target(&self, z: f64) -> f64 {
        z * self.std[1] + self.mean[1]
    }

    pub fn validate(&self) -> Result<()> {
        if self.mean.len() != FEATURES || self.std.len() != FEATURES {
            return Err(Error::Shape(format!("scaler must hold {FEATURES} features")));
        }
        if self.std.iter().any(|s| !(s.is_finite() && *s > 0.0)) || self.mean.iter().any(|m| !m.is_finite()) {
            return Err(Error::Domain(
                "scaler statistics must be finite with positive spread".into(),
            ));
        }
        Ok(())
    }
}

/// Scaled windows and scaled next-hour targets.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Samples {
    pub windows: Vec<Vec<Vec<f64>>>,
    pub targets: Vec<f64>,
}

impl Samples {
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }
}

#[derive(Clone, Debug)]
pub struct Splits {
    pub train: Samples,
    pub valid: Samples,
    pub test: Samples,
    pub scaler: Scaler,
    pub window_hours: usize,
}

/// Chronological split by target hour: the first `train_frac` of hours feed
/// training targets and the scaler, the next `valid_frac` validation, the
/// rest testing.
pub fn split_series(series: &HourlySeries, window_hours: usize, train_frac: f64, valid_frac: f64) -> Result<Splits> {
    split_many(std::slice::from_ref(series), window_hours, train_frac, valid_frac)
}

/// [`split_series`] applied to each series with one pooled scaler; samples
/// are concatenated series by series.
pub fn split_many(series: &[HourlySeries], window_hours: usize, train_frac: f64, valid_frac: f64) -> Result<Splits> {
    if series.is_empty() {
        return Err(Error::Shape("no series to split".into()));
    }
    if window_hours == 0 {
        return Err(Error::config("window_hours", "must be >= 1"));
    }
    if !(train_frac > 0.0 && valid_frac >= 0.0 && train_frac + valid_frac <= 1.0) {
        return Err(Error::config(
            "split",
            "fractions must be positive and sum to at most 1",
        ));
    }
    let mut bounds = Vec::with_capacity(series.len());
    for s in series {
        s.validate()?;
        let n = s.len();
        let n_train = (n as f64 * train_frac).round() as usize;
        let n_valid_end = (n as f64 * (train_frac + valid_frac)).round() as usize;
        if n_train <= window_hours {
            return Err(Error::Shape(format!(
                "{n} hours leave no training window of {window_hours} hours"
            )));
        }
        bounds.push((n_train, n_valid_end));
    }
    let parts: Vec<(&HourlySeries, usize)> = series.iter().zip(&bounds).map(|(s, b)| (s, b.0)).collect();
    let scaler = Scaler::fit_many(&parts)?;

    let mut splits = Splits {
        train: Samples::default(),
        valid: Samples::default(),
        test: Samples::default(),
        scaler,
        window_hours,
    };
    for (s, &(n_train, n_valid_end)) in series.iter().zip(&bounds) {
        let rows: Vec<Vec<f64>> = (0..s.len()).map(|t| splits.scaler.row(s.raw_row(t))).collect();
        for target in window_hours..s.len() {
            let bucket = if target < n_train {
                &mut splits.train
            } else if target < n_valid_end {
                &mut splits.valid
            } else {
                &mut splits.test
            };
            bucket.windows.push(rows[target - window_hours..target].to_vec());
            bucket.targets.push(splits.scaler.scale_target(s.energy_j[target]));
        }
    }
    Ok(splits)
}

/// The scaled window ending just before hour `next` (exclusive).
pub fn window_before(
    series: &HourlySeries,
    scaler: &Scaler,
    next: usize,
    window_hours: usize,
) -> Result<Vec<Vec<f64>>> {
    if next < window_hours || next > series.len() {
        return Err(Error::Shape(format!(
            "need {window_hours} hours before index {next}, series has {}",
            series.len()
        )));
    }
    Ok((next - window_hours..next)
        .map(|t| scaler.row(series.raw_row(t)))
        .collect())
}

/// Every window whose target index is at least `from`, scaled with a given
/// scaler, as used when scoring a saved model on new data.
pub fn samples_with(series: &HourlySeries, scaler: &Scaler, window_hours: usize, from: usize) -> Result<Samples> {
    series.validate()?;
    let mut out = Samples::default();
    for target in from.max(window_hours)..series.len() {
        out.windows.push(window_before(series, scaler, target, window_hours)?);
        out.targets.push(scaler.scale_target(series.energy_j[target]));
    }
    if out.is_empty() {
        return Err(Error::Shape(format!(
            "{} hours hold no window of {window_hours} hours",
            series.len()
        )));
    }
    Ok(out)
}

#[derive(Deserialize)]
struct SeriesRow {
    hour: usize,
    users: f64,
    energy_j: f64,
}

/// Reads `hour,users,energy_j` rows; hours must be consecutive and the first
/// one's hour of day becomes the series start.
pub fn load_series_csv(path: &Path) -> Result<HourlySeries> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut series = HourlySeries {
        start_hour: 0,
        users: Vec::new(),
        energy_j: Vec::new(),
    };
    let mut first = None;
    for (k, row) in reader.deserialize::<SeriesRow>().enumerate() {
        let line = k as u64 + 2;
        let row = row.map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line,
            reason: e.to_string(),
        })?;
        let start = *first.get_or_insert(row.hour);
        if row.hour != start + k {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line,
                reason: format!("expected hour {}, found {}", start + k, row.hour),
            });
        }
        series.users.push(row.users);
        series.energy_j.push(row.energy_j);
    }
    series.start_hour = first.unwrap_or(0) % 24;
    series.validate()?;
    Ok(series)
}

pub fn write_series_csv(path: &Path, series: &HourlySeries) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["hour", "users", "energy_j"])?;
    for t in 0..series.len() {
        w.write_record(&[
            (series.start_hour + t).to_string(),
            series.users[t].to_string(),
            series.energy_j[t].to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_is_chronological_and_complete() {
        let s = synthetic_series(1, 10);
        let sp = split_series(&s, 24, 0.7, 0.15).unwrap();
        assert_eq!(sp.train.len() + sp.valid.len() + sp.test.len(), 240 - 24);
        assert_eq!(sp.train.len(), 168 - 24);
        // first training target is hour 24
        assert_eq!(sp.train.targets[0], sp.scaler.scale_target(s.energy_j[24]));
        assert_eq!(sp.train.windows[0].len(), 24);
        assert_eq!(
            sp.test.targets.last().copied(),
            Some(sp.scaler.scale_target(s.energy_j[239]))
        );
    }

    #[test]
    fn scaler_uses_training_rows_only() {
        let mut s = synthetic_series(2, 10);
        let before = split_series(&s, 24, 0.7, 0.15).unwrap().scaler;
        for e in &mut s.energy_j[200..] {
            *e *= 100.0;
        }
        assert_eq!(split_series(&s, 24, 0.7, 0.15).unwrap().scaler, before);
    }

    #[test]
    fn pooled_split_concatenates_and_shares_scaler() {
        let a = synthetic_series(1, 10);
        let b = synthetic_series(2, 10);
        let pooled = split_many(&[a.clone(), b.clone()], 24, 0.7, 0.15).unwrap();
        let one = split_series(&a, 24, 0.7, 0.15).unwrap();
        assert_eq!(pooled.train.len(), 2 * one.train.len());
        let both = Scaler::fit_many(&[(&a, 168), (&b, 168)]).unwrap();
        assert_eq!(pooled.scaler, both);
        assert!(split_many(&[], 24, 0.7, 0.15).is_err());
    }

    #[test]
    fn constant_feature_keeps_unit_scale() {
        let s = HourlySeries {
            start_hour: 0,
            users: vec![5.0; 48],
            energy_j: vec![7.0; 48],
        };
        let sc = Scaler::fit(&s, 48).unwrap();
        assert_eq!(sc.std[0], 1.0);
        assert_eq!(sc.scale_target(7.0), 0.0);
    }

    #[test]
    fn rejects_bad_inputs() {
        let s = synthetic_series(3, 2);
        assert!(split_series(&s, 0, 0.7, 0.1).is_err());
        assert!(split_series(&s, 40, 0.7, 0.1).is_err());
        assert!(split_series(&s, 4, 0.9, 0.2).is_err());
        let bad = HourlySeries {
            start_hour: 0,
            users: vec![1.0],
            energy_j: vec![],
        };
        assert!(bad.validate().is_err());
    }
}
