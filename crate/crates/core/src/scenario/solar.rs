//! Hourly solar harvest: CSV loading and a synthetic diurnal generator.
//!
//! The trace file is CSV with header `station,day,hour,energy_j`, stations
//! numbered from 0, days 1..=365 and hours 0..=23. Every station must cover
//! all 8760 hours exactly once.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::seeded;

pub const HOURS_PER_YEAR: usize = 24 * 365;

/// Shape of the synthetic harvest curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolarParams {
    /// Clear-sky energy harvested in the noon hour, in joules.
    pub peak_j: f64,
    /// Lower bound of the per-day cloud factor.
    pub cloud_min: f64,
    /// Upper bound of the per-day cloud factor.
    pub cloud_max: f64,
    /// Half-width of the per-hour multiplicative jitter.
    pub hourly_jitter: f64,
}

impl Default for SolarParams {
    fn default() -> Self {
        Self {
            peak_j: 1.0e6,
            cloud_min: 0.3,
            cloud_max: 1.2,
            hourly_jitter: 0.1,
        }
    }
}

impl SolarParams {
    pub fn validate(&self) -> Result<()> {
        super::positive("solar.peak_j", self.peak_j)?;
        super::non_negative("solar.cloud_min", self.cloud_min)?;
        if !(self.cloud_max >= self.cloud_min) || (1.0 + self.hourly_jitter) * self.cloud_max > 1.5 {
            return Err(Error::config(
                "solar.cloud_max",
                "need cloud_min <= cloud_max and (1 + hourly_jitter) * cloud_max <= 1.5",
            ));
        }
        if !(0.0..1.0).contains(&self.hourly_jitter) {
            return Err(Error::config("solar.hourly_jitter", "must lie in [0, 1)"));
        }
        Ok(())
    }
}

/// Clear-sky fraction of the peak for hour-of-day `h`: a half sine between 06:00 and 18:00.
pub(crate) fn clear_sky(h: usize) -> f64 {
    let mid = h as f64 + 0.5;
    if (6.0..18.0).contains(&mid) {
        (std::f64::consts::PI * (mid - 6.0) / 12.0).sin()
    } else {
        0.0
    }
}

/// Synthetic hourly harvest with default cloud statistics.
pub fn synth_solar(seed: u64, days: usize, peak_j: f64) -> Vec<f64> {
    let params = SolarParams {
        peak_j,
        ..SolarParams::default()
    };
    synth_solar_with(seed, days, &params)
}

pub(crate) fn synth_solar_with(seed: u64, days: usize, params: &SolarParams) -> Vec<f64> {
    assert!(
        days >= 1 && params.peak_j > 0.0,
        "synth_solar needs days >= 1 and peak > 0"
    );
    let mut rng = seeded(seed);
    let mut out = Vec::with_capacity(days * 24);
    for _ in 0..days {
        let cloud = if params.cloud_max > params.cloud_min {
            rng.gen_range(params.cloud_min..params.cloud_max)
        } else {
            params.cloud_min
        };
        for h in 0..24 {
            let jitter = 1.0 + params.hourly_jitter * (2.0 * rng.gen::<f64>() - 1.0);
            out.push((params.peak_j * clear_sky(h) * cloud * jitter).max(0.0));
        }
    }
    out
}

#[derive(Debug, Deserialize)]
struct SolarRow {
    station: usize,
    day: u32,
    hour: u32,
    energy_j: f64,
}

/// Loads a full-year trace per station. Gaps are reported, never interpolated.
pub fn load_solar_trace(path: &Path, station_count: usize) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let mut traces: Vec<Vec<Option<f64>>> = vec![vec![None; HOURS_PER_YEAR]; station_count];
    for record in reader.records() {
        let record = record.map_err(|e| parse_error(path, e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line());
        let row: SolarRow = record
            .deserialize(None)
            .map_err(|e| parse_error(path, line, e.to_string()))?;
        if !(1..=365).contains(&row.day) {
            return Err(parse_error(path, line, format!("day {} outside 1..=365", row.day)));
        }
        if row.hour > 23 {
            return Err(parse_error(path, line, format!("hour {} outside 0..=23", row.hour)));
        }
        if !(row.energy_j.is_finite() && row.energy_j >= 0.0) {
            return Err(parse_error(
                path,
                line,
                format!("energy {} must be finite and >= 0", row.energy_j),
            ));
        }
        if row.station >= station_count {
            return Err(Error::Shape(format!(
                "{}: line {line}: station {} but {station_count} stations expected",
                path.display(),
                row.station
            )));
        }
        let slot = &mut traces[row.station][(row.day as usize - 1) * 24 + row.hour as usize];
        if slot.is_some() {
            return Err(Error::Duplicate {
                path: path.to_path_buf(),
                line,
                station: row.station,
                day: row.day,
                hour: row.hour,
            });
        }
        *slot = Some(row.energy_j);
    }

    let mut gaps: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (s, trace) in traces.iter().enumerate() {
        for (i, v) in trace.iter().enumerate() {
            if v.is_none() {
                gaps.entry(s).or_default().push(i);
            }
        }
    }
    if !gaps.is_empty() {
        let mut msg = String::from("missing solar records:");
        for (s, hours) in &gaps {
            let shown: Vec<String> = hours
                .iter()
                .take(5)
                .map(|i| format!("day {} hour {}", i / 24 + 1, i % 24))
                .collect();
            let _ = write!(msg, " station {s}: {} missing ({})", hours.len(), shown.join(", "));
            if hours.len() > 5 {
                msg.push_str(", ...");
            }
            msg.push(';');
        }
        return Err(Error::Shape(msg));
    }
    Ok(traces
        .into_iter()
        .map(|t| t.into_iter().map(|v| v.unwrap_or_default()).collect())
        .collect())
}

/// Writes traces in the loader's format; each trace must hold whole days.
pub fn write_solar_csv(path: &Path, traces: &[Vec<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["station", "day", "hour", "energy_j"])?;
    for (s, trace) in traces.iter().enumerate() {
        for (i, e) in trace.iter().enumerate() {
            w.write_record(&[
                s.to_string(),
                (i / 24 + 1).to_string(),
                (i % 24).to_string(),
                e.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn parse_error(path: &Path, line: u64, reason: String) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        reason,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_day_bounds() {
        let s = synth_solar(1, 1, 3600.0);
        assert_eq!(s.len(), 24);
        assert_eq!(s[0], 0.0);
        assert!(s[12] > 0.0 && s[12] <= 1.5 * 3600.0);
        assert!(s.iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn seeds_differ_and_repeat() {
        let a = synth_solar(1, 3, 100.0);
        assert_eq!(a, synth_solar(1, 3, 100.0));
        assert_ne!(a, synth_solar(2, 3, 100.0));
    }

    #[test]
    fn night_hours_are_dark() {
        let s = synth_solar(5, 2, 1.0);
        for day in 0..2 {
            for h in (0..6).chain(18..24) {
                assert_eq!(s[day * 24 + h], 0.0);
            }
        }
    }
}
