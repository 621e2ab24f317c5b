//! Result series for the four figure analogues and their CSV/JSON output.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::StationHour;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeekOutage {
    pub week: usize,
    pub outage_hours: usize,
    pub station_hours: usize,
    pub outage_pct: f64,
}

impl WeekOutage {
    /// Outage station-hours over all station-hours of each (possibly partial) week.
    pub fn from_ledger(ledger: &[StationHour], stations: usize, horizon: usize) -> Vec<Self> {
        let weeks = horizon.div_ceil(168);
        let mut out: Vec<Self> = (0..weeks)
            .map(|w| {
                let hours = (horizon - 168 * w).min(168);
                Self {
                    week: w + 1,
                    outage_hours: 0,
                    station_hours: stations * hours,
                    outage_pct: 0.0,
                }
            })
            .collect();
        for row in ledger.iter().filter(|r| r.outage) {
            out[row.hour / 168].outage_hours += 1;
        }
        for w in &mut out {
            w.outage_pct = 100.0 * w.outage_hours as f64 / w.station_hours.max(1) as f64;
        }
        out
    }
}

/// Coverage at one extra-user count: the ground-only baseline and one value per drone altitude.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThroughputPoint {
    pub extra_users: u32,
    pub no_uav: f64,
    pub uav: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityPoint {
    pub density: f64,
    pub coverage_no_uav: f64,
    pub coverage_uav: f64,
}

impl DensityPoint {
    pub fn gain(&self) -> f64 {
        self.coverage_uav - self.coverage_no_uav
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FleetPoint {
    pub fleet_size: usize,
    pub outage_hours: usize,
    pub outage_events: usize,
    pub mean_time_between_outages_h: f64,
    /// Change from the previous fleet size, per added drone; zero for the first point.
    pub marginal_gain_h: f64,
}

/// The four figure analogues. Sweeps not run are left empty.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub outage_pct_per_week: Vec<WeekOutage>,
    pub altitudes_m: Vec<f64>,
    pub throughput_coverage_vs_extra_users: Vec<ThroughputPoint>,
    pub coverage_vs_density: Vec<DensityPoint>,
    pub mean_time_between_outages_vs_fleet: Vec<FleetPoint>,
}

impl MetricsReport {
    pub fn validate(&self) -> Result<()> {
        let pct_ok = |p: f64| (0.0..=100.0).contains(&p);
        let frac_ok = |f: f64| (0.0..=1.0).contains(&f);
        if !self.outage_pct_per_week.iter().all(|w| pct_ok(w.outage_pct)) {
            return Err(Error::Invariant("weekly outage percentage outside [0, 100]".into()));
        }
        if !self
            .throughput_coverage_vs_extra_users
            .iter()
            .all(|p| frac_ok(p.no_uav) && p.uav.iter().all(|&c| frac_ok(c)))
        {
            return Err(Error::Invariant("throughput coverage outside [0, 1]".into()));
        }
        if !self
            .coverage_vs_density
            .iter()
            .all(|p| frac_ok(p.coverage_uav) && frac_ok(p.coverage_no_uav))
        {
            return Err(Error::Invariant("service coverage outside [0, 1]".into()));
        }
        if !self
            .mean_time_between_outages_vs_fleet
            .iter()
            .all(|p| p.mean_time_between_outages_h >= 1.0)
        {
            return Err(Error::Invariant("time between outages below one hour".into()));
        }
        Ok(())
    }

    pub fn write_outage_csv(&self, path: &Path) -> Result<()> {
        let rows = self.outage_pct_per_week.iter().map(|w| {
            vec![
                w.week.to_string(),
                w.outage_hours.to_string(),
                w.station_hours.to_string(),
                w.outage_pct.to_string(),
            ]
        });
        write_csv_rows(path, &["week", "outage_hours", "station_hours", "outage_pct"], rows)
    }

    pub fn write_throughput_csv(&self, path: &Path) -> Result<()> {
        let mut header = vec!["extra_users".to_string(), "no_uav".to_string()];
        header.extend(self.altitudes_m.iter().map(|a| format!("uav_{a}m")));
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        let rows = self.throughput_coverage_vs_extra_users.iter().map(|p| {
            let mut r = vec![p.extra_users.to_string(), p.no_uav.to_string()];
            r.extend(p.uav.iter().map(f64::to_string));
            r
        });
        write_csv_rows(path, &header, rows)
    }

    pub fn write_density_csv(&self, path: &Path) -> Result<()> {
        let rows = self.coverage_vs_density.iter().map(|p| {
            vec![
                p.density.to_string(),
                p.coverage_no_uav.to_string(),
                p.coverage_uav.to_string(),
                p.gain().to_string(),
            ]
        });
        write_csv_rows(path, &["density", "coverage_no_uav", "coverage_uav", "gain"], rows)
    }

    pub fn write_fleet_csv(&self, path: &Path) -> Result<()> {
        let rows = self.mean_time_between_outages_vs_fleet.iter().map(|p| {
            vec![
                p.fleet_size.to_string(),
                p.outage_hours.to_string(),
                p.outage_events.to_string(),
                p.mean_time_between_outages_h.to_string(),
                p.marginal_gain_h.to_string(),
            ]
        });
        write_csv_rows(
            path,
            &[
                "fleet_size",
                "outage_hours",
                "outage_events",
                "mtbo_h",
                "marginal_gain_h",
            ],
            rows,
        )
    }
}

pub fn write_csv_rows(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush()?;
    Ok(())
}
