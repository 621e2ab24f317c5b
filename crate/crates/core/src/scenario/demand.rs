//! Synthetic per-area demand with a diurnal profile.

use std::f64::consts::PI;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{DemandSnapshot, Point};
use crate::error::{Error, Result};
use crate::rng::seeded;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DemandParams {
    /// Peak active users per area.
    pub base_users: u32,
    pub min_requests: u32,
    pub max_requests: u32,
    /// Fraction of the peak reached at the quietest hour.
    pub diurnal_floor: f64,
    /// Users are scattered uniformly in a disc of this radius around the station.
    pub user_radius_m: f64,
}

impl Default for DemandParams {
    fn default() -> Self {
        Self {
            base_users: 200,
            min_requests: 100,
            max_requests: 150,
            diurnal_floor: 0.2,
            user_radius_m: 100.0,
        }
    }
}

impl DemandParams {
    pub fn validate(&self) -> Result<()> {
        if self.min_requests > self.max_requests {
            return Err(Error::config("demand.min_requests", "must not exceed max_requests"));
        }
        if !(0.0..=1.0).contains(&self.diurnal_floor) {
            return Err(Error::config("demand.diurnal_floor", "must lie in [0, 1]"));
        }
        super::positive("demand.user_radius_m", self.user_radius_m)
    }
}

/// Activity multiplier in `[floor, 1]`, lowest at 04:00 and highest at 16:00.
pub fn diurnal_factor(hour_of_day: usize, floor: f64) -> f64 {
    let phase = 2.0 * PI * (hour_of_day as f64 - 4.0) / 24.0;
    floor + (1.0 - floor) * 0.5 * (1.0 - phase.cos())
}

/// Area centres used by [`synth_demand`].
pub(crate) const GENERATOR_SPACING_M: f64 = 500.0;

pub(crate) fn uniform_in_disc<R: Rng>(rng: &mut R, center: Point, radius: f64) -> Point {
    let r = radius * rng.gen::<f64>().sqrt();
    let theta = 2.0 * PI * rng.gen::<f64>();
    Point::new(center.x + r * theta.cos(), center.y + r * theta.sin())
}

/// Hour-major demand snapshots (`hours * areas` of them).
///
/// Users never exceed `base_users`; requests are drawn from the configured
/// range and scaled by the time of day. Area `a` is centred at `(a * 500, 0)`
/// only for positions; callers relocate them if their geometry differs.
pub fn synth_demand(
    seed: u64,
    areas: usize,
    hours: usize,
    base_users: u32,
    params: &DemandParams,
) -> Vec<DemandSnapshot> {
    assert!(areas >= 1 && hours >= 1, "synth_demand needs areas >= 1 and hours >= 1");
    let mut rng = seeded(seed);
    let mut out = Vec::with_capacity(areas * hours);
    for hour in 0..hours {
        let d = diurnal_factor(hour % 24, params.diurnal_floor);
        for area in 0..areas {
            let users = (f64::from(base_users) * d * rng.gen_range(0.85..=1.0)).round() as u32;
            let reqs = rng.gen_range(params.min_requests..=params.max_requests);
            let requests = (f64::from(reqs) * d).round() as u32;
            let center = Point::new(area as f64 * GENERATOR_SPACING_M, 0.0);
            let user_positions_m = (0..users)
                .map(|_| uniform_in_disc(&mut rng, center, params.user_radius_m))
                .collect();
            out.push(DemandSnapshot {
                area_id: area,
                hour,
                service_requests: requests,
                active_users: users.min(base_users),
                user_positions_m,
            });
        }
    }
    out
}

/// CSV export with columns `area,hour,users,requests`.
pub fn write_demand_csv(path: &Path, snapshots: &[DemandSnapshot]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["area", "hour", "users", "requests"])?;
    for s in snapshots {
        w.write_record(&[
            s.area_id.to_string(),
            s.hour.to_string(),
            s.active_users.to_string(),
            s.service_requests.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_and_bounds() {
        let p = DemandParams::default();
        let snaps = synth_demand(3, 5, 24, 200, &p);
        assert_eq!(snaps.len(), 120);
        for s in &snaps {
            assert!(s.active_users <= 200);
            assert!(s.active_users as usize <= s.user_positions_m.len());
            assert!(s.service_requests <= 150);
        }
        assert_eq!(snaps, synth_demand(3, 5, 24, 200, &p));
    }

    #[test]
    fn diurnal_range() {
        assert!((diurnal_factor(4, 0.2) - 0.2).abs() < 1e-12);
        assert!((diurnal_factor(16, 0.2) - 1.0).abs() < 1e-12);
        for h in 0..24 {
            let d = diurnal_factor(h, 0.2);
            assert!((0.2..=1.0).contains(&d));
        }
    }

    #[test]
    fn positions_within_disc() {
        let p = DemandParams::default();
        for s in synth_demand(11, 2, 3, 50, &p) {
            let c = Point::new(s.area_id as f64 * 500.0, 0.0);
            assert!(s.user_positions_m.iter().all(|u| u.distance(&c) <= 100.0 + 1e-9));
        }
    }
}
