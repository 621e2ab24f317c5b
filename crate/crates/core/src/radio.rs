//! Physical-layer quantities: SINR, per-user load, round-robin throughput,
//! integrated area load, line-of-sight geometry and throughput coverage.
//!
//! Distances are 3-D (horizontal offset plus altitude). Only available drones
//! transmit, so only they interfere. Ground stations use their own carrier and
//! are noise limited.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::{DemandSnapshot, LosGeometry, Point, RadioParams, TrafficModel, Uav};

/// Thermal noise power in W over `bandwidth_hz` for a PSD in dBm/Hz.
pub fn noise_power_w(psd_dbm_hz: f64, bandwidth_hz: f64) -> f64 {
    10f64.powf((psd_dbm_hz + 10.0 * bandwidth_hz.log10() - 30.0) / 10.0)
}

fn received_power(radio: &RadioParams, tx_power_w: f64, distance_m: f64) -> f64 {
    tx_power_w * radio.geometry_const / distance_m.powf(radio.path_loss_exp)
}

/// SINR of a ground user served by `serving`, with every other available
/// drone in `fleet` acting as an interferer.
pub fn sinr(user_pos: &Point, serving: &Uav, fleet: &[Uav], radio: &RadioParams) -> Result<f64> {
    let d = serving.distance_to(user_pos);
    if !(d > 0.0) {
        return Err(Error::Singularity(format!("user coincides with uav {}", serving.id)));
    }
    let signal = received_power(radio, radio.tx_power_w, d);
    let mut interference = 0.0;
    for other in fleet.iter().filter(|u| u.id != serving.id && u.available) {
        let dj = other.distance_to(user_pos);
        if !(dj > 0.0) {
            return Err(Error::Singularity(format!("user coincides with uav {}", other.id)));
        }
        interference += received_power(radio, radio.tx_power_w, dj);
    }
    Ok(signal / (interference + noise_power_w(radio.noise_psd_dbm_hz, radio.bandwidth_hz)))
}

/// Noise-limited SINR of the ground base station link.
pub fn bs_sinr(user_pos: &Point, bs_pos: &Point, radio: &RadioParams) -> f64 {
    let d = user_pos.distance(bs_pos).hypot(radio.bs_mast_height_m);
    received_power(radio, radio.bs_tx_power_w, d) / noise_power_w(radio.noise_psd_dbm_hz, radio.bandwidth_hz)
}

/// Fraction of channel time a user's traffic occupies at the given SINR.
pub fn user_load(radio: &RadioParams, traffic: &TrafficModel, sinr: f64) -> Result<f64> {
    if !(sinr > 0.0) {
        return Err(Error::Domain("user load is unbounded at zero SINR".into()));
    }
    Ok(traffic.arrival_rate_req_s * traffic.mean_packet_bits / (radio.bandwidth_hz * (1.0 + sinr).log2()))
}

/// Round-robin share of the link rate, in bit/s.
pub fn effective_throughput(sinr: f64, active_users: u32, radio: &RadioParams) -> Result<f64> {
    if active_users == 0 {
        return Err(Error::Domain("throughput share needs at least one active user".into()));
    }
    if !(sinr >= 0.0) {
        return Err(Error::Domain(format!("negative SINR {sinr}")));
    }
    Ok(radio.bandwidth_hz * (1.0 + sinr).log2() / f64::from(active_users))
}

/// The disc over which an area's load is integrated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ServedDisc {
    pub center: Point,
    pub radius_m: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AreaLoad {
    /// Integral of the per-point load over the servable part of the disc.
    pub load: f64,
    /// Fraction of the disc area no transmitter could serve.
    pub unserved_frac: f64,
}

impl AreaLoad {
    pub fn fully_served(&self) -> bool {
        self.unserved_frac == 0.0
    }
}

/// Integrates the per-point load over `disc` with a polar midpoint rule of
/// `grid_res` rings by `grid_res` sectors. Each point is served by whichever
/// available drone (or the optional ground station) gives the best SINR.
///
/// Summation runs in a fixed ring-then-sector order.
pub fn area_load(
    area: &DemandSnapshot,
    disc: &ServedDisc,
    fleet: &[Uav],
    ground_station: Option<&Point>,
    radio: &RadioParams,
    traffic: &TrafficModel,
    grid_res: usize,
) -> Result<AreaLoad> {
    if grid_res < 2 {
        return Err(Error::Domain(format!("grid_res must be >= 2, got {grid_res}")));
    }
    if area.active_users == 0 || traffic.arrival_rate_req_s == 0.0 {
        return Ok(AreaLoad {
            load: 0.0,
            unserved_frac: 0.0,
        });
    }
    let n = grid_res as f64;
    let dr = disc.radius_m / n;
    let dtheta = 2.0 * PI / n;
    let total_area = PI * disc.radius_m * disc.radius_m;
    let mut load = 0.0;
    let mut unserved_area = 0.0;
    for ring in 0..grid_res {
        let r_in = ring as f64 * dr;
        let r_out = r_in + dr;
        let r_mid = 0.5 * (r_in + r_out);
        let cell_area = 0.5 * (r_out * r_out - r_in * r_in) * dtheta;
        for sector in 0..grid_res {
            let theta = (sector as f64 + 0.5) * dtheta;
            let p = Point::new(disc.center.x + r_mid * theta.cos(), disc.center.y + r_mid * theta.sin());
            match best_sinr(&p, fleet, ground_station, radio)? {
                Some(s) if s > 0.0 => load += user_load(radio, traffic, s)? * cell_area,
                _ => unserved_area += cell_area,
            }
        }
    }
    Ok(AreaLoad {
        load,
        unserved_frac: (unserved_area / total_area).clamp(0.0, 1.0),
    })
}

fn best_sinr(p: &Point, fleet: &[Uav], ground_station: Option<&Point>, radio: &RadioParams) -> Result<Option<f64>> {
    let mut best: Option<f64> = ground_station.map(|bs| bs_sinr(p, bs, radio));
    for u in fleet.iter().filter(|u| u.available) {
        let s = sinr(p, u, fleet, radio)?;
        best = Some(best.map_or(s, |b| b.max(s)));
    }
    Ok(best)
}

/// Elevation angle from a ground point up to the drone.
pub fn elevation(user_pos: &Point, uav: &Uav) -> f64 {
    uav.altitude_m.atan2(user_pos.distance(&uav.position_m))
}

/// Line of sight holds when the elevation lies in `[min, max]` and the user
/// is within the drone's service radius.
pub fn los_visible(user_pos: &Point, uav: &Uav, los: &LosGeometry) -> bool {
    let d = user_pos.distance(&uav.position_m);
    let theta = uav.altitude_m.atan2(d);
    d <= los.max_radius_m && theta >= los.min_elev_rad && theta <= los.max_elev_rad
}

/// One user's link to its serving transmitter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkSample {
    pub user_pos_m: Point,
    /// Serving drone id, or `None` for the ground station.
    pub serving_uav: Option<usize>,
    pub distance_m: f64,
    pub sinr: f64,
    pub spectral_eff_bps_hz: f64,
}

impl LinkSample {
    pub fn new(user_pos_m: Point, serving_uav: Option<usize>, distance_m: f64, sinr: f64) -> Self {
        Self {
            user_pos_m,
            serving_uav,
            distance_m,
            sinr,
            spectral_eff_bps_hz: (1.0 + sinr).log2(),
        }
    }
}

/// Fraction of users whose spectral efficiency meets `threshold_bps_hz`.
pub fn throughput_coverage(users: &[LinkSample], threshold_bps_hz: f64) -> Result<f64> {
    if users.is_empty() {
        return Err(Error::Domain("coverage of an empty user set".into()));
    }
    let covered = users
        .iter()
        .filter(|u| u.spectral_eff_bps_hz >= threshold_bps_hz)
        .count();
    Ok(covered as f64 / users.len() as f64)
}
