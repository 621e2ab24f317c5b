//! Experiment sweeps: coverage against extra users and drone altitude,
//! time between outages against fleet size, and service coverage against
//! demand density.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::coverage::{cell_indices, cell_links, mean_cell_coverage, place_drones};
use super::report::{DensityPoint, FleetPoint, MetricsReport, ThroughputPoint};
use super::{run_sim, run_with_fleet, Policy, SimOptions, SimRun};
use crate::error::{Error, Result};
use crate::rng::labeled;
use crate::scenario::{build_fleet, uniform_in_disc, Point, Scenario};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub extra_users: Vec<u32>,
    pub altitudes_m: Vec<f64>,
    /// Hours whose user layouts the throughput sweep averages over.
    pub coverage_hours: Vec<usize>,
    pub fleet_sizes: Vec<usize>,
    pub densities: Vec<f64>,
    /// Run length of the fleet and density sweeps; the full horizon when absent.
    pub horizon: Option<usize>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            extra_users: (0..=7).map(|k| k * 100).collect(),
            altitudes_m: vec![150.0, 450.0],
            coverage_hours: (0..7).map(|d| 24 * d + 16).collect(),
            fleet_sizes: vec![0, 2, 4, 6, 8, 10],
            densities: vec![0.0, 0.5, 1.0, 1.5, 2.0, 3.0, 4.0],
            horizon: None,
        }
    }
}

/// Which figure analogues to compute beyond the weekly outages.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sweep {
    ExtraUsers,
    Fleet,
    Density,
}

impl Sweep {
    pub const ALL: [Sweep; 3] = [Sweep::ExtraUsers, Sweep::Fleet, Sweep::Density];
}

fn nondecreasing<T: PartialOrd>(field: &str, v: &[T]) -> Result<()> {
    if v.windows(2).all(|w| w[0] <= w[1]) {
        Ok(())
    } else {
        Err(Error::config(field, "must be nondecreasing"))
    }
}

/// Users of area `a` at `hour` plus `extra` more, the extras being a prefix
/// of one fixed stream so that larger counts only add users.
fn users_with_extra(scenario: &Scenario, hour: usize, a: usize, extra: u32) -> Vec<Point> {
    let cfg = &scenario.config;
    let mut users = scenario.snapshot(hour, a).user_positions_m.clone();
    let mut rng = labeled(cfg.rng_seed, &format!("sweep/extra-users/{a}/{hour}"));
    let center = cfg.area_center(a);
    users.extend((0..extra).map(|_| uniform_in_disc(&mut rng, center, cfg.demand.user_radius_m)));
    users
}

/// Mean throughput coverage per extra-user count, without drones and with
/// the fleet hovering at each altitude. Drone `i` serves cell `i mod areas`.
pub fn sweep_extra_users(
    scenario: &Scenario,
    counts: &[u32],
    altitudes_m: &[f64],
    hours: &[usize],
) -> Result<Vec<ThroughputPoint>> {
    nondecreasing("sweep.extra_users", counts)?;
    let cfg = &scenario.config;
    if let Some(&h) = hours.iter().find(|&&h| h >= cfg.horizon) {
        return Err(Error::config(
            "sweep.coverage_hours",
            format!("hour {h} is past the horizon"),
        ));
    }
    if hours.is_empty() {
        return Err(Error::config("sweep.coverage_hours", "must not be empty"));
    }
    let n = cfg.n_areas;
    let mut cells = vec![Vec::new(); n];
    for i in 0..scenario.fleet.len() {
        cells[i % n].push(i);
    }
    let idx = cell_indices(&cells);
    let placements: Vec<_> = altitudes_m
        .iter()
        .map(|&alt| place_drones(cfg, &scenario.fleet, &cells, alt))
        .collect();
    let no_cells: Vec<Vec<usize>> = vec![Vec::new(); n];

    counts
        .par_iter()
        .map(|&extra| {
            let mut no_uav = 0.0;
            let mut uav = vec![0.0; altitudes_m.len()];
            for &h in hours {
                let users: Vec<Vec<Point>> = (0..n).map(|a| users_with_extra(scenario, h, a, extra)).collect();
                let base = (0..n)
                    .map(|a| {
                        cell_links(
                            &users[a],
                            &scenario.stations[a],
                            &no_cells[a],
                            &[],
                            cfg.fleet.user_capacity,
                            cfg,
                        )
                    })
                    .collect::<Result<Vec<_>>>()?;
                no_uav += mean_cell_coverage(&base)?;
                for (k, placed) in placements.iter().enumerate() {
                    let with = (0..n)
                        .map(|a| {
                            cell_links(
                                &users[a],
                                &scenario.stations[a],
                                &idx[a],
                                placed,
                                cfg.fleet.user_capacity,
                                cfg,
                            )
                        })
                        .collect::<Result<Vec<_>>>()?;
                    uav[k] += mean_cell_coverage(&with)?;
                }
            }
            let m = hours.len() as f64;
            Ok(ThroughputPoint {
                extra_users: extra,
                no_uav: no_uav / m,
                uav: uav.into_iter().map(|c| c / m).collect(),
            })
        })
        .collect()
}

/// Mean time between outages under greedy dispatch for each fleet size.
pub fn sweep_fleet(scenario: &Scenario, sizes: &[usize], horizon: usize) -> Result<Vec<FleetPoint>> {
    nondecreasing("sweep.fleet_sizes", sizes)?;
    let opts = SimOptions::new(Policy::Greedy);
    let runs = sizes
        .par_iter()
        .map(|&n| run_with_fleet(scenario, build_fleet(&scenario.config, n), &opts, horizon).map(|r| r.summary))
        .collect::<Result<Vec<_>>>()?;
    let mut out: Vec<FleetPoint> = Vec::with_capacity(sizes.len());
    for (k, (&n, s)) in sizes.iter().zip(&runs).enumerate() {
        let marginal = if k == 0 || n == sizes[k - 1] {
            0.0
        } else {
            (s.mean_time_between_outages_h - out[k - 1].mean_time_between_outages_h) / (n - sizes[k - 1]) as f64
        };
        out.push(FleetPoint {
            fleet_size: n,
            outage_hours: s.outage_hours,
            outage_events: s.outage_events,
            mean_time_between_outages_h: s.mean_time_between_outages_h,
            marginal_gain_h: marginal,
        });
    }
    Ok(out)
}

/// The scenario with every area's users and requests scaled by `density`.
/// Added users are drawn uniformly in the area's disc.
pub fn scale_demand(scenario: &Scenario, density: f64) -> Result<Scenario> {
    if !(density >= 0.0 && density.is_finite()) {
        return Err(Error::config(
            "sweep.densities",
            format!("density {density} must be finite and >= 0"),
        ));
    }
    let mut out = scenario.clone();
    let cfg = &scenario.config;
    for snap in &mut out.demand {
        let users = (f64::from(snap.active_users) * density).round() as u32;
        snap.service_requests = (f64::from(snap.service_requests) * density).round() as u32;
        let have = snap.user_positions_m.len();
        if (users as usize) < have {
            snap.user_positions_m.truncate(users as usize);
        } else if users as usize > have {
            let mut rng = labeled(cfg.rng_seed, &format!("sweep/density/{}/{}", snap.area_id, snap.hour));
            let center = cfg.area_center(snap.area_id);
            snap.user_positions_m
                .extend((have..users as usize).map(|_| uniform_in_disc(&mut rng, center, cfg.demand.user_radius_m)));
        }
        snap.active_users = users;
    }
    Ok(out)
}

/// Fraction of station-hours fully served at each density, with greedy
/// dispatch and without drones.
pub fn sweep_density(scenario: &Scenario, densities: &[f64], horizon: usize) -> Result<Vec<DensityPoint>> {
    nondecreasing("sweep.densities", densities)?;
    densities
        .par_iter()
        .map(|&rho| {
            let scaled = scale_demand(scenario, rho)?;
            let with = run_sim(&scaled, &SimOptions::new(Policy::Greedy), horizon)?;
            let without = run_sim(&scaled, &SimOptions::new(Policy::NoUav), horizon)?;
            Ok(DensityPoint {
                density: rho,
                coverage_no_uav: without.summary.service_coverage,
                coverage_uav: with.summary.service_coverage,
            })
        })
        .collect()
}

impl MetricsReport {
    /// Runs the main simulation with `opts` and the requested sweeps.
    pub fn collect(
        scenario: &Scenario,
        opts: &SimOptions,
        sweep: &SweepConfig,
        which: &[Sweep],
    ) -> Result<(SimRun, MetricsReport)> {
        let horizon = scenario.config.horizon;
        let sweep_horizon = sweep.horizon.unwrap_or(horizon).min(horizon);
        let run = run_sim(scenario, opts, horizon)?;
        let mut report = MetricsReport {
            outage_pct_per_week: run.weekly.clone(),
            ..MetricsReport::default()
        };
        if which.contains(&Sweep::ExtraUsers) {
            report.altitudes_m = sweep.altitudes_m.clone();
            report.throughput_coverage_vs_extra_users =
                sweep_extra_users(scenario, &sweep.extra_users, &sweep.altitudes_m, &sweep.coverage_hours)?;
        }
        if which.contains(&Sweep::Fleet) {
            report.mean_time_between_outages_vs_fleet = sweep_fleet(scenario, &sweep.fleet_sizes, sweep_horizon)?;
        }
        if which.contains(&Sweep::Density) {
            report.coverage_vs_density = sweep_density(scenario, &sweep.densities, sweep_horizon)?;
        }
        report.validate()?;
        Ok((run, report))
    }
}
