//! Penalised overall cost of a genome's allocation and forecasts.
//!
//! Per evaluation hour, with `k_j` drones over area `j` hovering at
//! [`hover_points`] and `U_j = max(k_j, 1)`:
//! - each deployed drone `i` gets a breakdown from its travel leg, one hour
//!   of service carrying an equal share of the offloaded requests, and the
//!   area's station energy; then `C^U_i` at its 3-D distance to the centre;
//! - each area gets `C^A_j` from its integrated load with the station and
//!   its drones transmitting, and a breakdown summing its drones' terms;
//! - raw cost is the overall cost with forecasts `P̂_j`, plus
//!   `lstm_weight * Σ_j |P̂_j - P_j| / U_j` for the forecast miss.
//!
//! Raw cost is averaged over the evaluation hours.

use serde::{Deserialize, Serialize};

use super::genome::Allocation;
use crate::cost::{
    cost_area, cost_overall, cost_uav, density_constraint, drop_indicators, energy_bs, energy_comm, energy_travel,
    energy_uav, mobility_time_s, phi_uav, EnergyBreakdown,
};
use crate::forecaster::HourlySeries;
use crate::radio::{area_load, ServedDisc};
use crate::scenario::{hover_points, BaseStation, DemandSnapshot, Scenario, ScenarioConfig, Uav};
use crate::{Error, Result};

/// Penalty units charged to an individual whose training diverged.
pub const DIVERGENCE_PENALTY: f64 = 10.0;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Fitness {
    pub raw_cost: f64,
    pub penalty: f64,
    pub total: f64,
}

impl Fitness {
    pub fn new(raw_cost: f64, penalty: f64, penalty_weight: f64) -> Self {
        Self {
            raw_cost,
            penalty,
            total: raw_cost + penalty_weight * penalty,
        }
    }
}

/// Violation magnitudes behind a penalty.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Violations {
    /// Unavailable drones named by the allocation.
    pub unavailable: f64,
    /// Drones still missing from deficit areas.
    pub uncovered: f64,
    /// Battery shortfall as a fraction of capacity, summed over drones.
    pub battery: f64,
    /// Mean density-constraint violation over areas left without drones.
    pub density: f64,
    pub diverged: f64,
}

impl Violations {
    pub fn total(&self) -> f64 {
        self.unavailable + self.uncovered + self.battery + self.density + self.diverged
    }
}

/// Everything fitness needs that does not depend on the genome.
#[derive(Clone, Debug)]
pub struct Problem {
    pub config: ScenarioConfig,
    pub stations: Vec<BaseStation>,
    pub fleet: Vec<Uav>,
    /// Absolute decision hours.
    pub eval_hours: Vec<usize>,
    /// `[eval index][area]`.
    pub snapshots: Vec<Vec<DemandSnapshot>>,
    /// Observed expenditure, `[eval index][station]`.
    pub p_true: Vec<Vec<f64>>,
    /// Drones each area should receive.
    pub need: Vec<usize>,
    /// Per-station history reaching at least the last decision hour.
    pub series: Vec<HourlySeries>,
    /// Prefix of `series` used to train individuals during evolution.
    pub train_hours: usize,
    /// Prefix used for the final fit of the elite; at most the first decision hour.
    pub fine_tune_hours: usize,
    /// Density violation of each area served by its station alone, `[eval index][area]`.
    density_violation: Vec<Vec<f64>>,
}

/// Station expenditure history implied by the demand: `e_BS` per request.
pub fn demand_series(scenario: &Scenario, station: usize, hours: usize) -> HourlySeries {
    let bs = &scenario.stations[station];
    let (users, energy_j) = (0..hours)
        .map(|h| {
            let s = scenario.snapshot(h, station);
            (
                f64::from(s.active_users),
                bs.energy_per_load * f64::from(s.service_requests),
            )
        })
        .unzip();
    HourlySeries {
        start_hour: 0,
        users,
        energy_j,
    }
}

impl Problem {
    /// Decision window `[eval_start, eval_start + eval_len)`. An area needs
    /// drones when its expenditure over the window exceeds its battery plus
    /// harvest; it then needs enough drones for its busiest hour.
    pub fn from_scenario(scenario: &Scenario, train_hours: usize, eval_start: usize, eval_len: usize) -> Result<Self> {
        let cfg = &scenario.config;
        if eval_len == 0 {
            return Err(Error::config("eval_len", "must be >= 1"));
        }
        if eval_start + eval_len > cfg.horizon {
            return Err(Error::config(
                "eval_start",
                format!(
                    "decision window ends at {} beyond horizon {}",
                    eval_start + eval_len,
                    cfg.horizon
                ),
            ));
        }
        if train_hours > eval_start {
            return Err(Error::config("train_hours", "must not reach into the decision window"));
        }
        let eval_hours: Vec<usize> = (eval_start..eval_start + eval_len).collect();
        let snapshots: Vec<Vec<DemandSnapshot>> = eval_hours
            .iter()
            .map(|&h| (0..cfg.n_areas).map(|a| scenario.snapshot(h, a).clone()).collect())
            .collect();
        let p_true = snapshots
            .iter()
            .map(|row| {
                row.iter()
                    .zip(&scenario.stations)
                    .map(|(s, bs)| bs.energy_per_load * f64::from(s.service_requests))
                    .collect()
            })
            .collect();
        let need = (0..cfg.n_areas)
            .map(|j| {
                let bs = &scenario.stations[j];
                let spend: f64 = snapshots
                    .iter()
                    .map(|row| bs.energy_per_load * f64::from(row[j].service_requests))
                    .sum();
                let supply = bs.battery_j + eval_hours.iter().map(|&h| bs.harvest(h)).sum::<f64>();
                if spend > supply {
                    let peak = snapshots.iter().map(|row| row[j].service_requests).max().unwrap_or(0);
                    crate::cost::n_req(peak, cfg.fleet.capacity_reqs) as usize
                } else {
                    0
                }
            })
            .collect();
        let series = (0..cfg.n_areas)
            .map(|j| demand_series(scenario, j, eval_start + eval_len))
            .collect();
        Self::assemble(
            cfg.clone(),
            scenario.stations.clone(),
            scenario.fleet.clone(),
            eval_hours,
            snapshots,
            p_true,
            need,
            series,
            train_hours,
            eval_start,
        )
    }

    #[allow(clippy::too_many_arguments)]
    pub fn assemble(
        config: ScenarioConfig,
        stations: Vec<BaseStation>,
        fleet: Vec<Uav>,
        eval_hours: Vec<usize>,
        snapshots: Vec<Vec<DemandSnapshot>>,
        p_true: Vec<Vec<f64>>,
        need: Vec<usize>,
        series: Vec<HourlySeries>,
        train_hours: usize,
        fine_tune_hours: usize,
    ) -> Result<Self> {
        let n_areas = stations.len();
        let shaped = snapshots.len() == eval_hours.len()
            && p_true.len() == eval_hours.len()
            && snapshots.iter().all(|r| r.len() == n_areas)
            && p_true.iter().all(|r| r.len() == n_areas)
            && need.len() == n_areas
            && series.len() == n_areas;
        if !shaped || n_areas == 0 || eval_hours.is_empty() {
            return Err(Error::Shape("problem tables disagree with the station count".into()));
        }
        let density_violation = snapshots
            .iter()
            .map(|row| {
                row.iter()
                    .zip(&stations)
                    .map(|(snap, bs)| density_violation(snap, bs))
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            config,
            stations,
            fleet,
            eval_hours,
            snapshots,
            p_true,
            need,
            series,
            train_hours,
            fine_tune_hours,
            density_violation,
        })
    }

    pub fn n_areas(&self) -> usize {
        self.stations.len()
    }

    pub fn n_uavs(&self) -> usize {
        self.fleet.len()
    }

    /// Drones of area `j` placed at their hover points.
    fn placed(&self, uavs: &[usize], j: usize) -> Vec<Uav> {
        let center = self.stations[j].position_m;
        hover_points(center, uavs.len(), 0.5 * self.config.los.max_radius_m)
            .into_iter()
            .zip(uavs)
            .map(|(p, &i)| Uav {
                position_m: p,
                ..self.fleet[i].clone()
            })
            .collect()
    }

    /// `p_hat` is `[eval index][station]`; `None` charges the divergence
    /// penalty and uses the observed expenditure.
    pub fn evaluate(&self, allocation: &Allocation, p_hat: Option<&[Vec<f64>]>) -> Result<(Fitness, Violations)> {
        allocation.validate(self.n_uavs(), self.n_areas())?;
        let cfg = &self.config;
        let w = &cfg.weights;
        let mut v = Violations::default();
        if p_hat.is_none() {
            v.diverged = DIVERGENCE_PENALTY;
        }
        let p_hat = p_hat.unwrap_or(&self.p_true);
        if p_hat.len() != self.eval_hours.len() || p_hat.iter().any(|r| r.len() != self.n_areas()) {
            return Err(Error::Shape("forecast table disagrees with the problem".into()));
        }

        for (j, uavs) in allocation.areas.iter().enumerate() {
            let working = uavs.iter().filter(|&&i| self.fleet[i].available).count();
            v.unavailable += (uavs.len() - working) as f64;
            v.uncovered += self.need[j].saturating_sub(working) as f64;
        }

        let mut raw = 0.0;
        for (e, &hour) in self.eval_hours.iter().enumerate() {
            let mut uav_costs = Vec::new();
            let mut area_costs = Vec::with_capacity(self.n_areas());
            let mut fleet_in_area = Vec::with_capacity(self.n_areas());
            let mut miss = 0.0;
            for (j, uavs) in allocation.areas.iter().enumerate() {
                let snap = &self.snapshots[e][j];
                let bs = &self.stations[j];
                let placed = self.placed(uavs, j);
                let disc = ServedDisc {
                    center: bs.position_m,
                    radius_m: cfg.los.max_radius_m,
                };
                let lam = area_load(
                    snap,
                    &disc,
                    &placed,
                    Some(&bs.position_m),
                    &cfg.radio,
                    &cfg.traffic,
                    cfg.dispatch.grid_res,
                )?
                .load;
                let working = placed.iter().filter(|u| u.available).count();
                let offloaded = f64::from(snap.service_requests).min((working as u32 * cfg.fleet.capacity_reqs) as f64);
                let share = if working > 0 { offloaded / working as f64 } else { 0.0 };
                let e_bs = energy_bs(bs, offloaded, hour);
                let e_comm = energy_comm(&cfg.radio);
                let (mut sum_uav, mut sum_travel, mut sum_comm) = (0.0, 0.0, 0.0);
                for (u, &i) in placed.iter().zip(uavs) {
                    let d = self.fleet[i].position_m.distance(&u.position_m);
                    let load = if u.available { share } else { 0.0 };
                    let e_uav = energy_uav(&cfg.uav_energy, d, 3600.0, load);
                    let e_travel = energy_travel(&cfg.uav_energy, d, mobility_time_s(d, u.speed_m_s));
                    let bd = EnergyBreakdown::compose(e_bs, e_uav, e_travel, e_comm, w);
                    let phi = phi_uav(lam, uavs.len(), cfg.fleet.capacity_reqs)?;
                    uav_costs.push(cost_uav(
                        snap,
                        u.distance_to(&bs.position_m),
                        cfg.radio.path_loss_exp,
                        phi,
                        &bd,
                        w,
                        u.availability(),
                    )?);
                    sum_uav += e_uav;
                    sum_travel += e_travel;
                    sum_comm += e_comm;
                    if e == 0 {
                        // battery must cover the leg, the hour and the way back
                        let required = cfg.uav_energy.e_per_m * 2.0 * d
                            + 2.0 * e_travel
                            + cfg.uav_energy.e_per_s * 3600.0
                            + cfg.uav_energy.e_per_load * load;
                        v.battery += (required - self.fleet[i].battery_j).max(0.0) / self.fleet[i].battery_capacity_j;
                    }
                }
                let a_area = if !uavs.is_empty() && working == 0 { 0.0 } else { 1.0 };
                let bd = EnergyBreakdown::compose(e_bs, sum_uav, sum_travel, sum_comm, w);
                area_costs.push(cost_area(snap, bs, lam, &bd, w, a_area));
                let u_t = uavs.len().max(1);
                fleet_in_area.push(u_t);
                miss += (p_hat[e][j] - self.p_true[e][j]).abs() / u_t as f64;
                if uavs.is_empty() {
                    v.density += self.density_violation[e][j] / self.eval_hours.len() as f64;
                }
            }
            raw += cost_overall(&uav_costs, &area_costs, &p_hat[e], w, self.n_uavs(), &fleet_in_area)?
                + w.lstm_weight * miss;
        }
        raw /= self.eval_hours.len() as f64;
        Ok((Fitness::new(raw, v.total(), w.penalty_weight), v))
    }
}

/// How far the station alone misses the density constraint; zero when met
/// or when there are no requests.
pub fn density_violation(snapshot: &DemandSnapshot, bs: &BaseStation) -> Result<f64> {
    if snapshot.service_requests == 0 {
        return Ok(0.0);
    }
    let check = density_constraint(snapshot, bs, &drop_indicators(snapshot, bs))?;
    Ok(if check.ok {
        0.0
    } else if check.radicand < 0.0 {
        -check.radicand
    } else {
        check.lhs - check.rhs
    })
}
