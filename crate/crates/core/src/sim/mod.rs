//! Hour-stepped world simulation and the experiment sweeps.
//!
//! Each hour runs these phases in order:
//! 1. arrivals: travelling drones reach their cell, returning drones dock
//! 2. harvest and demand realization
//! 3. drones on site serve up to their request capacity each
//! 4. the station serves the residual, limited by user capacity and energy
//! 5. outage accounting
//! 6. idle drones at the charging stations recharge
//! 7. deficit detection for the next hour
//! 8. release of drones whose station has recovered or whose battery is low
//! 9. dispatch by the policy; drones arrive for the next hour
//!
//! Drones charge at grid-fed charging stations, not from the station battery.

mod coverage;
mod report;
mod sweep;

use serde::{Deserialize, Serialize};

pub use coverage::{cell_links, deployed_coverage, COVERAGE_THRESHOLD_BPS_HZ};
pub use report::{write_csv_rows, DensityPoint, FleetPoint, MetricsReport, ThroughputPoint, WeekOutage};
pub use sweep::{scale_demand, sweep_density, sweep_extra_users, sweep_fleet, Sweep, SweepConfig};

use crate::cost::{cost_uav, energy_travel, mobility_time_s, n_req, phi_uav, EnergyBreakdown, UavEnergyParams};
use crate::error::{Error, Result};
use crate::evolution::{allocate_greedy, Allocation};
use crate::forecaster::{Forecaster, HourlySeries};
use crate::radio::{area_load, ServedDisc};
use crate::scenario::{BaseStation, Scenario, Uav};

/// Drone life cycle: idle → traveling → serving → returning → charging → idle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum UavState {
    Idle,
    Traveling { area: usize, arrival_hour: usize },
    Serving { area: usize },
    Returning { arrival_hour: usize },
    Charging { until_hour: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PendingDispatch {
    pub uav: usize,
    pub area: usize,
    pub arrival_hour: usize,
}

/// Who decides which drones fly where.
#[derive(Debug, Clone, PartialEq)]
pub enum Policy {
    /// Drones never leave their charging stations.
    NoUav,
    /// Deficit-triggered cheapest-pair dispatch.
    Greedy,
    /// Every drone keeps serving the area it is assigned to, leaving only to recharge.
    Static(Allocation),
}

/// Next-hour expenditure estimate used by the deficit trigger.
#[derive(Debug, Clone)]
pub enum DemandForecast {
    /// The current hour's expenditure.
    Persistence,
    /// A trained forecaster; persistence until its window has filled.
    Lstm(Box<Forecaster>),
}

#[derive(Debug, Clone)]
pub struct SimOptions {
    pub policy: Policy,
    pub forecast: DemandForecast,
    /// Keep a per-hour trace of drone states.
    pub record_trace: bool,
    /// Sample throughput coverage once a day at this hour.
    pub coverage_hour_of_day: Option<usize>,
}

impl SimOptions {
    pub fn new(policy: Policy) -> Self {
        Self {
            policy,
            forecast: DemandForecast::Persistence,
            record_trace: false,
            coverage_hour_of_day: None,
        }
    }
}

/// One station's energy ledger entry for one hour.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationHour {
    pub station: usize,
    pub hour: usize,
    pub battery_before_j: f64,
    pub harvest_j: f64,
    pub energy_per_load_j: f64,
    pub battery_after_j: f64,
    pub battery_capacity_j: f64,
    pub users: u32,
    pub requests: u32,
    pub served_uav: u32,
    pub served_bs: u32,
    pub unserved: u32,
    pub drones_on_site: usize,
    pub outage: bool,
    /// Deficit predicted for the following hour.
    pub deficit: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HourRecord {
    pub hour: usize,
    pub stations: Vec<StationHour>,
    pub uav_states: Vec<UavState>,
    pub uav_battery_j: Vec<f64>,
    pub dispatched: Vec<PendingDispatch>,
}

#[derive(Debug, Clone)]
pub struct WorldState {
    pub hour: usize,
    pub stations: Vec<BaseStation>,
    pub fleet: Vec<Uav>,
    pub uav_states: Vec<UavState>,
    /// `(station, hour)` in the order logged.
    pub outage_log: Vec<(usize, usize)>,
    /// Requests served per area, one entry per elapsed hour.
    pub served_load: Vec<Vec<f64>>,
    /// Realized users and demanded energy per station, for the forecaster.
    pub history: Vec<HourlySeries>,
    pub dispatches: usize,
}

impl WorldState {
    pub fn new(scenario: &Scenario, fleet: Vec<Uav>) -> Self {
        let n = scenario.stations.len();
        let empty = HourlySeries {
            start_hour: 0,
            users: Vec::new(),
            energy_j: Vec::new(),
        };
        Self {
            hour: 0,
            stations: scenario.stations.clone(),
            uav_states: vec![UavState::Idle; fleet.len()],
            fleet,
            outage_log: Vec::new(),
            served_load: vec![Vec::new(); n],
            history: vec![empty; n],
            dispatches: 0,
        }
    }

    pub fn pending_dispatches(&self) -> Vec<PendingDispatch> {
        self.uav_states
            .iter()
            .enumerate()
            .filter_map(|(uav, s)| match *s {
                UavState::Traveling { area, arrival_hour } => Some(PendingDispatch {
                    uav,
                    area,
                    arrival_hour,
                }),
                _ => None,
            })
            .collect()
    }

    /// Checks batteries, drone positions against their states, and the
    /// per-station ordering of the outage log.
    pub fn check(&self, scenario: &Scenario) -> Result<()> {
        for st in &self.stations {
            if !(st.battery_j >= 0.0 && st.battery_j <= st.battery_capacity_j) {
                return Err(Error::Invariant(format!(
                    "station {}: battery {} outside [0, capacity]",
                    st.id, st.battery_j
                )));
            }
        }
        for (u, state) in self.fleet.iter().zip(&self.uav_states) {
            if !(u.battery_j >= 0.0 && u.battery_j <= u.battery_capacity_j) {
                return Err(Error::Invariant(format!(
                    "uav {}: battery {} outside [0, capacity]",
                    u.id, u.battery_j
                )));
            }
            let expected = match *state {
                UavState::Serving { area } => Some(scenario.config.area_center(area)),
                UavState::Idle | UavState::Charging { .. } => Some(scenario.config.area_center(u.home_station)),
                _ => None,
            };
            if let Some(p) = expected {
                if u.position_m != p {
                    return Err(Error::Invariant(format!(
                        "uav {}: position does not match state {state:?}",
                        u.id
                    )));
                }
            }
            if u.available != (*state == UavState::Idle) {
                return Err(Error::Invariant(format!(
                    "uav {}: availability flag disagrees with {state:?}",
                    u.id
                )));
            }
        }
        let mut last = vec![None; self.stations.len()];
        for &(s, h) in &self.outage_log {
            if last[s].is_some_and(|prev| prev >= h) {
                return Err(Error::Invariant(format!(
                    "station {s}: outage log not increasing at hour {h}"
                )));
            }
            last[s] = Some(h);
        }
        Ok(())
    }
}

/// Energy to fly `dist_m`: the per-metre cost plus the mobility term.
pub fn flight_energy(params: &UavEnergyParams, dist_m: f64, speed_m_s: f64) -> f64 {
    params.e_per_m * dist_m + energy_travel(params, dist_m, mobility_time_s(dist_m, speed_m_s))
}

/// Energy for one hour of hovering at full request load.
pub fn service_hour_energy(params: &UavEnergyParams, capacity_reqs: u32) -> f64 {
    params.e_per_s * 3600.0 + params.e_per_load * f64::from(capacity_reqs)
}

fn travel_hours(dist_m: f64, speed_m_s: f64) -> usize {
    (dist_m / speed_m_s / 3600.0).floor() as usize
}

fn charge_hours(params: &UavEnergyParams) -> usize {
    (params.charge_time_h.ceil() as usize).max(1)
}

/// Advances the world by one hour.
pub fn step(world: &mut WorldState, scenario: &Scenario, opts: &SimOptions) -> Result<HourRecord> {
    let cfg = &scenario.config;
    let h = world.hour;
    if h >= cfg.horizon {
        return Err(Error::Domain(format!("hour {h} is past the horizon {}", cfg.horizon)));
    }
    let ue = &cfg.uav_energy;

    // 1. arrivals
    for (u, state) in world.fleet.iter_mut().zip(world.uav_states.iter_mut()) {
        match *state {
            UavState::Traveling { area, arrival_hour } if arrival_hour <= h => {
                *state = UavState::Serving { area };
                u.position_m = cfg.area_center(area);
            }
            UavState::Returning { arrival_hour } if arrival_hour <= h => {
                *state = UavState::Charging {
                    until_hour: h + charge_hours(ue),
                };
                u.position_m = cfg.area_center(u.home_station);
            }
            _ => {}
        }
    }

    // 2-5. harvest, demand, service, outages
    let mut rows = Vec::with_capacity(world.stations.len());
    for j in 0..world.stations.len() {
        let snap = scenario.snapshot(h, j);
        let requests = snap.service_requests;
        let users = snap.active_users;
        let mut remaining = requests;
        let mut served_uav = 0u32;
        let mut on_site = 0usize;
        for (u, state) in world.fleet.iter_mut().zip(&world.uav_states) {
            if *state != (UavState::Serving { area: j }) {
                continue;
            }
            on_site += 1;
            let s = remaining.min(u.capacity_reqs);
            let drain = ue.e_per_s * 3600.0 + ue.e_per_load * f64::from(s);
            if u.battery_j < drain {
                return Err(Error::Invariant(format!(
                    "uav {}: battery {} below service drain {drain}",
                    u.id, u.battery_j
                )));
            }
            u.battery_j -= drain;
            remaining -= s;
            served_uav += s;
        }

        let st = &mut world.stations[j];
        let gen = st.harvest(h);
        let e = st.energy_per_load;
        let before = st.battery_j;
        let bs_cap = if users > st.user_capacity {
            (f64::from(requests) * f64::from(st.user_capacity) / f64::from(users)).floor() as u32
        } else {
            requests
        };
        let bs_demand = remaining.min(bs_cap);
        let available = before + gen;
        let energy_cap = if e > 0.0 {
            (available / e).floor().min(f64::from(u32::MAX)) as u32
        } else {
            u32::MAX
        };
        let served_bs = bs_demand.min(energy_cap);
        let after = (before + gen - e * f64::from(served_bs)).clamp(0.0, st.battery_capacity_j);
        st.battery_j = after;
        st.active_users = users;
        let unserved = remaining - served_bs;
        let outage = unserved > 0 && energy_cap < bs_demand;
        if outage {
            world.outage_log.push((j, h));
        }
        world.served_load[j].push(f64::from(served_uav + served_bs));
        world.history[j].users.push(f64::from(users));
        world.history[j].energy_j.push(e * f64::from(requests));
        rows.push(StationHour {
            station: j,
            hour: h,
            battery_before_j: before,
            harvest_j: gen,
            energy_per_load_j: e,
            battery_after_j: after,
            battery_capacity_j: st.battery_capacity_j,
            users,
            requests,
            served_uav,
            served_bs,
            unserved,
            drones_on_site: on_site,
            outage,
            deficit: false,
        });
    }

    // 6. charging
    for (u, state) in world.fleet.iter_mut().zip(world.uav_states.iter_mut()) {
        if let UavState::Charging { until_hour } = *state {
            u.battery_j = (u.battery_j + u.battery_capacity_j / charge_hours(ue) as f64).min(u.battery_capacity_j);
            if h + 1 >= until_hour {
                u.battery_j = u.battery_capacity_j;
                *state = UavState::Idle;
                u.available = true;
            }
        }
    }

    // 7. deficit detection for hour h + 1
    let mut predicted_reqs = vec![0.0; world.stations.len()];
    for j in 0..world.stations.len() {
        let st = &world.stations[j];
        let pred_j = predict_energy(world, j, h, &opts.forecast)?;
        let expected_harvest = if h + 1 >= 24 { st.harvest(h + 1 - 24) } else { 0.0 };
        let deficit =
            pred_j * cfg.dispatch.deficit_margin > st.battery_j + expected_harvest || rows[j].users > st.user_capacity;
        rows[j].deficit = deficit;
        predicted_reqs[j] = if st.energy_per_load > 0.0 {
            pred_j / st.energy_per_load
        } else {
            f64::from(rows[j].requests)
        };
    }

    // 8. release
    let keep_serving = service_hour_energy(ue, cfg.fleet.capacity_reqs);
    for i in 0..world.fleet.len() {
        let UavState::Serving { area } = world.uav_states[i] else {
            continue;
        };
        let u = &world.fleet[i];
        let home = cfg.area_center(u.home_station);
        let back = flight_energy(ue, u.position_m.distance(&home), u.speed_m_s);
        let low = u.battery_j < keep_serving + back;
        let st = &world.stations[area];
        let recovered = !rows[area].deficit && st.battery_j >= cfg.dispatch.release_soc * st.battery_capacity_j;
        let released = match opts.policy {
            Policy::Static(_) => false,
            _ => recovered,
        };
        if low || released {
            let d = u.position_m.distance(&home);
            let u = &mut world.fleet[i];
            u.battery_j = (u.battery_j - back).max(0.0);
            world.uav_states[i] = UavState::Returning {
                arrival_hour: h + 1 + travel_hours(d, u.speed_m_s),
            };
        }
    }

    // 9. dispatch
    let targets = match &opts.policy {
        Policy::NoUav => Vec::new(),
        Policy::Greedy => greedy_targets(world, scenario, &rows, &predicted_reqs)?,
        Policy::Static(alloc) => {
            let owners = alloc.owners(world.fleet.len());
            (0..world.fleet.len())
                .filter_map(|i| owners.get(i).copied().flatten().map(|j| (i, j)))
                .filter(|&(i, j)| dispatchable(world, scenario, i, j))
                .collect()
        }
    };
    let mut dispatched = Vec::with_capacity(targets.len());
    for (i, j) in targets {
        let target = cfg.area_center(j);
        let u = &mut world.fleet[i];
        let d = u.position_m.distance(&target);
        u.battery_j -= flight_energy(ue, d, u.speed_m_s);
        u.available = false;
        let arrival_hour = h + 1 + travel_hours(d, u.speed_m_s);
        world.uav_states[i] = UavState::Traveling { area: j, arrival_hour };
        world.dispatches += 1;
        dispatched.push(PendingDispatch {
            uav: i,
            area: j,
            arrival_hour,
        });
    }

    world.hour += 1;
    Ok(HourRecord {
        hour: h,
        stations: rows,
        uav_states: world.uav_states.clone(),
        uav_battery_j: world.fleet.iter().map(|u| u.battery_j).collect(),
        dispatched,
    })
}

fn predict_energy(world: &WorldState, station: usize, h: usize, forecast: &DemandForecast) -> Result<f64> {
    let series = &world.history[station];
    let persistence = series.energy_j[h];
    match forecast {
        DemandForecast::Persistence => Ok(persistence),
        DemandForecast::Lstm(f) if h + 1 >= f.window_hours => Ok(f.predict(series, h + 1)?.max(0.0)),
        DemandForecast::Lstm(_) => Ok(persistence),
    }
}

/// Idle, and enough charge to fly out, serve an hour and fly home.
fn dispatchable(world: &WorldState, scenario: &Scenario, i: usize, j: usize) -> bool {
    let cfg = &scenario.config;
    let u = &world.fleet[i];
    if world.uav_states[i] != UavState::Idle {
        return false;
    }
    let d = u.position_m.distance(&cfg.area_center(j));
    let round_trip = 2.0 * flight_energy(&cfg.uav_energy, d, u.speed_m_s);
    u.battery_j >= round_trip + service_hour_energy(&cfg.uav_energy, u.capacity_reqs)
}

/// Drones needed at each deficit station beyond those already committed,
/// filled by cheapest pair. A pair costs the flight energy plus the drone
/// cost of serving that area.
fn greedy_targets(
    world: &WorldState,
    scenario: &Scenario,
    rows: &[StationHour],
    predicted_reqs: &[f64],
) -> Result<Vec<(usize, usize)>> {
    let cfg = &scenario.config;
    let n_areas = world.stations.len();
    let mut need = vec![0usize; n_areas];
    for j in 0..n_areas {
        if !rows[j].deficit {
            continue;
        }
        let committed = world
            .uav_states
            .iter()
            .filter(|s| matches!(s, UavState::Serving { area } | UavState::Traveling { area, .. } if *area == j))
            .count();
        let want = n_req(predicted_reqs[j].ceil().max(0.0) as u32, cfg.fleet.capacity_reqs) as usize;
        need[j] = want.saturating_sub(committed);
    }
    if need.iter().all(|&n| n == 0) {
        return Ok(Vec::new());
    }
    let mut area_cost = vec![f64::INFINITY; n_areas];
    for j in (0..n_areas).filter(|&j| need[j] > 0) {
        area_cost[j] = drone_area_cost(world, scenario, j)?;
    }
    let available: Vec<bool> = (0..world.fleet.len())
        .map(|i| world.uav_states[i] == UavState::Idle)
        .collect();
    let costs: Vec<Vec<f64>> = world
        .fleet
        .iter()
        .enumerate()
        .map(|(i, u)| {
            (0..n_areas)
                .map(|j| {
                    if need[j] == 0 || !dispatchable(world, scenario, i, j) {
                        return f64::INFINITY;
                    }
                    flight_energy(&cfg.uav_energy, u.position_m.distance(&cfg.area_center(j)), u.speed_m_s)
                        + area_cost[j]
                })
                .collect()
        })
        .collect();
    let alloc = allocate_greedy(&costs, &need, &available);
    let mut out: Vec<(usize, usize)> = alloc
        .areas
        .iter()
        .enumerate()
        .flat_map(|(j, uavs)| uavs.iter().map(move |&i| (i, j)))
        .collect();
    out.sort_unstable();
    Ok(out)
}

/// Drone cost of one more drone hovering at the centre of area `j`, with the
/// area load integrated over the station alone.
fn drone_area_cost(world: &WorldState, scenario: &Scenario, j: usize) -> Result<f64> {
    let cfg = &scenario.config;
    let h = world.hour;
    let snap = scenario.snapshot(h, j);
    let st = &world.stations[j];
    let disc = ServedDisc {
        center: st.position_m,
        radius_m: cfg.los.max_radius_m,
    };
    let load = area_load(
        snap,
        &disc,
        &[],
        Some(&st.position_m),
        &cfg.radio,
        &cfg.traffic,
        cfg.dispatch.grid_res,
    )?
    .load;
    let fleet_size = world.fleet.len().max(1);
    let phi = phi_uav(load, fleet_size, cfg.fleet.capacity_reqs)?;
    let share = f64::from(snap.service_requests.min(cfg.fleet.capacity_reqs));
    let e_uav = crate::cost::energy_uav(&cfg.uav_energy, 0.0, 3600.0, share);
    let bd = EnergyBreakdown::compose(0.0, e_uav, 0.0, crate::cost::energy_comm(&cfg.radio), &cfg.weights);
    cost_uav(
        snap,
        cfg.los.altitude_m,
        cfg.radio.path_loss_exp,
        phi,
        &bd,
        &cfg.weights,
        1.0,
    )
}

/// Aggregate results of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub horizon: usize,
    pub stations: usize,
    pub fleet_size: usize,
    pub outage_hours: usize,
    /// Runs of consecutive outage hours, counted per station.
    pub outage_events: usize,
    pub served_requests: u64,
    pub unserved_requests: u64,
    pub offered_requests: u64,
    pub dispatches: usize,
    /// Mean over stations of `horizon / (events + 1)`.
    pub mean_time_between_outages_h: f64,
    /// Fraction of station-hours with every request served.
    pub service_coverage: f64,
    /// Mean sampled throughput coverage, when sampling was enabled.
    pub mean_throughput_coverage: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct SimRun {
    pub summary: RunSummary,
    pub weekly: Vec<WeekOutage>,
    pub ledger: Vec<StationHour>,
    pub coverage_samples: Vec<(usize, f64)>,
    pub trace: Vec<HourRecord>,
    pub world: WorldState,
}

/// The scenario's fleet for drone policies, none for [`Policy::NoUav`].
pub fn policy_fleet(scenario: &Scenario, policy: &Policy) -> Vec<Uav> {
    match policy {
        Policy::NoUav => Vec::new(),
        _ => scenario.fleet.clone(),
    }
}

/// Steps the world from hour 0 for `horizon` hours.
pub fn run_sim(scenario: &Scenario, opts: &SimOptions, horizon: usize) -> Result<SimRun> {
    run_with_fleet(scenario, policy_fleet(scenario, &opts.policy), opts, horizon)
}

/// [`run_sim`] with an explicit fleet.
pub fn run_with_fleet(scenario: &Scenario, fleet: Vec<Uav>, opts: &SimOptions, horizon: usize) -> Result<SimRun> {
    scenario.config.validate()?;
    if horizon == 0 || horizon > scenario.config.horizon {
        return Err(Error::config(
            "horizon",
            format!("run length {horizon} outside 1..={}", scenario.config.horizon),
        ));
    }
    if let Policy::Static(alloc) = &opts.policy {
        alloc.validate(fleet.len(), scenario.stations.len())?;
    }
    let mut world = WorldState::new(scenario, fleet);
    world.check(scenario)?;
    let n = scenario.stations.len();
    let mut ledger = Vec::with_capacity(horizon * n);
    let mut trace = Vec::new();
    let mut coverage_samples = Vec::new();
    for _ in 0..horizon {
        let rec = step(&mut world, scenario, opts)?;
        world.check(scenario)?;
        if opts.coverage_hour_of_day == Some(rec.hour % 24) {
            coverage_samples.push((rec.hour, deployed_coverage(scenario, &world, rec.hour)?));
        }
        ledger.extend(rec.stations.iter().cloned());
        if opts.record_trace {
            trace.push(rec);
        }
    }
    let summary = summarize(&world, &ledger, horizon, &coverage_samples);
    let weekly = WeekOutage::from_ledger(&ledger, n, horizon);
    Ok(SimRun {
        summary,
        weekly,
        ledger,
        coverage_samples,
        trace,
        world,
    })
}

fn summarize(world: &WorldState, ledger: &[StationHour], horizon: usize, samples: &[(usize, f64)]) -> RunSummary {
    let n = world.stations.len();
    let mut events = vec![0usize; n];
    let mut prev_outage = vec![false; n];
    let (mut served, mut unserved, mut offered, mut covered) = (0u64, 0u64, 0u64, 0usize);
    for row in ledger {
        if row.outage && !prev_outage[row.station] {
            events[row.station] += 1;
        }
        prev_outage[row.station] = row.outage;
        served += u64::from(row.served_uav + row.served_bs);
        unserved += u64::from(row.unserved);
        offered += u64::from(row.requests);
        covered += usize::from(row.unserved == 0);
    }
    let mtbo = events.iter().map(|&e| horizon as f64 / (e + 1) as f64).sum::<f64>() / n as f64;
    RunSummary {
        horizon,
        stations: n,
        fleet_size: world.fleet.len(),
        outage_hours: world.outage_log.len(),
        outage_events: events.iter().sum(),
        served_requests: served,
        unserved_requests: unserved,
        offered_requests: offered,
        dispatches: world.dispatches,
        mean_time_between_outages_h: mtbo,
        service_coverage: covered as f64 / ledger.len().max(1) as f64,
        mean_throughput_coverage: (!samples.is_empty())
            .then(|| samples.iter().map(|s| s.1).sum::<f64>() / samples.len() as f64),
    }
}
