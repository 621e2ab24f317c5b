//! World description: configuration, stations, drones and demand.
//!
//! A [`ScenarioConfig`] is the single JSON-serializable description of an
//! experiment. [`Scenario::build`] turns it into concrete base stations with
//! solar traces, a drone fleet and hour-by-hour demand snapshots.

mod demand;
mod solar;

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use crate::cost::{CostWeights, UavEnergyParams};
use crate::error::{Error, Result};
use crate::rng::derive_seed;
pub(crate) use demand::uniform_in_disc;
pub use demand::{diurnal_factor, synth_demand, write_demand_csv, DemandParams};
pub use solar::{load_solar_trace, synth_solar, write_solar_csv, SolarParams, HOURS_PER_YEAR};

/// Planar coordinates in metres.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Where `k` drones hover over a cell: the centre for a single drone,
/// otherwise evenly spaced on a ring of `radius_m`.
pub fn hover_points(center: Point, k: usize, radius_m: f64) -> Vec<Point> {
    if k == 1 {
        return vec![center];
    }
    (0..k)
        .map(|i| {
            let a = 2.0 * std::f64::consts::PI * i as f64 / k as f64;
            Point::new(center.x + radius_m * a.cos(), center.y + radius_m * a.sin())
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadioParams {
    /// System bandwidth in Hz.
    pub bandwidth_hz: f64,
    /// UAV transmit power in W.
    pub tx_power_w: f64,
    /// Dimensionless antenna-height geometry constant.
    pub geometry_const: f64,
    pub path_loss_exp: f64,
    pub noise_psd_dbm_hz: f64,
    pub channel_gain_db: f64,
    pub comm_energy_coeff: f64,
    pub n_links: usize,
    /// Ground base station transmit power in W.
    pub bs_tx_power_w: f64,
    /// Ground base station antenna height in m.
    pub bs_mast_height_m: f64,
}

impl Default for RadioParams {
    fn default() -> Self {
        Self {
            bandwidth_hz: 20.0e6,
            tx_power_w: 10.0,
            geometry_const: 1.5,
            path_loss_exp: 3.0,
            noise_psd_dbm_hz: -174.0,
            channel_gain_db: 10.0,
            comm_energy_coeff: 0.5,
            n_links: 1,
            bs_tx_power_w: 1.0,
            bs_mast_height_m: 10.0,
        }
    }
}

impl RadioParams {
    pub fn validate(&self) -> Result<()> {
        positive("radio.bandwidth_hz", self.bandwidth_hz)?;
        positive("radio.tx_power_w", self.tx_power_w)?;
        positive("radio.geometry_const", self.geometry_const)?;
        if !(self.path_loss_exp >= 2.0) {
            return Err(Error::config("radio.path_loss_exp", "must be >= 2"));
        }
        finite("radio.noise_psd_dbm_hz", self.noise_psd_dbm_hz)?;
        finite("radio.channel_gain_db", self.channel_gain_db)?;
        non_negative("radio.comm_energy_coeff", self.comm_energy_coeff)?;
        if self.n_links == 0 {
            return Err(Error::config("radio.n_links", "must be >= 1"));
        }
        positive("radio.bs_tx_power_w", self.bs_tx_power_w)?;
        positive("radio.bs_mast_height_m", self.bs_mast_height_m)
    }
}

/// Per-user request process.
///
/// `offered_traffic_req_s` is carried as an independent field; its ratio to
/// the other two is not enforced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrafficModel {
    pub arrival_rate_req_s: f64,
    pub mean_packet_bits: f64,
    pub offered_traffic_req_s: f64,
    /// Users added to every area on top of the generated demand.
    pub extra_users: u32,
}

impl Default for TrafficModel {
    fn default() -> Self {
        Self {
            arrival_rate_req_s: 2.0,
            mean_packet_bits: 200.0 * 8.0,
            offered_traffic_req_s: 0.01,
            extra_users: 0,
        }
    }
}

impl TrafficModel {
    pub fn validate(&self) -> Result<()> {
        positive("traffic.arrival_rate_req_s", self.arrival_rate_req_s)?;
        positive("traffic.mean_packet_bits", self.mean_packet_bits)?;
        non_negative("traffic.offered_traffic_req_s", self.offered_traffic_req_s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LosGeometry {
    pub altitude_m: f64,
    pub min_elev_rad: f64,
    pub max_elev_rad: f64,
    /// Largest horizontal distance a drone serves with acceptable quality.
    pub max_radius_m: f64,
    /// Spacing between neighbouring small cells.
    pub cell_length_m: f64,
}

impl Default for LosGeometry {
    fn default() -> Self {
        Self {
            altitude_m: 150.0,
            min_elev_rad: 0.5,
            max_elev_rad: 1.4,
            max_radius_m: 100.0,
            cell_length_m: 500.0,
        }
    }
}

impl LosGeometry {
    pub fn validate(&self) -> Result<()> {
        if !(self.min_elev_rad > 0.0
            && self.min_elev_rad < self.max_elev_rad
            && self.max_elev_rad <= std::f64::consts::FRAC_PI_2)
        {
            return Err(Error::config(
                "los.min_elev_rad/max_elev_rad",
                "need 0 < min < max <= pi/2",
            ));
        }
        positive("los.altitude_m", self.altitude_m)?;
        positive("los.max_radius_m", self.max_radius_m)?;
        positive("los.cell_length_m", self.cell_length_m)
    }
}

/// Small-cell energy and capacity defaults applied to every station.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BsEnergyParams {
    /// Cell user capacity.
    pub user_capacity: u32,
    pub battery_capacity_j: f64,
    /// Initial state of charge as a fraction of capacity.
    pub initial_soc: f64,
    /// Energy drawn from the battery per served request.
    pub energy_per_load: f64,
    /// Drone charging time entering the station energy balance, in hours.
    pub charge_time_h: f64,
    /// Load-units drawn per hour of drone charging.
    pub charge_power: f64,
    pub packet_loss_frac: f64,
}

impl Default for BsEnergyParams {
    fn default() -> Self {
        Self {
            user_capacity: 300,
            battery_capacity_j: 7.2e6,
            initial_soc: 0.5,
            energy_per_load: 3000.0,
            charge_time_h: 1.0,
            charge_power: 1.0,
            packet_loss_frac: 0.05,
        }
    }
}

impl BsEnergyParams {
    pub fn validate(&self) -> Result<()> {
        if self.user_capacity == 0 {
            return Err(Error::config("bs_defaults.user_capacity", "must be >= 1"));
        }
        non_negative("bs_defaults.battery_capacity_j", self.battery_capacity_j)?;
        unit_interval("bs_defaults.initial_soc", self.initial_soc)?;
        non_negative("bs_defaults.energy_per_load", self.energy_per_load)?;
        non_negative("bs_defaults.charge_time_h", self.charge_time_h)?;
        non_negative("bs_defaults.charge_power", self.charge_power)?;
        unit_interval("bs_defaults.packet_loss_frac", self.packet_loss_frac)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FleetParams {
    /// Requests one drone serves per hour.
    pub capacity_reqs: u32,
    /// Users one drone can admit when it hovers over a cell.
    pub user_capacity: u32,
    pub speed_m_s: f64,
    pub battery_capacity_j: f64,
}

impl Default for FleetParams {
    fn default() -> Self {
        Self {
            capacity_reqs: 50,
            user_capacity: 250,
            speed_m_s: 20.0,
            battery_capacity_j: 1.8e6,
        }
    }
}

impl FleetParams {
    pub fn validate(&self) -> Result<()> {
        if self.capacity_reqs == 0 {
            return Err(Error::config("fleet.capacity_reqs", "must be >= 1"));
        }
        positive("fleet.speed_m_s", self.speed_m_s)?;
        non_negative("fleet.battery_capacity_j", self.battery_capacity_j)
    }
}

/// Knobs of the deficit trigger and drone release rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DispatchParams {
    /// Predicted need is multiplied by this before comparing with stored energy.
    pub deficit_margin: f64,
    /// Drones leave a station once its battery is above this fraction.
    pub release_soc: f64,
    /// Grid resolution used when integrating area load for dispatch costs.
    pub grid_res: usize,
}

impl Default for DispatchParams {
    fn default() -> Self {
        Self {
            deficit_margin: 1.0,
            release_soc: 0.3,
            grid_res: 16,
        }
    }
}

impl DispatchParams {
    pub fn validate(&self) -> Result<()> {
        positive("dispatch.deficit_margin", self.deficit_margin)?;
        unit_interval("dispatch.release_soc", self.release_soc)?;
        if self.grid_res < 2 {
            return Err(Error::config("dispatch.grid_res", "must be >= 2"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub n_uavs: usize,
    pub n_areas: usize,
    pub horizon: usize,
    pub rng_seed: u64,
    pub radio: RadioParams,
    pub traffic: TrafficModel,
    pub weights: CostWeights,
    pub los: LosGeometry,
    pub uav_energy: UavEnergyParams,
    pub bs_defaults: BsEnergyParams,
    pub fleet: FleetParams,
    pub demand: DemandParams,
    pub solar: SolarParams,
    pub dispatch: DispatchParams,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            n_uavs: 10,
            n_areas: 5,
            horizon: 8 * 168,
            rng_seed: 42,
            radio: RadioParams::default(),
            traffic: TrafficModel::default(),
            weights: CostWeights::default(),
            los: LosGeometry::default(),
            uav_energy: UavEnergyParams::default(),
            bs_defaults: BsEnergyParams::default(),
            fleet: FleetParams::default(),
            demand: DemandParams::default(),
            solar: SolarParams::default(),
            dispatch: DispatchParams::default(),
        }
    }
}

impl ScenarioConfig {
    /// The 5-station, 10-drone, 8-week synthetic reference scenario.
    pub fn standard() -> Self {
        Self::default()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_areas == 0 {
            return Err(Error::config("n_areas", "must be >= 1"));
        }
        if self.horizon == 0 {
            return Err(Error::config("horizon", "must be >= 1"));
        }
        self.radio.validate()?;
        self.traffic.validate()?;
        self.weights.validate()?;
        self.los.validate()?;
        self.uav_energy.validate()?;
        self.bs_defaults.validate()?;
        self.fleet.validate()?;
        self.demand.validate()?;
        self.solar.validate()?;
        self.dispatch.validate()
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json_str(&fs::read_to_string(path)?)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json_pretty())?;
        Ok(())
    }

    pub fn seed_for(&self, label: &str) -> u64 {
        derive_seed(self.rng_seed, label)
    }

    /// Horizontal position of area `index` (stations sit on a line).
    pub fn area_center(&self, index: usize) -> Point {
        Point::new(index as f64 * self.los.cell_length_m, 0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseStation {
    pub id: usize,
    pub position_m: Point,
    pub user_capacity: u32,
    pub active_users: u32,
    pub battery_j: f64,
    pub battery_capacity_j: f64,
    /// Harvested energy per hour, in joules.
    pub solar_trace: Vec<f64>,
    pub energy_per_load: f64,
    pub charge_time_h: f64,
    pub charge_power: f64,
    pub packet_loss_frac: f64,
}

impl BaseStation {
    pub fn from_params(id: usize, position_m: Point, params: &BsEnergyParams, solar_trace: Vec<f64>) -> Self {
        Self {
            id,
            position_m,
            user_capacity: params.user_capacity,
            active_users: 0,
            battery_j: params.battery_capacity_j * params.initial_soc,
            battery_capacity_j: params.battery_capacity_j,
            solar_trace,
            energy_per_load: params.energy_per_load,
            charge_time_h: params.charge_time_h,
            charge_power: params.charge_power,
            packet_loss_frac: params.packet_loss_frac,
        }
    }

    /// Harvest during `hour`; traces shorter than the horizon wrap around.
    pub fn harvest(&self, hour: usize) -> f64 {
        if self.solar_trace.is_empty() {
            0.0
        } else {
            self.solar_trace[hour % self.solar_trace.len()]
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.user_capacity == 0 {
            return Err(Error::Invariant(format!("station {}: zero user capacity", self.id)));
        }
        if !(self.battery_j >= 0.0) || !(0.0..=1.0).contains(&self.packet_loss_frac) {
            return Err(Error::Invariant(format!(
                "station {}: battery or packet loss out of range",
                self.id
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Uav {
    pub id: usize,
    pub altitude_m: f64,
    pub capacity_reqs: u32,
    pub battery_j: f64,
    pub battery_capacity_j: f64,
    pub speed_m_s: f64,
    pub available: bool,
    pub position_m: Point,
    pub home_station: usize,
}

impl Uav {
    /// The availability flag as the 0/1 multiplier used in the cost functions.
    pub fn availability(&self) -> f64 {
        if self.available {
            1.0
        } else {
            0.0
        }
    }

    /// 3-D distance to a ground point.
    pub fn distance_to(&self, ground: &Point) -> f64 {
        self.position_m.distance(ground).hypot(self.altitude_m)
    }

    pub fn validate(&self) -> Result<()> {
        if self.capacity_reqs == 0 || !(self.speed_m_s > 0.0) || !(self.battery_j >= 0.0) {
            return Err(Error::Invariant(format!(
                "uav {}: capacity, speed or battery out of range",
                self.id
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemandSnapshot {
    pub area_id: usize,
    pub hour: usize,
    pub service_requests: u32,
    pub active_users: u32,
    pub user_positions_m: Vec<Point>,
}

/// A fully materialized world ready for simulation.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub stations: Vec<BaseStation>,
    pub fleet: Vec<Uav>,
    /// Hour-major: `demand[hour * n_areas + area]`.
    pub demand: Vec<DemandSnapshot>,
}

impl Scenario {
    pub fn build(config: ScenarioConfig) -> Result<Self> {
        config.validate()?;
        let days = config.horizon.div_ceil(24);
        let stations = (0..config.n_areas)
            .map(|j| {
                let seed = config.seed_for(&format!("solar/{j}"));
                let trace = solar::synth_solar_with(seed, days, &config.solar);
                BaseStation::from_params(j, config.area_center(j), &config.bs_defaults, trace)
            })
            .collect();
        let fleet = build_fleet(&config, config.n_uavs);
        let mut demand = synth_demand(
            config.seed_for("demand"),
            config.n_areas,
            config.horizon,
            config.demand.base_users,
            &config.demand,
        );
        let shift = config.los.cell_length_m - demand::GENERATOR_SPACING_M;
        if shift != 0.0 {
            for snap in &mut demand {
                let dx = snap.area_id as f64 * shift;
                for p in &mut snap.user_positions_m {
                    p.x += dx;
                }
            }
        }
        Ok(Self {
            config,
            stations,
            fleet,
            demand,
        })
    }

    /// Replace the synthetic traces with loaded ones; stations get trace `j % traces.len()`.
    pub fn with_solar_traces(mut self, traces: &[Vec<f64>]) -> Result<Self> {
        if traces.is_empty() {
            return Err(Error::Shape("no solar traces supplied".into()));
        }
        for (j, st) in self.stations.iter_mut().enumerate() {
            st.solar_trace = traces[j % traces.len()].clone();
        }
        Ok(self)
    }

    pub fn snapshot(&self, hour: usize, area: usize) -> &DemandSnapshot {
        &self.demand[hour * self.config.n_areas + area]
    }
}

/// Drones start fully charged at their home station, spread round-robin.
pub fn build_fleet(config: &ScenarioConfig, n: usize) -> Vec<Uav> {
    (0..n)
        .map(|i| {
            let home = i % config.n_areas;
            Uav {
                id: i,
                altitude_m: config.los.altitude_m,
                capacity_reqs: config.fleet.capacity_reqs,
                battery_j: config.fleet.battery_capacity_j,
                battery_capacity_j: config.fleet.battery_capacity_j,
                speed_m_s: config.fleet.speed_m_s,
                available: true,
                position_m: config.area_center(home),
                home_station: home,
            }
        })
        .collect()
}

fn finite(field: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(field, "must be finite"))
    }
}

pub(crate) fn positive(field: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::config(field, format!("must be > 0, got {v}")))
    }
}

pub(crate) fn non_negative(field: &str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::config(field, format!("must be >= 0, got {v}")))
    }
}

fn unit_interval(field: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::config(field, format!("must lie in [0, 1], got {v}")))
    }
}
