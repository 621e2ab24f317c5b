//! Throughput coverage of a cell with hovering drones.
//!
//! Drones admit line-of-sight users best link first up to their user
//! capacity; the ground station admits the rest, best link first, up to its
//! own capacity. A user is covered when admitted with spectral efficiency at
//! or above [`COVERAGE_THRESHOLD_BPS_HZ`].

use std::cmp::Ordering;

use crate::error::Result;
use crate::radio::{bs_sinr, los_visible, sinr, throughput_coverage, LinkSample};
use crate::scenario::{hover_points, BaseStation, Point, Scenario, ScenarioConfig, Uav};

use super::{UavState, WorldState};

pub const COVERAGE_THRESHOLD_BPS_HZ: f64 = 0.045;

fn by_sinr_desc(a: &(f64, usize, usize), b: &(f64, usize, usize)) -> Ordering {
    b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2))
}

/// One link sample per user. `cell_drones` index into `deployed`, which
/// holds every transmitting drone (all of them interfere).
pub fn cell_links(
    users: &[Point],
    bs: &BaseStation,
    cell_drones: &[usize],
    deployed: &[Uav],
    user_capacity: u32,
    cfg: &ScenarioConfig,
) -> Result<Vec<LinkSample>> {
    let mut candidates = Vec::new();
    for (k, p) in users.iter().enumerate() {
        for &d in cell_drones {
            let uav = &deployed[d];
            if los_visible(p, uav, &cfg.los) {
                candidates.push((sinr(p, uav, deployed, &cfg.radio)?, k, d));
            }
        }
    }
    candidates.sort_by(by_sinr_desc);
    let mut links: Vec<Option<LinkSample>> = vec![None; users.len()];
    let mut admitted = vec![0u32; deployed.len()];
    for (s, k, d) in candidates {
        if links[k].is_some() || admitted[d] >= user_capacity {
            continue;
        }
        admitted[d] += 1;
        let uav = &deployed[d];
        links[k] = Some(LinkSample::new(users[k], Some(uav.id), uav.distance_to(&users[k]), s));
    }

    let mut rest: Vec<(f64, usize, usize)> = (0..users.len())
        .filter(|&k| links[k].is_none())
        .map(|k| (bs_sinr(&users[k], &bs.position_m, &cfg.radio), k, 0))
        .collect();
    rest.sort_by(by_sinr_desc);
    for (n, (s, k, _)) in rest.into_iter().enumerate() {
        let d = users[k].distance(&bs.position_m).hypot(cfg.radio.bs_mast_height_m);
        let s = if n < bs.user_capacity as usize { s } else { 0.0 };
        links[k] = Some(LinkSample::new(users[k], None, d, s));
    }
    Ok(links.into_iter().map(|l| l.expect("every user linked")).collect())
}

/// Mean throughput coverage over the cells with users, 1 when none has any.
pub(crate) fn mean_cell_coverage(per_cell: &[Vec<LinkSample>]) -> Result<f64> {
    let mut sum = 0.0;
    let mut n = 0usize;
    for links in per_cell.iter().filter(|l| !l.is_empty()) {
        sum += throughput_coverage(links, COVERAGE_THRESHOLD_BPS_HZ)?;
        n += 1;
    }
    Ok(if n == 0 { 1.0 } else { sum / n as f64 })
}

/// Drones placed over their cells at `altitude_m`, spread on the hover ring.
pub(crate) fn place_drones(cfg: &ScenarioConfig, fleet: &[Uav], cells: &[Vec<usize>], altitude_m: f64) -> Vec<Uav> {
    let mut placed = Vec::new();
    for (a, members) in cells.iter().enumerate() {
        let spots = hover_points(cfg.area_center(a), members.len(), cfg.los.max_radius_m / 2.0);
        for (&i, p) in members.iter().zip(spots) {
            placed.push(Uav {
                altitude_m,
                position_m: p,
                available: true,
                ..fleet[i].clone()
            });
        }
    }
    placed
}

/// Indices into `placed` of the drones over each cell.
pub(crate) fn cell_indices(cells: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let mut next = 0;
    cells
        .iter()
        .map(|m| {
            let idx = (next..next + m.len()).collect();
            next += m.len();
            idx
        })
        .collect()
}

/// Throughput coverage at `hour` with the drones currently serving.
pub fn deployed_coverage(scenario: &Scenario, world: &WorldState, hour: usize) -> Result<f64> {
    let cfg = &scenario.config;
    let n = world.stations.len();
    let mut cells = vec![Vec::new(); n];
    for (i, s) in world.uav_states.iter().enumerate() {
        if let UavState::Serving { area } = *s {
            cells[area].push(i);
        }
    }
    let placed = place_drones(cfg, &world.fleet, &cells, cfg.los.altitude_m);
    let idx = cell_indices(&cells);
    let per_cell = (0..n)
        .map(|a| {
            let users = &scenario.snapshot(hour, a).user_positions_m;
            cell_links(
                users,
                &world.stations[a],
                &idx[a],
                &placed,
                cfg.fleet.user_capacity,
                cfg,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    mean_cell_coverage(&per_cell)
}
