use uavgrid_core::evolution::{
    run, score_population, Allocation, Domain, Fitness, GaConfig, GaState, Genome, Problem, SearchSpace, TrainingCache,
};
use uavgrid_core::forecaster::{Activation, HourlySeries, TrainConfig};
use uavgrid_core::radio::{area_load, ServedDisc};
use uavgrid_core::scenario::{build_fleet, BaseStation, DemandSnapshot, Point, Scenario, ScenarioConfig};

fn ln_factorial(k: u64) -> f64 {
    (1..=k).map(|i| (i as f64).ln()).sum()
}

fn pmf(k: u64, mean: f64) -> f64 {
    (k as f64 * mean.ln() - mean - ln_factorial(k)).exp()
}

fn toy_config() -> ScenarioConfig {
    let mut cfg = ScenarioConfig {
        n_uavs: 2,
        n_areas: 2,
        horizon: 24 * 12,
        ..ScenarioConfig::default()
    };
    cfg.fleet.capacity_reqs = 1;
    cfg.dispatch.grid_res = 8;
    cfg.bs_defaults.user_capacity = 2;
    cfg
}

fn snapshot(area: usize, hour: usize, requests: u32, users: u32, center: Point) -> DemandSnapshot {
    DemandSnapshot {
        area_id: area,
        hour,
        service_requests: requests,
        active_users: users,
        user_positions_m: (0..users)
            .map(|k| Point::new(center.x + 10.0 * k as f64, center.y))
            .collect(),
    }
}

fn flat_series(hours: usize, users: f64, energy: f64) -> HourlySeries {
    HourlySeries {
        start_hour: 0,
        users: vec![users; hours],
        energy_j: vec![energy; hours],
    }
}

/// Two areas, two drones, two decision hours, small enough that every
/// density function is far from underflow.
fn toy_problem(cfg: &ScenarioConfig) -> Problem {
    let stations: Vec<BaseStation> = (0..2)
        .map(|j| {
            BaseStation::from_params(
                j,
                cfg.area_center(j),
                &cfg.bs_defaults,
                vec![1000.0 * (j + 1) as f64; 24],
            )
        })
        .collect();
    let mut fleet = build_fleet(cfg, 2);
    fleet[1].battery_j = 0.6 * fleet[1].battery_capacity_j;
    let eval_hours = vec![200, 201];
    let snapshots = vec![
        vec![
            snapshot(0, 200, 2, 3, cfg.area_center(0)),
            snapshot(1, 200, 1, 2, cfg.area_center(1)),
        ],
        vec![
            snapshot(0, 201, 3, 3, cfg.area_center(0)),
            snapshot(1, 201, 2, 1, cfg.area_center(1)),
        ],
    ];
    let p_true = vec![vec![6000.0, 3000.0], vec![9000.0, 6000.0]];
    Problem::assemble(
        cfg.clone(),
        stations,
        fleet,
        eval_hours,
        snapshots,
        p_true,
        vec![1, 1],
        vec![flat_series(202, 2.0, 3000.0); 2],
        168,
        200,
    )
    .unwrap()
}

/// Overall cost of one hour, written out from the raw inputs.
fn oracle_hour(problem: &Problem, alloc: &Allocation, e: usize, p_hat: &[f64]) -> f64 {
    let cfg = &problem.config;
    let w = &cfg.weights;
    let ue = &cfg.uav_energy;
    let radio = &cfg.radio;
    let noise = 10f64.powf((radio.noise_psd_dbm_hz - 30.0) / 10.0) * radio.bandwidth_hz;
    let e_comm = radio.comm_energy_coeff
        * radio.n_links as f64
        * radio.tx_power_w
        * (1.0 + 10f64.powf(radio.channel_gain_db / 10.0) * radio.tx_power_w / noise).log2();
    let hour = problem.eval_hours[e];
    let mut uav_sum = 0.0;
    let mut area_sum = 0.0;
    for (j, uavs) in alloc.areas.iter().enumerate() {
        let snap = &problem.snapshots[e][j];
        let bs = &problem.stations[j];
        let center = bs.position_m;
        assert!(uavs.len() <= 1, "oracle handles at most one drone per area");
        let placed: Vec<_> = uavs
            .iter()
            .map(|&i| uavgrid_core::scenario::Uav {
                position_m: center,
                ..problem.fleet[i].clone()
            })
            .collect();
        let disc = ServedDisc {
            center,
            radius_m: cfg.los.max_radius_m,
        };
        let lam = area_load(
            snap,
            &disc,
            &placed,
            Some(&center),
            radio,
            &cfg.traffic,
            cfg.dispatch.grid_res,
        )
        .unwrap()
        .load;
        let offloaded = (snap.service_requests as f64).min(uavs.len() as f64 * cfg.fleet.capacity_reqs as f64);
        let e_bs = bs.energy_per_load * (offloaded + bs.solar_trace[hour % 24] - bs.charge_power * bs.charge_time_h);
        let mut area_uav = 0.0;
        let mut area_travel = 0.0;
        let mut area_comm = 0.0;
        for &i in uavs {
            let d = problem.fleet[i].position_m.distance(&center);
            let t = d / problem.fleet[i].speed_m_s;
            let e_uav = ue.e_per_m * d + ue.e_per_s * 3600.0 + ue.e_per_load * offloaded
                - ue.e_per_s * ue.charge_time_h * 3600.0;
            let e_travel = ue.e_travel_per_m * d * t;
            let e_total_uav = w.w_uav * e_uav + w.w_travel * e_travel + w.w_comm * e_comm;
            let phi_u = pmf(cfg.fleet.capacity_reqs as u64, lam / uavs.len() as f64);
            let dist = problem.fleet[i].altitude_m;
            let c_u = phi_u
                * dist.powf(radio.path_loss_exp)
                * (w.zeta1 * snap.service_requests as f64 + w.zeta2 * snap.active_users as f64 + e_total_uav);
            uav_sum += c_u + w.backend_cost;
            area_uav += e_uav;
            area_travel += e_travel;
            area_comm += e_comm;
        }
        let _ = area_uav;
        let e_total_area = -w.w_bs * e_bs + w.w_travel * area_travel + w.w_comm * area_comm;
        let phi_a = pmf(
            snap.service_requests as u64,
            snap.active_users as f64 / bs.user_capacity as f64,
        );
        let c_a =
            phi_a * lam * (w.zeta1 * snap.service_requests as f64 + w.zeta2 * bs.user_capacity as f64 + e_total_area);
        let u_t = uavs.len().max(1) as f64;
        area_sum += (c_a + p_hat[j]) / u_t + w.lstm_weight * (p_hat[j] - problem.p_true[e][j]).abs() / u_t;
    }
    uav_sum / problem.fleet.len() as f64 + area_sum
}

#[test]
fn fitness_matches_spreadsheet_recomputation() {
    let cfg = toy_config();
    let problem = toy_problem(&cfg);
    let p_hat = vec![vec![6500.0, 2500.0], vec![8000.0, 6100.0]];
    for alloc in [
        Allocation {
            areas: vec![vec![0], vec![1]],
        },
        Allocation {
            areas: vec![vec![1], vec![0]],
        },
        Allocation {
            areas: vec![vec![], vec![0]],
        },
        Allocation {
            areas: vec![vec![], vec![]],
        },
    ] {
        let (f, _) = problem.evaluate(&alloc, Some(&p_hat)).unwrap();
        let want = (oracle_hour(&problem, &alloc, 0, &p_hat[0]) + oracle_hour(&problem, &alloc, 1, &p_hat[1])) / 2.0;
        assert!(
            (f.raw_cost - want).abs() <= 1e-9 * want.abs(),
            "{alloc:?}: {} vs {want}",
            f.raw_cost
        );
        assert!(f.total >= f.raw_cost);
    }
    // the drone terms are live, not underflowed
    let (f1, _) = problem
        .evaluate(
            &Allocation {
                areas: vec![vec![0], vec![]],
            },
            Some(&p_hat),
        )
        .unwrap();
    let (f0, _) = problem
        .evaluate(
            &Allocation {
                areas: vec![vec![], vec![]],
            },
            Some(&p_hat),
        )
        .unwrap();
    assert!((f1.raw_cost - f0.raw_cost).abs() > 1.0);
}

#[test]
fn penalties_trip_and_clear() {
    let cfg = toy_config();
    let mut problem = toy_problem(&cfg);
    let p = problem.p_true.clone();
    let (_, v) = problem
        .evaluate(
            &Allocation {
                areas: vec![vec![0], vec![1]],
            },
            Some(&p),
        )
        .unwrap();
    assert_eq!(v.unavailable, 0.0);
    assert_eq!(v.uncovered, 0.0);
    assert_eq!(v.battery, 0.0);
    assert_eq!(v.density, 0.0);

    problem.fleet[1].available = false;
    let (f, v) = problem
        .evaluate(
            &Allocation {
                areas: vec![vec![0], vec![1]],
            },
            Some(&p),
        )
        .unwrap();
    assert_eq!(v.unavailable, 1.0);
    assert_eq!(v.uncovered, 1.0);
    assert!(f.penalty > 0.0 && f.total > f.raw_cost);

    problem.fleet[1].available = true;
    problem.fleet[0].battery_j = 10.0;
    let (_, v) = problem
        .evaluate(
            &Allocation {
                areas: vec![vec![0], vec![1]],
            },
            Some(&p),
        )
        .unwrap();
    assert!(v.battery > 0.0);

    let (f, v) = problem
        .evaluate(
            &Allocation {
                areas: vec![vec![0], vec![1]],
            },
            None,
        )
        .unwrap();
    assert!(v.diverged > 0.0 && f.total.is_finite());
}

#[test]
fn zero_demand_empty_allocation_is_free() {
    let mut cfg = toy_config();
    cfg.demand.base_users = 0;
    cfg.demand.min_requests = 0;
    cfg.demand.max_requests = 0;
    let scenario = Scenario::build(cfg).unwrap();
    let problem = Problem::from_scenario(&scenario, 168, 200, 6).unwrap();
    assert_eq!(problem.need, vec![0, 0]);
    let (f, v) = problem
        .evaluate(&Allocation::empty(2), Some(&problem.p_true.clone()))
        .unwrap();
    assert_eq!(v.total(), 0.0);
    assert_eq!(f.penalty, 0.0);
    // station terms only, and with no demand they vanish
    assert_eq!(f.raw_cost, 0.0);
}

fn small_problem() -> Problem {
    let cfg = ScenarioConfig {
        n_uavs: 3,
        n_areas: 2,
        horizon: 24 * 12,
        ..ScenarioConfig::default()
    };
    let scenario = Scenario::build(cfg).unwrap();
    Problem::from_scenario(&scenario, 24 * 8, 24 * 10, 6).unwrap()
}

fn quick_train() -> TrainConfig {
    TrainConfig {
        window_hours: 12,
        batch_size: 64,
        max_epochs: 4,
        ..TrainConfig::default()
    }
}

fn small_space() -> SearchSpace {
    SearchSpace {
        learning_rate: Domain::Choices(vec![0.01, 0.05]),
        hidden_layers: Domain::Choices(vec![1.0, 2.0]),
        neurons_per_layer: Domain::Choices(vec![50.0]),
        activation: vec![Activation::Tanh, Activation::Relu],
        dropout_rate: Domain::Choices(vec![0.0, 0.1]),
        lstm_units: Domain::Choices(vec![20.0]),
        forget_bias: Domain::Choices(vec![1.0, 2.0]),
    }
}

#[test]
fn one_generation_of_two_returns_the_better() {
    let problem = small_problem();
    let cfg = GaConfig {
        population_size: 2,
        max_generations: 1,
        elitism: 1,
        evolution_epochs: 2,
        fine_tune: false,
        ..GaConfig::default()
    };
    let cache = TrainingCache::default();
    let result = run(
        &problem,
        &small_space(),
        &cfg,
        &quick_train(),
        &cache,
        None,
        &mut |_| Ok(()),
    )
    .unwrap();
    let state = uavgrid_core::evolution::initial_state(&problem, &small_space(), &cfg).unwrap();
    let scored = score_population(&state.population, &problem, &quick_train(), 2, &cache).unwrap();
    let best = if scored[1].0.total < scored[0].0.total { 1 } else { 0 };
    assert_eq!(result.best, state.population[best]);
    assert_eq!(result.fitness, scored[best].0);
    assert_eq!(result.history.len(), 1);
}

#[test]
fn elitist_history_is_monotone_deterministic_and_resumable() {
    let problem = small_problem();
    let cfg = GaConfig {
        population_size: 6,
        max_generations: 4,
        patience: 10,
        evolution_epochs: 2,
        fine_tune: false,
        seed: 9,
        ..GaConfig::default()
    };
    let space = small_space();
    let cache = TrainingCache::default();
    let mut states: Vec<GaState> = Vec::new();
    let full = run(&problem, &space, &cfg, &quick_train(), &cache, None, &mut |s| {
        states.push(s.clone());
        Ok(())
    })
    .unwrap();
    assert_eq!(full.history.len(), 4);
    assert!(full.history.windows(2).all(|w| w[1].best_fitness <= w[0].best_fitness));
    for s in &states {
        for g in &s.population {
            g.validate(&space, 3, 2).unwrap();
        }
    }

    // a fresh cache gives the same run bit for bit
    let again = run(
        &problem,
        &space,
        &cfg,
        &quick_train(),
        &TrainingCache::default(),
        None,
        &mut |_| Ok(()),
    )
    .unwrap();
    assert_eq!(again.history, full.history);
    assert_eq!(again.best, full.best);

    // resuming from the state saved after generation 2 continues identically
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("state.json");
    states[1].save(&path).unwrap();
    let resumed_state = GaState::load(&path).unwrap();
    assert_eq!(resumed_state.generation, 2);
    let resumed = run(
        &problem,
        &space,
        &cfg,
        &quick_train(),
        &cache,
        Some(resumed_state),
        &mut |_| Ok(()),
    )
    .unwrap();
    assert_eq!(resumed.history, full.history);
    assert_eq!(resumed.best, full.best);
    assert_eq!(resumed.fitness, full.fitness);
}

#[test]
fn fine_tuning_runs_when_drones_are_available() {
    let problem = small_problem();
    let cfg = GaConfig {
        population_size: 2,
        max_generations: 1,
        elitism: 1,
        evolution_epochs: 1,
        fine_tune: true,
        ..GaConfig::default()
    };
    let r = run(
        &problem,
        &small_space(),
        &cfg,
        &quick_train(),
        &TrainingCache::default(),
        None,
        &mut |_| Ok(()),
    )
    .unwrap();
    assert!(r.fine_tuned);
    assert!(r.final_fitness.total.is_finite());
    assert!(r.test_metrics.rmse >= r.test_metrics.mae);
}

#[test]
fn all_diverging_generation_aborts() {
    let mut problem = small_problem();
    for s in &mut problem.series {
        s.energy_j[5] = f64::NAN;
    }
    let cfg = GaConfig {
        population_size: 2,
        max_generations: 2,
        elitism: 1,
        evolution_epochs: 1,
        ..GaConfig::default()
    };
    let err = run(
        &problem,
        &small_space(),
        &cfg,
        &quick_train(),
        &TrainingCache::default(),
        None,
        &mut |_| Ok(()),
    );
    assert!(matches!(err, Err(uavgrid_core::Error::Divergence { epoch: 0, .. })));
}

#[test]
fn fitness_total_composition() {
    let f = Fitness::new(3.0, 0.5, 10.0);
    assert_eq!(f.total, 8.0);
    let g = Genome {
        learning_rate: 0.01,
        hidden_layers: 1,
        neurons_per_layer: 50,
        activation: Activation::Tanh,
        dropout_rate: 0.0,
        lstm_units: 20,
        forget_bias: 1.0,
        allocation: Allocation::empty(2),
    };
    assert_eq!(g.hyper_key(), g.clone().hyper_key());
}
