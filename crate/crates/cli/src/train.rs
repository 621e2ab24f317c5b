//! `train` evolves genomes against a scenario; `retrain` continues a saved
//! model on new hourly data.

use std::path::PathBuf;

use anyhow::Result;
use serde::{Deserialize, Serialize};
use uavgrid_core::evolution::{
    self, write_genome, write_history_csv, Domain, Fitness, GaConfig, GaState, GenerationStats, Genome, Problem,
    SearchSpace, TrainingCache, Violations,
};
use uavgrid_core::forecaster::{
    checkpoint, split_series, train as train_model, ForecastMetrics, TrainConfig, TrainReport, TRAIN_FRAC, VALID_FRAC,
};
use uavgrid_core::rng::derive_seed;
use uavgrid_core::scenario::ScenarioConfig;

use crate::evaluate::load_series;
use crate::manifest::{write_json, Run};
use crate::simulate::{build_scenario, load_scenario_config};
use crate::{Budget, CliError, OutputArgs};

pub struct Args {
    pub config: Option<PathBuf>,
    pub data: Option<PathBuf>,
    pub synthetic: bool,
    pub seed: Option<u64>,
    pub generations: Option<usize>,
    pub population: Option<usize>,
    pub budget: Budget,
    pub resume: Option<PathBuf>,
    pub output: OutputArgs,
    pub argv: Vec<String>,
}

/// Everything a training run depends on, hashed into the manifest.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainRunConfig {
    pub scenario: ScenarioConfig,
    pub ga: GaConfig,
    pub train: TrainConfig,
    pub space: SearchSpace,
    /// Prefix each individual trains on during evolution.
    pub evolution_hours: usize,
    /// First decision hour; the elite fine-tunes on everything before it.
    pub eval_start: usize,
    pub eval_len: usize,
    pub solar: Option<PathBuf>,
}

impl TrainRunConfig {
    pub fn new(scenario: ScenarioConfig, budget: Budget, seed: u64) -> Self {
        let horizon = scenario.horizon;
        let eval_len = 24.min(horizon / 4).max(1);
        let eval_start = horizon - eval_len;
        let (ga, train, space, evolution_hours) = match budget {
            Budget::Full => (
                GaConfig::default(),
                TrainConfig::default(),
                SearchSpace::default(),
                eval_start,
            ),
            Budget::Desk => (
                GaConfig {
                    population_size: 8,
                    max_generations: 5,
                    evolution_epochs: 2,
                    ..GaConfig::default()
                },
                TrainConfig {
                    max_epochs: 10,
                    early_stop_patience: 3,
                    batch_size: 64,
                    ..TrainConfig::default()
                },
                SearchSpace {
                    learning_rate: Domain::LogUniform { lo: 0.003, hi: 0.1 },
                    hidden_layers: Domain::Integer { lo: 1, hi: 2 },
                    neurons_per_layer: Domain::Integer { lo: 50, hi: 64 },
                    lstm_units: Domain::Integer { lo: 20, hi: 32 },
                    ..SearchSpace::default()
                },
                (eval_start / 2).max(eval_start.min(7 * 24)),
            ),
        };
        Self {
            scenario,
            ga: GaConfig {
                seed: derive_seed(seed, "ga"),
                ..ga
            },
            train: TrainConfig {
                seed: derive_seed(seed, "train"),
                ..train
            },
            space,
            evolution_hours,
            eval_start,
            eval_len,
            solar: None,
        }
    }
}

#[derive(Serialize)]
struct TrainSummary<'a> {
    best: &'a Genome,
    fitness: &'a Fitness,
    final_fitness: &'a Fitness,
    violations: &'a Violations,
    fine_tuned: bool,
    test_metrics: &'a ForecastMetrics,
    train_report: &'a TrainReport,
    history: &'a [GenerationStats],
    distinct_hyperparameter_sets: usize,
}

pub fn run(args: Args) -> Result<()> {
    if args.data.is_none() && !args.synthetic {
        return Err(CliError::Input("no training data: pass --data FILE or --synthetic".into()).into());
    }
    let mut scenario_cfg = load_scenario_config(args.config.as_ref())?;
    if let Some(seed) = args.seed {
        scenario_cfg.rng_seed = seed;
    }
    let seed = scenario_cfg.rng_seed;
    let mut cfg = TrainRunConfig::new(scenario_cfg, args.budget, seed);
    if let Some(g) = args.generations {
        cfg.ga.max_generations = g;
    }
    if let Some(p) = args.population {
        cfg.ga.population_size = p;
        cfg.ga.elitism = cfg.ga.elitism.min(p.saturating_sub(1));
    }
    cfg.solar = args.data.clone();
    cfg.ga.validate()?;
    cfg.train.validate()?;
    cfg.space.validate()?;

    let scenario = build_scenario(cfg.scenario.clone(), args.data.as_ref())?;
    let problem = Problem::from_scenario(&scenario, cfg.evolution_hours, cfg.eval_start, cfg.eval_len)?;
    let resume = match &args.resume {
        None => None,
        Some(p) => {
            let state = GaState::load(p)?;
            for g in &state.population {
                g.validate(&cfg.space, problem.n_uavs(), problem.n_areas())
                    .map_err(|e| CliError::Artifact(format!("GA state {} does not fit this run: {e}", p.display())))?;
            }
            Some(state)
        }
    };

    let run = Run::start(
        "train",
        args.argv,
        args.config.clone(),
        seed,
        &cfg,
        &args.output.out,
        args.output.force,
    )?;
    let state_path = run.path("ga_state.json");
    let history_path = run.path("history.csv");
    let cache = TrainingCache::default();
    let mut on_generation = |state: &GaState| -> uavgrid_core::Result<()> {
        state.save(&state_path)?;
        write_history_csv(&history_path, &state.history)?;
        if let Some(s) = state.history.last() {
            println!(
                "generation {}: best {:.6} mean {:.6} penalised {:.0}%",
                s.generation,
                s.best_fitness,
                s.mean_fitness,
                100.0 * s.penalty_rate
            );
        }
        Ok(())
    };
    let result = evolution::run(
        &problem,
        &cfg.space,
        &cfg.ga,
        &cfg.train,
        &cache,
        resume,
        &mut on_generation,
    )?;

    write_genome(&run.path("best_genome.json"), &result.best)?;
    checkpoint::save(&result.forecaster, &run.path("model.json"))?;
    write_history_csv(&history_path, &result.history)?;
    write_json(
        &run.path("summary.json"),
        &TrainSummary {
            best: &result.best,
            fitness: &result.fitness,
            final_fitness: &result.final_fitness,
            violations: &result.violations,
            fine_tuned: result.fine_tuned,
            test_metrics: &result.test_metrics,
            train_report: &result.train_report,
            history: &result.history,
            distinct_hyperparameter_sets: cache.len(),
        },
    )?;
    println!(
        "best fitness {:.6} (final model {:.6}), held-out {}",
        result.fitness.total, result.final_fitness.total, result.test_metrics
    );
    println!("results in {}", run.dir.display());
    run.finish()
}

pub struct RetrainArgs {
    pub model: PathBuf,
    pub data: Option<PathBuf>,
    pub synthetic: bool,
    pub seed: u64,
    pub epochs: Option<usize>,
    pub output: OutputArgs,
    pub argv: Vec<String>,
}

#[derive(Serialize)]
struct RetrainConfig<'a> {
    model: &'a PathBuf,
    model_sha256: String,
    data: Option<&'a PathBuf>,
    train: &'a TrainConfig,
}

#[derive(Serialize)]
struct RetrainSummary<'a> {
    before: &'a ForecastMetrics,
    after: &'a ForecastMetrics,
    train_report: &'a TrainReport,
}

pub fn retrain(args: RetrainArgs) -> Result<()> {
    let text = crate::manifest::read_text(&args.model, "model")?;
    let mut forecaster =
        checkpoint::from_json(&text).map_err(|e| CliError::Artifact(format!("model {}: {e}", args.model.display())))?;
    let series = load_series(args.data.as_deref(), args.synthetic, args.seed)?;
    let cfg = TrainConfig {
        max_epochs: args.epochs.unwrap_or(30),
        window_hours: forecaster.window_hours,
        seed: derive_seed(args.seed, "retrain"),
        ..TrainConfig::default()
    };
    cfg.validate()?;
    let splits = split_series(&series, cfg.window_hours, TRAIN_FRAC, VALID_FRAC)?;
    let resolved = RetrainConfig {
        model: &args.model,
        model_sha256: uavgrid_core::rng::content_hash(text.as_bytes()),
        data: args.data.as_ref(),
        train: &cfg,
    };
    let run = Run::start(
        "retrain",
        args.argv,
        None,
        args.seed,
        &resolved,
        &args.output.out,
        args.output.force,
    )?;

    // Scores the old weights under the new data's scaling, which is what they continue from.
    forecaster.scaler = splits.scaler.clone();
    let held_out = if splits.test.is_empty() {
        &splits.valid
    } else {
        &splits.test
    };
    let before = forecaster.evaluate(held_out)?;
    let report = train_model(&mut forecaster.model, &splits, &cfg)?;
    let after = forecaster.evaluate(held_out)?;
    checkpoint::save(&forecaster, &run.path("model.json"))?;
    write_json(
        &run.path("summary.json"),
        &RetrainSummary {
            before: &before,
            after: &after,
            train_report: &report,
        },
    )?;
    println!("held-out before {before}");
    println!("held-out after  {after}");
    println!("results in {}", run.dir.display());
    run.finish()
}
