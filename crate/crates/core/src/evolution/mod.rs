//! Genetic search over forecaster hyperparameters and drone allocations,
//! with a greedy allocator as baseline and seed.
//!
//! Each generation trains every distinct hyperparameter set once (results
//! are cached across generations and runs), scores the allocations, records
//! best and mean fitness, and breeds the next population by elitism,
//! tournament selection, uniform crossover and mutation.

mod fitness;
mod genome;
mod greedy;
mod operators;

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;
use std::sync::{Arc, Mutex};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use fitness::{demand_series, density_violation, Fitness, Problem, Violations, DIVERGENCE_PENALTY};
pub use genome::{Allocation, Domain, Genome, HyperKey, SearchSpace};
pub use greedy::allocate_greedy;
pub use operators::{crossover, init_population, mutate, random_allocation, select, tournament};

use crate::forecaster::{
    fit_pooled, split_many, train, ForecastMetrics, Forecaster, HourlySeries, TrainConfig, TrainReport, TRAIN_FRAC,
    VALID_FRAC,
};
use crate::rng::labeled;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaConfig {
    pub population_size: usize,
    pub max_generations: usize,
    pub tournament_size: usize,
    pub crossover_prob: f64,
    pub mutation_prob: f64,
    pub elitism: usize,
    /// Generations without a better best before stopping.
    pub patience: usize,
    pub seed: u64,
    /// Epoch cap while individuals are scored; the elite gets the full budget.
    pub evolution_epochs: usize,
    pub fine_tune: bool,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            population_size: 50,
            max_generations: 40,
            tournament_size: 3,
            crossover_prob: 0.9,
            mutation_prob: 0.1,
            elitism: 2,
            patience: 15,
            seed: 42,
            evolution_epochs: 5,
            fine_tune: true,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population_size < 2 {
            return Err(Error::config("population_size", "must be >= 2"));
        }
        if self.elitism >= self.population_size {
            return Err(Error::config("elitism", "must be below population_size"));
        }
        if self.tournament_size == 0 {
            return Err(Error::config("tournament_size", "must be >= 1"));
        }
        if self.max_generations == 0 {
            return Err(Error::config("max_generations", "must be >= 1"));
        }
        if self.evolution_epochs == 0 {
            return Err(Error::config("evolution_epochs", "must be >= 1"));
        }
        for (name, p) in [
            ("crossover_prob", self.crossover_prob),
            ("mutation_prob", self.mutation_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::config(name, "must lie in [0, 1]"));
            }
        }
        Ok(())
    }
}

/// What training one hyperparameter set produced.
#[derive(Clone, Debug, PartialEq)]
pub struct ForecastOutcome {
    /// `[eval index][station]`; `None` if training failed.
    pub p_hat: Option<Vec<Vec<f64>>>,
    pub valid_loss: f64,
    pub error: Option<String>,
}

/// Training results keyed by hyperparameters. Training is deterministic
/// given the key and the training seed, so one cache may serve several
/// runs over the same problem and training config.
#[derive(Default)]
pub struct TrainingCache {
    map: Mutex<HashMap<HyperKey, Arc<ForecastOutcome>>>,
}

impl TrainingCache {
    pub fn len(&self) -> usize {
        self.map.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn get(&self, key: &HyperKey) -> Option<Arc<ForecastOutcome>> {
        self.map.lock().unwrap().get(key).cloned()
    }

    fn insert(&self, key: HyperKey, outcome: ForecastOutcome) {
        self.map.lock().unwrap().insert(key, Arc::new(outcome));
    }
}

fn individual_config(genome: &Genome, train_cfg: &TrainConfig, epochs: usize) -> TrainConfig {
    TrainConfig {
        learning_rate: genome.learning_rate,
        max_epochs: epochs,
        ..train_cfg.clone()
    }
}

fn truncated(series: &[HourlySeries], hours: usize) -> Vec<HourlySeries> {
    series.iter().map(|s| s.truncated(hours)).collect()
}

/// Trains the genome's forecaster on the evolution prefix and forecasts
/// every decision hour for every station.
pub fn train_individual(genome: &Genome, problem: &Problem, train_cfg: &TrainConfig, epochs: usize) -> ForecastOutcome {
    let cfg = individual_config(genome, train_cfg, epochs);
    let attempt = || -> Result<(Vec<Vec<f64>>, f64)> {
        let (f, _, report) = fit_pooled(
            &truncated(&problem.series, problem.train_hours),
            genome.architecture(),
            &cfg,
        )?;
        let p_hat = forecasts(&f, problem)?;
        if p_hat.iter().flatten().any(|p| !p.is_finite()) {
            return Err(Error::Divergence {
                epoch: report.best_epoch,
                reason: "non-finite forecast".into(),
            });
        }
        Ok((p_hat, report.best_valid_loss))
    };
    match attempt() {
        Ok((p_hat, valid_loss)) => ForecastOutcome {
            p_hat: Some(p_hat),
            valid_loss,
            error: None,
        },
        Err(e) => ForecastOutcome {
            p_hat: None,
            valid_loss: f64::INFINITY,
            error: Some(e.to_string()),
        },
    }
}

pub fn forecasts(f: &Forecaster, problem: &Problem) -> Result<Vec<Vec<f64>>> {
    problem
        .eval_hours
        .iter()
        .map(|&h| problem.series.iter().map(|s| f.predict(s, h)).collect())
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationStats {
    pub generation: usize,
    pub best_fitness: f64,
    pub mean_fitness: f64,
    /// Fraction of individuals with a nonzero penalty.
    pub penalty_rate: f64,
}

/// Resumable run state, saved after every generation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaState {
    /// Index of the generation `population` belongs to.
    pub generation: usize,
    pub population: Vec<Genome>,
    pub history: Vec<GenerationStats>,
    pub best: Option<(Genome, Fitness)>,
    pub stale: usize,
    pub finished: bool,
}

impl GaState {
    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::Checkpoint(e.to_string()))
    }
}

#[derive(Clone, Debug)]
pub struct RunResult {
    pub best: Genome,
    /// Fitness the elite earned during evolution.
    pub fitness: Fitness,
    pub violations: Violations,
    /// Fitness re-scored with the final model's forecasts.
    pub final_fitness: Fitness,
    pub forecaster: Forecaster,
    pub train_report: TrainReport,
    pub test_metrics: ForecastMetrics,
    pub fine_tuned: bool,
    pub history: Vec<GenerationStats>,
}

pub fn write_history_csv(path: &Path, history: &[GenerationStats]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["generation", "best_fitness", "mean_fitness", "penalty_rate"])?;
    for s in history {
        w.write_record(&[
            s.generation.to_string(),
            s.best_fitness.to_string(),
            s.mean_fitness.to_string(),
            s.penalty_rate.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Best genome as indented JSON.
pub fn write_genome(path: &Path, genome: &Genome) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(serde_json::to_string_pretty(genome)?.as_bytes())?;
    Ok(())
}

/// Scores a population, training each distinct hyperparameter set once.
pub fn score_population(
    population: &[Genome],
    problem: &Problem,
    train_cfg: &TrainConfig,
    epochs: usize,
    cache: &TrainingCache,
) -> Result<Vec<(Fitness, Violations, Arc<ForecastOutcome>)>> {
    let mut missing: Vec<&Genome> = Vec::new();
    let mut keys = std::collections::HashSet::new();
    for g in population {
        let key = g.hyper_key();
        if cache.get(&key).is_none() && keys.insert(key) {
            missing.push(g);
        }
    }
    let trained: Vec<(HyperKey, ForecastOutcome)> = missing
        .par_iter()
        .map(|g| (g.hyper_key(), train_individual(g, problem, train_cfg, epochs)))
        .collect();
    for (k, o) in trained {
        cache.insert(k, o);
    }
    population
        .par_iter()
        .map(|g| {
            let outcome = cache.get(&g.hyper_key()).expect("trained above");
            let (f, v) = problem.evaluate(&g.allocation, outcome.p_hat.as_deref())?;
            Ok((f, v, outcome))
        })
        .collect()
}

fn argmin(fitness: &[Fitness]) -> usize {
    (0..fitness.len())
        .reduce(|b, i| if fitness[i].total < fitness[b].total { i } else { b })
        .expect("nonempty population")
}

fn next_generation(
    population: &[Genome],
    fitness: &[Fitness],
    space: &SearchSpace,
    cfg: &GaConfig,
    n_uavs: usize,
    generation: usize,
) -> Vec<Genome> {
    let mut rng = labeled(cfg.seed, &format!("ga/generation/{generation}"));
    let mut order: Vec<usize> = (0..population.len()).collect();
    order.sort_by(|&a, &b| fitness[a].total.total_cmp(&fitness[b].total).then(a.cmp(&b)));
    let mut next: Vec<Genome> = order.iter().take(cfg.elitism).map(|&i| population[i].clone()).collect();
    while next.len() < cfg.population_size {
        let (a, b) = select(fitness, cfg, 1, &mut rng)[0];
        let (x, y) = crossover(&population[a], &population[b], cfg, n_uavs, &mut rng);
        next.push(mutate(&x, space, cfg, n_uavs, &mut rng));
        if next.len() < cfg.population_size {
            next.push(mutate(&y, space, cfg, n_uavs, &mut rng));
        }
    }
    next
}

/// Fresh state: generation 0, seeded with the greedy allocation.
pub fn initial_state(problem: &Problem, space: &SearchSpace, cfg: &GaConfig) -> Result<GaState> {
    cfg.validate()?;
    space.validate()?;
    let costs = greedy_costs(problem)?;
    let available: Vec<bool> = problem.fleet.iter().map(|u| u.available).collect();
    let seed = allocate_greedy(&costs, &problem.need, &available);
    Ok(GaState {
        generation: 0,
        population: init_population(cfg, space, problem.n_uavs(), problem.n_areas(), &[seed]),
        history: Vec::new(),
        best: None,
        stale: 0,
        finished: false,
    })
}

/// Drone-area cost matrix for the greedy seed: the overall cost with only
/// that drone deployed and observed expenditure standing in for forecasts.
pub fn greedy_costs(problem: &Problem) -> Result<Vec<Vec<f64>>> {
    let (n, a) = (problem.n_uavs(), problem.n_areas());
    (0..n)
        .map(|i| {
            (0..a)
                .map(|j| {
                    let mut alloc = Allocation::empty(a);
                    alloc.areas[j].push(i);
                    Ok(problem.evaluate(&alloc, Some(&problem.p_true))?.0.raw_cost)
                })
                .collect()
        })
        .collect()
}

/// Runs generations until `max_generations` or `patience` generations
/// without improvement, calling `checkpoint` after each, then trains and
/// optionally fine-tunes the elite.
pub fn run(
    problem: &Problem,
    space: &SearchSpace,
    cfg: &GaConfig,
    train_cfg: &TrainConfig,
    cache: &TrainingCache,
    resume: Option<GaState>,
    checkpoint: &mut dyn FnMut(&GaState) -> Result<()>,
) -> Result<RunResult> {
    cfg.validate()?;
    train_cfg.validate()?;
    let mut state = match resume {
        Some(s) => s,
        None => initial_state(problem, space, cfg)?,
    };
    for g in &state.population {
        g.validate(space, problem.n_uavs(), problem.n_areas())?;
    }

    while !state.finished {
        let g = state.generation;
        let scored = score_population(&state.population, problem, train_cfg, cfg.evolution_epochs, cache)?;
        if scored.iter().all(|(_, _, o)| o.p_hat.is_none()) {
            let reason = scored.iter().find_map(|(_, _, o)| o.error.clone()).unwrap_or_default();
            return Err(Error::Divergence {
                epoch: g,
                reason: format!("every individual of generation {g} failed to train: {reason}"),
            });
        }
        let fitness: Vec<Fitness> = scored.iter().map(|(f, _, _)| *f).collect();
        let best = argmin(&fitness);
        let n = fitness.len() as f64;
        state.history.push(GenerationStats {
            generation: g,
            best_fitness: fitness[best].total,
            mean_fitness: fitness.iter().map(|f| f.total).sum::<f64>() / n,
            penalty_rate: fitness.iter().filter(|f| f.penalty > 0.0).count() as f64 / n,
        });
        let improved = state.best.as_ref().is_none_or(|(_, f)| fitness[best].total < f.total);
        if improved {
            state.best = Some((state.population[best].clone(), fitness[best]));
            state.stale = 0;
        } else {
            state.stale += 1;
        }
        state.finished = g + 1 >= cfg.max_generations || state.stale >= cfg.patience;
        if !state.finished {
            state.population = next_generation(&state.population, &fitness, space, cfg, problem.n_uavs(), g);
        }
        state.generation = g + 1;
        checkpoint(&state)?;
    }

    let (best, fitness) = state
        .best
        .clone()
        .ok_or_else(|| Error::Invariant("run finished without a best genome".into()))?;
    finish(problem, cfg, train_cfg, best, fitness, state.history)
}

/// Rebuilds the elite's model exactly as scored, then, when fine-tuning is
/// on and some drone is available, continues training on the longer prefix.
fn finish(
    problem: &Problem,
    cfg: &GaConfig,
    train_cfg: &TrainConfig,
    best: Genome,
    fitness: Fitness,
    history: Vec<GenerationStats>,
) -> Result<RunResult> {
    let evo_cfg = individual_config(&best, train_cfg, cfg.evolution_epochs);
    let (mut forecaster, mut splits, mut report) = fit_pooled(
        &truncated(&problem.series, problem.train_hours),
        best.architecture(),
        &evo_cfg,
    )?;
    let fine_tuned =
        cfg.fine_tune && problem.fleet.iter().any(|u| u.available) && problem.fine_tune_hours > problem.train_hours;
    if fine_tuned {
        let full_cfg = individual_config(&best, train_cfg, train_cfg.max_epochs);
        splits = split_many(
            &truncated(&problem.series, problem.fine_tune_hours),
            full_cfg.window_hours,
            TRAIN_FRAC,
            VALID_FRAC,
        )?;
        report = train(&mut forecaster.model, &splits, &full_cfg)?;
        forecaster.scaler = splits.scaler.clone();
    }
    let test_metrics = forecaster.evaluate(if splits.test.is_empty() {
        &splits.valid
    } else {
        &splits.test
    })?;
    let p_hat = forecasts(&forecaster, problem)?;
    let (final_fitness, violations) = problem.evaluate(&best.allocation, Some(&p_hat))?;
    Ok(RunResult {
        best,
        fitness,
        violations,
        final_fitness,
        forecaster,
        train_report: report,
        test_metrics,
        fine_tuned,
        history,
    })
}
