//! Population initialisation, tournament selection, uniform crossover and
//! per-gene mutation.

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::Rng;

use super::fitness::Fitness;
use super::genome::{Allocation, Genome, SearchSpace};
use super::GaConfig;
use crate::rng::labeled;

/// Random owner for each drone: unassigned or any area, uniformly.
pub fn random_allocation<R: Rng>(n_uavs: usize, n_areas: usize, rng: &mut R) -> Allocation {
    let owners: Vec<Option<usize>> = (0..n_uavs)
        .map(|_| {
            let pick = rng.gen_range(0..=n_areas);
            (pick < n_areas).then_some(pick)
        })
        .collect();
    Allocation::from_owners(&owners, n_areas)
}

/// `population_size` genomes, hyperparameters drawn from `space`. The
/// first `seeds.len()` individuals take the given allocations, the rest
/// random ones.
pub fn init_population(
    cfg: &GaConfig,
    space: &SearchSpace,
    n_uavs: usize,
    n_areas: usize,
    seeds: &[Allocation],
) -> Vec<Genome> {
    let mut rng = labeled(cfg.seed, "ga/init");
    (0..cfg.population_size)
        .map(|k| {
            let alloc = match seeds.get(k) {
                Some(a) => a.clone(),
                None => random_allocation(n_uavs, n_areas, &mut rng),
            };
            Genome::sample(space, alloc, &mut rng)
        })
        .collect()
}

/// Tournament over `tournament_size` distinct individuals; lowest total
/// wins, the earliest drawn on ties.
pub fn tournament<R: Rng>(fitness: &[Fitness], size: usize, rng: &mut R) -> usize {
    let size = size.clamp(1, fitness.len());
    sample(rng, fitness.len(), size)
        .into_iter()
        .reduce(|best, i| {
            if fitness[i].total < fitness[best].total {
                i
            } else {
                best
            }
        })
        .expect("nonempty population")
}

pub fn select<R: Rng>(fitness: &[Fitness], cfg: &GaConfig, pairs: usize, rng: &mut R) -> Vec<(usize, usize)> {
    (0..pairs)
        .map(|_| {
            (
                tournament(fitness, cfg.tournament_size, rng),
                tournament(fitness, cfg.tournament_size, rng),
            )
        })
        .collect()
}

/// With probability `crossover_prob`, swaps each gene (and each area's
/// drone list) between the children with probability one half; doubly
/// assigned drones are then kept only in their lowest-indexed area.
pub fn crossover<R: Rng>(a: &Genome, b: &Genome, cfg: &GaConfig, n_uavs: usize, rng: &mut R) -> (Genome, Genome) {
    let (mut x, mut y) = (a.clone(), b.clone());
    if !rng.gen_bool(cfg.crossover_prob) {
        return (x, y);
    }
    macro_rules! maybe_swap {
        ($($field:ident),*) => {
            $(if rng.gen_bool(0.5) {
                std::mem::swap(&mut x.$field, &mut y.$field);
            })*
        };
    }
    maybe_swap!(
        learning_rate,
        hidden_layers,
        neurons_per_layer,
        activation,
        dropout_rate,
        lstm_units,
        forget_bias
    );
    for (ax, ay) in x.allocation.areas.iter_mut().zip(y.allocation.areas.iter_mut()) {
        if rng.gen_bool(0.5) {
            std::mem::swap(ax, ay);
        }
    }
    x.allocation.repair(n_uavs);
    y.allocation.repair(n_uavs);
    (x, y)
}

/// Each hyperparameter gene and each drone's assignment is redrawn, to a
/// different value where the domain allows, with probability
/// `mutation_prob`.
pub fn mutate<R: Rng>(genome: &Genome, space: &SearchSpace, cfg: &GaConfig, n_uavs: usize, rng: &mut R) -> Genome {
    let p = cfg.mutation_prob;
    let mut g = genome.clone();
    if rng.gen_bool(p) {
        g.learning_rate = space.learning_rate.resample(g.learning_rate, rng);
    }
    if rng.gen_bool(p) {
        g.hidden_layers = space.hidden_layers.resample(g.hidden_layers as f64, rng) as usize;
    }
    if rng.gen_bool(p) {
        g.neurons_per_layer = space.neurons_per_layer.resample(g.neurons_per_layer as f64, rng) as usize;
    }
    if rng.gen_bool(p) {
        let others: Vec<_> = space
            .activation
            .iter()
            .copied()
            .filter(|&a| a != g.activation)
            .collect();
        if let Some(&a) = others.choose(rng) {
            g.activation = a;
        }
    }
    if rng.gen_bool(p) {
        g.dropout_rate = space.dropout_rate.resample(g.dropout_rate, rng);
    }
    if rng.gen_bool(p) {
        g.lstm_units = space.lstm_units.resample(g.lstm_units as f64, rng) as usize;
    }
    if rng.gen_bool(p) {
        g.forget_bias = space.forget_bias.resample(g.forget_bias, rng);
    }
    let n_areas = g.allocation.areas.len();
    let mut owners = g.allocation.owners(n_uavs);
    for owner in owners.iter_mut() {
        if rng.gen_bool(p) {
            // one reassignment move to any other slot, "unassigned" included
            let slots = n_areas + 1;
            let current = owner.unwrap_or(n_areas);
            let mut pick = rng.gen_range(0..slots - 1);
            if pick >= current {
                pick += 1;
            }
            *owner = (pick < n_areas).then_some(pick);
        }
    }
    g.allocation = Allocation::from_owners(&owners, n_areas);
    g
}
