//! Genomes, their search space and drone-to-area allocations.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::forecaster::{Activation, Architecture, FEATURES};
use crate::{Error, Result};

/// Value set of one numeric gene.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    Uniform { lo: f64, hi: f64 },
    LogUniform { lo: f64, hi: f64 },
    Integer { lo: i64, hi: i64 },
    Choices(Vec<f64>),
}

impl Domain {
    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match self {
            Domain::Uniform { lo, hi } => {
                if lo == hi {
                    *lo
                } else {
                    rng.gen_range(*lo..=*hi)
                }
            }
            Domain::LogUniform { lo, hi } => {
                if lo == hi {
                    *lo
                } else {
                    rng.gen_range(lo.ln()..=hi.ln()).exp().clamp(*lo, *hi)
                }
            }
            Domain::Integer { lo, hi } => rng.gen_range(*lo..=*hi) as f64,
            Domain::Choices(values) => *values.choose(rng).expect("validated nonempty"),
        }
    }

    /// A value different from `current` when the domain allows one.
    pub fn resample<R: Rng>(&self, current: f64, rng: &mut R) -> f64 {
        match self {
            Domain::Integer { lo, hi } if hi > lo => {
                let v = rng.gen_range(*lo..*hi) as f64;
                if v >= current {
                    v + 1.0
                } else {
                    v
                }
            }
            Domain::Choices(values) if values.iter().any(|&v| v != current) => {
                let others: Vec<f64> = values.iter().copied().filter(|&v| v != current).collect();
                *others.choose(rng).unwrap()
            }
            _ => self.sample(rng),
        }
    }

    pub fn contains(&self, v: f64) -> bool {
        match self {
            Domain::Uniform { lo, hi } | Domain::LogUniform { lo, hi } => (*lo..=*hi).contains(&v),
            Domain::Integer { lo, hi } => v.fract() == 0.0 && (*lo as f64..=*hi as f64).contains(&v),
            Domain::Choices(values) => values.contains(&v),
        }
    }

    fn validate(&self, name: &str) -> Result<()> {
        let ok = match self {
            Domain::Uniform { lo, hi } => lo.is_finite() && hi.is_finite() && lo <= hi,
            Domain::LogUniform { lo, hi } => *lo > 0.0 && hi.is_finite() && lo <= hi,
            Domain::Integer { lo, hi } => lo <= hi,
            Domain::Choices(values) => !values.is_empty() && values.iter().all(|v| v.is_finite()),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::config(name, "empty or ill-formed gene domain"))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchSpace {
    pub learning_rate: Domain,
    pub hidden_layers: Domain,
    pub neurons_per_layer: Domain,
    pub activation: Vec<Activation>,
    pub dropout_rate: Domain,
    pub lstm_units: Domain,
    pub forget_bias: Domain,
}

impl Default for SearchSpace {
    fn default() -> Self {
        Self {
            learning_rate: Domain::LogUniform { lo: 0.001, hi: 0.1 },
            hidden_layers: Domain::Integer { lo: 1, hi: 5 },
            neurons_per_layer: Domain::Integer { lo: 50, hi: 500 },
            activation: Activation::ALL.to_vec(),
            dropout_rate: Domain::Uniform { lo: 0.0, hi: 0.5 },
            lstm_units: Domain::Integer { lo: 20, hi: 200 },
            forget_bias: Domain::Uniform { lo: 1.0, hi: 5.0 },
        }
    }
}

impl SearchSpace {
    pub fn validate(&self) -> Result<()> {
        self.learning_rate.validate("learning_rate")?;
        self.hidden_layers.validate("hidden_layers")?;
        self.neurons_per_layer.validate("neurons_per_layer")?;
        self.dropout_rate.validate("dropout_rate")?;
        self.lstm_units.validate("lstm_units")?;
        self.forget_bias.validate("forget_bias")?;
        if self.activation.is_empty() {
            return Err(Error::config("activation", "needs at least one choice"));
        }
        let full = SearchSpace::default();
        let inside = |d: &Domain, outer: &Domain| match d {
            Domain::Uniform { lo, hi } | Domain::LogUniform { lo, hi } => outer.contains(*lo) && outer.contains(*hi),
            Domain::Integer { lo, hi } => outer.contains(*lo as f64) && outer.contains(*hi as f64),
            Domain::Choices(v) => v.iter().all(|&x| outer.contains(x)),
        };
        for (name, d, outer) in [
            ("learning_rate", &self.learning_rate, &full.learning_rate),
            ("hidden_layers", &self.hidden_layers, &full.hidden_layers),
            ("neurons_per_layer", &self.neurons_per_layer, &full.neurons_per_layer),
            ("dropout_rate", &self.dropout_rate, &full.dropout_rate),
            ("lstm_units", &self.lstm_units, &full.lstm_units),
            ("forget_bias", &self.forget_bias, &full.forget_bias),
        ] {
            if !inside(d, outer) {
                return Err(Error::config(name, "domain leaves the permitted range"));
            }
        }
        Ok(())
    }
}

/// Drones assigned to each area, ids ascending. A drone appears at most once.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Allocation {
    pub areas: Vec<Vec<usize>>,
}

impl Allocation {
    pub fn empty(n_areas: usize) -> Self {
        Self {
            areas: vec![Vec::new(); n_areas],
        }
    }

    /// Built from each drone's area, `None` meaning unassigned.
    pub fn from_owners(owners: &[Option<usize>], n_areas: usize) -> Self {
        let mut a = Self::empty(n_areas);
        for (uav, owner) in owners.iter().enumerate() {
            if let Some(j) = owner {
                a.areas[*j].push(uav);
            }
        }
        a
    }

    pub fn owners(&self, n_uavs: usize) -> Vec<Option<usize>> {
        let mut owners = vec![None; n_uavs];
        for (j, uavs) in self.areas.iter().enumerate() {
            for &i in uavs {
                if i < n_uavs {
                    owners[i] = Some(j);
                }
            }
        }
        owners
    }

    pub fn assigned(&self) -> usize {
        self.areas.iter().map(Vec::len).sum()
    }

    pub fn validate(&self, n_uavs: usize, n_areas: usize) -> Result<()> {
        if self.areas.len() != n_areas {
            return Err(Error::Invariant(format!(
                "allocation covers {} areas, scenario has {n_areas}",
                self.areas.len()
            )));
        }
        let mut seen = vec![false; n_uavs];
        for (j, uavs) in self.areas.iter().enumerate() {
            if uavs.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Invariant(format!(
                    "area {j} drone list is not strictly ascending"
                )));
            }
            for &i in uavs {
                if i >= n_uavs {
                    return Err(Error::Invariant(format!("area {j} names drone {i} of {n_uavs}")));
                }
                if seen[i] {
                    return Err(Error::Invariant(format!("drone {i} assigned twice")));
                }
                seen[i] = true;
            }
        }
        Ok(())
    }

    /// Keeps each drone in the first area (by index) that lists it.
    pub(crate) fn repair(&mut self, n_uavs: usize) {
        let mut seen = vec![false; n_uavs];
        for uavs in &mut self.areas {
            uavs.sort_unstable();
            uavs.dedup();
            uavs.retain(|&i| i < n_uavs && !std::mem::replace(&mut seen[i], true));
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Genome {
    pub learning_rate: f64,
    pub hidden_layers: usize,
    pub neurons_per_layer: usize,
    pub activation: Activation,
    pub dropout_rate: f64,
    pub lstm_units: usize,
    pub forget_bias: f64,
    pub allocation: Allocation,
}

/// Hyperparameters only; identical keys train identical models.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HyperKey {
    bits: [u64; 3],
    ints: [usize; 3],
    activation: Activation,
}

impl Genome {
    pub fn sample<R: Rng>(space: &SearchSpace, allocation: Allocation, rng: &mut R) -> Self {
        Self {
            learning_rate: space.learning_rate.sample(rng),
            hidden_layers: space.hidden_layers.sample(rng) as usize,
            neurons_per_layer: space.neurons_per_layer.sample(rng) as usize,
            activation: *space.activation.choose(rng).expect("validated nonempty"),
            dropout_rate: space.dropout_rate.sample(rng),
            lstm_units: space.lstm_units.sample(rng) as usize,
            forget_bias: space.forget_bias.sample(rng),
            allocation,
        }
    }

    pub fn architecture(&self) -> Architecture {
        Architecture {
            input_dim: FEATURES,
            hidden_units: self.lstm_units,
            dense_layers: vec![self.neurons_per_layer; self.hidden_layers.saturating_sub(1)],
            activation: self.activation,
            dropout_rate: self.dropout_rate,
            forget_bias: self.forget_bias,
        }
    }

    pub fn hyper_key(&self) -> HyperKey {
        HyperKey {
            bits: [
                self.learning_rate.to_bits(),
                self.dropout_rate.to_bits(),
                self.forget_bias.to_bits(),
            ],
            ints: [self.hidden_layers, self.neurons_per_layer, self.lstm_units],
            activation: self.activation,
        }
    }

    pub fn validate(&self, space: &SearchSpace, n_uavs: usize, n_areas: usize) -> Result<()> {
        let checks = [
            ("learning_rate", space.learning_rate.contains(self.learning_rate)),
            ("hidden_layers", space.hidden_layers.contains(self.hidden_layers as f64)),
            (
                "neurons_per_layer",
                space.neurons_per_layer.contains(self.neurons_per_layer as f64),
            ),
            ("activation", space.activation.contains(&self.activation)),
            ("dropout_rate", space.dropout_rate.contains(self.dropout_rate)),
            ("lstm_units", space.lstm_units.contains(self.lstm_units as f64)),
            ("forget_bias", space.forget_bias.contains(self.forget_bias)),
        ];
        if let Some((name, _)) = checks.iter().find(|(_, ok)| !ok) {
            return Err(Error::Invariant(format!("gene {name} outside its domain")));
        }
        self.allocation.validate(n_uavs, n_areas)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn default_space_is_valid_and_samples_inside() {
        let space = SearchSpace::default();
        space.validate().unwrap();
        let mut rng = seeded(1);
        for _ in 0..500 {
            let g = Genome::sample(&space, Allocation::empty(3), &mut rng);
            g.validate(&space, 4, 3).unwrap();
        }
    }

    #[test]
    fn log_uniform_learning_rates_stay_in_range() {
        let d = SearchSpace::default().learning_rate;
        let mut rng = seeded(2);
        let xs: Vec<f64> = (0..10_000).map(|_| d.sample(&mut rng)).collect();
        assert!(xs.iter().all(|&x| (0.001..=0.1).contains(&x)));
        // log-uniform: about half the mass below the geometric midpoint 0.01
        let below = xs.iter().filter(|&&x| x < 0.01).count() as f64 / xs.len() as f64;
        assert!((below - 0.5).abs() < 0.03, "{below}");
    }

    #[test]
    fn resample_changes_discrete_values() {
        let mut rng = seeded(3);
        let d = Domain::Integer { lo: 1, hi: 3 };
        let c = Domain::Choices(vec![0.5, 0.7]);
        for _ in 0..200 {
            let v = d.resample(2.0, &mut rng);
            assert!(v != 2.0 && d.contains(v));
            assert_eq!(c.resample(0.5, &mut rng), 0.7);
        }
        assert_eq!(Domain::Integer { lo: 4, hi: 4 }.resample(4.0, &mut rng), 4.0);
    }

    #[test]
    fn narrower_spaces_must_nest() {
        let mut s = SearchSpace {
            lstm_units: Domain::Choices(vec![20.0, 40.0, 60.0]),
            ..SearchSpace::default()
        };
        s.validate().unwrap();
        s.lstm_units = Domain::Choices(vec![10.0]);
        assert!(s.validate().is_err());
        let s = SearchSpace {
            learning_rate: Domain::Uniform { lo: 0.0005, hi: 0.01 },
            ..SearchSpace::default()
        };
        assert!(s.validate().is_err());
    }

    #[test]
    fn allocation_round_trip_and_repair() {
        let owners = vec![Some(1), None, Some(0), Some(1)];
        let a = Allocation::from_owners(&owners, 2);
        assert_eq!(a.areas, vec![vec![2], vec![0, 3]]);
        assert_eq!(a.owners(4), owners);
        a.validate(4, 2).unwrap();

        let mut bad = Allocation {
            areas: vec![vec![3, 0], vec![0, 1]],
        };
        assert!(bad.validate(4, 2).is_err());
        bad.repair(4);
        assert_eq!(bad.areas, vec![vec![0, 3], vec![1]]);
        bad.validate(4, 2).unwrap();
    }

    #[test]
    fn architecture_mapping() {
        let mut rng = seeded(4);
        let mut g = Genome::sample(&SearchSpace::default(), Allocation::empty(1), &mut rng);
        g.hidden_layers = 3;
        g.neurons_per_layer = 64;
        let a = g.architecture();
        assert_eq!(a.dense_layers, vec![64, 64]);
        assert_eq!(a.hidden_units, g.lstm_units);
        g.hidden_layers = 1;
        assert!(g.architecture().dense_layers.is_empty());
    }
}
