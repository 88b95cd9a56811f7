//! Graph-level crossover and mutation, plus fitness-proportional parent
//! sampling. Operators are pure functions of their inputs and an RNG stream.

mod crossover;
mod edit;
mod mutation;

use std::collections::BTreeMap;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use crossover::{crossover, crossover_traced, CrossoverMode};
pub use mutation::{mutate, mutate_traced, mutate_with};

/// Deterministic generator used by every stochastic operator.
pub type RngStream = ChaCha8Rng;

/// Independent stream for one offspring slot of one generation.
pub fn rng_stream(seed: u64, generation: u32, slot: u32) -> RngStream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((u64::from(generation) << 32) | u64::from(slot));
    rng
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeneticError {
    #[error("cannot sample parents from an empty population")]
    EmptyPopulation,
    #[error("fitness value {0} is not finite")]
    NonFiniteFitness(f64),
    #[error("invalid mutation table: {0}")]
    InvalidTable(String),
}

/// Structural limits every operator output must satisfy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OperatorLimits {
    pub max_heavy_atoms: usize,
    pub max_ring_size: usize,
    pub retries: u32,
}

impl Default for OperatorLimits {
    fn default() -> Self {
        OperatorLimits {
            max_heavy_atoms: 60,
            max_ring_size: 8,
            retries: 10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MutationKind {
    BondInsert,
    BondDelete,
    AtomInsert,
    AtomDelete,
    BondOrderSwap,
    AtomChange,
}

impl MutationKind {
    pub const ALL: [MutationKind; 6] = [
        MutationKind::BondInsert,
        MutationKind::BondDelete,
        MutationKind::AtomInsert,
        MutationKind::AtomDelete,
        MutationKind::BondOrderSwap,
        MutationKind::AtomChange,
    ];

    fn index(self) -> usize {
        MutationKind::ALL.iter().position(|&k| k == self).expect("listed")
    }
}

/// Probability of each mutation kind. Serialized as a kind → weight map;
/// kinds missing from the map get weight zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BTreeMap<MutationKind, f64>", into = "BTreeMap<MutationKind, f64>")]
pub struct MutationTable {
    weights: [f64; 6],
}

impl MutationTable {
    pub fn uniform() -> Self {
        MutationTable {
            weights: [1.0 / 6.0; 6],
        }
    }

    pub fn only(kind: MutationKind) -> Self {
        let mut weights = [0.0; 6];
        weights[kind.index()] = 1.0;
        MutationTable { weights }
    }

    pub fn new(entries: &[(MutationKind, f64)]) -> Result<Self, GeneticError> {
        let mut weights = [0.0; 6];
        for &(kind, p) in entries {
            if !p.is_finite() || p < 0.0 {
                return Err(GeneticError::InvalidTable(format!(
                    "probability for {kind:?} is {p}"
                )));
            }
            weights[kind.index()] += p;
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-6 {
            return Err(GeneticError::InvalidTable(format!(
                "probabilities sum to {total}, expected 1"
            )));
        }
        Ok(MutationTable { weights })
    }

    pub fn probability(&self, kind: MutationKind) -> f64 {
        self.weights[kind.index()]
    }

    pub(crate) fn draw(&self, rng: &mut impl Rng) -> MutationKind {
        let dist = WeightedIndex::new(self.weights).expect("table weights sum to one");
        MutationKind::ALL[dist.sample(rng)]
    }
}

impl Default for MutationTable {
    fn default() -> Self {
        MutationTable::uniform()
    }
}

impl TryFrom<BTreeMap<MutationKind, f64>> for MutationTable {
    type Error = GeneticError;

    fn try_from(map: BTreeMap<MutationKind, f64>) -> Result<Self, Self::Error> {
        let entries: Vec<_> = map.into_iter().collect();
        MutationTable::new(&entries)
    }
}

impl From<MutationTable> for BTreeMap<MutationKind, f64> {
    fn from(table: MutationTable) -> Self {
        MutationKind::ALL
            .iter()
            .map(|&k| (k, table.probability(k)))
            .collect()
    }
}

/// Draws two distinct indices with probability proportional to fitness.
/// Negative values shift the whole vector by `-min + 1e-6`. When the
/// remaining weight is zero the draw is uniform. A one-member population
/// returns that member twice.
pub fn sample_parents(fitness: &[f64], rng: &mut impl Rng) -> Result<(usize, usize), GeneticError> {
    if fitness.is_empty() {
        return Err(GeneticError::EmptyPopulation);
    }
    if let Some(&bad) = fitness.iter().find(|f| !f.is_finite()) {
        return Err(GeneticError::NonFiniteFitness(bad));
    }
    if fitness.len() == 1 {
        return Ok((0, 0));
    }
    let min = fitness.iter().copied().fold(f64::INFINITY, f64::min);
    let mut weights: Vec<f64> = if min < 0.0 {
        fitness.iter().map(|f| f - min + 1e-6).collect()
    } else {
        fitness.to_vec()
    };
    let first = draw_index(&weights, rng);
    weights[first] = 0.0;
    let second = loop {
        let i = draw_index(&weights, rng);
        if i != first {
            break i;
        }
    };
    Ok((first, second))
}

fn draw_index(weights: &[f64], rng: &mut impl Rng) -> usize {
    match WeightedIndex::new(weights) {
        Ok(dist) => dist.sample(rng),
        Err(_) => rng.random_range(0..weights.len()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: Vec<u32> = (0..4).map(|_| 0).scan(rng_stream(7, 1, 2), |r, _| Some(r.random())).collect();
        let b: Vec<u32> = (0..4).map(|_| 0).scan(rng_stream(7, 1, 2), |r, _| Some(r.random())).collect();
        let c: Vec<u32> = (0..4).map(|_| 0).scan(rng_stream(7, 1, 3), |r, _| Some(r.random())).collect();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn empty_population_is_an_error() {
        let mut rng = rng_stream(0, 0, 0);
        assert_eq!(sample_parents(&[], &mut rng), Err(GeneticError::EmptyPopulation));
    }

    #[test]
    fn zero_weight_member_is_never_first() {
        let mut rng = rng_stream(1, 0, 0);
        for _ in 0..1000 {
            assert_eq!(sample_parents(&[1.0, 0.0], &mut rng).unwrap(), (0, 1));
        }
    }

    #[test]
    fn proportional_first_draw() {
        let mut rng = rng_stream(2, 0, 0);
        let hits = (0..10_000)
            .filter(|_| sample_parents(&[3.0, 1.0], &mut rng).unwrap().0 == 0)
            .count();
        let freq = hits as f64 / 10_000.0;
        assert!((freq - 0.75).abs() < 0.02, "{freq}");
    }

    #[test]
    fn negative_fitness_is_shifted() {
        let mut rng = rng_stream(3, 0, 0);
        for _ in 0..200 {
            let (a, b) = sample_parents(&[-10.0, -5.0, -7.0], &mut rng).unwrap();
            assert_ne!(a, b);
            assert!(a < 3 && b < 3);
        }
        // the minimum keeps only the epsilon weight
        let firsts = (0..2000)
            .filter(|_| sample_parents(&[-10.0, -5.0], &mut rng).unwrap().0 == 0)
            .count();
        assert!(firsts < 5);
    }

    #[test]
    fn singleton_population_repeats() {
        let mut rng = rng_stream(4, 0, 0);
        assert_eq!(sample_parents(&[0.3], &mut rng).unwrap(), (0, 0));
    }

    #[test]
    fn table_validation() {
        assert!(MutationTable::new(&[(MutationKind::AtomChange, 0.5)]).is_err());
        assert!(MutationTable::new(&[(MutationKind::AtomChange, -1.0), (MutationKind::BondDelete, 2.0)]).is_err());
        let t = MutationTable::new(&[(MutationKind::AtomChange, 0.25), (MutationKind::BondDelete, 0.75)]).unwrap();
        assert_eq!(t.probability(MutationKind::BondDelete), 0.75);
        assert_eq!(t.probability(MutationKind::AtomInsert), 0.0);
    }

    #[test]
    fn table_toml_round_trip() {
        let text = "atom_change = 0.5\nbond_insert = 0.5\n";
        let t: MutationTable = toml::from_str(text).unwrap();
        assert_eq!(t.probability(MutationKind::AtomChange), 0.5);
        let back = toml::to_string(&t).unwrap();
        let again: MutationTable = toml::from_str(&back).unwrap();
        assert_eq!(t, again);
        assert!(toml::from_str::<MutationTable>("atom_change = 0.2\n").is_err());
    }
}
