use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::edit::EditGraph;
use super::OperatorLimits;
use crate::molgraph::Molecule;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrossoverMode {
    Ring,
    Chain,
}

/// A parent piece plus the atoms where the cut bonds used to be.
struct Fragment {
    graph: EditGraph,
    attach: Vec<usize>,
}

/// Splits at one acyclic single bond and returns one side at random.
fn chain_fragment(g: &EditGraph, rng: &mut impl Rng) -> Option<Fragment> {
    let cuttable: Vec<usize> = (0..g.bonds.len())
        .filter(|&k| g.bonds[k].2 == 1 && !g.is_ring_bond(k))
        .collect();
    let &k = cuttable.choose(rng)?;
    let (a, b, _) = g.bonds[k];
    let labels = g.components_without(&[k]);
    let end = if rng.random_bool(0.5) { a } else { b };
    let keep: Vec<bool> = labels.iter().map(|&l| l == labels[end]).collect();
    let (graph, map) = g.extract(&keep, &[k]);
    Some(Fragment {
        graph,
        attach: vec![map[end]],
    })
}

/// Cuts the two outer bonds of a ring path p0-p1-p2-p3 and returns either
/// the p1..p2 side or the p0..p3 side, each with two attachment atoms.
fn ring_fragment(g: &EditGraph, rng: &mut impl Rng) -> Option<Fragment> {
    let ring: Vec<bool> = (0..g.bonds.len()).map(|k| g.is_ring_bond(k)).collect();
    let mut paths = Vec::new();
    for (k, &(p1, p2, _)) in g.bonds.iter().enumerate() {
        if !ring[k] {
            continue;
        }
        for (x, y) in [(p1, p2), (p2, p1)] {
            for p0 in g.neighbors(x) {
                if p0 == y {
                    continue;
                }
                let k0 = g.bond_index(p0, x).expect("neighbor bond");
                if !ring[k0] {
                    continue;
                }
                for p3 in g.neighbors(y) {
                    if p3 == x || p3 == p0 {
                        continue;
                    }
                    let k3 = g.bond_index(y, p3).expect("neighbor bond");
                    if ring[k3] {
                        paths.push((p0, x, y, p3, k0, k3));
                    }
                }
            }
        }
    }
    let &(p0, p1, p2, p3, k0, k3) = paths.choose(rng)?;
    let labels = g.components_without(&[k0, k3]);
    if labels[p1] != labels[p2] || labels[p0] != labels[p3] || labels[p0] == labels[p1] {
        return None;
    }
    let (side, ends) = if rng.random_bool(0.5) {
        (labels[p1], [p1, p2])
    } else {
        (labels[p0], [p0, p3])
    };
    let keep: Vec<bool> = labels.iter().map(|&l| l == side).collect();
    let (graph, map) = g.extract(&keep, &[k0, k3]);
    Some(Fragment {
        graph,
        attach: ends.iter().map(|&e| map[e]).collect(),
    })
}

fn splice(x: Fragment, y: Fragment, rng: &mut impl Rng) -> EditGraph {
    let shift = x.graph.len();
    let mut joined = x.graph.union(&y.graph);
    let mut ends: Vec<usize> = y.attach.iter().map(|&a| a + shift).collect();
    if ends.len() == 2 && rng.random_bool(0.5) {
        ends.swap(0, 1);
    }
    for (&a, &b) in x.attach.iter().zip(&ends) {
        joined.bonds.push((a, b, 1));
    }
    joined
}

fn attempt(
    ga: &EditGraph,
    gb: &EditGraph,
    mode: CrossoverMode,
    limits: &OperatorLimits,
    rng: &mut impl Rng,
) -> Option<Molecule> {
    let cut = |g: &EditGraph, rng: &mut _| match mode {
        CrossoverMode::Ring => ring_fragment(g, rng),
        CrossoverMode::Chain => chain_fragment(g, rng),
    };
    let fa = cut(ga, rng)?;
    let fb = cut(gb, rng)?;
    splice(fa, fb, rng).finish(limits)
}

/// Crossover that also reports the mode chosen for every attempt.
pub fn crossover_traced(
    a: &Molecule,
    b: &Molecule,
    limits: &OperatorLimits,
    rng: &mut impl Rng,
) -> (Option<Molecule>, Vec<CrossoverMode>) {
    let ga = EditGraph::from_molecule(a);
    let gb = EditGraph::from_molecule(b);
    let mut modes = Vec::new();
    for _ in 0..limits.retries {
        let mode = if rng.random_bool(0.5) {
            CrossoverMode::Ring
        } else {
            CrossoverMode::Chain
        };
        modes.push(mode);
        if let Some(child) = attempt(&ga, &gb, mode, limits, rng) {
            return (Some(child), modes);
        }
    }
    (None, modes)
}

/// Cuts both parents in ring or chain mode (equally likely), joins one
/// fragment of each, and retries up to `limits.retries` times until the
/// child is valid.
pub fn crossover(
    a: &Molecule,
    b: &Molecule,
    limits: &OperatorLimits,
    rng: &mut impl Rng,
) -> Option<Molecule> {
    crossover_traced(a, b, limits, rng).0
}
