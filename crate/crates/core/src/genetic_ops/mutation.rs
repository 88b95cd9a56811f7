use rand::seq::IndexedRandom;
use rand::Rng;

use super::edit::EditGraph;
use super::{MutationKind, MutationTable, OperatorLimits};
use crate::molgraph::{Element, Molecule};

const IDENTITY_SET: [Element; 7] = [
    Element::C,
    Element::N,
    Element::O,
    Element::S,
    Element::F,
    Element::Cl,
    Element::Br,
];

const APPEND_CHOICES: [(Element, u32); 13] = [
    (Element::C, 1),
    (Element::N, 1),
    (Element::O, 1),
    (Element::F, 1),
    (Element::S, 1),
    (Element::Cl, 1),
    (Element::Br, 1),
    (Element::C, 2),
    (Element::N, 2),
    (Element::O, 2),
    (Element::S, 2),
    (Element::C, 3),
    (Element::N, 3),
];

const BRIDGE_CHOICES: [Element; 4] = [Element::C, Element::N, Element::O, Element::S];

fn bond_insert(g: &mut EditGraph, rng: &mut impl Rng) -> Option<()> {
    let mut pairs = Vec::new();
    for i in 0..g.len() {
        if g.hydrogens(i) == 0 {
            continue;
        }
        let dist = g.distances(i, None);
        for (j, d) in dist.iter().enumerate().skip(i + 1) {
            if g.hydrogens(j) > 0 && (2..=5).contains(d) {
                pairs.push((i, j));
            }
        }
    }
    let &(i, j) = pairs.choose(rng)?;
    g.bonds.push((i, j, 1));
    Some(())
}

fn bond_delete(g: &mut EditGraph, rng: &mut impl Rng) -> Option<()> {
    let ring: Vec<usize> = (0..g.bonds.len()).filter(|&k| g.is_ring_bond(k)).collect();
    let &k = ring.choose(rng)?;
    g.bonds.remove(k);
    Some(())
}

fn atom_append(g: &mut EditGraph, rng: &mut impl Rng) -> Option<()> {
    let anchors: Vec<usize> = (0..g.len()).filter(|&i| g.hydrogens(i) > 0).collect();
    let &anchor = anchors.choose(rng)?;
    let room = g.hydrogens(anchor);
    let choices: Vec<_> = APPEND_CHOICES.iter().filter(|c| c.1 <= room).collect();
    let &&(element, order) = choices.choose(rng)?;
    g.atoms.push((element, 0));
    g.bonds.push((anchor, g.len() - 1, order));
    Some(())
}

fn atom_bridge(g: &mut EditGraph, rng: &mut impl Rng) -> Option<()> {
    let k = rng.random_range(0..g.bonds.len().max(1));
    let &(a, b, _) = g.bonds.get(k)?;
    let &element = BRIDGE_CHOICES.choose(rng)?;
    g.bonds.remove(k);
    g.atoms.push((element, 0));
    let x = g.len() - 1;
    g.bonds.push((a, x, 1));
    g.bonds.push((x, b, 1));
    Some(())
}

fn atom_insert(g: &mut EditGraph, rng: &mut impl Rng) -> Option<()> {
    if rng.random_bool(0.5) {
        atom_append(g, rng)
    } else {
        atom_bridge(g, rng)
    }
}

fn atom_delete(g: &mut EditGraph, rng: &mut impl Rng) -> Option<()> {
    if g.len() < 2 {
        return None;
    }
    let targets: Vec<usize> = (0..g.len()).filter(|&i| g.degree(i) <= 2).collect();
    let &i = targets.choose(rng)?;
    let nb = g.neighbors(i);
    if let [x, y] = nb[..] {
        if g.bond_index(x, y).is_none() {
            g.bonds.push((x, y, 1));
        }
    }
    g.remove_atom(i);
    Some(())
}

fn bond_order_swap(g: &mut EditGraph, rng: &mut impl Rng) -> Option<()> {
    let mut options = Vec::new();
    for (k, &(a, b, order)) in g.bonds.iter().enumerate() {
        let room = g.hydrogens(a).min(g.hydrogens(b));
        for new in 1..=3 {
            if new != order && (new < order || new - order <= room) {
                options.push((k, new));
            }
        }
    }
    let &(k, new) = options.choose(rng)?;
    g.bonds[k].2 = new;
    Some(())
}

fn atom_change(g: &mut EditGraph, rng: &mut impl Rng) -> Option<()> {
    let mut options = Vec::new();
    for i in 0..g.len() {
        let (current, charge) = g.atoms[i];
        if charge != 0 {
            continue;
        }
        let used = g.units(i);
        for &e in &IDENTITY_SET {
            if e != current && e.target_valence(0, used).is_some() {
                options.push((i, e));
            }
        }
    }
    let &(i, e) = options.choose(rng)?;
    g.atoms[i].0 = e;
    Some(())
}

/// One attempt of a specific mutation kind. Absent when the kind has no
/// applicable site or the edited graph is rejected.
pub fn mutate_with(
    mol: &Molecule,
    kind: MutationKind,
    limits: &OperatorLimits,
    rng: &mut impl Rng,
) -> Option<Molecule> {
    let mut g = EditGraph::from_molecule(mol);
    match kind {
        MutationKind::BondInsert => bond_insert(&mut g, rng),
        MutationKind::BondDelete => bond_delete(&mut g, rng),
        MutationKind::AtomInsert => atom_insert(&mut g, rng),
        MutationKind::AtomDelete => atom_delete(&mut g, rng),
        MutationKind::BondOrderSwap => bond_order_swap(&mut g, rng),
        MutationKind::AtomChange => atom_change(&mut g, rng),
    }?;
    g.finish(limits)
}

/// Mutation that also reports the kind drawn for every attempt.
pub fn mutate_traced(
    mol: &Molecule,
    table: &MutationTable,
    limits: &OperatorLimits,
    rng: &mut impl Rng,
) -> (Option<Molecule>, Vec<MutationKind>) {
    let mut kinds = Vec::new();
    for _ in 0..limits.retries {
        let kind = table.draw(rng);
        kinds.push(kind);
        if let Some(child) = mutate_with(mol, kind, limits, rng) {
            return (Some(child), kinds);
        }
    }
    (None, kinds)
}

/// Draws a kind from `table` and applies it, redrawing up to
/// `limits.retries` times until the result is valid.
pub fn mutate(
    mol: &Molecule,
    table: &MutationTable,
    limits: &OperatorLimits,
    rng: &mut impl Rng,
) -> Option<Molecule> {
    mutate_traced(mol, table, limits, rng).0
}
