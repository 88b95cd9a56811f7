//! Kekulization of aromatic input and Hückel-style aromaticity perception.

use super::{infer_aromatic_hydrogens, rings, BondOrder, Element, Molecule};

const MAX_RING: usize = 8;
const MAX_CYCLES: usize = 5_000;
const MAX_MATCHING_STEPS: usize = 200_000;

/// Assigns localized orders to aromatic bonds so that every atom in
/// `needs_pi` receives exactly one double bond. Returns `None` when no such
/// assignment exists.
pub(super) fn kekulize(
    mol: &Molecule,
    needs_pi: &[bool],
    priority: &[usize],
) -> Option<Vec<BondOrder>> {
    let n = mol.num_atoms();
    let mut orders: Vec<BondOrder> = mol
        .bonds()
        .iter()
        .map(|b| match b.order {
            BondOrder::Aromatic => BondOrder::Single,
            other => other,
        })
        .collect();

    let usable = |bond: usize| {
        let b = mol.bond(bond);
        b.order == BondOrder::Aromatic && needs_pi[b.a] && needs_pi[b.b]
    };

    // Solve each connected pi system separately so that one unsolvable
    // system does not trigger backtracking through the others.
    let mut system = vec![usize::MAX; n];
    let mut systems: Vec<Vec<usize>> = Vec::new();
    for start in 0..n {
        if !needs_pi[start] || system[start] != usize::MAX {
            continue;
        }
        let id = systems.len();
        let mut members = vec![start];
        system[start] = id;
        let mut i = 0;
        while i < members.len() {
            let v = members[i];
            i += 1;
            for &(w, b) in mol.neighbors(v) {
                if usable(b) && system[w] == usize::MAX {
                    system[w] = id;
                    members.push(w);
                }
            }
        }
        systems.push(members);
    }

    let mut partner: Vec<Option<usize>> = vec![None; n];
    for members in &systems {
        if members.len() % 2 == 1 {
            return None;
        }
        let mut steps = 0usize;
        if !match_system(mol, members, &usable, priority, &mut partner, &mut steps) {
            return None;
        }
    }
    for (v, p) in partner.iter().enumerate() {
        if let Some(bond) = *p {
            if mol.bond(bond).a == v {
                orders[bond] = BondOrder::Double;
            }
        }
    }
    Some(orders)
}

fn match_system(
    mol: &Molecule,
    members: &[usize],
    usable: &dyn Fn(usize) -> bool,
    priority: &[usize],
    partner: &mut [Option<usize>],
    steps: &mut usize,
) -> bool {
    *steps += 1;
    if *steps > MAX_MATCHING_STEPS {
        return false;
    }
    // most constrained unmatched atom first
    let mut pick: Option<(usize, usize)> = None;
    for &v in members {
        if partner[v].is_some() {
            continue;
        }
        let options = mol
            .neighbors(v)
            .iter()
            .filter(|&&(w, b)| usable(b) && partner[w].is_none())
            .count();
        let better = match pick {
            None => true,
            Some((best, best_opts)) => {
                options < best_opts || (options == best_opts && priority[v] < priority[best])
            }
        };
        if better {
            pick = Some((v, options));
        }
    }
    let Some((v, options)) = pick else {
        return true;
    };
    if options == 0 {
        return false;
    }
    let mut candidates: Vec<(usize, usize)> = mol
        .neighbors(v)
        .iter()
        .copied()
        .filter(|&(w, b)| usable(b) && partner[w].is_none())
        .collect();
    candidates.sort_by_key(|&(w, _)| priority[w]);
    for (w, b) in candidates {
        partner[v] = Some(b);
        partner[w] = Some(b);
        if match_system(mol, members, usable, priority, partner, steps) {
            return true;
        }
        partner[v] = None;
        partner[w] = None;
    }
    false
}

/// Pi electrons an atom donates to a ring it sits in, or `None` when the
/// atom cannot be part of an aromatic ring.
fn pi_electrons(mol: &Molecule, kekule: &[BondOrder], ring_bonds: &[bool], i: usize) -> Option<u32> {
    let atom = mol.atom(i);
    if !atom.element.can_be_aromatic() {
        return None;
    }
    if !mol.neighbors(i).iter().any(|&(_, b)| ring_bonds[b]) {
        return None;
    }
    let connections = mol.degree(i) + usize::from(mol.hydrogens(i));
    if connections > 3 {
        return None;
    }
    let mut ring_double = false;
    let mut exo_double: Option<usize> = None;
    for &(w, b) in mol.neighbors(i) {
        match kekule[b] {
            BondOrder::Triple => return None,
            BondOrder::Double => {
                if ring_double || exo_double.is_some() {
                    return None;
                }
                if ring_bonds[b] {
                    ring_double = true;
                } else {
                    exo_double = Some(w);
                }
            }
            _ => {}
        }
    }
    if ring_double {
        return Some(1);
    }
    let charge = atom.formal_charge;
    if let Some(w) = exo_double {
        let partner = mol.atom(w).element;
        return (atom.element == Element::C
            && charge == 0
            && matches!(partner, Element::O | Element::N | Element::S))
        .then_some(0);
    }
    match atom.element {
        Element::C => match charge {
            -1 => Some(2),
            1 => Some(0),
            _ => None,
        },
        Element::N | Element::P | Element::As => match (charge, connections) {
            (0, 3) | (-1, 2) => Some(2),
            _ => None,
        },
        Element::O | Element::S | Element::Se => (charge == 0 && connections == 2).then_some(2),
        Element::B => (charge == 0 && connections == 3).then_some(0),
        _ => None,
    }
}

/// Rebuilds a valid molecule with aromatic flags derived from its localized
/// bond orders. Rings of up to eight atoms whose pi count is 4n+2 become
/// aromatic; rings whose aromatic spelling would not read back to the same
/// hydrogen counts stay localized.
pub(super) fn perceive(mol: &Molecule) -> Molecule {
    let kekule = mol
        .kekule_orders()
        .expect("perceive() requires a validated molecule")
        .to_vec();
    let n = mol.num_atoms();
    let ring_bonds = mol.ring_bonds();
    let contrib: Vec<Option<u32>> = (0..n)
        .map(|i| pi_electrons(mol, &kekule, &ring_bonds, i))
        .collect();

    let allow = |w: usize, b: usize| {
        contrib[w].is_some() && ring_bonds[b] && kekule[b] != BondOrder::Triple
    };
    let mut cycles: Vec<Vec<usize>> = rings::simple_cycles(mol, &allow, MAX_RING, MAX_CYCLES)
        .into_iter()
        .filter(|c| contrib[c[0]].is_some())
        .filter(|c| {
            let electrons: u32 = c.iter().map(|&a| contrib[a].unwrap()).sum();
            electrons % 4 == 2
        })
        .collect();

    let (aromatic_atoms, aromatic_bonds) = loop {
        let mut atoms = vec![false; n];
        let mut bonds = vec![false; mol.num_bonds()];
        for cycle in &cycles {
            for k in 0..cycle.len() {
                let a = cycle[k];
                let b = cycle[(k + 1) % cycle.len()];
                atoms[a] = true;
                bonds[mol.bond_between(a, b).expect("cycle edge")] = true;
            }
        }
        let bad: Vec<usize> = (0..n)
            .filter(|&i| atoms[i] && !readback_consistent(mol, &kekule, &bonds, i))
            .collect();
        if bad.is_empty() {
            break (atoms, bonds);
        }
        cycles.retain(|c| !c.iter().any(|a| bad.contains(a)));
    };

    let atoms: Vec<_> = mol
        .atoms()
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let mut a = a.clone();
            a.aromatic = aromatic_atoms[i];
            a
        })
        .collect();
    let bonds: Vec<_> = mol
        .bonds()
        .iter()
        .enumerate()
        .map(|(i, b)| {
            let order = if aromatic_bonds[i] {
                BondOrder::Aromatic
            } else {
                kekule[i]
            };
            super::Bond::new(b.a, b.b, order)
        })
        .collect();

    let mut out = Molecule::from_parts(atoms, bonds).expect("same structure");
    // Pin hydrogen counts the aromatic spelling cannot imply on its own.
    for i in 0..n {
        let h = mol.hydrogens(i);
        if out.atoms[i].aromatic && out.atoms[i].explicit_h.is_none() {
            let units = aromatic_units(&out, i);
            let (implied, _) = infer_aromatic_hydrogens(&out.atoms[i], units);
            if implied != h {
                out.atoms[i].explicit_h = Some(h);
            }
        }
    }
    out.kekule = Some(kekule);
    out.hydrogens = (0..n).map(|i| mol.hydrogens(i)).collect();
    out
}

fn aromatic_units(mol: &Molecule, i: usize) -> u32 {
    mol.neighbors(i)
        .iter()
        .map(|&(_, b)| mol.bond(b).order.units())
        .sum()
}

/// True when an aromatic atom, written with its actual hydrogen count,
/// would be read back demanding a pi bond exactly when it has one.
fn readback_consistent(mol: &Molecule, kekule: &[BondOrder], aromatic_bonds: &[bool], i: usize) -> bool {
    let atom = mol.atom(i);
    let mut units = 0u32;
    let mut has_pi = false;
    for &(_, b) in mol.neighbors(i) {
        if aromatic_bonds[b] {
            units += 1;
            has_pi |= kekule[b] == BondOrder::Double;
        } else {
            units += kekule[b].units();
        }
    }
    let h = u32::from(mol.hydrogens(i));
    let used = units + h;
    let free = atom
        .element
        .target_valence(atom.formal_charge, used)
        .map(|v| u32::from(v) - used);
    match free {
        Some(free) => (free >= 1) == has_pi && free <= 1,
        None => false,
    }
}
