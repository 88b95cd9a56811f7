use std::collections::VecDeque;

use crate::molgraph::{Atom, Bond, BondOrder, Element, Molecule};

use super::OperatorLimits;

/// Localized, hydrogen-implicit working copy of a molecule that graph edits
/// operate on. Hydrogen counts are always the valence-table fill.
#[derive(Clone, Debug)]
pub(crate) struct EditGraph {
    pub atoms: Vec<(Element, i8)>,
    pub bonds: Vec<(usize, usize, u32)>,
}

impl EditGraph {
    pub fn from_molecule(mol: &Molecule) -> EditGraph {
        let kek = mol.kekulized();
        let orders = kek.kekule_orders().expect("valid molecules are kekulizable");
        EditGraph {
            atoms: kek
                .atoms()
                .iter()
                .map(|a| (a.element, a.formal_charge))
                .collect(),
            bonds: kek
                .bonds()
                .iter()
                .zip(orders)
                .map(|(b, o)| (b.a, b.b, o.units()))
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn units(&self, i: usize) -> u32 {
        self.bonds
            .iter()
            .filter(|b| b.0 == i || b.1 == i)
            .map(|b| b.2)
            .sum()
    }

    /// Implicit hydrogens: bonds that could still be added to the atom.
    pub fn hydrogens(&self, i: usize) -> u32 {
        let (e, c) = self.atoms[i];
        let used = self.units(i);
        e.target_valence(c, used)
            .map_or(0, |v| u32::from(v) - used)
    }

    pub fn bond_index(&self, a: usize, b: usize) -> Option<usize> {
        self.bonds
            .iter()
            .position(|x| (x.0 == a && x.1 == b) || (x.0 == b && x.1 == a))
    }

    pub fn neighbors(&self, i: usize) -> Vec<usize> {
        self.bonds
            .iter()
            .filter_map(|b| {
                if b.0 == i {
                    Some(b.1)
                } else if b.1 == i {
                    Some(b.0)
                } else {
                    None
                }
            })
            .collect()
    }

    pub fn degree(&self, i: usize) -> usize {
        self.bonds.iter().filter(|b| b.0 == i || b.1 == i).count()
    }

    /// Breadth-first distances from `start`, skipping bond `skip`.
    pub fn distances(&self, start: usize, skip: Option<usize>) -> Vec<usize> {
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); self.len()];
        for (k, b) in self.bonds.iter().enumerate() {
            if Some(k) == skip {
                continue;
            }
            adj[b.0].push(b.1);
            adj[b.1].push(b.0);
        }
        let mut dist = vec![usize::MAX; self.len()];
        dist[start] = 0;
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            for &w in &adj[v] {
                if dist[w] == usize::MAX {
                    dist[w] = dist[v] + 1;
                    queue.push_back(w);
                }
            }
        }
        dist
    }

    /// Smallest ring through bond `k`, or `None` for a bridge.
    pub fn smallest_ring_through(&self, k: usize) -> Option<usize> {
        let (a, b, _) = self.bonds[k];
        let d = self.distances(a, Some(k))[b];
        (d != usize::MAX).then(|| d + 1)
    }

    pub fn is_ring_bond(&self, k: usize) -> bool {
        self.smallest_ring_through(k).is_some()
    }

    /// Component labels after removing the bonds in `cut`.
    pub fn components_without(&self, cut: &[usize]) -> Vec<usize> {
        let mut label = vec![usize::MAX; self.len()];
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); self.len()];
        for (k, b) in self.bonds.iter().enumerate() {
            if !cut.contains(&k) {
                adj[b.0].push(b.1);
                adj[b.1].push(b.0);
            }
        }
        let mut next = 0;
        for s in 0..self.len() {
            if label[s] != usize::MAX {
                continue;
            }
            label[s] = next;
            let mut stack = vec![s];
            while let Some(v) = stack.pop() {
                for &w in &adj[v] {
                    if label[w] == usize::MAX {
                        label[w] = next;
                        stack.push(w);
                    }
                }
            }
            next += 1;
        }
        label
    }

    /// Sub-graph on atoms with `keep[i]`, excluding `cut` bonds. Returns the
    /// graph and the old→new index map.
    pub fn extract(&self, keep: &[bool], cut: &[usize]) -> (EditGraph, Vec<usize>) {
        let mut map = vec![usize::MAX; self.len()];
        let mut atoms = Vec::new();
        for i in 0..self.len() {
            if keep[i] {
                map[i] = atoms.len();
                atoms.push(self.atoms[i]);
            }
        }
        let bonds = self
            .bonds
            .iter()
            .enumerate()
            .filter(|(k, b)| !cut.contains(k) && keep[b.0] && keep[b.1])
            .map(|(_, b)| (map[b.0], map[b.1], b.2))
            .collect();
        (EditGraph { atoms, bonds }, map)
    }

    /// Disjoint union; atoms of `other` are shifted by `self.len()`.
    pub fn union(&self, other: &EditGraph) -> EditGraph {
        let shift = self.len();
        let mut atoms = self.atoms.clone();
        atoms.extend_from_slice(&other.atoms);
        let mut bonds = self.bonds.clone();
        bonds.extend(other.bonds.iter().map(|b| (b.0 + shift, b.1 + shift, b.2)));
        EditGraph { atoms, bonds }
    }

    pub fn remove_atom(&mut self, i: usize) {
        self.atoms.remove(i);
        self.bonds.retain(|b| b.0 != i && b.1 != i);
        for b in &mut self.bonds {
            if b.0 > i {
                b.0 -= 1;
            }
            if b.1 > i {
                b.1 -= 1;
            }
        }
    }

    /// Rings must be 3..=`max_ring` atoms, carry no cumulated double bonds,
    /// and have no multiple bonds inside 3- or 4-rings.
    fn rings_ok(&self, max_ring: usize) -> bool {
        let mut ring_doubles = vec![0u32; self.len()];
        for k in 0..self.bonds.len() {
            let Some(size) = self.smallest_ring_through(k) else {
                continue;
            };
            let (a, b, order) = self.bonds[k];
            if size > max_ring {
                return false;
            }
            if order >= 2 {
                if size <= 4 {
                    return false;
                }
                ring_doubles[a] += 1;
                ring_doubles[b] += 1;
            }
        }
        ring_doubles.iter().all(|&d| d <= 1)
    }

    /// Converts to a sanitized molecule if the graph is a connected, valid,
    /// size- and ring-acceptable structure.
    pub fn finish(&self, limits: &OperatorLimits) -> Option<Molecule> {
        if self.atoms.is_empty() || self.len() > limits.max_heavy_atoms {
            return None;
        }
        for i in 0..self.len() {
            let (e, c) = self.atoms[i];
            e.target_valence(c, self.units(i))?;
        }
        let labels = self.components_without(&[]);
        if labels.iter().any(|&l| l != 0) {
            return None;
        }
        if !self.rings_ok(limits.max_ring_size) {
            return None;
        }
        let atoms = self
            .atoms
            .iter()
            .map(|&(e, c)| Atom::new(e).with_charge(c))
            .collect();
        let bonds = self
            .bonds
            .iter()
            .map(|&(a, b, o)| BondOrder::from_units(o).map(|order| Bond::new(a, b, order)))
            .collect::<Option<Vec<_>>>()?;
        Molecule::from_parts(atoms, bonds).ok()?.sanitize().ok()
    }
}
