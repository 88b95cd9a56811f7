//! Molecular graph model: atoms, bonds, hydrogens, validity, aromaticity,
//! SMILES reading/writing and molecular formulas.

mod aromatic;
mod canon;
mod element;
mod formula;
mod rings;
mod smiles;
mod writer;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use canon::canonical_ranks;
pub use element::Element;
pub use formula::{molecular_formula, FormulaError, FormulaMap};
pub use smiles::{parse_smiles, read_seed_pool, SmilesError, SmilesErrorKind};
pub use writer::write_smiles;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Atom {
    pub element: Element,
    pub formal_charge: i8,
    /// Hydrogen count fixed by a bracket atom. `None` means the count is
    /// implied by the valence table.
    pub explicit_h: Option<u8>,
    pub aromatic: bool,
    pub isotope: Option<u16>,
}

impl Atom {
    pub fn new(element: Element) -> Self {
        Atom {
            element,
            formal_charge: 0,
            explicit_h: None,
            aromatic: false,
            isotope: None,
        }
    }

    pub fn with_charge(mut self, charge: i8) -> Self {
        self.formal_charge = charge;
        self
    }

    pub fn with_explicit_h(mut self, h: u8) -> Self {
        self.explicit_h = Some(h);
        self
    }

    pub fn aromatic(mut self) -> Self {
        self.aromatic = true;
        self
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BondOrder {
    Single,
    Double,
    Triple,
    Aromatic,
}

impl BondOrder {
    /// Valence units consumed; aromatic bonds count as one (the shared
    /// pi electron is accounted for separately).
    pub fn units(self) -> u32 {
        match self {
            BondOrder::Single | BondOrder::Aromatic => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
        }
    }

    pub fn from_units(units: u32) -> Option<BondOrder> {
        match units {
            1 => Some(BondOrder::Single),
            2 => Some(BondOrder::Double),
            3 => Some(BondOrder::Triple),
            _ => None,
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Bond {
    pub a: usize,
    pub b: usize,
    pub order: BondOrder,
}

impl Bond {
    pub fn new(a: usize, b: usize, order: BondOrder) -> Self {
        Bond { a, b, order }
    }

    pub fn other(&self, atom: usize) -> usize {
        if self.a == atom {
            self.b
        } else {
            self.a
        }
    }

    pub fn touches(&self, atom: usize) -> bool {
        self.a == atom || self.b == atom
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("bond {bond} references atom {atom}, but the molecule has {len} atoms")]
    AtomOutOfRange { bond: usize, atom: usize, len: usize },
    #[error("bond {bond} joins atom {atom} to itself")]
    SelfLoop { bond: usize, atom: usize },
    #[error("duplicate bond between atoms {a} and {b}")]
    DuplicateBond { a: usize, b: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MolError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("invalid molecule: {0}")]
    Invalid(ValidityReport),
}

/// A single reason a graph is not a member of the valid chemical space.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Violation {
    Valence {
        atom: usize,
        element: Element,
        charge: i8,
        bond_units: u32,
        hydrogens: u8,
        allowed: Vec<u8>,
    },
    Disconnected {
        components: usize,
    },
    AromaticBondOnNonAromaticAtom {
        bond: usize,
    },
    AromaticAtomOutsideRing {
        atom: usize,
    },
    Kekulization,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Valence {
                atom,
                element,
                charge,
                bond_units,
                hydrogens,
                allowed,
            } => write!(
                f,
                "atom {atom} ({element}, charge {charge}) has {bond_units} bond units and {hydrogens} H; allowed valences {allowed:?}"
            ),
            Violation::Disconnected { components } => {
                write!(f, "graph has {components} disconnected fragments")
            }
            Violation::AromaticBondOnNonAromaticAtom { bond } => {
                write!(f, "aromatic bond {bond} touches a non-aromatic atom")
            }
            Violation::AromaticAtomOutsideRing { atom } => {
                write!(f, "aromatic atom {atom} is not in a ring")
            }
            Violation::Kekulization => f.write_str("aromatic system cannot be kekulized"),
        }
    }
}

/// Every validity failure found in a molecule. Empty means valid.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidityReport {
    pub violations: Vec<Violation>,
}

impl ValidityReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return f.write_str("valid");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// An attributed molecular graph with hydrogens folded into heavy atoms.
///
/// Construction checks only structure (indices, self-loops, duplicate
/// bonds). Chemistry is checked by [`Molecule::validate`]; molecules returned
/// by the parser, the SELFIES decoder and the genetic operators are always
/// valid and carry perceived aromaticity.
#[derive(Clone, Debug)]
pub struct Molecule {
    atoms: Vec<Atom>,
    bonds: Vec<Bond>,
    neighbors: Vec<Vec<(usize, usize)>>,
    kekule: Option<Vec<BondOrder>>,
    hydrogens: Vec<u8>,
}

impl Molecule {
    pub fn empty() -> Self {
        Molecule {
            atoms: Vec::new(),
            bonds: Vec::new(),
            neighbors: Vec::new(),
            kekule: Some(Vec::new()),
            hydrogens: Vec::new(),
        }
    }

    pub fn from_parts(atoms: Vec<Atom>, bonds: Vec<Bond>) -> Result<Self, GraphError> {
        let n = atoms.len();
        let mut neighbors = vec![Vec::new(); n];
        for (i, bond) in bonds.iter().enumerate() {
            for atom in [bond.a, bond.b] {
                if atom >= n {
                    return Err(GraphError::AtomOutOfRange { bond: i, atom, len: n });
                }
            }
            if bond.a == bond.b {
                return Err(GraphError::SelfLoop { bond: i, atom: bond.a });
            }
            if neighbors[bond.a].iter().any(|&(nb, _)| nb == bond.b) {
                return Err(GraphError::DuplicateBond { a: bond.a, b: bond.b });
            }
            neighbors[bond.a].push((bond.b, i));
            neighbors[bond.b].push((bond.a, i));
        }
        let mut mol = Molecule {
            atoms,
            bonds,
            neighbors,
            kekule: None,
            hydrogens: Vec::new(),
        };
        let identity: Vec<usize> = (0..n).collect();
        mol.assign_kekule(&identity);
        Ok(mol)
    }

    /// Recomputes localized bond orders and hydrogen counts. `priority`
    /// ranks atoms for the deterministic kekulization search.
    fn assign_kekule(&mut self, priority: &[usize]) {
        let has_aromatic = self.bonds.iter().any(|b| b.order == BondOrder::Aromatic);
        if !has_aromatic {
            self.kekule = Some(self.bonds.iter().map(|b| b.order).collect());
            self.hydrogens = (0..self.atoms.len())
                .map(|i| self.localized_hydrogens(i, None))
                .collect();
            return;
        }
        let aromatic_h: Vec<(u8, bool)> = (0..self.atoms.len())
            .map(|i| self.aromatic_style_hydrogens(i))
            .collect();
        let needs_pi: Vec<bool> = self
            .atoms
            .iter()
            .zip(&aromatic_h)
            .map(|(atom, &(_, pi))| atom.aromatic && pi)
            .collect();
        self.kekule = aromatic::kekulize(self, &needs_pi, priority);
        let kekule = self.kekule.clone();
        self.hydrogens = (0..self.atoms.len())
            .map(|i| {
                if self.atoms[i].aromatic {
                    aromatic_h[i].0
                } else {
                    self.localized_hydrogens(i, kekule.as_deref())
                }
            })
            .collect();
    }

    fn localized_hydrogens(&self, i: usize, kekule: Option<&[BondOrder]>) -> u8 {
        let atom = &self.atoms[i];
        if let Some(h) = atom.explicit_h {
            return h;
        }
        let used = self.bond_units(i, kekule);
        atom.element
            .target_valence(atom.formal_charge, used)
            .map(|v| (u32::from(v) - used) as u8)
            .unwrap_or(0)
    }

    /// Hydrogen count and pi-electron demand of an atom read with aromatic
    /// bonds counted as one unit, as SMILES readers infer them.
    fn aromatic_style_hydrogens(&self, i: usize) -> (u8, bool) {
        let atom = &self.atoms[i];
        let units: u32 = self.neighbors[i]
            .iter()
            .map(|&(_, b)| self.bonds[b].order.units())
            .sum();
        infer_aromatic_hydrogens(atom, units)
    }

    fn bond_units(&self, i: usize, kekule: Option<&[BondOrder]>) -> u32 {
        self.neighbors[i]
            .iter()
            .map(|&(_, b)| match kekule {
                Some(k) => k[b].units(),
                None => self.bonds[b].order.units(),
            })
            .sum()
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn bonds(&self) -> &[Bond] {
        &self.bonds
    }

    pub fn atom(&self, i: usize) -> &Atom {
        &self.atoms[i]
    }

    pub fn bond(&self, i: usize) -> &Bond {
        &self.bonds[i]
    }

    pub fn num_atoms(&self) -> usize {
        self.atoms.len()
    }

    pub fn num_bonds(&self) -> usize {
        self.bonds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// `(neighbor atom, bond index)` pairs.
    pub fn neighbors(&self, i: usize) -> &[(usize, usize)] {
        &self.neighbors[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.neighbors[i].len()
    }

    pub fn hydrogens(&self, i: usize) -> u8 {
        self.hydrogens[i]
    }

    pub fn total_hydrogens(&self) -> u32 {
        self.hydrogens.iter().map(|&h| u32::from(h)).sum()
    }

    pub fn bond_between(&self, a: usize, b: usize) -> Option<usize> {
        self.neighbors[a]
            .iter()
            .find(|&&(nb, _)| nb == b)
            .map(|&(_, bond)| bond)
    }

    /// Localized (Kekulé) bond orders, when the aromatic system admits one.
    pub fn kekule_orders(&self) -> Option<&[BondOrder]> {
        self.kekule.as_deref()
    }

    /// Bond-order sum of an atom using localized orders.
    pub fn bond_order_sum(&self, i: usize) -> u32 {
        self.bond_units(i, self.kekule.as_deref())
    }

    /// Hydrogens that could still be replaced by a new bond.
    pub fn free_valence(&self, i: usize) -> u32 {
        u32::from(self.hydrogens[i])
    }

    pub fn into_parts(self) -> (Vec<Atom>, Vec<Bond>) {
        (self.atoms, self.bonds)
    }

    /// Connected components as sorted atom index lists, largest first
    /// (ties broken by lowest member index).
    pub fn components(&self) -> Vec<Vec<usize>> {
        let n = self.atoms.len();
        let mut seen = vec![false; n];
        let mut comps = Vec::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            let mut stack = vec![start];
            let mut comp = Vec::new();
            seen[start] = true;
            while let Some(v) = stack.pop() {
                comp.push(v);
                for &(w, _) in &self.neighbors[v] {
                    if !seen[w] {
                        seen[w] = true;
                        stack.push(w);
                    }
                }
            }
            comp.sort_unstable();
            comps.push(comp);
        }
        comps.sort_by(|a, b| b.len().cmp(&a.len()).then(a[0].cmp(&b[0])));
        comps
    }

    /// Molecule induced by a subset of atoms, keeping their relative order.
    pub fn induced(&self, keep: &[usize]) -> Molecule {
        let mut map = vec![usize::MAX; self.atoms.len()];
        let mut sorted = keep.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        let atoms: Vec<Atom> = sorted
            .iter()
            .enumerate()
            .map(|(new, &old)| {
                map[old] = new;
                self.atoms[old].clone()
            })
            .collect();
        let bonds: Vec<Bond> = self
            .bonds
            .iter()
            .filter(|b| map[b.a] != usize::MAX && map[b.b] != usize::MAX)
            .map(|b| Bond::new(map[b.a], map[b.b], b.order))
            .collect();
        Molecule::from_parts(atoms, bonds).expect("induced subgraph of a well-formed graph")
    }

    /// Same graph with atoms renumbered: atom `i` moves to `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Molecule {
        assert_eq!(perm.len(), self.atoms.len());
        let mut atoms = vec![Atom::new(Element::C); self.atoms.len()];
        for (old, &new) in perm.iter().enumerate() {
            atoms[new] = self.atoms[old].clone();
        }
        let bonds = self
            .bonds
            .iter()
            .map(|b| Bond::new(perm[b.a], perm[b.b], b.order))
            .collect();
        let mut mol = Molecule::from_parts(atoms, bonds).expect("permutation preserves structure");
        mol.hydrogens = vec![0; self.atoms.len()];
        for (old, &new) in perm.iter().enumerate() {
            mol.hydrogens[new] = self.hydrogens[old];
        }
        if let Some(k) = &self.kekule {
            mol.kekule = Some(k.clone());
        }
        mol
    }

    /// Bridges are the only bonds outside rings.
    pub fn ring_bonds(&self) -> Vec<bool> {
        rings::ring_bond_flags(self)
    }

    pub fn ring_atoms(&self) -> Vec<bool> {
        let ring_bonds = self.ring_bonds();
        let mut flags = vec![false; self.atoms.len()];
        for (i, b) in self.bonds.iter().enumerate() {
            if ring_bonds[i] {
                flags[b.a] = true;
                flags[b.b] = true;
            }
        }
        flags
    }

    /// Number of independent rings (cyclomatic number).
    pub fn ring_count(&self) -> usize {
        if self.atoms.is_empty() {
            return 0;
        }
        self.bonds.len() + self.components().len() - self.atoms.len()
    }

    /// Simple cycles up to `max_len` atoms, each as an atom sequence.
    pub fn cycles(&self, max_len: usize, limit: usize) -> Vec<Vec<usize>> {
        let ring_bonds = self.ring_bonds();
        rings::simple_cycles(self, &|_, b| ring_bonds[b], max_len, limit)
    }

    pub fn validate(&self) -> ValidityReport {
        let mut violations = Vec::new();
        if self.atoms.is_empty() {
            return ValidityReport { violations };
        }
        let components = self.components().len();
        if components > 1 {
            violations.push(Violation::Disconnected { components });
        }
        let ring_atoms = self.ring_atoms();
        for (i, bond) in self.bonds.iter().enumerate() {
            if bond.order == BondOrder::Aromatic
                && !(self.atoms[bond.a].aromatic && self.atoms[bond.b].aromatic)
            {
                violations.push(Violation::AromaticBondOnNonAromaticAtom { bond: i });
            }
        }
        for (i, atom) in self.atoms.iter().enumerate() {
            if atom.aromatic && !ring_atoms[i] {
                violations.push(Violation::AromaticAtomOutsideRing { atom: i });
            }
        }
        if self.kekule.is_none() {
            violations.push(Violation::Kekulization);
        }
        for (i, atom) in self.atoms.iter().enumerate() {
            let units = self.bond_order_sum(i);
            let h = self.hydrogens[i];
            let allowed = atom.element.allowed_valences(atom.formal_charge);
            let total = units + u32::from(h);
            let ok = match atom.explicit_h {
                Some(_) => allowed.iter().any(|&v| u32::from(v) == total),
                None => atom
                    .element
                    .target_valence(atom.formal_charge, units)
                    .is_some_and(|v| u32::from(v) == total),
            };
            if !ok {
                violations.push(Violation::Valence {
                    atom: i,
                    element: atom.element,
                    charge: atom.formal_charge,
                    bond_units: units,
                    hydrogens: h,
                    allowed: allowed.to_vec(),
                });
            }
        }
        ValidityReport { violations }
    }

    pub fn is_valid(&self) -> bool {
        self.validate().is_valid()
    }

    /// Validates the molecule and rewrites it into normal form: aromaticity
    /// is re-perceived from the localized bond orders so that every Kekulé
    /// form of the same structure yields the same graph.
    pub fn sanitize(&self) -> Result<Molecule, MolError> {
        let report = self.validate();
        if !report.is_valid() {
            return Err(MolError::Invalid(report));
        }
        Ok(aromatic::perceive(self))
    }

    /// Localized copy with aromatic flags cleared and bracket hydrogen counts
    /// dropped wherever the valence table implies the same count. This is
    /// the form graph edits operate on.
    pub fn kekulized(&self) -> Molecule {
        self.kekulized_with_priority(&(0..self.atoms.len()).collect::<Vec<_>>())
    }

    pub(crate) fn kekulized_with_priority(&self, priority: &[usize]) -> Molecule {
        let kekule = if self.bonds.iter().any(|b| b.order == BondOrder::Aromatic) {
            let mut relabeled = self.clone();
            relabeled.assign_kekule(priority);
            relabeled.kekule
        } else {
            self.kekule.clone()
        };
        let kekule = kekule.expect("kekulized() requires a kekulizable molecule");
        let bonds: Vec<Bond> = self
            .bonds
            .iter()
            .zip(&kekule)
            .map(|(b, &k)| Bond::new(b.a, b.b, k))
            .collect();
        let mut atoms = self.atoms.clone();
        for atom in &mut atoms {
            atom.aromatic = false;
        }
        let mut mol = Molecule::from_parts(atoms, bonds).expect("same structure");
        for i in 0..mol.atoms.len() {
            let actual = self.hydrogens[i];
            mol.atoms[i].explicit_h = None;
            let implied = mol.localized_hydrogens(i, None);
            if implied != actual {
                mol.atoms[i].explicit_h = Some(actual);
            }
            mol.hydrogens[i] = actual;
        }
        mol
    }

    /// Canonical SMILES of this molecule.
    pub fn to_smiles(&self) -> String {
        write_smiles(self)
    }
}

/// Hydrogens and pi demand of an aromatic-flagged atom whose bonds consume
/// `units` valence with aromatic bonds counted once. Non-aromatic atoms get
/// the plain valence-table fill.
pub(crate) fn infer_aromatic_hydrogens(atom: &Atom, units: u32) -> (u8, bool) {
    let element = atom.element;
    match atom.explicit_h {
        Some(h) => {
            let used = units + u32::from(h);
            let free = element
                .target_valence(atom.formal_charge, used)
                .map(|v| u32::from(v) - used)
                .unwrap_or(0);
            (h, atom.aromatic && free >= 1)
        }
        None => {
            let free = element
                .target_valence(atom.formal_charge, units)
                .map(|v| u32::from(v) - units)
                .unwrap_or(0);
            if atom.aromatic {
                if free >= 1 {
                    ((free - 1) as u8, true)
                } else {
                    (0, false)
                }
            } else {
                (free as u8, false)
            }
        }
    }
}

impl fmt::Display for Molecule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&write_smiles(self))
    }
}

impl PartialEq for Molecule {
    /// Graph identity: equal canonical SMILES.
    fn eq(&self, other: &Self) -> bool {
        write_smiles(self) == write_smiles(other)
    }
}

impl Eq for Molecule {}
