//! Canonical atom ordering.
//!
//! Atoms start in classes keyed by local invariants. Classes are refined by
//! neighbor classes until stable. Remaining ties are broken by
//! individualizing each member of the first tied class in turn; every leaf
//! of that search is written out and the lexicographically smallest SMILES
//! wins. The number of leaves is capped, which only matters when tied atoms
//! are not related by a symmetry of the graph.

use super::{writer, BondOrder, Molecule};

const LEAF_BUDGET: usize = 64;

fn bond_code(order: BondOrder) -> u8 {
    match order {
        BondOrder::Single => 1,
        BondOrder::Double => 2,
        BondOrder::Triple => 3,
        BondOrder::Aromatic => 4,
    }
}

fn initial_classes(mol: &Molecule) -> Vec<u32> {
    let ring_atoms = mol.ring_atoms();
    let keys: Vec<_> = (0..mol.num_atoms())
        .map(|i| {
            let a = mol.atom(i);
            (
                mol.degree(i),
                a.element.atomic_number(),
                a.isotope.unwrap_or(0),
                a.formal_charge,
                mol.hydrogens(i),
                a.aromatic,
                ring_atoms[i],
            )
        })
        .collect();
    dense(&keys)
}

/// Maps keys to dense ranks `0..k` in key order.
fn dense<K: Ord + Clone>(keys: &[K]) -> Vec<u32> {
    let mut sorted: Vec<K> = keys.to_vec();
    sorted.sort();
    sorted.dedup();
    keys.iter()
        .map(|k| sorted.binary_search(k).expect("present") as u32)
        .collect()
}

fn class_count(ranks: &[u32]) -> usize {
    ranks.iter().copied().max().map_or(0, |m| m as usize + 1)
}

fn refine(mol: &Molecule, mut ranks: Vec<u32>) -> Vec<u32> {
    let mut classes = class_count(&ranks);
    loop {
        if classes == ranks.len() {
            return ranks;
        }
        let keys: Vec<(u32, Vec<(u32, u8)>)> = (0..mol.num_atoms())
            .map(|i| {
                let mut nb: Vec<(u32, u8)> = mol
                    .neighbors(i)
                    .iter()
                    .map(|&(w, b)| (ranks[w], bond_code(mol.bond(b).order)))
                    .collect();
                nb.sort_unstable();
                (ranks[i], nb)
            })
            .collect();
        let next = dense(&keys);
        let next_classes = class_count(&next);
        if next_classes == classes {
            return ranks;
        }
        ranks = next;
        classes = next_classes;
    }
}

fn individualize(ranks: &[u32], v: usize) -> Vec<u32> {
    let keys: Vec<(u32, bool)> = ranks
        .iter()
        .enumerate()
        .map(|(i, &r)| (r, i != v))
        .collect();
    dense(&keys)
}

struct Search<'a> {
    mol: &'a Molecule,
    leaves: usize,
    best: Option<(String, Vec<u32>)>,
}

impl Search<'_> {
    fn run(&mut self, ranks: Vec<u32>) {
        let ranks = refine(self.mol, ranks);
        if class_count(&ranks) == ranks.len() {
            self.leaves += 1;
            let s = writer::emit(self.mol, &ranks);
            if self.best.as_ref().is_none_or(|(b, _)| s < *b) {
                self.best = Some((s, ranks));
            }
            return;
        }
        // first tied class
        let mut counts = vec![0usize; class_count(&ranks)];
        for &r in &ranks {
            counts[r as usize] += 1;
        }
        let tied = counts.iter().position(|&c| c > 1).expect("a tie exists") as u32;
        let members: Vec<usize> = (0..ranks.len()).filter(|&i| ranks[i] == tied).collect();
        for v in members {
            if self.leaves >= LEAF_BUDGET {
                return;
            }
            self.run(individualize(&ranks, v));
        }
    }
}

/// Canonical SMILES together with the total atom order that produced it.
pub(super) fn canonicalize(mol: &Molecule) -> (String, Vec<u32>) {
    if mol.is_empty() {
        return (String::new(), Vec::new());
    }
    let mut search = Search {
        mol,
        leaves: 0,
        best: None,
    };
    search.run(initial_classes(mol));
    search.best.expect("at least one leaf")
}

/// Canonical rank of every atom: a permutation of `0..n` that is invariant
/// under renumbering of the input graph.
pub fn canonical_ranks(mol: &Molecule) -> Vec<usize> {
    canonicalize(mol).1.into_iter().map(|r| r as usize).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::molgraph::parse_smiles;

    #[test]
    fn ranks_form_a_permutation() {
        let mol = parse_smiles("CC(C)(C)c1ccc(O)cc1").unwrap();
        let mut ranks = canonical_ranks(&mol);
        ranks.sort();
        assert_eq!(ranks, (0..mol.num_atoms()).collect::<Vec<_>>());
    }

    #[test]
    fn refinement_separates_chain_positions() {
        let mol = parse_smiles("CCCCO").unwrap();
        let ranks = refine(&mol, initial_classes(&mol));
        assert_eq!(class_count(&ranks), 5);
    }

    #[test]
    fn symmetric_atoms_share_a_class_before_tie_breaking() {
        let mol = parse_smiles("c1ccccc1").unwrap();
        let ranks = refine(&mol, initial_classes(&mol));
        assert_eq!(class_count(&ranks), 1);
    }
}
