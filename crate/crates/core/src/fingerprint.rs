//! Morgan circular fingerprints and Tanimoto similarity.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::molgraph::{BondOrder, Molecule};

pub const DEFAULT_RADIUS: u32 = 2;
pub const DEFAULT_NBITS: usize = 2048;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FingerprintError {
    #[error("fingerprint width must be a positive power of two, got {0}")]
    InvalidWidth(usize),
    #[error("fingerprint widths differ: {0} vs {1}")]
    WidthMismatch(usize, usize),
    #[error("bit {bit} out of range for width {nbits}")]
    BitOutOfRange { bit: usize, nbits: usize },
}

/// Fixed-width bit vector with the parameters that produced it.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Fingerprint {
    nbits: usize,
    radius: u32,
    words: Vec<u64>,
}

impl Fingerprint {
    pub fn new(nbits: usize, radius: u32) -> Result<Self, FingerprintError> {
        if nbits == 0 || !nbits.is_power_of_two() {
            return Err(FingerprintError::InvalidWidth(nbits));
        }
        Ok(Fingerprint {
            nbits,
            radius,
            words: vec![0; nbits.div_ceil(64)],
        })
    }

    pub fn from_bits(
        nbits: usize,
        bits: impl IntoIterator<Item = usize>,
    ) -> Result<Self, FingerprintError> {
        let mut fp = Fingerprint::new(nbits, 0)?;
        for bit in bits {
            if bit >= nbits {
                return Err(FingerprintError::BitOutOfRange { bit, nbits });
            }
            fp.set(bit);
        }
        Ok(fp)
    }

    fn set(&mut self, bit: usize) {
        self.words[bit / 64] |= 1 << (bit % 64);
    }

    pub fn nbits(&self) -> usize {
        self.nbits
    }

    pub fn radius(&self) -> u32 {
        self.radius
    }

    pub fn contains(&self, bit: usize) -> bool {
        bit < self.nbits && self.words[bit / 64] >> (bit % 64) & 1 == 1
    }

    pub fn popcount(&self) -> u32 {
        self.words.iter().map(|w| w.count_ones()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn on_bits(&self) -> Vec<usize> {
        (0..self.nbits).filter(|&b| self.contains(b)).collect()
    }

    /// ORs the vector down to `nbits` (a smaller power of two).
    pub fn fold(&self, nbits: usize) -> Result<Fingerprint, FingerprintError> {
        if nbits == 0 || !nbits.is_power_of_two() || nbits > self.nbits {
            return Err(FingerprintError::InvalidWidth(nbits));
        }
        let mut out = Fingerprint::new(nbits, self.radius)?;
        for bit in self.on_bits() {
            out.set(bit % nbits);
        }
        Ok(out)
    }

    /// Folded 64-bit word, handy as a compact landscape coordinate.
    pub fn fold64(&self) -> u64 {
        self.words.iter().fold(0, |acc, w| acc | w)
    }
}

/// Stable 64-bit mixing step (SplitMix64 finalizer over an accumulator).
/// The constants are part of the fingerprint definition and never change.
fn mix(h: u64, x: u64) -> u64 {
    let mut z = h ^ x.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_add(h << 6).wrapping_add(h >> 2);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn bond_code(order: BondOrder) -> u64 {
    match order {
        BondOrder::Single => 1,
        BondOrder::Double => 2,
        BondOrder::Triple => 3,
        BondOrder::Aromatic => 4,
    }
}

fn atom_invariant(mol: &Molecule, i: usize, ring_atoms: &[bool]) -> u64 {
    let a = mol.atom(i);
    let fields = [
        u64::from(a.element.atomic_number()),
        mol.degree(i) as u64,
        u64::from(mol.hydrogens(i)),
        (i64::from(a.formal_charge) + 16) as u64,
        u64::from(ring_atoms[i]),
        u64::from(a.aromatic),
    ];
    fields.iter().fold(0x5EED, |h, &f| mix(h, f))
}

/// Morgan fingerprint: every atom environment up to `radius` bonds is hashed
/// and set as bit `hash mod nbits`. Identifiers depend only on the graph, so
/// the result is invariant under atom renumbering.
pub fn morgan_fingerprint(
    mol: &Molecule,
    radius: u32,
    nbits: usize,
) -> Result<Fingerprint, FingerprintError> {
    let mut fp = Fingerprint::new(nbits, radius)?;
    let n = mol.num_atoms();
    let ring_atoms = mol.ring_atoms();
    let mut ids: Vec<u64> = (0..n).map(|i| atom_invariant(mol, i, &ring_atoms)).collect();
    for &id in &ids {
        fp.set((id % nbits as u64) as usize);
    }
    for round in 1..=radius {
        let next: Vec<u64> = (0..n)
            .map(|i| {
                let mut env: Vec<(u64, u64)> = mol
                    .neighbors(i)
                    .iter()
                    .map(|&(w, b)| (bond_code(mol.bond(b).order), ids[w]))
                    .collect();
                env.sort_unstable();
                let mut h = mix(u64::from(round), ids[i]);
                for (bond, id) in env {
                    h = mix(mix(h, bond), id);
                }
                h
            })
            .collect();
        for &id in &next {
            fp.set((id % nbits as u64) as usize);
        }
        ids = next;
    }
    Ok(fp)
}

/// Fingerprint with the default radius 2 and 2048 bits.
pub fn default_fingerprint(mol: &Molecule) -> Fingerprint {
    morgan_fingerprint(mol, DEFAULT_RADIUS, DEFAULT_NBITS).expect("default width is valid")
}

/// |a ∩ b| / |a ∪ b|. Two empty fingerprints have similarity 1.
pub fn tanimoto(a: &Fingerprint, b: &Fingerprint) -> Result<f64, FingerprintError> {
    if a.nbits != b.nbits {
        return Err(FingerprintError::WidthMismatch(a.nbits, b.nbits));
    }
    let (mut inter, mut union) = (0u32, 0u32);
    for (x, y) in a.words.iter().zip(&b.words) {
        inter += (x & y).count_ones();
        union += (x | y).count_ones();
    }
    if union == 0 {
        return Ok(1.0);
    }
    Ok(f64::from(inter) / f64::from(union))
}

pub fn tanimoto_distance(a: &Fingerprint, b: &Fingerprint) -> Result<f64, FingerprintError> {
    tanimoto(a, b).map(|s| 1.0 - s)
}
