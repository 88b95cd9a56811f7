use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use super::{Oracle, OracleError};
use crate::fingerprint::{default_fingerprint, tanimoto, Fingerprint};
use crate::molgraph::{molecular_formula, parse_smiles, FormulaMap, Molecule};

/// Closeness of a molecule's formula to a target formula.
///
/// For every element present in either formula, plus the total atom count,
/// the count difference `d` contributes `exp(-d²/2)`; the score is the
/// geometric mean of those terms.
#[derive(Debug, Clone)]
pub struct IsomerOracle {
    target: FormulaMap,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub(super) struct IsomerParams {
    pub formula: String,
}

impl IsomerOracle {
    pub fn new(target: FormulaMap) -> Result<Self, OracleError> {
        if target.total_atoms() == 0 {
            return Err(OracleError::InvalidSpec("isomer target formula is empty".into()));
        }
        Ok(IsomerOracle { target })
    }

    pub fn from_formula(text: &str) -> Result<Self, OracleError> {
        let target = text
            .parse::<FormulaMap>()
            .map_err(|e| OracleError::InvalidSpec(format!("isomer formula {text:?}: {e}")))?;
        IsomerOracle::new(target)
    }

    pub fn target(&self) -> &FormulaMap {
        &self.target
    }
}

/// Score of `mol` against `target`; 1.0 exactly when the formulas match.
pub fn isomer_score(mol: &Molecule, target: &FormulaMap) -> f64 {
    let formula = molecular_formula(mol);
    let mut elements: Vec<_> = target.elements().chain(formula.elements()).map(|(e, _)| e).collect();
    elements.sort();
    elements.dedup();
    let mut log_sum = 0.0;
    let mut terms = 0usize;
    let mut add = |a: u32, b: u32| {
        let d = f64::from(a) - f64::from(b);
        log_sum += -d * d / 2.0;
        terms += 1;
    };
    for e in elements {
        add(formula.count(e), target.count(e));
    }
    add(formula.total_atoms(), target.total_atoms());
    (log_sum / terms as f64).exp()
}

impl Oracle for IsomerOracle {
    fn name(&self) -> &str {
        "isomer"
    }

    fn score(&self, mol: &Molecule, _smiles: &str) -> Result<f64, OracleError> {
        Ok(isomer_score(mol, &self.target))
    }
}

/// Tanimoto similarity to a fixed target on default Morgan fingerprints.
#[derive(Debug, Clone)]
pub struct SimilarityOracle {
    target: Fingerprint,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub(super) struct SimilarityParams {
    pub target: String,
}

impl SimilarityOracle {
    pub fn new(target: &Molecule) -> Self {
        SimilarityOracle {
            target: default_fingerprint(target),
        }
    }

    pub fn from_smiles(text: &str) -> Result<Self, OracleError> {
        let mol = parse_smiles(text)
            .map_err(|e| OracleError::InvalidSpec(format!("similarity target {text:?}: {e}")))?;
        Ok(SimilarityOracle::new(&mol))
    }
}

pub fn similarity_score(mol: &Molecule, target: &Molecule) -> f64 {
    tanimoto(&default_fingerprint(mol), &default_fingerprint(target)).expect("same width")
}

impl Oracle for SimilarityOracle {
    fn name(&self) -> &str {
        "similarity"
    }

    fn score(&self, mol: &Molecule, _smiles: &str) -> Result<f64, OracleError> {
        Ok(tanimoto(&default_fingerprint(mol), &self.target).expect("same width"))
    }
}

/// Chemistry-free multimodal landscape over the 64-bit folded fingerprint.
///
/// Each peak has a random 64-bit center and a height; the first peak is the
/// global one (height 1) and the rest are lower decoys. A molecule at bit
/// agreement `s` with a center earns `height · ((s − ½)/½)²` for `s > ½`,
/// and the best peak wins.
#[derive(Debug, Clone)]
pub struct SyntheticOracle {
    peaks: Vec<(u64, f64)>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub(super) struct SyntheticParams {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_peaks")]
    pub peaks: usize,
}

fn default_peaks() -> usize {
    4
}

impl SyntheticOracle {
    pub fn new(seed: u64, peaks: usize) -> Result<Self, OracleError> {
        if peaks == 0 {
            return Err(OracleError::InvalidSpec("synthetic oracle needs at least one peak".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let peaks = (0..peaks)
            .map(|k| {
                let height = if k == 0 { 1.0 } else { rng.random_range(0.5..0.9) };
                (rng.random::<u64>(), height)
            })
            .collect();
        Ok(SyntheticOracle { peaks })
    }

    pub fn score_bits(&self, bits: u64) -> f64 {
        self.peaks
            .iter()
            .map(|&(center, height)| {
                let agree = 1.0 - f64::from((bits ^ center).count_ones()) / 64.0;
                let x = ((agree - 0.5) / 0.5).max(0.0);
                height * x * x
            })
            .fold(0.0, f64::max)
    }
}

impl Oracle for SyntheticOracle {
    fn name(&self) -> &str {
        "synthetic"
    }

    fn score(&self, mol: &Molecule, _smiles: &str) -> Result<f64, OracleError> {
        Ok(self.score_bits(default_fingerprint(mol).fold64()))
    }
}

/// Returns the same value for every molecule.
#[derive(Debug, Clone)]
pub struct ConstantOracle {
    pub value: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub(super) struct ConstantParams {
    pub value: f64,
}

impl Oracle for ConstantOracle {
    fn name(&self) -> &str {
        "constant"
    }

    fn score(&self, _mol: &Molecule, _smiles: &str) -> Result<f64, OracleError> {
        Ok(self.value)
    }
}
