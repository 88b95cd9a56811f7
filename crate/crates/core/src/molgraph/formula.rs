use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Element, Molecule};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FormulaError {
    #[error("empty formula")]
    Empty,
    #[error("unknown element '{symbol}' at position {position}")]
    UnknownElement { symbol: String, position: usize },
    #[error("unexpected character '{ch}' at position {position}")]
    UnexpectedCharacter { ch: char, position: usize },
    #[error("element {0} listed twice")]
    Repeated(Element),
}

/// Element counts including hydrogen. Displayed in Hill order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FormulaMap(BTreeMap<Element, u32>);

impl FormulaMap {
    pub fn count(&self, element: Element) -> u32 {
        self.0.get(&element).copied().unwrap_or(0)
    }

    pub fn add(&mut self, element: Element, n: u32) {
        if n > 0 {
            *self.0.entry(element).or_insert(0) += n;
        }
    }

    pub fn elements(&self) -> impl Iterator<Item = (Element, u32)> + '_ {
        self.0.iter().map(|(&e, &n)| (e, n))
    }

    pub fn total_atoms(&self) -> u32 {
        self.0.values().sum()
    }

    /// Elements in Hill order: C, H, then alphabetical; purely alphabetical
    /// when there is no carbon.
    pub fn hill_order(&self) -> Vec<(Element, u32)> {
        let mut items: Vec<(Element, u32)> = self.elements().collect();
        let has_c = self.count(Element::C) > 0;
        items.sort_by_key(|&(e, _)| {
            let bucket = match e {
                Element::C if has_c => 0,
                Element::H if has_c => 1,
                _ => 2,
            };
            (bucket, e.symbol())
        });
        items
    }
}

impl fmt::Display for FormulaMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (e, n) in self.hill_order() {
            if n == 1 {
                write!(f, "{e}")?;
            } else {
                write!(f, "{e}{n}")?;
            }
        }
        Ok(())
    }
}

impl FromStr for FormulaMap {
    type Err = FormulaError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bytes = s.as_bytes();
        if bytes.is_empty() {
            return Err(FormulaError::Empty);
        }
        let mut map = FormulaMap::default();
        let mut i = 0;
        while i < bytes.len() {
            let start = i;
            if !bytes[i].is_ascii_uppercase() {
                return Err(FormulaError::UnexpectedCharacter {
                    ch: s[i..].chars().next().unwrap(),
                    position: i,
                });
            }
            i += 1;
            while i < bytes.len() && bytes[i].is_ascii_lowercase() {
                i += 1;
            }
            let symbol = &s[start..i];
            let element = Element::from_symbol(symbol).ok_or_else(|| FormulaError::UnknownElement {
                symbol: symbol.to_string(),
                position: start,
            })?;
            let digits_start = i;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            let n = if digits_start == i {
                1
            } else {
                s[digits_start..i].parse::<u32>().map_err(|_| FormulaError::UnexpectedCharacter {
                    ch: bytes[digits_start] as char,
                    position: digits_start,
                })?
            };
            if map.0.contains_key(&element) {
                return Err(FormulaError::Repeated(element));
            }
            map.0.insert(element, n);
        }
        map.0.retain(|_, n| *n > 0);
        Ok(map)
    }
}

/// Molecular formula including implicit and explicit hydrogens.
pub fn molecular_formula(mol: &Molecule) -> FormulaMap {
    let mut map = FormulaMap::default();
    for atom in mol.atoms() {
        map.add(atom.element, 1);
    }
    map.add(Element::H, mol.total_hydrogens());
    map
}
