//! SMILES reader.
//!
//! Supported: organic-subset and bracket atoms (isotope, hydrogen count,
//! charge, atom class), branches, ring closures including `%nn`, explicit
//! bond symbols and aromatic lowercase atoms. Stereo markers (`/`, `\`, `@`)
//! are read and dropped. Multi-fragment input keeps its largest fragment.

use std::collections::HashMap;
use std::fmt;

use log::warn;
use thiserror::Error;

use super::{Atom, Bond, BondOrder, Element, Molecule, MolError, ValidityReport};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{kind} at position {position}")]
pub struct SmilesError {
    /// Byte offset into the input where the problem was detected.
    pub position: usize,
    pub kind: SmilesErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SmilesErrorKind {
    Empty,
    NonAscii,
    UnexpectedCharacter(char),
    UnsupportedElement(String),
    UnsupportedFeature(&'static str),
    InvalidBracketAtom,
    UnclosedBracket,
    UnclosedBranch,
    UnmatchedParenthesis,
    MissingAtom,
    UnclosedRing(u32),
    ConflictingRingBond(u32),
    InvalidRingClosure(u32),
    Invalid(ValidityReport),
}

impl fmt::Display for SmilesErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SmilesErrorKind::Empty => f.write_str("empty SMILES"),
            SmilesErrorKind::NonAscii => f.write_str("non-ASCII character"),
            SmilesErrorKind::UnexpectedCharacter(c) => write!(f, "unexpected character '{c}'"),
            SmilesErrorKind::UnsupportedElement(s) => write!(f, "unsupported element '{s}'"),
            SmilesErrorKind::UnsupportedFeature(s) => write!(f, "unsupported feature: {s}"),
            SmilesErrorKind::InvalidBracketAtom => f.write_str("malformed bracket atom"),
            SmilesErrorKind::UnclosedBracket => f.write_str("unclosed '['"),
            SmilesErrorKind::UnclosedBranch => f.write_str("unclosed '('"),
            SmilesErrorKind::UnmatchedParenthesis => f.write_str("unmatched ')'"),
            SmilesErrorKind::MissingAtom => f.write_str("bond or branch without an atom"),
            SmilesErrorKind::UnclosedRing(d) => write!(f, "ring bond {d} never closed"),
            SmilesErrorKind::ConflictingRingBond(d) => {
                write!(f, "ring bond {d} has conflicting bond orders")
            }
            SmilesErrorKind::InvalidRingClosure(d) => {
                write!(f, "ring bond {d} closes onto itself or an existing bond")
            }
            SmilesErrorKind::Invalid(report) => write!(f, "{report}"),
        }
    }
}

const KNOWN_SYMBOLS: &[&str] = &[
    "H", "He", "Li", "Be", "B", "C", "N", "O", "F", "Ne", "Na", "Mg", "Al", "Si", "P", "S", "Cl",
    "Ar", "K", "Ca", "Sc", "Ti", "V", "Cr", "Mn", "Fe", "Co", "Ni", "Cu", "Zn", "Ga", "Ge", "As",
    "Se", "Br", "Kr", "Rb", "Sr", "Y", "Zr", "Nb", "Mo", "Tc", "Ru", "Rh", "Pd", "Ag", "Cd", "In",
    "Sn", "Sb", "Te", "I", "Xe", "Cs", "Ba", "La", "Ce", "Pr", "Nd", "Pm", "Sm", "Eu", "Gd", "Tb",
    "Dy", "Ho", "Er", "Tm", "Yb", "Lu", "Hf", "Ta", "W", "Re", "Os", "Ir", "Pt", "Au", "Hg", "Tl",
    "Pb", "Bi", "Po", "At", "Rn", "Fr", "Ra", "Ac", "Th", "Pa", "U",
];

struct Parser<'a> {
    text: &'a [u8],
    pos: usize,
    atoms: Vec<Atom>,
    bonds: Vec<Bond>,
    prev: Option<usize>,
    branches: Vec<(Option<usize>, usize)>,
    pending: Option<(Option<BondOrder>, usize)>,
    rings: HashMap<u32, (usize, Option<BondOrder>, usize)>,
    stereo_seen: bool,
}

/// Parses a SMILES string into a valid molecule in normal form.
pub fn parse_smiles(text: &str) -> Result<Molecule, SmilesError> {
    if !text.is_ascii() {
        let position = text.char_indices().find(|(_, c)| !c.is_ascii()).map_or(0, |(i, _)| i);
        return Err(SmilesError {
            position,
            kind: SmilesErrorKind::NonAscii,
        });
    }
    let trimmed = text.trim();
    if trimmed.is_empty() {
        return Err(SmilesError {
            position: 0,
            kind: SmilesErrorKind::Empty,
        });
    }
    let offset = text.len() - text.trim_start().len();
    let mut parser = Parser {
        text: trimmed.as_bytes(),
        pos: 0,
        atoms: Vec::new(),
        bonds: Vec::new(),
        prev: None,
        branches: Vec::new(),
        pending: None,
        rings: HashMap::new(),
        stereo_seen: false,
    };
    parser.run().map_err(|mut e| {
        e.position += offset;
        e
    })?;
    if parser.stereo_seen {
        warn!("stereochemistry markers in '{trimmed}' were ignored");
    }
    let end = offset + trimmed.len();
    finish(parser.atoms, parser.bonds, trimmed).map_err(|kind| SmilesError {
        position: end,
        kind,
    })
}

impl Parser<'_> {
    fn err(&self, kind: SmilesErrorKind) -> SmilesError {
        SmilesError {
            position: self.pos,
            kind,
        }
    }

    fn peek(&self) -> Option<u8> {
        self.text.get(self.pos).copied()
    }

    fn run(&mut self) -> Result<(), SmilesError> {
        while let Some(c) = self.peek() {
            match c {
                b'(' => {
                    if self.prev.is_none() {
                        return Err(self.err(SmilesErrorKind::MissingAtom));
                    }
                    self.branches.push((self.prev, self.pos));
                    self.pos += 1;
                }
                b')' => {
                    let Some((atom, _)) = self.branches.pop() else {
                        return Err(self.err(SmilesErrorKind::UnmatchedParenthesis));
                    };
                    if self.pending.is_some() {
                        return Err(self.err(SmilesErrorKind::MissingAtom));
                    }
                    self.prev = atom;
                    self.pos += 1;
                }
                b'-' | b'=' | b'#' | b':' | b'/' | b'\\' | b'$' => {
                    if self.pending.is_some() || self.prev.is_none() {
                        return Err(self.err(SmilesErrorKind::MissingAtom));
                    }
                    let order = match c {
                        b'-' => BondOrder::Single,
                        b'=' => BondOrder::Double,
                        b'#' => BondOrder::Triple,
                        b':' => BondOrder::Aromatic,
                        b'/' | b'\\' => {
                            self.stereo_seen = true;
                            BondOrder::Single
                        }
                        _ => return Err(self.err(SmilesErrorKind::UnsupportedFeature("quadruple bond"))),
                    };
                    self.pending = Some((Some(order), self.pos));
                    self.pos += 1;
                }
                b'.' => {
                    if self.pending.is_some() || self.prev.is_none() {
                        return Err(self.err(SmilesErrorKind::MissingAtom));
                    }
                    self.prev = None;
                    self.pos += 1;
                }
                b'0'..=b'9' | b'%' => self.ring_closure()?,
                b'[' => {
                    let atom = self.bracket_atom()?;
                    self.add_atom(atom);
                }
                b'*' => return Err(self.err(SmilesErrorKind::UnsupportedFeature("wildcard atom"))),
                _ => {
                    let atom = self.organic_atom()?;
                    self.add_atom(atom);
                }
            }
        }
        if let Some(&(_, pos)) = self.branches.last() {
            return Err(SmilesError {
                position: pos,
                kind: SmilesErrorKind::UnclosedBranch,
            });
        }
        if self.pending.is_some() {
            return Err(self.err(SmilesErrorKind::MissingAtom));
        }
        if let Some((&digit, &(_, _, pos))) = self.rings.iter().min_by_key(|(_, v)| v.2) {
            return Err(SmilesError {
                position: pos,
                kind: SmilesErrorKind::UnclosedRing(digit),
            });
        }
        Ok(())
    }

    fn add_atom(&mut self, atom: Atom) {
        let idx = self.atoms.len();
        self.atoms.push(atom);
        if let Some(prev) = self.prev {
            let order = match self.pending.take() {
                Some((Some(order), _)) => order,
                _ => self.default_order(prev, idx),
            };
            self.bonds.push(Bond::new(prev, idx, order));
        }
        self.pending = None;
        self.prev = Some(idx);
    }

    fn default_order(&self, a: usize, b: usize) -> BondOrder {
        if self.atoms[a].aromatic && self.atoms[b].aromatic {
            BondOrder::Aromatic
        } else {
            BondOrder::Single
        }
    }

    fn ring_closure(&mut self) -> Result<(), SmilesError> {
        let start = self.pos;
        let Some(current) = self.prev else {
            return Err(self.err(SmilesErrorKind::MissingAtom));
        };
        let digit = if self.peek() == Some(b'%') {
            let d = self.text.get(self.pos + 1..self.pos + 3);
            match d {
                Some(&[a, b]) if a.is_ascii_digit() && b.is_ascii_digit() => {
                    self.pos += 3;
                    u32::from(a - b'0') * 10 + u32::from(b - b'0')
                }
                _ => return Err(self.err(SmilesErrorKind::UnexpectedCharacter('%'))),
            }
        } else {
            let d = u32::from(self.text[self.pos] - b'0');
            self.pos += 1;
            d
        };
        let here = self.pending.take().and_then(|(o, _)| o);
        match self.rings.remove(&digit) {
            None => {
                self.rings.insert(digit, (current, here, start));
            }
            Some((other, there, _)) => {
                let order = match (here, there) {
                    (Some(x), Some(y)) if x != y => {
                        return Err(SmilesError {
                            position: start,
                            kind: SmilesErrorKind::ConflictingRingBond(digit),
                        })
                    }
                    (Some(x), _) | (None, Some(x)) => x,
                    (None, None) => self.default_order(other, current),
                };
                if other == current
                    || self.bonds.iter().any(|b| b.touches(other) && b.touches(current))
                {
                    return Err(SmilesError {
                        position: start,
                        kind: SmilesErrorKind::InvalidRingClosure(digit),
                    });
                }
                self.bonds.push(Bond::new(other, current, order));
            }
        }
        Ok(())
    }

    fn organic_atom(&mut self) -> Result<Atom, SmilesError> {
        let rest = &self.text[self.pos..];
        let (symbol, len, aromatic) = match rest {
            [b'C', b'l', ..] => ("Cl", 2, false),
            [b'B', b'r', ..] => ("Br", 2, false),
            [b'B', ..] => ("B", 1, false),
            [b'C', ..] => ("C", 1, false),
            [b'N', ..] => ("N", 1, false),
            [b'O', ..] => ("O", 1, false),
            [b'P', ..] => ("P", 1, false),
            [b'S', ..] => ("S", 1, false),
            [b'F', ..] => ("F", 1, false),
            [b'I', ..] => ("I", 1, false),
            [b'b', ..] => ("B", 1, true),
            [b'c', ..] => ("C", 1, true),
            [b'n', ..] => ("N", 1, true),
            [b'o', ..] => ("O", 1, true),
            [b'p', ..] => ("P", 1, true),
            [b's', ..] => ("S", 1, true),
            [c, ..] => {
                return Err(self.err(SmilesErrorKind::UnexpectedCharacter(*c as char)));
            }
            [] => unreachable!(),
        };
        self.pos += len;
        let mut atom = Atom::new(Element::from_symbol(symbol).unwrap());
        atom.aromatic = aromatic;
        Ok(atom)
    }

    fn bracket_atom(&mut self) -> Result<Atom, SmilesError> {
        let open = self.pos;
        let close = self.text[open..]
            .iter()
            .position(|&c| c == b']')
            .map(|p| open + p)
            .ok_or_else(|| self.err(SmilesErrorKind::UnclosedBracket))?;
        let body = &self.text[open + 1..close];
        let atom = self.bracket_body(body, open)?;
        self.pos = close + 1;
        Ok(atom)
    }

    fn bracket_body(&mut self, body: &[u8], open: usize) -> Result<Atom, SmilesError> {
        let bad = |at: usize| SmilesError {
            position: open + 1 + at,
            kind: SmilesErrorKind::InvalidBracketAtom,
        };
        let mut i = 0;
        let mut isotope: Option<u16> = None;
        while i < body.len() && body[i].is_ascii_digit() {
            let v = isotope.unwrap_or(0) as u32 * 10 + u32::from(body[i] - b'0');
            isotope = Some(u16::try_from(v).map_err(|_| bad(i))?);
            i += 1;
        }

        // element symbol, aromatic when lowercase
        let (symbol, aromatic) = {
            let rest = &body[i..];
            let two = rest.get(..2).map(|s| std::str::from_utf8(s).unwrap());
            let one = rest.get(..1).map(|s| std::str::from_utf8(s).unwrap());
            match (two, one) {
                (Some(t @ ("se" | "as")), _) => {
                    i += 2;
                    (capitalize(t), true)
                }
                (Some(t), _) if KNOWN_SYMBOLS.contains(&t) => {
                    i += 2;
                    (t.to_string(), false)
                }
                (_, Some(o @ ("b" | "c" | "n" | "o" | "p" | "s"))) => {
                    i += 1;
                    (capitalize(o), true)
                }
                (_, Some(o)) if KNOWN_SYMBOLS.contains(&o) => {
                    i += 1;
                    (o.to_string(), false)
                }
                (_, Some("*")) => {
                    return Err(SmilesError {
                        position: open + 1 + i,
                        kind: SmilesErrorKind::UnsupportedFeature("wildcard atom"),
                    })
                }
                _ => return Err(bad(i)),
            }
        };
        let element = Element::from_symbol(&symbol).ok_or(SmilesError {
            position: open + 1,
            kind: SmilesErrorKind::UnsupportedElement(symbol.clone()),
        })?;
        if aromatic && !element.can_be_aromatic() {
            return Err(bad(i));
        }

        // chirality
        if body.get(i) == Some(&b'@') {
            self.stereo_seen = true;
            while body.get(i) == Some(&b'@') {
                i += 1;
            }
            if body.get(i).is_some_and(|c| c.is_ascii_uppercase())
                && body.get(i + 1).is_some_and(|c| c.is_ascii_uppercase())
            {
                i += 2;
                while body.get(i).is_some_and(|c| c.is_ascii_digit()) {
                    i += 1;
                }
            }
        }

        let mut hydrogens = 0u8;
        if body.get(i) == Some(&b'H') {
            i += 1;
            hydrogens = 1;
            if let Some(&d) = body.get(i).filter(|c| c.is_ascii_digit()) {
                hydrogens = d - b'0';
                i += 1;
            }
        }

        let mut charge: i32 = 0;
        if let Some(&sign @ (b'+' | b'-')) = body.get(i) {
            let unit = if sign == b'+' { 1 } else { -1 };
            i += 1;
            if body.get(i).is_some_and(|c| c.is_ascii_digit()) {
                let mut magnitude = 0i32;
                while let Some(&d) = body.get(i).filter(|c| c.is_ascii_digit()) {
                    magnitude = magnitude * 10 + i32::from(d - b'0');
                    i += 1;
                }
                charge = unit * magnitude;
            } else {
                charge = unit;
                while body.get(i) == Some(&sign) {
                    charge += unit;
                    i += 1;
                }
            }
        }
        if !(-8..=8).contains(&charge) {
            return Err(bad(i));
        }

        if body.get(i) == Some(&b':') {
            i += 1;
            let digits = body[i..].iter().take_while(|c| c.is_ascii_digit()).count();
            if digits == 0 {
                return Err(bad(i));
            }
            i += digits;
        }
        if i != body.len() {
            return Err(bad(i));
        }
        Ok(Atom {
            element,
            formal_charge: charge as i8,
            explicit_h: Some(hydrogens),
            aromatic,
            isotope,
        })
    }
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_ascii_uppercase().to_string() + c.as_str(),
        None => String::new(),
    }
}

fn finish(atoms: Vec<Atom>, bonds: Vec<Bond>, text: &str) -> Result<Molecule, SmilesErrorKind> {
    let mut mol = Molecule::from_parts(atoms, bonds).map_err(|_| SmilesErrorKind::InvalidRingClosure(0))?;
    let comps = mol.components();
    if comps.len() > 1 {
        warn!(
            "'{text}' has {} fragments; keeping the largest ({} atoms)",
            comps.len(),
            comps[0].len()
        );
        mol = mol.induced(&comps[0]);
    }
    // Aromatic bonds only exist inside rings; an implicit bond between two
    // aromatic atoms of different rings is a single bond.
    let ring_bonds = mol.ring_bonds();
    if mol
        .bonds()
        .iter()
        .enumerate()
        .any(|(i, b)| b.order == BondOrder::Aromatic && !ring_bonds[i])
    {
        let (atoms, mut bonds) = mol.into_parts();
        for (i, b) in bonds.iter_mut().enumerate() {
            if b.order == BondOrder::Aromatic && !ring_bonds[i] {
                b.order = BondOrder::Single;
            }
        }
        mol = Molecule::from_parts(atoms, bonds).expect("same structure");
    }
    mol.sanitize().map_err(|e| match e {
        MolError::Invalid(report) => SmilesErrorKind::Invalid(report),
        MolError::Graph(_) => SmilesErrorKind::InvalidRingClosure(0),
    })
}

/// Reads a seed pool: one SMILES per line, optionally followed by
/// whitespace and a name. Blank lines and `#` comments are skipped. Returns
/// `(1-based line number, parse result)` for every data line.
pub fn read_seed_pool(text: &str) -> Vec<(usize, Result<Molecule, SmilesError>)> {
    text.lines()
        .enumerate()
        .filter_map(|(i, line)| {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                return None;
            }
            let smiles = line.split_whitespace().next().unwrap_or("");
            Some((i + 1, parse_smiles(smiles)))
        })
        .collect()
}
