//! SELFIES encoding and a total decoder.
//!
//! Grammar pinned here (a subset of SELFIES 2):
//!
//! * Atom tokens `[X]`, `[=X]`, `[#X]` for B C N O P S F Cl Br I, plus the
//!   charged atoms N±1, O±1, C±1, S±1, P±1 and B-1 (`[N+1]`, `[=O-1]`, ...).
//!   An atom's bonding capacity is the largest valence its element and charge
//!   allow; leftover capacity is filled with implicit hydrogens.
//! * `[BranchL]`, `[=BranchL]`, `[#BranchL]` (L = 1..3) read L index tokens
//!   giving Q and then derive the next Q+1 tokens as a side chain.
//! * `[RingL]`, `[=RingL]`, `[#RingL]` read L index tokens giving Q and bond
//!   the current atom to the atom Q+1 positions earlier in derivation order.
//!   A ring token pointing before the first atom is ignored.
//!
//! Index tokens are read in base 16 through a fixed alphabet; any other
//! token counts as digit 0. The derivation state tracks how many bonds the
//! current atom can still form, and every directive is clamped to it, which
//! is what makes decoding total.

use std::fmt;

use thiserror::Error;

use crate::molgraph::{canonical_ranks, Atom, Bond, BondOrder, Element, Molecule};

const INDEX_ALPHABET: [&str; 16] = [
    "[C]", "[Ring1]", "[Ring2]", "[Branch1]", "[=Branch1]", "[#Branch1]", "[Branch2]",
    "[=Branch2]", "[#Branch2]", "[O]", "[N]", "[=N]", "[=C]", "[#C]", "[S]", "[P]",
];

const NEUTRAL: [Element; 10] = [
    Element::B,
    Element::C,
    Element::N,
    Element::O,
    Element::P,
    Element::S,
    Element::F,
    Element::Cl,
    Element::Br,
    Element::I,
];

const CHARGED: [(Element, i8); 11] = [
    (Element::N, 1),
    (Element::N, -1),
    (Element::O, 1),
    (Element::O, -1),
    (Element::C, 1),
    (Element::C, -1),
    (Element::S, 1),
    (Element::S, -1),
    (Element::P, 1),
    (Element::P, -1),
    (Element::B, -1),
];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SelfiesError {
    #[error("unknown SELFIES token '{token}' at token {index}")]
    UnknownToken { token: String, index: usize },
    #[error("malformed SELFIES text at byte {0}")]
    Malformed(usize),
    #[error("cannot encode atom {atom}: {reason}")]
    Unsupported { atom: usize, reason: String },
    #[error("cannot encode a molecule with {0} fragments")]
    Disconnected(usize),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
enum Token {
    Atom {
        bond: u8,
        element: Element,
        charge: i8,
    },
    Branch {
        bond: u8,
        len: u8,
    },
    Ring {
        bond: u8,
        len: u8,
    },
}

fn bond_prefix(bond: u8) -> &'static str {
    match bond {
        2 => "=",
        3 => "#",
        _ => "",
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Token::Atom {
                bond,
                element,
                charge,
            } => {
                write!(f, "[{}{}", bond_prefix(bond), element.symbol())?;
                match charge {
                    0 => {}
                    c if c > 0 => write!(f, "+{c}")?,
                    c => write!(f, "{c}")?,
                }
                f.write_str("]")
            }
            Token::Branch { bond, len } => write!(f, "[{}Branch{len}]", bond_prefix(bond)),
            Token::Ring { bond, len } => write!(f, "[{}Ring{len}]", bond_prefix(bond)),
        }
    }
}

fn supported_atom(element: Element, charge: i8) -> bool {
    if charge == 0 {
        NEUTRAL.contains(&element)
    } else {
        CHARGED.contains(&(element, charge))
    }
}

fn parse_token(body: &str) -> Option<Token> {
    let (bond, rest) = match body.as_bytes().first()? {
        b'=' => (2, &body[1..]),
        b'#' => (3, &body[1..]),
        _ => (1, body),
    };
    for (word, is_branch) in [("Branch", true), ("Ring", false)] {
        if let Some(n) = rest.strip_prefix(word) {
            let len = match n {
                "1" => 1,
                "2" => 2,
                "3" => 3,
                _ => return None,
            };
            return Some(if is_branch {
                Token::Branch { bond, len }
            } else {
                Token::Ring { bond, len }
            });
        }
    }
    let split = rest.find(['+', '-']).unwrap_or(rest.len());
    let element = Element::from_symbol(&rest[..split])?;
    let charge = match &rest[split..] {
        "" => 0,
        "+1" => 1,
        "-1" => -1,
        _ => return None,
    };
    supported_atom(element, charge).then_some(Token::Atom {
        bond,
        element,
        charge,
    })
}

/// Splits SELFIES text into bracket tokens. Whitespace between tokens is
/// ignored.
pub fn split_tokens(text: &str) -> Result<Vec<String>, SelfiesError> {
    let mut tokens = Vec::new();
    let mut rest = text;
    let mut offset = 0;
    loop {
        let trimmed = rest.trim_start();
        offset += rest.len() - trimmed.len();
        rest = trimmed;
        if rest.is_empty() {
            return Ok(tokens);
        }
        if !rest.starts_with('[') {
            return Err(SelfiesError::Malformed(offset));
        }
        let close = rest.find(']').ok_or(SelfiesError::Malformed(offset))?;
        if rest[1..close].contains('[') {
            return Err(SelfiesError::Malformed(offset));
        }
        tokens.push(rest[..=close].to_string());
        offset += close + 1;
        rest = &rest[close + 1..];
    }
}

fn tokenize(text: &str) -> Result<Vec<Token>, SelfiesError> {
    split_tokens(text)?
        .into_iter()
        .enumerate()
        .map(|(index, t)| {
            parse_token(&t[1..t.len() - 1]).ok_or(SelfiesError::UnknownToken { token: t, index })
        })
        .collect()
}

/// Every token the decoder accepts, in a fixed order.
pub fn alphabet() -> Vec<String> {
    let mut out = Vec::new();
    for bond in 1..=3u8 {
        for element in NEUTRAL {
            out.push(Token::Atom { bond, element, charge: 0 }.to_string());
        }
        for (element, charge) in CHARGED {
            out.push(Token::Atom { bond, element, charge }.to_string());
        }
    }
    for bond in 1..=3u8 {
        for len in 1..=3u8 {
            out.push(Token::Branch { bond, len }.to_string());
            out.push(Token::Ring { bond, len }.to_string());
        }
    }
    out
}

fn capacity(element: Element, charge: i8) -> u32 {
    u32::from(element.max_valence(charge).unwrap_or(0))
}

struct Decoder<'a> {
    tokens: &'a [Token],
    texts: &'a [String],
    pos: usize,
    atoms: Vec<Atom>,
    /// Bond orders keyed by (min, max) atom pair, in insertion order.
    bonds: Vec<(usize, usize, u32)>,
    rings: Vec<(usize, usize, u32)>,
}

impl Decoder<'_> {
    fn read_index(&mut self, len: u8) -> usize {
        let mut q = 0usize;
        for _ in 0..len {
            let Some(text) = self.texts.get(self.pos) else {
                break;
            };
            self.pos += 1;
            let digit = INDEX_ALPHABET.iter().position(|t| *t == text).unwrap_or(0);
            q = q * 16 + digit;
        }
        q
    }

    /// Derives up to `max_derive` tokens starting from `root` with the given
    /// state. Returns the number of tokens consumed.
    fn derive(&mut self, max_derive: usize, init_state: Option<u32>, root: Option<usize>) -> usize {
        let mut derived = 0usize;
        let mut state = init_state;
        let mut prev = root;
        while state.is_none_or(|s| s > 0) && derived < max_derive {
            let Some(&token) = self.tokens.get(self.pos) else {
                break;
            };
            self.pos += 1;
            derived += 1;
            match token {
                Token::Branch { bond, len } => {
                    let Some(s) = state.filter(|&s| s > 1) else {
                        continue;
                    };
                    let init = (s - 1).min(u32::from(bond));
                    let q = self.read_index(len);
                    derived += usize::from(len);
                    derived += self.derive(q + 1, Some(init), prev);
                    state = Some(s - init);
                }
                Token::Ring { bond, len } => {
                    let (Some(s), Some(p)) = (state, prev) else {
                        continue;
                    };
                    let q = self.read_index(len);
                    derived += usize::from(len);
                    let order = s.min(u32::from(bond));
                    if let Some(target) = p.checked_sub(q + 1) {
                        self.rings.push((target, p, order));
                        state = Some(s - order);
                    }
                }
                Token::Atom {
                    bond,
                    element,
                    charge,
                } => {
                    let cap = capacity(element, charge);
                    let idx = self.atoms.len();
                    self.atoms.push(Atom::new(element).with_charge(charge));
                    match (state, prev) {
                        (Some(s), Some(p)) => {
                            let order = u32::from(bond).min(s).min(cap);
                            self.bonds.push((p, idx, order));
                            state = Some(cap - order);
                        }
                        _ => state = Some(cap),
                    }
                    prev = Some(idx);
                }
            }
        }
        derived
    }

    fn used(&self, atom: usize) -> u32 {
        self.bonds
            .iter()
            .filter(|b| b.0 == atom || b.1 == atom)
            .map(|b| b.2)
            .sum()
    }

    fn close_rings(&mut self) {
        let rings = std::mem::take(&mut self.rings);
        for (a, b, order) in rings {
            let free_a = capacity(self.atoms[a].element, self.atoms[a].formal_charge) - self.used(a);
            let free_b = capacity(self.atoms[b].element, self.atoms[b].formal_charge) - self.used(b);
            let order = order.min(free_a).min(free_b);
            if order == 0 {
                continue;
            }
            match self
                .bonds
                .iter_mut()
                .find(|x| (x.0 == a && x.1 == b) || (x.0 == b && x.1 == a))
            {
                Some(existing) => existing.2 = (existing.2 + order).min(3),
                None => self.bonds.push((a, b, order)),
            }
        }
    }
}

/// Decodes SELFIES text. Every token sequence over [`alphabet`] yields a
/// valid molecule; an input without atom tokens yields the empty molecule.
pub fn decode_selfies(text: &str) -> Result<Molecule, SelfiesError> {
    let tokens = tokenize(text)?;
    let texts: Vec<String> = tokens.iter().map(Token::to_string).collect();
    let mut dec = Decoder {
        tokens: &tokens,
        texts: &texts,
        pos: 0,
        atoms: Vec::new(),
        bonds: Vec::new(),
        rings: Vec::new(),
    };
    dec.derive(usize::MAX, None, None);
    dec.close_rings();
    if dec.atoms.is_empty() {
        return Ok(Molecule::empty());
    }
    let bonds: Vec<Bond> = dec
        .bonds
        .iter()
        .map(|&(a, b, o)| Bond::new(a, b, BondOrder::from_units(o).expect("orders are 1..=3")))
        .collect();
    let mol = Molecule::from_parts(dec.atoms, bonds).expect("decoder builds well-formed graphs");
    Ok(mol
        .sanitize()
        .expect("decoder output respects every bonding capacity"))
}

/// Index tokens for `q`, most significant digit first, using as few digits
/// as possible (at most three).
fn index_tokens(q: usize) -> Vec<&'static str> {
    let len = if q < 16 {
        1
    } else if q < 256 {
        2
    } else {
        3
    };
    (0..len)
        .rev()
        .map(|k| INDEX_ALPHABET[(q >> (4 * k)) & 15])
        .collect()
}

fn index_len(q: usize) -> u8 {
    index_tokens(q).len() as u8
}

/// Encodes a valid molecule as SELFIES.
pub fn encode_selfies(mol: &Molecule) -> Result<String, SelfiesError> {
    if mol.is_empty() {
        return Ok(String::new());
    }
    let comps = mol.components().len();
    if comps > 1 {
        return Err(SelfiesError::Disconnected(comps));
    }
    let ranks = canonical_ranks(mol);
    let kek = mol.kekulized_with_priority(&ranks);
    for (i, atom) in kek.atoms().iter().enumerate() {
        if !supported_atom(atom.element, atom.formal_charge) {
            return Err(SelfiesError::Unsupported {
                atom: i,
                reason: format!("no token for {} with charge {}", atom.element, atom.formal_charge),
            });
        }
        if atom.isotope.is_some() {
            return Err(SelfiesError::Unsupported {
                atom: i,
                reason: "isotopes are not representable".into(),
            });
        }
        // decoded atoms always carry the smallest hydrogen fill
        let used = kek.bond_order_sum(i);
        let implied = atom
            .element
            .target_valence(atom.formal_charge, used)
            .map(|v| u32::from(v) - used);
        if implied != Some(u32::from(kek.hydrogens(i))) {
            return Err(SelfiesError::Unsupported {
                atom: i,
                reason: format!("{} hydrogens cannot be implied", kek.hydrogens(i)),
            });
        }
    }

    let n = kek.num_atoms();
    let orders = kek.kekule_orders().expect("localized").to_vec();
    let nbrs: Vec<Vec<(usize, usize)>> = (0..n)
        .map(|i| {
            let mut v = kek.neighbors(i).to_vec();
            v.sort_by_key(|&(w, _)| ranks[w]);
            v
        })
        .collect();
    let root = (0..n).min_by_key(|&i| ranks[i]).expect("nonempty");

    // DFS to fix derivation order, tree children and ring closures.
    let mut order_of = vec![usize::MAX; n];
    let mut children: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    let mut closures: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    let mut used_bond = vec![false; kek.num_bonds()];
    let mut next = 0;
    order_of[root] = next;
    next += 1;
    let mut stack = vec![(root, 0usize)];
    while let Some(frame) = stack.last_mut() {
        let (v, slot) = *frame;
        if slot == nbrs[v].len() {
            stack.pop();
            continue;
        }
        frame.1 += 1;
        let (w, b) = nbrs[v][slot];
        if used_bond[b] {
            continue;
        }
        used_bond[b] = true;
        if order_of[w] == usize::MAX {
            order_of[w] = next;
            next += 1;
            children[v].push((w, b));
            stack.push((w, 0));
        } else {
            closures[v].push((w, b));
        }
    }

    let units = |b: usize| orders[b].units() as u8;
    let mut out: Vec<String> = Vec::new();
    emit(&kek, root, 1, &children, &closures, &order_of, &units, &mut out);
    Ok(out.concat())
}

#[allow(clippy::too_many_arguments)]
fn emit(
    mol: &Molecule,
    v: usize,
    in_bond: u8,
    children: &[Vec<(usize, usize)>],
    closures: &[Vec<(usize, usize)>],
    order_of: &[usize],
    units: &dyn Fn(usize) -> u8,
    out: &mut Vec<String>,
) {
    let atom = mol.atom(v);
    out.push(
        Token::Atom {
            bond: in_bond,
            element: atom.element,
            charge: atom.formal_charge,
        }
        .to_string(),
    );
    for &(w, b) in &closures[v] {
        let q = order_of[v] - order_of[w] - 1;
        out.push(
            Token::Ring {
                bond: units(b),
                len: index_len(q),
            }
            .to_string(),
        );
        out.extend(index_tokens(q).into_iter().map(String::from));
    }
    let kids = &children[v];
    for (k, &(w, b)) in kids.iter().enumerate() {
        if k + 1 == kids.len() {
            emit(mol, w, units(b), children, closures, order_of, units, out);
        } else {
            let mut branch = Vec::new();
            emit(mol, w, units(b), children, closures, order_of, units, &mut branch);
            let q = branch.len() - 1;
            out.push(
                Token::Branch {
                    bond: units(b),
                    len: index_len(q),
                }
                .to_string(),
            );
            out.extend(index_tokens(q).into_iter().map(String::from));
            out.extend(branch);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::molgraph::parse_smiles;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn smiles_of(selfies: &str) -> String {
        decode_selfies(selfies).unwrap().to_smiles()
    }

    #[test]
    fn ethanol_round_trip() {
        let mol = parse_smiles("CCO").unwrap();
        let s = encode_selfies(&mol).unwrap();
        assert_eq!(s, "[C][C][O]");
        assert_eq!(smiles_of(&s), "CCO");
    }

    #[test]
    fn benzene_round_trip() {
        let mol = parse_smiles("c1ccccc1").unwrap();
        let s = encode_selfies(&mol).unwrap();
        let back = decode_selfies(&s).unwrap();
        assert_eq!(back.to_smiles(), "c1ccccc1");
        assert!(back.atoms().iter().all(|a| a.aromatic));
    }

    #[test]
    fn known_strings() {
        assert_eq!(smiles_of("[C][=C][C][=C][C][=C][Ring1][=Branch1]"), "c1ccccc1");
        assert_eq!(smiles_of("[C][C][=Branch1][C][=O][O]"), "CC(=O)O");
        assert_eq!(smiles_of("[N+1][Branch1][C][C][=Branch1][C][=O][O-1]"), smiles_of("[C][N+1][=Branch1][C][=O][O-1]"));
    }

    #[test]
    fn grammar_clamps_directives() {
        // no branch can open at fluorine, so the would-be index token is an atom
        assert_eq!(smiles_of("[F][Branch1][C][C][C]"), "CCCF");
        // the chain stops once fluorine has bonded
        assert_eq!(smiles_of("[C][F][C][C]"), "CF");
        // a double bond into a halogen is reduced to single
        assert_eq!(smiles_of("[C][=F]"), "CF");
        // oxygen can offer at most a double bond
        assert_eq!(smiles_of("[O][#C]"), "C=O");
    }

    #[test]
    fn dangling_branch_is_dropped() {
        assert_eq!(smiles_of("[C][C][Branch1]"), "CC");
        assert_eq!(smiles_of("[C][Branch1]"), "C");
    }

    #[test]
    fn ring_before_first_atom_is_ignored() {
        assert_eq!(smiles_of("[C][C][Ring1][Ring2]"), "CC");
        assert_eq!(smiles_of("[Ring1][C]"), "C");
    }

    #[test]
    fn ring_onto_bonded_neighbor_raises_order() {
        assert_eq!(smiles_of("[C][C][Ring1][C]"), "C=C");
    }

    #[test]
    fn empty_input_is_degenerate() {
        assert!(decode_selfies("").unwrap().is_empty());
        assert!(decode_selfies("[Branch1][Ring1]").unwrap().is_empty());
    }

    #[test]
    fn unknown_tokens_are_errors() {
        assert!(matches!(
            decode_selfies("[C][Xx]"),
            Err(SelfiesError::UnknownToken { index: 1, .. })
        ));
        assert!(matches!(decode_selfies("C[C]"), Err(SelfiesError::Malformed(0))));
        assert!(matches!(decode_selfies("[C"), Err(SelfiesError::Malformed(0))));
    }

    #[test]
    fn whitespace_between_tokens_is_tolerated() {
        assert_eq!(smiles_of("[C] [C]\n[O]"), "CCO");
    }

    #[test]
    fn random_strings_always_decode_to_valid_molecules() {
        let alphabet = alphabet();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..2000 {
            let len = rng.random_range(0..=40);
            let s: String = (0..len)
                .map(|_| alphabet[rng.random_range(0..alphabet.len())].as_str())
                .collect();
            let mol = decode_selfies(&s).unwrap();
            assert!(mol.validate().is_valid(), "{s}");
        }
    }

    #[test]
    fn index_digits() {
        assert_eq!(index_tokens(0), vec!["[C]"]);
        assert_eq!(index_tokens(15), vec!["[P]"]);
        assert_eq!(index_tokens(16), vec!["[Ring1]", "[C]"]);
        assert_eq!(index_tokens(300), vec!["[Ring1]", "[Ring2]", "[=C]"]);
    }

    #[test]
    fn unsupported_atoms_are_reported() {
        let mol = parse_smiles("[Na+].[Cl-]").unwrap();
        assert!(matches!(encode_selfies(&mol), Err(SelfiesError::Unsupported { .. })));
        let mol = parse_smiles("[13CH4]").unwrap();
        assert!(encode_selfies(&mol).is_err());
    }
}
