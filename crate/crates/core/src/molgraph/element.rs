use std::fmt;

use serde::{Deserialize, Serialize};

/// Chemical elements accepted by the graph model: the SMILES organic subset
/// plus bracket-only main-group elements from periods 1-4.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Element {
    H,
    Li,
    Be,
    B,
    C,
    N,
    O,
    F,
    Na,
    Mg,
    Al,
    Si,
    P,
    S,
    Cl,
    K,
    Ca,
    Ga,
    Ge,
    As,
    Se,
    Br,
    I,
}

impl Element {
    pub const ALL: [Element; 23] = [
        Element::H,
        Element::Li,
        Element::Be,
        Element::B,
        Element::C,
        Element::N,
        Element::O,
        Element::F,
        Element::Na,
        Element::Mg,
        Element::Al,
        Element::Si,
        Element::P,
        Element::S,
        Element::Cl,
        Element::K,
        Element::Ca,
        Element::Ga,
        Element::Ge,
        Element::As,
        Element::Se,
        Element::Br,
        Element::I,
    ];

    pub fn symbol(self) -> &'static str {
        match self {
            Element::H => "H",
            Element::Li => "Li",
            Element::Be => "Be",
            Element::B => "B",
            Element::C => "C",
            Element::N => "N",
            Element::O => "O",
            Element::F => "F",
            Element::Na => "Na",
            Element::Mg => "Mg",
            Element::Al => "Al",
            Element::Si => "Si",
            Element::P => "P",
            Element::S => "S",
            Element::Cl => "Cl",
            Element::K => "K",
            Element::Ca => "Ca",
            Element::Ga => "Ga",
            Element::Ge => "Ge",
            Element::As => "As",
            Element::Se => "Se",
            Element::Br => "Br",
            Element::I => "I",
        }
    }

    pub fn from_symbol(symbol: &str) -> Option<Element> {
        Element::ALL.iter().copied().find(|e| e.symbol() == symbol)
    }

    pub fn atomic_number(self) -> u8 {
        match self {
            Element::H => 1,
            Element::Li => 3,
            Element::Be => 4,
            Element::B => 5,
            Element::C => 6,
            Element::N => 7,
            Element::O => 8,
            Element::F => 9,
            Element::Na => 11,
            Element::Mg => 12,
            Element::Al => 13,
            Element::Si => 14,
            Element::P => 15,
            Element::S => 16,
            Element::Cl => 17,
            Element::K => 19,
            Element::Ca => 20,
            Element::Ga => 31,
            Element::Ge => 32,
            Element::As => 33,
            Element::Se => 34,
            Element::Br => 35,
            Element::I => 53,
        }
    }

    pub fn period(self) -> u8 {
        match self.atomic_number() {
            1..=2 => 1,
            3..=10 => 2,
            11..=18 => 3,
            19..=36 => 4,
            _ => 5,
        }
    }

    /// Number of valence-shell electrons of the neutral atom.
    pub fn valence_electrons(self) -> i8 {
        match self {
            Element::H | Element::Li | Element::Na | Element::K => 1,
            Element::Be | Element::Mg | Element::Ca => 2,
            Element::B | Element::Al | Element::Ga => 3,
            Element::C | Element::Si | Element::Ge => 4,
            Element::N | Element::P | Element::As => 5,
            Element::O | Element::S | Element::Se => 6,
            Element::F | Element::Cl | Element::Br | Element::I => 7,
        }
    }

    /// Elements that may be written without brackets.
    pub fn is_organic_subset(self) -> bool {
        matches!(
            self,
            Element::B
                | Element::C
                | Element::N
                | Element::O
                | Element::P
                | Element::S
                | Element::F
                | Element::Cl
                | Element::Br
                | Element::I
        )
    }

    /// Elements with a lowercase aromatic spelling.
    pub fn can_be_aromatic(self) -> bool {
        matches!(
            self,
            Element::B
                | Element::C
                | Element::N
                | Element::O
                | Element::P
                | Element::S
                | Element::Se
                | Element::As
        )
    }

    pub fn is_halogen(self) -> bool {
        matches!(self, Element::F | Element::Cl | Element::Br | Element::I)
    }

    /// Allowed total valences (bond-order sum plus hydrogens) for this element
    /// carrying `charge`, ascending.
    ///
    /// A charged atom takes the valence list of the isoelectronic neutral
    /// element in its own period (N+ behaves like C, O- like F, C- like N).
    /// Period 3+ elements of groups 15 and 16 are hypervalent (P 3/5, S 2/4/6);
    /// halogens are always monovalent.
    pub fn allowed_valences(self, charge: i8) -> &'static [u8] {
        if self == Element::H {
            return if charge == 0 { &[1] } else { &[0] };
        }
        let electrons = self.valence_electrons() - charge;
        let hypervalent = self.period() >= 3 && !self.is_halogen();
        match electrons {
            0 | 8 => &[0],
            1 | 7 => &[1],
            2 => &[2],
            3 => &[3],
            4 => &[4],
            5 if hypervalent => &[3, 5],
            5 => &[3],
            6 if hypervalent => &[2, 4, 6],
            6 => &[2],
            _ => &[],
        }
    }

    pub fn max_valence(self, charge: i8) -> Option<u8> {
        self.allowed_valences(charge).last().copied()
    }

    /// Smallest allowed valence that can accommodate `used` bond-order units.
    pub fn target_valence(self, charge: i8, used: u32) -> Option<u8> {
        self.allowed_valences(charge)
            .iter()
            .copied()
            .find(|&v| u32::from(v) >= used)
    }
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symbols_round_trip() {
        for e in Element::ALL {
            assert_eq!(Element::from_symbol(e.symbol()), Some(e));
        }
        assert_eq!(Element::from_symbol("Xx"), None);
    }

    #[test]
    fn valence_table() {
        assert_eq!(Element::B.allowed_valences(0), &[3]);
        assert_eq!(Element::C.allowed_valences(0), &[4]);
        assert_eq!(Element::N.allowed_valences(0), &[3]);
        assert_eq!(Element::N.allowed_valences(1), &[4]);
        assert_eq!(Element::N.allowed_valences(-1), &[2]);
        assert_eq!(Element::O.allowed_valences(0), &[2]);
        assert_eq!(Element::O.allowed_valences(-1), &[1]);
        assert_eq!(Element::O.allowed_valences(1), &[3]);
        assert_eq!(Element::P.allowed_valences(0), &[3, 5]);
        assert_eq!(Element::S.allowed_valences(0), &[2, 4, 6]);
        assert_eq!(Element::Cl.allowed_valences(0), &[1]);
        assert_eq!(Element::C.allowed_valences(1), &[3]);
        assert_eq!(Element::C.allowed_valences(-1), &[3]);
        assert_eq!(Element::B.allowed_valences(-1), &[4]);
        assert_eq!(Element::Na.allowed_valences(1), &[0]);
        assert_eq!(Element::Cl.allowed_valences(-1), &[0]);
        assert!(Element::O.allowed_valences(-3).is_empty());
    }

    #[test]
    fn target_valence_picks_smallest_fit() {
        assert_eq!(Element::S.target_valence(0, 3), Some(4));
        assert_eq!(Element::S.target_valence(0, 6), Some(6));
        assert_eq!(Element::S.target_valence(0, 7), None);
        assert_eq!(Element::C.target_valence(0, 0), Some(4));
    }
}
