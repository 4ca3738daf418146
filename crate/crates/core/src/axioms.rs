//! Subsets of the modal axioms {d, t, b, 4, 5}, as a tiny bitset.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Clone, Copy, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct Axioms(u8);

pub const D: Axioms = Axioms(1);
pub const T: Axioms = Axioms(2);
pub const B: Axioms = Axioms(4);
pub const FOUR: Axioms = Axioms(8);
pub const FIVE: Axioms = Axioms(16);

impl Axioms {
    pub const EMPTY: Axioms = Axioms(0);
    pub const ALL: Axioms = Axioms(31);

    pub fn contains(self, other: Axioms) -> bool {
        self.0 & other.0 == other.0
    }

    pub fn with(self, other: Axioms) -> Axioms {
        Axioms(self.0 | other.0)
    }

    pub fn without(self, other: Axioms) -> Axioms {
        Axioms(self.0 & !other.0)
    }

    pub fn intersect(self, other: Axioms) -> Axioms {
        Axioms(self.0 & other.0)
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = Axioms> {
        [D, T, B, FOUR, FIVE].into_iter().filter(move |a| self.contains(*a))
    }

    /// All 32 subsets.
    pub fn all_subsets() -> impl Iterator<Item = Axioms> {
        (0u8..32).map(Axioms)
    }

    /// Parse strings like "dt45", "b5", "" (also accepts '+' separators).
    pub fn parse(text: &str) -> Option<Axioms> {
        let mut x = Axioms::EMPTY;
        for c in text.chars() {
            match c {
                'd' => x = x.with(D),
                't' => x = x.with(T),
                'b' => x = x.with(B),
                '4' => x = x.with(FOUR),
                '5' => x = x.with(FIVE),
                '+' | ' ' => {}
                _ => return None,
            }
        }
        Some(x)
    }
}

impl fmt::Display for Axioms {
    fn fmt(&self, w: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (bit, c) in [(D, 'd'), (T, 't'), (B, 'b'), (FOUR, '4'), (FIVE, '5')] {
            if self.contains(bit) {
                write!(w, "{c}")?;
            }
        }
        Ok(())
    }
}

impl fmt::Debug for Axioms {
    fn fmt(&self, w: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(w, "{{{self}}}")
    }
}

impl Serialize for Axioms {
    fn serialize<S: Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        self.to_string().serialize(ser)
    }
}

impl<'de> Deserialize<'de> for Axioms {
    fn deserialize<De: Deserializer<'de>>(de: De) -> Result<Self, De::Error> {
        let s = String::deserialize(de)?;
        Axioms::parse(&s).ok_or_else(|| serde::de::Error::custom("bad axiom set"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_display() {
        assert_eq!(Axioms::parse("dt45").unwrap().to_string(), "dt45");
        assert_eq!(Axioms::parse("").unwrap(), Axioms::EMPTY);
        assert_eq!(Axioms::parse("54").unwrap(), FOUR.with(FIVE));
        assert!(Axioms::parse("x").is_none());
    }

    #[test]
    fn set_ops() {
        let x = T.with(FIVE);
        assert!(x.contains(T));
        assert!(!x.contains(FOUR));
        assert_eq!(x.without(T), FIVE);
        assert_eq!(Axioms::all_subsets().count(), 32);
    }
}
