//! Interned pair colors.
//!
//! Every color is a structural signature built from earlier colors, so two
//! colorings built against the same interner are directly comparable.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ColorId(pub u32);

impl ColorId {
    pub const LOOP: ColorId = ColorId(0);
    pub const EDGE: ColorId = ColorId(1);
    pub const NON_EDGE: ColorId = ColorId(2);

    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub enum Atom {
    Loop,
    Edge,
    NonEdge,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Signature {
    Atom(Atom),
    /// Sorted multiset of colors.
    Multiset(Vec<ColorId>),
    Sequence(Vec<ColorId>),
    /// Class `index` of the pair partition produced at refinement round
    /// `round`. Used by the algebraic operators, whose new colors are
    /// defined through the span partition rather than a direct multiset.
    Class {
        round: u32,
        index: u32,
    },
}

#[derive(Debug, Clone)]
pub struct ColorInterner {
    ids: HashMap<Signature, ColorId>,
    sigs: Vec<Signature>,
    pairs: HashMap<(ColorId, ColorId), ColorId>,
}

impl Default for ColorInterner {
    fn default() -> Self {
        Self::new()
    }
}

impl ColorInterner {
    /// Fresh interner with the three atoms at ids 0, 1, 2.
    pub fn new() -> Self {
        let mut t = ColorInterner {
            ids: HashMap::new(),
            sigs: Vec::new(),
            pairs: HashMap::new(),
        };
        for a in [Atom::Loop, Atom::Edge, Atom::NonEdge] {
            t.intern(Signature::Atom(a));
        }
        t
    }

    pub fn intern(&mut self, sig: Signature) -> ColorId {
        let sig = match sig {
            Signature::Multiset(mut v) => {
                v.sort_unstable();
                Signature::Multiset(v)
            }
            s => s,
        };
        if let Some(&id) = self.ids.get(&sig) {
            return id;
        }
        let id = ColorId(self.sigs.len() as u32);
        self.sigs.push(sig.clone());
        self.ids.insert(sig, id);
        id
    }

    /// Same as interning `Sequence([a, b])`, with a cache in front.
    pub fn intern_pair(&mut self, a: ColorId, b: ColorId) -> ColorId {
        if let Some(&id) = self.pairs.get(&(a, b)) {
            return id;
        }
        let id = self.intern(Signature::Sequence(vec![a, b]));
        self.pairs.insert((a, b), id);
        id
    }

    pub fn get(&self, sig: &Signature) -> Option<ColorId> {
        self.ids.get(sig).copied()
    }

    pub fn signature(&self, id: ColorId) -> &Signature {
        &self.sigs[id.index()]
    }

    pub fn len(&self) -> usize {
        self.sigs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigs.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atoms_are_fixed() {
        let t = ColorInterner::new();
        assert_eq!(t.get(&Signature::Atom(Atom::Loop)), Some(ColorId::LOOP));
        assert_eq!(t.get(&Signature::Atom(Atom::Edge)), Some(ColorId::EDGE));
        assert_eq!(
            t.get(&Signature::Atom(Atom::NonEdge)),
            Some(ColorId::NON_EDGE)
        );
    }

    #[test]
    fn multisets_ignore_order_sequences_do_not() {
        let mut t = ColorInterner::new();
        let (a, b) = (ColorId::EDGE, ColorId::NON_EDGE);
        assert_eq!(
            t.intern(Signature::Multiset(vec![a, b])),
            t.intern(Signature::Multiset(vec![b, a]))
        );
        assert_ne!(t.intern_pair(a, b), t.intern_pair(b, a));
        assert_eq!(
            t.intern_pair(a, b),
            t.intern(Signature::Sequence(vec![a, b]))
        );
    }
}
