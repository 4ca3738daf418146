//! Nested sequents: finite trees whose nodes carry multisets of formulas.
//!
//! A node's multiset is stored as a `Vec` in insertion order, so appending
//! formulas or children never invalidates existing addresses or slots —
//! rule application and proof rewriting rely on that. Equality is
//! order-insensitive (recursive multiset equality via canonical forms);
//! `canonicalize` sorts a tree into the fixed linear order used for
//! corresponding formulas and set sequents.

use std::fmt;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::formula::{self, Formula};

#[derive(Clone, Default, Eq)]
pub struct NestedSequent {
    pub formulas: Vec<Formula>,
    pub children: Vec<NestedSequent>,
}

/// Path of child indices from the root; empty = root.
pub type NodeAddress = Vec<usize>;

/// One formula occurrence: a node plus an index into its formula vector.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FormulaSlot {
    pub node: NodeAddress,
    pub index: usize,
}

impl FormulaSlot {
    pub fn new(node: NodeAddress, index: usize) -> Self {
        FormulaSlot { node, index }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SequentError {
    #[error("invalid node address {0:?}")]
    BadAddress(Vec<usize>),
    #[error("invalid formula slot {0:?}:{1}")]
    BadSlot(Vec<usize>, usize),
    #[error("sequent syntax error at byte {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
}

impl NestedSequent {
    pub fn new(formulas: Vec<Formula>, children: Vec<NestedSequent>) -> Self {
        NestedSequent { formulas, children }
    }

    pub fn leaf(formulas: Vec<Formula>) -> Self {
        NestedSequent { formulas, children: Vec::new() }
    }

    pub fn singleton(f: Formula) -> Self {
        NestedSequent::leaf(vec![f])
    }

    pub fn is_empty(&self) -> bool {
        self.formulas.is_empty() && self.children.is_empty()
    }

    /// Subtree rooted at `a`.
    pub fn node(&self, a: &[usize]) -> Result<&NestedSequent, SequentError> {
        let mut cur = self;
        for &i in a {
            cur = cur.children.get(i).ok_or_else(|| SequentError::BadAddress(a.to_vec()))?;
        }
        Ok(cur)
    }

    pub fn node_mut(&mut self, a: &[usize]) -> Result<&mut NestedSequent, SequentError> {
        let mut cur = self;
        for &i in a {
            cur = cur.children.get_mut(i).ok_or_else(|| SequentError::BadAddress(a.to_vec()))?;
        }
        Ok(cur)
    }

    pub fn formula_at(&self, slot: &FormulaSlot) -> Result<&Formula, SequentError> {
        self.node(&slot.node)?
            .formulas
            .get(slot.index)
            .ok_or_else(|| SequentError::BadSlot(slot.node.clone(), slot.index))
    }

    /// All node addresses in DFS pre-order (root first, children in stored order).
    pub fn addresses(&self) -> Vec<NodeAddress> {
        let mut out = Vec::new();
        fn walk(s: &NestedSequent, here: NodeAddress, out: &mut Vec<NodeAddress>) {
            out.push(here.clone());
            for (i, c) in s.children.iter().enumerate() {
                let mut a = here.clone();
                a.push(i);
                walk(c, a, out);
            }
        }
        walk(self, Vec::new(), &mut out);
        out
    }

    /// Number of nodes.
    pub fn node_count(&self) -> usize {
        1 + self.children.iter().map(|c| c.node_count()).sum::<usize>()
    }

    /// Γ{Δ}: the node at `a` gains `extra`'s formulas and children.
    pub fn graft(&self, a: &[usize], extra: &NestedSequent) -> Result<NestedSequent, SequentError> {
        let mut out = self.clone();
        let n = out.node_mut(a)?;
        n.formulas.extend(extra.formulas.iter().cloned());
        n.children.extend(extra.children.iter().cloned());
        Ok(out)
    }

    /// Recursively sorted copy (the fixed linear order on formulas and on
    /// boxed sequents: formulas by their derived order, children by their
    /// canonical serialization).
    pub fn canonicalize(&self) -> NestedSequent {
        let mut formulas = self.formulas.clone();
        formulas.sort();
        let mut children: Vec<NestedSequent> =
            self.children.iter().map(|c| c.canonicalize()).collect();
        children.sort_by(canon_cmp);
        NestedSequent { formulas, children }
    }

    /// Recursive multiset-to-set collapse: duplicate formulas and duplicate
    /// (canonically) equal children disappear, at every node.
    pub fn set_sequent(&self) -> NestedSequent {
        let canon = self.canonicalize();
        fn dedup(s: &NestedSequent) -> NestedSequent {
            let mut formulas = s.formulas.clone();
            formulas.dedup();
            let mut children: Vec<NestedSequent> = s.children.iter().map(dedup).collect();
            children.dedup_by(|a, b| canon_cmp(a, b) == std::cmp::Ordering::Equal);
            NestedSequent { formulas, children }
        }
        dedup(&canon)
    }

    /// The corresponding formula: ⊥ for the empty sequent, otherwise the
    /// disjunction of the node's formulas and of □F(child) for each child,
    /// in canonical order, associated to the left.
    pub fn corresponding_formula(&self) -> Formula {
        let c = self.canonicalize();
        let mut disjuncts: Vec<Formula> = c.formulas.clone();
        disjuncts.extend(c.children.iter().map(|k| Formula::boxed(k.corresponding_formula())));
        match disjuncts.split_first() {
            None => Formula::falsity(),
            Some((first, rest)) => {
                rest.iter().fold(first.clone(), |acc, f| Formula::or(acc, f.clone()))
            }
        }
    }

    /// Subformulas of all formulas at all nodes, deduplicated.
    pub fn sequent_subformulas(&self) -> Vec<Formula> {
        let mut out = Vec::new();
        fn walk(s: &NestedSequent, out: &mut Vec<Formula>) {
            for f in &s.formulas {
                for g in formula::subformulas(f) {
                    if !out.contains(&g) {
                        out.push(g);
                    }
                }
            }
            for c in &s.children {
                walk(c, out);
            }
        }
        walk(self, &mut out);
        out
    }

    /// Does some node carry a complementary pair of literals?
    pub fn is_axiomatic(&self) -> bool {
        let here = self.formulas.iter().any(|f| {
            matches!(f, Formula::Atom { name, negated: false }
                if self.formulas.contains(&Formula::Atom { name: name.clone(), negated: true }))
        });
        here || self.children.iter().any(|c| c.is_axiomatic())
    }

    /// Multiset membership count of a formula at the root node.
    pub fn count_formula(&self, f: &Formula) -> usize {
        self.formulas.iter().filter(|g| *g == f).count()
    }
}

fn canon_cmp(a: &NestedSequent, b: &NestedSequent) -> std::cmp::Ordering {
    a.formulas
        .cmp(&b.formulas)
        .then_with(|| a.children.len().cmp(&b.children.len()))
        .then_with(|| {
            for (x, y) in a.children.iter().zip(&b.children) {
                let c = canon_cmp(x, y);
                if c != std::cmp::Ordering::Equal {
                    return c;
                }
            }
            std::cmp::Ordering::Equal
        })
}

impl PartialEq for NestedSequent {
    fn eq(&self, other: &Self) -> bool {
        canon_cmp(&self.canonicalize(), &other.canonicalize()) == std::cmp::Ordering::Equal
    }
}

impl std::hash::Hash for NestedSequent {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        let c = self.canonicalize();
        fn feed<H: std::hash::Hasher>(s: &NestedSequent, state: &mut H) {
            s.formulas.hash(state);
            state.write_usize(s.children.len());
            for c in &s.children {
                feed(c, state);
            }
        }
        feed(&c, state);
    }
}

// ---------------------------------------------------------------------------
// Text syntax: `a, [b, [c]], [d]`

impl fmt::Display for NestedSequent {
    fn fmt(&self, w: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for f in &self.formulas {
            if !first {
                write!(w, ", ")?;
            }
            write!(w, "{f}")?;
            first = false;
        }
        for c in &self.children {
            if !first {
                write!(w, ", ")?;
            }
            write!(w, "[{c}]")?;
            first = false;
        }
        Ok(())
    }
}

impl fmt::Debug for NestedSequent {
    fn fmt(&self, w: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(w, "\u{27e8}{self}\u{27e9}")
    }
}

/// Parse the textual sequent syntax. The result is canonicalized.
pub fn parse_sequent(text: &str) -> Result<NestedSequent, SequentError> {
    let (s, rest) = parse_items(text, 0)?;
    let rest_trim = skip_ws(text, rest);
    if rest_trim != text.len() {
        return Err(SequentError::Syntax {
            pos: rest_trim,
            msg: "unexpected trailing input".into(),
        });
    }
    Ok(s.canonicalize())
}

fn skip_ws(text: &str, mut i: usize) -> usize {
    let b = text.as_bytes();
    while i < b.len() && (b[i] as char).is_whitespace() {
        i += 1;
    }
    i
}

fn parse_items(text: &str, mut i: usize) -> Result<(NestedSequent, usize), SequentError> {
    let b = text.as_bytes();
    let mut out = NestedSequent::default();
    loop {
        i = skip_ws(text, i);
        if i >= b.len() || b[i] == b']' {
            return Ok((out, i));
        }
        if b[i] == b'[' {
            // "[]" followed by another item boundary is an empty child;
            // otherwise "[]" starts a box formula
            let after = skip_ws(text, i + 1);
            let empty_child = b.get(after) == Some(&b']')
                && matches!(b.get(skip_ws(text, after + 1)), None | Some(b',') | Some(b']'));
            if empty_child {
                out.children.push(NestedSequent::default());
                i = after + 1;
            } else if b.get(i + 1) != Some(&b']') {
                let (child, j) = parse_items(text, i + 1)?;
                let j = skip_ws(text, j);
                if text.as_bytes().get(j) != Some(&b']') {
                    return Err(SequentError::Syntax { pos: j, msg: "expected ']'".into() });
                }
                out.children.push(child);
                i = j + 1;
            } else {
                let (f, j) = parse_one_formula(text, i)?;
                out.formulas.push(f);
                i = j;
            }
        } else {
            let (f, j) = parse_one_formula(text, i)?;
            out.formulas.push(f);
            i = j;
        }
        i = skip_ws(text, i);
        if i < b.len() && b[i] == b',' {
            i += 1;
        } else if i < b.len() && b[i] != b']' {
            return Err(SequentError::Syntax { pos: i, msg: "expected ',' or ']'".into() });
        }
    }
}

/// Scan one formula item: up to a top-level ',' or unmatched ']'.
fn parse_one_formula(text: &str, start: usize) -> Result<(Formula, usize), SequentError> {
    let b = text.as_bytes();
    let mut depth = 0i32; // tracks '(' and formula-level '[' ... ']'
    let mut i = start;
    while i < b.len() {
        match b[i] {
            b'(' => depth += 1,
            b')' => depth -= 1,
            b'[' if b.get(i + 1) == Some(&b']') => i += 1, // box operator
            b',' if depth == 0 => break,
            b']' if depth == 0 => break,
            _ => {}
        }
        i += 1;
    }
    let piece = &text[start..i];
    let f = formula::parse(piece)
        .map_err(|e| SequentError::Syntax { pos: start + e.pos, msg: e.msg })?;
    Ok((f, i))
}

// ---------------------------------------------------------------------------
// JSON encoding: {"fs":[...], "kids":[...]}

#[derive(Serialize, Deserialize)]
struct SeqJson {
    fs: Vec<String>,
    kids: Vec<SeqJson>,
}

fn to_json(s: &NestedSequent) -> SeqJson {
    SeqJson {
        fs: s.formulas.iter().map(|f| f.to_string()).collect(),
        kids: s.children.iter().map(to_json).collect(),
    }
}

fn from_json(j: &SeqJson) -> Result<NestedSequent, formula::ParseError> {
    Ok(NestedSequent {
        formulas: j.fs.iter().map(|t| formula::parse(t)).collect::<Result<_, _>>()?,
        children: j.kids.iter().map(from_json).collect::<Result<_, _>>()?,
    })
}

impl Serialize for NestedSequent {
    fn serialize<S: Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        to_json(self).serialize(ser)
    }
}

impl<'de> Deserialize<'de> for NestedSequent {
    fn deserialize<D: Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        let j = SeqJson::deserialize(de)?;
        from_json(&j).map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::parse as pf;

    fn seq(s: &str) -> NestedSequent {
        parse_sequent(s).unwrap()
    }

    #[test]
    fn parse_and_display() {
        let s = seq("a, [b, [c]], [d]");
        assert_eq!(s.formulas.len(), 1);
        assert_eq!(s.children.len(), 2);
        let round = parse_sequent(&s.to_string()).unwrap();
        assert_eq!(s, round);
    }

    #[test]
    fn box_operator_vs_child_brackets() {
        let s = seq("[]a, [b]");
        assert_eq!(s.formulas, vec![pf("[]a").unwrap()]);
        assert_eq!(s.children.len(), 1);
    }

    #[test]
    fn resolve_examples() {
        let s = seq("a, [[b], c]");
        assert_eq!(s.node(&[]).unwrap(), &s);
        let inner = s.node(&[0, 0]).unwrap();
        assert_eq!(inner.formulas, vec![pf("b").unwrap()]);
        assert!(s.node(&[3]).is_err());
    }

    #[test]
    fn graft_fills_the_hole() {
        // Γ{} = A,[[B],{}] with hole at path [0]; Δ = C,[D]
        let base = seq("a, [[b]]");
        let delta = seq("c, [d]");
        let grafted = base.graft(&[0], &delta).unwrap();
        assert_eq!(grafted, seq("a, [[b], c, [d]]"));
        // graft with empty is identity
        assert_eq!(base.graft(&[0], &NestedSequent::default()).unwrap(), base);
    }

    #[test]
    fn graft_disjoint_commutes() {
        let base = seq("[a], [b]");
        let d1 = seq("x");
        let d2 = seq("y");
        let g12 = base.graft(&[0], &d1).unwrap().graft(&[1], &d2).unwrap();
        let g21 = base.graft(&[1], &d2).unwrap().graft(&[0], &d1).unwrap();
        assert_eq!(g12, g21);
    }

    #[test]
    fn equality_is_multiset_equality() {
        assert_eq!(seq("a, b"), seq("b, a"));
        assert_eq!(seq("[a], [b]"), seq("[b], [a]"));
        assert_ne!(seq("a"), seq("a, a"));
        assert_ne!(seq("[a]"), seq("[a], [a]"));
    }

    #[test]
    fn set_sequent_examples() {
        assert_eq!(seq("p, p, [q], [q]").set_sequent(), seq("p, [q]"));
        assert_eq!(seq("p, [q, q], [q]").set_sequent(), seq("p, [q]"));
        let s = seq("p, [q, q], [q]");
        assert_eq!(s.set_sequent().set_sequent(), s.set_sequent());
    }

    #[test]
    fn corresponding_formula_examples() {
        assert_eq!(
            NestedSequent::default().corresponding_formula(),
            Formula::falsity()
        );
        let s = seq("a, [b]");
        assert_eq!(s.corresponding_formula(), pf("a | []b").unwrap());
        // determinism under reordering
        assert_eq!(
            seq("p, ~p").corresponding_formula(),
            seq("~p, p").corresponding_formula()
        );
    }

    #[test]
    fn sequent_subformula_examples() {
        assert_eq!(seq("p, [p]").sequent_subformulas(), vec![pf("p").unwrap()]);
        let sf = seq("p, [[]q]").sequent_subformulas();
        assert_eq!(sf.len(), 3);
        let s = seq("p, p, [[]q], [[]q]");
        assert_eq!(
            s.sequent_subformulas().len(),
            s.set_sequent().sequent_subformulas().len()
        );
    }

    #[test]
    fn axiomatic_detection() {
        assert!(seq("p, ~p").is_axiomatic());
        assert!(seq("a, [p, ~p]").is_axiomatic());
        assert!(!seq("p, [~p]").is_axiomatic());
        assert!(!seq("p | ~p").is_axiomatic());
    }

    #[test]
    fn json_roundtrip() {
        let s = seq("a, [b, [c]], [d]");
        let txt = serde_json::to_string(&s).unwrap();
        let back: NestedSequent = serde_json::from_str(&txt).unwrap();
        assert_eq!(s, back);
        assert!(txt.contains("\"fs\""));
        assert!(txt.contains("\"kids\""));
    }
}
