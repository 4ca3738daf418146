//! Negation-normal-form modal formulas.
//!
//! Formulas are kept in NNF at all times: negation lives on atoms only, and
//! the connectives are ∧, ∨, ◇ (`Dia`) and □ (`Box`). The surface syntax
//! additionally offers `->`, `<->`, `~` on compound formulas and the
//! constants `true`/`false`; all of these are eliminated during parsing.

use std::fmt;
use std::sync::Arc;
use thiserror::Error;

/// Proposition used to expand `true` and `false`. It starts with an
/// underscore, which the surface grammar for user atoms does not allow, so it
/// can never collide with an atom from the input. The lexer still accepts it
/// so that printing round-trips.
pub const RESERVED_ATOM: &str = "_v";

/// A modal formula in negation normal form.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Formula {
    Atom { name: Arc<str>, negated: bool },
    Or(Arc<Formula>, Arc<Formula>),
    And(Arc<Formula>, Arc<Formula>),
    Dia(Arc<Formula>),
    Box(Arc<Formula>),
}

impl Formula {
    pub fn atom(name: &str) -> Formula {
        Formula::Atom { name: name.into(), negated: false }
    }

    pub fn neg_atom(name: &str) -> Formula {
        Formula::Atom { name: name.into(), negated: true }
    }

    pub fn or(a: Formula, b: Formula) -> Formula {
        Formula::Or(Arc::new(a), Arc::new(b))
    }

    pub fn and(a: Formula, b: Formula) -> Formula {
        Formula::And(Arc::new(a), Arc::new(b))
    }

    pub fn dia(a: Formula) -> Formula {
        Formula::Dia(Arc::new(a))
    }

    pub fn boxed(a: Formula) -> Formula {
        Formula::Box(Arc::new(a))
    }

    /// A ⊃ B as ¬A ∨ B.
    pub fn implies(a: Formula, b: Formula) -> Formula {
        Formula::or(negate(&a), b)
    }

    pub fn truth() -> Formula {
        Formula::or(Formula::atom(RESERVED_ATOM), Formula::neg_atom(RESERVED_ATOM))
    }

    pub fn falsity() -> Formula {
        Formula::and(Formula::atom(RESERVED_ATOM), Formula::neg_atom(RESERVED_ATOM))
    }

    pub fn is_atom(&self) -> bool {
        matches!(self, Formula::Atom { .. })
    }
}

/// NNF negation: swaps ∧/∨ and □/◇, flips atom polarity. An involution.
pub fn negate(f: &Formula) -> Formula {
    match f {
        Formula::Atom { name, negated } => {
            Formula::Atom { name: name.clone(), negated: !negated }
        }
        Formula::Or(a, b) => Formula::and(negate(a), negate(b)),
        Formula::And(a, b) => Formula::or(negate(a), negate(b)),
        Formula::Dia(a) => Formula::boxed(negate(a)),
        Formula::Box(a) => Formula::dia(negate(a)),
    }
}

/// Depth measure: literals count 0, every connective adds one.
pub fn depth(f: &Formula) -> usize {
    match f {
        Formula::Atom { .. } => 0,
        Formula::Or(a, b) | Formula::And(a, b) => depth(a).max(depth(b)) + 1,
        Formula::Dia(a) | Formula::Box(a) => depth(a) + 1,
    }
}

/// Modal depth: maximal nesting of □/◇ only.
pub fn modal_depth(f: &Formula) -> usize {
    match f {
        Formula::Atom { .. } => 0,
        Formula::Or(a, b) | Formula::And(a, b) => modal_depth(a).max(modal_depth(b)),
        Formula::Dia(a) | Formula::Box(a) => modal_depth(a) + 1,
    }
}

/// All subterms of `f`, deduplicated, in first-occurrence order.
pub fn subformulas(f: &Formula) -> Vec<Formula> {
    let mut out = Vec::new();
    collect_sub(f, &mut out);
    out
}

fn collect_sub(f: &Formula, out: &mut Vec<Formula>) {
    if out.contains(f) {
        return;
    }
    out.push(f.clone());
    match f {
        Formula::Atom { .. } => {}
        Formula::Or(a, b) | Formula::And(a, b) => {
            collect_sub(a, out);
            collect_sub(b, out);
        }
        Formula::Dia(a) | Formula::Box(a) => collect_sub(a, out),
    }
}

/// Proposition names occurring in `f`.
pub fn propositions(f: &Formula) -> Vec<Arc<str>> {
    let mut out: Vec<Arc<str>> = Vec::new();
    let mut stack = vec![f];
    while let Some(g) = stack.pop() {
        match g {
            Formula::Atom { name, .. } => {
                if !out.iter().any(|n| **n == **name) {
                    out.push(name.clone());
                }
            }
            Formula::Or(a, b) | Formula::And(a, b) => {
                stack.push(a);
                stack.push(b);
            }
            Formula::Dia(a) | Formula::Box(a) => stack.push(a),
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Printing

impl fmt::Display for Formula {
    fn fmt(&self, w: &mut fmt::Formatter<'_>) -> fmt::Result {
        print_prec(self, 0, w)
    }
}

impl fmt::Debug for Formula {
    fn fmt(&self, w: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, w)
    }
}

// Precedence levels used by the printer: | = 1, & = 2, prefix = 3.
fn prec(f: &Formula) -> u8 {
    match f {
        Formula::Or(..) => 1,
        Formula::And(..) => 2,
        _ => 3,
    }
}

fn print_prec(f: &Formula, min: u8, w: &mut fmt::Formatter<'_>) -> fmt::Result {
    let p = prec(f);
    let paren = p < min;
    if paren {
        write!(w, "(")?;
    }
    match f {
        Formula::Atom { name, negated } => {
            if *negated {
                write!(w, "~")?;
            }
            write!(w, "{name}")?;
        }
        // left-associative: the left child may print at the same level,
        // the right child must bind strictly tighter
        Formula::Or(a, b) => {
            print_prec(a, 1, w)?;
            write!(w, "|")?;
            print_prec(b, 2, w)?;
        }
        Formula::And(a, b) => {
            print_prec(a, 2, w)?;
            write!(w, "&")?;
            print_prec(b, 3, w)?;
        }
        Formula::Dia(a) => {
            write!(w, "<>")?;
            print_prec(a, 3, w)?;
        }
        Formula::Box(a) => {
            write!(w, "[]")?;
            print_prec(a, 3, w)?;
        }
    }
    if paren {
        write!(w, ")")?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Parsing

#[derive(Debug, Error, PartialEq, Eq)]
#[error("syntax error at byte {pos}: {msg}")]
pub struct ParseError {
    pub pos: usize,
    pub msg: String,
}

fn err<T>(pos: usize, msg: impl Into<String>) -> Result<T, ParseError> {
    Err(ParseError { pos, msg: msg.into() })
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    True,
    False,
    Not,
    And,
    Or,
    Imp,
    Iff,
    BoxOp,
    DiaOp,
    LParen,
    RParen,
}

struct Lexer {
    toks: Vec<(Tok, usize)>,
    at: usize,
    end: usize,
}

fn lex(text: &str) -> Result<Lexer, ParseError> {
    let b = text.as_bytes();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < b.len() {
        let c = b[i];
        match c {
            b' ' | b'\t' | b'\r' | b'\n' => i += 1,
            b'~' => {
                toks.push((Tok::Not, i));
                i += 1;
            }
            b'&' => {
                toks.push((Tok::And, i));
                i += 1;
            }
            b'|' => {
                toks.push((Tok::Or, i));
                i += 1;
            }
            b'(' => {
                toks.push((Tok::LParen, i));
                i += 1;
            }
            b')' => {
                toks.push((Tok::RParen, i));
                i += 1;
            }
            b'-' => {
                if b.get(i + 1) == Some(&b'>') {
                    toks.push((Tok::Imp, i));
                    i += 2;
                } else {
                    return err(i, "expected '->'");
                }
            }
            b'<' => match b.get(i + 1) {
                Some(b'>') => {
                    toks.push((Tok::DiaOp, i));
                    i += 2;
                }
                Some(b'-') => {
                    if b.get(i + 2) == Some(&b'>') {
                        toks.push((Tok::Iff, i));
                        i += 3;
                    } else {
                        return err(i, "expected '<->'");
                    }
                }
                _ => return err(i, "expected '<>' or '<->'"),
            },
            b'[' => {
                if b.get(i + 1) == Some(&b']') {
                    toks.push((Tok::BoxOp, i));
                    i += 2;
                } else {
                    return err(i, "expected '[]'");
                }
            }
            b'a'..=b'z' | b'_' => {
                let start = i;
                while i < b.len()
                    && (b[i].is_ascii_lowercase() || b[i].is_ascii_digit() || b[i] == b'_')
                {
                    i += 1;
                }
                let name = &text[start..i];
                if name.starts_with('_') && name != RESERVED_ATOM {
                    return err(start, "atoms must start with a lowercase letter");
                }
                match name {
                    "true" => toks.push((Tok::True, start)),
                    "false" => toks.push((Tok::False, start)),
                    _ => toks.push((Tok::Ident(name.to_string()), start)),
                }
            }
            _ => return err(i, format!("unexpected character '{}'", c as char)),
        }
    }
    Ok(Lexer { toks, at: 0, end: text.len() })
}

impl Lexer {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.at).map(|(t, _)| t)
    }

    fn pos(&self) -> usize {
        self.toks.get(self.at).map(|&(_, p)| p).unwrap_or(self.end)
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.at).map(|(t, _)| t.clone());
        self.at += 1;
        t
    }
}

/// Intermediate tree for the surface syntax, before NNF conversion.
enum Surface {
    Atom(String),
    True,
    False,
    Not(Box<Surface>),
    And(Box<Surface>, Box<Surface>),
    Or(Box<Surface>, Box<Surface>),
    Imp(Box<Surface>, Box<Surface>),
    Iff(Box<Surface>, Box<Surface>),
    Dia(Box<Surface>),
    BoxM(Box<Surface>),
}

/// Parse the surface syntax and convert to NNF.
pub fn parse(text: &str) -> Result<Formula, ParseError> {
    let mut lx = lex(text)?;
    let s = parse_iff(&mut lx)?;
    if lx.peek().is_some() {
        return err(lx.pos(), "unexpected trailing input");
    }
    Ok(to_nnf(&s, false))
}

// <-> is the loosest level; left-associative.
fn parse_iff(lx: &mut Lexer) -> Result<Surface, ParseError> {
    let mut lhs = parse_imp(lx)?;
    while lx.peek() == Some(&Tok::Iff) {
        lx.bump();
        let rhs = parse_imp(lx)?;
        lhs = Surface::Iff(Box::new(lhs), Box::new(rhs));
    }
    Ok(lhs)
}

// -> is right-associative.
fn parse_imp(lx: &mut Lexer) -> Result<Surface, ParseError> {
    let lhs = parse_or(lx)?;
    if lx.peek() == Some(&Tok::Imp) {
        lx.bump();
        let rhs = parse_imp(lx)?;
        Ok(Surface::Imp(Box::new(lhs), Box::new(rhs)))
    } else {
        Ok(lhs)
    }
}

fn parse_or(lx: &mut Lexer) -> Result<Surface, ParseError> {
    let mut lhs = parse_and(lx)?;
    while lx.peek() == Some(&Tok::Or) {
        lx.bump();
        let rhs = parse_and(lx)?;
        lhs = Surface::Or(Box::new(lhs), Box::new(rhs));
    }
    Ok(lhs)
}

fn parse_and(lx: &mut Lexer) -> Result<Surface, ParseError> {
    let mut lhs = parse_prefix(lx)?;
    while lx.peek() == Some(&Tok::And) {
        lx.bump();
        let rhs = parse_prefix(lx)?;
        lhs = Surface::And(Box::new(lhs), Box::new(rhs));
    }
    Ok(lhs)
}

fn parse_prefix(lx: &mut Lexer) -> Result<Surface, ParseError> {
    let pos = lx.pos();
    match lx.bump() {
        Some(Tok::Not) => Ok(Surface::Not(Box::new(parse_prefix(lx)?))),
        Some(Tok::DiaOp) => Ok(Surface::Dia(Box::new(parse_prefix(lx)?))),
        Some(Tok::BoxOp) => Ok(Surface::BoxM(Box::new(parse_prefix(lx)?))),
        Some(Tok::Ident(name)) => Ok(Surface::Atom(name)),
        Some(Tok::True) => Ok(Surface::True),
        Some(Tok::False) => Ok(Surface::False),
        Some(Tok::LParen) => {
            let inner = parse_iff(lx)?;
            match lx.bump() {
                Some(Tok::RParen) => Ok(inner),
                _ => err(lx.end, "unbalanced parentheses: expected ')'"),
            }
        }
        Some(_) => err(pos, "expected a formula"),
        None => err(pos, "unexpected end of input"),
    }
}

/// Push negations to the atoms; `neg` tracks an outer negation.
fn to_nnf(s: &Surface, neg: bool) -> Formula {
    match s {
        Surface::Atom(name) => Formula::Atom { name: name.as_str().into(), negated: neg },
        Surface::True => {
            if neg {
                Formula::falsity()
            } else {
                Formula::truth()
            }
        }
        Surface::False => {
            if neg {
                Formula::truth()
            } else {
                Formula::falsity()
            }
        }
        Surface::Not(a) => to_nnf(a, !neg),
        Surface::And(a, b) => {
            if neg {
                Formula::or(to_nnf(a, true), to_nnf(b, true))
            } else {
                Formula::and(to_nnf(a, false), to_nnf(b, false))
            }
        }
        Surface::Or(a, b) => {
            if neg {
                Formula::and(to_nnf(a, true), to_nnf(b, true))
            } else {
                Formula::or(to_nnf(a, false), to_nnf(b, false))
            }
        }
        Surface::Imp(a, b) => {
            // A -> B is ~A | B
            if neg {
                Formula::and(to_nnf(a, false), to_nnf(b, true))
            } else {
                Formula::or(to_nnf(a, true), to_nnf(b, false))
            }
        }
        Surface::Iff(a, b) => {
            // A <-> B is (~A | B) & (~B | A)
            let fwd = Surface::Imp(a.clone_box(), b.clone_box());
            let bwd = Surface::Imp(b.clone_box(), a.clone_box());
            if neg {
                Formula::or(to_nnf(&fwd, true), to_nnf(&bwd, true))
            } else {
                Formula::and(to_nnf(&fwd, false), to_nnf(&bwd, false))
            }
        }
        Surface::Dia(a) => {
            if neg {
                Formula::boxed(to_nnf(a, true))
            } else {
                Formula::dia(to_nnf(a, false))
            }
        }
        Surface::BoxM(a) => {
            if neg {
                Formula::dia(to_nnf(a, true))
            } else {
                Formula::boxed(to_nnf(a, false))
            }
        }
    }
}

impl Surface {
    fn clone_box(&self) -> Box<Surface> {
        Box::new(match self {
            Surface::Atom(n) => Surface::Atom(n.clone()),
            Surface::True => Surface::True,
            Surface::False => Surface::False,
            Surface::Not(a) => Surface::Not(a.clone_box()),
            Surface::And(a, b) => Surface::And(a.clone_box(), b.clone_box()),
            Surface::Or(a, b) => Surface::Or(a.clone_box(), b.clone_box()),
            Surface::Imp(a, b) => Surface::Imp(a.clone_box(), b.clone_box()),
            Surface::Iff(a, b) => Surface::Iff(a.clone_box(), b.clone_box()),
            Surface::Dia(a) => Surface::Dia(a.clone_box()),
            Surface::BoxM(a) => Surface::BoxM(a.clone_box()),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> Formula {
        parse(s).unwrap()
    }

    #[test]
    fn parses_atoms_and_literals() {
        assert_eq!(p("p"), Formula::atom("p"));
        assert_eq!(p("~p"), Formula::neg_atom("p"));
        assert_eq!(p("ab_1"), Formula::atom("ab_1"));
    }

    #[test]
    fn de_morgan_is_forced_by_parser() {
        assert_eq!(p("~(a|b)"), Formula::and(Formula::neg_atom("a"), Formula::neg_atom("b")));
        assert_eq!(p("~(a&b)"), Formula::or(Formula::neg_atom("a"), Formula::neg_atom("b")));
        assert_eq!(p("~[]a"), Formula::dia(Formula::neg_atom("a")));
        assert_eq!(p("~<>a"), Formula::boxed(Formula::neg_atom("a")));
    }

    #[test]
    fn k_axiom_surface_form() {
        // []( a|b) -> ([]a | <>b) reads as ◇(¬a ∧ ¬b) ∨ (□a ∨ ◇b)
        let f = p("[](a|b) -> ([]a | <>b)");
        let want = Formula::or(
            Formula::dia(Formula::and(Formula::neg_atom("a"), Formula::neg_atom("b"))),
            Formula::or(
                Formula::boxed(Formula::atom("a")),
                Formula::dia(Formula::atom("b")),
            ),
        );
        assert_eq!(f, want);
    }

    #[test]
    fn imp_right_assoc_others_left() {
        // a -> b -> c is a -> (b -> c): ~a | (~b | c)
        assert_eq!(p("a -> b -> c"), p("a -> (b -> c)"));
        assert_ne!(p("a -> b -> c"), p("(a -> b) -> c"));
        // a|b|c is (a|b)|c
        assert_eq!(
            p("a|b|c"),
            Formula::or(Formula::or(Formula::atom("a"), Formula::atom("b")), Formula::atom("c"))
        );
    }

    #[test]
    fn constants_expand_over_reserved_atom() {
        assert_eq!(p("false"), Formula::falsity());
        assert_eq!(p("true"), Formula::truth());
        assert_eq!(p("~true"), Formula::falsity());
        assert!(parse("_x").is_err());
    }

    #[test]
    fn negate_examples() {
        assert_eq!(
            negate(&p("[](a|b)")),
            Formula::dia(Formula::and(Formula::neg_atom("a"), Formula::neg_atom("b")))
        );
        assert_eq!(negate(&p("p")), p("~p"));
    }

    #[test]
    fn depth_examples() {
        assert_eq!(depth(&p("p")), 0);
        assert_eq!(depth(&p("~p")), 0);
        assert_eq!(depth(&p("[]p")), 1);
        assert_eq!(depth(&p("[]p & q")), 2);
    }

    #[test]
    fn subformula_examples() {
        assert_eq!(subformulas(&p("p")), vec![p("p")]);
        let f = p("p | []p");
        let sub = subformulas(&f);
        assert_eq!(sub.len(), 3);
        assert!(sub.contains(&p("p")));
        assert!(sub.contains(&p("[]p")));
        assert!(sub.contains(&f));
    }

    #[test]
    fn print_minimal_parens() {
        assert_eq!(p("a|b|c").to_string(), "a|b|c");
        assert_eq!(p("a|(b|c)").to_string(), "a|(b|c)");
        assert_eq!(p("(a|b)&c").to_string(), "(a|b)&c");
        assert_eq!(p("[]<>a").to_string(), "[]<>a");
        assert_eq!(p("~p").to_string(), "~p");
    }

    #[test]
    fn roundtrip_fixed_cases() {
        for s in [
            "p",
            "~p",
            "a|b|c",
            "a&(b|c)",
            "[](a|b)->([]a|<>b)",
            "<>(a&~b)|([]a|<>b)",
            "[]([]p->p)",
            "false",
        ] {
            let f = p(s);
            assert_eq!(parse(&f.to_string()).unwrap(), f, "roundtrip of {s}");
        }
    }
}
