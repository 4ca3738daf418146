//! Importer from Hilbert-style proofs into the structural nested system.
//!
//! A Hilbert proof is a numbered list of steps: tautologies, instances of
//! the K axiom and of the five extension axioms, modus ponens, and
//! necessitation. Each step is compiled to a proof of its formula as a
//! one-formula sequent in the structural system for the chosen logic plus
//! cut: tautologies and the K axiom are discharged by the internal prover,
//! each extension axiom unfolds to its fixed derivation through the
//! matching relocation rule, modus ponens becomes a root cut, and
//! necessitation wraps the proof in a box.

use serde::{Deserialize, Serialize};

use crate::axioms::{self, Axioms};
use crate::calculus::{Active, Aux, Proof, RuleId, RuleInstance};
use crate::formula::{negate, parse, Formula};
use crate::search::{prove, LogicSpec, SearchOptions, SearchOutcome};
use crate::sequent::NestedSequent;

use super::admissible::weaken_in;
use super::{
    diamonds_from_contraction, invert_or, necessitate, normalize, rebuild, shape, TransformError,
};

/// One line of a Hilbert-style proof. Serialized as an externally tagged
/// object: `{"tau": "…"}`, `{"axK": ["A","B"]}`, `{"ax": {"name": "4",
/// "A": "p"}}`, `{"mp": [i, j]}`, `{"nec": i}`. Formulas use the surface
/// syntax, indices are zero-based positions of earlier steps.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum HilbertStep {
    /// A propositional tautology (over arbitrary modal subformulas).
    #[serde(rename = "tau")]
    Tau(String),
    /// □(A⊃B) ⊃ (□A⊃□B).
    #[serde(rename = "axK")]
    AxK([String; 2]),
    /// An instance of one of the axioms d, t, b, 4, 5.
    #[serde(rename = "ax")]
    Ax {
        name: String,
        #[serde(rename = "A")]
        a: String,
    },
    /// From steps `i: A` and `j: A⊃B`, conclude `B`.
    #[serde(rename = "mp")]
    Mp([usize; 2]),
    /// From step `i: A`, conclude □A.
    #[serde(rename = "nec")]
    Nec(usize),
}

/// Parse a JSON array of Hilbert steps.
pub fn hilbert_from_json(text: &str) -> Result<Vec<HilbertStep>, serde_json::Error> {
    serde_json::from_str(text)
}

pub fn hilbert_to_json(steps: &[HilbertStep]) -> String {
    serde_json::to_string_pretty(steps).unwrap_or_default()
}

fn one(f: Formula) -> NestedSequent {
    NestedSequent::leaf(vec![f])
}

/// Discharge a sequent with the plain-K prover and express the result with
/// the non-absorbing diamond rule plus contraction, which the structural
/// system contains.
fn discharge(s: &NestedSequent) -> Result<Proof, TransformError> {
    match prove(s, &LogicSpec::new(Axioms::EMPTY), &SearchOptions::default()) {
        Ok(SearchOutcome::Proved { proof, .. }) => diamonds_from_contraction(&proof),
        _ => shape(format!("not provable in the basic system: {s}")),
    }
}

fn parsef(text: &str) -> Result<Formula, TransformError> {
    parse(text).map_err(|e| TransformError::Shape(format!("bad formula {text:?}: {e}")))
}

fn axiom_bit(name: &str) -> Result<Axioms, TransformError> {
    Ok(match name {
        "d" => axioms::D,
        "t" => axioms::T,
        "b" => axioms::B,
        "4" => axioms::FOUR,
        "5" => axioms::FIVE,
        _ => return shape(format!("unknown axiom name {name:?}")),
    })
}

/// Index of `f` at the root of `s`.
fn slot_of(s: &NestedSequent, f: &Formula) -> Result<usize, TransformError> {
    s.formulas
        .iter()
        .position(|g| g == f)
        .ok_or_else(|| TransformError::Shape(format!("formula {f} not found in {s}")))
}

/// Index of the child of `s` whose formulas are exactly `fs`.
fn child_of(s: &NestedSequent, fs: &[Formula]) -> Result<usize, TransformError> {
    s.children
        .iter()
        .position(|c| c.children.is_empty() && c.formulas == fs)
        .ok_or_else(|| TransformError::Shape("expected child not found".into()))
}

/// Run a bottom-up chain of single-premise steps starting at `c`, then
/// discharge the final premise with the prover. `mk` maps each current
/// sequent to the next rule and its active positions, with `None` ending
/// the chain.
type StepFn = dyn Fn(&NestedSequent) -> Result<Option<(RuleId, Vec<Active>)>, TransformError>;

fn chain(c: NestedSequent, mk: &StepFn) -> Result<Proof, TransformError> {
    match mk(&c)? {
        None => discharge(&c),
        Some((rule, active)) => {
            let inst = RuleInstance::base(rule, c, active)?;
            let sub = chain(inst.premises[0].clone(), mk)?;
            rebuild(inst, vec![sub])
        }
    }
}

/// The fixed derivation of an extension-axiom instance through its
/// relocation rule.
fn axiom_proof(name: &str, a: &Formula, x: Axioms) -> Result<Proof, TransformError> {
    let bit = axiom_bit(name)?;
    if !x.contains(bit) {
        return shape(format!("axiom {name} is not part of the selected logic"));
    }
    let na = negate(a);
    match name {
        // □A ⊃ ◇A: split the disjunction, create a serial child, send both
        // diamonds into it, close on A against ¬A
        "d" => {
            let goal = Formula::implies(Formula::boxed(a.clone()), Formula::dia(a.clone()));
            let (da, dna) = (Formula::dia(a.clone()), Formula::dia(na.clone()));
            chain(one(goal.clone()), &move |s: &NestedSequent| {
                if s.formulas.contains(&goal) {
                    let i = slot_of(s, &goal)?;
                    return Ok(Some((RuleId::Or, vec![Active::slot(vec![], i)])));
                }
                if s.children.is_empty() {
                    return Ok(Some((RuleId::StrD, vec![Active::Node(vec![])])));
                }
                for f in [&dna, &da] {
                    if s.formulas.contains(f) {
                        let i = slot_of(s, f)?;
                        return Ok(Some((
                            RuleId::DiaK,
                            vec![Active::slot(vec![], i), Active::Node(vec![0])],
                        )));
                    }
                }
                Ok(None)
            })
        }
        // A ⊃ ◇A: box ¬A into a fresh child, then send ◇A after it
        "t" => {
            let goal = Formula::implies(a.clone(), Formula::dia(a.clone()));
            let da = Formula::dia(a.clone());
            let na2 = na.clone();
            chain(one(goal.clone()), &move |s: &NestedSequent| {
                if s.formulas.contains(&goal) {
                    let i = slot_of(s, &goal)?;
                    return Ok(Some((RuleId::Or, vec![Active::slot(vec![], i)])));
                }
                if s.children.is_empty() {
                    let i = slot_of(s, &na2)?;
                    return Ok(Some((
                        RuleId::StrT,
                        vec![Active::Pick { node: vec![], formulas: vec![i], children: vec![] }],
                    )));
                }
                if s.formulas.contains(&da) {
                    let i = slot_of(s, &da)?;
                    return Ok(Some((
                        RuleId::DiaK,
                        vec![Active::slot(vec![], i), Active::Node(vec![0])],
                    )));
                }
                Ok(None)
            })
        }
        // A ⊃ □◇A: box the consequent, relocate ¬A backwards into it,
        // then send ◇A after it
        "b" => {
            let goal = Formula::implies(a.clone(), Formula::boxed(Formula::dia(a.clone())));
            let bda = Formula::boxed(Formula::dia(a.clone()));
            let da = Formula::dia(a.clone());
            let na2 = na.clone();
            chain(one(goal.clone()), &move |s: &NestedSequent| {
                if s.formulas.contains(&goal) {
                    let i = slot_of(s, &goal)?;
                    return Ok(Some((RuleId::Or, vec![Active::slot(vec![], i)])));
                }
                if s.formulas.contains(&bda) {
                    let i = slot_of(s, &bda)?;
                    return Ok(Some((RuleId::Box, vec![Active::slot(vec![], i)])));
                }
                if s.formulas.contains(&na2) {
                    let i = slot_of(s, &na2)?;
                    return Ok(Some((
                        RuleId::StrB,
                        vec![
                            Active::Node(vec![0]),
                            Active::Pick { node: vec![], formulas: vec![i], children: vec![] },
                        ],
                    )));
                }
                if !s.children.is_empty() && s.children[0].formulas.contains(&da) {
                    let i = slot_of(&s.children[0], &da)?;
                    return Ok(Some((
                        RuleId::DiaK,
                        vec![Active::slot(vec![0], i), Active::Node(vec![0, 0])],
                    )));
                }
                Ok(None)
            })
        }
        // □A ⊃ □□A: box twice, flatten the nesting with the transitive
        // relocation, then send ◇¬A into the inner witness
        "4" => {
            let goal =
                Formula::implies(Formula::boxed(a.clone()), Formula::boxed(Formula::boxed(a.clone())));
            let bba = Formula::boxed(Formula::boxed(a.clone()));
            let ba = Formula::boxed(a.clone());
            let dna = Formula::dia(na.clone());
            let a2 = a.clone();
            chain(one(goal.clone()), &move |s: &NestedSequent| {
                if s.formulas.contains(&goal) {
                    let i = slot_of(s, &goal)?;
                    return Ok(Some((RuleId::Or, vec![Active::slot(vec![], i)])));
                }
                if s.formulas.contains(&bba) {
                    let i = slot_of(s, &bba)?;
                    return Ok(Some((RuleId::Box, vec![Active::slot(vec![], i)])));
                }
                if let Ok(k) = child_of(s, std::slice::from_ref(&ba)) {
                    return Ok(Some((RuleId::Box, vec![Active::slot(vec![k], 0)])));
                }
                if s.children.len() == 1 && s.children[0].children.len() == 1 {
                    return Ok(Some((
                        RuleId::Str4,
                        vec![Active::Node(vec![0]), Active::Node(vec![0, 0])],
                    )));
                }
                if s.formulas.contains(&dna) {
                    let i = slot_of(s, &dna)?;
                    let k = child_of(s, std::slice::from_ref(&a2))?;
                    return Ok(Some((
                        RuleId::DiaK,
                        vec![Active::slot(vec![], i), Active::Node(vec![k])],
                    )));
                }
                Ok(None)
            })
        }
        // ◇A ⊃ □◇A: box both disjuncts, relocate the ¬A-box sideways into
        // the other, then send ◇A after it
        "5" => {
            let goal =
                Formula::implies(Formula::dia(a.clone()), Formula::boxed(Formula::dia(a.clone())));
            let bna = Formula::boxed(na.clone());
            let bda = Formula::boxed(Formula::dia(a.clone()));
            let da = Formula::dia(a.clone());
            let na2 = na.clone();
            chain(one(goal.clone()), &move |s: &NestedSequent| {
                if s.formulas.contains(&goal) {
                    let i = slot_of(s, &goal)?;
                    return Ok(Some((RuleId::Or, vec![Active::slot(vec![], i)])));
                }
                for f in [&bna, &bda] {
                    if s.formulas.contains(f) {
                        let i = slot_of(s, f)?;
                        return Ok(Some((RuleId::Box, vec![Active::slot(vec![], i)])));
                    }
                }
                if s.children.len() == 2 {
                    let src = child_of(s, std::slice::from_ref(&na2))?;
                    let dst = child_of(s, std::slice::from_ref(&da))?;
                    return Ok(Some((
                        RuleId::Str5,
                        vec![Active::Node(vec![dst]), Active::Node(vec![src])],
                    )));
                }
                if s.children.len() == 1 && s.children[0].formulas.contains(&da) {
                    let i = slot_of(&s.children[0], &da)?;
                    return Ok(Some((
                        RuleId::DiaK,
                        vec![Active::slot(vec![0], i), Active::Node(vec![0, 0])],
                    )));
                }
                Ok(None)
            })
        }
        _ => unreachable!(),
    }
}

/// Compile a Hilbert-style proof to a proof (with cuts) of its last line
/// as a one-formula sequent in the structural system for `x`.
pub fn hilbert_to_nested(steps: &[HilbertStep], x: Axioms) -> Result<Proof, TransformError> {
    if steps.is_empty() {
        return shape("empty Hilbert proof");
    }
    let mut done: Vec<Proof> = Vec::with_capacity(steps.len());
    for (pos, step) in steps.iter().enumerate() {
        let fetch = |i: usize| -> Result<&Proof, TransformError> {
            if i >= pos {
                return shape(format!("step {pos} refers to a later step {i}"));
            }
            Ok(&done[i])
        };
        let p = match step {
            HilbertStep::Tau(f) => discharge(&one(parsef(f)?))?,
            HilbertStep::AxK([a, b]) => {
                let (a, b) = (parsef(a)?, parsef(b)?);
                let f = Formula::implies(
                    Formula::boxed(Formula::implies(a.clone(), b.clone())),
                    Formula::implies(Formula::boxed(a), Formula::boxed(b)),
                );
                discharge(&one(f))?
            }
            HilbertStep::Ax { name, a } => axiom_proof(name, &parsef(a)?, x)?,
            HilbertStep::Mp([i, j]) => {
                let (pi, pj) = (fetch(*i)?, fetch(*j)?);
                let fi = &pi.conclusion().formulas[0];
                let fj = &pj.conclusion().formulas[0];
                let Formula::Or(l, r) = fj else {
                    return shape(format!("step {j} is not an implication: {fj}"));
                };
                if negate(l) != *fi {
                    return shape(format!("modus ponens mismatch: {fi} against {fj}"));
                }
                let b = (**r).clone();
                let cut = RuleInstance::derive(
                    RuleId::Cut,
                    false,
                    one(b.clone()),
                    vec![Active::Node(vec![])],
                    Aux { formula: Some(fi.clone()), ..Aux::default() },
                )?;
                let p1 = weaken_in(&normalize(pi)?, &[], &one(b))?;
                let p2 = invert_or(pj, &crate::sequent::FormulaSlot::new(vec![], 0))?;
                rebuild(cut, vec![p1, p2])?
            }
            HilbertStep::Nec(i) => {
                let pi = fetch(*i)?;
                let f = pi.conclusion().formulas[0].clone();
                let boxed = RuleInstance::base(
                    RuleId::Box,
                    one(Formula::boxed(f)),
                    vec![Active::slot(vec![], 0)],
                )?;
                rebuild(boxed, vec![necessitate(pi)?])?
            }
        };
        if p.conclusion().formulas.len() != 1 || !p.conclusion().children.is_empty() {
            return shape("internal: a Hilbert step did not compile to one formula");
        }
        done.push(p);
    }
    Ok(done.pop().unwrap())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::{check_proof, System};

    fn sys(x: Axioms) -> System {
        System::structural(x).plus(RuleId::Cut)
    }

    #[test]
    fn axiom_templates_check_in_their_systems() {
        for (name, bit) in
            [("d", axioms::D), ("t", axioms::T), ("b", axioms::B), ("4", axioms::FOUR), ("5", axioms::FIVE)]
        {
            for a in ["p", "p & q", "[]p | r"] {
                let x = Axioms::EMPTY.with(bit);
                let p = axiom_proof(name, &parse(a).unwrap(), x).unwrap();
                check_proof(&p, &sys(x)).unwrap();
                assert_eq!(p.cut_count(), 0, "axiom {name} template should be cut-free");
            }
        }
    }

    #[test]
    fn axiom_outside_the_logic_is_rejected() {
        let steps = hilbert_from_json(r#"[{"ax": {"name": "4", "A": "p"}}]"#).unwrap();
        assert!(hilbert_to_nested(&steps, Axioms::EMPTY.with(axioms::T)).is_err());
    }

    #[test]
    fn modus_ponens_becomes_a_cut() {
        // p⊃◇p and a syllogism step chaining it with ◇p⊃◇p itself is
        // overkill; just apply t to a tautology
        let x = Axioms::EMPTY.with(axioms::T);
        let steps = hilbert_from_json(
            r#"[{"tau": "p | ~p"}, {"ax": {"name": "t", "A": "p | ~p"}}, {"mp": [0, 1]}]"#,
        )
        .unwrap();
        let p = hilbert_to_nested(&steps, x).unwrap();
        check_proof(&p, &sys(x)).unwrap();
        assert!(p.cut_count() > 0);
        assert_eq!(p.conclusion().formulas[0], Formula::dia(parse("p | ~p").unwrap()));
    }

    #[test]
    fn necessitation_boxes_the_conclusion() {
        let steps =
            hilbert_from_json(r#"[{"tau": "p | ~p"}, {"nec": 0}, {"nec": 1}]"#).unwrap();
        let p = hilbert_to_nested(&steps, Axioms::EMPTY).unwrap();
        check_proof(&p, &sys(Axioms::EMPTY)).unwrap();
        assert_eq!(
            p.conclusion().formulas[0],
            Formula::boxed(Formula::boxed(parse("p | ~p").unwrap()))
        );
    }

    #[test]
    fn k_axiom_and_distribution_chain() {
        // derive □p ⊃ □(p | q) by K-axiom reasoning: tau p ⊃ (p|q), nec,
        // axK, mp
        let steps = hilbert_from_json(
            r#"[{"tau": "p -> (p | q)"}, {"nec": 0}, {"axK": ["p", "p | q"]}, {"mp": [1, 2]}]"#,
        )
        .unwrap();
        let p = hilbert_to_nested(&steps, Axioms::EMPTY).unwrap();
        check_proof(&p, &sys(Axioms::EMPTY)).unwrap();
        assert_eq!(
            p.conclusion().formulas[0],
            Formula::implies(parse("[]p").unwrap(), parse("[](p | q)").unwrap())
        );
    }
}
