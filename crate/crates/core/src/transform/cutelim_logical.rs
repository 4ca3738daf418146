//! Cut elimination for the contraction-absorbing systems.
//!
//! The procedure works rank by rank: a topmost cut of maximal rank is
//! reduced by the classic case analysis — axiomatic conclusions close
//! immediately, propositional cuts split into lower-rank cuts through
//! inversion, passive steps below either premise permute under the cut,
//! and the modal case tracks the diamond copies that the 4/5 rules
//! scatter through the tree until a forward-style step consumes one, at
//! which point the boxed side is relocated to the matching hole and the
//! cut descends to the box contents. Seriality steps are unfolded into
//! explicit [d] steps first and restored at the end.

use crate::axioms::Axioms;
use crate::calculus::{premise_slot, Active, Aux, Proof, RuleId, RuleInstance};
use crate::formula::{negate, Formula};
use crate::search::is_45_closed;
use crate::sequent::{FormulaSlot, NestedSequent, NodeAddress};

use super::admissible::{additions_of, contract_in, invert_in, weaken_in, InvKind};
use super::strmod::{axiom_step, eliminate_seriality, move_child, push_up, unfold_seriality};
use super::{conform, normalize, rebuild, shape, Duplication, ElimTrace, TracePoint, TransformError};

fn leaf1(f: Formula) -> NestedSequent {
    NestedSequent::leaf(vec![f])
}

fn child_addr(a: &[usize], k: usize) -> NodeAddress {
    let mut v = a.to_vec();
    v.push(k);
    v
}

fn max_cut_rank(p: &Proof) -> usize {
    let here = p.step.cut_rank().unwrap_or(0);
    p.subs.iter().map(max_cut_rank).fold(here, usize::max)
}

fn has_rank(p: &Proof, r: usize) -> bool {
    p.step.cut_rank() == Some(r) || p.subs.iter().any(|s| has_rank(s, r))
}

fn point(phase: &str, p: &Proof) -> TracePoint {
    TracePoint { phase: phase.to_string(), size: p.size(), max_cut_rank: max_cut_rank(p) }
}

/// Remove every cut from a proof in the contraction-absorbing system of a
/// 45-closed logic, preserving the conclusion.
pub fn eliminate_cuts_logical(p: &Proof, x: Axioms) -> Result<Proof, TransformError> {
    Ok(eliminate_cuts_logical_traced(p, x)?.0)
}

/// As [`eliminate_cuts_logical`], also reporting a size/rank snapshot per
/// phase of the procedure.
pub fn eliminate_cuts_logical_traced(
    p: &Proof,
    x: Axioms,
) -> Result<(Proof, ElimTrace), TransformError> {
    if !is_45_closed(x) {
        return shape("cut elimination needs a 45-closed logic");
    }
    let mut q = normalize(p)?;
    let mut trace = vec![point("input", &q)];
    if q.uses_rule(RuleId::DiaDc) {
        q = unfold_seriality(&q)?;
        trace.push(point("unfold-seriality", &q));
    }
    loop {
        let r = max_cut_rank(&q);
        if r == 0 {
            break;
        }
        q = reduce_one(&q, r, x)?;
        trace.push(point("reduce", &q));
    }
    if q.uses_rule(RuleId::StrD) {
        q = eliminate_seriality(&q, x)?;
        trace.push(point("restore-seriality", &q));
    }
    Ok((q, trace))
}

/// Reduce one topmost cut of rank `r`.
fn reduce_one(p: &Proof, r: usize, x: Axioms) -> Result<Proof, TransformError> {
    for (i, sub) in p.subs.iter().enumerate() {
        if has_rank(sub, r) {
            let mut subs = p.subs.clone();
            subs[i] = reduce_one(sub, r, x)?;
            return rebuild(p.step.clone(), subs);
        }
    }
    if p.step.rule == RuleId::Cut && p.step.cut_rank() == Some(r) {
        let a = match p.step.active.as_slice() {
            [Active::Node(a)] => a.clone(),
            _ => return shape("unexpected cut actives"),
        };
        let f = p.step.aux.formula.clone().ok_or_else(|| {
            TransformError::Shape("cut without a cut formula".into())
        })?;
        return reduce_cut(&p.step.conclusion, &a, &f, &p.subs[0], &p.subs[1], x);
    }
    shape("no cut of the required rank found")
}

/// Materialize a cut step (used for the strictly lower-rank residues).
fn cutstep(
    c: &NestedSequent,
    a: &[usize],
    f: Formula,
    p1: Proof,
    p2: Proof,
) -> Result<Proof, TransformError> {
    let inst = RuleInstance::derive(
        RuleId::Cut,
        false,
        c.clone(),
        vec![Active::Node(a.to_vec())],
        Aux { formula: Some(f), ..Aux::default() },
    )?;
    rebuild(inst, vec![p1, p2])
}

/// Fully reduce one cut on `f` at node `a`: `p1` proves `c` plus `f`,
/// `p2` proves `c` plus its negation. The result proves `c` with cuts of
/// strictly smaller rank only.
fn reduce_cut(
    c: &NestedSequent,
    a: &[usize],
    f: &Formula,
    p1: &Proof,
    p2: &Proof,
    x: Axioms,
) -> Result<Proof, TransformError> {
    match f {
        Formula::Or(..) | Formula::Dia(_) => reduce_cut(c, a, &negate(f), p2, p1, x),
        Formula::Atom { .. } => reduce_atom(c, a, f, p1, p2, x),
        Formula::And(g, h) => {
            let i1 = c.node(a)?.formulas.len();
            let slot = FormulaSlot::new(a.to_vec(), i1);
            let p1 = conform(p1, &c.graft(a, &leaf1(f.clone()))?)?;
            let p2 = conform(p2, &c.graft(a, &leaf1(negate(f)))?)?;
            let tg = invert_in(&p1, &slot, InvKind::And(0))?;
            let th = invert_in(&p1, &slot, InvKind::And(1))?;
            let u = invert_in(&p2, &slot, InvKind::Or)?;
            let ng = negate(g);
            let cg = c.graft(a, &leaf1(ng.clone()))?;
            let inner = cutstep(
                &cg,
                a,
                (**h).clone(),
                weaken_in(&th, a, &leaf1(ng))?,
                u,
            )?;
            cutstep(c, a, (**g).clone(), tg, inner)
        }
        Formula::Box(b) => {
            let st = YState {
                c: c.clone(),
                anode: a.to_vec(),
                b: (**b).clone(),
                targets: Vec::new(),
            };
            reduce_ycut(&st, p1, p2, x)
        }
    }
}

// ---------------------------------------------------------------------------
// Passive permutation, shared by the atomic and modal cases
// ---------------------------------------------------------------------------

fn principal_slot(sig: &RuleInstance) -> Result<&FormulaSlot, TransformError> {
    match sig.active.first() {
        Some(Active::Slot(s)) => Ok(s),
        _ => shape("expected a principal slot"),
    }
}

/// Apply the action of premise `i` of `sig` (a step re-derived on the bare
/// context) to a proof of the context with extra formulas: inversion for
/// the branching rules, weakening for the additive ones.
fn transport(other: &Proof, sig: &RuleInstance, i: usize) -> Result<Proof, TransformError> {
    use RuleId::*;
    match sig.rule {
        And => invert_in(other, &principal_slot(sig)?.clone(), InvKind::And(i)),
        Or => invert_in(other, &principal_slot(sig)?.clone(), InvKind::Or),
        Box => invert_in(other, &principal_slot(sig)?.clone(), InvKind::Box),
        DiaKc | DiaTc | DiaBc | Dia4c | Dia5c | DiaDc | StrD | Cut => {
            let adds = additions_of(sig)?;
            let mut p = other.clone();
            for (addr, payload) in &adds[i] {
                p = weaken_in(&p, addr, payload)?;
            }
            Ok(p)
        }
        r => super::unsupported(r, "cut permutation"),
    }
}

// ---------------------------------------------------------------------------
// Atomic cuts
// ---------------------------------------------------------------------------

fn reduce_atom(
    c: &NestedSequent,
    a: &[usize],
    f: &Formula,
    p1: &Proof,
    p2: &Proof,
    x: Axioms,
) -> Result<Proof, TransformError> {
    if c.is_axiomatic() {
        return rebuild(axiom_step(c)?, Vec::new());
    }
    let i1 = c.node(a)?.formulas.len();
    let cs = FormulaSlot::new(a.to_vec(), i1);
    let p1 = conform(p1, &c.graft(a, &leaf1(f.clone()))?)?;
    let p2 = conform(p2, &c.graft(a, &leaf1(negate(f)))?)?;

    if p1.step.rule == RuleId::Axiom {
        // the copy must witness the axiom (else `c` itself is axiomatic);
        // contract the other side against the partner literal in `c`
        let partner = p1
            .step
            .active
            .iter()
            .filter_map(|act| match act {
                Active::Slot(s) if *s != cs => Some(s.clone()),
                _ => None,
            })
            .next()
            .ok_or_else(|| TransformError::Shape("axiom without a partner literal".into()))?;
        if partner.node != *a {
            return shape("axiom witnesses must share the cut node");
        }
        return contract_in(
            &p2,
            &Duplication {
                node: a.to_vec(),
                fpairs: vec![(partner.index, i1)],
                cpairs: Vec::new(),
            },
        );
    }

    // every non-axiom rule is passive for an atomic copy: permute it below
    let step = &p1.step;
    let sig =
        RuleInstance::derive(step.rule, false, c.clone(), step.active.clone(), step.aux.clone())?;
    let mut subs = Vec::with_capacity(sig.premises.len());
    for (i, q) in sig.premises.iter().enumerate() {
        let moved = premise_slot(step, i, &cs)
            .ok_or_else(|| TransformError::Shape("atomic copy lost across a step".into()))?;
        let q2 = transport(&p2, &sig, i)?;
        subs.push(reduce_atom(q, &moved.node, f, &p1.subs[i], &q2, x)?);
    }
    rebuild(sig, subs)
}

// ---------------------------------------------------------------------------
// Modal cuts
// ---------------------------------------------------------------------------

struct YState {
    c: NestedSequent,
    /// Hole of the boxed side and of the first diamond copy.
    anode: NodeAddress,
    b: Formula,
    /// Holes of the further diamond copies on the second side.
    targets: Vec<NodeAddress>,
}

impl YState {
    fn side2_target(&self) -> Result<(NestedSequent, Vec<FormulaSlot>), TransformError> {
        let dia = Formula::dia(negate(&self.b));
        let mut t = self.c.clone();
        let mut slots = Vec::with_capacity(1 + self.targets.len());
        for node in std::iter::once(&self.anode).chain(&self.targets) {
            slots.push(FormulaSlot::new(node.clone(), t.node(node)?.formulas.len()));
            t = t.graft(node, &leaf1(dia.clone()))?;
        }
        Ok((t, slots))
    }
}

fn reduce_ycut(st: &YState, p1: &Proof, p2: &Proof, x: Axioms) -> Result<Proof, TransformError> {
    let c = &st.c;
    if c.is_axiomatic() {
        return rebuild(axiom_step(c)?, Vec::new());
    }
    let boxed = Formula::boxed(st.b.clone());
    let cs1 = FormulaSlot::new(st.anode.clone(), c.node(&st.anode)?.formulas.len());
    let p1 = conform(p1, &c.graft(&st.anode, &leaf1(boxed))?)?;
    let (t2, copies) = st.side2_target()?;
    let p2 = conform(p2, &t2)?;

    let step1 = &p1.step;
    let box_on_copy = step1.rule == RuleId::Box
        && matches!(step1.active.first(), Some(Active::Slot(s)) if *s == cs1);
    if !box_on_copy {
        if step1.rule == RuleId::Axiom {
            return shape("axiom on a boxed cut formula");
        }
        // permute the passive step below the cut
        let sig = RuleInstance::derive(
            step1.rule,
            false,
            c.clone(),
            step1.active.clone(),
            step1.aux.clone(),
        )?;
        let mut subs = Vec::with_capacity(sig.premises.len());
        for (i, q) in sig.premises.iter().enumerate() {
            let moved = premise_slot(step1, i, &cs1)
                .ok_or_else(|| TransformError::Shape("boxed copy lost across a step".into()))?;
            let st2 = YState {
                c: q.clone(),
                anode: moved.node,
                b: st.b.clone(),
                targets: st.targets.clone(),
            };
            let q2 = transport(&p2, &sig, i)?;
            subs.push(reduce_ycut(&st2, &p1.subs[i], &q2, x)?);
        }
        return rebuild(sig, subs);
    }

    // side one ends in the box rule: its subproof proves `c` with a fresh
    // child [b] at the main hole
    let k0 = c.node(&st.anode)?.children.len();
    let p1s = &p1.subs[0];
    side2(st, &p1, p1s, k0, &p2, &copies, x)
}

#[allow(clippy::too_many_arguments)]
fn side2(
    st: &YState,
    p1: &Proof,
    p1s: &Proof,
    k0: usize,
    p2: &Proof,
    copies: &[FormulaSlot],
    x: Axioms,
) -> Result<Proof, TransformError> {
    use RuleId::*;
    let c = &st.c;
    let step2 = &p2.step;
    if step2.rule == Axiom {
        return shape("axiom on a diamond cut copy");
    }
    let principal = match step2.active.first() {
        Some(Active::Slot(s)) => Some(s),
        _ => None,
    };
    let on_copy = principal.map(|s| copies.contains(s)).unwrap_or(false);

    if !on_copy {
        // permute the passive step below the cut, adjusting side one
        let sig = RuleInstance::derive(
            step2.rule,
            false,
            c.clone(),
            step2.active.clone(),
            step2.aux.clone(),
        )?;
        let mut subs = Vec::with_capacity(sig.premises.len());
        for (i, q) in sig.premises.iter().enumerate() {
            let mut nodes = Vec::with_capacity(copies.len());
            for cslot in copies {
                let moved = premise_slot(step2, i, cslot).ok_or_else(|| {
                    TransformError::Shape("diamond copy lost across a step".into())
                })?;
                nodes.push(moved.node);
            }
            let st2 = YState {
                c: q.clone(),
                anode: nodes[0].clone(),
                b: st.b.clone(),
                targets: nodes[1..].to_vec(),
            };
            let q1 = transport(p1, &sig, i)?;
            subs.push(reduce_ycut(&st2, &q1, &p2.subs[i], x)?);
        }
        return rebuild(sig, subs);
    }

    let s = principal.unwrap().clone();
    let u = s.node.clone();
    match step2.rule {
        Dia4c | Dia5c => {
            // a new copy appears at the step's target: track it
            let t = match step2.active.get(1) {
                Some(Active::Node(t)) => t.clone(),
                _ => return shape("missing copy target"),
            };
            let mut st2 = YState {
                c: c.clone(),
                anode: st.anode.clone(),
                b: st.b.clone(),
                targets: st.targets.clone(),
            };
            st2.targets.push(t);
            reduce_ycut(&st2, p1, &p2.subs[0], x)
        }
        DiaKc | DiaTc | DiaBc => {
            // a forward-style step consumes a copy: relocate the boxed side
            let w: NodeAddress = match step2.rule {
                DiaKc => match step2.active.get(1) {
                    Some(Active::Node(t)) => t.clone(),
                    _ => return shape("missing forward target"),
                },
                DiaTc => u.clone(),
                DiaBc => {
                    let Some((_, parent)) = u.split_last() else {
                        return shape("backward diamond at the root");
                    };
                    parent.to_vec()
                }
                _ => unreachable!(),
            };
            let nb = negate(&st.b);
            // T1: `c` plus the box contents at `w`
            let src = child_addr(&st.anode, k0);
            let moved = move_child(&normalize(p1s)?, &src, &u, x)?;
            let t1 = match step2.rule {
                DiaKc => {
                    // merge the moved box with the existing target child
                    let wsub = c.node(&w)?.clone();
                    let bx = child_addr(&u, moved.conclusion().node(&u)?.children.len() - 1);
                    let r = weaken_in(&normalize(&moved)?, &bx, &wsub)?;
                    let r = weaken_in(&r, &w, &leaf1(st.b.clone()))?;
                    let bx_idx = *bx.last().unwrap();
                    contract_in(
                        &r,
                        &Duplication {
                            node: u.clone(),
                            fpairs: Vec::new(),
                            cpairs: vec![(*w.last().unwrap(), bx_idx)],
                        },
                    )?
                }
                DiaTc => {
                    let cw = c.graft(&u, &leaf1(st.b.clone()))?;
                    let strt = RuleInstance::base(
                        StrT,
                        cw,
                        vec![Active::Pick {
                            node: u.clone(),
                            formulas: vec![c.node(&u)?.formulas.len()],
                            children: Vec::new(),
                        }],
                    )?;
                    if strt.premises[0] != *moved.conclusion() {
                        return shape("reflexive relocation premise mismatch");
                    }
                    push_up(&strt, &conform(&moved, &strt.premises[0])?, x)?
                }
                DiaBc => {
                    let cw = c.graft(&w, &leaf1(st.b.clone()))?;
                    let strb = RuleInstance::base(
                        StrB,
                        cw,
                        vec![
                            Active::Node(u.clone()),
                            Active::Pick {
                                node: w.clone(),
                                formulas: vec![c.node(&w)?.formulas.len()],
                                children: Vec::new(),
                            },
                        ],
                    )?;
                    if strb.premises[0] != *moved.conclusion() {
                        return shape("symmetric relocation premise mismatch");
                    }
                    push_up(&strb, &conform(&moved, &strb.premises[0])?, x)?
                }
                _ => unreachable!(),
            };
            // T2: recurse with the body occurrence folded into the context
            let st2 = YState {
                c: c.graft(&w, &leaf1(nb.clone()))?,
                anode: st.anode.clone(),
                b: st.b.clone(),
                targets: st.targets.clone(),
            };
            let p1w = weaken_in(p1, &w, &leaf1(nb))?;
            let t2 = reduce_ycut(&st2, &p1w, &p2.subs[0], x)?;
            cutstep(c, &w, st.b.clone(), t1, t2)
        }
        r => super::unsupported(r, "cut reduction"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::axioms;
    use crate::calculus::{check_proof, System};
    use crate::search::{prove, LogicSpec, SearchOptions, SearchOutcome};
    use crate::sequent::parse_sequent;

    fn proved(s: &NestedSequent, x: Axioms) -> Proof {
        match prove(s, &LogicSpec::new(x), &SearchOptions::default()).unwrap() {
            SearchOutcome::Proved { proof, .. } => proof,
            _ => panic!("expected a proof of {s}"),
        }
    }

    /// Introduce a root cut on `f` above a provable sequent, both premises
    /// found by search, then eliminate it and verify the result.
    fn round_trip(goal: &str, f: &str, x: Axioms) {
        assert!(is_45_closed(x));
        let c = parse_sequent(goal).unwrap();
        let f = crate::formula::parse(f).unwrap();
        let p1 = proved(&c.graft(&[], &leaf1(f.clone())).unwrap(), x);
        let p2 = proved(&c.graft(&[], &leaf1(negate(&f))).unwrap(), x);
        let with_cut = cutstep(&c, &[], f, p1, p2).unwrap();
        assert!(with_cut.cut_count() > 0);
        let (out, trace) = eliminate_cuts_logical_traced(&with_cut, x).unwrap();
        assert_eq!(out.cut_count(), 0);
        for r in [RuleId::StrT, RuleId::StrB, RuleId::Str4, RuleId::Str5, RuleId::StrD] {
            assert!(!out.uses_rule(r), "leftover {} step", r.name());
        }
        check_proof(&out, &System::logical(x)).unwrap();
        assert_eq!(out.conclusion(), &c);
        assert!(trace.len() >= 2);
        assert_eq!(trace.last().map(|t| t.max_cut_rank), Some(0));
    }

    #[test]
    fn atomic_and_propositional_cuts() {
        let x = Axioms::EMPTY;
        round_trip("p, ~p", "p", x);
        round_trip("p | ~p", "p", x);
        round_trip("(p & q) | ~p | ~q", "p & q", x);
        round_trip("(p & q) | ~p | ~q", "p | r", x);
    }

    #[test]
    fn boxed_cuts_in_the_basic_logic() {
        let x = Axioms::EMPTY;
        round_trip("[](p | ~p)", "[]p", x);
        round_trip("<>~p | []p, [](q | ~q)", "[]q", x);
    }

    #[test]
    fn boxed_cuts_under_extra_axioms() {
        let t = Axioms::EMPTY.with(axioms::T);
        round_trip("<>~p | p", "[]p", t);
        let four = Axioms::EMPTY.with(axioms::FOUR);
        round_trip("<>~p, [[p]]", "[]p", four);
        round_trip("<>~p, [[p]]", "[][]p", four);
        let b = Axioms::EMPTY.with(axioms::B);
        round_trip("p, [<>~p & (q | ~q)]", "[]<>p", b);
        let e45 = Axioms::EMPTY.with(axioms::FOUR).with(axioms::FIVE);
        round_trip("<>~p, [q | ~q, [p]]", "[]p", e45);
    }

    #[test]
    fn seriality_is_unfolded_and_restored() {
        let d = Axioms::EMPTY.with(axioms::D);
        round_trip("<>~p | <>p", "[]p", d);
        round_trip("<>(p | ~p)", "[]q", d);
    }
}
