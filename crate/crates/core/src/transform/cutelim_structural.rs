//! Cut elimination for the structural-rule systems (medial calculus).
//!
//! The pipeline normalizes the proof shape first: seriality steps sink to
//! a bottom tail, general contractions split into formula contractions
//! plus medials, the formula contractions sink to a bottom tail of their
//! own (absorbing into multiplicity variants of ∧, □ and cut where a rule
//! consumes a duplicated copy), and multicuts unfold into plain cuts.
//! The core is then cut-free-able rank by rank: a topmost cut of maximal
//! rank either closes on an axiomatic conclusion, drops a copy nobody
//! uses, contracts onto a partner already in the context, splits through
//! the propositional inversions, or — in the modal case — pulls the box
//! step and the diamond step that consume the two copies down to the cut.
//! Diamond relocations picked up on the way down are mirrored as child
//! relocations on the box side, after which a multicut at the landing
//! node replaces the modal cut by cuts of smaller rank.  The tails are
//! restored at the end and the multiplicity rules fold back into plain
//! rules with contraction.

use crate::axioms::{self, Axioms};
use crate::calculus::{
    premise_node_addr, premise_slot, Active, Aux, Proof, RuleId, RuleInstance,
};
use crate::formula::{negate, Formula};
use crate::search::{axiom_instance, closure45};
use crate::sequent::{FormulaSlot, NestedSequent, NodeAddress};

use super::admissible::{contract_in, invert_in, weaken_in, Duplication, InvKind};
use super::{
    conform, normalize, rebuild, shape, unsupported, ElimTrace, TracePoint, TransformError,
};

fn leaf1(f: Formula) -> NestedSequent {
    NestedSequent::leaf(vec![f])
}

fn child_of(a: &[usize], k: usize) -> NodeAddress {
    let mut out = a.to_vec();
    out.push(k);
    out
}

fn step_rank(p: &Proof) -> usize {
    p.step.cut_rank().unwrap_or(0)
}

fn max_cut_rank(p: &Proof) -> usize {
    p.subs.iter().map(max_cut_rank).max().unwrap_or(0).max(step_rank(p))
}

fn has_rank(p: &Proof, r: usize) -> bool {
    step_rank(p) == r || p.subs.iter().any(|s| has_rank(s, r))
}

fn point(phase: &str, p: &Proof) -> TracePoint {
    TracePoint { phase: phase.to_string(), size: p.size(), max_cut_rank: max_cut_rank(p) }
}

/// Remove all cut-family steps from a proof in the structural system for
/// `x` (with cut), producing a proof of the same conclusion in the
/// structural system for `x` without cut.
pub fn eliminate_cuts_structural(p: &Proof, x: Axioms) -> Result<Proof, TransformError> {
    Ok(eliminate_cuts_structural_traced(p, x)?.0)
}

/// As [`eliminate_cuts_structural`], also reporting size and rank after
/// each phase of the procedure.
pub fn eliminate_cuts_structural_traced(
    p: &Proof,
    x: Axioms,
) -> Result<(Proof, ElimTrace), TransformError> {
    let p0 = normalize(p)?;
    let mut trace = vec![point("start", &p0)];

    // Defensive sweeps: explicit weakening and necessitation steps are
    // replaced by their admissible counterparts so the later phases only
    // ever meet the medial-calculus core rules.
    let p0 = wk_sweep(&p0)?;
    let p0 = normalize(&p0)?;

    // Phase 1: seriality steps sink to a bottom tail.
    let (dtail, core) = sink_strd(&p0)?;
    if !dtail.is_empty() {
        trace.push(point("lower-seriality", &core));
    }

    // Phase 2: general contractions split into formula contractions and
    // medials.
    let core = expand_ctr(&core)?;
    trace.push(point("split-contraction", &core));

    // Phase 3: formula contractions sink to a bottom tail.
    let core = lower_fctr(core)?;
    let (ftail, core) = strip_fctr_tail(core)?;
    trace.push(point("lower-contraction", &core));

    // Phase 4: multicuts unfold into plain cuts.
    let core = expand_mcut(&core)?;
    let mut core = normalize(&core)?;
    trace.push(point("prepare", &core));

    // Phase 5: the rank loop.
    let mut fuel: usize = 200_000;
    loop {
        let r = max_cut_rank(&core);
        if r == 0 {
            break;
        }
        core = reduce_one(&core, r, x, &mut fuel)?;
        core = normalize(&core)?;
        trace.push(point("reduce", &core));
    }

    // Phase 6: multiplicity rules and medials fold back into the plain
    // contraction rules.
    let core = fold_back(&core)?;

    // Reattach the contraction tail, then the seriality tail.
    let mut out = core;
    for inst in ftail.iter().rev() {
        let slot = match inst.active.as_slice() {
            [Active::Slot(s)] => s.clone(),
            _ => return shape("formula contraction without a slot"),
        };
        let ctr = RuleInstance::base(
            RuleId::Ctr,
            inst.conclusion.clone(),
            vec![Active::Pick { node: slot.node, formulas: vec![slot.index], children: vec![] }],
        )?;
        out = rebuild(ctr, vec![out])?;
    }
    for inst in dtail.iter().rev() {
        let again =
            RuleInstance::derive(inst.rule, false, inst.conclusion.clone(), inst.active.clone(), inst.aux.clone())?;
        out = rebuild(again, vec![out])?;
    }
    let out = conform(&out, p0.conclusion())?;
    check_final(&out, x)?;
    trace.push(point("done", &out));
    Ok((out, trace))
}

/// The closed final rule set: no cut-family, multiplicity or weakening
/// steps, and only relocation rules licensed by `x`.
fn check_final(p: &Proof, x: Axioms) -> Result<(), TransformError> {
    use RuleId::*;
    let ok = match p.step.rule {
        Axiom | And | Or | Box | DiaK | Ctr => true,
        StrD => x.contains(axioms::D),
        StrT => x.contains(axioms::T),
        StrB => x.contains(axioms::B),
        Str4 => x.contains(axioms::FOUR),
        Str5 => x.contains(axioms::FIVE),
        _ => false,
    };
    if !ok {
        return unsupported(p.step.rule, "translate into the plain structural system");
    }
    for sub in &p.subs {
        check_final(sub, x)?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Sweeps: weakening and necessitation steps become admissible rebuilds
// ---------------------------------------------------------------------------

fn wk_sweep(p: &Proof) -> Result<Proof, TransformError> {
    let subs =
        p.subs.iter().map(wk_sweep).collect::<Result<Vec<_>, _>>()?;
    match p.step.rule {
        RuleId::Wk => {
            let [Active::Pick { node, formulas, children }] = p.step.active.as_slice() else {
                return shape("weakening without a pick");
            };
            let here = p.step.conclusion.node(node)?;
            let mut fs = formulas.clone();
            fs.sort_unstable();
            let mut ks = children.clone();
            ks.sort_unstable();
            let picked = NestedSequent::new(
                fs.iter().map(|&i| here.formulas[i].clone()).collect(),
                ks.iter().map(|&i| here.children[i].clone()).collect(),
            );
            let sub = normalize(&subs[0])?;
            let out = weaken_in(&sub, node, &picked)?;
            conform(&out, &p.step.conclusion)
        }
        RuleId::Nec => {
            let sub = normalize(&subs[0])?;
            let out = super::necessitate(&sub)?;
            conform(&out, &p.step.conclusion)
        }
        _ => rebuild(p.step.clone(), subs),
    }
}

// ---------------------------------------------------------------------------
// Phase 1: seriality sinks to a bottom tail
// ---------------------------------------------------------------------------

fn sink_strd(p: &Proof) -> Result<(Vec<RuleInstance>, Proof), TransformError> {
    if !p.uses_rule(RuleId::StrD) {
        return Ok((Vec::new(), p.clone()));
    }
    let mut cur = p.clone();
    loop {
        match lower_strd_once(&cur)? {
            Some(next) => cur = normalize(&next)?,
            None => break,
        }
    }
    let mut tail = Vec::new();
    while cur.step.rule == RuleId::StrD {
        tail.push(cur.step.clone());
        cur = normalize(&cur.subs[0])?;
    }
    Ok((tail, cur))
}

fn lower_strd_once(p: &Proof) -> Result<Option<Proof>, TransformError> {
    if p.step.rule != RuleId::StrD {
        for i in 0..p.subs.len() {
            if p.subs[i].step.rule == RuleId::StrD {
                return Ok(Some(swap_strd(p, i)?));
            }
        }
    }
    for (i, sub) in p.subs.iter().enumerate() {
        if let Some(q) = lower_strd_once(sub)? {
            let mut subs = p.subs.clone();
            subs[i] = q;
            return Ok(Some(rebuild(p.step.clone(), subs)?));
        }
    }
    Ok(None)
}

fn swap_strd(p: &Proof, i: usize) -> Result<Proof, TransformError> {
    let sigma = &p.step;
    let ser = &p.subs[i].step;
    let a = match ser.active.as_slice() {
        [Active::Node(a)] => a.clone(),
        _ => return shape("seriality step without a node"),
    };
    let a2 = sigma
        .conclusion
        .addresses()
        .into_iter()
        .find(|cand| premise_node_addr(sigma, i, cand).as_deref() == Some(a.as_slice()));
    let Some(a2) = a2 else {
        return unsupported(sigma.rule, "lower a seriality step");
    };
    let low = RuleInstance::base(RuleId::StrD, sigma.conclusion.clone(), vec![Active::Node(a2.clone())])?;
    let mid = low.premises[0].clone();
    let up = RuleInstance::derive(sigma.rule, sigma.circle, mid, sigma.active.clone(), sigma.aux.clone())?;
    let extra = NestedSequent::new(Vec::new(), vec![NestedSequent::default()]);
    let mut subs = Vec::with_capacity(p.subs.len());
    for (j, sub) in p.subs.iter().enumerate() {
        if j == i {
            subs.push(p.subs[i].subs[0].clone());
        } else {
            match premise_node_addr(sigma, j, &a2) {
                Some(aj) => subs.push(weaken_in(&normalize(sub)?, &aj, &extra)?),
                None => return unsupported(sigma.rule, "lower a seriality step"),
            }
        }
    }
    rebuild(low, vec![rebuild(up, subs)?])
}

// ---------------------------------------------------------------------------
// Phase 2: general contraction = formula contractions + medials
// ---------------------------------------------------------------------------

fn expand_ctr(p: &Proof) -> Result<Proof, TransformError> {
    let subs = p.subs.iter().map(expand_ctr).collect::<Result<Vec<_>, _>>()?;
    if p.step.rule != RuleId::Ctr {
        return rebuild(p.step.clone(), subs);
    }
    let [Active::Pick { node, formulas, children }] = p.step.active.as_slice() else {
        return shape("contraction without a pick");
    };
    let here = p.step.conclusion.node(node)?;
    let mut fs = formulas.clone();
    fs.sort_unstable();
    let mut ks = children.clone();
    ks.sort_unstable();
    let picked = NestedSequent::new(
        fs.iter().map(|&i| here.formulas[i].clone()).collect(),
        ks.iter().map(|&i| here.children[i].clone()).collect(),
    );
    let sub = normalize(&subs[0])?;
    ctr_expand(sub, &p.step.conclusion, node, picked)
}

/// From `sub ⊢ Γ{Δ at a, picked extra}` derive `Γ{Δ at a}` using only
/// formula contractions and medials.
fn ctr_expand(
    sub: Proof,
    c: &NestedSequent,
    node: &[usize],
    mut picked: NestedSequent,
) -> Result<Proof, TransformError> {
    if let Some(f) = picked.formulas.pop() {
        let c2 = c.graft(node, &leaf1(f.clone()))?;
        let inner = ctr_expand(sub, &c2, node, picked)?;
        let Some(idx) = c.node(node)?.formulas.iter().position(|g| *g == f) else {
            return shape("contracted formula missing from the conclusion");
        };
        let inst = RuleInstance::base(
            RuleId::Fctr,
            c.clone(),
            vec![Active::slot(node.to_vec(), idx)],
        )?;
        return rebuild(inst, vec![inner]);
    }
    if let Some(delta) = picked.children.pop() {
        let wrap = NestedSequent::new(Vec::new(), vec![delta.clone()]);
        let csplit = c.graft(node, &wrap)?;
        let inner = ctr_expand(sub, &csplit, node, picked)?;
        let Some(k) = c.node(node)?.children.iter().position(|ch| *ch == delta) else {
            return shape("contracted child missing from the conclusion");
        };
        let d = child_of(node, k);
        let cmerged = c.graft(&d, &delta)?;
        let fl = delta.formulas.len();
        let cl = delta.children.len();
        let base_f = cmerged.node(&d)?.formulas.len() - fl;
        let base_c = cmerged.node(&d)?.children.len() - cl;
        let pick = Active::Pick {
            node: d.clone(),
            formulas: (base_f..base_f + fl).collect(),
            children: (base_c..base_c + cl).collect(),
        };
        let minst = RuleInstance::base(
            RuleId::Med,
            cmerged,
            vec![Active::Node(d.clone()), pick],
        )?;
        let merged = rebuild(minst, vec![inner])?;
        return ctr_expand(merged, c, &d, delta);
    }
    conform(&sub, c)
}

// ---------------------------------------------------------------------------
// Phase 3: formula contractions sink to a bottom tail
// ---------------------------------------------------------------------------

fn lower_fctr(mut p: Proof) -> Result<Proof, TransformError> {
    loop {
        p = normalize(&p)?;
        match lower_fctr_once(&p)? {
            Some(q) => p = q,
            None => return Ok(p),
        }
    }
}

fn lower_fctr_once(p: &Proof) -> Result<Option<Proof>, TransformError> {
    if p.step.rule != RuleId::Fctr {
        for i in 0..p.subs.len() {
            if p.subs[i].step.rule == RuleId::Fctr {
                return Ok(Some(swap_fctr(p, i)?));
            }
        }
    }
    for (i, sub) in p.subs.iter().enumerate() {
        if let Some(q) = lower_fctr_once(sub)? {
            let mut subs = p.subs.clone();
            subs[i] = q;
            return Ok(Some(rebuild(p.step.clone(), subs)?));
        }
    }
    Ok(None)
}

/// Every formula occurrence of a premise that a rule keeps, traced back
/// to the occurrence in its conclusion.
fn conclusion_slot(inst: &RuleInstance, i: usize, target: &FormulaSlot) -> Option<FormulaSlot> {
    for addr in inst.conclusion.addresses() {
        let n = inst.conclusion.node(&addr).ok()?;
        for idx in 0..n.formulas.len() {
            let cand = FormulaSlot::new(addr.clone(), idx);
            if premise_slot(inst, i, &cand).as_ref() == Some(target) {
                return Some(cand);
            }
        }
    }
    None
}

fn conclusion_node(inst: &RuleInstance, i: usize, target: &[usize]) -> Option<NodeAddress> {
    inst.conclusion
        .addresses()
        .into_iter()
        .find(|cand| premise_node_addr(inst, i, cand).as_deref() == Some(target))
}

fn swap_fctr(p: &Proof, i: usize) -> Result<Proof, TransformError> {
    use RuleId::*;
    let sigma = &p.step;
    let fstep = &p.subs[i].step;
    let s = match fstep.active.as_slice() {
        [Active::Slot(s)] => s.clone(),
        _ => return shape("formula contraction without a slot"),
    };
    let f = fstep.conclusion.formula_at(&s)?.clone();
    let r = p.subs[i].subs[0].clone();
    let c = sigma.conclusion.clone();

    // Generic commute: the copied occurrence survives the step below.
    if let Some(s2) = conclusion_slot(sigma, i, &s) {
        if *c.formula_at(&s2)? == f {
            return commute_fctr(p, i, &s2, &f, r);
        }
    }

    match sigma.rule {
        Or => {
            // The copy is a disjunct released by the step below: duplicate
            // the disjunction instead and split both copies.
            let [Active::Slot(sp)] = sigma.active.as_slice() else {
                return shape("disjunction step without a slot");
            };
            let Formula::Or(ga, gb) = c.formula_at(sp)?.clone() else {
                return shape("disjunction step without a disjunction");
            };
            let (ga, gb) = ((*ga).clone(), (*gb).clone());
            let other = if f == ga { gb.clone() } else { ga.clone() };
            let low = RuleInstance::base(Fctr, c.clone(), vec![Active::Slot(sp.clone())])?;
            let mid1 = low.premises[0].clone();
            let or1 = RuleInstance::base(Or, mid1, vec![Active::Slot(sp.clone())])?;
            let mid2 = or1.premises[0].clone();
            let copy_idx = mid2
                .node(&sp.node)?
                .formulas
                .iter()
                .rposition(|g| matches!(g, Formula::Or(x, y) if **x == ga && **y == gb))
                .ok_or_else(|| TransformError::Shape("lost the duplicated disjunction".into()))?;
            let or2 =
                RuleInstance::base(Or, mid2, vec![Active::slot(sp.node.clone(), copy_idx)])?;
            let sub = weaken_in(&normalize(&r)?, &sp.node, &leaf1(other))?;
            let inner = rebuild(or2, vec![sub])?;
            rebuild(low, vec![rebuild(or1, vec![inner])?])
        }
        And | MAnd => {
            // The copy duplicates one conjunct of the branch: raise the
            // branch multiplicity instead.
            let [Active::Slot(sp)] = sigma.active.as_slice() else {
                return shape("conjunction step without a slot");
            };
            let (mut m, mut n) = if sigma.rule == And {
                (1, 1)
            } else {
                (sigma.aux.m.max(1), sigma.aux.n.max(1))
            };
            if i == 0 {
                m += 1;
            } else {
                n += 1;
            }
            let inst = RuleInstance::derive(
                MAnd,
                false,
                c,
                vec![Active::Slot(sp.clone())],
                Aux { m, n, ..Aux::default() },
            )?;
            let mut subs = p.subs.clone();
            subs[i] = r;
            rebuild(inst, subs)
        }
        Box | MBox => {
            let [Active::Slot(sp)] = sigma.active.as_slice() else {
                return shape("box step without a slot");
            };
            let m = if sigma.rule == Box { 1 } else { sigma.aux.m.max(1) };
            let inst = RuleInstance::derive(
                MBox,
                false,
                c,
                vec![Active::Slot(sp.clone())],
                Aux { m: m + 1, ..Aux::default() },
            )?;
            rebuild(inst, vec![r])
        }
        Cut | MCut => {
            // The copy duplicates a cut copy: raise the cut multiplicity.
            let [Active::Node(a)] = sigma.active.as_slice() else {
                return shape("cut step without a node");
            };
            let Some(cf) = sigma.aux.formula.clone() else {
                return shape("cut step without a formula");
            };
            let (mut m, mut n) = if sigma.rule == Cut {
                (1, 1)
            } else {
                (sigma.aux.m.max(1), sigma.aux.n.max(1))
            };
            let expect = if i == 0 { cf.clone() } else { negate(&cf) };
            if s.node != *a || f != expect {
                return unsupported(sigma.rule, "lower a formula contraction");
            }
            if i == 0 {
                m += 1;
            } else {
                n += 1;
            }
            let inst = RuleInstance::derive(
                MCut,
                false,
                c,
                vec![Active::Node(a.clone())],
                Aux { formula: Some(cf), m, n, ..Aux::default() },
            )?;
            let mut subs = p.subs.clone();
            subs[i] = r;
            rebuild(inst, subs)
        }
        DiaK => {
            // The copy duplicates the released body inside the target:
            // duplicate the diamond below and release both copies.
            let [Active::Slot(sp), Active::Node(t)] = sigma.active.as_slice() else {
                return shape("diamond step without slot and target");
            };
            let Formula::Dia(body) = c.formula_at(sp)?.clone() else {
                return shape("diamond step without a diamond");
            };
            if f != *body {
                return unsupported(DiaK, "lower a formula contraction");
            }
            let low = RuleInstance::base(Fctr, c.clone(), vec![Active::Slot(sp.clone())])?;
            let mid1 = low.premises[0].clone();
            let k1 = RuleInstance::base(
                DiaK,
                mid1,
                vec![Active::Slot(sp.clone()), Active::Node(t.clone())],
            )?;
            let mid2 = k1.premises[0].clone();
            let copy_idx = mid2
                .node(&sp.node)?
                .formulas
                .iter()
                .rposition(|g| matches!(g, Formula::Dia(x) if **x == *body))
                .ok_or_else(|| TransformError::Shape("lost the duplicated diamond".into()))?;
            let k2 = RuleInstance::base(
                DiaK,
                mid2,
                vec![Active::slot(sp.node.clone(), copy_idx), Active::Node(t.clone())],
            )?;
            rebuild(low, vec![rebuild(k1, vec![rebuild(k2, vec![r])?])?])
        }
        other => unsupported(other, "lower a formula contraction"),
    }
}

/// Commute a formula contraction below a step that keeps the copied
/// occurrence passive.
fn commute_fctr(
    p: &Proof,
    i: usize,
    s2: &FormulaSlot,
    f: &Formula,
    r: Proof,
) -> Result<Proof, TransformError> {
    let sigma = &p.step;
    let low = RuleInstance::base(RuleId::Fctr, sigma.conclusion.clone(), vec![Active::Slot(s2.clone())])?;
    let mid = low.premises[0].clone();
    let up = refit(
        sigma.rule,
        sigma.circle,
        &mid,
        sigma.active.clone(),
        sigma.aux.clone(),
        i,
        r.conclusion(),
        "lower a formula contraction",
    )?;
    let mut subs = Vec::with_capacity(p.subs.len());
    for (j, sub) in p.subs.iter().enumerate() {
        if j == i {
            subs.push(r.clone());
        } else {
            let Some(aj) = premise_node_addr(sigma, j, &s2.node) else {
                return unsupported(sigma.rule, "lower a formula contraction");
            };
            subs.push(weaken_in(&normalize(sub)?, &aj, &leaf1(f.clone()))?);
        }
    }
    rebuild(low, vec![rebuild(up, subs)?])
}

/// Re-derive a step on a mildly extended conclusion so that its `i`-th
/// premise matches `want` as a multiset.  When the plain actives miss,
/// single pick mutations (adding the appended formula or child, or
/// dropping one member) are tried.
#[allow(clippy::too_many_arguments)]
fn refit(
    rule: RuleId,
    circle: bool,
    conclusion: &NestedSequent,
    active: Vec<Active>,
    aux: Aux,
    i: usize,
    want: &NestedSequent,
    op: &'static str,
) -> Result<RuleInstance, TransformError> {
    let check = |acts: Vec<Active>| -> Option<RuleInstance> {
        let inst = RuleInstance::derive(rule, circle, conclusion.clone(), acts, aux.clone()).ok()?;
        (inst.premises.get(i)? == want).then_some(inst)
    };
    if let Some(inst) = check(active.clone()) {
        return Ok(inst);
    }
    for (k, act) in active.iter().enumerate() {
        let Active::Pick { node, formulas, children } = act else { continue };
        let here = match conclusion.node(node) {
            Ok(n) => n,
            Err(_) => continue,
        };
        let mut variants: Vec<Active> = Vec::new();
        for fi in 0..here.formulas.len() {
            if !formulas.contains(&fi) {
                let mut fs = formulas.clone();
                fs.push(fi);
                variants.push(Active::Pick { node: node.clone(), formulas: fs, children: children.clone() });
            }
        }
        for ci in 0..here.children.len() {
            if !children.contains(&ci) {
                let mut ks = children.clone();
                ks.push(ci);
                variants.push(Active::Pick { node: node.clone(), formulas: formulas.clone(), children: ks });
            }
        }
        for (pos, _) in formulas.iter().enumerate() {
            let mut fs = formulas.clone();
            fs.remove(pos);
            variants.push(Active::Pick { node: node.clone(), formulas: fs, children: children.clone() });
        }
        for (pos, _) in children.iter().enumerate() {
            let mut ks = children.clone();
            ks.remove(pos);
            variants.push(Active::Pick { node: node.clone(), formulas: formulas.clone(), children: ks });
        }
        for v in variants {
            let mut acts = active.clone();
            acts[k] = v;
            if let Some(inst) = check(acts) {
                return Ok(inst);
            }
        }
    }
    unsupported(rule, op)
}

fn strip_fctr_tail(p: Proof) -> Result<(Vec<RuleInstance>, Proof), TransformError> {
    let mut tail = Vec::new();
    let mut cur = p;
    while cur.step.rule == RuleId::Fctr {
        tail.push(cur.step.clone());
        cur = normalize(&cur.subs[0])?;
    }
    Ok((tail, cur))
}

// ---------------------------------------------------------------------------
// Phase 4: multicuts unfold into plain cuts
// ---------------------------------------------------------------------------

fn expand_mcut(p: &Proof) -> Result<Proof, TransformError> {
    let subs = p.subs.iter().map(expand_mcut).collect::<Result<Vec<_>, _>>()?;
    if p.step.rule != RuleId::MCut {
        return rebuild(p.step.clone(), subs);
    }
    let [Active::Node(a)] = p.step.active.as_slice() else {
        return shape("multicut without a node");
    };
    let Some(f) = p.step.aux.formula.clone() else {
        return shape("multicut without a formula");
    };
    let m = p.step.aux.m.max(1);
    let n = p.step.aux.n.max(1);
    let p1 = normalize(&subs[0])?;
    let p2 = normalize(&subs[1])?;
    mcut_chain(&p.step.conclusion, a, &f, m, n, p1, p2)
}

fn mcut_chain(
    c: &NestedSequent,
    a: &NodeAddress,
    f: &Formula,
    m: usize,
    n: usize,
    p1: Proof,
    p2: Proof,
) -> Result<Proof, TransformError> {
    let nf = negate(f);
    if m == 1 && n == 1 {
        return cutstep(c, a, f.clone(), p1, p2);
    }
    if n == 1 {
        let c1 = c.graft(a, &leaf1(f.clone()))?;
        let p2w = weaken_in(&normalize(&p2)?, a, &leaf1(f.clone()))?;
        let q = mcut_chain(&c1, a, f, m - 1, 1, p1, p2w)?;
        return cutstep(c, a, f.clone(), q, p2);
    }
    if m == 1 {
        let c2 = c.graft(a, &leaf1(nf.clone()))?;
        let p1w = weaken_in(&normalize(&p1)?, a, &leaf1(nf.clone()))?;
        let q = mcut_chain(&c2, a, f, 1, n - 1, p1w, p2)?;
        return cutstep(c, a, f.clone(), p1, q);
    }
    let c1 = c.graft(a, &leaf1(f.clone()))?;
    let c2 = c.graft(a, &leaf1(nf.clone()))?;
    let p2w = weaken_in(&normalize(&p2)?, a, &leaf1(f.clone()))?;
    let p1w = weaken_in(&normalize(&p1)?, a, &leaf1(nf.clone()))?;
    let left = mcut_chain(&c1, a, f, m - 1, n, p1.clone(), p2w)?;
    let right = mcut_chain(&c2, a, f, m, n - 1, p1w, p2)?;
    cutstep(c, a, f.clone(), left, right)
}

fn cutstep(
    c: &NestedSequent,
    a: &NodeAddress,
    f: Formula,
    p1: Proof,
    p2: Proof,
) -> Result<Proof, TransformError> {
    let inst = RuleInstance::derive(
        RuleId::Cut,
        false,
        c.clone(),
        vec![Active::Node(a.clone())],
        Aux { formula: Some(f), ..Aux::default() },
    )?;
    rebuild(inst, vec![p1, p2])
}

// ---------------------------------------------------------------------------
// Phase 5: the rank loop
// ---------------------------------------------------------------------------

fn reduce_one(p: &Proof, r: usize, x: Axioms, fuel: &mut usize) -> Result<Proof, TransformError> {
    for (i, sub) in p.subs.iter().enumerate() {
        if has_rank(sub, r) {
            let mut subs = p.subs.clone();
            subs[i] = reduce_one(sub, r, x, fuel)?;
            return rebuild(p.step.clone(), subs);
        }
    }
    if p.step.rule != RuleId::Cut || step_rank(p) != r {
        return shape("expected a topmost cut of maximal rank");
    }
    let [Active::Node(a)] = p.step.active.as_slice() else {
        return shape("cut without a node");
    };
    let Some(f) = p.step.aux.formula.clone() else {
        return shape("cut without a formula");
    };
    reduce_cut(
        &p.step.conclusion,
        a.clone(),
        f,
        p.subs[0].clone(),
        p.subs[1].clone(),
        x,
        fuel,
    )
}

/// Replace one cut (`p1 ⊢ Γ + A at a`, `p2 ⊢ Γ + ¬A at a`) by a proof of
/// `Γ` using only cuts of smaller rank.
fn reduce_cut(
    c: &NestedSequent,
    a: NodeAddress,
    f: Formula,
    p1: Proof,
    p2: Proof,
    x: Axioms,
    fuel: &mut usize,
) -> Result<Proof, TransformError> {
    if *fuel == 0 {
        return shape("cut elimination ran out of fuel");
    }
    *fuel -= 1;

    let nf = negate(&f);
    let p1 = conform(&normalize(&p1)?, &c.graft(&a, &leaf1(f.clone()))?)?;
    let p2 = conform(&normalize(&p2)?, &c.graft(&a, &leaf1(nf.clone()))?)?;
    let idx = c.node(&a)?.formulas.len();
    let slot = FormulaSlot::new(a.clone(), idx);

    // Axiomatic conclusion: close directly.
    if c.is_axiomatic() {
        if let Some(inst) = axiom_instance(c) {
            return Ok(Proof::leaf(inst));
        }
    }

    // A copy nobody consumes can be dropped.
    if let Ok(q) = strengthen(&p1, &slot) {
        return conform(&q, c);
    }
    if let Ok(q) = strengthen(&p2, &slot) {
        return conform(&q, c);
    }

    // A partner already in the context absorbs the copy by contraction,
    // when the contraction goes through; otherwise fall back to the
    // connective-directed reductions below.
    if let Some(j) = c.node(&a)?.formulas.iter().position(|g| *g == nf) {
        let d = Duplication { node: a.clone(), fpairs: vec![(j, idx)], cpairs: vec![] };
        if let Ok(q) = contract_in(&p2, &d) {
            return conform(&q, c);
        }
    }
    if let Some(j) = c.node(&a)?.formulas.iter().position(|g| *g == f) {
        let d = Duplication { node: a.clone(), fpairs: vec![(j, idx)], cpairs: vec![] };
        if let Ok(q) = contract_in(&p1, &d) {
            return conform(&q, c);
        }
    }

    match f.clone() {
        Formula::And(_, _) | Formula::Dia(_) => reduce_cut(c, a, nf, p2, p1, x, fuel),
        Formula::Or(ga, gb) => {
            let (ga, gb) = ((*ga).clone(), (*gb).clone());
            let tor = invert_in(&p1, &slot, InvKind::Or)?;
            let tna = invert_in(&p2, &slot, InvKind::And(0))?;
            let tnb = invert_in(&p2, &slot, InvKind::And(1))?;
            let ch = c.graft(&a, &leaf1(gb.clone()))?;
            let tnaw = weaken_in(&normalize(&tna)?, &a, &leaf1(gb.clone()))?;
            let inner = cutstep(&ch, &a, ga, normalize(&tor)?, tnaw)?;
            cutstep(c, &a, gb, inner, tnb)
        }
        Formula::Box(b) => box_reduce(c, &a, &f, (*b).clone(), p1, p2, x, fuel),
        Formula::Atom { .. } => {
            // The partner atoms hide inside compound context formulas:
            // invert the bottom-most step consuming a context formula on
            // either side until a partner surfaces at the cut node.
            if let Some(q) = med_med_reduce(c, &a, &f, &p1, &p2, x, fuel)? {
                return Ok(q);
            }
            if let Some(q) = passive_diak_permute(c, &a, &f, &p1, &p2, x, fuel)? {
                return Ok(q);
            }
            if let Some(q) = passive_diak_permute(c, &a, &nf, &p2, &p1, x, fuel)? {
                return Ok(q);
            }
            if let Some(b) = find_blocker(&p1).or_else(|| find_blocker(&p2)) {
                return blocked_invert(c, &a, &f, &b, p1, p2, x, fuel);
            }
            #[cfg(test)]
            if std::env::var("CE_DEBUG").is_ok() {
                eprintln!("ATOMIC-STUCK2: c={:?} a={:?} f={:?}", c, a, f);
                fn sk(p: &Proof, d: usize) {
                    eprintln!("{}{:?} {:?} act={:?}", " ".repeat(d), p.step.rule, p.step.conclusion, p.step.active);
                    for s in &p.subs { sk(s, d + 1); }
                }
                eprintln!("p1:"); sk(&p1, 1);
                eprintln!("p2:"); sk(&p2, 1);
            }
            unsupported(RuleId::Cut, "reduce an atomic cut consumed on both sides")
        }
    }
}

/// One side opens a context diamond before consuming the cut copy. When
/// the other side never touches that diamond, delete it there, weaken in
/// the released body, cut above the diamond step, and reapply it below.
#[allow(clippy::too_many_arguments)]
fn passive_diak_permute(
    c: &NestedSequent,
    a: &[usize],
    f: &Formula,
    pa: &Proof,
    pb: &Proof,
    x: Axioms,
    fuel: &mut usize,
) -> Result<Option<Proof>, TransformError> {
    if pa.step.rule != RuleId::DiaK {
        return Ok(None);
    }
    let [Active::Slot(s), Active::Node(t)] = pa.step.active.as_slice() else {
        return Ok(None);
    };
    // the principal must be a context diamond, not the cut copy
    let Ok(Formula::Dia(body)) = c.formula_at(s) else {
        return Ok(None);
    };
    let body = (**body).clone();
    let Ok(pb1) = strengthen(pb, s) else {
        return Ok(None);
    };
    let pb2 = weaken_in(&normalize(&pb1)?, t, &leaf1(body.clone()))?;
    let mut c1 = c.clone();
    c1.node_mut(&s.node)?.formulas.remove(s.index);
    c1.node_mut(t)?.formulas.push(body);
    let q = reduce_cut(&c1, a.to_vec(), f.clone(), pa.subs[0].clone(), pb2, x, fuel)?;
    let inst = RuleInstance::derive(
        RuleId::DiaK,
        false,
        c.clone(),
        vec![Active::Slot(s.clone()), Active::Node(t.clone())],
        Aux::default(),
    )?;
    Ok(Some(rebuild(inst, vec![q])?))
}

/// Both sides split the cut node with the same mediation, each moving its
/// cut copy into the picked sibling: cut there over the two premises, then
/// merge the split halves back by weakening and child contraction.
#[allow(clippy::too_many_arguments)]
fn med_med_reduce(
    c: &NestedSequent,
    a: &[usize],
    f: &Formula,
    p1: &Proof,
    p2: &Proof,
    x: Axioms,
    fuel: &mut usize,
) -> Result<Option<Proof>, TransformError> {
    if a.is_empty() {
        return Ok(None);
    }
    let nf = negate(f);
    let parts = |p: &Proof, copy: &Formula| -> Option<(NestedSequent, NestedSequent)> {
        if p.step.rule != RuleId::Med {
            return None;
        }
        let [Active::Node(caddr), Active::Pick { .. }] = p.step.active.as_slice() else {
            return None;
        };
        if caddr.as_slice() != a {
            return None;
        }
        let parent = &a[..a.len() - 1];
        let sibs = p.step.conclusion.node(parent).ok()?.children.len();
        let prem = p.subs[0].conclusion();
        let picked = prem.node(&child_at(parent, sibs - 1)).ok()?;
        let rem = prem.node(&child_at(parent, sibs)).ok()?;
        let i = picked.formulas.iter().position(|g| g == copy)?;
        let mut pctx = picked.clone();
        pctx.formulas.remove(i);
        Some((pctx, rem.clone()))
    };
    let (Some((pctx1, rem1)), Some((pctx2, rem2))) = (parts(p1, f), parts(p2, &nf)) else {
        return Ok(None);
    };
    if pctx1 != pctx2 || rem1 != rem2 {
        return Ok(None);
    }
    let parent = &a[..a.len() - 1];
    let sibs = c.node(parent)?.children.len();
    let s_addr = child_at(parent, sibs - 1);
    let r_addr = child_at(parent, sibs);
    let mut cc = c.clone();
    {
        let pn = cc.node_mut(parent)?;
        pn.children.remove(*a.last().unwrap());
        pn.children.push(pctx1.clone());
        pn.children.push(rem1.clone());
    }
    let inner = reduce_cut(
        &cc,
        s_addr.clone(),
        f.clone(),
        p1.subs[0].clone(),
        p2.subs[0].clone(),
        x,
        fuel,
    )?;
    let inner = conform(&normalize(&inner)?, &cc)?;
    #[cfg(test)]
    if std::env::var("CE_DEBUG").is_ok() {
        eprintln!("MEDMED cc={:?} inner={:?} pctx={:?} rem={:?} s={:?} r={:?}", cc, inner.conclusion(), pctx1, rem1, s_addr, r_addr);
    }
    let w1 = weaken_in(&inner, &s_addr, &rem1)?;
    let w2 = weaken_in(&w1, &r_addr, &pctx1)?;
    let merged = contract_in(
        &w2,
        &Duplication { node: parent.to_vec(), fpairs: vec![], cpairs: vec![(sibs - 1, sibs)] },
    )?;
    Ok(Some(conform(&merged, c)?))
}

fn child_at(parent: &[usize], i: usize) -> Vec<usize> {
    let mut out = parent.to_vec();
    out.push(i);
    out
}

/// The bottom-most propositional or box step whose principal formula
/// traces down to the conclusion, reported at its conclusion position.
fn find_blocker(p: &Proof) -> Option<FormulaSlot> {
    if matches!(
        p.step.rule,
        RuleId::Or | RuleId::And | RuleId::MAnd | RuleId::Box | RuleId::MBox
    ) {
        if let Some(Active::Slot(sp)) = p.step.active.first() {
            return Some(sp.clone());
        }
    }
    for (i, sub) in p.subs.iter().enumerate() {
        if let Some(b) = find_blocker(sub) {
            if let Some(down) = conclusion_slot(&p.step, i, &b) {
                return Some(down);
            }
        }
    }
    None
}

// ---------------------------------------------------------------------------
// Strengthening: delete a formula occurrence that is never consumed
// ---------------------------------------------------------------------------

pub(crate) fn strengthen(p: &Proof, slot: &FormulaSlot) -> Result<Proof, TransformError> {
    let step = &p.step;
    let mut target = step.conclusion.clone();
    target.node_mut(&slot.node)?.formulas.remove(slot.index);

    let mut active2 = Vec::with_capacity(step.active.len());
    for act in &step.active {
        match act {
            Active::Slot(s) => {
                if *s == *slot {
                    return unsupported(step.rule, "strengthen");
                }
                let mut s = s.clone();
                if s.node == slot.node && s.index > slot.index {
                    s.index -= 1;
                }
                active2.push(Active::Slot(s));
            }
            Active::Node(n) => active2.push(Active::Node(n.clone())),
            Active::Pick { node, formulas, children } => {
                let mut fs = formulas.clone();
                if *node == slot.node {
                    fs.retain(|&i| i != slot.index);
                    for i in fs.iter_mut() {
                        if *i > slot.index {
                            *i -= 1;
                        }
                    }
                }
                active2.push(Active::Pick { node: node.clone(), formulas: fs, children: children.clone() });
            }
        }
    }

    let mut subs = Vec::with_capacity(p.subs.len());
    for (i, sub) in p.subs.iter().enumerate() {
        match premise_slot(step, i, slot) {
            Some(ms) => subs.push(strengthen(sub, &ms)?),
            None if step.rule == RuleId::Wk => subs.push(sub.clone()),
            None => return unsupported(step.rule, "strengthen"),
        }
    }
    let inst = RuleInstance::derive(step.rule, step.circle, target, active2, step.aux.clone())?;
    rebuild(inst, subs)
}

// ---------------------------------------------------------------------------
// The modal case
// ---------------------------------------------------------------------------

/// Which diamond-family rules merely relocate the diamond.
fn is_move(rule: RuleId) -> bool {
    matches!(rule, RuleId::Dia4 | RuleId::Dia5 | RuleId::Dia51 | RuleId::Dia52 | RuleId::Dia53)
}

fn is_dia_consumer(rule: RuleId) -> bool {
    matches!(rule, RuleId::DiaK | RuleId::DiaT | RuleId::DiaB)
}

fn principal_is(step: &RuleInstance, s: &FormulaSlot) -> bool {
    matches!(step.active.first(), Some(Active::Slot(sp)) if sp == s)
}

/// Find the premise path to the step consuming the given occurrence.
fn find_consumer(
    p: &Proof,
    s: &FormulaSlot,
    kind: fn(RuleId) -> bool,
) -> Option<Vec<usize>> {
    if kind(p.step.rule) && principal_is(&p.step, s) {
        return Some(Vec::new());
    }
    for (i, sub) in p.subs.iter().enumerate() {
        if let Some(ms) = premise_slot(&p.step, i, s) {
            if let Some(mut path) = find_consumer(sub, &ms, kind) {
                path.insert(0, i);
                return Some(path);
            }
        }
    }
    None
}

#[allow(clippy::too_many_arguments)]
fn box_reduce(
    c: &NestedSequent,
    a: &NodeAddress,
    f: &Formula,
    body: Formula,
    p1: Proof,
    p2: Proof,
    x: Axioms,
    fuel: &mut usize,
) -> Result<Proof, TransformError> {
    let idx = c.node(a)?.formulas.len();
    let slot = FormulaSlot::new(a.clone(), idx);
    let xc = closure45(x);

    // Pull the box step consuming the copy to the bottom of side one.
    let Some(bpath) = find_consumer(&p1, &slot, |r| matches!(r, RuleId::Box | RuleId::MBox))
    else {
        return shape("the boxed copy is consumed by no box step");
    };
    let r1 = pull_box(&p1, &slot, &bpath, &body)?;
    let bx = r1.step.clone();
    let m = if bx.rule == RuleId::MBox { bx.aux.m.max(1) } else { 1 };
    let beta1 = normalize(&r1.subs[0])?;

    // Pull the diamond step consuming the dual copy to the bottom of
    // side two, transmuting across relocation steps.
    let r2 = match sink_dia(&p2, &slot, &xc)? {
        DiaSink::Ready(q) => q,
        DiaSink::Blocked(b) => {
            return blocked_invert(c, a, f, &b, p1, p2, x, fuel);
        }
    };

    // Peel the bottom relocation chain and the consumer.
    let mut moves = Vec::new();
    let mut q = r2;
    while is_move(q.step.rule) {
        moves.push(q.step.clone());
        q = normalize(&q.subs[0])?;
    }
    if !is_dia_consumer(q.step.rule) {
        return shape("the diamond chain does not end in a consumer");
    }
    let kappa = q.step.clone();
    let core2 = normalize(&q.subs[0])?;

    // Mirror each diamond relocation as a child relocation on side one,
    // carrying the fresh [body × m] child from the cut node to the node
    // where the diamond landed.
    let bchild = NestedSequent::new(vec![body.clone(); m], Vec::new());
    let wrap = |payload: &NestedSequent| NestedSequent::new(Vec::new(), vec![payload.clone()]);
    let mut cur = conform(&beta1, &c.graft(a, &wrap(&bchild))?)?;
    for tau in &moves {
        let [Active::Slot(src), ..] = tau.active.as_slice() else {
            return shape("relocation step without a slot");
        };
        let Some(dst) = premise_slot(tau, 0, src) else {
            return shape("relocation step lost its diamond");
        };
        let concl = c.graft(&dst.node, &wrap(&bchild))?;
        let last = concl.node(&dst.node)?.children.len() - 1;
        let inst = match tau.rule {
            RuleId::Dia4 => RuleInstance::base(
                RuleId::Str4,
                concl,
                vec![Active::Node(dst.node.clone()), Active::Node(child_of(&dst.node, last))],
            )?,
            RuleId::Dia5 | RuleId::Dia51 | RuleId::Dia52 | RuleId::Dia53 => RuleInstance::base(
                RuleId::Str5,
                concl,
                vec![Active::Node(src.node.clone()), Active::Node(child_of(&dst.node, last))],
            )?,
            other => return unsupported(other, "mirror a relocation"),
        };
        cur = rebuild(inst, vec![cur])?;
    }

    // The terminal reduction: a multicut at the landing node.
    let [Active::Slot(ks), ..] = kappa.active.as_slice() else {
        return shape("consumer step without a slot");
    };
    let w = ks.node.clone();
    let out = match kappa.rule {
        RuleId::DiaK => {
            let [_, Active::Node(t)] = kappa.active.as_slice() else {
                return shape("forward diamond step without a target");
            };
            let payload = NestedSequent::new(vec![body.clone(); m], Vec::new());
            let cmerged = c.graft(t, &payload)?;
            let base_f = cmerged.node(t)?.formulas.len() - m;
            let med = RuleInstance::base(
                RuleId::Med,
                cmerged.clone(),
                vec![
                    Active::Node(t.clone()),
                    Active::Pick {
                        node: t.clone(),
                        formulas: (base_f..base_f + m).collect(),
                        children: vec![],
                    },
                ],
            )?;
            let p1t = rebuild(med, vec![cur])?;
            let mcut = RuleInstance::derive(
                RuleId::MCut,
                false,
                c.clone(),
                vec![Active::Node(t.clone())],
                Aux { formula: Some(body.clone()), m, n: 1, ..Aux::default() },
            )?;
            rebuild(mcut, vec![p1t, core2])?
        }
        RuleId::DiaT => {
            let payload = NestedSequent::new(vec![body.clone(); m], Vec::new());
            let cst = c.graft(&w, &payload)?;
            let base_f = cst.node(&w)?.formulas.len() - m;
            let strt = RuleInstance::base(
                RuleId::StrT,
                cst.clone(),
                vec![Active::Pick {
                    node: w.clone(),
                    formulas: (base_f..base_f + m).collect(),
                    children: vec![],
                }],
            )?;
            let p1t = rebuild(strt, vec![cur])?;
            let mcut = RuleInstance::derive(
                RuleId::MCut,
                false,
                c.clone(),
                vec![Active::Node(w.clone())],
                Aux { formula: Some(body.clone()), m, n: 1, ..Aux::default() },
            )?;
            rebuild(mcut, vec![p1t, core2])?
        }
        RuleId::DiaB => {
            if w.is_empty() {
                return shape("backward diamond step at the root");
            }
            let pw: NodeAddress = w[..w.len() - 1].to_vec();
            let payload = NestedSequent::new(vec![body.clone(); m], Vec::new());
            let csb = c.graft(&pw, &payload)?;
            let base_f = csb.node(&pw)?.formulas.len() - m;
            let strb = RuleInstance::base(
                RuleId::StrB,
                csb.clone(),
                vec![
                    Active::Node(w.clone()),
                    Active::Pick {
                        node: pw.clone(),
                        formulas: (base_f..base_f + m).collect(),
                        children: vec![],
                    },
                ],
            )?;
            let p1t = rebuild(strb, vec![cur])?;
            let mcut = RuleInstance::derive(
                RuleId::MCut,
                false,
                c.clone(),
                vec![Active::Node(pw.clone())],
                Aux { formula: Some(body.clone()), m, n: 1, ..Aux::default() },
            )?;
            rebuild(mcut, vec![p1t, core2])?
        }
        other => return unsupported(other, "reduce a modal cut"),
    };
    // The multicut carries smaller rank; unfold it into plain cuts for
    // the outer rank loop.
    expand_mcut(&normalize(&out)?)
}

/// A passive step below the cut blocks the descent: invert the blocking
/// principal on both sides, recurse, and reapply the step below the
/// result.
#[allow(clippy::too_many_arguments)]
fn blocked_invert(
    c: &NestedSequent,
    a: &NodeAddress,
    f: &Formula,
    b: &FormulaSlot,
    p1: Proof,
    p2: Proof,
    x: Axioms,
    fuel: &mut usize,
) -> Result<Proof, TransformError> {
    match c.formula_at(b)?.clone() {
        Formula::Box(cb) => {
            let mut cprime = c.clone();
            cprime.node_mut(&b.node)?.formulas.remove(b.index);
            cprime.node_mut(&b.node)?.children.push(leaf1((*cb).clone()));
            let p1i = invert_in(&p1, b, InvKind::Box)?;
            let p2i = invert_in(&p2, b, InvKind::Box)?;
            let sub = reduce_cut(&cprime, a.clone(), f.clone(), p1i, p2i, x, fuel)?;
            let inst = RuleInstance::base(RuleId::Box, c.clone(), vec![Active::Slot(b.clone())])?;
            rebuild(inst, vec![sub])
        }
        Formula::Or(ga, gb) => {
            let mut cprime = c.clone();
            cprime.node_mut(&b.node)?.formulas[b.index] = (*ga).clone();
            cprime.node_mut(&b.node)?.formulas.push((*gb).clone());
            let p1i = invert_in(&p1, b, InvKind::Or)?;
            let p2i = invert_in(&p2, b, InvKind::Or)?;
            let sub = reduce_cut(&cprime, a.clone(), f.clone(), p1i, p2i, x, fuel)?;
            let inst = RuleInstance::base(RuleId::Or, c.clone(), vec![Active::Slot(b.clone())])?;
            rebuild(inst, vec![sub])
        }
        Formula::And(ga, gb) => {
            let mut c0 = c.clone();
            c0.node_mut(&b.node)?.formulas[b.index] = (*ga).clone();
            let mut c1 = c.clone();
            c1.node_mut(&b.node)?.formulas[b.index] = (*gb).clone();
            let s0 = reduce_cut(
                &c0,
                a.clone(),
                f.clone(),
                invert_in(&p1, b, InvKind::And(0))?,
                invert_in(&p2, b, InvKind::And(0))?,
                x,
                fuel,
            )?;
            let s1 = reduce_cut(
                &c1,
                a.clone(),
                f.clone(),
                invert_in(&p1, b, InvKind::And(1))?,
                invert_in(&p2, b, InvKind::And(1))?,
                x,
                fuel,
            )?;
            let inst = RuleInstance::base(RuleId::And, c.clone(), vec![Active::Slot(b.clone())])?;
            rebuild(inst, vec![s0, s1])
        }
        _ => unsupported(RuleId::DiaK, "permute a passive diamond below a cut"),
    }
}

// ---------------------------------------------------------------------------
// Pulling the box consumer down
// ---------------------------------------------------------------------------

fn pull_box(
    p: &Proof,
    s: &FormulaSlot,
    path: &[usize],
    body: &Formula,
) -> Result<Proof, TransformError> {
    if path.is_empty() {
        return Ok(p.clone());
    }
    let i = path[0];
    let Some(ms) = premise_slot(&p.step, i, s) else {
        return shape("lost the boxed copy on the way up");
    };
    let inner = pull_box(&p.subs[i], &ms, &path[1..], body)?;
    let bx = inner.step.clone();
    let m = if bx.rule == RuleId::MBox { bx.aux.m.max(1) } else { 1 };
    let sigma = &p.step;
    let low = RuleInstance::derive(
        bx.rule,
        false,
        sigma.conclusion.clone(),
        vec![Active::Slot(s.clone())],
        bx.aux.clone(),
    )?;
    let mid = low.premises[0].clone();
    let mut active2 = Vec::with_capacity(sigma.active.len());
    let fresh_child = mid.node(&s.node)?.children.len() - 1;
    for act in &sigma.active {
        match act {
            Active::Slot(t) => {
                if *t == *s {
                    return shape("the box consumer is not where it was found");
                }
                let mut t = t.clone();
                if t.node == s.node && t.index > s.index {
                    t.index -= 1;
                }
                active2.push(Active::Slot(t));
            }
            Active::Node(n) => active2.push(Active::Node(n.clone())),
            Active::Pick { node, formulas, children } => {
                let mut fs = formulas.clone();
                let mut ks = children.clone();
                if *node == s.node {
                    let was_picked = fs.contains(&s.index);
                    fs.retain(|&j| j != s.index);
                    for j in fs.iter_mut() {
                        if *j > s.index {
                            *j -= 1;
                        }
                    }
                    if was_picked {
                        ks.push(fresh_child);
                    }
                }
                active2.push(Active::Pick { node: node.clone(), formulas: fs, children: ks });
            }
        }
    }
    let want = inner.subs[0].conclusion().clone();
    let up = refit(
        sigma.rule,
        sigma.circle,
        &mid,
        active2,
        sigma.aux.clone(),
        i,
        &want,
        "pull a box step below",
    )?;
    let mut subs = Vec::with_capacity(p.subs.len());
    for (j, sub) in p.subs.iter().enumerate() {
        if j == i {
            subs.push(normalize(&inner.subs[0])?);
            continue;
        }
        let Some(msj) = premise_slot(sigma, j, s) else {
            return shape("lost the boxed copy in a sibling premise");
        };
        let mut q = invert_in(&normalize(sub)?, &msj, InvKind::Box)?;
        if m > 1 {
            let n = q.conclusion().node(&msj.node)?;
            let caddr = child_of(&msj.node, n.children.len() - 1);
            let extra = NestedSequent::new(vec![body.clone(); m - 1], Vec::new());
            q = weaken_in(&q, &caddr, &extra)?;
        }
        subs.push(q);
    }
    rebuild(low, vec![rebuild(up, subs)?])
}

// ---------------------------------------------------------------------------
// Pulling the diamond consumer down
// ---------------------------------------------------------------------------

enum DiaSink {
    Ready(Proof),
    Blocked(FormulaSlot),
}

fn sink_dia(p: &Proof, s: &FormulaSlot, xc: &Axioms) -> Result<DiaSink, TransformError> {
    let step = &p.step;
    if principal_is(step, s) && is_dia_consumer(step.rule) {
        return Ok(DiaSink::Ready(p.clone()));
    }
    if principal_is(step, s) && is_move(step.rule) {
        let Some(ms) = premise_slot(step, 0, s) else {
            return shape("relocation step lost its diamond");
        };
        return match sink_dia(&p.subs[0], &ms, xc)? {
            DiaSink::Ready(q) => Ok(DiaSink::Ready(rebuild(step.clone(), vec![q])?)),
            DiaSink::Blocked(b) => match conclusion_slot(step, 0, &b) {
                Some(down) => Ok(DiaSink::Blocked(down)),
                None => unsupported(step.rule, "map a blocking formula below"),
            },
        };
    }

    // Passive step: descend towards the branch holding the consumer.
    let mut chosen = None;
    for (i, _) in p.subs.iter().enumerate() {
        if let Some(ms) = premise_slot(step, i, s) {
            if find_consumer(&p.subs[i], &ms, |r| is_dia_consumer(r) || is_move(r)).is_some() {
                chosen = Some((i, ms));
                break;
            }
        }
    }
    let Some((i, ms)) = chosen else {
        return shape("the diamond copy is consumed by no diamond step");
    };
    match sink_dia(&p.subs[i], &ms, xc)? {
        DiaSink::Blocked(b) => match conclusion_slot(step, i, &b) {
            Some(down) => Ok(DiaSink::Blocked(down)),
            None => {
                // The step below consumed the blocking formula itself;
                // block on its own principal instead.
                match step.active.first() {
                    Some(Active::Slot(sp))
                        if matches!(step.rule, RuleId::Or | RuleId::And | RuleId::MAnd | RuleId::Box | RuleId::MBox) =>
                    {
                        Ok(DiaSink::Blocked(sp.clone()))
                    }
                    _ => unsupported(step.rule, "map a blocking formula below"),
                }
            }
        },
        DiaSink::Ready(q) => lower_segment(step.clone(), i, p.subs.clone(), q, s, xc),
    }
}

/// Push the bottom occurrence segment of premise `i` (relocations topped
/// by one consumer) below the step `sigma`.
fn lower_segment(
    mut sigma: RuleInstance,
    i: usize,
    mut subs: Vec<Proof>,
    q: Proof,
    s: &FormulaSlot,
    xc: &Axioms,
) -> Result<DiaSink, TransformError> {
    subs[i] = q;
    let mut cur_s = s.clone();
    let mut chain: Vec<RuleInstance> = Vec::new();
    loop {
        let ms = match premise_slot(&sigma, i, &cur_s) {
            Some(ms) => ms,
            None => break, // occurrence consumed; segment fully crossed
        };
        let tau = subs[i].step.clone();
        if !(principal_is(&tau, &ms) && (is_move(tau.rule) || is_dia_consumer(tau.rule))) {
            break;
        }
        match cross_one(&sigma, i, &subs, &cur_s, &ms, &tau, xc)? {
            Crossed::Done { emitted, sigma2, subs2, s2 } => {
                chain.extend(emitted);
                sigma = sigma2;
                subs = subs2;
                match s2 {
                    Some(s2) => cur_s = s2,
                    None => break,
                }
            }
            Crossed::Blocked(mut b) => {
                // Map the blocker down through the already emitted chain.
                for inst in chain.iter().rev() {
                    match conclusion_slot(inst, 0, &b) {
                        Some(down) => b = down,
                        None => return unsupported(inst.rule, "map a blocking formula below"),
                    }
                }
                return Ok(DiaSink::Blocked(b));
            }
        }
    }
    let mut top = rebuild(sigma, subs)?;
    for inst in chain.into_iter().rev() {
        top = rebuild(inst, vec![top])?;
    }
    Ok(DiaSink::Ready(top))
}

enum Crossed {
    Done { emitted: Vec<RuleInstance>, sigma2: RuleInstance, subs2: Vec<Proof>, s2: Option<FormulaSlot> },
    Blocked(FormulaSlot),
}

/// Swap one occurrence step `tau` (directly above premise `i` of `sigma`)
/// below `sigma`, transmuting it across relocation steps as needed.
fn cross_one(
    sigma: &RuleInstance,
    i: usize,
    subs: &[Proof],
    s: &FormulaSlot,
    ms: &FormulaSlot,
    tau: &RuleInstance,
    xc: &Axioms,
) -> Result<Crossed, TransformError> {
    use RuleId::*;
    let c = sigma.conclusion.clone();
    if !matches!(c.formula_at(s)?, Formula::Dia(_)) {
        return shape("tracked occurrence is not a diamond");
    }

    // Where must the step act, seen from below sigma?
    enum Goal {
        // the diamond relocates to this node
        MoveTo(NodeAddress),
        // the body is released into this existing child
        Into(NodeAddress),
        // the body is released at this node
        At(NodeAddress),
    }
    let goal = if is_move(tau.rule) {
        let Some(dst) = premise_slot(tau, 0, ms) else {
            return shape("relocation step lost its diamond");
        };
        match conclusion_node(sigma, i, &dst.node) {
            Some(n) => Goal::MoveTo(n),
            None => {
                return match sigma.rule {
                    Box | MBox => {
                        let Some(Active::Slot(sp)) = sigma.active.first() else {
                            return shape("box step without a slot");
                        };
                        Ok(Crossed::Blocked(sp.clone()))
                    }
                    other => unsupported(other, "push a diamond relocation below"),
                };
            }
        }
    } else {
        // a consumer: find where its premise puts the body
        match tau.rule {
            DiaK => {
                let [_, Active::Node(t)] = tau.active.as_slice() else {
                    return shape("forward diamond step without a target");
                };
                match conclusion_node(sigma, i, t) {
                    Some(n) => Goal::Into(n),
                    None => match sigma.rule {
                        Box | MBox => {
                            let Some(Active::Slot(sp)) = sigma.active.first() else {
                                return shape("box step without a slot");
                            };
                            return Ok(Crossed::Blocked(sp.clone()));
                        }
                        StrT => Goal::At(s.node.clone()),
                        StrB => {
                            let [Active::Node(d), ..] = sigma.active.as_slice() else {
                                return shape("relocation step without a node");
                            };
                            Goal::Into(d.clone())
                        }
                        other => return unsupported(other, "push a diamond step below"),
                    },
                }
            }
            DiaT => match conclusion_node(sigma, i, &ms.node) {
                Some(n) => Goal::At(n),
                None => return unsupported(sigma.rule, "push a diamond step below"),
            },
            DiaB => {
                if ms.node.is_empty() {
                    return shape("backward diamond step at the root");
                }
                let parent: NodeAddress = ms.node[..ms.node.len() - 1].to_vec();
                match conclusion_node(sigma, i, &parent) {
                    Some(n) => Goal::At(n),
                    None => return unsupported(sigma.rule, "push a diamond step below"),
                }
            }
            other => return unsupported(other, "push a diamond step below"),
        }
    };

    // Build the emitted bottom chain on sigma's conclusion.
    let mut emitted: Vec<RuleInstance> = Vec::new();
    let mut cur_c = c.clone();
    let mut cur = s.clone();
    let mut consumed = false;
    match goal {
        Goal::MoveTo(dst) => {
            route_moves(&mut emitted, &mut cur_c, &mut cur, &dst, xc)?;
        }
        Goal::Into(t) => {
            if t.len() == cur.node.len() + 1 && t.starts_with(&cur.node) {
                // direct forward release
            } else {
                let parent: NodeAddress = t[..t.len() - 1].to_vec();
                route_moves(&mut emitted, &mut cur_c, &mut cur, &parent, xc)?;
            }
            let inst = RuleInstance::base(
                DiaK,
                cur_c.clone(),
                vec![Active::Slot(cur.clone()), Active::Node(t.clone())],
            )?;
            cur_c = inst.premises[0].clone();
            emitted.push(inst);
            consumed = true;
        }
        Goal::At(w) => {
            if w == cur.node {
                let inst = RuleInstance::base(DiaT, cur_c.clone(), vec![Active::Slot(cur.clone())])?;
                cur_c = inst.premises[0].clone();
                emitted.push(inst);
            } else if !cur.node.is_empty() && cur.node[..cur.node.len() - 1] == w[..] {
                let inst = RuleInstance::base(DiaB, cur_c.clone(), vec![Active::Slot(cur.clone())])?;
                cur_c = inst.premises[0].clone();
                emitted.push(inst);
            } else {
                // route next to the node, then release in place
                route_moves(&mut emitted, &mut cur_c, &mut cur, &w, xc)?;
                let inst = RuleInstance::base(DiaT, cur_c.clone(), vec![Active::Slot(cur.clone())])?;
                cur_c = inst.premises[0].clone();
                emitted.push(inst);
            }
            consumed = true;
        }
    }

    // Re-derive sigma above the emitted chain.
    let want = subs[i].subs[0].conclusion().clone();
    let mut active2 = Vec::with_capacity(sigma.active.len());
    for act in &sigma.active {
        match act {
            Active::Slot(t) => {
                if *t == *s {
                    return shape("the diamond consumer is not where it was found");
                }
                let mut t = t.clone();
                if consumed && t.node == s.node && t.index > s.index {
                    t.index -= 1;
                }
                active2.push(Active::Slot(t));
            }
            Active::Node(n) => active2.push(Active::Node(n.clone())),
            Active::Pick { node, formulas, children } => {
                let mut fs = formulas.clone();
                if *node == s.node && (consumed || cur.node != s.node) {
                    fs.retain(|&j| j != s.index);
                    for j in fs.iter_mut() {
                        if *j > s.index {
                            *j -= 1;
                        }
                    }
                }
                active2.push(Active::Pick { node: node.clone(), formulas: fs, children: children.clone() });
            }
        }
    }
    let sigma2 = refit(
        sigma.rule,
        sigma.circle,
        &cur_c,
        active2,
        sigma.aux.clone(),
        i,
        &want,
        "push a diamond step below",
    )?;

    // Transport the sibling premises.
    let mut subs2 = Vec::with_capacity(subs.len());
    for (j, sub) in subs.iter().enumerate() {
        if j == i {
            subs2.push(normalize(&subs[i].subs[0])?);
            continue;
        }
        let Some(msj) = premise_slot(sigma, j, s) else {
            return shape("lost the diamond copy in a sibling premise");
        };
        let stripped = strengthen(&normalize(sub)?, &msj)
            .map_err(|_| TransformError::Unsupported { rule: sigma.rule.name(), op: "transport a diamond step across a branching step" })?;
        let want_j = sigma2.premises[j].clone();
        let have = stripped.conclusion().clone();
        let q = weaken_diff(&stripped, &have, &want_j)?;
        subs2.push(q);
    }
    let s2 = if consumed { None } else { Some(cur.clone()) };
    Ok(Crossed::Done { emitted, sigma2, subs2, s2 })
}

/// Weaken `p ⊢ have` into a proof of `want`, adding whatever formulas and
/// children `want` has over `have`, node by node.
fn weaken_diff(
    p: &Proof,
    have: &NestedSequent,
    want: &NestedSequent,
) -> Result<Proof, TransformError> {
    let mut out = p.clone();
    for addr in want.addresses() {
        let Ok(wn) = want.node(&addr) else { continue };
        let Ok(hn) = have.node(&addr) else {
            continue;
        };
        let mut extra_f: Vec<Formula> = Vec::new();
        let mut pool = hn.formulas.clone();
        for g in &wn.formulas {
            if let Some(k) = pool.iter().position(|h| h == g) {
                pool.remove(k);
            } else {
                extra_f.push(g.clone());
            }
        }
        let mut extra_c: Vec<NestedSequent> = Vec::new();
        let mut cpool = hn.children.clone();
        for ch in &wn.children {
            if let Some(k) = cpool.iter().position(|h| h == ch) {
                cpool.remove(k);
            } else {
                extra_c.push(ch.clone());
            }
        }
        if !extra_f.is_empty() || !extra_c.is_empty() {
            // only weaken with children that have no counterpart at all
            let extra = NestedSequent::new(extra_f, extra_c);
            out = weaken_in(&out, &addr, &extra)?;
        }
    }
    conform(&out, want)
}

/// Emit relocation steps carrying the diamond at `cur` to node `dest`.
fn route_moves(
    emitted: &mut Vec<RuleInstance>,
    cur_c: &mut NestedSequent,
    cur: &mut FormulaSlot,
    dest: &[usize],
    xc: &Axioms,
) -> Result<(), TransformError> {
    use RuleId::*;
    while cur.node != dest {
        let inst = if xc.contains(axioms::FIVE) && !cur.node.is_empty() {
            RuleInstance::base(
                Dia5,
                cur_c.clone(),
                vec![Active::Slot(cur.clone()), Active::Node(dest.to_vec())],
            )?
        } else if dest.starts_with(&cur.node)
            && dest.len() > cur.node.len()
            && xc.contains(axioms::FOUR)
        {
            let t = child_of(&cur.node, dest[cur.node.len()]);
            RuleInstance::base(
                Dia4,
                cur_c.clone(),
                vec![Active::Slot(cur.clone()), Active::Node(t)],
            )?
        } else {
            return unsupported(DiaK, "route a diamond between nodes");
        };
        let Some(next) = premise_slot(&inst, 0, cur) else {
            return shape("relocation step lost its diamond");
        };
        *cur_c = inst.premises[0].clone();
        *cur = next;
        emitted.push(inst);
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Phase 6: fold the multiplicity rules back into contraction
// ---------------------------------------------------------------------------

fn fold_back(p: &Proof) -> Result<Proof, TransformError> {
    use RuleId::*;
    let subs = p.subs.iter().map(fold_back).collect::<Result<Vec<_>, _>>()?;
    let step = &p.step;
    let c = step.conclusion.clone();
    match step.rule {
        Fctr => {
            let [Active::Slot(s)] = step.active.as_slice() else {
                return shape("formula contraction without a slot");
            };
            let inst = RuleInstance::base(
                Ctr,
                c,
                vec![Active::Pick { node: s.node.clone(), formulas: vec![s.index], children: vec![] }],
            )?;
            rebuild(inst, subs)
        }
        Med => {
            let [Active::Node(d), Active::Pick { node: _, formulas, children }] = step.active.as_slice()
            else {
                return shape("medial without node and pick");
            };
            if d.is_empty() {
                return shape("medial at the root");
            }
            let parent: NodeAddress = d[..d.len() - 1].to_vec();
            let dnode = c.node(d)?;
            let mut fs = formulas.clone();
            fs.sort_unstable();
            let mut ks = children.clone();
            ks.sort_unstable();
            let picked = NestedSequent::new(
                fs.iter().map(|&i| dnode.formulas[i].clone()).collect(),
                ks.iter().map(|&i| dnode.children[i].clone()).collect(),
            );
            let rest = NestedSequent::new(
                dnode
                    .formulas
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| !fs.contains(i))
                    .map(|(_, g)| g.clone())
                    .collect(),
                dnode
                    .children
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| !ks.contains(i))
                    .map(|(_, g)| g.clone())
                    .collect(),
            );
            let premise = &step.premises[0];
            let pcount = premise.node(&parent)?.children.len();
            let half1 = child_of(&parent, pcount - 2);
            let half2 = child_of(&parent, pcount - 1);
            let sub = normalize(&subs[0])?;
            let sub = conform(&sub, premise)?;
            let w = weaken_in(&weaken_in(&sub, &half1, &rest)?, &half2, &picked)?;
            let inst = RuleInstance::base(
                Ctr,
                c,
                vec![Active::Pick { node: parent, formulas: vec![], children: vec![*d.last().unwrap()] }],
            )?;
            rebuild(inst, vec![w])
        }
        MBox => {
            let [Active::Slot(s)] = step.active.as_slice() else {
                return shape("box step without a slot");
            };
            let m = step.aux.m.max(1);
            let bx = RuleInstance::base(Box, c, vec![Active::Slot(s.clone())])?;
            let fresh = bx.premises[0].node(&s.node)?.children.len() - 1;
            let caddr = child_of(&s.node, fresh);
            let mut insts = Vec::new();
            let mut cc = bx.premises[0].clone();
            for _ in 1..m {
                let inst = RuleInstance::base(
                    Ctr,
                    cc.clone(),
                    vec![Active::Pick { node: caddr.clone(), formulas: vec![0], children: vec![] }],
                )?;
                cc = inst.premises[0].clone();
                insts.push(inst);
            }
            let mut q = normalize(&subs[0])?;
            for inst in insts.into_iter().rev() {
                q = rebuild(inst, vec![q])?;
            }
            rebuild(bx, vec![q])
        }
        MAnd => {
            let [Active::Slot(s)] = step.active.as_slice() else {
                return shape("conjunction step without a slot");
            };
            let and = RuleInstance::base(And, c, vec![Active::Slot(s.clone())])?;
            let mut folded = Vec::with_capacity(2);
            for (b, sub) in subs.iter().enumerate() {
                let mult = if b == 0 { step.aux.m.max(1) } else { step.aux.n.max(1) };
                let mut insts = Vec::new();
                let mut cc = and.premises[b].clone();
                for _ in 1..mult {
                    let inst = RuleInstance::base(
                        Ctr,
                        cc.clone(),
                        vec![Active::Pick { node: s.node.clone(), formulas: vec![s.index], children: vec![] }],
                    )?;
                    cc = inst.premises[0].clone();
                    insts.push(inst);
                }
                let mut q = normalize(sub)?;
                for inst in insts.into_iter().rev() {
                    q = rebuild(inst, vec![q])?;
                }
                folded.push(q);
            }
            rebuild(and, folded)
        }
        MCut => {
            let expanded = expand_mcut(&rebuild(step.clone(), subs)?)?;
            fold_back(&expanded)
        }
        _ => rebuild(step.clone(), subs),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::{check_proof, System};
    use crate::transform::{hilbert_from_json, hilbert_to_nested};

    fn mp_wrap(axiom: &str) -> String {
        format!(
            r#"[{{"ax": {{"name": "{0}", "A": "p"}}}}, {{"tau": "{1} -> ({1} | q)"}}, {{"mp": [0, 1]}}]"#,
            axiom,
            axiom_formula(axiom),
        )
    }

    fn axiom_formula(name: &str) -> &'static str {
        match name {
            "d" => "([]p -> <>p)",
            "t" => "(p -> <>p)",
            "b" => "(p -> []<>p)",
            "4" => "([]p -> [][]p)",
            "5" => "(<>p -> []<>p)",
            _ => unreachable!(),
        }
    }

    fn run(json: &str, x: Axioms) {
        let steps = hilbert_from_json(json).unwrap();
        let p = hilbert_to_nested(&steps, x).unwrap();
        assert!(p.cut_count() > 0, "expected the source proof to carry cuts");
        let (q, trace) = eliminate_cuts_structural_traced(&p, x).unwrap();
        assert_eq!(q.cut_count(), 0);
        for bad in [
            RuleId::Cut,
            RuleId::MCut,
            RuleId::MAnd,
            RuleId::MBox,
            RuleId::Med,
            RuleId::Fctr,
            RuleId::Wk,
            RuleId::Nec,
            RuleId::DiaT,
            RuleId::DiaB,
            RuleId::Dia4,
            RuleId::Dia5,
            RuleId::Dia51,
            RuleId::Dia52,
            RuleId::Dia53,
        ] {
            assert!(!q.uses_rule(bad), "{bad:?} left in the output");
        }
        check_proof(&q, &System::structural(x)).unwrap();
        assert_eq!(q.conclusion(), p.conclusion());
        assert!(trace.last().unwrap().max_cut_rank == 0);
    }

    #[test]
    fn propositional_chain() {
        run(
            r#"[{"tau": "p | ~p"}, {"tau": "(p | ~p) -> ((p | ~p) | q)"}, {"mp": [0, 1]}]"#,
            Axioms::EMPTY,
        );
    }

    #[test]
    fn seriality_chain() {
        run(&mp_wrap("d"), axioms::D);
    }

    #[test]
    fn reflexivity_chain() {
        run(&mp_wrap("t"), axioms::T);
    }

    #[test]
    fn symmetry_chain() {
        run(&mp_wrap("b"), axioms::B);
    }

    #[test]
    fn transitivity_chain() {
        run(&mp_wrap("4"), axioms::FOUR);
    }

    #[test]
    fn euclidean_chain() {
        run(&mp_wrap("5"), axioms::FIVE);
    }
}
