//! Depth-preserving admissible transformations: weakening, necessitation,
//! invertibility of the propositional and box rules, and contraction.
//!
//! All workers assume (and preserve) layout coherence: every subproof is
//! stored exactly as its step's computed premise, so the position maps of
//! the calculus move addresses through steps deterministically. Public
//! entry points normalize their input first.

use crate::calculus::{
    check_proof, premise_node_addr, premise_slot, Active, Aux, Proof, RuleId, RuleInstance, System,
};
use crate::formula::Formula;
use crate::sequent::{FormulaSlot, NestedSequent, NodeAddress};

use super::{
    align_addr, align_findex, normalize, rebuild, shape, unsupported, TransformError,
};

fn leaf1(f: Formula) -> NestedSequent {
    NestedSequent::leaf(vec![f])
}

fn child_of(a: &[usize], k: usize) -> NodeAddress {
    let mut out = a.to_vec();
    out.push(k);
    out
}

// ---------------------------------------------------------------------------
// Weakening
// ---------------------------------------------------------------------------

/// Graft `extra` onto node `a` of the conclusion, rebuilding the whole
/// proof without changing its depth.
pub fn weaken(
    p: &Proof,
    a: &[usize],
    extra: &NestedSequent,
    sys: &System,
) -> Result<Proof, TransformError> {
    check_proof(p, sys)?;
    let p = normalize(p)?;
    let out = weaken_in(&p, a, extra)?;
    debug_assert!(out.depth() <= p.depth());
    Ok(out)
}

pub(crate) fn weaken_in(
    p: &Proof,
    addr: &[usize],
    extra: &NestedSequent,
) -> Result<Proof, TransformError> {
    if extra.is_empty() {
        return Ok(p.clone());
    }
    let step = &p.step;
    if step.rule == RuleId::Nec && addr.is_empty() {
        // nec's conclusion shape [Γ] does not survive root-level additions
        return unsupported(RuleId::Nec, "weaken");
    }
    let target = step.conclusion.graft(addr, extra)?;
    let inst = RuleInstance::derive(
        step.rule,
        step.circle,
        target,
        step.active.clone(),
        step.aux.clone(),
    )?;
    let mut subs = Vec::with_capacity(p.subs.len());
    for (i, sub) in p.subs.iter().enumerate() {
        match premise_node_addr(step, i, addr) {
            Some(a) => subs.push(weaken_in(sub, &a, extra)?),
            // the node was weakened away by this very step: nothing to add
            None if step.rule == RuleId::Wk => subs.push(sub.clone()),
            // a split node: route the extra into the remainder half
            None if step.rule == RuleId::Med => {
                let parent = &addr[..addr.len() - 1];
                let mut rest = parent.to_vec();
                rest.push(step.conclusion.node(parent)?.children.len());
                subs.push(weaken_in(sub, &rest, extra)?);
            }
            None => return unsupported(step.rule, "weaken"),
        }
    }
    rebuild(inst, subs)
}

// ---------------------------------------------------------------------------
// Necessitation
// ---------------------------------------------------------------------------

/// Turn a proof of Γ into a proof of [Γ] of the same depth.
pub fn necessitate(p: &Proof) -> Result<Proof, TransformError> {
    let p = normalize(p)?;
    let out = nec_in(&p)?;
    debug_assert!(out.depth() <= p.depth());
    Ok(out)
}

fn prefix0(a: &[usize]) -> NodeAddress {
    std::iter::once(0).chain(a.iter().copied()).collect()
}

fn nec_in(p: &Proof) -> Result<Proof, TransformError> {
    let step = &p.step;
    let target = NestedSequent::new(Vec::new(), vec![step.conclusion.clone()]);
    let active = step
        .active
        .iter()
        .map(|a| match a {
            Active::Slot(s) => Active::Slot(FormulaSlot::new(prefix0(&s.node), s.index)),
            Active::Node(n) => Active::Node(prefix0(n)),
            Active::Pick { node, formulas, children } => Active::Pick {
                node: prefix0(node),
                formulas: formulas.clone(),
                children: children.clone(),
            },
        })
        .collect();
    let mut aux = step.aux.clone();
    aux.targets = aux.targets.iter().map(|t| prefix0(t)).collect();
    let inst = RuleInstance::derive(step.rule, step.circle, target, active, aux)?;
    let subs = p.subs.iter().map(nec_in).collect::<Result<Vec<_>, _>>()?;
    rebuild(inst, subs)
}

// ---------------------------------------------------------------------------
// Invertibility
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, PartialEq, Eq)]
pub(crate) enum InvKind {
    Or,
    And(usize),
    Box,
}

/// Invert a rule occurrence at `slot` of the conclusion.
///
/// The truly invertible rules are ∧ (pick a `branch`), ∨ and □; for the
/// diamond rules with built-in contraction whose inverse is a weakening
/// (◇t_c, ◇d_c, ◇b_c) and for formula contraction the premise is obtained
/// by weakening the conclusion proof instead.
pub fn invert(
    p: &Proof,
    rule: RuleId,
    slot: &FormulaSlot,
    branch: usize,
) -> Result<Proof, TransformError> {
    let p = normalize(p)?;
    let out = match rule {
        RuleId::Or => invert_in(&p, slot, InvKind::Or),
        RuleId::And => {
            if branch > 1 {
                return shape("conjunction branch must be 0 or 1");
            }
            invert_in(&p, slot, InvKind::And(branch))
        }
        RuleId::Box => invert_in(&p, slot, InvKind::Box),
        RuleId::DiaTc => {
            let a = dia_body(p.conclusion(), slot)?;
            weaken_in(&p, &slot.node, &leaf1(a))
        }
        RuleId::DiaBc => {
            let a = dia_body(p.conclusion(), slot)?;
            let Some((_, parent)) = slot.node.split_last() else {
                return shape("the diamond must sit below the root");
            };
            weaken_in(&p, parent, &leaf1(a))
        }
        RuleId::DiaDc => {
            let a = dia_body(p.conclusion(), slot)?;
            let extra = NestedSequent::new(Vec::new(), vec![NestedSequent::singleton(a)]);
            weaken_in(&p, &slot.node, &extra)
        }
        RuleId::Fctr => {
            let f = p.conclusion().formula_at(slot)?.clone();
            weaken_in(&p, &slot.node, &leaf1(f))
        }
        r => return unsupported(r, "invert"),
    }?;
    debug_assert!(out.depth() <= p.depth());
    Ok(out)
}

/// From a proof of Γ{A∨B}, a proof of Γ{A,B} of no greater depth.
pub fn invert_or(p: &Proof, slot: &FormulaSlot) -> Result<Proof, TransformError> {
    let p = normalize(p)?;
    invert_in(&p, slot, InvKind::Or)
}

/// From a proof of Γ{A∧B}, a proof of Γ{A} (branch 0) or Γ{B} (branch 1).
pub fn invert_and(p: &Proof, slot: &FormulaSlot, branch: usize) -> Result<Proof, TransformError> {
    let p = normalize(p)?;
    invert_in(&p, slot, InvKind::And(branch))
}

/// From a proof of Γ{□A}, a proof of Γ{[A]}.
pub fn invert_box(p: &Proof, slot: &FormulaSlot) -> Result<Proof, TransformError> {
    let p = normalize(p)?;
    invert_in(&p, slot, InvKind::Box)
}

fn dia_body(c: &NestedSequent, slot: &FormulaSlot) -> Result<Formula, TransformError> {
    match c.formula_at(slot)? {
        Formula::Dia(a) => Ok((**a).clone()),
        f => shape(format!("{f} is not a diamond")),
    }
}

/// The premise-shaped rewrite of the conclusion for one inversion.
fn surgery(
    c: &NestedSequent,
    slot: &FormulaSlot,
    kind: InvKind,
) -> Result<NestedSequent, TransformError> {
    let f = c.formula_at(slot)?.clone();
    let mut out = c.clone();
    let n = out.node_mut(&slot.node)?;
    match (kind, f) {
        (InvKind::Or, Formula::Or(a, b)) => {
            n.formulas[slot.index] = (*a).clone();
            n.formulas.push((*b).clone());
        }
        (InvKind::And(br), Formula::And(a, b)) => {
            n.formulas[slot.index] = if br == 0 { (*a).clone() } else { (*b).clone() };
        }
        (InvKind::Box, Formula::Box(a)) => {
            n.formulas.remove(slot.index);
            n.children.push(NestedSequent::singleton((*a).clone()));
        }
        (_, f) => return shape(format!("{f} does not match the inversion")),
    }
    Ok(out)
}

/// Relocate one active position across `surgery` at `slot`.
fn surgery_active(
    c: &NestedSequent,
    slot: &FormulaSlot,
    kind: InvKind,
    a: &Active,
) -> Result<Active, TransformError> {
    Ok(match a {
        Active::Slot(s) => {
            if s == slot {
                return shape("a rule is active on the inverted occurrence");
            }
            let mut s2 = s.clone();
            if kind == InvKind::Box && s.node == slot.node && s.index > slot.index {
                s2.index -= 1;
            }
            Active::Slot(s2)
        }
        Active::Node(n) => Active::Node(n.clone()),
        Active::Pick { node, formulas, children } => {
            let mut fs = formulas.clone();
            let mut ks = children.clone();
            if *node == slot.node {
                let n = c.node(&slot.node)?;
                match kind {
                    // a picked A∨B becomes A plus the appended B
                    InvKind::Or => {
                        if fs.contains(&slot.index) {
                            fs.push(n.formulas.len());
                        }
                    }
                    InvKind::And(_) => {}
                    // a picked □A becomes the appended child [A]
                    InvKind::Box => {
                        if let Some(pos) = fs.iter().position(|&i| i == slot.index) {
                            fs.remove(pos);
                            ks.push(n.children.len());
                        }
                        for i in fs.iter_mut() {
                            if *i > slot.index {
                                *i -= 1;
                            }
                        }
                    }
                }
            }
            Active::Pick { node: node.clone(), formulas: fs, children: ks }
        }
    })
}

pub(crate) fn invert_in(
    p: &Proof,
    slot: &FormulaSlot,
    kind: InvKind,
) -> Result<Proof, TransformError> {
    use RuleId::*;
    let step = &p.step;
    if step.circle {
        return unsupported(step.rule, "invert");
    }
    let c = &step.conclusion;

    // principal case: the step already is the rule being inverted
    if matches!(step.rule, And | Or | Box) {
        if let Some(Active::Slot(s)) = step.active.first() {
            if s == slot {
                return match (step.rule, kind) {
                    (Or, InvKind::Or) | (Box, InvKind::Box) => Ok(p.subs[0].clone()),
                    (And, InvKind::And(b)) => Ok(p.subs[b].clone()),
                    _ => shape("the step's rule does not match the inversion"),
                };
            }
        }
    }

    if matches!(step.rule, MAnd | MBox) {
        if let Some(Active::Slot(s)) = step.active.first() {
            if s == slot {
                return match (step.rule, kind) {
                    (MAnd, InvKind::And(b)) => {
                        // the chosen premise holds one copy at the slot plus
                        // extras appended at the end; fold them onto the slot
                        let mult = if b == 0 { step.aux.m.max(1) } else { step.aux.n.max(1) };
                        let sub = &p.subs[b];
                        let l0 = sub.conclusion().node(&slot.node)?.formulas.len();
                        let mut cur = sub.clone();
                        for j in (0..mult - 1).rev() {
                            cur = contract_in(
                                &cur,
                                &Duplication {
                                    node: slot.node.clone(),
                                    fpairs: vec![(slot.index, l0 - (mult - 1) + j)],
                                    cpairs: Vec::new(),
                                },
                            )?;
                        }
                        Ok(cur)
                    }
                    (MBox, InvKind::Box) => {
                        // the premise holds a fresh child with repeated bodies;
                        // fold the repetitions onto the first copy
                        let mult = step.aux.m.max(1);
                        let sub = &p.subs[0];
                        let node = sub.conclusion().node(&slot.node)?;
                        let mut child = slot.node.clone();
                        child.push(node.children.len() - 1);
                        let mut cur = sub.clone();
                        for j in (1..mult).rev() {
                            cur = contract_in(
                                &cur,
                                &Duplication {
                                    node: child.clone(),
                                    fpairs: vec![(0, j)],
                                    cpairs: Vec::new(),
                                },
                            )?;
                        }
                        Ok(cur)
                    }
                    _ => shape("the step's rule does not match the inversion"),
                };
            }
        }
    }

    if step.rule == Axiom {
        let target = surgery(c, slot, kind)?;
        let active = step
            .active
            .iter()
            .map(|a| surgery_active(c, slot, kind, a))
            .collect::<Result<Vec<_>, _>>()?;
        return Ok(Proof::leaf(RuleInstance::derive(Axiom, false, target, active, Aux::default())?));
    }

    if let (Wk, [Active::Pick { node, formulas, children }]) = (step.rule, step.active.as_slice()) {
        let direct = *node == slot.node && formulas.contains(&slot.index);
        let inside = slot.node.len() > node.len()
            && slot.node.starts_with(node)
            && children.contains(&slot.node[node.len()]);
        if direct || inside {
            // the occurrence is discarded anyway: discard its pieces instead
            let target = surgery(c, slot, kind)?;
            let active = surgery_active(c, slot, kind, &step.active[0])?;
            let inst = RuleInstance::derive(Wk, false, target, vec![active], Aux::default())?;
            return rebuild(inst, vec![p.subs[0].clone()]);
        }
    }

    if let (Ctr, [Active::Pick { node, formulas, children }]) = (step.rule, step.active.as_slice())
    {
        let inside = slot.node.len() > node.len()
            && slot.node.starts_with(node)
            && children.contains(&slot.node[node.len()]);
        if inside {
            return unsupported(Ctr, "invert");
        }
        if *node == slot.node && formulas.contains(&slot.index) {
            // the occurrence is duplicated: invert both copies in the premise
            let l0 = c.node(&slot.node)?.formulas.len();
            let mut sorted = formulas.clone();
            sorted.sort_unstable();
            let rank = sorted.iter().position(|&i| i == slot.index).unwrap();
            let once = invert_in(&p.subs[0], slot, kind)?;
            let mut dup_idx = l0 + rank;
            if kind == InvKind::Box {
                dup_idx -= 1; // the first inversion removed a formula below it
            }
            let twice = invert_in(&once, &FormulaSlot::new(slot.node.clone(), dup_idx), kind)?;
            let target = surgery(c, slot, kind)?;
            let active = surgery_active(c, slot, kind, &step.active[0])?;
            let inst = RuleInstance::derive(Ctr, false, target, vec![active], Aux::default())?;
            return rebuild(inst, vec![twice]);
        }
    }

    if step.rule == Fctr {
        if let Some(Active::Slot(s)) = step.active.first() {
            if s == slot {
                // undoing this would cost an extra step and break depth bounds
                return unsupported(Fctr, "invert");
            }
        }
    }

    // passive case: push the inversion through the step
    let mut subs = Vec::with_capacity(p.subs.len());
    for (i, sub) in p.subs.iter().enumerate() {
        let Some(ms) = premise_slot(step, i, slot) else {
            return unsupported(step.rule, "invert");
        };
        subs.push(invert_in(sub, &ms, kind)?);
    }
    let target = surgery(c, slot, kind)?;
    let active = step
        .active
        .iter()
        .map(|a| surgery_active(c, slot, kind, a))
        .collect::<Result<Vec<_>, _>>()?;
    let inst = RuleInstance::derive(step.rule, false, target, active, step.aux.clone())?;
    rebuild(inst, subs)
}

// ---------------------------------------------------------------------------
// Contraction
// ---------------------------------------------------------------------------

/// A set of duplicate occurrences to contract at one node: each pair is
/// (kept index, dropped index); formula pairs must hold equal formulas,
/// child pairs multiset-equal subtrees, and no index may appear twice.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Duplication {
    pub node: NodeAddress,
    pub fpairs: Vec<(usize, usize)>,
    pub cpairs: Vec<(usize, usize)>,
}

impl Duplication {
    pub fn is_empty(&self) -> bool {
        self.fpairs.is_empty() && self.cpairs.is_empty()
    }
}

/// From a proof of Γ{Δ,Δ} at `a`, a proof of Γ{Δ} of no greater depth.
/// `dup` is Δ; its two copies are located greedily at node `a`.
pub fn contract(
    p: &Proof,
    a: &[usize],
    dup: &NestedSequent,
    sys: &System,
) -> Result<Proof, TransformError> {
    check_proof(p, sys)?;
    let p = normalize(p)?;
    let d = pair_duplicate(p.conclusion().node(a)?, a, dup)?;
    let out = contract_in(&p, &d)?;
    debug_assert!(out.depth() <= p.depth());
    Ok(out)
}

/// Contraction at explicitly chosen occurrence pairs.
pub fn contract_at(p: &Proof, d: &Duplication) -> Result<Proof, TransformError> {
    let p = normalize(p)?;
    let out = contract_in(&p, d)?;
    debug_assert!(out.depth() <= p.depth());
    Ok(out)
}

fn pair_duplicate(
    node: &NestedSequent,
    a: &[usize],
    dup: &NestedSequent,
) -> Result<Duplication, TransformError> {
    let mut used_f = vec![false; node.formulas.len()];
    let mut fpairs = Vec::new();
    for f in &dup.formulas {
        let mut found = Vec::new();
        for (i, g) in node.formulas.iter().enumerate() {
            if !used_f[i] && g == f {
                used_f[i] = true;
                found.push(i);
                if found.len() == 2 {
                    break;
                }
            }
        }
        match found.as_slice() {
            [k, d] => fpairs.push((*k, *d)),
            _ => return shape(format!("node does not contain two spare copies of {f}")),
        }
    }
    let mut used_c = vec![false; node.children.len()];
    let mut cpairs = Vec::new();
    for ch in &dup.children {
        let mut found = Vec::new();
        for (i, g) in node.children.iter().enumerate() {
            if !used_c[i] && g == ch {
                used_c[i] = true;
                found.push(i);
                if found.len() == 2 {
                    break;
                }
            }
        }
        match found.as_slice() {
            [k, d] => cpairs.push((*k, *d)),
            _ => return shape("node does not contain two spare copies of a duplicated child"),
        }
    }
    Ok(Duplication { node: a.to_vec(), fpairs, cpairs })
}

fn validate_dup(c: &NestedSequent, d: &Duplication) -> Result<(), TransformError> {
    let node = c.node(&d.node)?;
    let mut seen_f = std::collections::BTreeSet::new();
    for &(k, dr) in &d.fpairs {
        if k == dr || !seen_f.insert(k) || !seen_f.insert(dr) {
            return shape("overlapping formula pairs in duplication");
        }
        match (node.formulas.get(k), node.formulas.get(dr)) {
            (Some(a), Some(b)) if a == b => {}
            _ => return shape("formula pair members are missing or unequal"),
        }
    }
    let mut seen_c = std::collections::BTreeSet::new();
    for &(k, dr) in &d.cpairs {
        if k == dr || !seen_c.insert(k) || !seen_c.insert(dr) {
            return shape("overlapping child pairs in duplication");
        }
        match (node.children.get(k), node.children.get(dr)) {
            (Some(a), Some(b)) if a == b => {}
            _ => {
                if std::env::var("CE_DEBUG").is_ok() {
                    panic!("validate_dup cpair ({},{}) on {:?}", k, dr, c);
                }
                return shape("child pair members are missing or unequal");
            }
        }
    }
    Ok(())
}

fn remove_drops(c: &NestedSequent, d: &Duplication) -> Result<NestedSequent, TransformError> {
    let mut out = c.clone();
    let n = out.node_mut(&d.node)?;
    let mut fdrops: Vec<usize> = d.fpairs.iter().map(|&(_, dr)| dr).collect();
    fdrops.sort_unstable_by(|a, b| b.cmp(a));
    for i in fdrops {
        n.formulas.remove(i);
    }
    let mut cdrops: Vec<usize> = d.cpairs.iter().map(|&(_, dr)| dr).collect();
    cdrops.sort_unstable_by(|a, b| b.cmp(a));
    for i in cdrops {
        n.children.remove(i);
    }
    Ok(out)
}

fn fshift(d: &Duplication, i: usize) -> usize {
    i - d.fpairs.iter().filter(|&&(_, dr)| dr < i).count()
}

fn cshift(d: &Duplication, i: usize) -> usize {
    i - d.cpairs.iter().filter(|&&(_, dr)| dr < i).count()
}

fn fpair_with(d: &Duplication, i: usize) -> Option<(usize, usize)> {
    d.fpairs.iter().copied().find(|&(k, dr)| k == i || dr == i)
}

fn cpair_partner(d: &Duplication, k: usize) -> Option<usize> {
    d.cpairs
        .iter()
        .find_map(|&(a, b)| if a == k { Some(b) } else if b == k { Some(a) } else { None })
}

/// Map a conclusion address into the contracted sequent: addresses inside
/// a dropped child subtree are mirrored into the kept partner.
fn map_addr(c: &NestedSequent, d: &Duplication, addr: &[usize]) -> Option<NodeAddress> {
    if addr.len() > d.node.len() && addr.starts_with(&d.node) {
        let k = addr[d.node.len()];
        let rest = &addr[d.node.len() + 1..];
        let is_drop = d.cpairs.iter().any(|&(_, dr)| dr == k);
        if is_drop {
            let keep = cpair_partner(d, k)?;
            let from = c.node(&child_of(&d.node, k)).ok()?;
            let to = c.node(&child_of(&d.node, keep)).ok()?;
            let mrest = align_addr(from, to, rest)?;
            let mut out = child_of(&d.node, cshift(d, keep));
            out.extend_from_slice(&mrest);
            Some(out)
        } else {
            let mut out = addr.to_vec();
            out[d.node.len()] = cshift(d, k);
            Some(out)
        }
    } else {
        Some(addr.to_vec())
    }
}

/// Map a formula slot into the contracted sequent.
fn map_slot(c: &NestedSequent, d: &Duplication, slot: &FormulaSlot) -> Option<FormulaSlot> {
    if slot.node == d.node {
        let idx = match fpair_with(d, slot.index) {
            Some((k, dr)) if dr == slot.index => fshift(d, k),
            _ => fshift(d, slot.index),
        };
        return Some(FormulaSlot::new(d.node.clone(), idx));
    }
    if slot.node.len() > d.node.len() && slot.node.starts_with(&d.node) {
        let k = slot.node[d.node.len()];
        let rest = &slot.node[d.node.len() + 1..];
        let is_drop = d.cpairs.iter().any(|&(_, dr)| dr == k);
        if is_drop {
            let keep = cpair_partner(d, k)?;
            let from_sub = c.node(&child_of(&d.node, k)).ok()?;
            let to_sub = c.node(&child_of(&d.node, keep)).ok()?;
            let mrest = align_addr(from_sub, to_sub, rest)?;
            let idx = align_findex(
                from_sub.node(rest).ok()?,
                to_sub.node(&mrest).ok()?,
                slot.index,
            )?;
            let mut node = child_of(&d.node, cshift(d, keep));
            node.extend_from_slice(&mrest);
            return Some(FormulaSlot::new(node, idx));
        }
        let mut node = slot.node.clone();
        node[d.node.len()] = cshift(d, k);
        return Some(FormulaSlot::new(node, slot.index));
    }
    Some(slot.clone())
}

/// Map an address inside one paired child subtree to the corresponding
/// address inside the partner subtree (still in conclusion coordinates).
fn mirror_addr(c: &NestedSequent, d: &Duplication, addr: &[usize]) -> Option<NodeAddress> {
    if addr.len() <= d.node.len() || !addr.starts_with(&d.node) {
        return None;
    }
    let k = addr[d.node.len()];
    let o = cpair_partner(d, k)?;
    let from = c.node(&child_of(&d.node, k)).ok()?;
    let to = c.node(&child_of(&d.node, o)).ok()?;
    let rest = &addr[d.node.len() + 1..];
    let mrest = align_addr(from, to, rest)?;
    let mut out = child_of(&d.node, o);
    out.extend_from_slice(&mrest);
    Some(out)
}

fn mirror_slot(c: &NestedSequent, d: &Duplication, slot: &FormulaSlot) -> Option<FormulaSlot> {
    let node2 = mirror_addr(c, d, &slot.node)?;
    let idx = align_findex(c.node(&slot.node).ok()?, c.node(&node2).ok()?, slot.index)?;
    Some(FormulaSlot::new(node2, idx))
}

fn map_active(c: &NestedSequent, d: &Duplication, a: &Active) -> Option<Active> {
    Some(match a {
        Active::Slot(s) => Active::Slot(map_slot(c, d, s)?),
        Active::Node(n) => Active::Node(map_addr(c, d, n)?),
        Active::Pick { node, formulas, children } => {
            let node2 = map_addr(c, d, node)?;
            let mut fs = Vec::with_capacity(formulas.len());
            for &i in formulas {
                let s2 = map_slot(c, d, &FormulaSlot::new(node.clone(), i))?;
                if s2.node != node2 || fs.contains(&s2.index) {
                    return None;
                }
                fs.push(s2.index);
            }
            let mut ks = Vec::with_capacity(children.len());
            for &i in children {
                let a2 = map_addr(c, d, &child_of(node, i))?;
                let (&last, parent) = a2.split_last()?;
                if parent != node2.as_slice() || ks.contains(&last) {
                    return None;
                }
                ks.push(last);
            }
            Active::Pick { node: node2, formulas: fs, children: ks }
        }
    })
}

pub(crate) fn contract_in(p: &Proof, d: &Duplication) -> Result<Proof, TransformError> {
    use RuleId::*;
    if d.is_empty() {
        return Ok(p.clone());
    }
    let c = p.conclusion();
    validate_dup(c, d)?;
    let step = &p.step;
    if step.circle {
        return unsupported(step.rule, "contract");
    }
    let target = remove_drops(c, d)?;
    match step.rule {
        Axiom => {
            let active = step
                .active
                .iter()
                .map(|a| map_active(c, d, a))
                .collect::<Option<Vec<_>>>()
                .ok_or_else(|| {
                    TransformError::Shape("axiom witnesses do not survive contraction".into())
                })?;
            Ok(Proof::leaf(RuleInstance::derive(Axiom, false, target, active, Aux::default())?))
        }
        And | Or | Box => contract_logical(p, d, target),
        DiaKc | DiaDc | DiaTc | DiaBc | Dia4c | Dia5c | StrD | Fctr | Ctr | Cut | MCut | YCut => {
            contract_addition(p, d, target)
        }
        DiaK => contract_diak(p, d, target),
        DiaD | DiaT | DiaB => contract_addition(p, d, target),
        StrT => contract_strt(p, d, target),
        Med => contract_med(p, d, target),
        _ => contract_passive(p, d, target),
    }
}

/// The consuming logical rules: if the principal occurrence is half of a
/// duplicate pair, invert its partner in the premise and contract there;
/// if it sits inside a paired subtree, mirror the inversion; otherwise
/// the step is passive.
fn contract_logical(
    p: &Proof,
    d: &Duplication,
    target: NestedSequent,
) -> Result<Proof, TransformError> {
    use RuleId::*;
    let step = &p.step;
    let c = &step.conclusion;
    let Some(Active::Slot(s)) = step.active.first() else {
        return shape("logical step without a principal slot");
    };
    let s = s.clone();

    if s.node == d.node {
        if let Some((k, dr)) = fpair_with(d, s.index) {
            let partner = if s.index == k { dr } else { k };
            let kind = |i| match step.rule {
                Or => InvKind::Or,
                And => InvKind::And(i),
                Box => InvKind::Box,
                _ => unreachable!(),
            };
            let reapply = FormulaSlot::new(d.node.clone(), fshift(d, k));
            return match step.rule {
                Or => {
                    let l0 = c.node(&d.node)?.formulas.len();
                    let psub = invert_in(
                        &p.subs[0],
                        &FormulaSlot::new(d.node.clone(), partner),
                        kind(0),
                    )?;
                    // the disjuncts now sit at (s, partner) and (l0, l0+1)
                    let mut d2 = d.clone();
                    d2.fpairs.push(if s.index == k { (l0, l0 + 1) } else { (l0 + 1, l0) });
                    let q = contract_in(&psub, &d2)?;
                    rebuild(
                        RuleInstance::base(Or, target, vec![Active::Slot(reapply)])?,
                        vec![q],
                    )
                }
                And => {
                    let mut subs = Vec::with_capacity(2);
                    for (i, sub) in p.subs.iter().enumerate() {
                        let psub = invert_in(
                            sub,
                            &FormulaSlot::new(d.node.clone(), partner),
                            kind(i),
                        )?;
                        subs.push(contract_in(&psub, d)?);
                    }
                    rebuild(RuleInstance::base(And, target, vec![Active::Slot(reapply)])?, subs)
                }
                Box => {
                    // the premise removed the principal: the partner shifted
                    let pidx = partner - usize::from(partner > s.index);
                    let k0 = c.node(&d.node)?.children.len();
                    let psub = invert_in(
                        &p.subs[0],
                        &FormulaSlot::new(d.node.clone(), pidx),
                        kind(0),
                    )?;
                    // both boxes are gone; their bodies sit in children k0, k0+1
                    let (rm1, rm2) = (s.index, partner);
                    let shift =
                        |i: usize| i - usize::from(i > rm1) - usize::from(i > rm2);
                    let mut fpairs: Vec<(usize, usize)> = Vec::new();
                    for &(a, b) in &d.fpairs {
                        if (a, b) != (k, dr) {
                            fpairs.push((shift(a), shift(b)));
                        }
                    }
                    let mut cpairs = d.cpairs.clone();
                    cpairs.push(if s.index == k { (k0, k0 + 1) } else { (k0 + 1, k0) });
                    let d2 = Duplication { node: d.node.clone(), fpairs, cpairs };
                    let q = contract_in(&psub, &d2)?;
                    rebuild(
                        RuleInstance::base(Box, target, vec![Active::Slot(reapply)])?,
                        vec![q],
                    )
                }
                _ => unreachable!(),
            };
        }
    }

    if let Some(mirror) = mirror_slot(c, d, &s) {
        let reapply = map_slot(c, d, &s)
            .ok_or_else(|| TransformError::Shape("principal slot does not map".into()))?;
        let mut subs = Vec::with_capacity(p.subs.len());
        for (i, sub) in p.subs.iter().enumerate() {
            let kind = match step.rule {
                Or => InvKind::Or,
                And => InvKind::And(i),
                Box => InvKind::Box,
                _ => unreachable!(),
            };
            // apply the same action in the partner subtree, then contract
            let psub = invert_in(sub, &mirror, kind)?;
            subs.push(contract_in(&psub, d)?);
        }
        let inst = RuleInstance::base(step.rule, target, vec![Active::Slot(reapply)])?;
        return rebuild(inst, subs);
    }

    contract_passive(p, d, target)
}

/// A diamond rule consuming half of a duplicate pair: re-apply it to the
/// surviving copy at the same target and strengthen the leftover partner
/// occurrence in the premise.
fn contract_diak(
    p: &Proof,
    d: &Duplication,
    target: NestedSequent,
) -> Result<Proof, TransformError> {
    use RuleId::*;
    let step = &p.step;
    let c = &step.conclusion;
    let [Active::Slot(s), Active::Node(t)] = step.active.as_slice() else {
        return shape("expected a slot and a target node");
    };
    if s.node == d.node {
        if let Some((k, dr)) = fpair_with(d, s.index) {
            if d.fpairs.len() != 1 || !d.cpairs.is_empty() {
                return unsupported(DiaK, "contract");
            }
            let survivor = if s.index == k { dr } else { k };
            let pidx = survivor - usize::from(survivor > s.index);
            let q = super::cutelim_structural::strengthen(
                &p.subs[0],
                &FormulaSlot::new(s.node.clone(), pidx),
            )?;
            let slot2 = FormulaSlot::new(d.node.clone(), fshift(d, k));
            let t2 = map_addr(c, d, t)
                .ok_or_else(|| TransformError::Shape("target node does not survive".into()))?;
            let inst = RuleInstance::derive(
                DiaK,
                false,
                target,
                vec![Active::Slot(slot2), Active::Node(t2)],
                step.aux.clone(),
            )?;
            return rebuild(inst, vec![q]);
        }
    }
    contract_addition(p, d, target)
}

/// A shift picking half of a duplicate pair into its fresh child: pick the
/// surviving copy instead (or contract inside the child when both halves
/// are picked) and strengthen the leftover occurrence at the node.
fn contract_strt(
    p: &Proof,
    d: &Duplication,
    target: NestedSequent,
) -> Result<Proof, TransformError> {
    use RuleId::*;
    let step = &p.step;
    let c = &step.conclusion;
    let [Active::Pick { node, formulas: fs, children: ks }] = step.active.as_slice() else {
        return shape("expected one pick");
    };
    if *node == d.node {
        let hit = d.fpairs.iter().any(|&(k, dr)| fs.contains(&k) || fs.contains(&dr));
        if hit {
            if d.fpairs.len() != 1 || !d.cpairs.is_empty() {
                return unsupported(StrT, "contract");
            }
            let (k, dr) = d.fpairs[0];
            let (k_in, dr_in) = (fs.contains(&k), fs.contains(&dr));
            if k_in && dr_in {
                // both halves move: the pair persists inside the new child
                let mut sorted = fs.clone();
                sorted.sort_unstable();
                let pos = |i: usize| sorted.iter().position(|&j| j == i).unwrap();
                let child = child_of(node, c.node(node)?.children.len() - ks.len());
                let d2 = Duplication {
                    node: child,
                    fpairs: vec![(pos(k), pos(dr))],
                    cpairs: vec![],
                };
                let q = contract_in(&p.subs[0], &d2)?;
                let mut fs2: Vec<usize> =
                    fs.iter().filter(|&&j| j != dr).map(|&j| fshift(d, j)).collect();
                fs2.sort_unstable();
                let pick = Active::Pick { node: node.clone(), formulas: fs2, children: ks.clone() };
                let inst = RuleInstance::derive(StrT, false, target, vec![pick], step.aux.clone())?;
                return rebuild(inst, vec![q]);
            }
            let (picked, survivor) = if dr_in { (dr, k) } else { (k, dr) };
            let pidx = survivor - fs.iter().filter(|&&j| j < survivor).count();
            let q = super::cutelim_structural::strengthen(
                &p.subs[0],
                &FormulaSlot::new(node.clone(), pidx),
            )?;
            let mut fs2: Vec<usize> = fs
                .iter()
                .map(|&j| if j == picked { survivor } else { j })
                .map(|j| fshift(d, if j == dr { k } else { j }))
                .collect();
            fs2.sort_unstable();
            fs2.dedup();
            let pick = Active::Pick { node: node.clone(), formulas: fs2, children: ks.clone() };
            let inst = RuleInstance::derive(StrT, false, target, vec![pick], step.aux.clone())?;
            return rebuild(inst, vec![q]);
        }
    }
    contract_passive(p, d, target)
}

/// A mediation split separating the two halves of a duplicate pair:
/// strengthen the dropped occurrence out of its half and re-split.
fn contract_med(
    p: &Proof,
    d: &Duplication,
    target: NestedSequent,
) -> Result<Proof, TransformError> {
    use RuleId::*;
    let step = &p.step;
    let c = &step.conclusion;
    let [Active::Node(caddr), Active::Pick { node, formulas: fs, children: ks }] =
        step.active.as_slice()
    else {
        return shape("expected a node and a pick");
    };
    if caddr == &d.node {
        let split = d
            .fpairs
            .iter()
            .any(|&(k, dr)| fs.contains(&k) != fs.contains(&dr));
        if split {
            if d.fpairs.len() != 1 || !d.cpairs.is_empty() {
                return unsupported(Med, "contract");
            }
            let (_, dr) = d.fpairs[0];
            let parent = &caddr[..caddr.len() - 1];
            let siblings = c.node(parent)?.children.len();
            let slot = if fs.contains(&dr) {
                let mut sorted = fs.clone();
                sorted.sort_unstable();
                let mut a = parent.to_vec();
                a.push(siblings - 1);
                FormulaSlot::new(a, sorted.iter().position(|&j| j == dr).unwrap())
            } else {
                let mut a = parent.to_vec();
                a.push(siblings);
                FormulaSlot::new(a, dr - fs.iter().filter(|&&j| j < dr).count())
            };
            let q = super::cutelim_structural::strengthen(&p.subs[0], &slot)?;
            let mut fs2: Vec<usize> =
                fs.iter().filter(|&&j| j != dr).map(|&j| fshift(d, j)).collect();
            fs2.sort_unstable();
            let inst = RuleInstance::derive(
                Med,
                false,
                target,
                vec![
                    Active::Node(caddr.clone()),
                    Active::Pick { node: node.clone(), formulas: fs2, children: ks.clone() },
                ],
                step.aux.clone(),
            )?;
            return rebuild(inst, vec![q]);
        }
    }
    contract_passive(p, d, target)
}

/// What a premise adds to the conclusion, per premise, as graft payloads.
pub(crate) fn additions_of(
    step: &RuleInstance,
) -> Result<Vec<Vec<(NodeAddress, NestedSequent)>>, TransformError> {
    use RuleId::*;
    let c = &step.conclusion;
    let slot0 = || match step.active.first() {
        Some(Active::Slot(s)) => Ok(s),
        _ => shape("expected a principal slot"),
    };
    Ok(match step.rule {
        DiaKc | DiaK | Dia4c | Dia5c => {
            let (s, t) = match step.active.as_slice() {
                [Active::Slot(s), Active::Node(t)] => (s, t),
                _ => return shape("expected a slot and a target node"),
            };
            let f = c.formula_at(s)?.clone();
            let add = if matches!(step.rule, DiaKc | DiaK) {
                match f {
                    Formula::Dia(a) => (*a).clone(),
                    _ => return shape("principal is not a diamond"),
                }
            } else {
                f
            };
            vec![vec![(t.clone(), leaf1(add))]]
        }
        DiaTc | DiaT => {
            let s = slot0()?;
            let a = dia_body(c, s)?;
            vec![vec![(s.node.clone(), leaf1(a))]]
        }
        DiaBc | DiaB => {
            let s = slot0()?;
            let a = dia_body(c, s)?;
            let Some((_, parent)) = s.node.split_last() else {
                return shape("the diamond must sit below the root");
            };
            vec![vec![(parent.to_vec(), leaf1(a))]]
        }
        DiaDc | DiaD => {
            let s = slot0()?;
            let a = dia_body(c, s)?;
            let extra = NestedSequent::new(Vec::new(), vec![NestedSequent::singleton(a)]);
            vec![vec![(s.node.clone(), extra)]]
        }
        StrD => {
            let a = match step.active.as_slice() {
                [Active::Node(a)] => a.clone(),
                _ => return shape("expected one node"),
            };
            vec![vec![(a, NestedSequent::new(Vec::new(), vec![NestedSequent::default()]))]]
        }
        Fctr => {
            let s = slot0()?;
            let f = c.formula_at(s)?.clone();
            vec![vec![(s.node.clone(), leaf1(f))]]
        }
        Ctr => {
            let (node, fs, ks) = match step.active.as_slice() {
                [Active::Pick { node, formulas, children }] => (node, formulas, children),
                _ => return shape("expected one pick"),
            };
            let n = c.node(node)?;
            let mut fs2 = fs.clone();
            fs2.sort_unstable();
            let mut ks2 = ks.clone();
            ks2.sort_unstable();
            let picked = NestedSequent::new(
                fs2.iter().map(|&i| n.formulas[i].clone()).collect(),
                ks2.iter().map(|&i| n.children[i].clone()).collect(),
            );
            vec![vec![(node.clone(), picked)]]
        }
        Cut | MCut => {
            let a = match step.active.as_slice() {
                [Active::Node(a)] => a.clone(),
                _ => return shape("expected one node"),
            };
            let f = step.aux.formula.clone().ok_or_else(|| {
                TransformError::Shape("missing cut formula".into())
            })?;
            let (m, n) =
                if step.rule == Cut { (1, 1) } else { (step.aux.m, step.aux.n) };
            let neg = crate::formula::negate(&f);
            vec![
                vec![(a.clone(), NestedSequent::leaf(vec![f; m]))],
                vec![(a, NestedSequent::leaf(vec![neg; n]))],
            ]
        }
        YCut => {
            let a = match step.active.as_slice() {
                [Active::Node(a)] => a.clone(),
                _ => return shape("expected one node"),
            };
            let f = step.aux.formula.clone().ok_or_else(|| {
                TransformError::Shape("missing cut formula".into())
            })?;
            let dia = Formula::dia(crate::formula::negate(&f));
            let mut p2 = vec![(a.clone(), leaf1(dia.clone()))];
            for t in &step.aux.targets {
                p2.push((t.clone(), leaf1(dia.clone())));
            }
            vec![vec![(a, leaf1(Formula::boxed(f)))], p2]
        }
        r => return unsupported(r, "contract"),
    })
}

/// Rules whose premises only add material. If an addition lands inside a
/// paired subtree, weaken the partner subtree identically first, keeping
/// the two copies equal for the inductive step.
fn contract_addition(
    p: &Proof,
    d: &Duplication,
    target: NestedSequent,
) -> Result<Proof, TransformError> {
    let step = &p.step;
    let c = &step.conclusion;
    let adds = additions_of(step)?;
    if adds.len() != p.subs.len() {
        return shape("premise count mismatch in additions");
    }
    let mut subs = Vec::with_capacity(p.subs.len());
    for (sub, adds_i) in p.subs.iter().zip(&adds) {
        let mut cur = sub.clone();
        for (addr, extra) in adds_i {
            if let Some(mirror) = mirror_addr(c, d, addr) {
                cur = weaken_in(&cur, &mirror, extra)?;
            }
        }
        subs.push(contract_in(&cur, d)?);
    }
    let active = step
        .active
        .iter()
        .map(|a| map_active(c, d, a))
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| TransformError::Shape("active positions do not survive contraction".into()))?;
    let mut aux = step.aux.clone();
    aux.targets = step
        .aux
        .targets
        .iter()
        .map(|t| map_addr(c, d, t))
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| TransformError::Shape("aux targets do not survive contraction".into()))?;
    let inst = RuleInstance::derive(step.rule, false, target, active, aux)?;
    rebuild(inst, subs)
}

/// Map the duplication through premise `idx` of a step that neither
/// consumes a paired occurrence nor adds inside a paired subtree.
fn map_dup_through(step: &RuleInstance, idx: usize, d: &Duplication) -> Option<Duplication> {
    let node2 = premise_node_addr(step, idx, &d.node)?;
    let mut fpairs = Vec::with_capacity(d.fpairs.len());
    for &(k, dr) in &d.fpairs {
        let sk = premise_slot(step, idx, &FormulaSlot::new(d.node.clone(), k))?;
        let sd = premise_slot(step, idx, &FormulaSlot::new(d.node.clone(), dr))?;
        if sk.node != node2 || sd.node != node2 {
            return None;
        }
        fpairs.push((sk.index, sd.index));
    }
    let mut cpairs = Vec::with_capacity(d.cpairs.len());
    for &(k, dr) in &d.cpairs {
        let ak = premise_node_addr(step, idx, &child_of(&d.node, k))?;
        let ad = premise_node_addr(step, idx, &child_of(&d.node, dr))?;
        let (&lk, pk) = ak.split_last()?;
        let (&ld, pd) = ad.split_last()?;
        if pk != node2.as_slice() || pd != node2.as_slice() {
            return None;
        }
        cpairs.push((lk, ld));
    }
    Some(Duplication { node: node2, fpairs, cpairs })
}

fn contract_passive(
    p: &Proof,
    d: &Duplication,
    target: NestedSequent,
) -> Result<Proof, TransformError> {
    let step = &p.step;
    let c = &step.conclusion;
    let mut subs = Vec::with_capacity(p.subs.len());
    for (i, sub) in p.subs.iter().enumerate() {
        let Some(di) = map_dup_through(step, i, d) else {
            return unsupported(step.rule, "contract");
        };
        subs.push(contract_in(sub, &di)?);
    }
    let active = step
        .active
        .iter()
        .map(|a| map_active(c, d, a))
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| TransformError::Shape("active positions do not survive contraction".into()))?;
    let mut aux = step.aux.clone();
    aux.targets = step
        .aux
        .targets
        .iter()
        .map(|t| map_addr(c, d, t))
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| TransformError::Shape("aux targets do not survive contraction".into()))?;
    let inst = RuleInstance::derive(step.rule, false, target, active, aux)?;
    rebuild(inst, subs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::axioms::Axioms;
    use crate::calculus::check_proof;
    use crate::sequent::parse_sequent;

    fn seq(s: &str) -> NestedSequent {
        parse_sequent(s).unwrap()
    }

    fn slot(node: &[usize], index: usize) -> FormulaSlot {
        FormulaSlot::new(node.to_vec(), index)
    }

    fn ax(concl: NestedSequent, w1: FormulaSlot, w2: FormulaSlot) -> Proof {
        Proof::leaf(
            RuleInstance::base(RuleId::Axiom, concl, vec![Active::Slot(w1), Active::Slot(w2)])
                .unwrap(),
        )
    }

    fn logical() -> System {
        System::logical(Axioms::EMPTY)
    }

    /// ⊢ ◇¬a, □a  via  □, ◇k_c, ax.
    fn box_example() -> Proof {
        let concl = seq("<>~a, []a");
        let i_box =
            RuleInstance::base(RuleId::Box, concl, vec![Active::slot(vec![], 1)]).unwrap();
        let p1 = i_box.premises[0].clone();
        let i_dia = RuleInstance::base(
            RuleId::DiaKc,
            p1,
            vec![Active::slot(vec![], 0), Active::Node(vec![0])],
        )
        .unwrap();
        let p2 = i_dia.premises[0].clone();
        let leaf = ax(p2, slot(&[0], 0), slot(&[0], 1));
        Proof::node(i_box, vec![Proof::node(i_dia, vec![leaf])])
    }

    /// ⊢ a∨¬a, ◇c, c  via  ∨, ax  (layout: [a|~a, <>c, c]).
    fn or_under_dia() -> Proof {
        let concl = NestedSequent::leaf(vec![
            crate::formula::parse("a | ~a").unwrap(),
            crate::formula::parse("<>c").unwrap(),
            crate::formula::parse("c").unwrap(),
        ]);
        let i_or = RuleInstance::base(RuleId::Or, concl, vec![Active::slot(vec![], 0)]).unwrap();
        let prem = i_or.premises[0].clone();
        let leaf = ax(prem, slot(&[], 0), slot(&[], 3));
        Proof::node(i_or, vec![leaf])
    }

    #[test]
    fn weaken_axiom_leaf() {
        let p = ax(seq("a, ~a"), slot(&[], 0), slot(&[], 1));
        let out = weaken(&p, &[], &seq("q, [r]"), &logical()).unwrap();
        assert_eq!(out.conclusion(), &seq("a, ~a, q, [r]"));
        assert_eq!(out.depth(), 1);
        check_proof(&out, &logical()).unwrap();
    }

    #[test]
    fn weaken_whole_proof_at_root_and_inside() {
        let p = box_example();
        check_proof(&p, &logical()).unwrap();
        let out = weaken(&p, &[], &seq("q"), &logical()).unwrap();
        assert_eq!(out.conclusion(), &seq("<>~a, []a, q"));
        assert_eq!(out.depth(), p.depth());
        check_proof(&out, &logical()).unwrap();

        // inside the box: weaken the subproof that owns a child node
        let sub = &p.subs[0];
        let out2 = weaken(sub, &[0], &seq("r, [s]"), &logical()).unwrap();
        assert_eq!(out2.conclusion(), &seq("<>~a, [a, r, [s]]"));
        check_proof(&out2, &logical()).unwrap();
    }

    #[test]
    fn necessitate_boxes_the_conclusion() {
        let p = box_example();
        let out = necessitate(&p).unwrap();
        assert_eq!(out.conclusion(), &seq("[<>~a, []a]"));
        assert_eq!(out.depth(), p.depth());
        check_proof(&out, &logical()).unwrap();
    }

    #[test]
    fn invert_box_principal_and_or() {
        let p = box_example();
        let out = invert_box(&p, &slot(&[], 1)).unwrap();
        assert_eq!(out.conclusion(), &seq("<>~a, [a]"));
        assert!(out.depth() < p.depth());
        check_proof(&out, &logical()).unwrap();

        let q = or_under_dia();
        let out = invert_or(&q, &slot(&[], 0)).unwrap();
        assert_eq!(out.conclusion(), &seq("a, ~a, <>c, c"));
        check_proof(&out, &logical()).unwrap();
    }

    #[test]
    fn invert_or_through_a_passive_step() {
        // stack ◇t_c under the ∨ proof, then invert the ∨ below it
        let q = or_under_dia();
        let concl = NestedSequent::leaf(vec![
            crate::formula::parse("a | ~a").unwrap(),
            crate::formula::parse("<>c").unwrap(),
        ]);
        let i_dia =
            RuleInstance::base(RuleId::DiaTc, concl, vec![Active::slot(vec![], 1)]).unwrap();
        let p = super::super::rebuild(i_dia, vec![q]).unwrap();
        let sys = System::logical(crate::axioms::T);
        check_proof(&p, &sys).unwrap();

        let out = invert_or(&p, &slot(&[], 0)).unwrap();
        assert_eq!(out.conclusion(), &seq("a, ~a, <>c"));
        assert!(out.depth() <= p.depth());
        check_proof(&out, &sys).unwrap();

        // ◇t_c's inverse is a weakening
        let out2 = invert(&p, RuleId::DiaTc, &slot(&[], 1), 0).unwrap();
        assert_eq!(out2.conclusion(), &seq("a | ~a, <>c, c"));
        check_proof(&out2, &sys).unwrap();
    }

    #[test]
    fn contract_axiom_leaves() {
        // the kept copy carries the witness
        let p = ax(seq("p, p, ~p"), slot(&[], 0), slot(&[], 2));
        let out = contract(&p, &[], &seq("p"), &logical()).unwrap();
        assert_eq!(out.conclusion(), &seq("p, ~p"));
        check_proof(&out, &logical()).unwrap();

        // the dropped copy carries the witness: it must be remapped
        let p = ax(seq("p, p, ~p"), slot(&[], 1), slot(&[], 2));
        let out = contract(&p, &[], &seq("p"), &logical()).unwrap();
        assert_eq!(out.conclusion(), &seq("p, ~p"));
        check_proof(&out, &logical()).unwrap();
    }

    #[test]
    fn contract_through_dia_with_built_in_contraction() {
        // ⊢ ◇a, ◇a, [¬a]  via ◇k_c into the child, then contract the ◇a pair
        let concl = seq("<>a, <>a, [~a]");
        let i = RuleInstance::base(
            RuleId::DiaKc,
            concl,
            vec![Active::slot(vec![], 0), Active::Node(vec![0])],
        )
        .unwrap();
        let prem = i.premises[0].clone();
        let leaf = ax(prem, slot(&[0], 0), slot(&[0], 1));
        let p = Proof::node(i, vec![leaf]);
        check_proof(&p, &logical()).unwrap();

        let out = contract(&p, &[], &seq("<>a"), &logical()).unwrap();
        assert_eq!(out.conclusion(), &seq("<>a, [~a]"));
        assert_eq!(out.depth(), p.depth());
        check_proof(&out, &logical()).unwrap();
    }

    #[test]
    fn contract_paired_conjunction_principal() {
        // ⊢ ¬a, ¬b, a∧b, a∧b  with the ∧ applied to one copy
        let concl = seq("~a, ~b, a & b, a & b");
        let i_and =
            RuleInstance::base(RuleId::And, concl, vec![Active::slot(vec![], 2)]).unwrap();
        let mut subs = Vec::new();
        for (i, prem) in i_and.premises.iter().cloned().enumerate() {
            // prem: [~a, ~b, a_or_b, a∧b]; split the remaining copy
            let i2 =
                RuleInstance::base(RuleId::And, prem, vec![Active::slot(vec![], 3)]).unwrap();
            let mut leaves = Vec::new();
            for (j, prem2) in i2.premises.iter().cloned().enumerate() {
                // prem2: [~a, ~b, x, y] with x from the outer, y from the inner split
                let wx = if i == 0 { 0 } else { 1 };
                let wy = if j == 0 { 0 } else { 1 };
                let (a, b) = if wx == wy { (wx, 2) } else { (wy, 3) };
                leaves.push(ax(prem2, slot(&[], a), slot(&[], b)));
            }
            subs.push(Proof::node(i2, leaves));
        }
        let p = Proof::node(i_and, subs);
        check_proof(&p, &logical()).unwrap();

        let out = contract(&p, &[], &seq("a & b"), &logical()).unwrap();
        assert_eq!(out.conclusion(), &seq("~a, ~b, a & b"));
        assert!(out.depth() <= p.depth());
        check_proof(&out, &logical()).unwrap();
    }

    #[test]
    fn contract_paired_children() {
        // witnesses inside the kept copy
        let p = ax(seq("[a, ~a], [a, ~a]"), slot(&[0], 0), slot(&[0], 1));
        let dup = NestedSequent::new(Vec::new(), vec![seq("a, ~a")]);
        let out = contract(&p, &[], &dup, &logical()).unwrap();
        assert_eq!(out.conclusion(), &seq("[a, ~a]"));
        check_proof(&out, &logical()).unwrap();

        // witnesses inside the dropped copy: mirrored into the kept one
        let p = ax(seq("[a, ~a], [a, ~a]"), slot(&[1], 0), slot(&[1], 1));
        let out = contract(&p, &[], &dup, &logical()).unwrap();
        assert_eq!(out.conclusion(), &seq("[a, ~a]"));
        check_proof(&out, &logical()).unwrap();
    }

    #[test]
    fn contract_principal_inside_paired_child() {
        // ⊢ [a∨¬a], [a∨¬a] with the ∨ applied inside the first copy
        let concl = seq("[a | ~a], [a | ~a]");
        let i_or = RuleInstance::base(RuleId::Or, concl, vec![Active::slot(vec![0], 0)]).unwrap();
        let prem = i_or.premises[0].clone();
        let leaf = ax(prem, slot(&[0], 0), slot(&[0], 1));
        let p = Proof::node(i_or, vec![leaf]);
        check_proof(&p, &logical()).unwrap();

        let dup = NestedSequent::new(Vec::new(), vec![seq("a | ~a")]);
        let out = contract(&p, &[], &dup, &logical()).unwrap();
        assert_eq!(out.conclusion(), &seq("[a | ~a]"));
        assert!(out.depth() <= p.depth());
        check_proof(&out, &logical()).unwrap();
    }

    #[test]
    fn contract_through_a_cut() {
        // cut on b over an axiomatic context holding a duplicate pair
        let concl = seq("p, p, ~p");
        let mut aux = Aux::default();
        aux.formula = Some(crate::formula::parse("b").unwrap());
        let i_cut = RuleInstance::derive(
            RuleId::Cut,
            false,
            concl,
            vec![Active::Node(vec![])],
            aux,
        )
        .unwrap();
        let subs = i_cut
            .premises
            .iter()
            .cloned()
            .map(|prem| ax(prem, slot(&[], 0), slot(&[], 2)))
            .collect();
        let p = Proof::node(i_cut, subs);
        let sys = System::logical(Axioms::EMPTY).plus(RuleId::Cut);
        check_proof(&p, &sys).unwrap();

        let out = contract(&p, &[], &seq("p"), &sys).unwrap();
        assert_eq!(out.conclusion(), &seq("p, ~p"));
        assert_eq!(out.depth(), p.depth());
        check_proof(&out, &sys).unwrap();
    }
}
