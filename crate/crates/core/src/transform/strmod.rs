//! Elimination of the structural relocation rules from proofs built over
//! the contraction-absorbing diamond rules.
//!
//! A relocation step ([t], [b], [4], [5]) at the bottom of a proof is
//! pushed upward through the step above it: the upper rule is re-derived
//! directly on the relocation's conclusion (possibly mutating into a
//! different diamond rule, or into a short chain of diamond steps), and
//! the relocation reappears above each premise where the recursion
//! continues, until it dissolves at the axioms. The same machinery backs
//! `move_child`, the derived box-relocation that the cut-reduction
//! argument uses, and the elimination of the seriality rule [d] from
//! cut-free proofs.

use crate::axioms::{self, Axioms};
use crate::calculus::{premise_node_addr, premise_slot, Active, Proof, RuleId, RuleInstance};
use crate::formula::Formula;
use crate::sequent::{FormulaSlot, NestedSequent, NodeAddress};

use super::admissible::{contract_in, weaken_in};
use super::{conform, normalize, rebuild, shape, Duplication, TransformError};

fn leaf1(f: Formula) -> NestedSequent {
    NestedSequent::leaf(vec![f])
}

fn child_addr(a: &[usize], k: usize) -> NodeAddress {
    let mut v = a.to_vec();
    v.push(k);
    v
}

fn is_child_of(parent: &[usize], t: &[usize]) -> bool {
    t.len() == parent.len() + 1 && t.starts_with(parent)
}

fn add_child(
    s: &NestedSequent,
    node: &[usize],
    child: NestedSequent,
) -> Result<NestedSequent, TransformError> {
    let mut out = s.clone();
    out.node_mut(node)?.children.push(child);
    Ok(out)
}

fn detach(
    s: &NestedSequent,
    addr: &[usize],
) -> Result<(NestedSequent, NestedSequent), TransformError> {
    let Some((last, parent)) = addr.split_last() else {
        return shape("cannot detach the root");
    };
    let mut out = s.clone();
    let n = out.node_mut(parent)?;
    if *last >= n.children.len() {
        return shape("no child at the detach address");
    }
    let child = n.children.remove(*last);
    Ok((out, child))
}

/// Translate an address valid in `s` into the tree with the child at
/// `removed` detached (errors if it lies inside the detached subtree).
fn shift_for_detach(a: &[usize], removed: &[usize]) -> Result<NodeAddress, TransformError> {
    if a.starts_with(removed) {
        return shape("address lies inside the detached subtree");
    }
    let mut out = a.to_vec();
    let pl = removed.len() - 1;
    if a.len() > pl && a[..pl] == removed[..pl] && a[pl] > removed[pl] {
        out[pl] -= 1;
    }
    Ok(out)
}

pub(crate) fn axiom_step(c: &NestedSequent) -> Result<RuleInstance, TransformError> {
    crate::search::axiom_instance(c)
        .ok_or_else(|| TransformError::Shape("expected an axiomatic sequent".into()))
}

fn req(x: Axioms, bit: Axioms, what: &str) -> Result<(), TransformError> {
    if x.contains(bit) {
        Ok(())
    } else {
        shape(format!("{what} needs an axiom outside the chosen logic"))
    }
}

// ---------------------------------------------------------------------------
// Position maps from a relocation's premise back into its conclusion
// ---------------------------------------------------------------------------

/// Where a premise node of a relocation step comes from: an existing
/// conclusion node, or the box the step creates (whose contents live at
/// the returned host node of the conclusion).
enum Down {
    At(NodeAddress),
    Made(NodeAddress),
}

fn down_node(inst: &RuleInstance, u: &[usize]) -> Result<Down, TransformError> {
    for a in inst.conclusion.addresses() {
        if premise_node_addr(inst, 0, &a).as_deref() == Some(u) {
            return Ok(Down::At(a));
        }
    }
    let host = match (inst.rule, inst.active.as_slice()) {
        (RuleId::StrT, [Active::Pick { node, .. }]) => node.clone(),
        (RuleId::StrB, [_, Active::Pick { node, .. }]) => node.clone(),
        (RuleId::StrD, [Active::Node(a)]) => a.clone(),
        _ => return shape("premise node does not map into the conclusion"),
    };
    Ok(Down::Made(host))
}

fn down_slot(inst: &RuleInstance, s: &FormulaSlot) -> Result<FormulaSlot, TransformError> {
    for a in inst.conclusion.addresses() {
        let n = inst.conclusion.node(&a)?;
        for i in 0..n.formulas.len() {
            let t = FormulaSlot::new(a.clone(), i);
            if premise_slot(inst, 0, &t).as_ref() == Some(s) {
                return Ok(t);
            }
        }
    }
    shape("premise slot does not map into the conclusion")
}

// ---------------------------------------------------------------------------
// Pushing one relocation step upward
// ---------------------------------------------------------------------------

/// Given a relocation instance ([t]/[b]/[4]/[5]) and a relocation-free
/// proof of its premise, produce a relocation-free proof of its
/// conclusion. Cut steps are crossed untouched, so cut ranks are
/// preserved.
pub(crate) fn push_up(
    inst: &RuleInstance,
    sub: &Proof,
    x: Axioms,
) -> Result<Proof, TransformError> {
    use RuleId::*;
    let c = &inst.conclusion;
    match sub.step.rule {
        Axiom => rebuild(axiom_step(c)?, Vec::new()),
        And | Or | Box | DiaDc | StrD | Cut => push_direct(inst, sub, x),
        DiaKc | DiaTc | DiaBc | Dia4c | Dia5c => push_place(inst, sub, x),
        r => super::unsupported(r, "structural-rule elimination"),
    }
}

#[derive(Clone, Copy)]
enum Carry {
    Formula,
    Child,
}

/// Rules whose action maps onto the relocation's conclusion verbatim:
/// re-derive the rule below, re-derive the relocation above each premise.
fn push_direct(rho: &RuleInstance, sub: &Proof, x: Axioms) -> Result<Proof, TransformError> {
    use RuleId::*;
    let c = &rho.conclusion;
    let step = &sub.step;
    let mut host_carry: Vec<Vec<Carry>> = vec![Vec::new(); step.premises.len()];
    let active = match (step.rule, step.active.as_slice()) {
        (And | Or | Box | DiaDc, [Active::Slot(s)]) => {
            if step.rule == DiaDc {
                if let Down::Made(_) = down_node(rho, &s.node)? {
                    host_carry[0].push(Carry::Child);
                }
            }
            vec![Active::Slot(down_slot(rho, s)?)]
        }
        (StrD, [Active::Node(a)]) => match down_node(rho, a)? {
            Down::At(a2) => vec![Active::Node(a2)],
            Down::Made(host) => {
                host_carry[0].push(Carry::Child);
                vec![Active::Node(host)]
            }
        },
        (Cut, [Active::Node(a)]) => match down_node(rho, a)? {
            Down::At(a2) => vec![Active::Node(a2)],
            Down::Made(host) => {
                host_carry[0].push(Carry::Formula);
                host_carry[1].push(Carry::Formula);
                vec![Active::Node(host)]
            }
        },
        _ => return shape("unexpected active shape under a relocation step"),
    };
    let sig = RuleInstance::derive(step.rule, false, c.clone(), active, step.aux.clone())?;
    let mut out = Vec::with_capacity(sig.premises.len());
    for (i, sub_i) in sub.subs.iter().enumerate() {
        let rho_i = lift_relocation(rho, &sig, i, &host_carry[i])?;
        if rho_i.premises[0] != *sub_i.conclusion() {
            return shape("relocation step does not commute with the rule above it");
        }
        let s = conform(sub_i, &rho_i.premises[0])?;
        out.push(push_up(&rho_i, &s, x)?);
    }
    rebuild(sig, out)
}

/// Re-derive the relocation step on top of premise `i` of `sig`, mapping
/// its actives through the rule's position maps; `carries` lists payloads
/// that `sig` appended at the relocation's host node and that must join
/// the pick (they originated inside the created box).
fn lift_relocation(
    rho: &RuleInstance,
    sig: &RuleInstance,
    i: usize,
    carries: &[Carry],
) -> Result<RuleInstance, TransformError> {
    let q = &sig.premises[i];
    let missing = || TransformError::Shape("active position lost across the rule above".into());
    let mut active = Vec::with_capacity(rho.active.len());
    let mut has_pick = false;
    for a in &rho.active {
        active.push(match a {
            Active::Node(n) => Active::Node(premise_node_addr(sig, i, n).ok_or_else(missing)?),
            Active::Slot(_) => return shape("unexpected slot in a relocation step"),
            Active::Pick { node, formulas, children } => {
                has_pick = true;
                let node2 = premise_node_addr(sig, i, node).ok_or_else(missing)?;
                let cn = rho.conclusion.node(node)?;
                let qn = q.node(&node2)?;
                let mut fs = Vec::new();
                let mut ks = Vec::new();
                for &f in formulas {
                    let slot = FormulaSlot::new(node.clone(), f);
                    match premise_slot(sig, i, &slot) {
                        Some(s2) => {
                            if s2.node != node2 {
                                return shape("picked formula left its node");
                            }
                            fs.push(s2.index);
                        }
                        // the principal of `sig` sat inside the pick
                        None => match sig.rule {
                            RuleId::And => fs.push(f),
                            RuleId::Or => {
                                fs.push(f);
                                fs.push(cn.formulas.len());
                            }
                            RuleId::Box => ks.push(cn.children.len()),
                            r => return super::unsupported(r, "pick adjustment"),
                        },
                    }
                }
                for &k in children {
                    let a2 = premise_node_addr(sig, i, &child_addr(node, k))
                        .ok_or_else(missing)?;
                    if !is_child_of(&node2, &a2) {
                        return shape("picked child left its node");
                    }
                    ks.push(*a2.last().unwrap());
                }
                for carry in carries {
                    match carry {
                        Carry::Formula => fs.push(qn.formulas.len() - 1),
                        Carry::Child => ks.push(qn.children.len() - 1),
                    }
                }
                Active::Pick { node: node2, formulas: fs, children: ks }
            }
        });
    }
    if !carries.is_empty() && !has_pick {
        return shape("payload landed in a box no pick accounts for");
    }
    Ok(RuleInstance::derive(rho.rule, false, q.clone(), active, rho.aux.clone())?)
}

// ---------------------------------------------------------------------------
// Diamond steps whose payload position moves: rebuild them as a chain
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, PartialEq)]
enum Payload {
    Body,
    Copy,
}

enum Plan {
    Contract,
    Chain(ChainBuilder),
}

struct ChainBuilder {
    cur: NestedSequent,
    below: Vec<RuleInstance>,
    extras: Vec<(NodeAddress, Formula)>,
}

impl ChainBuilder {
    fn new(c: &NestedSequent) -> Self {
        ChainBuilder { cur: c.clone(), below: Vec::new(), extras: Vec::new() }
    }

    fn push(&mut self, rule: RuleId, active: Vec<Active>) -> Result<(), TransformError> {
        let inst = RuleInstance::base(rule, self.cur.clone(), active)?;
        self.cur = inst.premises[0].clone();
        self.below.push(inst);
        Ok(())
    }

    /// Place a copy of the diamond at `src` onto node `v`; returns the
    /// copy's slot and records it among the extras to weaken away.
    fn copy_to(
        &mut self,
        src: &FormulaSlot,
        v: &[usize],
        x: Axioms,
    ) -> Result<FormulaSlot, TransformError> {
        let dia = self.cur.formula_at(src)?.clone();
        if is_child_of(&src.node, v) {
            req(x, axioms::FOUR, "a downward diamond copy")?;
            let idx = self.cur.node(v)?.formulas.len();
            self.push(RuleId::Dia4c, vec![Active::Slot(src.clone()), Active::Node(v.to_vec())])?;
            self.extras.push((v.to_vec(), dia));
            return Ok(FormulaSlot::new(v.to_vec(), idx));
        }
        if !src.node.is_empty() && x.contains(axioms::FIVE) {
            let idx = self.cur.node(v)?.formulas.len();
            self.push(RuleId::Dia5c, vec![Active::Slot(src.clone()), Active::Node(v.to_vec())])?;
            self.extras.push((v.to_vec(), dia));
            return Ok(FormulaSlot::new(v.to_vec(), idx));
        }
        if x.contains(axioms::FOUR) && v.len() > src.node.len() && v.starts_with(&src.node) {
            // hop the copy down the path one level at a time
            let mut cur = src.clone();
            for d in src.node.len() + 1..=v.len() {
                let t = v[..d].to_vec();
                let idx = self.cur.node(&t)?.formulas.len();
                self.push(RuleId::Dia4c, vec![Active::Slot(cur), Active::Node(t.clone())])?;
                self.extras.push((t.clone(), dia.clone()));
                cur = FormulaSlot::new(t, idx);
            }
            return Ok(cur);
        }
        shape("no diamond rule of the logic reaches the required node")
    }
}

/// A relocation step whose immediate upper rule is a diamond step: map
/// the principal down, find where the payload must land, and realize the
/// step as a chain of available diamond rules (or a contraction).
fn push_place(rho: &RuleInstance, sub: &Proof, x: Axioms) -> Result<Proof, TransformError> {
    use RuleId::*;
    let c = &rho.conclusion;
    let step = &sub.step;
    let (s_p, t_p) = match step.active.as_slice() {
        [Active::Slot(s)] => (s, None),
        [Active::Slot(s), Active::Node(t)] => (s, Some(t)),
        _ => return shape("unexpected diamond actives"),
    };
    let s_c = down_slot(rho, s_p)?;
    let dia = c.formula_at(&s_c)?.clone();
    let body = match &dia {
        Formula::Dia(a) => (**a).clone(),
        f => return shape(format!("{f} is not a diamond")),
    };
    let (payload, w_p): (Payload, NodeAddress) = match step.rule {
        DiaKc => (Payload::Body, t_p.ok_or_else(|| TransformError::Shape("missing target".into()))?.clone()),
        DiaTc => (Payload::Body, s_p.node.clone()),
        DiaBc => {
            let Some((_, parent)) = s_p.node.split_last() else {
                return shape("backward diamond at the root");
            };
            (Payload::Body, parent.to_vec())
        }
        Dia4c | Dia5c => {
            (Payload::Copy, t_p.ok_or_else(|| TransformError::Shape("missing target".into()))?.clone())
        }
        _ => unreachable!(),
    };
    let (w, in_pick) = match down_node(rho, &w_p)? {
        Down::At(a) => (a, false),
        Down::Made(h) => (h, true),
    };

    let plan = match payload {
        Payload::Copy => {
            if w == s_c.node {
                Plan::Contract
            } else {
                let mut b = ChainBuilder::new(c);
                b.copy_to(&s_c, &w, x)?;
                b.extras.pop();
                Plan::Chain(b)
            }
        }
        Payload::Body => {
            let mut b = ChainBuilder::new(c);
            if w == s_c.node {
                req(x, axioms::T, "a body at the diamond's own node")?;
                b.push(DiaTc, vec![Active::Slot(s_c.clone())])?;
            } else if s_c.node.split_last().map(|(_, p)| p) == Some(&w[..]) {
                req(x, axioms::B, "a body at the parent node")?;
                b.push(DiaBc, vec![Active::Slot(s_c.clone())])?;
            } else if is_child_of(&s_c.node, &w) {
                b.push(DiaKc, vec![Active::Slot(s_c.clone()), Active::Node(w.clone())])?;
            } else if let Some((_, wp)) = w.split_last().map(|(l, p)| (l, p.to_vec())) {
                // route a copy next to the node and feed the body in
                let vslot = b.copy_to(&s_c, &wp, x)?;
                b.push(DiaKc, vec![Active::Slot(vslot), Active::Node(w.clone())])?;
            } else if x.contains(axioms::T) {
                // the body must reach the root: park a copy there first
                let vslot = b.copy_to(&s_c, &[], x)?;
                b.push(DiaTc, vec![Active::Slot(vslot)])?;
            } else if x.contains(axioms::B) && !s_c.node.is_empty() {
                let v = vec![s_c.node[0]];
                let vslot = b.copy_to(&s_c, &v, x)?;
                b.push(DiaBc, vec![Active::Slot(vslot)])?;
            } else {
                return shape("no diamond rule of the logic reaches the root");
            }
            Plan::Chain(b)
        }
    };

    let pay_f = match payload {
        Payload::Body => body,
        Payload::Copy => dia,
    };
    let pay_idx = c.node(&w)?.formulas.len();
    let c1 = c.graft(&w, &leaf1(pay_f))?;
    let mut active = rho.active.clone();
    if in_pick {
        for a in &mut active {
            if let Active::Pick { node, formulas, .. } = a {
                if *node == w {
                    formulas.push(pay_idx);
                }
            }
        }
    }
    let rho1 = RuleInstance::derive(rho.rule, false, c1, active, rho.aux.clone())?;
    if rho1.premises[0] != *sub.subs[0].conclusion() {
        return shape("relocation step does not commute with the diamond step above it");
    }
    let r = push_up(&rho1, &conform(&sub.subs[0], &rho1.premises[0])?, x)?;
    match plan {
        Plan::Contract => contract_in(
            &r,
            &Duplication {
                node: s_c.node.clone(),
                fpairs: vec![(s_c.index, pay_idx)],
                cpairs: Vec::new(),
            },
        ),
        Plan::Chain(b) => {
            let mut p = r;
            for (addr, f) in &b.extras {
                p = weaken_in(&p, addr, &leaf1(f.clone()))?;
            }
            for inst in b.below.into_iter().rev() {
                p = rebuild(inst, vec![p])?;
            }
            Ok(p)
        }
    }
}

// ---------------------------------------------------------------------------
// Whole-proof entry points
// ---------------------------------------------------------------------------

/// Remove every [t]/[b]/[4]/[5] step (and instances of the combined
/// relocation rule) from a proof over the contraction-absorbing system,
/// preserving cut ranks. `x` must contain every axiom whose diamond rule
/// the rewrites need; a 45-closed logic always suffices for its own
/// proofs.
pub fn eliminate_relocations(p: &Proof, x: Axioms) -> Result<Proof, TransformError> {
    let p = normalize(p)?;
    elim(&p, x)
}

fn elim(p: &Proof, x: Axioms) -> Result<Proof, TransformError> {
    use RuleId::*;
    let subs = p.subs.iter().map(|s| elim(s, x)).collect::<Result<Vec<_>, _>>()?;
    match p.step.rule {
        StrT | StrB | Str4 | Str5 => {
            let inst = p.step.clone();
            let sub = conform(&subs[0], &inst.premises[0])?;
            push_up(&inst, &sub, x)
        }
        YStr => {
            let inst = &p.step;
            let [Active::Node(a1), Active::Node(caddr)] = inst.active.as_slice() else {
                return shape("unexpected relocation actives");
            };
            let prem = &inst.premises[0];
            let a1p = shift_for_detach(a1, caddr)?;
            let src =
                child_addr(&a1p, prem.node(&a1p)?.children.len().checked_sub(1).ok_or_else(
                    || TransformError::Shape("relocation premise without the moved box".into()),
                )?);
            let dst = caddr[..caddr.len() - 1].to_vec();
            let sub = conform(&subs[0], prem)?;
            move_child(&sub, &src, &dst, x)
        }
        _ => rebuild(p.step.clone(), subs),
    }
}

/// Derived box relocation: from a proof of a sequent with a box child at
/// `src`, produce a relocation-free proof of the sequent with that child
/// re-attached as the last child of node `dst`, using the diamond rules
/// of the logic. Requires either the 4-axiom (for moves deeper along the
/// same branch) or the 5-axiom with a non-root source.
pub(crate) fn move_child(
    r: &Proof,
    src: &[usize],
    dst: &[usize],
    x: Axioms,
) -> Result<Proof, TransformError> {
    let s0 = r.conclusion().clone();
    let Some((_, parent)) = src.split_last() else {
        return shape("the moved box must not be the root");
    };
    if dst.starts_with(src) {
        return shape("cannot move a box into itself");
    }
    if dst == parent {
        return Ok(r.clone());
    }
    if !parent.is_empty() && x.contains(axioms::FIVE) {
        let (rest, bx) = detach(&s0, src)?;
        let dst2 = shift_for_detach(dst, src)?;
        let box_idx = rest.node(&dst2)?.children.len();
        let c = add_child(&rest, &dst2, bx)?;
        let caddr = child_addr(&dst2, box_idx);
        let inst = RuleInstance::base(
            RuleId::Str5,
            c,
            vec![Active::Node(parent.to_vec()), Active::Node(caddr)],
        )?;
        if inst.premises[0] != s0 {
            return shape("box relocation premise mismatch");
        }
        return push_up(&inst, &conform(r, &inst.premises[0])?, x);
    }
    if x.contains(axioms::FOUR) && dst.len() > parent.len() && dst.starts_with(parent) {
        let mut proof = r.clone();
        let mut src = src.to_vec();
        let mut dst = dst.to_vec();
        loop {
            let parent = src[..src.len() - 1].to_vec();
            if dst == parent {
                return Ok(proof);
            }
            let mut comp = dst[parent.len()];
            if comp > *src.last().unwrap() {
                comp -= 1;
            }
            let s_cur = proof.conclusion().clone();
            let (rest, bx) = detach(&s_cur, &src)?;
            let cnode = child_addr(&parent, comp);
            let box_idx = rest.node(&cnode)?.children.len();
            let c = add_child(&rest, &cnode, bx)?;
            let gaddr = child_addr(&cnode, box_idx);
            let inst = RuleInstance::base(
                RuleId::Str4,
                c,
                vec![Active::Node(cnode.clone()), Active::Node(gaddr.clone())],
            )?;
            if inst.premises[0] != s_cur {
                return shape("box relocation premise mismatch");
            }
            proof = push_up(&inst, &conform(&proof, &inst.premises[0])?, x)?;
            let tail = dst[parent.len() + 1..].to_vec();
            src = gaddr;
            dst = cnode;
            dst.extend(tail);
        }
    }
    shape("the logic has no rule moving a box to the required node")
}

// ---------------------------------------------------------------------------
// Seriality: turning the unfolded [d] steps back into diamond steps
// ---------------------------------------------------------------------------

/// Rewrite every seriality diamond step as an explicit [d] step feeding a
/// plain forward step into the fresh child.
pub(crate) fn unfold_seriality(p: &Proof) -> Result<Proof, TransformError> {
    let p = normalize(p)?;
    unfold_d(&p)
}

fn unfold_d(p: &Proof) -> Result<Proof, TransformError> {
    let subs = p.subs.iter().map(unfold_d).collect::<Result<Vec<_>, _>>()?;
    if p.step.rule != RuleId::DiaDc {
        return rebuild(p.step.clone(), subs);
    }
    let slot = match p.step.active.as_slice() {
        [Active::Slot(s)] => s.clone(),
        _ => return shape("unexpected diamond actives"),
    };
    let c = p.step.conclusion.clone();
    let strd = RuleInstance::base(RuleId::StrD, c.clone(), vec![Active::Node(slot.node.clone())])?;
    let mid = strd.premises[0].clone();
    let e = child_addr(&slot.node, mid.node(&slot.node)?.children.len() - 1);
    let kc = RuleInstance::base(
        RuleId::DiaKc,
        mid,
        vec![Active::Slot(slot), Active::Node(e)],
    )?;
    let upper = rebuild(kc, subs)?;
    rebuild(strd, vec![upper])
}

/// Remove every [d] step from a cut-free proof over the
/// contraction-absorbing system, turning forward steps into the fresh
/// empty child back into seriality diamond steps.
pub fn eliminate_seriality(p: &Proof, x: Axioms) -> Result<Proof, TransformError> {
    let p = normalize(p)?;
    elim_d(&p, x)
}

fn elim_d(p: &Proof, x: Axioms) -> Result<Proof, TransformError> {
    let subs = p.subs.iter().map(|s| elim_d(s, x)).collect::<Result<Vec<_>, _>>()?;
    if p.step.rule != RuleId::StrD {
        return rebuild(p.step.clone(), subs);
    }
    let inst = p.step.clone();
    let sub = conform(&subs[0], &inst.premises[0])?;
    push_up_strd(&inst, &sub, x)
}

fn push_up_strd(inst: &RuleInstance, sub: &Proof, x: Axioms) -> Result<Proof, TransformError> {
    use RuleId::*;
    let c = &inst.conclusion;
    let a = match inst.active.as_slice() {
        [Active::Node(a)] => a.clone(),
        _ => return shape("unexpected [d] actives"),
    };
    let e = child_addr(&a, c.node(&a)?.children.len());
    let step = &sub.step;
    if step.rule == Axiom {
        return rebuild(axiom_step(c)?, Vec::new());
    }
    // a forward step into the fresh empty child collapses into a
    // seriality (or longer) diamond chain without the [d] step
    let target_is_e = |t: &Option<&NodeAddress>| t.map(|t| *t == e).unwrap_or(false);
    let (slot, target) = match step.active.as_slice() {
        [Active::Slot(s)] => (Some(s), None),
        [Active::Slot(s), Active::Node(t)] => (Some(s), Some(t)),
        _ => (None, None),
    };
    if step.rule == DiaKc && target_is_e(&target) {
        req(x, axioms::D, "a seriality step")?;
        let s = slot.unwrap().clone();
        let dd = RuleInstance::base(DiaDc, c.clone(), vec![Active::Slot(s)])?;
        if dd.premises[0] != *sub.subs[0].conclusion() {
            return shape("seriality rewrite premise mismatch");
        }
        return rebuild(dd, vec![sub.subs[0].clone()]);
    }
    if step.rule == Dia4c && target_is_e(&target) {
        req(x, axioms::D, "a seriality step")?;
        let s = slot.unwrap().clone();
        let dia = c.formula_at(&s)?.clone();
        let body = match &dia {
            Formula::Dia(b) => (**b).clone(),
            f => return shape(format!("{f} is not a diamond")),
        };
        let dd = RuleInstance::base(DiaDc, c.clone(), vec![Active::Slot(s.clone())])?;
        let m1 = dd.premises[0].clone();
        let fresh = child_addr(&a, m1.node(&a)?.children.len() - 1);
        let d4 = RuleInstance::base(
            Dia4c,
            m1,
            vec![Active::Slot(s), Active::Node(fresh.clone())],
        )?;
        let r = weaken_in(&sub.subs[0], &e, &leaf1(body))?;
        return rebuild(dd, vec![rebuild(d4, vec![r])?]);
    }
    if step.rule == Dia5c && target_is_e(&target) {
        req(x, axioms::D, "a seriality step")?;
        req(x, axioms::FIVE, "a sideways diamond copy")?;
        let s = slot.unwrap().clone();
        let dia = c.formula_at(&s)?.clone();
        let body = match &dia {
            Formula::Dia(b) => (**b).clone(),
            f => return shape(format!("{f} is not a diamond")),
        };
        let d5a = RuleInstance::base(
            Dia5c,
            c.clone(),
            vec![Active::Slot(s.clone()), Active::Node(a.clone())],
        )?;
        let m1 = d5a.premises[0].clone();
        let copy_idx = m1.node(&a)?.formulas.len() - 1;
        let dd = RuleInstance::base(
            DiaDc,
            m1,
            vec![Active::Slot(FormulaSlot::new(a.clone(), copy_idx))],
        )?;
        let m2 = dd.premises[0].clone();
        let fresh = child_addr(&a, m2.node(&a)?.children.len() - 1);
        let d5b = RuleInstance::base(
            Dia5c,
            m2,
            vec![Active::Slot(s), Active::Node(fresh.clone())],
        )?;
        let r = weaken_in(&sub.subs[0], &a, &leaf1(dia))?;
        let r = weaken_in(&r, &e, &leaf1(body))?;
        return rebuild(d5a, vec![rebuild(dd, vec![rebuild(d5b, vec![r])?])?]);
    }
    // any step not touching the empty child commutes verbatim
    let touches_e = step.active.iter().any(|act| match act {
        Active::Slot(s) => s.node == e,
        Active::Node(n) => *n == e,
        Active::Pick { node, .. } => *node == e,
    }) || step.aux.targets.iter().any(|t| *t == e);
    if touches_e {
        return super::unsupported(step.rule, "seriality elimination");
    }
    let sig =
        RuleInstance::derive(step.rule, false, c.clone(), step.active.clone(), step.aux.clone())?;
    let mut out = Vec::with_capacity(sig.premises.len());
    for (i, q) in sig.premises.iter().enumerate() {
        let d_i = RuleInstance::base(RuleId::StrD, q.clone(), vec![Active::Node(a.clone())])?;
        if d_i.premises[0] != *sub.subs[i].conclusion() {
            return shape("[d] step does not commute with the rule above it");
        }
        let s = conform(&sub.subs[i], &d_i.premises[0])?;
        out.push(push_up_strd(&d_i, &s, x)?);
    }
    rebuild(sig, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::{check_proof, Proof, RuleId, System};
    use crate::search::{prove, LogicSpec, SearchOptions, SearchOutcome};
    use crate::sequent::parse_sequent;

    fn proved(s: &NestedSequent, x: Axioms) -> Proof {
        match prove(s, &LogicSpec::new(x), &SearchOptions::default()).unwrap() {
            SearchOutcome::Proved { proof, .. } => proof,
            _ => panic!("expected a proof of {s}"),
        }
    }

    #[test]
    fn reflexive_relocation_dissolves_at_an_axiom() {
        let c = parse_sequent("q, ~q, r").unwrap();
        // pick index of r under the canonical formula order
        let ridx = c.formulas.iter().position(|f| f.to_string() == "r").unwrap();
        let inst = RuleInstance::base(
            RuleId::StrT,
            c.clone(),
            vec![Active::Pick { node: vec![], formulas: vec![ridx], children: vec![] }],
        )
        .unwrap();
        let sub = rebuild(axiom_step(&inst.premises[0]).unwrap(), vec![]).unwrap();
        let x = Axioms::EMPTY.with(axioms::T);
        let out = push_up(&inst, &sub, x).unwrap();
        check_proof(&out, &System::logical(x)).unwrap();
        assert_eq!(out.conclusion(), &c);
    }

    #[test]
    fn transitive_relocation_crosses_a_forward_step() {
        let x = Axioms::EMPTY.with(axioms::FOUR);
        let c = parse_sequent("<>~p, [[p]]").unwrap();
        let inst = RuleInstance::base(
            RuleId::Str4,
            c.clone(),
            vec![Active::Node(vec![0]), Active::Node(vec![0, 0])],
        )
        .unwrap();
        let sub = proved(&inst.premises[0], x);
        let sub = conform(&sub, &inst.premises[0]).unwrap();
        let out = push_up(&inst, &sub, x).unwrap();
        check_proof(&out, &System::logical(x)).unwrap();
        assert_eq!(out.conclusion(), &c);
    }

    #[test]
    fn move_child_along_a_branch() {
        let x = Axioms::EMPTY.with(axioms::FOUR);
        let s = parse_sequent("<>~p, [p], [q, ~q]").unwrap();
        let r = normalize(&proved(&s, x)).unwrap();
        // relocate whichever box holds the complementary pair
        let src = (0..2)
            .find(|&i| s.children[i].formulas.len() == 2)
            .unwrap();
        let dst = vec![1 - src];
        let out = move_child(&r, &[src], &dst, x).unwrap();
        check_proof(&out, &System::logical(x)).unwrap();
        let expect = {
            let (rest, bx) = detach(&s, &[src]).unwrap();
            add_child(&rest, &[0], bx).unwrap()
        };
        assert_eq!(out.conclusion(), &expect);
    }

    #[test]
    fn move_child_sideways() {
        let x = Axioms::EMPTY.with(axioms::FIVE);
        let s = parse_sequent("[p, ~p, [q, ~q]], [r]").unwrap();
        let r = rebuild(axiom_step(&s).unwrap(), vec![]).unwrap();
        let out = move_child(&r, &[0, 0], &[1], x).unwrap();
        check_proof(&out, &System::logical(x)).unwrap();
    }

    #[test]
    fn seriality_round_trip() {
        let x = Axioms::EMPTY.with(axioms::D);
        let s = parse_sequent("<>p, <>~p").unwrap();
        let p = proved(&s, x);
        let q = unfold_seriality(&p).unwrap();
        assert!(!q.uses_rule(RuleId::DiaDc));
        check_proof(&q, &System::logical(x).plus(RuleId::StrD)).unwrap();
        let r = eliminate_seriality(&q, x).unwrap();
        assert!(!r.uses_rule(RuleId::StrD));
        check_proof(&r, &System::logical(x)).unwrap();
        assert_eq!(r.conclusion(), &s);
    }
}
