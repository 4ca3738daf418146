//! Premise computation for every rule, plus the position maps that proof
//! transformations use to relocate addresses and slots from a conclusion
//! into a premise.

use crate::axioms::{self, Axioms};
use crate::formula::{negate, Formula};
use crate::sequent::{FormulaSlot, NestedSequent, NodeAddress};

use super::{malformed, proviso, Active, CalcError, RuleId, RuleInstance};

fn one_slot<'a>(inst: &'a RuleInstance) -> Result<&'a FormulaSlot, CalcError> {
    match inst.active.as_slice() {
        [Active::Slot(s)] => Ok(s),
        _ => malformed(inst.rule, "expected one formula slot"),
    }
}

fn slot_and_node<'a>(
    inst: &'a RuleInstance,
) -> Result<(&'a FormulaSlot, &'a NodeAddress), CalcError> {
    match inst.active.as_slice() {
        [Active::Slot(s), Active::Node(t)] => Ok((s, t)),
        _ => malformed(inst.rule, "expected a formula slot and a node"),
    }
}

fn two_nodes<'a>(
    inst: &'a RuleInstance,
) -> Result<(&'a NodeAddress, &'a NodeAddress), CalcError> {
    match inst.active.as_slice() {
        [Active::Node(a), Active::Node(b)] => Ok((a, b)),
        _ => malformed(inst.rule, "expected two node addresses"),
    }
}

fn is_child_of(parent: &[usize], t: &[usize]) -> bool {
    t.len() == parent.len() + 1 && t.starts_with(parent)
}

fn expect_dia(rule: RuleId, f: &Formula) -> Result<Formula, CalcError> {
    match f {
        Formula::Dia(a) => Ok((**a).clone()),
        _ => malformed(rule, format!("active formula {f} is not a diamond")),
    }
}

fn expect_box(rule: RuleId, f: &Formula) -> Result<Formula, CalcError> {
    match f {
        Formula::Box(a) => Ok((**a).clone()),
        _ => malformed(rule, format!("active formula {f} is not a box")),
    }
}

fn add_formula(s: &NestedSequent, node: &[usize], f: Formula) -> Result<NestedSequent, CalcError> {
    let mut out = s.clone();
    out.node_mut(node)?.formulas.push(f);
    Ok(out)
}

fn add_child(
    s: &NestedSequent,
    node: &[usize],
    child: NestedSequent,
) -> Result<NestedSequent, CalcError> {
    let mut out = s.clone();
    out.node_mut(node)?.children.push(child);
    Ok(out)
}

fn replace_formula(
    s: &NestedSequent,
    slot: &FormulaSlot,
    f: Formula,
) -> Result<NestedSequent, CalcError> {
    let mut out = s.clone();
    let n = out.node_mut(&slot.node)?;
    if slot.index >= n.formulas.len() {
        return Err(crate::sequent::SequentError::BadSlot(slot.node.clone(), slot.index).into());
    }
    n.formulas[slot.index] = f;
    Ok(out)
}

fn remove_formula(s: &NestedSequent, slot: &FormulaSlot) -> Result<NestedSequent, CalcError> {
    let mut out = s.clone();
    let n = out.node_mut(&slot.node)?;
    if slot.index >= n.formulas.len() {
        return Err(crate::sequent::SequentError::BadSlot(slot.node.clone(), slot.index).into());
    }
    n.formulas.remove(slot.index);
    Ok(out)
}

/// Split a picked sub-multiset out of a node: returns (remaining tree with
/// picked items removed at `node`, the picked items as a sequent).
fn take_pick(
    s: &NestedSequent,
    rule: RuleId,
    node: &[usize],
    formulas: &[usize],
    children: &[usize],
) -> Result<(NestedSequent, NestedSequent), CalcError> {
    let mut out = s.clone();
    let n = out.node_mut(node)?;
    let mut picked = NestedSequent::default();
    let mut fs: Vec<usize> = formulas.to_vec();
    fs.sort_unstable();
    fs.dedup();
    if fs.len() != formulas.len() {
        return malformed(rule, "duplicate formula indices in pick");
    }
    for &i in &fs {
        match n.formulas.get(i) {
            Some(f) => picked.formulas.push(f.clone()),
            None => return malformed(rule, format!("formula index {i} out of range")),
        }
    }
    for &i in fs.iter().rev() {
        n.formulas.remove(i);
    }
    let mut ks: Vec<usize> = children.to_vec();
    ks.sort_unstable();
    ks.dedup();
    if ks.len() != children.len() {
        return malformed(rule, "duplicate child indices in pick");
    }
    for &i in &ks {
        if i >= n.children.len() {
            return malformed(rule, format!("child index {i} out of range"));
        }
    }
    for &i in ks.iter().rev() {
        picked.children.push(n.children.remove(i));
    }
    picked.children.reverse();
    Ok((out, picked))
}

/// Detach the subtree at child address `c` (`c` must be non-root), returning
/// the remaining tree and the detached subtree.
fn detach_child(
    s: &NestedSequent,
    rule: RuleId,
    c: &[usize],
) -> Result<(NestedSequent, NestedSequent), CalcError> {
    let Some((&last, parent)) = c.split_last() else {
        return malformed(rule, "child address must not be the root");
    };
    let mut out = s.clone();
    let p = out.node_mut(parent)?;
    if last >= p.children.len() {
        return Err(crate::sequent::SequentError::BadAddress(c.to_vec()).into());
    }
    let sub = p.children.remove(last);
    Ok((out, sub))
}

/// Address adjustment after detaching child `c`: where does conclusion
/// address `a` live in the detached tree? Errors if `a` is inside `c`.
fn adjust_after_detach(
    rule: RuleId,
    c: &[usize],
    a: &[usize],
) -> Result<NodeAddress, CalcError> {
    if a.starts_with(c) {
        return malformed(rule, "address lies inside the moved subtree");
    }
    let mut out = a.to_vec();
    let (last, parent) = c.split_last().unwrap();
    if a.len() > parent.len() && a.starts_with(parent) && a[parent.len()] > *last {
        out[parent.len()] -= 1;
    }
    Ok(out)
}

/// The °-proviso shared by all °-rules: every premise's set sequent must
/// differ from the conclusion's.
fn check_circle_proviso(inst: &RuleInstance, premises: &[NestedSequent]) -> Result<(), CalcError> {
    if inst.circle {
        let c = inst.conclusion.set_sequent();
        for p in premises {
            if p.set_sequent() == c {
                return proviso(inst.rule, "premise set sequent equals conclusion's");
            }
        }
    }
    Ok(())
}

/// Recompute the premises of `inst` from its rule, conclusion and active
/// positions, validating all shapes and provisos.
pub fn premises_of(inst: &RuleInstance) -> Result<Vec<NestedSequent>, CalcError> {
    use RuleId::*;
    let c = &inst.conclusion;
    let prems: Vec<NestedSequent> = match inst.rule {
        Axiom => {
            let (s1, s2) = match inst.active.as_slice() {
                [Active::Slot(a), Active::Slot(b)] => (a, b),
                _ => return malformed(Axiom, "expected two formula slots"),
            };
            if s1.node != s2.node {
                return malformed(Axiom, "witness literals must share a node");
            }
            let f1 = c.formula_at(s1)?;
            let f2 = c.formula_at(s2)?;
            match (f1, f2) {
                (
                    Formula::Atom { name: n1, negated: neg1 },
                    Formula::Atom { name: n2, negated: neg2 },
                ) if n1 == n2 && *neg1 != *neg2 => Vec::new(),
                _ => return malformed(Axiom, "witnesses are not complementary literals"),
            }
        }
        And => {
            let s = one_slot(inst)?;
            let (a, b) = match c.formula_at(s)? {
                Formula::And(a, b) => ((**a).clone(), (**b).clone()),
                f => return malformed(And, format!("{f} is not a conjunction")),
            };
            if inst.circle {
                vec![add_formula(c, &s.node, a)?, add_formula(c, &s.node, b)?]
            } else {
                vec![replace_formula(c, s, a)?, replace_formula(c, s, b)?]
            }
        }
        Or => {
            let s = one_slot(inst)?;
            let (a, b) = match c.formula_at(s)? {
                Formula::Or(a, b) => ((**a).clone(), (**b).clone()),
                f => return malformed(Or, format!("{f} is not a disjunction")),
            };
            if inst.circle {
                vec![add_formula(&add_formula(c, &s.node, a)?, &s.node, b)?]
            } else {
                vec![add_formula(&replace_formula(c, s, a)?, &s.node, b)?]
            }
        }
        Box => {
            let s = one_slot(inst)?;
            let a = expect_box(Box, c.formula_at(s)?)?;
            if inst.circle {
                // □°: the node must not already have a child containing A
                let node = c.node(&s.node)?;
                if node.children.iter().any(|k| k.formulas.contains(&a)) {
                    return proviso(Box, "a child already contains the box body");
                }
                vec![add_child(c, &s.node, NestedSequent::singleton(a))?]
            } else {
                vec![add_child(&remove_formula(c, s)?, &s.node, NestedSequent::singleton(a))?]
            }
        }
        DiaKc => {
            let (s, t) = slot_and_node(inst)?;
            let a = expect_dia(DiaKc, c.formula_at(s)?)?;
            if !is_child_of(&s.node, t) {
                return malformed(DiaKc, "target must be a child of the diamond's node");
            }
            vec![add_formula(c, t, a)?]
        }
        DiaDc => {
            let s = one_slot(inst)?;
            let a = expect_dia(DiaDc, c.formula_at(s)?)?;
            if inst.circle && !c.node(&s.node)?.children.is_empty() {
                return proviso(DiaDc, "node already has a child");
            }
            vec![add_child(c, &s.node, NestedSequent::singleton(a))?]
        }
        DiaTc => {
            let s = one_slot(inst)?;
            let a = expect_dia(DiaTc, c.formula_at(s)?)?;
            vec![add_formula(c, &s.node, a)?]
        }
        DiaBc => {
            let s = one_slot(inst)?;
            let a = expect_dia(DiaBc, c.formula_at(s)?)?;
            let Some((_, parent)) = s.node.split_last() else {
                return proviso(DiaBc, "active formula must sit below the root");
            };
            vec![add_formula(c, parent, a)?]
        }
        Dia4c => {
            let (s, t) = slot_and_node(inst)?;
            let f = c.formula_at(s)?.clone();
            expect_dia(Dia4c, &f)?;
            if !is_child_of(&s.node, t) {
                return malformed(Dia4c, "target must be a child of the diamond's node");
            }
            vec![add_formula(c, t, f)?]
        }
        Dia5c => {
            let (s, t) = slot_and_node(inst)?;
            let f = c.formula_at(s)?.clone();
            expect_dia(Dia5c, &f)?;
            if s.node.is_empty() {
                return proviso(Dia5c, "source must sit below the root (depth > 0)");
            }
            vec![add_formula(c, t, f)?]
        }
        DiaK => {
            let (s, t) = slot_and_node(inst)?;
            let a = expect_dia(DiaK, c.formula_at(s)?)?;
            if !is_child_of(&s.node, t) {
                return malformed(DiaK, "target must be a child of the diamond's node");
            }
            vec![add_formula(&remove_formula(c, s)?, t, a)?]
        }
        DiaD => {
            let s = one_slot(inst)?;
            let a = expect_dia(DiaD, c.formula_at(s)?)?;
            vec![add_child(&remove_formula(c, s)?, &s.node, NestedSequent::singleton(a))?]
        }
        DiaT => {
            let s = one_slot(inst)?;
            let a = expect_dia(DiaT, c.formula_at(s)?)?;
            vec![replace_formula(c, s, a)?]
        }
        DiaB => {
            let s = one_slot(inst)?;
            let a = expect_dia(DiaB, c.formula_at(s)?)?;
            let Some((_, parent)) = s.node.split_last() else {
                return proviso(DiaB, "active formula must sit below the root");
            };
            let parent = parent.to_vec();
            vec![add_formula(&remove_formula(c, s)?, &parent, a)?]
        }
        Dia4 | Dia53 => {
            let (s, t) = slot_and_node(inst)?;
            let f = c.formula_at(s)?.clone();
            expect_dia(inst.rule, &f)?;
            if !is_child_of(&s.node, t) {
                return malformed(inst.rule, "target must be a child of the diamond's node");
            }
            if inst.rule == Dia53 && s.node.is_empty() {
                return proviso(Dia53, "active formula must sit below the root");
            }
            vec![add_formula(&remove_formula(c, s)?, t, f)?]
        }
        Dia5 => {
            let (s, t) = slot_and_node(inst)?;
            let f = c.formula_at(s)?.clone();
            expect_dia(Dia5, &f)?;
            if s.node.is_empty() {
                return proviso(Dia5, "source must sit below the root (depth > 0)");
            }
            vec![add_formula(&remove_formula(c, s)?, t, f)?]
        }
        Dia51 => {
            let s = one_slot(inst)?;
            let f = c.formula_at(s)?.clone();
            expect_dia(Dia51, &f)?;
            let Some((_, parent)) = s.node.split_last() else {
                return proviso(Dia51, "active formula must sit below the root");
            };
            let parent = parent.to_vec();
            vec![add_formula(&remove_formula(c, s)?, &parent, f)?]
        }
        Dia52 => {
            let (s, t) = slot_and_node(inst)?;
            let f = c.formula_at(s)?.clone();
            expect_dia(Dia52, &f)?;
            if s.node.is_empty() || t.is_empty() {
                return malformed(Dia52, "both nodes must sit below the root");
            }
            if s.node[..s.node.len() - 1] != t[..t.len() - 1] || s.node == *t {
                return malformed(Dia52, "target must be a distinct sibling");
            }
            vec![add_formula(&remove_formula(c, s)?, t, f)?]
        }
        StrD => {
            let a = match inst.active.as_slice() {
                [Active::Node(a)] => a,
                _ => return malformed(StrD, "expected one node address"),
            };
            vec![add_child(c, a, NestedSequent::default())?]
        }
        StrT => {
            let (node, fs, ks) = match inst.active.as_slice() {
                [Active::Pick { node, formulas, children }] => (node, formulas, children),
                _ => return malformed(StrT, "expected one pick"),
            };
            let (mut rest, picked) = take_pick(c, StrT, node, fs, ks)?;
            rest.node_mut(node)?.children.push(picked);
            vec![rest]
        }
        StrB => {
            let (d, node, fs, ks) = match inst.active.as_slice() {
                [Active::Node(d), Active::Pick { node, formulas, children }] => {
                    (d, node, formulas, children)
                }
                _ => return malformed(StrB, "expected a node and a pick"),
            };
            let Some((&last, parent)) = d.split_last() else {
                return malformed(StrB, "boxed node must not be the root");
            };
            if parent != &node[..] {
                return malformed(StrB, "pick must be at the parent of the boxed node");
            }
            if ks.contains(&last) {
                return malformed(StrB, "pick must not contain the boxed node itself");
            }
            let (mut rest, picked) = take_pick(c, StrB, node, fs, ks)?;
            let new_last = last - ks.iter().filter(|&&k| k < last).count();
            let mut target = node.clone();
            target.push(new_last);
            rest.node_mut(&target)?.children.push(picked);
            vec![rest]
        }
        Str4 => {
            let (caddr, gaddr) = two_nodes(inst)?;
            if !is_child_of(caddr, gaddr) {
                return malformed(Str4, "second node must be a child of the first");
            }
            if caddr.is_empty() {
                return malformed(Str4, "first node must not be the root");
            }
            let (rest, mut mid) = detach_child(c, Str4, caddr)?;
            let g = gaddr[caddr.len()];
            let delta = mid.children.remove(g);
            let parent = &caddr[..caddr.len() - 1];
            let mut out = rest;
            out.node_mut(parent)?.children.push(delta);
            out.node_mut(parent)?.children.push(mid);
            vec![out]
        }
        Str5 | YStr => {
            let (a1, caddr) = two_nodes(inst)?;
            if caddr.is_empty() {
                return malformed(inst.rule, "moved box must not be the root");
            }
            let hole2 = &caddr[..caddr.len() - 1];
            match inst.rule {
                Str5 => {
                    if a1.is_empty() {
                        return proviso(Str5, "first hole must sit below the root (depth > 0)");
                    }
                }
                YStr => {
                    let y = inst.aux.y;
                    if !axioms::FOUR.with(axioms::FIVE).contains(y) {
                        return malformed(YStr, "Y must be a subset of {4,5}");
                    }
                    let ok = if y == Axioms::EMPTY {
                        a1 == hole2
                    } else if y == axioms::FOUR {
                        a1.starts_with(hole2)
                    } else if y == axioms::FIVE {
                        !a1.is_empty()
                    } else {
                        true
                    };
                    if !ok {
                        return proviso(YStr, format!("context shape not reachable in Y={y}"));
                    }
                }
                _ => unreachable!(),
            }
            let (rest, sub) = detach_child(c, inst.rule, caddr)?;
            let a1 = adjust_after_detach(inst.rule, caddr, a1)?;
            vec![add_child(&rest, &a1, sub)?]
        }
        Ctr => {
            let (node, fs, ks) = match inst.active.as_slice() {
                [Active::Pick { node, formulas, children }] => (node, formulas, children),
                _ => return malformed(Ctr, "expected one pick"),
            };
            let (_, picked) = take_pick(c, Ctr, node, fs, ks)?;
            vec![c.graft(node, &picked)?]
        }
        Wk => {
            let (node, fs, ks) = match inst.active.as_slice() {
                [Active::Pick { node, formulas, children }] => (node, formulas, children),
                _ => return malformed(Wk, "expected one pick"),
            };
            let (rest, _) = take_pick(c, Wk, node, fs, ks)?;
            vec![rest]
        }
        Nec => {
            if !inst.active.is_empty() {
                return malformed(Nec, "takes no active positions");
            }
            if !c.formulas.is_empty() || c.children.len() != 1 {
                return malformed(Nec, "conclusion must be a single boxed sequent");
            }
            vec![c.children[0].clone()]
        }
        Cut | MCut => {
            let a = match inst.active.as_slice() {
                [Active::Node(a)] => a,
                _ => return malformed(inst.rule, "expected one node address"),
            };
            let Some(f) = inst.aux.formula.clone() else {
                return malformed(inst.rule, "missing cut formula");
            };
            let (m, n) = if inst.rule == Cut { (1, 1) } else { (inst.aux.m, inst.aux.n) };
            if m == 0 || n == 0 {
                return malformed(MCut, "multiplicities must be at least 1");
            }
            let mut p1 = c.clone();
            let mut p2 = c.clone();
            for _ in 0..m {
                p1.node_mut(a)?.formulas.push(f.clone());
            }
            let nf = negate(&f);
            for _ in 0..n {
                p2.node_mut(a)?.formulas.push(nf.clone());
            }
            vec![p1, p2]
        }
        YCut => {
            let a = match inst.active.as_slice() {
                [Active::Node(a)] => a,
                _ => return malformed(YCut, "expected one node address"),
            };
            let Some(f) = inst.aux.formula.clone() else {
                return malformed(YCut, "missing cut formula");
            };
            if !ycut_proviso_holds(inst) {
                return proviso(YCut, format!("holes not reachable in Y={}", inst.aux.y));
            }
            let p1 = add_formula(c, a, Formula::boxed(f.clone()))?;
            let dia = Formula::dia(negate(&f));
            let mut p2 = add_formula(c, a, dia.clone())?;
            for t in &inst.aux.targets {
                p2 = add_formula(&p2, t, dia.clone())?;
            }
            vec![p1, p2]
        }
        Fctr => {
            let s = one_slot(inst)?;
            let f = c.formula_at(s)?.clone();
            vec![add_formula(c, &s.node, f)?]
        }
        Med => {
            let (caddr, node, fs, ks) = match inst.active.as_slice() {
                [Active::Node(d), Active::Pick { node, formulas, children }] => {
                    (d, node, formulas, children)
                }
                _ => return malformed(Med, "expected a node and a pick"),
            };
            if caddr != node {
                return malformed(Med, "pick must be inside the split node");
            }
            if caddr.is_empty() {
                return malformed(Med, "split node must not be the root");
            }
            let (rest, picked) = take_pick(c, Med, caddr, fs, ks)?;
            let (rest, remainder) = detach_child(&rest, Med, caddr)?;
            let parent = &caddr[..caddr.len() - 1];
            let mut out = rest;
            out.node_mut(parent)?.children.push(picked);
            out.node_mut(parent)?.children.push(remainder);
            vec![out]
        }
        MBox => {
            let s = one_slot(inst)?;
            let a = expect_box(MBox, c.formula_at(s)?)?;
            let m = inst.aux.m.max(1);
            let child = NestedSequent::leaf(vec![a; m]);
            vec![add_child(&remove_formula(c, s)?, &s.node, child)?]
        }
        MAnd => {
            let s = one_slot(inst)?;
            let (a, b) = match c.formula_at(s)? {
                Formula::And(a, b) => ((**a).clone(), (**b).clone()),
                f => return malformed(MAnd, format!("{f} is not a conjunction")),
            };
            let m = inst.aux.m.max(1);
            let n = inst.aux.n.max(1);
            let mut p1 = replace_formula(c, s, a.clone())?;
            for _ in 1..m {
                p1.node_mut(&s.node)?.formulas.push(a.clone());
            }
            let mut p2 = replace_formula(c, s, b.clone())?;
            for _ in 1..n {
                p2.node_mut(&s.node)?.formulas.push(b.clone());
            }
            vec![p1, p2]
        }
    };
    check_circle_proviso(inst, &prems)?;
    Ok(prems)
}

/// The context-shape characterization of the ycut proviso.
pub fn ycut_proviso_holds(inst: &RuleInstance) -> bool {
    let a = match inst.active.as_slice() {
        [Active::Node(a)] => a,
        _ => return false,
    };
    let y = inst.aux.y;
    if !axioms::FOUR.with(axioms::FIVE).contains(y) {
        return false;
    }
    if y == Axioms::EMPTY {
        inst.aux.targets.is_empty()
    } else if y == axioms::FOUR {
        inst.aux.targets.iter().all(|t| t.starts_with(a))
    } else if y == axioms::FIVE {
        inst.aux.targets.is_empty() || !a.is_empty()
    } else {
        true
    }
}

/// Where the conclusion node `addr` lives in premise `idx`.
/// `None` means the node has no counterpart (it was split or removed).
pub fn premise_node_addr(inst: &RuleInstance, idx: usize, addr: &[usize]) -> Option<NodeAddress> {
    use RuleId::*;
    match inst.rule {
        // rules that only add/replace formulas or append fresh children
        Axiom | And | Or | Box | DiaKc | DiaDc | DiaTc | DiaBc | Dia4c | Dia5c | DiaK | DiaD
        | DiaT | DiaB | Dia4 | Dia5 | Dia51 | Dia52 | Dia53 | StrD | Ctr | Cut | MCut | YCut
        | Fctr | MBox | MAnd => Some(addr.to_vec()),
        Wk => {
            let [Active::Pick { node, children, .. }] = inst.active.as_slice() else {
                return None;
            };
            if addr.len() > node.len() && addr.starts_with(node) {
                let k = addr[node.len()];
                if children.contains(&k) {
                    return None; // weakened away
                }
                let mut out = addr.to_vec();
                out[node.len()] = k - children.iter().filter(|&&j| j < k).count();
                Some(out)
            } else {
                Some(addr.to_vec())
            }
        }
        Nec => {
            let _ = idx;
            addr.split_first().map(|(_, rest)| rest.to_vec())
        }
        StrT => {
            let [Active::Pick { node, children, .. }] = inst.active.as_slice() else {
                return None;
            };
            if addr.len() > node.len() && addr.starts_with(node) {
                let k = addr[node.len()];
                let kept_before = (0..k).filter(|j| !children.contains(j)).count();
                let mut out = addr.to_vec();
                if children.contains(&k) {
                    // moved into the appended box
                    let boxed_idx = inst.conclusion.node(node).ok()?.children.len()
                        - children.len();
                    let pos = children.iter().filter(|&&j| j < k).count();
                    out.truncate(node.len());
                    out.push(boxed_idx);
                    out.push(pos);
                    out.extend_from_slice(&addr[node.len() + 1..]);
                } else {
                    out[node.len()] = kept_before;
                }
                Some(out)
            } else {
                Some(addr.to_vec())
            }
        }
        StrB => {
            let [Active::Node(d), Active::Pick { node, children, .. }] = inst.active.as_slice()
            else {
                return None;
            };
            let d_last = *d.last()?;
            let remap_child = |k: usize| -> usize { k - children.iter().filter(|&&j| j < k).count() };
            if addr.len() > node.len() && addr.starts_with(node) {
                let k = addr[node.len()];
                let mut out = addr.to_vec();
                if children.contains(&k) {
                    // moved under d into the appended box
                    let d_new = remap_child(d_last);
                    let box_idx = inst.conclusion.node(d).ok()?.children.len();
                    let pos = children.iter().filter(|&&j| j < k).count();
                    out.truncate(node.len());
                    out.push(d_new);
                    out.push(box_idx);
                    out.push(pos);
                    out.extend_from_slice(&addr[node.len() + 1..]);
                } else {
                    out[node.len()] = remap_child(k);
                }
                Some(out)
            } else {
                Some(addr.to_vec())
            }
        }
        Str4 => {
            let [Active::Node(caddr), Active::Node(gaddr)] = inst.active.as_slice() else {
                return None;
            };
            let parent = &caddr[..caddr.len() - 1];
            let c_last = *caddr.last()?;
            let g = gaddr[caddr.len()];
            let siblings = inst.conclusion.node(parent).ok()?.children.len();
            let delta_idx = siblings - 1; // after removing c, delta appended
            let sigma_idx = siblings;
            if addr.starts_with(gaddr) {
                let mut out = parent.to_vec();
                out.push(delta_idx);
                out.extend_from_slice(&addr[gaddr.len()..]);
                Some(out)
            } else if addr.starts_with(caddr) {
                let mut out = parent.to_vec();
                out.push(sigma_idx);
                if addr.len() > caddr.len() {
                    let k = addr[caddr.len()];
                    out.push(if k > g { k - 1 } else { k });
                    out.extend_from_slice(&addr[caddr.len() + 1..]);
                }
                Some(out)
            } else if addr.len() > parent.len() && addr.starts_with(parent) {
                let k = addr[parent.len()];
                let mut out = addr.to_vec();
                if k > c_last {
                    out[parent.len()] = k - 1;
                }
                Some(out)
            } else {
                Some(addr.to_vec())
            }
        }
        Str5 | YStr => {
            let [Active::Node(a1), Active::Node(caddr)] = inst.active.as_slice() else {
                return None;
            };
            if addr.starts_with(caddr) {
                // moved under a1
                let a1_adj = adjust_after_detach(inst.rule, caddr, a1).ok()?;
                let new_idx = {
                    let mut rest = inst.conclusion.clone();
                    let (r, _) = detach_child(&rest, inst.rule, caddr).ok()?;
                    rest = r;
                    rest.node(&a1_adj).ok()?.children.len()
                };
                let mut out = a1_adj;
                out.push(new_idx);
                out.extend_from_slice(&addr[caddr.len()..]);
                Some(out)
            } else {
                adjust_after_detach(inst.rule, caddr, addr).ok()
            }
        }
        Med => {
            let [Active::Node(caddr), Active::Pick { children, .. }] = inst.active.as_slice()
            else {
                return None;
            };
            let parent = &caddr[..caddr.len() - 1];
            let c_last = *caddr.last()?;
            let siblings = inst.conclusion.node(parent).ok()?.children.len();
            let picked_idx = siblings - 1;
            let rest_idx = siblings;
            if addr == caddr {
                None // the node is split in two
            } else if addr.starts_with(caddr) {
                let k = addr[caddr.len()];
                let mut out = parent.to_vec();
                if children.contains(&k) {
                    out.push(picked_idx);
                    out.push(children.iter().filter(|&&j| j < k).count());
                } else {
                    out.push(rest_idx);
                    out.push(k - children.iter().filter(|&&j| j < k).count());
                }
                out.extend_from_slice(&addr[caddr.len() + 1..]);
                Some(out)
            } else if addr.len() > parent.len() && addr.starts_with(parent) {
                let k = addr[parent.len()];
                let mut out = addr.to_vec();
                if k > c_last {
                    out[parent.len()] = k - 1;
                }
                Some(out)
            } else {
                Some(addr.to_vec())
            }
        }
    }
}

/// Where a passive formula occurrence of the conclusion lives in premise
/// `idx`. `None` for the rule's own principal occurrence (or if the node
/// vanished).
pub fn premise_slot(inst: &RuleInstance, idx: usize, slot: &FormulaSlot) -> Option<FormulaSlot> {
    use RuleId::*;
    // a consumed or rewritten principal slot is not mapped; the rules with
    // built-in contraction (and fctr) keep theirs
    let principal: Option<&FormulaSlot> = match inst.active.first() {
        Some(Active::Slot(s)) => Some(s),
        _ => None,
    };
    let principal_consumed = match inst.rule {
        And | Or | Box => !inst.circle,
        DiaK | DiaD | DiaT | DiaB | Dia4 | Dia5 | Dia51 | Dia52 | Dia53 | MBox | MAnd => true,
        _ => false,
    };
    if let Some(p) = principal {
        if p == slot && principal_consumed {
            return None;
        }
    }
    let node = premise_node_addr(inst, idx, &slot.node)?;
    // index shifts caused by in-node removals
    let removed_at: Option<usize> = match inst.rule {
        Box if !inst.circle => principal.filter(|p| p.node == slot.node).map(|p| p.index),
        DiaK | DiaD | DiaB | Dia4 | Dia5 | Dia51 | Dia52 | Dia53 | MBox => {
            principal.filter(|p| p.node == slot.node).map(|p| p.index)
        }
        _ => None,
    };
    let mut index = slot.index;
    if let Some(r) = removed_at {
        if index > r {
            index -= 1;
        }
    }
    match inst.rule {
        Wk | StrT | Ctr => {
            if let [Active::Pick { node: pn, formulas, .. }] = inst.active.as_slice() {
                if *pn == slot.node {
                    match inst.rule {
                        Wk => {
                            if formulas.contains(&slot.index) {
                                return None;
                            }
                            index =
                                slot.index - formulas.iter().filter(|&&j| j < slot.index).count();
                        }
                        StrT => {
                            if formulas.contains(&slot.index) {
                                // moved into the box: recompute node via pick
                                let boxed_idx = inst.conclusion.node(pn).ok()?.children.len();
                                // children picked were removed; boxed child appended last
                                let [Active::Pick { children, .. }] = inst.active.as_slice()
                                else {
                                    return None;
                                };
                                let mut n = pn.clone();
                                n.push(boxed_idx - children.len());
                                let pos =
                                    formulas.iter().filter(|&&j| j < slot.index).count();
                                return Some(FormulaSlot::new(n, pos));
                            }
                            index =
                                slot.index - formulas.iter().filter(|&&j| j < slot.index).count();
                        }
                        Ctr => {}
                        _ => unreachable!(),
                    }
                }
            }
        }
        StrB => {
            if let [Active::Node(d), Active::Pick { node: pn, formulas, children }] =
                inst.active.as_slice()
            {
                if *pn == slot.node && formulas.contains(&slot.index) {
                    let d_last = *d.last()?;
                    let d_new = d_last - children.iter().filter(|&&j| j < d_last).count();
                    let box_idx = inst.conclusion.node(d).ok()?.children.len();
                    let mut n = pn.clone();
                    n.push(d_new);
                    n.push(box_idx);
                    let pos = formulas.iter().filter(|&&j| j < slot.index).count();
                    return Some(FormulaSlot::new(n, pos));
                }
                if *pn == slot.node {
                    index = slot.index - formulas.iter().filter(|&&j| j < slot.index).count();
                }
            }
        }
        Med => {
            if let [Active::Node(caddr), Active::Pick { formulas, .. }] = inst.active.as_slice() {
                if *caddr == slot.node {
                    // node itself splits: formulas go to picked/rest box
                    let parent = &caddr[..caddr.len() - 1];
                    let siblings = inst.conclusion.node(parent).ok()?.children.len();
                    let mut n = parent.to_vec();
                    if formulas.contains(&slot.index) {
                        n.push(siblings - 1);
                        let pos = formulas.iter().filter(|&&j| j < slot.index).count();
                        return Some(FormulaSlot::new(n, pos));
                    }
                    n.push(siblings);
                    let pos = slot.index - formulas.iter().filter(|&&j| j < slot.index).count();
                    return Some(FormulaSlot::new(n, pos));
                }
            }
        }
        _ => {}
    }
    Some(FormulaSlot::new(node, index))
}
