//! Enumeration of applicable rule instances on a sequent.
//!
//! All formula-driven rules (the logical rules, every diamond rule) and the
//! parameterless structural rules are enumerated exhaustively. The rules
//! whose active position is an arbitrary sub-multiset of a node ([t], [b],
//! ctr, wk, med) have exponentially many instances and are excluded;
//! callers construct those instances directly.

use crate::formula::Formula;
use crate::sequent::{FormulaSlot, NestedSequent, NodeAddress};

use super::{Active, Aux, RuleId, RuleInstance, System, SystemBase};

fn push_derived(
    out: &mut Vec<RuleInstance>,
    rule: RuleId,
    circle: bool,
    s: &NestedSequent,
    active: Vec<Active>,
) {
    // proviso failures just mean the instance is not applicable here
    if let Ok(inst) = RuleInstance::derive(rule, circle, s.clone(), active, Aux::default()) {
        out.push(inst);
    }
}

/// All instances of the system's rules whose conclusion is `s`, except the
/// sub-multiset-selection rules (see module docs).
pub fn applicable_instances(s: &NestedSequent, system: &System) -> Vec<RuleInstance> {
    let mut out = Vec::new();
    let circle = system.base == SystemBase::LogicalCircle;
    let addrs: Vec<NodeAddress> = s.addresses();

    for addr in &addrs {
        let node = s.node(addr).unwrap();
        // axiom: each complementary literal pair in the node
        for (i, f) in node.formulas.iter().enumerate() {
            if let Formula::Atom { name, negated } = f {
                for (j, g) in node.formulas.iter().enumerate().skip(i + 1) {
                    if matches!(g, Formula::Atom { name: n2, negated: neg2 }
                        if n2 == name && neg2 != negated)
                    {
                        push_derived(
                            &mut out,
                            RuleId::Axiom,
                            false,
                            s,
                            vec![Active::slot(addr.clone(), i), Active::slot(addr.clone(), j)],
                        );
                    }
                }
            }
        }
        for (i, f) in node.formulas.iter().enumerate() {
            let slot = Active::Slot(FormulaSlot::new(addr.clone(), i));
            match f {
                Formula::And(..) => {
                    if system.allows(RuleId::And, circle) {
                        push_derived(&mut out, RuleId::And, circle, s, vec![slot.clone()]);
                    }
                    if system.allows(RuleId::MAnd, false) {
                        push_derived(&mut out, RuleId::MAnd, false, s, vec![slot.clone()]);
                    }
                }
                Formula::Or(..) => {
                    if system.allows(RuleId::Or, circle) {
                        push_derived(&mut out, RuleId::Or, circle, s, vec![slot.clone()]);
                    }
                }
                Formula::Box(..) => {
                    if system.allows(RuleId::Box, circle) {
                        push_derived(&mut out, RuleId::Box, circle, s, vec![slot.clone()]);
                    }
                    if system.allows(RuleId::MBox, false) {
                        push_derived(&mut out, RuleId::MBox, false, s, vec![slot.clone()]);
                    }
                }
                Formula::Dia(..) => {
                    dia_instances(&mut out, s, system, circle, addr, i, &addrs)
                }
                Formula::Atom { .. } => {}
            }
        }
        if system.allows(RuleId::StrD, false) {
            push_derived(&mut out, RuleId::StrD, false, s, vec![Active::Node(addr.clone())]);
        }
        if system.allows(RuleId::Str4, false) && !addr.is_empty() {
            for (g, _) in node.children.iter().enumerate() {
                let mut gaddr = addr.clone();
                gaddr.push(g);
                push_derived(
                    &mut out,
                    RuleId::Str4,
                    false,
                    s,
                    vec![Active::Node(addr.clone()), Active::Node(gaddr)],
                );
            }
        }
        if system.allows(RuleId::Str5, false) && !addr.is_empty() {
            for a1 in &addrs {
                if a1.is_empty() || a1.starts_with(addr) {
                    continue;
                }
                push_derived(
                    &mut out,
                    RuleId::Str5,
                    false,
                    s,
                    vec![Active::Node(a1.clone()), Active::Node(addr.clone())],
                );
            }
        }
    }
    out
}

fn dia_instances(
    out: &mut Vec<RuleInstance>,
    s: &NestedSequent,
    system: &System,
    circle: bool,
    addr: &NodeAddress,
    i: usize,
    addrs: &[NodeAddress],
) {
    let node = s.node(addr).unwrap();
    let slot = Active::Slot(FormulaSlot::new(addr.clone(), i));
    let per_child: &[(RuleId, RuleId)] =
        &[(RuleId::DiaKc, RuleId::DiaK), (RuleId::Dia4c, RuleId::Dia4)];
    for &(rc, rb) in per_child {
        for (rule, circ) in [(rc, circle), (rb, false)] {
            if !system.allows(rule, circ) {
                continue;
            }
            for k in 0..node.children.len() {
                let mut t = addr.clone();
                t.push(k);
                push_derived(out, rule, circ, s, vec![slot.clone(), Active::Node(t)]);
            }
        }
    }
    for (rule, circ) in [
        (RuleId::DiaDc, circle),
        (RuleId::DiaTc, circle),
        (RuleId::DiaBc, circle),
        (RuleId::DiaD, false),
        (RuleId::DiaT, false),
        (RuleId::DiaB, false),
        (RuleId::Dia51, false),
    ] {
        if system.allows(rule, circ) {
            push_derived(out, rule, circ, s, vec![slot.clone()]);
        }
    }
    for (rule, circ) in [(RuleId::Dia5c, circle), (RuleId::Dia5, false)] {
        if !system.allows(rule, circ) || addr.is_empty() {
            continue;
        }
        for t in addrs {
            push_derived(out, rule, circ, s, vec![slot.clone(), Active::Node(t.clone())]);
        }
    }
    if system.allows(RuleId::Dia52, false) && !addr.is_empty() {
        let parent = &addr[..addr.len() - 1];
        for t in addrs {
            if t.len() == addr.len() && t.starts_with(parent) && t != addr {
                push_derived(
                    out,
                    RuleId::Dia52,
                    false,
                    s,
                    vec![slot.clone(), Active::Node(t.clone())],
                );
            }
        }
    }
    if system.allows(RuleId::Dia53, false) && !addr.is_empty() {
        for k in 0..node.children.len() {
            let mut t = addr.clone();
            t.push(k);
            push_derived(out, RuleId::Dia53, false, s, vec![slot.clone(), Active::Node(t)]);
        }
    }
}
