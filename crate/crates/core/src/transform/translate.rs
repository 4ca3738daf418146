//! Translation of proofs in the search-oriented °-variant system into the
//! plain system over the same diamond rules: each °-step keeps its
//! principal formula, so the translation inverts the surviving copy in the
//! premise and contracts the duplicated material away, preserving depth.

use crate::calculus::{Active, Proof, RuleId, RuleInstance};

use super::admissible::{contract_in, invert_in, Duplication, InvKind};
use super::{normalize, rebuild, shape, unsupported, TransformError};

/// Rewrite a °-system proof into one using only the base rules (the
/// diamond rules with built-in contraction are shared by both systems).
pub fn circle_to_base(p: &Proof) -> Result<Proof, TransformError> {
    let p = normalize(p)?;
    let out = circ2base(&p)?;
    debug_assert!(out.depth() <= p.depth());
    Ok(out)
}

fn circ2base(p: &Proof) -> Result<Proof, TransformError> {
    use RuleId::*;
    let step = &p.step;
    let subs = p.subs.iter().map(circ2base).collect::<Result<Vec<_>, _>>()?;
    if !step.circle {
        if p.subs.iter().all(|s| !uses_circle(s)) {
            return Ok(p.clone());
        }
        let inst = RuleInstance::derive(
            step.rule,
            false,
            step.conclusion.clone(),
            step.active.clone(),
            step.aux.clone(),
        )?;
        return rebuild(inst, subs);
    }
    let c = &step.conclusion;
    match step.rule {
        // only the proviso distinguishes these from their base forms
        DiaKc | DiaDc | DiaTc | DiaBc | Dia4c | Dia5c => {
            let inst = RuleInstance::derive(
                step.rule,
                false,
                c.clone(),
                step.active.clone(),
                step.aux.clone(),
            )?;
            rebuild(inst, subs)
        }
        Or => {
            let s = principal(&step.active)?;
            let l0 = c.node(&s.node)?.formulas.len();
            // premise: A∨B kept, A and B appended; invert the kept copy
            let inv = invert_in(&subs[0], s, InvKind::Or)?;
            let d = Duplication {
                node: s.node.clone(),
                fpairs: vec![(s.index, l0), (l0 + 1, l0 + 2)],
                cpairs: Vec::new(),
            };
            let q = contract_in(&inv, &d)?;
            rebuild(RuleInstance::base(Or, c.clone(), step.active.clone())?, vec![q])
        }
        And => {
            let s = principal(&step.active)?;
            let l0 = c.node(&s.node)?.formulas.len();
            let mut outs = Vec::with_capacity(subs.len());
            for (i, sub) in subs.iter().enumerate() {
                let inv = invert_in(sub, s, InvKind::And(i))?;
                let d = Duplication {
                    node: s.node.clone(),
                    fpairs: vec![(s.index, l0)],
                    cpairs: Vec::new(),
                };
                outs.push(contract_in(&inv, &d)?);
            }
            rebuild(RuleInstance::base(And, c.clone(), step.active.clone())?, outs)
        }
        Box => {
            let s = principal(&step.active)?;
            let k0 = c.node(&s.node)?.children.len();
            let inv = invert_in(&subs[0], s, InvKind::Box)?;
            let d = Duplication {
                node: s.node.clone(),
                fpairs: Vec::new(),
                cpairs: vec![(k0, k0 + 1)],
            };
            let q = contract_in(&inv, &d)?;
            rebuild(RuleInstance::base(Box, c.clone(), step.active.clone())?, vec![q])
        }
        r => unsupported(r, "circle translation"),
    }
}

fn uses_circle(p: &Proof) -> bool {
    p.step.circle || p.subs.iter().any(uses_circle)
}

fn principal(active: &[Active]) -> Result<&crate::sequent::FormulaSlot, TransformError> {
    match active.first() {
        Some(Active::Slot(s)) => Ok(s),
        _ => shape("expected a principal formula slot"),
    }
}
