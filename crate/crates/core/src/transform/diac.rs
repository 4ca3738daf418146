//! Conversions between the two diamond-rule families: the
//! contraction-absorbing rules (which keep their principal diamond in the
//! premise) and the plain rules (which consume it, with contraction made
//! explicit below the step).

use crate::calculus::{Active, Proof, RuleId, RuleInstance};
use crate::sequent::NestedSequent;

use super::admissible::weaken_in;
use super::{normalize, rebuild, TransformError};

fn leaf1(f: crate::formula::Formula) -> NestedSequent {
    NestedSequent::leaf(vec![f])
}

/// Rewrite every plain diamond step of `p` as its contraction-absorbing
/// counterpart, weakening the subproof by the kept principal. The five
/// relocation variants of the 5-rule all map onto the general rule with
/// an explicit target node.
pub fn diamonds_to_contraction(p: &Proof) -> Result<Proof, TransformError> {
    let p = normalize(p)?;
    to_c(&p)
}

fn to_c(p: &Proof) -> Result<Proof, TransformError> {
    use RuleId::*;
    let step = &p.step;
    let absorbed = match step.rule {
        DiaK => Some(DiaKc),
        DiaD => Some(DiaDc),
        DiaT => Some(DiaTc),
        DiaB => Some(DiaBc),
        Dia4 => Some(Dia4c),
        Dia5 | Dia51 | Dia52 | Dia53 => Some(Dia5c),
        _ => None,
    };
    let Some(rule) = absorbed else {
        let subs = p.subs.iter().map(to_c).collect::<Result<Vec<_>, _>>()?;
        return rebuild(step.clone(), subs);
    };
    let slot = match step.active.first() {
        Some(Active::Slot(s)) => s.clone(),
        _ => return super::shape("diamond step without a principal slot"),
    };
    let mut active = step.active.clone();
    if step.rule == Dia51 {
        // the parent-directed variant leaves its target implicit
        let Some((_, parent)) = slot.node.split_last() else {
            return super::shape("parent-directed diamond at the root");
        };
        active.push(Active::Node(parent.to_vec()));
    }
    let inst = RuleInstance::base(rule, step.conclusion.clone(), active)?;
    let principal = step.conclusion.formula_at(&slot)?.clone();
    let sub = to_c(&p.subs[0])?;
    let sub = weaken_in(&normalize(&sub)?, &slot.node, &leaf1(principal))?;
    rebuild(inst, vec![sub])
}

/// Rewrite every contraction-absorbing diamond step of `p` as an explicit
/// contraction below the matching plain rule. Targets that the plain
/// family splits by direction are dispatched to the right variant.
pub fn diamonds_from_contraction(p: &Proof) -> Result<Proof, TransformError> {
    let p = normalize(p)?;
    from_c(&p)
}

fn from_c(p: &Proof) -> Result<Proof, TransformError> {
    use RuleId::*;
    let step = &p.step;
    let plain = match step.rule {
        DiaKc => Some(DiaK),
        DiaDc => Some(DiaD),
        DiaTc => Some(DiaT),
        DiaBc => Some(DiaB),
        Dia4c => Some(Dia4),
        Dia5c => Some(Dia5),
        _ => None,
    };
    let Some(rule) = plain else {
        let subs = p.subs.iter().map(from_c).collect::<Result<Vec<_>, _>>()?;
        return rebuild(step.clone(), subs);
    };
    let slot = match step.active.first() {
        Some(Active::Slot(s)) => s.clone(),
        _ => return super::shape("diamond step without a principal slot"),
    };
    // contraction below: duplicate the principal, then consume the copy
    let ctr = RuleInstance::base(
        RuleId::Ctr,
        step.conclusion.clone(),
        vec![Active::Pick {
            node: slot.node.clone(),
            formulas: vec![slot.index],
            children: Vec::new(),
        }],
    )?;
    let mid = ctr.premises[0].clone();
    // the duplicate is grafted at the end of the node's formula list
    let dup_index = mid.node(&slot.node)?.formulas.len() - 1;
    let mut active = vec![Active::slot(slot.node.clone(), dup_index)];
    for extra in step.active.iter().skip(1) {
        active.push(extra.clone());
    }
    let inst = RuleInstance::base(rule, mid, active)?;
    let sub = from_c(&p.subs[0])?;
    let upper = rebuild(inst, vec![sub])?;
    rebuild(ctr, vec![upper])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::axioms::Axioms;
    use crate::calculus::{check_proof, System};
    use crate::search::{prove_formula, LogicSpec, SearchOptions, SearchOutcome};

    fn proved(text: &str, ax: Axioms) -> Proof {
        let f = crate::formula::parse(text).unwrap();
        let spec = LogicSpec::new(ax);
        match prove_formula(&f, &spec, &SearchOptions::default()).unwrap() {
            SearchOutcome::Proved { proof, .. } => proof,
            _ => panic!("expected a proof of {text}"),
        }
    }

    #[test]
    fn round_trip_through_plain_rules() {
        let cases = [
            ("([]p & []q) -> [](p & q)", Axioms::EMPTY),
            ("[]p -> <>p", Axioms::EMPTY.with(crate::axioms::D)),
            ("[]p -> p", Axioms::EMPTY.with(crate::axioms::T)),
            ("p -> []<>p", Axioms::EMPTY.with(crate::axioms::B)),
            ("[]p -> [][]p", Axioms::EMPTY.with(crate::axioms::FOUR)),
            ("<>p -> []<>p", Axioms::EMPTY.with(crate::axioms::FIVE).with(crate::axioms::FOUR)),
        ];
        for (text, ax) in cases {
            let p = proved(text, ax);
            check_proof(&p, &System::logical(ax)).unwrap();
            let q = diamonds_from_contraction(&p).unwrap();
            let plain = System::logical(ax)
                .plus(RuleId::Ctr)
                .plus(RuleId::DiaK)
                .plus(RuleId::DiaD)
                .plus(RuleId::DiaT)
                .plus(RuleId::DiaB)
                .plus(RuleId::Dia4)
                .plus(RuleId::Dia5);
            check_proof(&q, &plain).unwrap();
            let r = diamonds_to_contraction(&q).unwrap();
            check_proof(&r, &System::logical(ax).plus(RuleId::Ctr)).unwrap();
            assert_eq!(r.conclusion(), p.conclusion());
        }
    }
}
