//! Proof-to-proof transformations: admissible structural rules,
//! invertibility, the two cut-elimination procedures, translation between
//! the diamond-rule families, and the Hilbert-system importer.

mod admissible;
mod cutelim_logical;
mod cutelim_structural;
mod diac;
mod hilbert;
mod strmod;
mod translate;

pub use admissible::{contract, contract_at, necessitate, weaken, Duplication};
pub use admissible::{invert, invert_and, invert_box, invert_or};
pub use cutelim_logical::{eliminate_cuts_logical, eliminate_cuts_logical_traced};
pub use cutelim_structural::{eliminate_cuts_structural, eliminate_cuts_structural_traced};
pub use hilbert::{hilbert_from_json, hilbert_to_json, hilbert_to_nested, HilbertStep};
pub use diac::{diamonds_from_contraction, diamonds_to_contraction};
pub use strmod::{eliminate_relocations, eliminate_seriality};
pub use translate::circle_to_base;

use thiserror::Error;

use crate::calculus::{Active, CalcError, Proof, RuleInstance};
use crate::sequent::{FormulaSlot, NestedSequent, NodeAddress, SequentError};

#[derive(Debug, Error)]
pub enum TransformError {
    #[error(transparent)]
    Calc(#[from] CalcError),
    #[error(transparent)]
    Sequent(#[from] SequentError),
    #[error(transparent)]
    Check(#[from] crate::calculus::CheckError),
    #[error("{op} does not support a {rule} step here")]
    Unsupported { rule: &'static str, op: &'static str },
    #[error("{0}")]
    Shape(String),
}

/// One snapshot of a cut-elimination run: the phase that just finished,
/// the proof size after it, and the largest remaining cut rank.
#[derive(Debug, Clone, serde::Serialize)]
pub struct TracePoint {
    pub phase: String,
    pub size: usize,
    pub max_cut_rank: usize,
}

/// Chronological snapshots of a cut-elimination run.
pub type ElimTrace = Vec<TracePoint>;

pub(crate) fn shape<T>(msg: impl Into<String>) -> Result<T, TransformError> {
    Err(TransformError::Shape(msg.into()))
}

pub(crate) fn unsupported<T>(
    rule: crate::calculus::RuleId,
    op: &'static str,
) -> Result<T, TransformError> {
    Err(TransformError::Unsupported { rule: rule.name(), op })
}

/// Structural (ordered) equality of stored sequents, as opposed to the
/// multiset equality of `PartialEq`.
pub(crate) fn struct_eq(a: &NestedSequent, b: &NestedSequent) -> bool {
    a.formulas == b.formulas
        && a.children.len() == b.children.len()
        && a.children.iter().zip(&b.children).all(|(x, y)| struct_eq(x, y))
}

/// Map formula index `i` of node `from` to the matching index in the
/// multiset-equal node `to`: the k-th occurrence of the formula maps to
/// the k-th occurrence.
pub(crate) fn align_findex(from: &NestedSequent, to: &NestedSequent, i: usize) -> Option<usize> {
    let f = from.formulas.get(i)?;
    let k = from.formulas[..i].iter().filter(|g| *g == f).count();
    to.formulas
        .iter()
        .enumerate()
        .filter(|(_, g)| *g == f)
        .nth(k)
        .map(|(j, _)| j)
}

/// Map child index `i` of `from` to the matching child of `to`
/// (k-th multiset-equal child to k-th).
pub(crate) fn align_cindex(from: &NestedSequent, to: &NestedSequent, i: usize) -> Option<usize> {
    let c = from.children.get(i)?;
    let k = from.children[..i].iter().filter(|d| *d == c).count();
    to.children
        .iter()
        .enumerate()
        .filter(|(_, d)| *d == c)
        .nth(k)
        .map(|(j, _)| j)
}

/// Translate a node address valid in `from` into the multiset-equal `to`.
pub(crate) fn align_addr(
    from: &NestedSequent,
    to: &NestedSequent,
    addr: &[usize],
) -> Option<NodeAddress> {
    let mut out = Vec::with_capacity(addr.len());
    let (mut f, mut t) = (from, to);
    for &k in addr {
        let j = align_cindex(f, t, k)?;
        out.push(j);
        f = &f.children[k];
        t = &t.children[j];
    }
    Some(out)
}

pub(crate) fn align_slot(
    from: &NestedSequent,
    to: &NestedSequent,
    slot: &FormulaSlot,
) -> Option<FormulaSlot> {
    let node = align_addr(from, to, &slot.node)?;
    let (f, t) = (from.node(&slot.node).ok()?, to.node(&node).ok()?);
    let index = align_findex(f, t, slot.index)?;
    Some(FormulaSlot::new(node, index))
}

fn align_active(
    from: &NestedSequent,
    to: &NestedSequent,
    a: &Active,
) -> Option<Active> {
    Some(match a {
        Active::Slot(s) => Active::Slot(align_slot(from, to, s)?),
        Active::Node(n) => Active::Node(align_addr(from, to, n)?),
        Active::Pick { node, formulas, children } => {
            let new_node = align_addr(from, to, node)?;
            let (f, t) = (from.node(node).ok()?, to.node(&new_node).ok()?);
            let mut fs = Vec::with_capacity(formulas.len());
            for &i in formulas {
                // occurrence-respecting map keeps distinct picks distinct
                fs.push(align_findex(f, t, i)?);
            }
            let mut ks = Vec::with_capacity(children.len());
            for &i in children {
                ks.push(align_cindex(f, t, i)?);
            }
            Active::Pick { node: new_node, formulas: fs, children: ks }
        }
    })
}

/// Whether every subproof conclusion is stored exactly as its step's
/// computed premise, all the way up.
fn coherent(p: &Proof) -> bool {
    p.subs.len() == p.step.premises.len()
        && p.subs
            .iter()
            .zip(&p.step.premises)
            .all(|(s, w)| struct_eq(s.conclusion(), w) && coherent(s))
}

/// Rewrite a proof so that its conclusion is stored exactly as `target`
/// (which must be multiset-equal) and, recursively, each subproof is
/// stored exactly as the step's recomputed premise. Transformations rely
/// on this layout coherence to move addresses through steps.
pub(crate) fn conform(p: &Proof, target: &NestedSequent) -> Result<Proof, TransformError> {
    if struct_eq(p.conclusion(), target) && coherent(p) {
        return Ok(p.clone());
    }
    conform_subs(p, target.clone())
}

fn conform_subs(p: &Proof, target: NestedSequent) -> Result<Proof, TransformError> {
    let step = &p.step;
    let mut active = Vec::with_capacity(step.active.len());
    for a in &step.active {
        active.push(
            align_active(&step.conclusion, &target, a)
                .ok_or_else(|| TransformError::Shape("conclusion layouts do not align".into()))?,
        );
    }
    let mut aux = step.aux.clone();
    aux.targets = step
        .aux
        .targets
        .iter()
        .map(|t| {
            align_addr(&step.conclusion, &target, t)
                .ok_or_else(|| TransformError::Shape("aux target does not align".into()))
        })
        .collect::<Result<_, _>>()?;
    let inst = RuleInstance::derive(step.rule, step.circle, target, active, aux)?;
    let mut subs = Vec::with_capacity(p.subs.len());
    for (sub, want) in p.subs.iter().zip(&inst.premises) {
        subs.push(conform(sub, want)?);
    }
    if subs.len() != inst.premises.len() {
        return shape(format!("step {} premise count changed", inst.rule.name()));
    }
    Ok(Proof::node(inst, subs))
}

/// Assemble a step whose subproofs are conformed onto the computed
/// premises — the standard way transformations rebuild nodes.
pub(crate) fn rebuild(inst: RuleInstance, subs: Vec<Proof>) -> Result<Proof, TransformError> {
    if subs.len() != inst.premises.len() {
        return shape(format!(
            "rule {} expects {} premises, got {}",
            inst.rule.name(),
            inst.premises.len(),
            subs.len()
        ));
    }
    let subs = inst
        .premises
        .iter()
        .zip(subs)
        .map(|(want, s)| conform(&s, want))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Proof::node(inst, subs))
}

/// Normalize an arbitrary (checker-valid) proof into layout-coherent form.
pub fn normalize(p: &Proof) -> Result<Proof, TransformError> {
    conform(p, &p.conclusion().clone())
}
