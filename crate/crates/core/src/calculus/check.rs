//! Independent proof checking: every step is recomputed from its rule,
//! conclusion and active positions, and compared against what the proof
//! claims.

use thiserror::Error;

use super::{premises_of, CalcError, Proof, RuleId, System};

#[derive(Debug, Error, PartialEq)]
pub enum CheckError {
    #[error("step {path}: rule {rule} is not part of the system")]
    RuleNotInSystem { path: String, rule: &'static str },
    #[error("step {path}: {source}")]
    BadStep {
        path: String,
        #[source]
        source: CalcError,
    },
    #[error("step {path}: rule yields {expected} premises, proof has {got}")]
    PremiseCount { path: String, expected: usize, got: usize },
    #[error("step {path}: premise {index} of the proof does not match the rule")]
    PremiseMismatch { path: String, index: usize },
}

fn path_string(path: &[usize]) -> String {
    if path.is_empty() {
        "root".to_string()
    } else {
        path.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(".")
    }
}

fn check_at(proof: &Proof, system: &System, path: &mut Vec<usize>) -> Result<(), CheckError> {
    let step = &proof.step;
    if !system.allows(step.rule, step.circle) {
        return Err(CheckError::RuleNotInSystem {
            path: path_string(path),
            rule: step.rule.name(),
        });
    }
    let prems = premises_of(step)
        .map_err(|source| CheckError::BadStep { path: path_string(path), source })?;
    if prems.len() != proof.subs.len() {
        return Err(CheckError::PremiseCount {
            path: path_string(path),
            expected: prems.len(),
            got: proof.subs.len(),
        });
    }
    for (i, (want, sub)) in prems.iter().zip(&proof.subs).enumerate() {
        if sub.conclusion() != want {
            return Err(CheckError::PremiseMismatch { path: path_string(path), index: i });
        }
        path.push(i);
        check_at(sub, system, path)?;
        path.pop();
    }
    Ok(())
}

/// Verify a full derivation against a rule system. Leaves must be
/// zero-premise steps (axioms), interior steps must recompute exactly.
pub fn check_proof(proof: &Proof, system: &System) -> Result<(), CheckError> {
    check_at(proof, system, &mut Vec::new())
}

/// The ranks of all cut-family steps, in pre-order.
pub fn cut_ranks(proof: &Proof) -> Vec<usize> {
    let mut out = Vec::new();
    collect_ranks(proof, &mut out);
    out
}

fn collect_ranks(proof: &Proof, out: &mut Vec<usize>) {
    if let Some(r) = proof.step.cut_rank() {
        out.push(r);
    }
    for s in &proof.subs {
        collect_ranks(s, out);
    }
}

/// Largest cut rank in the proof; 0 when the proof is cut-free.
pub fn max_cut_rank(proof: &Proof) -> usize {
    cut_ranks(proof).into_iter().max().unwrap_or(0)
}

/// True when the proof contains no cut-family step.
pub fn is_cut_free(proof: &Proof) -> bool {
    !(proof.uses_rule(RuleId::Cut)
        || proof.uses_rule(RuleId::MCut)
        || proof.uses_rule(RuleId::YCut))
}
