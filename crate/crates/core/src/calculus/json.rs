//! The on-disk proof format shared by the prover, the transformations and
//! the command line:
//!
//! ```text
//! {"concl": <sequent>, "rule": <name>, "active": [<position>...],
//!  "prems": [<proof>...]}
//! ```
//!
//! Positions are `{"node":[...], "idx":n}` (a formula slot),
//! `{"node":[...]}` (a node), or `{"node":[...], "fs":[...], "kids":[...]}`
//! (a sub-multiset pick). Steps of °-systems carry `"circle": true`; the
//! parameters of cut-family and multi-rules sit in optional fields
//! (`formula`, `m`, `n`, `y`, `targets`).

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::axioms::Axioms;
use crate::formula;
use crate::sequent::{FormulaSlot, NestedSequent, NodeAddress};

use super::{Active, Aux, Proof, RuleId, RuleInstance};

#[derive(Serialize, Deserialize)]
struct PosJson {
    node: NodeAddress,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    idx: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    fs: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    kids: Option<Vec<usize>>,
}

#[derive(Serialize, Deserialize)]
struct StepJson {
    concl: NestedSequent,
    rule: String,
    active: Vec<PosJson>,
    #[serde(skip_serializing_if = "std::ops::Not::not", default)]
    circle: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    formula: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    m: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    y: Option<Axioms>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    targets: Option<Vec<NodeAddress>>,
    prems: Vec<StepJson>,
}

fn active_to_json(a: &Active) -> PosJson {
    match a {
        Active::Slot(s) => {
            PosJson { node: s.node.clone(), idx: Some(s.index), fs: None, kids: None }
        }
        Active::Node(n) => PosJson { node: n.clone(), idx: None, fs: None, kids: None },
        Active::Pick { node, formulas, children } => PosJson {
            node: node.clone(),
            idx: None,
            fs: Some(formulas.clone()),
            kids: Some(children.clone()),
        },
    }
}

fn active_from_json(p: PosJson) -> Active {
    match (p.idx, p.fs, p.kids) {
        (Some(idx), _, _) => Active::Slot(FormulaSlot::new(p.node, idx)),
        (None, Some(fs), kids) => {
            Active::Pick { node: p.node, formulas: fs, children: kids.unwrap_or_default() }
        }
        (None, None, Some(kids)) => {
            Active::Pick { node: p.node, formulas: Vec::new(), children: kids }
        }
        (None, None, None) => Active::Node(p.node),
    }
}

fn step_to_json(p: &Proof) -> StepJson {
    let s = &p.step;
    StepJson {
        concl: s.conclusion.clone(),
        rule: s.rule.name().to_string(),
        active: s.active.iter().map(active_to_json).collect(),
        circle: s.circle,
        formula: s.aux.formula.as_ref().map(|f| f.to_string()),
        m: (s.aux.m != 0).then_some(s.aux.m),
        n: (s.aux.n != 0).then_some(s.aux.n),
        y: (!s.aux.y.is_empty()).then_some(s.aux.y),
        targets: (!s.aux.targets.is_empty()).then(|| s.aux.targets.clone()),
        prems: p.subs.iter().map(step_to_json).collect(),
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ProofJsonError {
    #[error("{0}")]
    Json(#[from] serde_json::Error),
    #[error("at {path}: unknown rule name {rule:?}")]
    UnknownRule { path: String, rule: String },
    #[error("at {path}: bad formula: {msg}")]
    BadFormula { path: String, msg: String },
    #[error("at {path}: {msg}")]
    BadStep { path: String, msg: String },
}

fn step_from_json(j: StepJson, path: &mut Vec<usize>) -> Result<Proof, ProofJsonError> {
    let pstr = || {
        if path.is_empty() {
            "root".to_string()
        } else {
            path.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(".")
        }
    };
    let rule = RuleId::from_name(&j.rule)
        .ok_or_else(|| ProofJsonError::UnknownRule { path: pstr(), rule: j.rule.clone() })?;
    let aux_formula = match &j.formula {
        Some(text) => Some(formula::parse(text).map_err(|e| ProofJsonError::BadFormula {
            path: pstr(),
            msg: e.to_string(),
        })?),
        None => None,
    };
    let aux = Aux {
        formula: aux_formula,
        m: j.m.unwrap_or(0),
        n: j.n.unwrap_or(0),
        y: j.y.unwrap_or(Axioms::EMPTY),
        targets: j.targets.unwrap_or_default(),
    };
    let inst = RuleInstance::derive(
        rule,
        j.circle,
        j.concl,
        j.active.into_iter().map(active_from_json).collect(),
        aux,
    )
    .map_err(|e| ProofJsonError::BadStep { path: pstr(), msg: e.to_string() })?;
    if inst.premises.len() != j.prems.len() {
        return Err(ProofJsonError::BadStep {
            path: pstr(),
            msg: format!(
                "rule yields {} premises, file has {}",
                inst.premises.len(),
                j.prems.len()
            ),
        });
    }
    let mut subs = Vec::with_capacity(j.prems.len());
    for (i, pj) in j.prems.into_iter().enumerate() {
        path.push(i);
        subs.push(step_from_json(pj, path)?);
        path.pop();
    }
    Ok(Proof::node(inst, subs))
}

pub fn proof_to_json(p: &Proof) -> Value {
    serde_json::to_value(step_to_json(p)).expect("proof serialization cannot fail")
}

pub fn proof_from_json(v: Value) -> Result<Proof, ProofJsonError> {
    let j: StepJson = serde_json::from_value(v)?;
    step_from_json(j, &mut Vec::new())
}

/// Convenience: parse a proof from JSON text.
pub fn proof_from_str(text: &str) -> Result<Proof, ProofJsonError> {
    proof_from_json(serde_json::from_str(text)?)
}
