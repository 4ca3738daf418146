//! Rule systems over nested sequents: rule identifiers, rule instances,
//! proof objects and the independent proof checker.

mod apply;
mod check;
mod enumerate;
mod json;
#[cfg(test)]
mod tests;

pub use apply::{premise_node_addr, premise_slot, premises_of, ycut_proviso_holds};
pub use check::{check_proof, cut_ranks, is_cut_free, max_cut_rank, CheckError};
pub use enumerate::applicable_instances;
pub use json::{proof_from_str, ProofJsonError};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::axioms::{self, Axioms};
use crate::formula::{depth, Formula};
use crate::sequent::{FormulaSlot, NestedSequent, NodeAddress};

/// Every inference rule that can occur in a stored proof.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RuleId {
    Axiom,
    And,
    Or,
    Box,
    DiaKc,
    DiaDc,
    DiaTc,
    DiaBc,
    Dia4c,
    Dia5c,
    // diamond rules without built-in contraction
    DiaK,
    DiaD,
    DiaT,
    DiaB,
    Dia4,
    Dia5,
    Dia51,
    Dia52,
    Dia53,
    // modal structural rules
    StrD,
    StrT,
    StrB,
    Str4,
    Str5,
    // contraction / weakening / necessitation / cuts
    Ctr,
    Wk,
    Nec,
    Cut,
    MCut,
    YCut,
    YStr,
    Fctr,
    Med,
    MBox,
    MAnd,
}

impl RuleId {
    pub fn name(self) -> &'static str {
        use RuleId::*;
        match self {
            Axiom => "ax",
            And => "and",
            Or => "or",
            Box => "box",
            DiaKc => "kc",
            DiaDc => "dc",
            DiaTc => "tc",
            DiaBc => "bc",
            Dia4c => "4c",
            Dia5c => "5c",
            DiaK => "k",
            DiaD => "d",
            DiaT => "t",
            DiaB => "b",
            Dia4 => "4",
            Dia5 => "5",
            Dia51 => "5_1",
            Dia52 => "5_2",
            Dia53 => "5_3",
            StrD => "[d]",
            StrT => "[t]",
            StrB => "[b]",
            Str4 => "[4]",
            Str5 => "[5]",
            Ctr => "ctr",
            Wk => "wk",
            Nec => "nec",
            Cut => "cut",
            MCut => "mcut",
            YCut => "ycut",
            YStr => "ystr",
            Fctr => "fctr",
            Med => "med",
            MBox => "mbox",
            MAnd => "mand",
        }
    }

    pub fn from_name(name: &str) -> Option<RuleId> {
        use RuleId::*;
        for r in [
            Axiom, And, Or, Box, DiaKc, DiaDc, DiaTc, DiaBc, Dia4c, Dia5c, DiaK, DiaD, DiaT,
            DiaB, Dia4, Dia5, Dia51, Dia52, Dia53, StrD, StrT, StrB, Str4, Str5, Ctr, Wk, Nec,
            Cut, MCut, YCut, YStr, Fctr, Med, MBox, MAnd,
        ] {
            if r.name() == name {
                return Some(r);
            }
        }
        None
    }
}

/// An active position of a rule instance inside its conclusion.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Active {
    /// One formula occurrence.
    Slot(FormulaSlot),
    /// One node.
    Node(NodeAddress),
    /// A sub-multiset of one node: formula indices plus child indices
    /// (used by [t], [b], ctr, wk, med).
    Pick { node: NodeAddress, formulas: Vec<usize>, children: Vec<usize> },
}

impl Active {
    pub fn slot(node: NodeAddress, index: usize) -> Active {
        Active::Slot(FormulaSlot::new(node, index))
    }
}

/// Rule parameters that are not reconstructible from the conclusion:
/// cut formulas, multiplicities, the Y set and extra ycut holes.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Aux {
    pub formula: Option<Formula>,
    pub m: usize,
    pub n: usize,
    pub y: Axioms,
    pub targets: Vec<NodeAddress>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RuleInstance {
    pub rule: RuleId,
    /// The °-variant of the rule (search-oriented systems only).
    pub circle: bool,
    pub conclusion: NestedSequent,
    pub active: Vec<Active>,
    pub aux: Aux,
    pub premises: Vec<NestedSequent>,
}

impl RuleInstance {
    /// Build an instance, computing its premises and checking provisos.
    pub fn derive(
        rule: RuleId,
        circle: bool,
        conclusion: NestedSequent,
        active: Vec<Active>,
        aux: Aux,
    ) -> Result<RuleInstance, CalcError> {
        let mut inst =
            RuleInstance { rule, circle, conclusion, active, aux, premises: Vec::new() };
        inst.premises = premises_of(&inst)?;
        Ok(inst)
    }

    pub fn base(
        rule: RuleId,
        conclusion: NestedSequent,
        active: Vec<Active>,
    ) -> Result<RuleInstance, CalcError> {
        RuleInstance::derive(rule, false, conclusion, active, Aux::default())
    }

    /// Rank of a cut-family instance: one plus the depth of its cut formula
    /// (for ycut the cut formula is □A where `aux.formula` stores A).
    pub fn cut_rank(&self) -> Option<usize> {
        let a = self.aux.formula.as_ref()?;
        match self.rule {
            RuleId::Cut | RuleId::MCut => Some(depth(a) + 1),
            RuleId::YCut => Some(depth(a) + 2),
            _ => None,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum CalcError {
    #[error("malformed {rule} instance: {msg}")]
    Malformed { rule: &'static str, msg: String },
    #[error("proviso violated for {rule}: {msg}")]
    Proviso { rule: &'static str, msg: String },
    #[error(transparent)]
    Sequent(#[from] crate::sequent::SequentError),
}

pub(crate) fn malformed<T>(rule: RuleId, msg: impl Into<String>) -> Result<T, CalcError> {
    Err(CalcError::Malformed { rule: rule.name(), msg: msg.into() })
}

pub(crate) fn proviso<T>(rule: RuleId, msg: impl Into<String>) -> Result<T, CalcError> {
    Err(CalcError::Proviso { rule: rule.name(), msg: msg.into() })
}

/// A derivation tree. Leaves are axiom instances.
#[derive(Clone, Debug, PartialEq)]
pub struct Proof {
    pub step: RuleInstance,
    pub subs: Vec<Proof>,
    depth: usize,
}

impl Proof {
    /// Assemble a proof node; subproof conclusions must match the step's
    /// premises (order-sensitively, up to multiset equality of sequents).
    pub fn node(step: RuleInstance, subs: Vec<Proof>) -> Proof {
        debug_assert_eq!(step.premises.len(), subs.len());
        let depth = 1 + subs.iter().map(|s| s.depth).max().unwrap_or(0);
        Proof { step, subs, depth }
    }

    pub fn leaf(step: RuleInstance) -> Proof {
        Proof { step, subs: Vec::new(), depth: 1 }
    }

    pub fn conclusion(&self) -> &NestedSequent {
        &self.step.conclusion
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn size(&self) -> usize {
        1 + self.subs.iter().map(|s| s.size()).sum::<usize>()
    }

    /// Count of cut-family steps.
    pub fn cut_count(&self) -> usize {
        let here = matches!(self.step.rule, RuleId::Cut | RuleId::MCut | RuleId::YCut) as usize;
        here + self.subs.iter().map(|s| s.cut_count()).sum::<usize>()
    }

    pub fn uses_rule(&self, rule: RuleId) -> bool {
        self.step.rule == rule || self.subs.iter().any(|s| s.uses_rule(rule))
    }
}

/// The rule systems of the artifact.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SystemBase {
    /// K+◇X_c: {∧, ∨, □, ◇k_c} plus ◇x_c for x ∈ X.
    Logical,
    /// (K+◇X_c)°: the same rules in their °-variants.
    LogicalCircle,
    /// Kc+[X]: {∧, ∨, □, k, ctr} plus [x] for x ∈ X.
    Structural,
    /// Km+[X]: Kc − ctr + {med, m□, m∧}.
    Km,
}

/// A rule system: a base, its axiom set X, and extra rules admitted during
/// proof transformations (cut, weakening, the fctr/[d] tails, …).
#[derive(Clone, Debug, PartialEq)]
pub struct System {
    pub base: SystemBase,
    pub axioms: Axioms,
    pub extra: Vec<RuleId>,
}

impl System {
    pub fn logical(x: Axioms) -> System {
        System { base: SystemBase::Logical, axioms: x, extra: Vec::new() }
    }

    pub fn logical_circle(x: Axioms) -> System {
        System { base: SystemBase::LogicalCircle, axioms: x, extra: Vec::new() }
    }

    pub fn structural(x: Axioms) -> System {
        System { base: SystemBase::Structural, axioms: x, extra: Vec::new() }
    }

    pub fn km(x: Axioms) -> System {
        System { base: SystemBase::Km, axioms: x, extra: Vec::new() }
    }

    pub fn plus(mut self, rule: RuleId) -> System {
        if !self.extra.contains(&rule) {
            self.extra.push(rule);
        }
        self
    }

    /// Does the system contain this rule (in the given °-form)?
    pub fn allows(&self, rule: RuleId, circle: bool) -> bool {
        use RuleId::*;
        if self.extra.contains(&rule) && !circle {
            return true;
        }
        let x = self.axioms;
        let in_base = match self.base {
            SystemBase::Logical | SystemBase::LogicalCircle => match rule {
                Axiom | And | Or | Box | DiaKc => true,
                DiaDc => x.contains(axioms::D),
                DiaTc => x.contains(axioms::T),
                DiaBc => x.contains(axioms::B),
                Dia4c => x.contains(axioms::FOUR),
                Dia5c => x.contains(axioms::FIVE),
                _ => false,
            },
            SystemBase::Structural | SystemBase::Km => {
                let str_ok = match rule {
                    StrD => x.contains(axioms::D),
                    StrT => x.contains(axioms::T),
                    StrB => x.contains(axioms::B),
                    Str4 => x.contains(axioms::FOUR),
                    Str5 => x.contains(axioms::FIVE),
                    _ => false,
                };
                let core_ok = match self.base {
                    SystemBase::Structural => {
                        matches!(rule, Axiom | And | Or | Box | DiaK | Ctr)
                    }
                    _ => matches!(rule, Axiom | And | Or | Box | DiaK | Med | MBox | MAnd),
                };
                str_ok || core_ok
            }
        };
        if !in_base {
            return false;
        }
        match self.base {
            // every rule of a °-system is used in its °-form except the axiom
            SystemBase::LogicalCircle => circle || rule == Axiom,
            _ => !circle,
        }
    }
}

pub use json::{proof_from_json, proof_to_json};
