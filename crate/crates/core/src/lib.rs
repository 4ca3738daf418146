//! Decision procedures, countermodels and proof transformations for the 15
//! basic normal modal logics (K plus any subset of {d,t,b,4,5}), built on
//! nested sequents.

pub mod axioms;
pub mod calculus;
pub mod countermodel;
pub mod formula;
pub mod search;
pub mod sequent;
pub mod transform;

pub use axioms::Axioms;
pub use search::{prove, prove_formula, LogicSpec, SearchOptions, SearchOutcome};
pub use calculus::{Proof, RuleId, RuleInstance, System};
pub use formula::{negate, parse, Formula};
pub use sequent::{FormulaSlot, NestedSequent, NodeAddress};
