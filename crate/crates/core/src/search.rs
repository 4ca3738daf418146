//! The terminating proof-search procedure: saturate the °-variant rules on
//! every open derivation leaf, then expand boxes, until each non-axiomatic
//! leaf is finished; success is re-expressed over the plain rules, failure
//! yields a finished sequent and (for 45-closed axiom sets) a verified
//! countermodel.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::axioms::{self, Axioms};
use crate::calculus::{Active, Aux, Proof, RuleId, RuleInstance, System};
use crate::countermodel::{cyclic_leaves, extract_model, KripkeModel, ModelError};
use crate::formula::Formula;
use crate::sequent::{FormulaSlot, NestedSequent, NodeAddress};
use crate::transform::{circle_to_base, TransformError};

/// An axiom set to search in, optionally carrying its cube-logic name.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LogicSpec {
    pub axioms: Axioms,
    pub name: Option<String>,
}

impl LogicSpec {
    pub fn new(axioms: Axioms) -> LogicSpec {
        LogicSpec { axioms, name: None }
    }

    /// Look a logic up by its conventional name (case-insensitive).
    pub fn named(name: &str) -> Option<LogicSpec> {
        let upper = name.to_ascii_uppercase();
        named_logics()
            .into_iter()
            .find(|(n, _)| *n == upper)
            .map(|(n, x)| LogicSpec { axioms: x, name: Some(n.to_string()) })
    }

    /// The second 45-closed axiomatization of S5.
    pub fn s5_alternate() -> LogicSpec {
        LogicSpec {
            axioms: axioms::D.with(axioms::B).with(axioms::FOUR).with(axioms::FIVE),
            name: Some("S5".to_string()),
        }
    }
}

/// The fifteen logics of the modal cube, each with a 45-closed axiom set.
pub fn named_logics() -> Vec<(&'static str, Axioms)> {
    use crate::axioms::{B, D, FIVE, FOUR, T};
    vec![
        ("K", Axioms::EMPTY),
        ("KD", D),
        ("T", T),
        ("KB", B),
        ("K4", FOUR),
        ("K5", FIVE),
        ("KD4", D.with(FOUR)),
        ("KD5", D.with(FIVE)),
        ("K45", FOUR.with(FIVE)),
        ("KD45", D.with(FOUR).with(FIVE)),
        ("KB5", B.with(FOUR).with(FIVE)),
        ("KDB", D.with(B)),
        ("KTB", T.with(B)),
        ("S4", T.with(FOUR)),
        ("S5", T.with(FOUR).with(FIVE)),
    ]
}

/// The least 45-closed superset: add 4 while {t,5} or {b,5} is present,
/// add 5 while {b,4} is present, to a fixpoint.
pub fn closure45(x: Axioms) -> Axioms {
    let mut cur = x;
    loop {
        let mut next = cur;
        if cur.contains(axioms::T) && cur.contains(axioms::FIVE) {
            next = next.with(axioms::FOUR);
        }
        if cur.contains(axioms::B) && cur.contains(axioms::FIVE) {
            next = next.with(axioms::FOUR);
        }
        if cur.contains(axioms::B) && cur.contains(axioms::FOUR) {
            next = next.with(axioms::FIVE);
        }
        if next == cur {
            return cur;
        }
        cur = next;
    }
}

pub fn is_45_closed(x: Axioms) -> bool {
    closure45(x) == x
}

#[derive(Clone, Debug)]
pub struct SearchOptions {
    /// Search in closure45(X) instead of X (completeness needs it).
    pub auto_close_45: bool,
    /// Iteration cap; the theoretical bound is 2^|sf(goal)|.
    pub limit: Option<u64>,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions { auto_close_45: true, limit: None }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SearchStats {
    /// Passes of the saturate-then-expand loop that made progress.
    pub iterations: u64,
    /// Rule instances applied.
    pub expanded: u64,
}

#[derive(Clone, Debug)]
pub enum SearchOutcome {
    Proved {
        proof: Proof,
        stats: SearchStats,
    },
    Refuted {
        /// The finished leaf, as a set sequent.
        finished: NestedSequent,
        cyclic: Vec<NodeAddress>,
        model: KripkeModel,
        root: usize,
        stats: SearchStats,
    },
    /// The search got stuck with an axiom set that is not 45-closed:
    /// completeness is not guaranteed and no countermodel is extracted.
    FailedUnverified {
        finished: NestedSequent,
        stats: SearchStats,
    },
}

impl SearchOutcome {
    pub fn stats(&self) -> SearchStats {
        match self {
            SearchOutcome::Proved { stats, .. }
            | SearchOutcome::Refuted { stats, .. }
            | SearchOutcome::FailedUnverified { stats, .. } => *stats,
        }
    }
}

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("iteration limit {limit} exceeded ({} applications)", stats.expanded)]
    LimitExceeded { limit: u64, stats: SearchStats },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Transform(#[from] TransformError),
}

/// Decide validity of a formula in the logic K+X.
pub fn prove_formula(
    goal: &Formula,
    spec: &LogicSpec,
    opts: &SearchOptions,
) -> Result<SearchOutcome, SearchError> {
    prove(&NestedSequent::singleton(goal.clone()), spec, opts)
}

/// Decide derivability of a nested sequent in the logic K+X.
pub fn prove(
    goal: &NestedSequent,
    spec: &LogicSpec,
    opts: &SearchOptions,
) -> Result<SearchOutcome, SearchError> {
    let x = if opts.auto_close_45 { closure45(spec.axioms) } else { spec.axioms };
    let mut stats = SearchStats::default();
    let mut tree = Node::Open { seq: goal.clone(), finished: false };
    loop {
        if let Some(limit) = opts.limit {
            if stats.iterations >= limit {
                return Err(SearchError::LimitExceeded { limit, stats });
            }
        }
        let changed = iterate(&mut tree, x, &mut stats);
        if changed {
            stats.iterations += 1;
        }
        if first_finished_leaf(&tree).is_some() || !changed {
            break;
        }
    }
    match first_finished_leaf(&tree) {
        None => {
            let circle_proof = to_proof(&tree);
            let proof = circle_to_base(&circle_proof)?;
            Ok(SearchOutcome::Proved { proof, stats })
        }
        Some(leaf) => {
            let finished = leaf.set_sequent();
            if is_45_closed(x) {
                let (model, root) = extract_model(leaf, x)?;
                let cyclic = cyclic_leaves(&finished).into_iter().map(|(a, _)| a).collect();
                Ok(SearchOutcome::Refuted { finished, cyclic, model, root, stats })
            } else {
                Ok(SearchOutcome::FailedUnverified { finished, stats })
            }
        }
    }
}

/// No rule of `sys` (other than the axiom) has its principal formula at
/// `node`.
pub fn is_finished(s: &NestedSequent, node: &[usize], sys: &System) -> bool {
    crate::calculus::applicable_instances(s, sys).iter().all(|i| {
        i.rule == RuleId::Axiom
            || match i.active.first() {
                Some(Active::Slot(sl)) => sl.node != node,
                _ => true,
            }
    })
}

/// Some non-leaf node of the sequent carries the same formula set as this
/// leaf.
pub fn is_cyclic(s: &NestedSequent, leaf: &[usize]) -> bool {
    cyclic_leaves(s).iter().any(|(a, _)| a == leaf)
}

// ---------------------------------------------------------------------------
// The derivation tree under construction
// ---------------------------------------------------------------------------

enum Node {
    Open { seq: NestedSequent, finished: bool },
    Step { inst: RuleInstance, kids: Vec<Node> },
}

fn iterate(t: &mut Node, x: Axioms, stats: &mut SearchStats) -> bool {
    match t {
        Node::Step { kids, .. } => {
            let mut changed = false;
            for k in kids {
                changed |= iterate(k, x, stats);
            }
            changed
        }
        Node::Open { finished: true, .. } => false,
        Node::Open { seq, .. } => {
            let (mut sub, c1) = saturate(seq.clone(), x, stats);
            let c2 = box_pass(&mut sub, x, stats);
            if !c1 && !c2 {
                *t = Node::Open { seq: std::mem::take(seq), finished: true };
                false
            } else {
                *t = sub;
                true
            }
        }
    }
}

/// Step 1: apply the non-box °-rules to a fixpoint, closing axiomatic
/// leaves on sight.
fn saturate(seq: NestedSequent, x: Axioms, stats: &mut SearchStats) -> (Node, bool) {
    if let Some(inst) = axiom_instance(&seq) {
        stats.expanded += 1;
        return (Node::Step { inst, kids: Vec::new() }, true);
    }
    if let Some(inst) = first_saturation_instance(&seq, x) {
        stats.expanded += 1;
        let kids =
            inst.premises.iter().map(|p| saturate(p.clone(), x, stats).0).collect();
        return (Node::Step { inst, kids }, true);
    }
    (Node::Open { seq, finished: false }, false)
}

/// Step 2: expand boxes (and serial diamonds when d ∈ X) to a fixpoint;
/// these rules have one premise each, so every leaf grows a chain.
fn box_pass(t: &mut Node, x: Axioms, stats: &mut SearchStats) -> bool {
    match t {
        Node::Step { kids, .. } => {
            let mut changed = false;
            for k in kids {
                changed |= box_pass(k, x, stats);
            }
            changed
        }
        Node::Open { seq, .. } => {
            let mut insts = Vec::new();
            let mut cur = seq.clone();
            while let Some(inst) = first_box_instance(&cur, x) {
                stats.expanded += 1;
                cur = inst.premises[0].clone();
                insts.push(inst);
            }
            if insts.is_empty() {
                return false;
            }
            let mut node = Node::Open { seq: cur, finished: false };
            for inst in insts.into_iter().rev() {
                node = Node::Step { inst, kids: vec![node] };
            }
            *t = node;
            true
        }
    }
}

fn first_finished_leaf(t: &Node) -> Option<&NestedSequent> {
    match t {
        Node::Open { seq, finished: true } => Some(seq),
        Node::Open { .. } => None,
        Node::Step { kids, .. } => kids.iter().find_map(first_finished_leaf),
    }
}

fn to_proof(t: &Node) -> Proof {
    match t {
        Node::Step { inst, kids } => {
            Proof::node(inst.clone(), kids.iter().map(to_proof).collect())
        }
        Node::Open { .. } => unreachable!("open leaf in a closed derivation"),
    }
}

pub(crate) fn axiom_instance(s: &NestedSequent) -> Option<RuleInstance> {
    for addr in s.addresses() {
        let node = s.node(&addr).unwrap();
        for (i, f) in node.formulas.iter().enumerate() {
            let Formula::Atom { name, negated } = f else { continue };
            for (j, g) in node.formulas.iter().enumerate().skip(i + 1) {
                if matches!(g, Formula::Atom { name: n2, negated: n2g }
                    if n2 == name && n2g != negated)
                {
                    return RuleInstance::base(
                        RuleId::Axiom,
                        s.clone(),
                        vec![Active::slot(addr.clone(), i), Active::slot(addr.clone(), j)],
                    )
                    .ok();
                }
            }
        }
    }
    None
}

fn try_circle(
    rule: RuleId,
    s: &NestedSequent,
    active: Vec<Active>,
) -> Option<RuleInstance> {
    RuleInstance::derive(rule, true, s.clone(), active, Aux::default()).ok()
}

/// The first applicable instance of the step-1 rules, in DFS node order,
/// fixed rule order (∨, ∧, ◇k_c, ◇t_c, ◇b_c, ◇4_c, ◇5_c), first formula
/// first; principal positions in cyclic leaves are skipped.
fn first_saturation_instance(s: &NestedSequent, x: Axioms) -> Option<RuleInstance> {
    let cyc: BTreeSet<NodeAddress> = cyclic_leaves(s).into_iter().map(|(a, _)| a).collect();
    let addrs = s.addresses();
    for addr in &addrs {
        if cyc.contains(addr) {
            continue;
        }
        let node = s.node(addr).unwrap();
        let slot = |i| Active::Slot(FormulaSlot::new(addr.clone(), i));
        for (i, f) in node.formulas.iter().enumerate() {
            if matches!(f, Formula::Or(..)) {
                if let Some(inst) = try_circle(RuleId::Or, s, vec![slot(i)]) {
                    return Some(inst);
                }
            }
        }
        for (i, f) in node.formulas.iter().enumerate() {
            if matches!(f, Formula::And(..)) {
                if let Some(inst) = try_circle(RuleId::And, s, vec![slot(i)]) {
                    return Some(inst);
                }
            }
        }
        let dias: Vec<usize> = node
            .formulas
            .iter()
            .enumerate()
            .filter(|(_, f)| matches!(f, Formula::Dia(..)))
            .map(|(i, _)| i)
            .collect();
        for &i in &dias {
            for k in 0..node.children.len() {
                let mut t = addr.clone();
                t.push(k);
                if let Some(inst) =
                    try_circle(RuleId::DiaKc, s, vec![slot(i), Active::Node(t)])
                {
                    return Some(inst);
                }
            }
        }
        if x.contains(axioms::T) {
            for &i in &dias {
                if let Some(inst) = try_circle(RuleId::DiaTc, s, vec![slot(i)]) {
                    return Some(inst);
                }
            }
        }
        if x.contains(axioms::B) {
            for &i in &dias {
                if let Some(inst) = try_circle(RuleId::DiaBc, s, vec![slot(i)]) {
                    return Some(inst);
                }
            }
        }
        if x.contains(axioms::FOUR) {
            for &i in &dias {
                for k in 0..node.children.len() {
                    let mut t = addr.clone();
                    t.push(k);
                    if let Some(inst) =
                        try_circle(RuleId::Dia4c, s, vec![slot(i), Active::Node(t)])
                    {
                        return Some(inst);
                    }
                }
            }
        }
        if x.contains(axioms::FIVE) && !addr.is_empty() {
            for &i in &dias {
                // skip targets that already hold the formula (the proviso
                // would reject them anyway)
                let f = &node.formulas[i];
                for t in &addrs {
                    if s.node(t).unwrap().formulas.contains(f) {
                        continue;
                    }
                    if let Some(inst) =
                        try_circle(RuleId::Dia5c, s, vec![slot(i), Active::Node(t.clone())])
                    {
                        return Some(inst);
                    }
                }
            }
        }
    }
    None
}

/// The first applicable step-2 instance: □° everywhere, ◇d_c° when d ∈ X.
fn first_box_instance(s: &NestedSequent, x: Axioms) -> Option<RuleInstance> {
    let cyc: BTreeSet<NodeAddress> = cyclic_leaves(s).into_iter().map(|(a, _)| a).collect();
    for addr in s.addresses() {
        if cyc.contains(&addr) {
            continue;
        }
        let node = s.node(&addr).unwrap();
        let slot = |i| Active::Slot(FormulaSlot::new(addr.clone(), i));
        for (i, f) in node.formulas.iter().enumerate() {
            if matches!(f, Formula::Box(..)) {
                if let Some(inst) = try_circle(RuleId::Box, s, vec![slot(i)]) {
                    return Some(inst);
                }
            }
        }
        if x.contains(axioms::D) {
            for (i, f) in node.formulas.iter().enumerate() {
                if matches!(f, Formula::Dia(..)) {
                    if let Some(inst) = try_circle(RuleId::DiaDc, s, vec![slot(i)]) {
                        return Some(inst);
                    }
                }
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::check_proof;
    use crate::countermodel::verify_countermodel;
    use crate::formula::parse;
    use crate::sequent::parse_sequent;

    fn run(goal: &str, spec: &LogicSpec) -> SearchOutcome {
        prove_formula(&parse(goal).unwrap(), spec, &SearchOptions::default()).unwrap()
    }

    fn spec(x: Axioms) -> LogicSpec {
        LogicSpec::new(x)
    }

    #[test]
    fn closure_examples() {
        use crate::axioms::{B, FIVE, FOUR, T};
        assert_eq!(closure45(T.with(FIVE)), T.with(FOUR).with(FIVE));
        assert_eq!(closure45(B.with(FOUR)), B.with(FOUR).with(FIVE));
        assert_eq!(closure45(Axioms::EMPTY), Axioms::EMPTY);
        assert!(!is_45_closed(T.with(FIVE)));
        assert!(is_45_closed(T.with(FOUR).with(FIVE)));
        assert!(is_45_closed(crate::axioms::D));
        // every named logic is already closed
        for (_, x) in named_logics() {
            assert!(is_45_closed(x));
        }
    }

    #[test]
    fn proves_the_k_example() {
        let out = run("[](a | b) -> ([]a | <>b)", &spec(Axioms::EMPTY));
        let SearchOutcome::Proved { proof, stats } = out else {
            panic!("expected a proof");
        };
        check_proof(&proof, &System::logical(Axioms::EMPTY)).unwrap();
        assert_eq!(
            proof.conclusion(),
            &NestedSequent::singleton(parse("[](a | b) -> ([]a | <>b)").unwrap())
        );
        assert!(stats.iterations >= 1);
    }

    #[test]
    fn refutes_an_atom_with_a_one_state_model() {
        let out = run("p", &spec(Axioms::EMPTY));
        let SearchOutcome::Refuted { finished, model, root, .. } = out else {
            panic!("expected a refutation");
        };
        assert_eq!(model.states.len(), 1);
        assert!(verify_countermodel(&model, root, &finished, Axioms::EMPTY).unwrap());
    }

    #[test]
    fn t_axiom_depends_on_reflexivity() {
        match run("[]p -> p", &spec(crate::axioms::T)) {
            SearchOutcome::Proved { proof, .. } => {
                check_proof(&proof, &System::logical(crate::axioms::T)).unwrap()
            }
            _ => panic!("T proves its axiom"),
        }
        match run("[]p -> p", &spec(Axioms::EMPTY)) {
            SearchOutcome::Refuted { finished, model, root, .. } => {
                assert!(verify_countermodel(&model, root, &finished, Axioms::EMPTY).unwrap());
            }
            _ => panic!("K does not prove the T axiom"),
        }
    }

    #[test]
    fn four_axiom_needs_the_45_closure_of_t5() {
        use crate::axioms::{FIVE, T};
        let x = T.with(FIVE);
        match run("[]p -> [][]p", &spec(x)) {
            SearchOutcome::Proved { proof, .. } => {
                // proved via the closure {t,4,5}
                check_proof(&proof, &System::logical(closure45(x))).unwrap()
            }
            _ => panic!("{{t,5}}-frames validate 4"),
        }
        let opts = SearchOptions { auto_close_45: false, ..Default::default() };
        match prove_formula(&parse("[]p -> [][]p").unwrap(), &spec(x), &opts).unwrap() {
            SearchOutcome::FailedUnverified { .. } => {}
            _ => panic!("without closure the search must fail unverified"),
        }
    }

    #[test]
    fn five_axiom_needs_the_45_closure_of_b4() {
        use crate::axioms::{B, FOUR};
        let x = B.with(FOUR);
        match run("<>p -> []<>p", &spec(x)) {
            SearchOutcome::Proved { proof, .. } => {
                check_proof(&proof, &System::logical(closure45(x))).unwrap()
            }
            _ => panic!("{{b,4}}-frames validate 5"),
        }
        match run("<>p -> []<>p", &spec(Axioms::EMPTY)) {
            SearchOutcome::Refuted { finished, model, root, .. } => {
                assert!(verify_countermodel(&model, root, &finished, Axioms::EMPTY).unwrap());
            }
            _ => panic!("K does not prove the 5 axiom"),
        }
    }

    #[test]
    fn s5_axiomatizations_agree() {
        for goal in ["<>[]p -> p", "[]p -> [][]p", "p -> []<>p", "<>p -> []<>p"] {
            let a = matches!(
                run(goal, &LogicSpec::named("S5").unwrap()),
                SearchOutcome::Proved { .. }
            );
            let b = matches!(
                run(goal, &LogicSpec::s5_alternate()),
                SearchOutcome::Proved { .. }
            );
            assert_eq!(a, b, "{goal}");
            assert!(a, "{goal} holds in S5");
        }
    }

    #[test]
    fn named_logics_cover_the_cube() {
        assert_eq!(named_logics().len(), 15);
        assert_eq!(LogicSpec::named("s4").unwrap().axioms, crate::axioms::T.with(crate::axioms::FOUR));
        assert!(LogicSpec::named("S6").is_none());
    }

    #[test]
    fn cyclicity_and_finishedness() {
        let s = parse_sequent("p, [p, [p]]").unwrap();
        assert!(is_cyclic(&s, &[0, 0]));
        assert!(!is_cyclic(&s, &[0]));
        let sys = System::logical_circle(Axioms::EMPTY);
        let t = parse_sequent("p, ~q").unwrap();
        assert!(is_finished(&t, &[], &sys));
        let u = parse_sequent("p | q").unwrap();
        assert!(!is_finished(&u, &[], &sys));
        // ◇p with no child: finished in K, unfinished with d
        let v = parse_sequent("<>p").unwrap();
        assert!(is_finished(&v, &[], &sys));
        assert!(!is_finished(&v, &[], &System::logical_circle(crate::axioms::D)));
    }

    #[test]
    fn iteration_limit_is_honored() {
        let opts = SearchOptions { auto_close_45: true, limit: Some(0) };
        let err = prove_formula(&parse("p | ~p").unwrap(), &spec(Axioms::EMPTY), &opts);
        assert!(matches!(err, Err(SearchError::LimitExceeded { .. })));
    }

    #[test]
    fn iterations_stay_under_the_theoretical_bound() {
        for (goal, x) in [
            ("[](a | b) -> ([]a | <>b)", Axioms::EMPTY),
            ("<>p -> []<>p", crate::axioms::B.with(crate::axioms::FOUR)),
            ("[]p -> [][]p", crate::axioms::FOUR),
            ("<>(p & q) -> <>p", crate::axioms::T.with(crate::axioms::FOUR)),
        ] {
            let goal = parse(goal).unwrap();
            let seq = NestedSequent::singleton(goal.clone());
            let bound = 1u64
                .checked_shl(seq.sequent_subformulas().len() as u32)
                .unwrap_or(u64::MAX);
            let out =
                prove_formula(&goal, &spec(x), &SearchOptions::default()).unwrap();
            assert!(out.stats().iterations <= bound);
        }
    }
}
