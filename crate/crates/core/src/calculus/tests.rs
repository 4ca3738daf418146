use super::*;
use crate::axioms;
use crate::formula::{parse, Formula};
use crate::sequent::{parse_sequent, FormulaSlot, NestedSequent};

fn f(s: &str) -> Formula {
    parse(s).unwrap()
}

fn seq(s: &str) -> NestedSequent {
    parse_sequent(s).unwrap()
}

fn slot(node: &[usize], index: usize) -> Active {
    Active::Slot(FormulaSlot::new(node.to_vec(), index))
}

fn node(a: &[usize]) -> Active {
    Active::Node(a.to_vec())
}

fn pick(n: &[usize], fs: &[usize], ks: &[usize]) -> Active {
    Active::Pick { node: n.to_vec(), formulas: fs.to_vec(), children: ks.to_vec() }
}

/// ⊢ □(a ∨ b) ⊃ (□a ∨ ◇b), derived in K with insertion-order sequents so
/// the slot indices below are stable.
fn k_like_example() -> Proof {
    let goal = f("[](a | b) -> ([]a | <>b)");
    // bottom-up: or, or, box on □a, kc on ◇(~a & ~b), and, then axioms
    let s0 = NestedSequent::leaf(vec![goal.clone()]);
    let s1 = NestedSequent::leaf(vec![f("<>(~a & ~b)"), f("[]a | <>b")]);
    let s2 = NestedSequent::leaf(vec![f("<>(~a & ~b)"), f("[]a"), f("<>b")]);
    let mut s3 = NestedSequent::leaf(vec![f("<>(~a & ~b)"), f("<>b")]);
    s3.children.push(NestedSequent::singleton(f("a")));
    let mut s4 = s3.clone();
    s4.children[0].formulas.push(f("~a & ~b"));
    let mut s5a = s3.clone();
    s5a.children[0].formulas.push(f("~a"));
    let mut s5b = s3.clone();
    s5b.children[0].formulas.push(f("~b"));
    let mut s6 = s5b.clone();
    s6.children[0].formulas.push(f("b"));

    let ax_a = Proof::leaf(
        RuleInstance::base(RuleId::Axiom, s5a, vec![slot(&[0], 0), slot(&[0], 1)]).unwrap(),
    );
    let ax_b = Proof::leaf(
        RuleInstance::base(RuleId::Axiom, s6, vec![slot(&[0], 1), slot(&[0], 2)]).unwrap(),
    );
    let kc_b = Proof::node(
        RuleInstance::base(RuleId::DiaKc, s5b, vec![slot(&[], 1), node(&[0])]).unwrap(),
        vec![ax_b],
    );
    let and = Proof::node(
        RuleInstance::base(RuleId::And, s4, vec![slot(&[0], 1)]).unwrap(),
        vec![ax_a, kc_b],
    );
    let kc = Proof::node(
        RuleInstance::base(RuleId::DiaKc, s3, vec![slot(&[], 0), node(&[0])]).unwrap(),
        vec![and],
    );
    let boxr = Proof::node(
        RuleInstance::base(RuleId::Box, s2, vec![slot(&[], 1)]).unwrap(),
        vec![kc],
    );
    let or2 = Proof::node(
        RuleInstance::base(RuleId::Or, s1, vec![slot(&[], 1)]).unwrap(),
        vec![boxr],
    );
    Proof::node(RuleInstance::base(RuleId::Or, s0, vec![slot(&[], 0)]).unwrap(), vec![or2])
}

#[test]
fn example_derivation_checks_in_its_system() {
    let p = k_like_example();
    assert!(check_proof(&p, &System::logical(Axioms::EMPTY)).is_ok());
    assert!(check_proof(&p, &System::logical(axioms::D.with(axioms::FOUR))).is_ok());
    // the structural system uses k, not kc
    let err = check_proof(&p, &System::structural(Axioms::EMPTY)).unwrap_err();
    assert!(matches!(err, CheckError::RuleNotInSystem { rule: "kc", .. }));
    assert!(is_cut_free(&p));
    assert_eq!(p.size(), 8);
}

#[test]
fn tampered_premise_is_rejected() {
    let mut p = k_like_example();
    // swap an inner conclusion for a different sequent
    p.subs[0].step.conclusion = seq("<>(~a & ~b), []a, <>c");
    let err = check_proof(&p, &System::logical(Axioms::EMPTY)).unwrap_err();
    assert!(matches!(err, CheckError::PremiseMismatch { .. }));
}

#[test]
fn axiom_needs_complementary_literals() {
    let s = seq("a, a");
    let r = RuleInstance::base(RuleId::Axiom, s, vec![slot(&[], 0), slot(&[], 1)]);
    assert!(matches!(r, Err(CalcError::Malformed { .. })));
    let ok = RuleInstance::base(RuleId::Axiom, seq("a, ~a"), vec![slot(&[], 0), slot(&[], 1)]);
    assert!(ok.unwrap().premises.is_empty());
}

#[test]
fn restructuring_rule_premises() {
    // [4]: Γ{[[Δ],Σ]} from Γ{[Δ],[Σ]}
    let c = seq("a, [[b], c]");
    let inst =
        RuleInstance::base(RuleId::Str4, c, vec![node(&[0]), node(&[0, 0])]).unwrap();
    assert_eq!(inst.premises, vec![seq("a, [b], [c]")]);

    // [t]: Γ{Δ,Σ} from Γ{[Δ],Σ}
    let inst = RuleInstance::base(RuleId::StrT, seq("a, b, [c]"), vec![pick(&[], &[1], &[0])])
        .unwrap();
    assert_eq!(inst.premises, vec![seq("a, [b, [c]]")]);

    // [b]: Γ{Δ,[Σ]} from Γ{[Σ,[Δ]]}
    let inst = RuleInstance::base(
        RuleId::StrB,
        seq("a, b, [c]"),
        vec![node(&[0]), pick(&[], &[1], &[])],
    )
    .unwrap();
    assert_eq!(inst.premises, vec![seq("a, [c, [b]]")]);

    // [5]: Γ{ }{[Δ]} from Γ{[Δ]}{ }, landing spot below the root
    let inst = RuleInstance::base(RuleId::Str5, seq("[a], [b]"), vec![node(&[0]), node(&[1])])
        .unwrap();
    assert_eq!(inst.premises, vec![seq("[a, [b]]")]);
    let at_root =
        RuleInstance::base(RuleId::Str5, seq("[a], [b]"), vec![node(&[]), node(&[1])]);
    assert!(matches!(at_root, Err(CalcError::Proviso { .. })));

    // [d] and med
    let inst = RuleInstance::base(RuleId::StrD, seq("a"), vec![node(&[])]).unwrap();
    assert_eq!(inst.premises, vec![seq("a, []")]);
    let inst = RuleInstance::base(
        RuleId::Med,
        seq("[a, b]"),
        vec![node(&[0]), pick(&[0], &[0], &[])],
    )
    .unwrap();
    assert_eq!(inst.premises, vec![seq("[a], [b]")]);
}

#[test]
fn contraction_and_weakening_premises() {
    let inst =
        RuleInstance::base(RuleId::Ctr, seq("a, [b]"), vec![pick(&[], &[0], &[0])]).unwrap();
    assert_eq!(inst.premises, vec![seq("a, a, [b], [b]")]);
    let inst =
        RuleInstance::base(RuleId::Wk, seq("a, c, [b]"), vec![pick(&[], &[1], &[0])]).unwrap();
    assert_eq!(inst.premises, vec![seq("a")]);
}

#[test]
fn diamond_rule_depth_provisos() {
    // 5c moves the diamond anywhere, but only from below the root
    // (canonical child order puts [b] before [<>a])
    let c = seq("[<>a], [b]");
    let inst =
        RuleInstance::derive(RuleId::Dia5c, false, c.clone(), vec![slot(&[1], 0), node(&[0])], Aux::default())
            .unwrap();
    assert_eq!(inst.premises, vec![seq("[<>a], [b, <>a]")]);
    let bad = RuleInstance::base(RuleId::Dia5c, seq("<>a, [b]"), vec![slot(&[], 0), node(&[0])]);
    assert!(matches!(bad, Err(CalcError::Proviso { .. })));

    // b needs a parent to move into
    let bad = RuleInstance::base(RuleId::DiaB, seq("<>a"), vec![slot(&[], 0)]);
    assert!(matches!(bad, Err(CalcError::Proviso { .. })));
    let inst = RuleInstance::base(RuleId::DiaB, seq("c, [<>a]"), vec![slot(&[0], 0)]).unwrap();
    assert_eq!(inst.premises, vec![seq("c, a, []")]);

    // 5_2 moves between distinct siblings
    let inst = RuleInstance::base(
        RuleId::Dia52,
        seq("[<>a], [b]"),
        vec![slot(&[1], 0), node(&[0])],
    )
    .unwrap();
    assert_eq!(inst.premises, vec![seq("[], [b, <>a]")]);
}

#[test]
fn circle_provisos() {
    // or° must change the underlying set
    let ok = RuleInstance::derive(
        RuleId::Or,
        true,
        seq("a | b"),
        vec![slot(&[], 0)],
        Aux::default(),
    )
    .unwrap();
    assert_eq!(ok.premises, vec![seq("a | b, a, b")]);
    // canonically the disjunction sorts after the two atoms
    let stuck = RuleInstance::derive(
        RuleId::Or,
        true,
        seq("a | b, a, b"),
        vec![slot(&[], 2)],
        Aux::default(),
    );
    assert!(matches!(stuck, Err(CalcError::Proviso { .. })));

    // box° refuses when a child already holds the body
    let stuck = RuleInstance::derive(
        RuleId::Box,
        true,
        seq("[]a, [a, b]"),
        vec![slot(&[], 0)],
        Aux::default(),
    );
    assert!(matches!(stuck, Err(CalcError::Proviso { .. })));

    // d°_c requires a childless node; the plain d rule does not
    let stuck = RuleInstance::derive(
        RuleId::DiaDc,
        true,
        seq("<>a, [b]"),
        vec![slot(&[], 0)],
        Aux::default(),
    );
    assert!(matches!(stuck, Err(CalcError::Proviso { .. })));
    let ok = RuleInstance::base(RuleId::DiaD, seq("<>a, [b]"), vec![slot(&[], 0)]).unwrap();
    assert_eq!(ok.premises, vec![seq("[b], [a]")]);
}

#[test]
fn cut_shapes_and_ranks() {
    let mut aux = Aux { formula: Some(f("[]p & q")), ..Aux::default() };
    let inst =
        RuleInstance::derive(RuleId::Cut, false, seq("a"), vec![node(&[])], aux.clone()).unwrap();
    assert_eq!(inst.premises, vec![seq("a, []p & q"), seq("a, <>~p | ~q")]);
    assert_eq!(inst.cut_rank(), Some(3));

    aux.m = 2;
    aux.n = 1;
    let inst =
        RuleInstance::derive(RuleId::MCut, false, seq("a"), vec![node(&[])], aux).unwrap();
    assert_eq!(inst.premises, vec![seq("a, []p & q, []p & q"), seq("a, <>~p | ~q")]);

    let aux = Aux { formula: Some(f("p")), y: axioms::FOUR, targets: vec![vec![0]], ..Aux::default() };
    let inst = RuleInstance::derive(RuleId::YCut, false, seq("a, [b]"), vec![node(&[])], aux)
        .unwrap();
    assert_eq!(inst.premises, vec![seq("a, [b], []p"), seq("a, <>~p, [b, <>~p]")]);
    assert_eq!(inst.cut_rank(), Some(2));
}

#[test]
fn ycut_hole_characterization() {
    let mk = |y, targets: Vec<Vec<usize>>| {
        let aux = Aux { formula: Some(f("p")), y, targets, ..Aux::default() };
        RuleInstance { rule: RuleId::YCut, circle: false, conclusion: seq("[a, [b]], [c]"),
            active: vec![node(&[0])], aux, premises: Vec::new() }
    };
    assert!(ycut_proviso_holds(&mk(Axioms::EMPTY, vec![])));
    assert!(!ycut_proviso_holds(&mk(Axioms::EMPTY, vec![vec![0, 0]])));
    assert!(ycut_proviso_holds(&mk(axioms::FOUR, vec![vec![0], vec![0, 0]])));
    assert!(!ycut_proviso_holds(&mk(axioms::FOUR, vec![vec![1]])));
    assert!(ycut_proviso_holds(&mk(axioms::FIVE, vec![vec![1]])));
    assert!(ycut_proviso_holds(&mk(axioms::FOUR.with(axioms::FIVE), vec![vec![1], vec![]])));
    // with Y = {5} and targets present, the main hole must not be the root
    let aux = Aux { formula: Some(f("p")), y: axioms::FIVE, targets: vec![vec![0]], ..Aux::default() };
    let at_root = RuleInstance { rule: RuleId::YCut, circle: false, conclusion: seq("[a]"),
        active: vec![node(&[])], aux, premises: Vec::new() };
    assert!(!ycut_proviso_holds(&at_root));
}

#[test]
fn ystr_follows_the_same_shapes() {
    // Y = ∅: both holes at the same node — a no-op move
    let inst = RuleInstance::derive(
        RuleId::YStr,
        false,
        seq("a, [b]"),
        vec![node(&[]), node(&[0])],
        Aux { y: Axioms::EMPTY, ..Aux::default() },
    )
    .unwrap();
    assert_eq!(inst.premises, vec![seq("a, [b]")]);
    // Y = {4}: move a box deeper along its own branch
    let inst = RuleInstance::derive(
        RuleId::YStr,
        false,
        seq("[a], [b]"),
        vec![node(&[0]), node(&[1])],
        Aux { y: axioms::FOUR, ..Aux::default() },
    );
    // destination [0] is not a descendant of the source parent [] ... it is: [] is root
    let inst = inst.unwrap();
    assert_eq!(inst.premises, vec![seq("[a, [b]]")]);
    let bad = RuleInstance::derive(
        RuleId::YStr,
        false,
        seq("[a, [b]]"),
        vec![node(&[]), node(&[0, 0])],
        Aux { y: axioms::FOUR, ..Aux::default() },
    );
    assert!(matches!(bad, Err(CalcError::Proviso { .. })));
}

#[test]
fn position_maps_into_premises() {
    // box consumes its formula and renumbers the rest of the node
    // (built directly so the box sits between the atoms)
    let c = NestedSequent::leaf(vec![f("x"), f("[]a"), f("y")]);
    let inst = RuleInstance::base(RuleId::Box, c, vec![slot(&[], 1)]).unwrap();
    assert_eq!(premise_slot(&inst, 0, &FormulaSlot::new(vec![], 0)),
        Some(FormulaSlot::new(vec![], 0)));
    assert_eq!(premise_slot(&inst, 0, &FormulaSlot::new(vec![], 1)), None);
    assert_eq!(premise_slot(&inst, 0, &FormulaSlot::new(vec![], 2)),
        Some(FormulaSlot::new(vec![], 1)));

    // [t] relocates picked material into the fresh box
    let inst = RuleInstance::base(RuleId::StrT, seq("a, b, [c]"), vec![pick(&[], &[1], &[0])])
        .unwrap();
    assert_eq!(premise_slot(&inst, 0, &FormulaSlot::new(vec![], 1)),
        Some(FormulaSlot::new(vec![0], 0)));
    assert_eq!(premise_node_addr(&inst, 0, &[0]), Some(vec![0, 0]));

    // [4] relocates the split node's pieces next to their parent
    let inst = RuleInstance::base(RuleId::Str4, seq("a, [[b], c]"),
        vec![node(&[0]), node(&[0, 0])]).unwrap();
    assert_eq!(premise_node_addr(&inst, 0, &[0, 0]), Some(vec![0]));
    assert_eq!(premise_node_addr(&inst, 0, &[0]), Some(vec![1]));

    // weakened-away children have no counterpart
    let inst =
        RuleInstance::base(RuleId::Wk, seq("a, [b], [c]"), vec![pick(&[], &[], &[0])]).unwrap();
    assert_eq!(premise_node_addr(&inst, 0, &[0]), None);
    assert_eq!(premise_node_addr(&inst, 0, &[1]), Some(vec![0]));
}

#[test]
fn multi_rules() {
    let inst = RuleInstance::derive(
        RuleId::MBox,
        false,
        seq("[]a, b"),
        vec![slot(&[], 1)],
        Aux { m: 2, ..Aux::default() },
    )
    .unwrap();
    assert_eq!(inst.premises, vec![seq("b, [a, a]")]);
    let inst = RuleInstance::derive(
        RuleId::MAnd,
        false,
        seq("a & b"),
        vec![slot(&[], 0)],
        Aux { m: 2, n: 1, ..Aux::default() },
    )
    .unwrap();
    assert_eq!(inst.premises, vec![seq("a, a"), seq("b")]);
}

#[test]
fn instance_enumeration_matches_the_system() {
    let s = seq("a | b, <>c, [d]");
    let sys = System::logical_circle(Axioms::EMPTY);
    let insts = applicable_instances(&s, &sys);
    let rules: Vec<RuleId> = insts.iter().map(|i| i.rule).collect();
    assert!(rules.contains(&RuleId::Or));
    assert!(rules.contains(&RuleId::DiaKc));
    assert!(!rules.contains(&RuleId::DiaTc));
    assert!(insts.iter().all(|i| i.circle || i.rule == RuleId::Axiom));

    let sys = System::logical_circle(axioms::T.with(axioms::FIVE));
    let rules: Vec<RuleId> =
        applicable_instances(&s, &sys).iter().map(|i| i.rule).collect();
    assert!(rules.contains(&RuleId::DiaTc));
    // 5c needs a diamond below the root
    assert!(!rules.contains(&RuleId::Dia5c));
    let deep = seq("[<>c], [d]");
    let rules: Vec<RuleId> =
        applicable_instances(&deep, &sys).iter().map(|i| i.rule).collect();
    assert!(rules.contains(&RuleId::Dia5c));

    // saturated sequent: no instance survives the °-proviso
    let sat = seq("a | b, a, b");
    assert!(applicable_instances(&sat, &System::logical_circle(Axioms::EMPTY)).is_empty());
}

#[test]
fn proof_json_round_trip() {
    let p = k_like_example();
    let v = proof_to_json(&p);
    let back = proof_from_json(v).unwrap();
    assert!(check_proof(&back, &System::logical(Axioms::EMPTY)).is_ok());
    assert_eq!(back.size(), p.size());
    assert_eq!(back.conclusion(), p.conclusion());

    let bad = serde_json::json!({
        "concl": {"fs": ["a"], "kids": []},
        "rule": "frobnicate",
        "active": [],
        "prems": []
    });
    assert!(matches!(proof_from_json(bad), Err(ProofJsonError::UnknownRule { .. })));
}
