//! Kripke models: extraction from failed proof searches, relation
//! closures, frame verification and a direct model checker.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::axioms::{self, Axioms};
use crate::calculus::{applicable_instances, Active, System};
use crate::formula::Formula;
use crate::sequent::{NestedSequent, NodeAddress};

pub type Rel = BTreeSet<(usize, usize)>;

/// A finite pointed Kripke structure. States are indexed positions; each
/// state remembers the subtree of the finished sequent it came from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KripkeModel {
    /// Tag of each state: the address of its originating subtree.
    pub states: Vec<NodeAddress>,
    pub rel: Rel,
    /// proposition → states where it is true
    pub valuation: BTreeMap<String, BTreeSet<usize>>,
}

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("state {0} does not exist")]
    UnknownState(usize),
    #[error("sequent is axiomatic, no countermodel exists")]
    Axiomatic,
    #[error("sequent is not finished: rule {0} still applies")]
    NotFinished(&'static str),
    #[error("bad model JSON: {0}")]
    Json(String),
}

impl KripkeModel {
    pub fn state_count(&self) -> usize {
        self.states.len()
    }

    pub fn successors(&self, s: usize) -> impl Iterator<Item = usize> + '_ {
        self.rel.iter().filter(move |(a, _)| *a == s).map(|(_, b)| *b)
    }
}

/// Standard satisfaction at a state.
pub fn model_check(m: &KripkeModel, s: usize, f: &Formula) -> Result<bool, ModelError> {
    if s >= m.states.len() {
        return Err(ModelError::UnknownState(s));
    }
    Ok(check_in(m, s, f))
}

fn check_in(m: &KripkeModel, s: usize, f: &Formula) -> bool {
    match f {
        Formula::Atom { name, negated } => {
            let holds = m.valuation.get(name.as_ref()).is_some_and(|v| v.contains(&s));
            holds != *negated
        }
        Formula::Or(a, b) => check_in(m, s, a) || check_in(m, s, b),
        Formula::And(a, b) => check_in(m, s, a) && check_in(m, s, b),
        Formula::Dia(a) => m.successors(s).any(|t| check_in(m, t, a)),
        Formula::Box(a) => m.successors(s).all(|t| check_in(m, t, a)),
    }
}

/// Least extension of `rel` satisfying the conditions of X∖{d}, then the
/// serial closure of that.
pub fn close(rel: &Rel, x: Axioms, n_states: usize) -> Rel {
    let mut r = rel.clone();
    loop {
        let mut grown = false;
        let pairs: Vec<(usize, usize)> = r.iter().copied().collect();
        if x.contains(axioms::T) {
            for s in 0..n_states {
                grown |= r.insert((s, s));
            }
        }
        if x.contains(axioms::B) {
            for &(s, t) in &pairs {
                grown |= r.insert((t, s));
            }
        }
        if x.contains(axioms::FOUR) {
            for &(s, t) in &pairs {
                for &(t2, u) in &pairs {
                    if t == t2 {
                        grown |= r.insert((s, u));
                    }
                }
            }
        }
        if x.contains(axioms::FIVE) {
            for &(s, t) in &pairs {
                for &(s2, u) in &pairs {
                    if s == s2 {
                        grown |= r.insert((t, u));
                    }
                }
            }
        }
        if !grown {
            break;
        }
    }
    if x.contains(axioms::D) {
        serial_closure(&mut r, n_states);
    }
    r
}

/// Add s→s at every state without a successor.
pub fn serial_closure(r: &mut Rel, n_states: usize) {
    for s in 0..n_states {
        if !r.iter().any(|(a, _)| *a == s) {
            r.insert((s, s));
        }
    }
}

fn undirected_components(rel: &Rel, n_states: usize) -> Vec<usize> {
    // union-find over s ↔ t edges
    let mut parent: Vec<usize> = (0..n_states).collect();
    fn find(parent: &mut Vec<usize>, mut s: usize) -> usize {
        while parent[s] != s {
            parent[s] = parent[parent[s]];
            s = parent[s];
        }
        s
    }
    for &(a, b) in rel {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        parent[ra] = rb;
    }
    (0..n_states).map(|s| find(&mut parent, s)).collect()
}

/// rel plus every pair (s,t) with a chain s ← s₁ ↔ … ↔ sₙ → t. This is the
/// least euclidean relation containing rel; kept as an independent check
/// against the fixpoint closure.
pub fn euclidean_connection_closure(rel: &Rel, n_states: usize) -> Rel {
    let comp = undirected_components(rel, n_states);
    // per component: all pairs of out-neighbours of its members
    let mut out_of: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
    for &(a, b) in rel {
        out_of.entry(comp[a]).or_default().insert(b);
    }
    let mut r = rel.clone();
    for outs in out_of.values() {
        for &s in outs {
            for &t in outs {
                r.insert((s, t));
            }
        }
    }
    r
}

/// rel plus every pair (s,t) with a chain s = s₁ ↔ … ↔ sₙ → t: the least
/// transitive-and-euclidean relation containing rel. Oracle only.
pub fn transitive_euclidean_connection_closure(rel: &Rel, n_states: usize) -> Rel {
    let comp = undirected_components(rel, n_states);
    let mut out_of: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
    for &(a, b) in rel {
        out_of.entry(comp[a]).or_default().insert(b);
    }
    let mut r = rel.clone();
    for s in 0..n_states {
        if let Some(outs) = out_of.get(&comp[s]) {
            for &t in outs {
                r.insert((s, t));
            }
        }
    }
    r
}

fn formula_set(n: &NestedSequent) -> BTreeSet<&Formula> {
    n.formulas.iter().collect()
}

/// The redirect target of each cyclic leaf: the first non-leaf node (in
/// DFS order) carrying the same formula set. Returns (cyclic-leaf, target)
/// pairs.
pub fn cyclic_leaves(s: &NestedSequent) -> Vec<(NodeAddress, NodeAddress)> {
    let addrs = s.addresses();
    let inner: Vec<&NodeAddress> =
        addrs.iter().filter(|a| !s.node(a).unwrap().children.is_empty()).collect();
    let mut out = Vec::new();
    for a in &addrs {
        let n = s.node(a).unwrap();
        if !n.children.is_empty() {
            continue;
        }
        let set = formula_set(n);
        if let Some(target) = inner.iter().find(|b| formula_set(s.node(b).unwrap()) == set) {
            out.push((a.clone(), (*target).clone()));
        }
    }
    out
}

/// Model construction from the set sequent of a finished, non-axiomatic
/// derivation leaf. Returns the model and its root state.
pub fn extract_model(
    finished: &NestedSequent,
    x: Axioms,
) -> Result<(KripkeModel, usize), ModelError> {
    let s = finished.set_sequent();
    if s.is_axiomatic() {
        return Err(ModelError::Axiomatic);
    }
    let cyc = cyclic_leaves(&s);
    let cyc_set: BTreeSet<&NodeAddress> = cyc.iter().map(|(a, _)| a).collect();
    // finishedness: no °-rule instance may fire with its principal formula
    // at a non-cyclic node
    for inst in applicable_instances(&s, &System::logical_circle(x)) {
        if let Some(Active::Slot(slot)) = inst.active.first() {
            if !cyc_set.contains(&slot.node) {
                return Err(ModelError::NotFinished(inst.rule.name()));
            }
        }
    }

    let addrs = s.addresses();
    let states: Vec<NodeAddress> =
        addrs.iter().filter(|a| !cyc_set.contains(a)).cloned().collect();
    let index: BTreeMap<&NodeAddress, usize> =
        states.iter().enumerate().map(|(i, a)| (a, i)).collect();
    let redirect: BTreeMap<&NodeAddress, &NodeAddress> =
        cyc.iter().map(|(a, b)| (a, b)).collect();

    let mut rel = Rel::new();
    for (i, a) in states.iter().enumerate() {
        let n = s.node(a).unwrap();
        for k in 0..n.children.len() {
            let mut c = a.clone();
            c.push(k);
            let target = redirect.get(&&c).map_or(&c, |t| *t);
            rel.insert((i, index[target]));
        }
    }
    let rel = close(&rel, x, states.len());

    let mut valuation: BTreeMap<String, BTreeSet<usize>> = BTreeMap::new();
    for p in s.sequent_subformulas().iter().filter_map(|f| match f {
        Formula::Atom { name, .. } => Some(name.to_string()),
        _ => None,
    }) {
        valuation.entry(p).or_default();
    }
    for (i, a) in states.iter().enumerate() {
        for f in &s.node(a).unwrap().formulas {
            if let Formula::Atom { name, negated: true } = f {
                valuation.entry(name.to_string()).or_default().insert(i);
            }
        }
    }

    let model = KripkeModel { states, rel, valuation };
    Ok((model, 0))
}

/// Does the frame of `m` satisfy every condition named in X?
pub fn verify_frame(m: &KripkeModel, x: Axioms) -> bool {
    let n = m.states.len();
    let r = &m.rel;
    let has = |s, t| r.contains(&(s, t));
    let mut ok = true;
    if x.contains(axioms::D) {
        ok &= (0..n).all(|s| (0..n).any(|t| has(s, t)));
    }
    if x.contains(axioms::T) {
        ok &= (0..n).all(|s| has(s, s));
    }
    if x.contains(axioms::B) {
        ok &= r.iter().all(|&(s, t)| has(t, s));
    }
    if x.contains(axioms::FOUR) {
        ok &= r.iter().all(|&(s, t)| r.iter().all(|&(t2, u)| t != t2 || has(s, u)));
    }
    if x.contains(axioms::FIVE) {
        ok &= r.iter().all(|&(s, t)| r.iter().all(|&(s2, u)| s != s2 || has(t, u)));
    }
    ok
}

/// A refutation is good when the frame fits X and the root state falsifies
/// the goal's corresponding formula.
pub fn verify_countermodel(
    m: &KripkeModel,
    root: usize,
    goal: &NestedSequent,
    x: Axioms,
) -> Result<bool, ModelError> {
    let holds = model_check(m, root, &goal.corresponding_formula())?;
    Ok(verify_frame(m, x) && !holds)
}

#[derive(Serialize, Deserialize)]
struct ModelJson {
    states: Vec<NodeAddress>,
    rel: Vec<(usize, usize)>,
    val: BTreeMap<String, Vec<usize>>,
    root: usize,
}

pub fn model_to_json(m: &KripkeModel, root: usize) -> serde_json::Value {
    let j = ModelJson {
        states: m.states.clone(),
        rel: m.rel.iter().copied().collect(),
        val: m
            .valuation
            .iter()
            .map(|(p, ss)| (p.clone(), ss.iter().copied().collect()))
            .collect(),
        root,
    };
    serde_json::to_value(j).expect("model serialization cannot fail")
}

pub fn model_from_json(v: serde_json::Value) -> Result<(KripkeModel, usize), ModelError> {
    let j: ModelJson = serde_json::from_value(v).map_err(|e| ModelError::Json(e.to_string()))?;
    let n = j.states.len();
    if j.root >= n {
        return Err(ModelError::UnknownState(j.root));
    }
    for &(s, t) in &j.rel {
        if s >= n || t >= n {
            return Err(ModelError::Json(format!("edge ({s},{t}) out of range")));
        }
    }
    let m = KripkeModel {
        states: j.states,
        rel: j.rel.into_iter().collect(),
        valuation: j.val.into_iter().map(|(p, ss)| (p, ss.into_iter().collect())).collect(),
    };
    Ok((m, j.root))
}

/// GraphViz rendering: states labelled with their true propositions, the
/// root drawn with a double border.
pub fn model_to_dot(m: &KripkeModel, root: usize) -> String {
    let mut out = String::from("digraph model {\n  rankdir=LR;\n");
    for (i, addr) in m.states.iter().enumerate() {
        let props: Vec<&str> = m
            .valuation
            .iter()
            .filter(|(_, ss)| ss.contains(&i))
            .map(|(p, _)| p.as_str())
            .collect();
        let tag = if addr.is_empty() {
            "root".to_string()
        } else {
            addr.iter().map(|k| k.to_string()).collect::<Vec<_>>().join(".")
        };
        let shape = if i == root { ", peripheries=2" } else { "" };
        let _ = writeln!(out, "  s{i} [label=\"{tag}: {{{}}}\"{shape}];", props.join(","));
    }
    for &(s, t) in &m.rel {
        let _ = writeln!(out, "  s{s} -> s{t};");
    }
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::parse;
    use crate::sequent::parse_sequent;
    use rand::{Rng, SeedableRng};

    fn rel(pairs: &[(usize, usize)]) -> Rel {
        pairs.iter().copied().collect()
    }

    #[test]
    fn satisfaction_basics() {
        let m = KripkeModel {
            states: vec![vec![], vec![0]],
            rel: rel(&[(0, 1)]),
            valuation: [("p".to_string(), BTreeSet::from([1]))].into(),
        };
        assert!(model_check(&m, 0, &parse("<>p").unwrap()).unwrap());
        assert!(!model_check(&m, 0, &parse("[]~p").unwrap()).unwrap());
        assert!(!model_check(&m, 0, &parse("p").unwrap()).unwrap());
        // terminal state: boxes hold vacuously
        assert!(model_check(&m, 1, &parse("[]p & [](q & ~q)").unwrap()).unwrap());
        assert!(matches!(model_check(&m, 7, &parse("p").unwrap()), Err(ModelError::UnknownState(7))));
    }

    #[test]
    fn closure_examples() {
        assert_eq!(close(&rel(&[(0, 1)]), axioms::B, 2), rel(&[(0, 1), (1, 0)]));
        let r5 = close(&rel(&[(0, 1), (0, 2)]), axioms::FIVE, 3);
        for p in [(1, 2), (2, 1), (1, 1), (2, 2)] {
            assert!(r5.contains(&p), "{p:?} missing");
        }
        assert_eq!(close(&Rel::new(), axioms::D, 1), rel(&[(0, 0)]));
        // serial closure runs last: the added loop is not closed under 5
        let r = close(&rel(&[(0, 1)]), axioms::D, 3);
        assert_eq!(r, rel(&[(0, 1), (1, 1), (2, 2)]));
    }

    #[test]
    fn connection_closure_examples() {
        // 0→1 gives the one-step connection 1 ← 0 → 1, so (1,1) appears
        let r = euclidean_connection_closure(&rel(&[(0, 1)]), 2);
        assert!(r.contains(&(1, 1)));
        assert_eq!(euclidean_connection_closure(&Rel::new(), 3), Rel::new());
    }

    fn random_rel(rng: &mut impl Rng, n: usize) -> Rel {
        let mut r = Rel::new();
        for s in 0..n {
            for t in 0..n {
                if rng.gen_bool(0.25) {
                    r.insert((s, t));
                }
            }
        }
        r
    }

    #[test]
    fn fixpoint_closure_agrees_with_connection_characterizations() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5eed);
        for _ in 0..1000 {
            let n = rng.gen_range(1..=5);
            let r = random_rel(&mut rng, n);
            assert_eq!(close(&r, axioms::FIVE, n), euclidean_connection_closure(&r, n));
            assert_eq!(
                close(&r, axioms::FOUR.with(axioms::FIVE), n),
                transitive_euclidean_connection_closure(&r, n)
            );
        }
    }

    #[test]
    fn serial_closure_preserves_conditions() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..500 {
            let n = rng.gen_range(1..=4);
            let r = random_rel(&mut rng, n);
            for c in [axioms::T, axioms::B, axioms::FOUR, axioms::FIVE] {
                let closed = close(&r, c, n);
                let mut serial = closed.clone();
                serial_closure(&mut serial, n);
                let m = KripkeModel {
                    states: (0..n).map(|i| vec![i]).collect(),
                    rel: serial,
                    valuation: BTreeMap::new(),
                };
                assert!(verify_frame(&m, c.with(axioms::D)), "{c} broken by serial closure");
            }
        }
    }

    #[test]
    fn closure_is_minimal_on_small_instances() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        for _ in 0..50 {
            let n = rng.gen_range(1..=3);
            let r = random_rel(&mut rng, n);
            for x in [axioms::B, axioms::FOUR, axioms::FIVE, axioms::D.with(axioms::FOUR)] {
                let closed = close(&r, x, n);
                assert!(closed.is_superset(&r));
                let m = |rel: Rel| KripkeModel {
                    states: (0..n).map(|i| vec![i]).collect(),
                    rel,
                    valuation: BTreeMap::new(),
                };
                assert!(verify_frame(&m(closed.clone()), x));
                for &p in closed.difference(&r.clone()) {
                    let mut smaller = closed.clone();
                    smaller.remove(&p);
                    assert!(!verify_frame(&m(smaller), x), "removable pair {p:?} for {x}");
                }
            }
        }
    }

    #[test]
    fn extraction_from_a_single_node() {
        let s = parse_sequent("~p").unwrap();
        let (m, root) = extract_model(&s, Axioms::EMPTY).unwrap();
        assert_eq!(m.state_count(), 1);
        assert!(m.rel.is_empty());
        // the extracted state falsifies what its node carries: p is true
        assert!(!model_check(&m, root, &parse("~p").unwrap()).unwrap());
        assert!(verify_countermodel(&m, root, &s, Axioms::EMPTY).unwrap());
        // with d the single state gets a loop
        let (m, _) = extract_model(&s, axioms::D).unwrap();
        assert_eq!(m.rel, rel(&[(0, 0)]));
    }

    #[test]
    fn extraction_rejects_bad_leaves() {
        let ax = parse_sequent("p, ~p").unwrap();
        assert_eq!(extract_model(&ax, Axioms::EMPTY), Err(ModelError::Axiomatic));
        let open = parse_sequent("p | q").unwrap();
        assert!(matches!(
            extract_model(&open, Axioms::EMPTY),
            Err(ModelError::NotFinished(_))
        ));
    }

    #[test]
    fn cyclic_leaf_becomes_a_back_edge() {
        // root {~r}, child {~p} with grandchild {~p}: the grandchild leaf
        // repeats the formulas of the inner node [0]
        let mut s = NestedSequent::default();
        s.formulas.push(parse("~r").unwrap());
        let mut child = NestedSequent::singleton(parse("~p").unwrap());
        child.children.push(NestedSequent::singleton(parse("~p").unwrap()));
        s.children.push(child);
        let cyc = cyclic_leaves(&s);
        assert_eq!(cyc, vec![(vec![0, 0], vec![0])]);
        let (m, _) = extract_model(&s, Axioms::EMPTY).unwrap();
        assert_eq!(m.state_count(), 2);
        assert!(m.rel.contains(&(1, 1)), "back edge missing: {:?}", m.rel);
    }

    #[test]
    fn json_and_dot_round_trip() {
        let s = parse_sequent("~p, [~q]").unwrap();
        let (m, root) = extract_model(&s, axioms::T).unwrap();
        let v = model_to_json(&m, root);
        let (back, r2) = model_from_json(v).unwrap();
        assert_eq!((back, r2), (m.clone(), root));
        let dot = model_to_dot(&m, root);
        assert!(dot.contains("digraph"));
        assert!(dot.contains("s0 -> s0"));
        let bad = serde_json::json!({"states": [[]], "rel": [[0, 3]], "val": {}, "root": 0});
        assert!(model_from_json(bad).is_err());
    }
}
