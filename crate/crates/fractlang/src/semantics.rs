//! Small-step transition semantics and finite unfolding.
//!
//! A well-formed process term generates a finite, productive labelled
//! transition system; a probabilistic term generates a finite labelled
//! Markov chain. Unfolding is a breadth-first closure of the step
//! relation with states canonicalized up to alpha-equivalence, which is
//! what makes the closure terminate.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;

use num_traits::{One, Zero};
use thiserror::Error;

use crate::rational::Rational;
use crate::syntax::{ActionLabel, PTerm, Term, TermNode};

/// Bound on reachable states before unfolding gives up. Finiteness is
/// guaranteed for well-formed terms, so hitting the budget signals a
/// canonicalization bug rather than a big input.
pub const DEFAULT_STATE_BUDGET: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum UnfoldError {
    #[error("reachable state set exceeded the budget of {0} states")]
    StateBudgetExceeded(usize),
}

/// A finite, productive labelled transition system. States are canonical
/// terms; `root` is the state of the original term.
#[derive(Debug, Clone)]
pub struct Lts {
    states: Vec<Term>,
    succ: Vec<Vec<(ActionLabel, usize)>>,
    root: usize,
    alphabet: BTreeSet<ActionLabel>,
}

impl Lts {
    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn state(&self, i: usize) -> &Term {
        &self.states[i]
    }

    pub fn states(&self) -> &[Term] {
        &self.states
    }

    pub fn root(&self) -> usize {
        self.root
    }

    /// Outgoing edges of a state, in insertion (BFS) order.
    pub fn successors(&self, i: usize) -> &[(ActionLabel, usize)] {
        &self.succ[i]
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, &ActionLabel, usize)> {
        self.succ
            .iter()
            .enumerate()
            .flat_map(|(i, out)| out.iter().map(move |(a, j)| (i, a, *j)))
    }

    pub fn num_edges(&self) -> usize {
        self.succ.iter().map(Vec::len).sum()
    }

    /// The action alphabet of the generating term (labels in prefix
    /// position), a superset of the labels on edges.
    pub fn alphabet(&self) -> &BTreeSet<ActionLabel> {
        &self.alphabet
    }

    /// Plain-text adjacency dump (`state <i> <term>` / `edge <i> <a> <j>`).
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (i, t) in self.states.iter().enumerate() {
            writeln!(out, "state {i} {t}").unwrap();
        }
        for (i, a, j) in self.edges() {
            writeln!(out, "edge {i} {a} {j}").unwrap();
        }
        out
    }
}

/// A finite labelled Markov chain. Per state, the transition
/// distribution is a finitely supported map from (action, target) to a
/// positive rational; entries sum to exactly 1.
#[derive(Debug, Clone)]
pub struct Lmc {
    states: Vec<PTerm>,
    trans: Vec<Vec<(ActionLabel, usize, Rational)>>,
    root: usize,
    alphabet: BTreeSet<ActionLabel>,
}

impl Lmc {
    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn state(&self, i: usize) -> &PTerm {
        &self.states[i]
    }

    pub fn root(&self) -> usize {
        self.root
    }

    /// Support of the transition distribution at `i`, in insertion order.
    pub fn transitions(&self, i: usize) -> &[(ActionLabel, usize, Rational)] {
        &self.trans[i]
    }

    pub fn alphabet(&self) -> &BTreeSet<ActionLabel> {
        &self.alphabet
    }

    /// The underlying LTS: keep the (strictly positive) support edges.
    pub fn underlying_lts(&self) -> Lts {
        let succ = self
            .trans
            .iter()
            .map(|row| row.iter().map(|(a, j, _)| (a.clone(), *j)).collect())
            .collect();
        Lts {
            states: self.states.iter().map(strip_to_term).collect(),
            succ,
            root: self.root,
            alphabet: self.alphabet.clone(),
        }
    }

    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (i, t) in self.states.iter().enumerate() {
            writeln!(out, "state {i} {t}").unwrap();
        }
        for (i, row) in self.trans.iter().enumerate() {
            for (a, j, p) in row {
                writeln!(out, "edge {i} {a} {j} {p}").unwrap();
            }
        }
        out
    }
}

/// Forgets choice weights, mapping a probabilistic term onto the plain
/// grammar (used for the underlying LTS of an LMC).
fn strip_to_term(t: &PTerm) -> Term {
    match t {
        TermNode::Var(v) => TermNode::Var(v.clone()),
        TermNode::BoundVar(i) => TermNode::BoundVar(*i),
        TermNode::Prefix(a, e) => TermNode::Prefix(a.clone(), Box::new(strip_to_term(e))),
        TermNode::Branch(_, l, r) => {
            TermNode::Branch((), Box::new(strip_to_term(l)), Box::new(strip_to_term(r)))
        }
        TermNode::Mu(b, e) => TermNode::Mu(b.clone(), Box::new(strip_to_term(e))),
    }
}

/// One small step: the set of pairs `(a, f)` with `e -a-> f`.
///
/// Prefixes yield their body, sums union their branches, and `mu`
/// unfolds first. Duplicates (up to alpha-equivalence) collapse; the
/// result is returned in discovery order and is never empty.
///
/// The term must be well formed; unguarded recursion would not
/// terminate here.
pub fn step(e: &Term) -> Vec<(ActionLabel, Term)> {
    let mut out = Vec::new();
    collect_steps(e, &mut out);
    assert!(!out.is_empty(), "well-formed terms always progress");
    out
}

fn collect_steps(e: &Term, out: &mut Vec<(ActionLabel, Term)>) {
    match e {
        TermNode::Prefix(a, body) => {
            let pair = (a.clone(), body.as_ref().clone());
            if !out.contains(&pair) {
                out.push(pair);
            }
        }
        TermNode::Branch(_, l, r) => {
            collect_steps(l, out);
            collect_steps(r, out);
        }
        TermNode::Mu(..) => {
            let unfolded = e.unfold_fixpoint().expect("mu unfolds");
            collect_steps(&unfolded, out);
        }
        TermNode::Var(_) | TermNode::BoundVar(_) => {
            panic!("step on a term with free variables")
        }
    }
}

/// The transition distribution of a probabilistic term: prefixes are
/// point masses, choices mix with weights `r` and `1 - r`, `mu` unfolds.
/// Zero-probability branches are dropped exactly; the returned weights
/// are positive and sum to exactly 1.
pub fn step_prob(e: &PTerm) -> Vec<((ActionLabel, PTerm), Rational)> {
    let mut out: Vec<((ActionLabel, PTerm), Rational)> = Vec::new();
    collect_steps_prob(e, &Rational::one(), &mut out);
    let total: Rational = out.iter().map(|(_, r)| r.clone()).sum();
    assert!(total.is_one(), "transition weights must sum to 1");
    out
}

fn collect_steps_prob(e: &PTerm, weight: &Rational, out: &mut Vec<((ActionLabel, PTerm), Rational)>) {
    match e {
        TermNode::Prefix(a, body) => {
            let key = (a.clone(), body.as_ref().clone());
            if let Some(entry) = out.iter_mut().find(|(k, _)| *k == key) {
                entry.1 += weight;
            } else {
                out.push((key, weight.clone()));
            }
        }
        TermNode::Branch(r, l, rr) => {
            let left = weight * r;
            if !left.is_zero() {
                collect_steps_prob(l, &left, out);
            }
            let right = weight * &(Rational::one() - r);
            if !right.is_zero() {
                collect_steps_prob(rr, &right, out);
            }
        }
        TermNode::Mu(..) => {
            let unfolded = e.unfold_fixpoint().expect("mu unfolds");
            collect_steps_prob(&unfolded, weight, out);
        }
        TermNode::Var(_) | TermNode::BoundVar(_) => {
            panic!("step on a term with free variables")
        }
    }
}

/// Breadth-first closure of [`step`] from `e`, canonicalizing states by
/// alpha-equivalence.
pub fn unfold(e: &Term) -> Result<Lts, UnfoldError> {
    unfold_with_budget(e, DEFAULT_STATE_BUDGET)
}

pub fn unfold_with_budget(e: &Term, budget: usize) -> Result<Lts, UnfoldError> {
    e.check_well_formed()
        .expect("unfold requires a well-formed process term");
    let mut states: Vec<Term> = vec![e.clone()];
    let mut index: HashMap<Term, usize> = HashMap::from([(e.clone(), 0)]);
    let mut succ: Vec<Vec<(ActionLabel, usize)>> = Vec::new();
    let mut next = 0;
    while next < states.len() {
        let current = states[next].clone();
        let mut row = Vec::new();
        for (a, target) in step(&current) {
            let id = match index.get(&target) {
                Some(&id) => id,
                None => {
                    let id = states.len();
                    if id >= budget {
                        return Err(UnfoldError::StateBudgetExceeded(budget));
                    }
                    index.insert(target.clone(), id);
                    states.push(target);
                    id
                }
            };
            row.push((a, id));
        }
        succ.push(row);
        next += 1;
    }
    Ok(Lts {
        states,
        succ,
        root: 0,
        alphabet: e.alphabet(),
    })
}

/// Breadth-first closure of [`step_prob`].
pub fn unfold_prob(e: &PTerm) -> Result<Lmc, UnfoldError> {
    unfold_prob_with_budget(e, DEFAULT_STATE_BUDGET)
}

pub fn unfold_prob_with_budget(e: &PTerm, budget: usize) -> Result<Lmc, UnfoldError> {
    e.check_well_formed()
        .expect("unfold requires a well-formed process term");
    let mut states: Vec<PTerm> = vec![e.clone()];
    let mut index: HashMap<PTerm, usize> = HashMap::from([(e.clone(), 0)]);
    let mut trans: Vec<Vec<(ActionLabel, usize, Rational)>> = Vec::new();
    let mut next = 0;
    while next < states.len() {
        let current = states[next].clone();
        let mut row: Vec<(ActionLabel, usize, Rational)> = Vec::new();
        for ((a, target), p) in step_prob(&current) {
            let id = match index.get(&target) {
                Some(&id) => id,
                None => {
                    let id = states.len();
                    if id >= budget {
                        return Err(UnfoldError::StateBudgetExceeded(budget));
                    }
                    index.insert(target.clone(), id);
                    states.push(target);
                    id
                }
            };
            row.push((a, id, p));
        }
        trans.push(row);
        next += 1;
    }
    Ok(Lmc {
        states,
        trans,
        root: 0,
        alphabet: e.alphabet(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;
    use crate::syntax::{alpha_eq, parse_pterm, parse_term};

    fn act(name: &str) -> ActionLabel {
        ActionLabel::new(name)
    }

    #[test]
    fn prefix_steps_to_its_body() {
        let e = parse_term("a.(mu v. b.v)").unwrap();
        let steps = step(&e);
        assert_eq!(steps.len(), 1);
        assert_eq!(steps[0].0, act("a"));
        assert!(alpha_eq(&steps[0].1, &parse_term("mu v. b.v").unwrap()));
    }

    #[test]
    fn fixpoint_unfolds_to_a_self_loop() {
        let e = parse_term("mu v. a.v").unwrap();
        let steps = step(&e);
        assert_eq!(steps.len(), 1);
        assert!(alpha_eq(&steps[0].1, &e));
        let lts = unfold(&e).unwrap();
        assert_eq!(lts.num_states(), 1);
        assert_eq!(lts.num_edges(), 1);
        assert_eq!(lts.successors(0), &[(act("a"), 0)]);
    }

    #[test]
    fn step_of_mu_equals_step_of_unfolding() {
        for src in [
            "mu v. a.v + b.v",
            "mu w. mu v. (a1.a2.v + a1.a3.w)",
            "mu v. a.(b.v + c.v)",
        ] {
            let e = parse_term(src).unwrap();
            let unfolded = e.unfold_fixpoint().unwrap();
            assert_eq!(step(&e), step(&unfolded), "{src}");
        }
    }

    #[test]
    fn fig5_example_steps_and_unfolds() {
        let e1 = parse_term("mu w. mu v. (a1.a2.v + a1.a3.w)").unwrap();
        let f1 = e1.unfold_fixpoint().unwrap();
        let steps = step(&e1);
        assert_eq!(steps.len(), 2);
        let a2f1 = TermNode::prefix(act("a2"), f1.clone());
        let a3e1 = TermNode::prefix(act("a3"), e1.clone());
        assert!(alpha_eq(&steps[0].1, &a2f1));
        assert!(alpha_eq(&steps[1].1, &a3e1));

        let lts = unfold(&e1).unwrap();
        assert_eq!(lts.num_states(), 4);
        assert_eq!(lts.num_edges(), 6);

        let e2 = parse_term("mu v. a1.(a2.v + a3.v)").unwrap();
        let lts2 = unfold(&e2).unwrap();
        assert_eq!(lts2.num_states(), 2);
        assert_eq!(lts2.num_edges(), 3);
    }

    #[test]
    fn duplicate_edges_collapse() {
        let e = parse_term("mu v. a.v + a.v").unwrap();
        let lts = unfold(&e).unwrap();
        assert_eq!(lts.num_states(), 1);
        assert_eq!(lts.num_edges(), 1);
    }

    #[test]
    fn every_state_is_productive() {
        for src in [
            "mu v. a.v",
            "mu w. mu v. (a1.a2.v + a1.a3.w)",
            "mu v. (a.v + b.(mu u. c.u))",
        ] {
            let lts = unfold(&parse_term(src).unwrap()).unwrap();
            for i in 0..lts.num_states() {
                assert!(!lts.successors(i).is_empty(), "{src} state {i}");
            }
        }
    }

    #[test]
    fn point_mass_for_prefix() {
        let e = parse_pterm("a.(mu v. b.v +[1/2] c.v)").unwrap();
        let d = step_prob(&e);
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].1, rat(1, 1));
    }

    #[test]
    fn mixing_a_distribution_with_itself_is_identity() {
        let e = parse_pterm("mu v. a.v +[1/3] b.v").unwrap();
        let mixed = PTerm::choice(e.clone(), rat(1, 2), e.clone());
        assert_eq!(step_prob(&mixed), step_prob(&e));
    }

    #[test]
    fn weights_accumulate_after_canonicalization() {
        let e = parse_pterm("mu v. (a.v +[1/3] b.v)").unwrap();
        let d = step_prob(&e);
        assert_eq!(d.len(), 2);
        assert_eq!(d[0].0 .0, act("a"));
        assert_eq!(d[0].1, rat(1, 3));
        assert_eq!(d[1].0 .0, act("b"));
        assert_eq!(d[1].1, rat(2, 3));
        // Both targets are the root again.
        let lmc = unfold_prob(&e).unwrap();
        assert_eq!(lmc.num_states(), 1);
        assert_eq!(
            lmc.transitions(0),
            &[(act("a"), 0, rat(1, 3)), (act("b"), 0, rat(2, 3))]
        );
    }

    #[test]
    fn zero_probability_branches_are_dropped() {
        let e = parse_pterm("mu v. a.v +[0] b.v").unwrap();
        let lmc = unfold_prob(&e).unwrap();
        assert_eq!(lmc.transitions(lmc.root()), &[(act("b"), 0, rat(1, 1))]);
        // The dropped branch never contributes states.
        assert_eq!(lmc.num_states(), 1);
    }

    #[test]
    fn row_sums_are_exactly_one() {
        let e = parse_pterm("mu v. (a.v +[1/7] b.v) +[3/5] c.(mu w. d.w +[2/9] e.w)").unwrap();
        let lmc = unfold_prob(&e).unwrap();
        for i in 0..lmc.num_states() {
            let total: Rational = lmc.transitions(i).iter().map(|(_, _, p)| p.clone()).sum();
            assert!(total.is_one(), "state {i} sums to {total}");
        }
    }

    #[test]
    fn dump_format_is_line_based() {
        let lts = unfold(&parse_term("mu v. a.v + b.(mu w. c.w)").unwrap()).unwrap();
        let dump = lts.dump();
        assert!(dump.lines().any(|l| l.starts_with("state 0 ")));
        assert!(dump.lines().any(|l| l == "edge 0 a 0"));
        let lmc = unfold_prob(&parse_pterm("mu v. a.v +[1/3] b.v").unwrap()).unwrap();
        assert!(lmc.dump().lines().any(|l| l == "edge 0 a 0 1/3"));
    }

    #[test]
    fn alphabet_comes_from_prefix_positions() {
        let e = parse_pterm("mu v. a.v +[0] b.v").unwrap();
        let lmc = unfold_prob(&e).unwrap();
        // `a` is in the alphabet even though its only edge has weight 0.
        assert!(lmc.alphabet().contains(&act("a")));
        assert!(lmc.alphabet().contains(&act("b")));
    }
}
