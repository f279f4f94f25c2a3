//! Seeded random generation of well-formed terms.
//!
//! Used by the soundness fuzzing harness together with
//! [`crate::proof::rewrite_random`], and by property tests. Terms are
//! built constructively so that closedness and guardedness hold by
//! construction: a variable leaf may only reference a binder that
//! already sits behind an action prefix.

use rand::Rng;

use crate::rational::rat;
use crate::syntax::{ActionLabel, PTerm, Term, TermNode, Var};

/// A random closed, guarded process term with at most roughly
/// `max_size` nodes over the given alphabet.
pub fn random_term(rng: &mut impl Rng, max_size: usize, alphabet: &[ActionLabel]) -> Term {
    assert!(!alphabet.is_empty());
    let mut fresh = 0;
    let t = gen_node(rng, max_size.max(3), alphabet, &mut Vec::new(), &mut fresh, &mut |_| ());
    debug_assert!(t.is_well_formed());
    t
}

/// A random closed, guarded probabilistic term; choice weights come from
/// a small palette of exact rationals (including the endpoints 0 and 1).
pub fn random_pterm(rng: &mut impl Rng, max_size: usize, alphabet: &[ActionLabel]) -> PTerm {
    assert!(!alphabet.is_empty());
    let palette = [
        rat(1, 2),
        rat(1, 3),
        rat(2, 3),
        rat(1, 4),
        rat(3, 4),
        rat(2, 5),
        rat(1, 6),
        rat(0, 1),
        rat(1, 1),
    ];
    let mut fresh = 0;
    let t = gen_node(
        rng,
        max_size.max(3),
        alphabet,
        &mut Vec::new(),
        &mut fresh,
        &mut |rng| palette[rng.gen_range(0..palette.len())].clone(),
    );
    debug_assert!(t.is_well_formed());
    t
}

/// A random open term whose free variables are drawn from `free`, all
/// treated as substitutable anywhere (they need no guard).
pub fn random_open_term(
    rng: &mut impl Rng,
    max_size: usize,
    alphabet: &[ActionLabel],
    free: &[Var],
) -> Term {
    assert!(!alphabet.is_empty());
    assert!(!free.is_empty(), "open terms need at least one free variable");
    let mut env: Vec<(String, bool)> = free
        .iter()
        .map(|v| (v.name().to_string(), true))
        .collect();
    let mut fresh = 0;
    gen_body(rng, max_size.max(1), alphabet, &mut env, &mut fresh, &mut |_| ())
}

fn gen_node<W: Clone>(
    rng: &mut impl Rng,
    budget: usize,
    alphabet: &[ActionLabel],
    env: &mut Vec<(String, bool)>,
    fresh: &mut usize,
    weight: &mut impl FnMut(&mut dyn rand::RngCore) -> W,
) -> TermNode<W> {
    // Top level must be closed, so start under a binder.
    let name = format!("v{fresh}");
    *fresh += 1;
    env.push((name.clone(), false));
    let body = gen_body(rng, budget.saturating_sub(1), alphabet, env, fresh, weight);
    env.pop();
    TermNode::mu(&name, body)
}

fn gen_body<W: Clone>(
    rng: &mut impl Rng,
    budget: usize,
    alphabet: &[ActionLabel],
    env: &mut Vec<(String, bool)>,
    fresh: &mut usize,
    weight: &mut impl FnMut(&mut dyn rand::RngCore) -> W,
) -> TermNode<W> {
    let guarded: Vec<String> = env
        .iter()
        .filter(|(_, g)| *g)
        .map(|(n, _)| n.clone())
        .collect();
    if budget <= 1 {
        return if let Some(name) = pick(rng, &guarded) {
            TermNode::Var(Var::new(&name))
        } else {
            // No referencable binder yet: guard the innermost one.
            let a = alphabet[rng.gen_range(0..alphabet.len())].clone();
            let mut inner = env.clone();
            for entry in inner.iter_mut() {
                entry.1 = true;
            }
            let target = inner.last().expect("generation starts under a binder");
            TermNode::Prefix(a, Box::new(TermNode::Var(Var::new(&target.0))))
        };
    }
    let choice = rng.gen_range(0..100);
    if choice < 35 {
        // Prefix: guards everything in scope.
        let a = alphabet[rng.gen_range(0..alphabet.len())].clone();
        let saved: Vec<bool> = env.iter().map(|(_, g)| *g).collect();
        for entry in env.iter_mut() {
            entry.1 = true;
        }
        let body = gen_body(rng, budget - 1, alphabet, env, fresh, weight);
        for (entry, old) in env.iter_mut().zip(saved) {
            entry.1 = old;
        }
        TermNode::Prefix(a, Box::new(body))
    } else if choice < 70 && budget >= 4 {
        let left_budget = rng.gen_range(1..budget - 1);
        let l = gen_body(rng, left_budget, alphabet, env, fresh, weight);
        let r = gen_body(rng, budget - 1 - left_budget, alphabet, env, fresh, weight);
        TermNode::Branch(weight(rng), Box::new(l), Box::new(r))
    } else if choice < 85 && budget >= 3 {
        let name = format!("v{fresh}");
        *fresh += 1;
        env.push((name.clone(), false));
        let body = gen_body(rng, budget - 1, alphabet, env, fresh, weight);
        env.pop();
        TermNode::mu(&name, body)
    } else if let Some(name) = pick(rng, &guarded) {
        TermNode::Var(Var::new(&name))
    } else {
        let a = alphabet[rng.gen_range(0..alphabet.len())].clone();
        let saved: Vec<bool> = env.iter().map(|(_, g)| *g).collect();
        for entry in env.iter_mut() {
            entry.1 = true;
        }
        let body = gen_body(rng, budget - 1, alphabet, env, fresh, weight);
        for (entry, old) in env.iter_mut().zip(saved) {
            entry.1 = old;
        }
        TermNode::Prefix(a, Box::new(body))
    }
}

fn pick(rng: &mut impl Rng, names: &[String]) -> Option<String> {
    if names.is_empty() {
        None
    } else {
        Some(names[rng.gen_range(0..names.len())].clone())
    }
}

/// Standard alphabets for fuzzing.
pub fn alphabet(size: usize) -> Vec<ActionLabel> {
    ["a", "b", "c", "d", "e", "f"]
        .iter()
        .take(size.clamp(1, 6))
        .map(|n| ActionLabel::new(*n))
        .collect()
}
