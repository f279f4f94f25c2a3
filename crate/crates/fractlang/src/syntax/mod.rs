//! Abstract syntax of process terms and probabilistic process terms.
//!
//! Terms use a locally nameless representation: bound variables are de
//! Bruijn indices pointing at their enclosing `mu` binder, free variables
//! carry names. Binder name hints are kept for printing but ignored by
//! `Eq` and `Hash`, so structural equality *is* alpha-equivalence and
//! substitution can never capture.
//!
//! The two calculi share one node type, [`TermNode`], parameterized by
//! the annotation on binary branch nodes: `()` for nondeterministic sums,
//! an exact probability for convex choices.

mod parse;
mod print;

pub use parse::{parse_pterm, parse_pterm_open, parse_term, parse_term_open, ParseError};

use std::collections::BTreeSet;
use std::hash::{Hash, Hasher};

use thiserror::Error;

use crate::rational::Rational;

/// An action label: lowercase alphanumeric, starting with a letter.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ActionLabel(String);

impl ActionLabel {
    /// Panics if `name` is not a valid label (`[a-z][a-z0-9]*`, not `mu`).
    pub fn new(name: impl Into<String>) -> Self {
        let name = name.into();
        assert!(is_valid_ident(&name), "invalid action label `{name}`");
        ActionLabel(name)
    }

    pub fn name(&self) -> &str {
        &self.0
    }
}

impl std::fmt::Display for ActionLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

/// A variable name as written in source text.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(String);

impl Var {
    pub fn new(name: impl Into<String>) -> Self {
        let name = name.into();
        assert!(is_valid_ident(&name), "invalid variable name `{name}`");
        Var(name)
    }

    pub fn name(&self) -> &str {
        &self.0
    }
}

impl std::fmt::Display for Var {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

/// Whether `s` is a valid action/variable identifier
/// (`[a-z][a-z0-9]*`, excluding the keyword `mu`).
pub fn is_valid_ident(s: &str) -> bool {
    let mut chars = s.chars();
    let head_ok = matches!(chars.next(), Some(c) if c.is_ascii_lowercase());
    head_ok
        && chars.all(|c| c.is_ascii_lowercase() || c.is_ascii_digit())
        && s != "mu"
}

/// Name hint attached to a `mu` binder.
///
/// Hints only affect printing: they compare equal and hash to nothing, so
/// term equality is equality up to consistent bound-variable renaming.
#[derive(Debug, Clone)]
pub struct Binder(pub String);

impl PartialEq for Binder {
    fn eq(&self, _other: &Self) -> bool {
        true
    }
}

impl Eq for Binder {}

impl Hash for Binder {
    fn hash<H: Hasher>(&self, _state: &mut H) {}
}

/// One layer of term structure, shared between the two calculi.
///
/// `W` annotates binary branch nodes: `()` gives plain sums (`e1 + e2`),
/// [`Rational`] gives convex choices (`e1 +[r] e2`).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum TermNode<W> {
    /// A free variable. Well-formed process terms contain none.
    Var(Var),
    /// A bound variable as a de Bruijn index to its enclosing `Mu`.
    BoundVar(u32),
    /// `a.e` — emit the action, continue as the body.
    Prefix(ActionLabel, Box<TermNode<W>>),
    /// Binary branch: sum or convex choice depending on `W`.
    Branch(W, Box<TermNode<W>>, Box<TermNode<W>>),
    /// `mu v. e` — recursive definition; the body refers to the binder
    /// through index 0.
    Mu(Binder, Box<TermNode<W>>),
}

/// Milner-style process terms: `v | a.e | e1 + e2 | mu v. e`.
pub type Term = TermNode<()>;

/// Stark–Smolka-style probabilistic terms: `v | a.e | e1 +[r] e2 | mu v. e`.
pub type PTerm = TermNode<Rational>;

/// Violations of the closedness/guardedness conditions on process terms.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WellFormednessError {
    /// Some occurrence of the variable is not under an action prefix
    /// inside its binder's scope.
    #[error("variable `{0}` has an unguarded occurrence")]
    Unguarded(String),
    /// The variable occurs free (outside any matching binder).
    #[error("variable `{0}` occurs free")]
    FreeVariable(String),
}

impl<W: Clone> TermNode<W> {
    pub fn var(name: &str) -> Self {
        TermNode::Var(Var::new(name))
    }

    pub fn prefix(action: ActionLabel, body: Self) -> Self {
        TermNode::Prefix(action, Box::new(body))
    }

    /// Builds `mu name. body`, closing free occurrences of `name` in
    /// `body` into bound variables.
    pub fn mu(name: &str, body: Self) -> Self {
        let var = Var::new(name);
        let closed = body.close(&var, 0);
        TermNode::Mu(Binder(name.to_string()), Box::new(closed))
    }

    fn close(self, var: &Var, depth: u32) -> Self {
        match self {
            TermNode::Var(v) if &v == var => TermNode::BoundVar(depth),
            TermNode::Var(v) => TermNode::Var(v),
            TermNode::BoundVar(i) => TermNode::BoundVar(i),
            TermNode::Prefix(a, e) => TermNode::Prefix(a, Box::new(e.close(var, depth))),
            TermNode::Branch(w, l, r) => TermNode::Branch(
                w,
                Box::new(l.close(var, depth)),
                Box::new(r.close(var, depth)),
            ),
            TermNode::Mu(b, e) => TermNode::Mu(b, Box::new(e.close(var, depth + 1))),
        }
    }

    /// Shifts dangling bound indices `>= cutoff` up by `by`.
    fn shift(&self, by: u32, cutoff: u32) -> Self {
        match self {
            TermNode::Var(v) => TermNode::Var(v.clone()),
            TermNode::BoundVar(i) if *i >= cutoff => TermNode::BoundVar(i + by),
            TermNode::BoundVar(i) => TermNode::BoundVar(*i),
            TermNode::Prefix(a, e) => TermNode::Prefix(a.clone(), Box::new(e.shift(by, cutoff))),
            TermNode::Branch(w, l, r) => TermNode::Branch(
                w.clone(),
                Box::new(l.shift(by, cutoff)),
                Box::new(r.shift(by, cutoff)),
            ),
            TermNode::Mu(b, e) => TermNode::Mu(b.clone(), Box::new(e.shift(by, cutoff + 1))),
        }
    }

    /// Instantiates binder index `depth` of `self` with `rep`.
    fn open_at(&self, depth: u32, rep: &Self) -> Self {
        match self {
            TermNode::Var(v) => TermNode::Var(v.clone()),
            TermNode::BoundVar(i) if *i == depth => rep.shift(depth, 0),
            TermNode::BoundVar(i) if *i > depth => TermNode::BoundVar(i - 1),
            TermNode::BoundVar(i) => TermNode::BoundVar(*i),
            TermNode::Prefix(a, e) => TermNode::Prefix(a.clone(), Box::new(e.open_at(depth, rep))),
            TermNode::Branch(w, l, r) => TermNode::Branch(
                w.clone(),
                Box::new(l.open_at(depth, rep)),
                Box::new(r.open_at(depth, rep)),
            ),
            TermNode::Mu(b, e) => TermNode::Mu(b.clone(), Box::new(e.open_at(depth + 1, rep))),
        }
    }

    /// For `mu v. e`, returns `e[mu v. e / v]`; `None` on other nodes.
    pub fn unfold_fixpoint(&self) -> Option<Self> {
        match self {
            TermNode::Mu(_, body) => Some(body.open_at(0, self)),
            _ => None,
        }
    }

    /// For `mu v. e` and a replacement `g`, returns `e[g/v]`.
    pub fn open_binder_with(&self, g: &Self) -> Option<Self> {
        match self {
            TermNode::Mu(_, body) => Some(body.open_at(0, g)),
            _ => None,
        }
    }

    /// Capture-avoiding substitution of `g` for free occurrences of `v`.
    pub fn subst_free(&self, v: &Var, g: &Self) -> Self {
        self.subst_free_at(v, g, 0)
    }

    fn subst_free_at(&self, v: &Var, g: &Self, depth: u32) -> Self {
        match self {
            TermNode::Var(w) if w == v => g.shift(depth, 0),
            TermNode::Var(w) => TermNode::Var(w.clone()),
            TermNode::BoundVar(i) => TermNode::BoundVar(*i),
            TermNode::Prefix(a, e) => {
                TermNode::Prefix(a.clone(), Box::new(e.subst_free_at(v, g, depth)))
            }
            TermNode::Branch(w, l, r) => TermNode::Branch(
                w.clone(),
                Box::new(l.subst_free_at(v, g, depth)),
                Box::new(r.subst_free_at(v, g, depth)),
            ),
            TermNode::Mu(b, e) => {
                TermNode::Mu(b.clone(), Box::new(e.subst_free_at(v, g, depth + 1)))
            }
        }
    }

    /// Names of free variables, in sorted order.
    pub fn free_vars(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        self.collect_free(&mut out);
        out
    }

    fn collect_free(&self, out: &mut BTreeSet<Var>) {
        match self {
            TermNode::Var(v) => {
                out.insert(v.clone());
            }
            TermNode::BoundVar(_) => {}
            TermNode::Prefix(_, e) => e.collect_free(out),
            TermNode::Branch(_, l, r) => {
                l.collect_free(out);
                r.collect_free(out);
            }
            TermNode::Mu(_, e) => e.collect_free(out),
        }
    }

    /// The action alphabet: labels appearing in prefix position.
    pub fn alphabet(&self) -> BTreeSet<ActionLabel> {
        let mut out = BTreeSet::new();
        self.collect_alphabet(&mut out);
        out
    }

    fn collect_alphabet(&self, out: &mut BTreeSet<ActionLabel>) {
        match self {
            TermNode::Var(_) | TermNode::BoundVar(_) => {}
            TermNode::Prefix(a, e) => {
                out.insert(a.clone());
                e.collect_alphabet(out);
            }
            TermNode::Branch(_, l, r) => {
                l.collect_alphabet(out);
                r.collect_alphabet(out);
            }
            TermNode::Mu(_, e) => e.collect_alphabet(out),
        }
    }

    /// Node count.
    pub fn size(&self) -> usize {
        match self {
            TermNode::Var(_) | TermNode::BoundVar(_) => 1,
            TermNode::Prefix(_, e) | TermNode::Mu(_, e) => 1 + e.size(),
            TermNode::Branch(_, l, r) => 1 + l.size() + r.size(),
        }
    }

    /// Checks that the term is a process term: closed (no free variables,
    /// no dangling indices) and guarded (every bound occurrence sits under
    /// at least one prefix inside its binder's scope).
    pub fn check_well_formed(&self) -> Result<(), WellFormednessError> {
        if let Some(v) = self.free_vars().into_iter().next() {
            return Err(WellFormednessError::FreeVariable(v.name().to_string()));
        }
        let dangling = self.unguarded_indices()?;
        if !dangling.is_empty() {
            // A dangling index has no surface name; report it as free.
            return Err(WellFormednessError::FreeVariable(format!(
                "#{}",
                dangling.iter().next().unwrap()
            )));
        }
        Ok(())
    }

    pub fn is_well_formed(&self) -> bool {
        self.check_well_formed().is_ok()
    }

    /// Guardedness alone, for open terms (derivation contexts).
    pub fn check_guarded(&self) -> Result<(), WellFormednessError> {
        self.unguarded_indices().map(|_| ())
    }

    /// Bound indices (relative to this node) that occur with no prefix
    /// above them; errors as soon as a binder fails to guard its variable.
    fn unguarded_indices(&self) -> Result<BTreeSet<u32>, WellFormednessError> {
        match self {
            TermNode::Var(_) => Ok(BTreeSet::new()),
            TermNode::BoundVar(i) => Ok(BTreeSet::from([*i])),
            TermNode::Prefix(_, e) => {
                // Everything below the prefix is guarded, but inner
                // binders must still be checked.
                e.unguarded_indices()?;
                Ok(BTreeSet::new())
            }
            TermNode::Branch(_, l, r) => {
                let mut set = l.unguarded_indices()?;
                set.extend(r.unguarded_indices()?);
                Ok(set)
            }
            TermNode::Mu(b, e) => {
                let inner = e.unguarded_indices()?;
                if inner.contains(&0) {
                    return Err(WellFormednessError::Unguarded(b.0.clone()));
                }
                Ok(inner.into_iter().filter(|i| *i > 0).map(|i| i - 1).collect())
            }
        }
    }

    /// The subterm at `path` (child indices: prefix/mu body = 0, branch
    /// left = 0, right = 1).
    pub fn subterm_at(&self, path: &[usize]) -> Option<&Self> {
        let mut cur = self;
        for &step in path {
            cur = match (cur, step) {
                (TermNode::Prefix(_, e), 0) => e,
                (TermNode::Branch(_, l, _), 0) => l,
                (TermNode::Branch(_, _, r), 1) => r,
                (TermNode::Mu(_, e), 0) => e,
                _ => return None,
            };
        }
        Some(cur)
    }

    /// Replaces the subterm at `path` with `new`, leaving the context as
    /// is. Returns `None` if the path does not exist.
    pub fn replace_at(&self, path: &[usize], new: Self) -> Option<Self> {
        if path.is_empty() {
            return Some(new);
        }
        let (step, rest) = (path[0], &path[1..]);
        Some(match (self, step) {
            (TermNode::Prefix(a, e), 0) => {
                TermNode::Prefix(a.clone(), Box::new(e.replace_at(rest, new)?))
            }
            (TermNode::Branch(w, l, r), 0) => {
                TermNode::Branch(w.clone(), Box::new(l.replace_at(rest, new)?), r.clone())
            }
            (TermNode::Branch(w, l, r), 1) => {
                TermNode::Branch(w.clone(), l.clone(), Box::new(r.replace_at(rest, new)?))
            }
            (TermNode::Mu(b, e), 0) => {
                TermNode::Mu(b.clone(), Box::new(e.replace_at(rest, new)?))
            }
            _ => return None,
        })
    }
}

impl Term {
    pub fn sum(left: Term, right: Term) -> Term {
        TermNode::Branch((), Box::new(left), Box::new(right))
    }
}

impl PTerm {
    /// Builds `left +[weight] right`. Panics outside `[0, 1]`.
    pub fn choice(left: PTerm, weight: Rational, right: PTerm) -> PTerm {
        assert!(
            weight >= Rational::from_integer(0.into())
                && weight <= Rational::from_integer(1.into()),
            "choice probability out of range"
        );
        TermNode::Branch(weight, Box::new(left), Box::new(right))
    }
}

/// `e[g/v]`: replaces free occurrences of `v` in `e` by `g`, renaming
/// bound variables as needed (capture cannot occur in the locally
/// nameless representation).
pub fn substitute<W: Clone>(e: &TermNode<W>, g: &TermNode<W>, v: &Var) -> TermNode<W> {
    e.subst_free(v, g)
}

/// True iff the terms are equal up to consistent bound-variable renaming.
pub fn alpha_eq<W: Eq>(e1: &TermNode<W>, e2: &TermNode<W>) -> bool {
    e1 == e2
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;

    fn a(name: &str) -> ActionLabel {
        ActionLabel::new(name)
    }

    #[test]
    fn mu_closes_its_variable() {
        let t = Term::mu("v", Term::prefix(a("a"), Term::var("v")));
        match &t {
            TermNode::Mu(_, body) => match body.as_ref() {
                TermNode::Prefix(_, inner) => assert_eq!(**inner, TermNode::BoundVar(0)),
                other => panic!("unexpected body {other:?}"),
            },
            other => panic!("unexpected term {other:?}"),
        }
        assert!(t.is_well_formed());
    }

    #[test]
    fn alpha_equivalence_ignores_binder_hints() {
        let t1 = Term::mu("v", Term::prefix(a("a"), Term::var("v")));
        let t2 = Term::mu("w", Term::prefix(a("a"), Term::var("w")));
        let t3 = Term::mu("v", Term::prefix(a("b"), Term::var("v")));
        assert!(alpha_eq(&t1, &t2));
        assert!(!alpha_eq(&t1, &t3));
    }

    #[test]
    fn shadowed_binder_is_untouched_by_substitution() {
        // (mu v. a.v)[g/v] = mu v. a.v
        let t = Term::mu("v", Term::prefix(a("a"), Term::var("v")));
        let g = Term::mu("w", Term::prefix(a("b"), Term::var("w")));
        assert_eq!(substitute(&t, &g, &Var::new("v")), t);
    }

    #[test]
    fn substitution_replaces_free_occurrences() {
        // (a.v)[mu w. b.w / v] = a.(mu w. b.w)
        let e = Term::prefix(a("a"), Term::var("v"));
        let g = Term::mu("w", Term::prefix(a("b"), Term::var("w")));
        let expected = Term::prefix(a("a"), g.clone());
        assert_eq!(substitute(&e, &g, &Var::new("v")), expected);
    }

    #[test]
    fn substitution_avoids_capture() {
        // (mu w. a.v + b.w)[c.w / v]: the free w in the replacement must
        // not be captured by the binder.
        let e = Term::mu(
            "w",
            Term::sum(
                Term::prefix(a("a"), Term::var("v")),
                Term::prefix(a("b"), Term::var("w")),
            ),
        );
        let g = Term::prefix(a("c"), Term::var("w"));
        let result = substitute(&e, &g, &Var::new("v"));
        let expected = Term::mu(
            "u",
            Term::sum(
                Term::prefix(a("a"), Term::prefix(a("c"), Term::var("w"))),
                Term::prefix(a("b"), Term::var("u")),
            ),
        );
        assert!(alpha_eq(&result, &expected));
        assert_eq!(result.free_vars(), BTreeSet::from([Var::new("w")]));
    }

    #[test]
    fn wellformedness_catches_unguarded_and_free() {
        let unguarded = Term::mu("v", Term::var("v"));
        assert_eq!(
            unguarded.check_well_formed(),
            Err(WellFormednessError::Unguarded("v".into()))
        );
        let open = Term::prefix(a("a"), Term::var("w"));
        assert_eq!(
            open.check_well_formed(),
            Err(WellFormednessError::FreeVariable("w".into()))
        );
        // Guardedness needs the prefix *inside* the binder scope.
        let outside = Term::prefix(a("a"), Term::mu("v", Term::var("v")));
        assert!(matches!(
            outside.check_well_formed(),
            Err(WellFormednessError::Unguarded(_))
        ));
    }

    #[test]
    fn unfold_fixpoint_substitutes_the_binder() {
        let t = Term::mu("v", Term::prefix(a("a"), Term::var("v")));
        let unfolded = t.unfold_fixpoint().unwrap();
        assert_eq!(unfolded, Term::prefix(a("a"), t.clone()));
        assert!(t.unfold_fixpoint().unwrap().is_well_formed());
    }

    #[test]
    fn nested_unfold_shifts_outer_indices() {
        // e = mu w. mu v. (a.v + b.w); unfolding the *inner* mu inside the
        // outer binder's scope must keep the reference to w intact.
        let inner = Term::mu(
            "v",
            Term::sum(
                Term::prefix(a("a"), Term::var("v")),
                Term::prefix(a("b"), Term::var("w")),
            ),
        );
        let e = Term::mu("w", inner);
        let unfolded = e.unfold_fixpoint().unwrap();
        assert!(unfolded.is_well_formed());
        // Unfolding again keeps things well formed.
        match &unfolded {
            TermNode::Mu(_, _) => {
                assert!(unfolded.unfold_fixpoint().unwrap().is_well_formed());
            }
            other => panic!("expected mu after unfold, got {other:?}"),
        }
    }

    #[test]
    fn choice_bounds_are_enforced() {
        let l = PTerm::prefix(a("a"), PTerm::var("v"));
        let r = PTerm::prefix(a("b"), PTerm::var("v"));
        let t = PTerm::mu("v", PTerm::choice(l, rat(1, 3), r));
        assert!(t.is_well_formed());
    }

    #[test]
    #[should_panic(expected = "out of range")]
    fn choice_rejects_out_of_range() {
        let l = PTerm::var("v");
        let r = PTerm::var("v");
        let _ = PTerm::choice(l, rat(3, 2), r);
    }

    #[test]
    fn paths_navigate_and_replace() {
        let t = Term::sum(
            Term::prefix(a("a"), Term::mu("v", Term::prefix(a("b"), Term::var("v")))),
            Term::prefix(a("c"), Term::mu("v", Term::prefix(a("b"), Term::var("v")))),
        );
        let sub = t.subterm_at(&[0, 0]).unwrap();
        assert!(matches!(sub, TermNode::Mu(_, _)));
        let replaced = t
            .replace_at(&[1], Term::prefix(a("d"), Term::mu("u", Term::prefix(a("b"), Term::var("u")))))
            .unwrap();
        assert!(matches!(replaced.subterm_at(&[1]), Some(TermNode::Prefix(l, _)) if l.name() == "d"));
        assert!(t.subterm_at(&[2]).is_none());
    }
}
