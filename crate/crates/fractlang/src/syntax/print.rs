//! Pretty-printing back to the surface grammar.
//!
//! Binder hints are freshened against free variables and enclosing
//! binders, so printed output always reparses to an alpha-equivalent
//! term.

use std::collections::BTreeSet;
use std::fmt;

use crate::rational::Rational;

use super::{is_valid_ident, TermNode};

/// Weight annotations that know how to print their branch operator.
pub trait BranchWeight: Clone + Eq + std::hash::Hash + fmt::Debug {
    fn write_op(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result;
}

impl BranchWeight for () {
    fn write_op(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(" + ")
    }
}

impl BranchWeight for Rational {
    fn write_op(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, " +[{}] ", self)
    }
}

struct Printer<'a, W> {
    term: &'a TermNode<W>,
    avoid: BTreeSet<String>,
}

impl<W: BranchWeight> fmt::Display for TermNode<W> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let avoid = self
            .free_vars()
            .into_iter()
            .map(|v| v.name().to_string())
            .collect();
        Printer { term: self, avoid }.fmt(f)
    }
}

impl<W: BranchWeight> Printer<'_, W> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut env = Vec::new();
        self.write(f, self.term, &mut env, true)
    }

    fn fresh(&self, hint: &str, env: &[String]) -> String {
        let base = if is_valid_ident(hint) { hint } else { "v" };
        let clashes = |name: &str| {
            name == "mu" || self.avoid.contains(name) || env.iter().any(|n| n == name)
        };
        if !clashes(base) {
            return base.to_string();
        }
        for i in 0.. {
            let candidate = format!("{base}{i}");
            if !clashes(&candidate) {
                return candidate;
            }
        }
        unreachable!()
    }

    /// `top` means the position allows a bare `mu` and a bare sum chain
    /// (top level, a mu body, or directly inside parentheses).
    fn write(
        &self,
        f: &mut fmt::Formatter<'_>,
        t: &TermNode<W>,
        env: &mut Vec<String>,
        top: bool,
    ) -> fmt::Result {
        match t {
            TermNode::Mu(binder, body) => {
                if !top {
                    f.write_str("(")?;
                }
                let name = self.fresh(&binder.0, env);
                write!(f, "mu {name}. ")?;
                env.push(name);
                self.write(f, body, env, true)?;
                env.pop();
                if !top {
                    f.write_str(")")?;
                }
                Ok(())
            }
            TermNode::Branch(..) => {
                if !top {
                    f.write_str("(")?;
                }
                self.write_chain(f, t, env)?;
                if !top {
                    f.write_str(")")?;
                }
                Ok(())
            }
            TermNode::Prefix(a, body) => {
                // Prefix bodies are prefixes or atoms; sums and mus get
                // parenthesized by the non-top recursive call.
                write!(f, "{a}.")?;
                self.write(f, body, env, false)
            }
            TermNode::Var(v) => f.write_str(v.name()),
            TermNode::BoundVar(i) => {
                let idx = env.len().checked_sub(1 + *i as usize);
                match idx {
                    Some(k) => f.write_str(&env[k]),
                    // Dangling index: only reachable on ill-formed terms.
                    None => write!(f, "?{i}"),
                }
            }
        }
    }

    /// Writes a left-associated chain `x + y + z` without outer parens.
    fn write_chain(
        &self,
        f: &mut fmt::Formatter<'_>,
        t: &TermNode<W>,
        env: &mut Vec<String>,
    ) -> fmt::Result {
        if let TermNode::Branch(w, l, r) = t {
            match l.as_ref() {
                TermNode::Branch(..) => self.write_chain(f, l, env)?,
                _ => self.write(f, l, env, false)?,
            }
            w.write_op(f)?;
            self.write(f, r, env, false)?;
            Ok(())
        } else {
            self.write(f, t, env, false)
        }
    }
}
