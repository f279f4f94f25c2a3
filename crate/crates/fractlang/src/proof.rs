//! Checking derivations in the two equational axiom systems.
//!
//! A derivation is an explicit list of steps, each concluding an
//! equation `lhs == rhs` justified by an axiom instance (ID, CM, AS, DS,
//! FP, AE), an equational-logic rule (reflexivity, symmetry,
//! transitivity), or a congruence applied to earlier steps. The checker
//! validates every step; it never searches for proofs — the trace
//! equivalence decision procedure already answers yes/no, and accepted
//! derivations are certificates.
//!
//! The classic system axiomatizes trace (equivalently, fractal-recipe)
//! equivalence; the probabilistic system is sound for trace-measure
//! equivalence, with exact rational side conditions on the reweighted
//! associativity axiom.

use num_traits::{One, Zero};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::rational::{rat, Rational};
use crate::syntax::{
    parse_pterm, parse_pterm_open, parse_term, parse_term_open, PTerm, ParseError, Term, TermNode,
    Var,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rule {
    Id,
    Cm,
    As,
    Ds,
    Fp,
    Cn,
    Ae,
    Ua,
    Refl,
    Sym,
    Trans,
    Cong,
}

impl Rule {
    pub fn name(&self) -> &'static str {
        match self {
            Rule::Id => "ID",
            Rule::Cm => "CM",
            Rule::As => "AS",
            Rule::Ds => "DS",
            Rule::Fp => "FP",
            Rule::Cn => "CN",
            Rule::Ae => "AE",
            Rule::Ua => "UA",
            Rule::Refl => "REFL",
            Rule::Sym => "SYM",
            Rule::Trans => "TRANS",
            Rule::Cong => "CONG",
        }
    }

    fn from_name(name: &str) -> Option<Rule> {
        Some(match name {
            "ID" => Rule::Id,
            "CM" => Rule::Cm,
            "AS" => Rule::As,
            "DS" => Rule::Ds,
            "FP" => Rule::Fp,
            "CN" => Rule::Cn,
            "AE" => Rule::Ae,
            "UA" => Rule::Ua,
            "REFL" => Rule::Refl,
            "SYM" => Rule::Sym,
            "TRANS" => Rule::Trans,
            "CONG" => Rule::Cong,
            _ => return None,
        })
    }

    /// Number of premises the rule consumes; `None` means variable
    /// arity (CN takes one premise per context variable).
    fn arity(&self) -> Option<usize> {
        match self {
            Rule::Id | Rule::Cm | Rule::As | Rule::Ds | Rule::Fp | Rule::Ae | Rule::Refl => Some(0),
            Rule::Sym | Rule::Ua | Rule::Cong => Some(1),
            Rule::Trans => Some(2),
            Rule::Cn => None,
        }
    }
}

/// Multi-hole context data for (CN): a term with free variables and the
/// order in which premises fill them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Context<W> {
    pub term: TermNode<W>,
    pub vars: Vec<Var>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Step<W> {
    pub rule: Rule,
    /// 0-based indices of earlier steps.
    pub premises: Vec<usize>,
    pub lhs: TermNode<W>,
    pub rhs: TermNode<W>,
    /// Subterm path for positional congruence.
    pub path: Option<Vec<usize>>,
    /// Context instantiation for (CN).
    pub context: Option<Context<W>>,
}

impl<W> Step<W> {
    pub fn axiom(rule: Rule, lhs: TermNode<W>, rhs: TermNode<W>) -> Self {
        Step {
            rule,
            premises: vec![],
            lhs,
            rhs,
            path: None,
            context: None,
        }
    }

    pub fn derived(rule: Rule, premises: Vec<usize>, lhs: TermNode<W>, rhs: TermNode<W>) -> Self {
        Step {
            rule,
            premises,
            lhs,
            rhs,
            path: None,
            context: None,
        }
    }

    pub fn cong(premise: usize, path: Vec<usize>, lhs: TermNode<W>, rhs: TermNode<W>) -> Self {
        Step {
            rule: Rule::Cong,
            premises: vec![premise],
            lhs,
            rhs,
            path: Some(path),
            context: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Derivation<W> {
    pub steps: Vec<Step<W>>,
    pub goal: (TermNode<W>, TermNode<W>),
}

impl<W: Clone> Derivation<W> {
    /// A derivation whose goal is the last step's conclusion.
    pub fn new(steps: Vec<Step<W>>) -> Self {
        let goal = steps
            .last()
            .map(|s| (s.lhs.clone(), s.rhs.clone()))
            .expect("derivations have at least one step");
        Derivation { steps, goal }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Accept,
    /// 1-based index of the first failing step, plus the reason.
    Reject { step: usize, reason: String },
}

impl Verdict {
    pub fn is_accept(&self) -> bool {
        matches!(self, Verdict::Accept)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MalformedDerivation {
    #[error("derivation has no steps")]
    Empty,
    #[error("step {step}: premise {premise} does not refer to an earlier step")]
    DanglingPremise { step: usize, premise: usize },
    #[error("step {step}: rule {rule} expects {expected} premises, found {found}")]
    WrongArity {
        step: usize,
        rule: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("step {step}: {message}")]
    BadInstantiation { step: usize, message: String },
}

/// Axiom shapes that differ between the two systems (ID, CM, AS, DS).
/// Everything else — FP, CN, AE, UA and the equational-logic rules — is
/// shared and checked generically.
pub trait AxiomSystem: Clone + Eq + std::hash::Hash + std::fmt::Debug {
    fn check_axiom(rule: Rule, lhs: &TermNode<Self>, rhs: &TermNode<Self>) -> Result<(), String>;
}

impl AxiomSystem for () {
    fn check_axiom(rule: Rule, lhs: &Term, rhs: &Term) -> Result<(), String> {
        match rule {
            Rule::Id => match lhs {
                TermNode::Branch((), l, r) if l == r && rhs == l.as_ref() => Ok(()),
                _ => Err("(ID) expects `e + e == e`".into()),
            },
            Rule::Cm => match (lhs, rhs) {
                (TermNode::Branch((), a, b), TermNode::Branch((), b2, a2))
                    if a == a2 && b == b2 =>
                {
                    Ok(())
                }
                _ => Err("(CM) expects `e2 + e1 == e1 + e2`".into()),
            },
            Rule::As => match (lhs, rhs) {
                (TermNode::Branch((), e1, rest), TermNode::Branch((), front, e3)) => {
                    match (rest.as_ref(), front.as_ref()) {
                        (TermNode::Branch((), e2, e3l), TermNode::Branch((), e1r, e2r))
                            if e1 == e1r && e2 == e2r && e3l == e3 =>
                        {
                            Ok(())
                        }
                        _ => Err("(AS) expects `e1 + (e2 + e3) == (e1 + e2) + e3`".into()),
                    }
                }
                _ => Err("(AS) expects `e1 + (e2 + e3) == (e1 + e2) + e3`".into()),
            },
            Rule::Ds => match (lhs, rhs) {
                (TermNode::Prefix(a, body), TermNode::Branch((), l, r)) => {
                    match (body.as_ref(), l.as_ref(), r.as_ref()) {
                        (
                            TermNode::Branch((), e1, e2),
                            TermNode::Prefix(a1, f1),
                            TermNode::Prefix(a2, f2),
                        ) if a == a1 && a == a2 && e1 == f1 && e2 == f2 => Ok(()),
                        _ => Err("(DS) expects `a.(e1 + e2) == a.e1 + a.e2`".into()),
                    }
                }
                _ => Err("(DS) expects `a.(e1 + e2) == a.e1 + a.e2`".into()),
            },
            _ => unreachable!("only branch axioms are system-specific"),
        }
    }
}

impl AxiomSystem for Rational {
    fn check_axiom(rule: Rule, lhs: &PTerm, rhs: &PTerm) -> Result<(), String> {
        match rule {
            Rule::Id => match lhs {
                TermNode::Branch(_, l, r) if l == r && rhs == l.as_ref() => Ok(()),
                _ => Err("(ID) expects `e +[r] e == e`".into()),
            },
            Rule::Cm => match (lhs, rhs) {
                (TermNode::Branch(r, a, b), TermNode::Branch(s, b2, a2))
                    if a == a2 && b == b2 =>
                {
                    if *s == Rational::one() - r {
                        Ok(())
                    } else {
                        Err(format!(
                            "(CM) weight must flip to 1 - r: expected {}, found {s}",
                            Rational::one() - r
                        ))
                    }
                }
                _ => Err("(CM) expects `e1 +[r] e2 == e2 +[1-r] e1`".into()),
            },
            Rule::As => {
                // (e1 +[r] e2) +[s] e3 == e1 +[rs] (e2 +[s(1-r)/(1-rs)] e3)
                let (s, front, e3) = match lhs {
                    TermNode::Branch(s, front, e3) => (s, front, e3),
                    _ => return Err("(AS) expects `(e1 +[r] e2) +[s] e3` on the left".into()),
                };
                let (r, e1, e2) = match front.as_ref() {
                    TermNode::Branch(r, e1, e2) => (r, e1, e2),
                    _ => return Err("(AS) expects `(e1 +[r] e2) +[s] e3` on the left".into()),
                };
                let (p, e1r, rest) = match rhs {
                    TermNode::Branch(p, e1r, rest) => (p, e1r, rest),
                    _ => return Err("(AS) expects `e1 +[rs] (e2 +[q] e3)` on the right".into()),
                };
                let (q, e2r, e3r) = match rest.as_ref() {
                    TermNode::Branch(q, e2r, e3r) => (q, e2r, e3r),
                    _ => return Err("(AS) expects `e1 +[rs] (e2 +[q] e3)` on the right".into()),
                };
                if e1 != e1r || e2 != e2r || e3 != e3r {
                    return Err("(AS) subterms do not match across the equation".into());
                }
                let rs = r * s;
                if rs.is_one() {
                    // The reweighting denominator 1 - rs vanishes; the
                    // axiom has no reading here, so the instance is
                    // rejected rather than guessed at.
                    return Err("(AS) requires rs != 1: the right-hand weight is undefined".into());
                }
                if *p != rs {
                    return Err(format!("(AS) expects outer weight rs = {rs}, found {p}"));
                }
                let expected_q = s * (Rational::one() - r) / (Rational::one() - &rs);
                if *q != expected_q {
                    return Err(format!(
                        "(AS) expects inner weight s(1-r)/(1-rs) = {expected_q}, found {q}"
                    ));
                }
                Ok(())
            }
            Rule::Ds => match (lhs, rhs) {
                (TermNode::Prefix(a, body), TermNode::Branch(s, l, r)) => {
                    match (body.as_ref(), l.as_ref(), r.as_ref()) {
                        (
                            TermNode::Branch(w, e1, e2),
                            TermNode::Prefix(a1, f1),
                            TermNode::Prefix(a2, f2),
                        ) if a == a1 && a == a2 && e1 == f1 && e2 == f2 => {
                            if s == w {
                                Ok(())
                            } else {
                                Err(format!("(DS) weight must be preserved: {w} vs {s}"))
                            }
                        }
                        _ => Err("(DS) expects `a.(e1 +[r] e2) == a.e1 +[r] a.e2`".into()),
                    }
                }
                _ => Err("(DS) expects `a.(e1 +[r] e2) == a.e1 +[r] a.e2`".into()),
            },
            _ => unreachable!("only branch axioms are system-specific"),
        }
    }
}

/// Checks every step of a derivation. Structural defects (dangling
/// premises, missing instantiation data) are [`MalformedDerivation`]
/// errors; a step whose conclusion is not justified yields
/// [`Verdict::Reject`] with the 1-based step index and a reason.
pub fn check<W: AxiomSystem>(d: &Derivation<W>) -> Result<Verdict, MalformedDerivation> {
    if d.steps.is_empty() {
        return Err(MalformedDerivation::Empty);
    }
    for (i, step) in d.steps.iter().enumerate() {
        let number = i + 1;
        for &p in &step.premises {
            if p >= i {
                return Err(MalformedDerivation::DanglingPremise {
                    step: number,
                    premise: p + 1,
                });
            }
        }
        if let Some(expected) = step.rule.arity() {
            if step.premises.len() != expected {
                return Err(MalformedDerivation::WrongArity {
                    step: number,
                    rule: step.rule.name(),
                    expected,
                    found: step.premises.len(),
                });
            }
        }
        match step.rule {
            Rule::Cong => {
                let path = step.path.as_ref().ok_or_else(|| {
                    MalformedDerivation::BadInstantiation {
                        step: number,
                        message: "(CONG) requires a `path=` annotation".into(),
                    }
                })?;
                if step.lhs.subterm_at(path).is_none() {
                    return Err(MalformedDerivation::BadInstantiation {
                        step: number,
                        message: format!("path {path:?} does not exist in the left-hand side"),
                    });
                }
            }
            Rule::Cn => {
                let ctx = step.context.as_ref().ok_or_else(|| {
                    MalformedDerivation::BadInstantiation {
                        step: number,
                        message: "(CN) requires `ctx=` and `vars=` annotations".into(),
                    }
                })?;
                if ctx.vars.len() != step.premises.len() {
                    return Err(MalformedDerivation::BadInstantiation {
                        step: number,
                        message: format!(
                            "(CN) has {} context variables but {} premises",
                            ctx.vars.len(),
                            step.premises.len()
                        ),
                    });
                }
            }
            _ => {}
        }
    }
    for i in 0..d.steps.len() {
        if let Err(reason) = validate_step(&d.steps, i) {
            return Ok(Verdict::Reject {
                step: i + 1,
                reason,
            });
        }
    }
    let last = d.steps.last().unwrap();
    if last.lhs != d.goal.0 || last.rhs != d.goal.1 {
        return Ok(Verdict::Reject {
            step: d.steps.len(),
            reason: "final conclusion differs from the stated goal".into(),
        });
    }
    Ok(Verdict::Accept)
}

fn validate_step<W: AxiomSystem>(steps: &[Step<W>], i: usize) -> Result<(), String> {
    let step = &steps[i];
    let premise = |k: usize| {
        let p = &steps[step.premises[k]];
        (&p.lhs, &p.rhs)
    };
    match step.rule {
        Rule::Id | Rule::Cm | Rule::As | Rule::Ds => {
            W::check_axiom(step.rule, &step.lhs, &step.rhs)
        }
        Rule::Fp => {
            let unfolded = step
                .lhs
                .unfold_fixpoint()
                .ok_or("(FP) left-hand side must be a mu term")?;
            if unfolded == step.rhs {
                Ok(())
            } else {
                Err("(FP) right-hand side is not the unfolding of the left".into())
            }
        }
        Rule::Ae => match (&step.lhs, &step.rhs) {
            (TermNode::Mu(..), TermNode::Mu(..)) if step.lhs == step.rhs => Ok(()),
            (TermNode::Mu(..), TermNode::Mu(..)) => {
                Err("(AE) sides are not alpha-equivalent".into())
            }
            _ => Err("(AE) expects mu terms on both sides".into()),
        },
        Rule::Ua => {
            let (glhs, grhs) = premise(0);
            if glhs != &step.lhs {
                return Err("(UA) premise left-hand side must equal the conclusion's".into());
            }
            let expected = step
                .rhs
                .open_binder_with(&step.lhs)
                .ok_or("(UA) right-hand side must be a mu term")?;
            if grhs == &expected {
                Ok(())
            } else {
                Err("(UA) premise must conclude `g == e[g/v]` for the target `mu v. e`".into())
            }
        }
        Rule::Refl => {
            if step.lhs == step.rhs {
                Ok(())
            } else {
                Err("(REFL) sides differ".into())
            }
        }
        Rule::Sym => {
            let (plhs, prhs) = premise(0);
            if plhs == &step.rhs && prhs == &step.lhs {
                Ok(())
            } else {
                Err("(SYM) conclusion must flip the premise".into())
            }
        }
        Rule::Trans => {
            let (albs, arhs) = premise(0);
            let (blhs, brhs) = premise(1);
            if albs == &step.lhs && arhs == blhs && brhs == &step.rhs {
                Ok(())
            } else {
                Err("(TRANS) premises do not chain to the conclusion".into())
            }
        }
        Rule::Cong => {
            let path = step.path.as_ref().expect("validated structurally");
            let (plhs, prhs) = premise(0);
            let sub = step
                .lhs
                .subterm_at(path)
                .expect("validated structurally");
            if sub != plhs {
                return Err("(CONG) subterm at path differs from the premise left side".into());
            }
            let expected = step
                .lhs
                .replace_at(path, prhs.clone())
                .expect("path exists");
            if expected == step.rhs {
                Ok(())
            } else {
                Err("(CONG) right-hand side must be the left with the premise applied".into())
            }
        }
        Rule::Cn => {
            let ctx = step.context.as_ref().expect("validated structurally");
            // Premise sides must be closed so that sequential substitution
            // coincides with the simultaneous one.
            for k in 0..step.premises.len() {
                let (plhs, prhs) = premise(k);
                if !plhs.free_vars().is_empty() || !prhs.free_vars().is_empty() {
                    return Err("(CN) premise terms must be closed".into());
                }
            }
            let mut lhs = ctx.term.clone();
            let mut rhs = ctx.term.clone();
            for (k, v) in ctx.vars.iter().enumerate() {
                let (plhs, prhs) = premise(k);
                lhs = lhs.subst_free(v, plhs);
                rhs = rhs.subst_free(v, prhs);
            }
            if lhs != step.lhs {
                return Err("(CN) left-hand side is not the instantiated context".into());
            }
            if rhs != step.rhs {
                return Err("(CN) right-hand side is not the instantiated context".into());
            }
            Ok(())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DerivationParseError {
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("line {line}: {source}")]
    Term { line: usize, source: ParseError },
}

/// Parses the one-step-per-line derivation format:
///
/// ```text
/// <idx>: <RULE>(<premises>) <lhs> == <rhs> [path=0.1, ctx="...", vars=v1 v2]
/// ```
///
/// Steps are numbered from 1 in order; premises refer to earlier step
/// numbers; the goal is the last step's conclusion. Comments run from
/// `#` to end of line.
pub fn parse_derivation_classic(text: &str) -> Result<Derivation<()>, DerivationParseError> {
    parse_derivation(text, &parse_term, &parse_term_open)
}

pub fn parse_derivation_prob(text: &str) -> Result<Derivation<Rational>, DerivationParseError> {
    parse_derivation(text, &parse_pterm, &parse_pterm_open)
}

fn parse_derivation<W: Clone>(
    text: &str,
    parse_closed: &dyn Fn(&str) -> Result<TermNode<W>, ParseError>,
    parse_open: &dyn Fn(&str) -> Result<TermNode<W>, ParseError>,
) -> Result<Derivation<W>, DerivationParseError> {
    let mut steps: Vec<Step<W>> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line_no = lineno + 1;
        let err = |message: String| DerivationParseError::Line {
            line: line_no,
            message,
        };
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (idx_text, rest) = line
            .split_once(':')
            .ok_or_else(|| err("expected `<idx>: <rule>(...) ...`".into()))?;
        let idx: usize = idx_text
            .trim()
            .parse()
            .map_err(|_| err(format!("bad step index `{}`", idx_text.trim())))?;
        if idx != steps.len() + 1 {
            return Err(err(format!(
                "steps must be numbered consecutively; expected {}, found {idx}",
                steps.len() + 1
            )));
        }
        let rest = rest.trim_start();
        let open = rest
            .find('(')
            .ok_or_else(|| err("expected `(` after the rule name".into()))?;
        let rule_name = rest[..open].trim();
        let rule = Rule::from_name(rule_name)
            .ok_or_else(|| err(format!("unknown rule `{rule_name}`")))?;
        let close = rest[open..]
            .find(')')
            .map(|k| open + k)
            .ok_or_else(|| err("expected `)` closing the premise list".into()))?;
        let mut premises = Vec::new();
        let premise_text = rest[open + 1..close].trim();
        if !premise_text.is_empty() {
            for piece in premise_text.split(',') {
                let n: usize = piece
                    .trim()
                    .parse()
                    .map_err(|_| err(format!("bad premise index `{}`", piece.trim())))?;
                if n == 0 || n > steps.len() {
                    return Err(err(format!(
                        "premise {n} does not refer to an earlier step"
                    )));
                }
                premises.push(n - 1);
            }
        }
        let mut body = rest[close + 1..].trim();
        let mut path = None;
        let mut context_term: Option<String> = None;
        let mut context_vars: Option<Vec<Var>> = None;
        if body.ends_with(']') {
            let meta_start = body
                .rfind(" [")
                .ok_or_else(|| err("metadata block has no opening ` [`".into()))?;
            let meta = &body[meta_start + 2..body.len() - 1];
            body = body[..meta_start].trim();
            for pair in split_meta(meta) {
                let (key, value) = pair
                    .split_once('=')
                    .ok_or_else(|| err(format!("bad metadata `{pair}`")))?;
                match key.trim() {
                    "path" => {
                        let parsed: Result<Vec<usize>, _> = value
                            .trim()
                            .split('.')
                            .map(|s| s.trim().parse::<usize>())
                            .collect();
                        path = Some(parsed.map_err(|_| err(format!("bad path `{value}`")))?);
                    }
                    "ctx" => {
                        let v = value.trim();
                        let unquoted = v
                            .strip_prefix('"')
                            .and_then(|s| s.strip_suffix('"'))
                            .ok_or_else(|| err("`ctx` value must be quoted".into()))?;
                        context_term = Some(unquoted.to_string());
                    }
                    "vars" => {
                        context_vars = Some(
                            value
                                .split_whitespace()
                                .map(Var::new)
                                .collect(),
                        );
                    }
                    other => return Err(err(format!("unknown metadata key `{other}`"))),
                }
            }
        }
        let (lhs_text, rhs_text) = body
            .split_once("==")
            .ok_or_else(|| err("expected `<lhs> == <rhs>`".into()))?;
        let term_err = |source: ParseError| DerivationParseError::Term {
            line: line_no,
            source,
        };
        let lhs = parse_closed(lhs_text.trim()).map_err(term_err)?;
        let rhs = parse_closed(rhs_text.trim()).map_err(term_err)?;
        let context = match (context_term, context_vars) {
            (Some(t), Some(vars)) => Some(Context {
                term: parse_open(&t).map_err(term_err)?,
                vars,
            }),
            (Some(_), None) | (None, Some(_)) => {
                return Err(err("(CN) needs both `ctx=` and `vars=`".into()))
            }
            (None, None) => None,
        };
        steps.push(Step {
            rule,
            premises,
            lhs,
            rhs,
            path,
            context,
        });
    }
    if steps.is_empty() {
        return Err(DerivationParseError::Line {
            line: 1,
            message: "derivation has no steps".into(),
        });
    }
    Ok(Derivation::new(steps))
}

/// Splits `key=value, key=value` at top level, respecting quoted values.
fn split_meta(meta: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut current = String::new();
    let mut in_quotes = false;
    for c in meta.chars() {
        match c {
            '"' => {
                in_quotes = !in_quotes;
                current.push(c);
            }
            ',' if !in_quotes => {
                if !current.trim().is_empty() {
                    out.push(current.trim().to_string());
                }
                current.clear();
            }
            _ => current.push(c),
        }
    }
    if !current.trim().is_empty() {
        out.push(current.trim().to_string());
    }
    out
}

/// Local oriented rewrites available at a node, all instances of the
/// classic axioms.
fn classic_rewrites(t: &Term, allow_growth: bool) -> Vec<Term> {
    let mut out = Vec::new();
    match t {
        TermNode::Branch((), l, r) => {
            if l == r {
                out.push(l.as_ref().clone());
            }
            out.push(TermNode::Branch((), r.clone(), l.clone()));
            if let TermNode::Branch((), a, b) = l.as_ref() {
                // (a + b) + r == a + (b + r)
                out.push(Term::sum(
                    a.as_ref().clone(),
                    Term::sum(b.as_ref().clone(), r.as_ref().clone()),
                ));
            }
            if let TermNode::Branch((), b, c) = r.as_ref() {
                // l + (b + c) == (l + b) + c
                out.push(Term::sum(
                    Term::sum(l.as_ref().clone(), b.as_ref().clone()),
                    c.as_ref().clone(),
                ));
            }
            if let (TermNode::Prefix(a1, e1), TermNode::Prefix(a2, e2)) = (l.as_ref(), r.as_ref())
            {
                if a1 == a2 {
                    out.push(Term::prefix(
                        a1.clone(),
                        Term::sum(e1.as_ref().clone(), e2.as_ref().clone()),
                    ));
                }
            }
        }
        TermNode::Prefix(a, body) => {
            if let TermNode::Branch((), e1, e2) = body.as_ref() {
                out.push(Term::sum(
                    Term::prefix(a.clone(), e1.as_ref().clone()),
                    Term::prefix(a.clone(), e2.as_ref().clone()),
                ));
            }
        }
        TermNode::Mu(..) => {
            if allow_growth {
                out.push(t.unfold_fixpoint().expect("mu unfolds"));
            }
        }
        _ => {}
    }
    if allow_growth {
        out.push(Term::sum(t.clone(), t.clone()));
    }
    out
}

/// Local oriented rewrites from the probabilistic axioms. `fresh_weight`
/// parameterizes the expansion direction of (ID).
fn prob_rewrites(t: &PTerm, allow_growth: bool, fresh_weight: &Rational) -> Vec<PTerm> {
    let mut out = Vec::new();
    match t {
        TermNode::Branch(s, l, r) => {
            if l == r {
                out.push(l.as_ref().clone());
            }
            out.push(TermNode::Branch(
                Rational::one() - s,
                r.clone(),
                l.clone(),
            ));
            if let TermNode::Branch(rw, e1, e2) = l.as_ref() {
                // (e1 +[r] e2) +[s] e3 == e1 +[rs] (e2 +[s(1-r)/(1-rs)] e3)
                let rs = rw * s;
                if !rs.is_one() {
                    let q = s * (Rational::one() - rw) / (Rational::one() - &rs);
                    out.push(TermNode::Branch(
                        rs,
                        e1.clone(),
                        Box::new(TermNode::Branch(q, e2.clone(), r.clone())),
                    ));
                }
            }
            if let TermNode::Branch(q, e2, e3) = r.as_ref() {
                // e1 +[p] (e2 +[q] e3) == (e1 +[p/s'] e2) +[s'] e3 with
                // s' = p + q(1 - p), provided p != 1.
                let p = s;
                if !p.is_one() {
                    let s2 = p + q * (Rational::one() - p);
                    let r2 = if s2.is_zero() {
                        Rational::zero()
                    } else {
                        p / &s2
                    };
                    out.push(TermNode::Branch(
                        s2,
                        Box::new(TermNode::Branch(r2, l.clone(), e2.clone())),
                        e3.clone(),
                    ));
                }
            }
            if let (TermNode::Prefix(a1, e1), TermNode::Prefix(a2, e2)) = (l.as_ref(), r.as_ref())
            {
                if a1 == a2 {
                    out.push(PTerm::prefix(
                        a1.clone(),
                        TermNode::Branch(s.clone(), e1.clone(), e2.clone()),
                    ));
                }
            }
        }
        TermNode::Prefix(a, body) => {
            if let TermNode::Branch(s, e1, e2) = body.as_ref() {
                out.push(TermNode::Branch(
                    s.clone(),
                    Box::new(PTerm::prefix(a.clone(), e1.as_ref().clone())),
                    Box::new(PTerm::prefix(a.clone(), e2.as_ref().clone())),
                ));
            }
        }
        TermNode::Mu(..) => {
            if allow_growth {
                out.push(t.unfold_fixpoint().expect("mu unfolds"));
            }
        }
        _ => {}
    }
    if allow_growth {
        out.push(TermNode::Branch(
            fresh_weight.clone(),
            Box::new(t.clone()),
            Box::new(t.clone()),
        ));
    }
    out
}

fn collect_candidates<W: Clone>(
    t: &TermNode<W>,
    local: &dyn Fn(&TermNode<W>) -> Vec<TermNode<W>>,
) -> Vec<TermNode<W>> {
    let mut out = local(t);
    match t {
        TermNode::Prefix(a, e) => {
            for sub in collect_candidates(e, local) {
                out.push(TermNode::Prefix(a.clone(), Box::new(sub)));
            }
        }
        TermNode::Branch(w, l, r) => {
            for sub in collect_candidates(l, local) {
                out.push(TermNode::Branch(w.clone(), Box::new(sub), r.clone()));
            }
            for sub in collect_candidates(r, local) {
                out.push(TermNode::Branch(w.clone(), l.clone(), Box::new(sub)));
            }
        }
        TermNode::Mu(b, e) => {
            for sub in collect_candidates(e, local) {
                out.push(TermNode::Mu(b.clone(), Box::new(sub)));
            }
        }
        _ => {}
    }
    out
}

/// Cap on term growth during random rewriting; beyond it only
/// non-growing rewrites are applied.
const REWRITE_SIZE_CAP: usize = 1200;

/// Applies `steps` random oriented axiom instances at random positions.
/// The result is provably equivalent to the input by construction (each
/// hop is an axiom instance), which is what the soundness fuzzing
/// harness relies on.
pub fn rewrite_random(e: &Term, seed: u64, steps: usize) -> Term {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut current = e.clone();
    for _ in 0..steps {
        let allow_growth = current.size() <= REWRITE_SIZE_CAP;
        let candidates =
            collect_candidates(&current, &|t: &Term| classic_rewrites(t, allow_growth));
        if candidates.is_empty() {
            break;
        }
        current = candidates[rng.gen_range(0..candidates.len())].clone();
        debug_assert!(current.is_well_formed());
    }
    current
}

/// Probabilistic variant over the reweighted axiom set.
pub fn rewrite_random_prob(e: &PTerm, seed: u64, steps: usize) -> PTerm {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let palette = [
        rat(0, 1),
        rat(1, 1),
        rat(1, 2),
        rat(1, 3),
        rat(2, 3),
        rat(1, 4),
        rat(3, 4),
        rat(2, 5),
    ];
    let mut current = e.clone();
    for _ in 0..steps {
        let allow_growth = current.size() <= REWRITE_SIZE_CAP;
        let weight = palette[rng.gen_range(0..palette.len())].clone();
        let candidates = collect_candidates(&current, &|t: &PTerm| {
            prob_rewrites(t, allow_growth, &weight)
        });
        if candidates.is_empty() {
            break;
        }
        current = candidates[rng.gen_range(0..candidates.len())].clone();
        debug_assert!(current.is_well_formed());
    }
    current
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::semantics::{unfold, unfold_prob};
    use crate::syntax::alpha_eq;
    use crate::trace::trace_equiv;

    fn t(src: &str) -> Term {
        parse_term(src).unwrap()
    }

    fn pt(src: &str) -> PTerm {
        parse_pterm(src).unwrap()
    }

    /// The worked 10-step certificate that the two alternating-action
    /// recipes are equivalent (FP, FP, DS, UA plus equational glue).
    fn alternating_pair_derivation() -> Derivation<()> {
        let e1 = t("mu w. mu v. (a1.a2.v + a1.a3.w)");
        let f1 = e1.unfold_fixpoint().unwrap();
        let sum_f1 = f1.unfold_fixpoint().unwrap();
        let a1 = crate::syntax::ActionLabel::new("a1");
        let a2 = crate::syntax::ActionLabel::new("a2");
        let a3 = crate::syntax::ActionLabel::new("a3");
        let a2e1 = Term::prefix(a2, e1.clone());
        let a3e1 = Term::prefix(a3, e1.clone());
        let sum_e1 = Term::sum(
            Term::prefix(a1.clone(), a2e1.clone()),
            Term::prefix(a1.clone(), a3e1.clone()),
        );
        let collapsed = Term::prefix(a1, Term::sum(a2e1, a3e1));
        let e2 = t("mu v. a1.(a2.v + a3.v)");
        Derivation::new(vec![
            // 1: e1 == f1
            Step::axiom(Rule::Fp, e1.clone(), f1.clone()),
            // 2: f1 == a1.a2.f1 + a1.a3.e1
            Step::axiom(Rule::Fp, f1.clone(), sum_f1.clone()),
            // 3: f1 == e1
            Step::derived(Rule::Sym, vec![0], f1.clone(), e1.clone()),
            // 4: a1.a2.f1 + a1.a3.e1 == a1.a2.e1 + a1.a3.e1
            Step::cong(2, vec![0, 0, 0], sum_f1.clone(), sum_e1.clone()),
            // 5: a1.(a2.e1 + a3.e1) == a1.a2.e1 + a1.a3.e1
            Step::axiom(Rule::Ds, collapsed.clone(), sum_e1.clone()),
            // 6: a1.a2.e1 + a1.a3.e1 == a1.(a2.e1 + a3.e1)
            Step::derived(Rule::Sym, vec![4], sum_e1.clone(), collapsed.clone()),
            // 7: e1 == a1.a2.f1 + a1.a3.e1
            Step::derived(Rule::Trans, vec![0, 1], e1.clone(), sum_f1),
            // 8: e1 == a1.a2.e1 + a1.a3.e1
            Step::derived(Rule::Trans, vec![6, 3], e1.clone(), sum_e1),
            // 9: e1 == a1.(a2.e1 + a3.e1)
            Step::derived(Rule::Trans, vec![7, 5], e1.clone(), collapsed),
            // 10: e1 == mu v. a1.(a2.v + a3.v)
            Step::derived(Rule::Ua, vec![8], e1, e2),
        ])
    }

    #[test]
    fn the_worked_derivation_is_accepted() {
        let d = alternating_pair_derivation();
        assert_eq!(check(&d).unwrap(), Verdict::Accept);
    }

    #[test]
    fn wrong_distribution_instance_is_rejected_at_its_step() {
        // a.(e1 + e2) == a.e1 + a.f with f != e2.
        let lhs = t("a.((mu v. b.v) + (mu v. c.v))");
        let rhs = t("a.(mu v. b.v) + a.(mu v. d.v)");
        let d = Derivation::new(vec![Step::axiom(Rule::Ds, lhs, rhs)]);
        match check(&d).unwrap() {
            Verdict::Reject { step, .. } => assert_eq!(step, 1),
            Verdict::Accept => panic!("must reject"),
        }
    }

    #[test]
    fn probabilistic_as_instance_with_exact_arithmetic() {
        // (e1 +[1/2] e2) +[1/2] e3 == e1 +[1/4] (e2 +[1/3] e3)
        let lhs = pt("((mu v. a.v) +[1/2] (mu v. b.v)) +[1/2] (mu v. c.v)");
        let rhs = pt("(mu v. a.v) +[1/4] ((mu v. b.v) +[1/3] (mu v. c.v))");
        let d = Derivation::new(vec![Step::axiom(Rule::As, lhs, rhs)]);
        assert_eq!(check(&d).unwrap(), Verdict::Accept);

        let bad = pt("(mu v. a.v) +[1/4] ((mu v. b.v) +[1/2] (mu v. c.v))");
        let lhs = pt("((mu v. a.v) +[1/2] (mu v. b.v)) +[1/2] (mu v. c.v)");
        let d = Derivation::new(vec![Step::axiom(Rule::As, lhs, bad)]);
        assert!(matches!(check(&d).unwrap(), Verdict::Reject { step: 1, .. }));
    }

    #[test]
    fn probabilistic_as_with_unit_product_is_rejected() {
        let lhs = pt("((mu v. a.v) +[1] (mu v. b.v)) +[1] (mu v. c.v)");
        let rhs = pt("(mu v. a.v) +[1] ((mu v. b.v) +[0] (mu v. c.v))");
        let d = Derivation::new(vec![Step::axiom(Rule::As, lhs, rhs)]);
        match check(&d).unwrap() {
            Verdict::Reject { step, reason } => {
                assert_eq!(step, 1);
                assert!(reason.contains("rs != 1"), "{reason}");
            }
            Verdict::Accept => panic!("rs = 1 must be rejected"),
        }
    }

    #[test]
    fn dangling_premises_are_malformed() {
        let e = t("mu v. a.v");
        let d = Derivation {
            steps: vec![Step::derived(Rule::Sym, vec![3], e.clone(), e.clone())],
            goal: (e.clone(), e),
        };
        assert!(matches!(
            check(&d),
            Err(MalformedDerivation::DanglingPremise { step: 1, premise: 4 })
        ));
    }

    #[test]
    fn congruence_requires_a_path() {
        let e = t("mu v. a.v");
        let d = Derivation {
            steps: vec![
                Step::axiom(Rule::Refl, e.clone(), e.clone()),
                Step::derived(Rule::Cong, vec![0], e.clone(), e.clone()),
            ],
            goal: (e.clone(), e),
        };
        assert!(matches!(
            check(&d),
            Err(MalformedDerivation::BadInstantiation { step: 2, .. })
        ));
    }

    #[test]
    fn cn_instantiates_a_multi_hole_context() {
        // From mu v. a.v == a.(mu v. a.v), conclude
        // (mu v. a.v) + b.E == (a.(mu v. a.v)) + b.E via g = v1 + b.E.
        let e = t("mu v. a.v");
        let unfolded = e.unfold_fixpoint().unwrap();
        let ctx = crate::syntax::parse_term_open("v1 + b.(mu u. a.u)").unwrap();
        let lhs = ctx.subst_free(&Var::new("v1"), &e);
        let rhs = ctx.subst_free(&Var::new("v1"), &unfolded);
        let d = Derivation::new(vec![
            Step::axiom(Rule::Fp, e.clone(), unfolded.clone()),
            Step {
                rule: Rule::Cn,
                premises: vec![0],
                lhs,
                rhs,
                path: None,
                context: Some(Context {
                    term: ctx,
                    vars: vec![Var::new("v1")],
                }),
            },
        ]);
        assert_eq!(check(&d).unwrap(), Verdict::Accept);
    }

    #[test]
    fn derivation_files_round_trip_through_the_checker() {
        let text = r#"
# unfold once, then fold into a fresh binder
1: FP() mu v. a.v == a.(mu v. a.v)
2: CONG(1) a.(mu v. a.v) == a.a.(mu v. a.v) [path=0]
3: TRANS(1,2) mu v. a.v == a.a.(mu v. a.v)
4: UA(3) mu v. a.v == mu w. a.a.w
"#;
        let d = parse_derivation_classic(text).unwrap();
        assert_eq!(d.steps.len(), 4);
        assert_eq!(check(&d).unwrap(), Verdict::Accept);
        assert!(alpha_eq(&d.goal.1, &t("mu w. a.a.w")));
    }

    #[test]
    fn derivation_parser_rejects_gaps_and_unknown_rules() {
        assert!(parse_derivation_classic("2: FP() mu v. a.v == a.(mu v. a.v)").is_err());
        assert!(parse_derivation_classic("1: ZZ() mu v. a.v == mu v. a.v").is_err());
        assert!(parse_derivation_classic("1: REFL() mu v. a.v = mu v. a.v").is_err());
    }

    #[test]
    fn ae_accepts_alpha_renaming_only() {
        let d = Derivation::new(vec![Step::axiom(
            Rule::Ae,
            t("mu w. a.w"),
            t("mu v. a.v"),
        )]);
        assert_eq!(check(&d).unwrap(), Verdict::Accept);
        let d = Derivation::new(vec![Step::axiom(
            Rule::Ae,
            t("mu w. a.w"),
            t("mu v. b.v"),
        )]);
        assert!(matches!(check(&d).unwrap(), Verdict::Reject { .. }));
    }

    #[test]
    fn fixed_seed_rewrite_unfolds_the_loop() {
        // With this seed the single rewrite chosen is the FP unfolding.
        let e = t("mu v. a.v");
        let unfolded = Term::prefix(crate::syntax::ActionLabel::new("a"), e.clone());
        let found = (0..64)
            .map(|seed| rewrite_random(&e, seed, 1))
            .find(|r| alpha_eq(r, &unfolded));
        assert!(found.is_some(), "no seed under 64 picked the FP unfold");
    }

    #[test]
    fn classic_rewrites_preserve_trace_equivalence() {
        let e = t("mu w. mu v. (a1.a2.v + a1.a3.w)");
        let lts = unfold(&e).unwrap();
        for seed in 0..20 {
            let rewritten = rewrite_random(&e, seed, 8);
            assert!(rewritten.is_well_formed());
            let l2 = unfold(&rewritten).unwrap();
            assert!(
                trace_equiv(&lts, lts.root(), &l2, l2.root()).is_equivalent(),
                "seed {seed}"
            );
        }
    }

    #[test]
    fn probabilistic_rewrites_preserve_trace_measures() {
        let e = pt("mu v. (a.v +[1/3] b.(mu w. a.w +[1/2] b.w))");
        let l1 = unfold_prob(&e).unwrap();
        for seed in 0..20 {
            let rewritten = rewrite_random_prob(&e, seed, 8);
            assert!(rewritten.is_well_formed());
            let l2 = unfold_prob(&rewritten).unwrap();
            assert!(
                crate::measure::tzeng_equiv(&l1, l1.root(), &l2, l2.root()).is_equivalent(),
                "seed {seed}"
            );
        }
    }

    #[test]
    fn curated_equivalent_pairs_have_checking_derivations() {
        // Each pair is trace equivalent and comes with a certificate.
        let a = |n: &str| crate::syntax::ActionLabel::new(n);

        let mut cases: Vec<(Derivation<()>,)> = Vec::new();

        // 1. Alternating-action pair (the worked example).
        cases.push((alternating_pair_derivation(),));

        // 2. Fold a guarded unfolding: a.(mu v. a.v) == mu v. a.v.
        {
            let e = t("mu v. a.v");
            let g = Term::prefix(a("a"), e.clone());
            let unfold1 = e.unfold_fixpoint().unwrap(); // a.e
            cases.push((Derivation::new(vec![
                Step::axiom(Rule::Fp, e.clone(), unfold1.clone()),
                Step::derived(Rule::Sym, vec![0], unfold1.clone(), e.clone()),
                // a.(mu v. a.v) == a.a.(mu v. a.v)  by congruence under a.
                Step::cong(0, vec![0], g.clone(), Term::prefix(a("a"), unfold1)),
                // UA with e = a.v: need g == a.g.
                Step::derived(
                    Rule::Ua,
                    vec![2],
                    g.clone(),
                    t("mu v. a.v"),
                ),
            ]),));
        }

        // 3. Commute a sum under the binder.
        {
            let l = t("mu v. (a.v + b.v)");
            let unf = l.unfold_fixpoint().unwrap();
            let swapped = match &unf {
                TermNode::Branch((), x, y) => Term::sum(y.as_ref().clone(), x.as_ref().clone()),
                _ => unreachable!(),
            };
            cases.push((Derivation::new(vec![
                Step::axiom(Rule::Fp, l.clone(), unf.clone()),
                Step::axiom(Rule::Cm, unf, swapped.clone()),
                Step::derived(Rule::Trans, vec![0, 1], l.clone(), swapped),
                Step::derived(Rule::Ua, vec![2], l, t("mu v. (b.v + a.v)")),
            ]),));
        }

        // 4. Idempotence: mu v. a.v == mu v. (a.v + a.v).
        {
            let l = t("mu v. a.v");
            let al = l.unfold_fixpoint().unwrap();
            let doubled = Term::sum(al.clone(), al.clone());
            cases.push((Derivation::new(vec![
                Step::axiom(Rule::Fp, l.clone(), al.clone()),
                Step::axiom(Rule::Id, doubled.clone(), al.clone()),
                Step::derived(Rule::Sym, vec![1], al, doubled.clone()),
                Step::derived(Rule::Trans, vec![0, 2], l.clone(), doubled),
                Step::derived(Rule::Ua, vec![3], l, t("mu v. (a.v + a.v)")),
            ]),));
        }

        // 5. Reassociate: mu v. (a.v + (b.v + c.v)) == mu v. ((a.v + b.v) + c.v).
        {
            let l = t("mu v. a.v + (b.v + c.v)");
            let unf = l.unfold_fixpoint().unwrap();
            let reassoc = match &unf {
                TermNode::Branch((), x, yz) => match yz.as_ref() {
                    TermNode::Branch((), y, z) => Term::sum(
                        Term::sum(x.as_ref().clone(), y.as_ref().clone()),
                        z.as_ref().clone(),
                    ),
                    _ => unreachable!(),
                },
                _ => unreachable!(),
            };
            cases.push((Derivation::new(vec![
                Step::axiom(Rule::Fp, l.clone(), unf.clone()),
                Step::axiom(Rule::As, unf, reassoc.clone()),
                Step::derived(Rule::Trans, vec![0, 1], l.clone(), reassoc),
                Step::derived(Rule::Ua, vec![2], l, t("mu v. (a.v + b.v) + c.v")),
            ]),));
        }

        // 6. Distribute a prefix over a sum (closed instance).
        {
            let lhs = t("a.((b.(mu v. a.b.v)) + c.(mu v. a.c.v))");
            let rhs = t("a.b.(mu v. a.b.v) + a.c.(mu v. a.c.v)");
            cases.push((Derivation::new(vec![Step::axiom(Rule::Ds, lhs, rhs)]),));
        }

        // 7. Pure alpha-renaming.
        cases.push((Derivation::new(vec![Step::axiom(
            Rule::Ae,
            t("mu v. a.v"),
            t("mu w. a.w"),
        )]),));

        // 8. Congruence in a sum context via CN.
        {
            let e = t("mu v. a.v");
            let unf = e.unfold_fixpoint().unwrap();
            let ctx = crate::syntax::parse_term_open("v1 + b.(mu u. c.u)").unwrap();
            let lhs = ctx.subst_free(&Var::new("v1"), &e);
            let rhs = ctx.subst_free(&Var::new("v1"), &unf);
            cases.push((Derivation::new(vec![
                Step::axiom(Rule::Fp, e, unf),
                Step {
                    rule: Rule::Cn,
                    premises: vec![0],
                    lhs,
                    rhs,
                    path: None,
                    context: Some(Context {
                        term: ctx,
                        vars: vec![Var::new("v1")],
                    }),
                },
            ]),));
        }

        // 9. One-step unfolding of a nested recursion.
        {
            let e = t("mu w. mu v. (a.v + b.w)");
            let unf = e.unfold_fixpoint().unwrap();
            cases.push((Derivation::new(vec![Step::axiom(Rule::Fp, e, unf)]),));
        }

        // 10. Period doubling: mu v. a.b.v == mu v. a.b.a.b.v.
        {
            let l = t("mu v. a.b.v");
            let abl = l.unfold_fixpoint().unwrap(); // a.b.l
            cases.push((Derivation::new(vec![
                Step::axiom(Rule::Fp, l.clone(), abl.clone()),
                Step::cong(0, vec![0, 0], abl.clone(), {
                    // a.b.l == a.b.(a.b.l)
                    Term::prefix(a("a"), Term::prefix(a("b"), abl.clone()))
                }),
                Step::derived(Rule::Trans, vec![0, 1], l.clone(), {
                    Term::prefix(a("a"), Term::prefix(a("b"), abl))
                }),
                Step::derived(Rule::Ua, vec![2], l, t("mu v. a.b.a.b.v")),
            ]),));
        }

        for (i, (d,)) in cases.iter().enumerate() {
            assert_eq!(check(d).unwrap(), Verdict::Accept, "case {}", i + 1);
            let l1 = unfold(&d.goal.0).unwrap();
            let l2 = unfold(&d.goal.1).unwrap();
            assert!(
                trace_equiv(&l1, l1.root(), &l2, l2.root()).is_equivalent(),
                "case {} goal not trace equivalent",
                i + 1
            );
        }
    }
}
