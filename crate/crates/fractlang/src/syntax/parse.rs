//! Concrete grammar for process terms.
//!
//! ```text
//! term   := 'mu' VAR '.' term | sum
//! sum    := item (op item)*        op := '+' | '+[' RATIONAL ']'
//! item   := ACTION '.' item | atom | 'mu' VAR '.' term   (trailing mu)
//! atom   := VAR | '(' term ')'
//! ```
//!
//! Prefixing binds tighter than branching, `mu` scopes maximally to the
//! right, and parentheses override. Identifiers are lowercase
//! alphanumeric; an identifier followed by `.` is an action, otherwise a
//! variable. Comments run from `#` to end of line. The parser accepts
//! slightly more than the well-formed fragment (bare variables as
//! summands) so that closedness and guardedness violations surface as
//! [`WellFormednessError`]s rather than syntax errors.

use thiserror::Error;

use crate::rational::{parse_rational, Rational};

use super::{ActionLabel, PTerm, Term, TermNode, Var, WellFormednessError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("syntax error at byte {pos}: expected {expected}, found {found}")]
    Syntax {
        pos: usize,
        expected: String,
        found: String,
    },
    #[error("probability {value} at byte {pos} is outside [0, 1]")]
    ProbabilityRange { pos: usize, value: Rational },
    #[error(transparent)]
    WellFormedness(#[from] WellFormednessError),
}

fn syntax_err<T>(pos: usize, expected: &str, found: impl Into<String>) -> Result<T, ParseError> {
    Err(ParseError::Syntax {
        pos,
        expected: expected.to_string(),
        found: found.into(),
    })
}

/// Parses a closed, guarded process term.
pub fn parse_term(text: &str) -> Result<Term, ParseError> {
    let t = parse_mode(text, Mode::Classic)?;
    let t = strip_weights(t);
    t.check_well_formed()?;
    Ok(t)
}

/// Parses a term that may contain free variables (used for derivation
/// contexts). Binders must still guard their variables.
pub fn parse_term_open(text: &str) -> Result<Term, ParseError> {
    let t = parse_mode(text, Mode::Classic)?;
    let t = strip_weights(t);
    t.check_guarded()?;
    Ok(t)
}

/// Parses a closed, guarded probabilistic process term.
pub fn parse_pterm(text: &str) -> Result<PTerm, ParseError> {
    let t = parse_mode(text, Mode::Prob)?;
    let t = keep_weights(t);
    t.check_well_formed()?;
    Ok(t)
}

/// Open variant of [`parse_pterm`], for derivation contexts.
pub fn parse_pterm_open(text: &str) -> Result<PTerm, ParseError> {
    let t = parse_mode(text, Mode::Prob)?;
    let t = keep_weights(t);
    t.check_guarded()?;
    Ok(t)
}

type Surface = TermNode<Option<Rational>>;

fn strip_weights(t: Surface) -> Term {
    match t {
        TermNode::Var(v) => TermNode::Var(v),
        TermNode::BoundVar(i) => TermNode::BoundVar(i),
        TermNode::Prefix(a, e) => TermNode::Prefix(a, Box::new(strip_weights(*e))),
        // Weighted branches cannot appear: classic mode rejects them.
        TermNode::Branch(w, l, r) => {
            debug_assert!(w.is_none());
            TermNode::Branch((), Box::new(strip_weights(*l)), Box::new(strip_weights(*r)))
        }
        TermNode::Mu(b, e) => TermNode::Mu(b, Box::new(strip_weights(*e))),
    }
}

fn keep_weights(t: Surface) -> PTerm {
    match t {
        TermNode::Var(v) => TermNode::Var(v),
        TermNode::BoundVar(i) => TermNode::BoundVar(i),
        TermNode::Prefix(a, e) => TermNode::Prefix(a, Box::new(keep_weights(*e))),
        TermNode::Branch(w, l, r) => TermNode::Branch(
            w.expect("prob mode only produces weighted branches"),
            Box::new(keep_weights(*l)),
            Box::new(keep_weights(*r)),
        ),
        TermNode::Mu(b, e) => TermNode::Mu(b, Box::new(keep_weights(*e))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Mode {
    Classic,
    Prob,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Mu,
    Dot,
    Plus,
    Choice(Rational),
    LParen,
    RParen,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Mu => "`mu`".into(),
            Tok::Dot => "`.`".into(),
            Tok::Plus => "`+`".into(),
            Tok::Choice(r) => format!("`+[{r}]`"),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
        }
    }
}

fn lex(text: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let bytes = text.as_bytes();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        match c {
            ' ' | '\t' | '\r' | '\n' => i += 1,
            '#' => {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
            }
            '.' => {
                toks.push((Tok::Dot, i));
                i += 1;
            }
            '(' => {
                toks.push((Tok::LParen, i));
                i += 1;
            }
            ')' => {
                toks.push((Tok::RParen, i));
                i += 1;
            }
            '+' => {
                if i + 1 < bytes.len() && bytes[i + 1] == b'[' {
                    let start = i;
                    let mut j = i + 2;
                    while j < bytes.len() && bytes[j] != b']' {
                        j += 1;
                    }
                    if j == bytes.len() {
                        return syntax_err(start, "closing `]` after `+[`", "end of input");
                    }
                    let lit = &text[i + 2..j];
                    let value = parse_rational(lit).ok_or(ParseError::Syntax {
                        pos: start + 2,
                        expected: "rational literal (`p/q`, integer, or decimal)".into(),
                        found: format!("`{lit}`"),
                    })?;
                    let zero = Rational::from_integer(0.into());
                    let one = Rational::from_integer(1.into());
                    if value < zero || value > one {
                        return Err(ParseError::ProbabilityRange { pos: start, value });
                    }
                    toks.push((Tok::Choice(value), start));
                    i = j + 1;
                } else {
                    toks.push((Tok::Plus, i));
                    i += 1;
                }
            }
            'a'..='z' => {
                let start = i;
                while i < bytes.len()
                    && (bytes[i].is_ascii_lowercase() || bytes[i].is_ascii_digit())
                {
                    i += 1;
                }
                let word = &text[start..i];
                if word == "mu" {
                    toks.push((Tok::Mu, start));
                } else {
                    toks.push((Tok::Ident(word.to_string()), start));
                }
            }
            other => {
                return syntax_err(
                    i,
                    "an identifier, `mu`, `.`, `+`, `(`, or `)`",
                    format!("`{other}`"),
                )
            }
        }
    }
    Ok(toks)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    end: usize,
    mode: Mode,
}

fn parse_mode(text: &str, mode: Mode) -> Result<Surface, ParseError> {
    let toks = lex(text)?;
    let mut p = Parser {
        toks,
        pos: 0,
        end: text.len(),
        mode,
    };
    let t = p.term()?;
    if let Some((tok, pos)) = p.peek() {
        return syntax_err(pos, "end of input", tok.describe());
    }
    Ok(t)
}

impl Parser {
    fn peek(&self) -> Option<(Tok, usize)> {
        self.toks.get(self.pos).cloned()
    }

    fn bump(&mut self) -> Option<(Tok, usize)> {
        let t = self.toks.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn here(&self) -> usize {
        self.toks.get(self.pos).map(|(_, p)| *p).unwrap_or(self.end)
    }

    fn found(&self) -> String {
        self.toks
            .get(self.pos)
            .map(|(t, _)| t.describe())
            .unwrap_or_else(|| "end of input".into())
    }

    fn term(&mut self) -> Result<Surface, ParseError> {
        if matches!(self.peek(), Some((Tok::Mu, _))) {
            self.bump();
            let name = match self.bump() {
                Some((Tok::Ident(name), _)) => name,
                Some((tok, pos)) => return syntax_err(pos, "a variable name after `mu`", tok.describe()),
                None => return syntax_err(self.end, "a variable name after `mu`", "end of input"),
            };
            match self.bump() {
                Some((Tok::Dot, _)) => {}
                Some((tok, pos)) => return syntax_err(pos, "`.` after the binder", tok.describe()),
                None => return syntax_err(self.end, "`.` after the binder", "end of input"),
            }
            let body = self.term()?;
            Ok(Surface::mu(&name, body))
        } else {
            self.sum()
        }
    }

    fn sum(&mut self) -> Result<Surface, ParseError> {
        let mut acc = self.item()?;
        loop {
            let weight = match self.peek() {
                Some((Tok::Plus, pos)) => {
                    if self.mode != Mode::Classic {
                        return syntax_err(pos, "`+[r]` (probabilistic choice)", "`+`");
                    }
                    self.bump();
                    None
                }
                Some((Tok::Choice(r), pos)) => {
                    if self.mode != Mode::Prob {
                        return syntax_err(pos, "`+`", format!("`+[{r}]`"));
                    }
                    self.bump();
                    Some(r)
                }
                _ => break,
            };
            // `mu` scopes maximally right, so a bare mu after the operator
            // swallows the rest of the term.
            let rhs = if matches!(self.peek(), Some((Tok::Mu, _))) {
                self.term()?
            } else {
                self.item()?
            };
            acc = TermNode::Branch(weight, Box::new(acc), Box::new(rhs));
        }
        Ok(acc)
    }

    fn item(&mut self) -> Result<Surface, ParseError> {
        match self.peek() {
            Some((Tok::Ident(name), _)) => {
                self.bump();
                if matches!(self.peek(), Some((Tok::Dot, _))) {
                    self.bump();
                    let body = self.item()?;
                    Ok(Surface::prefix(ActionLabel(name), body))
                } else {
                    Ok(TermNode::Var(Var(name)))
                }
            }
            Some((Tok::LParen, _)) => {
                self.bump();
                let t = self.term()?;
                match self.bump() {
                    Some((Tok::RParen, _)) => Ok(t),
                    Some((tok, pos)) => syntax_err(pos, "`)`", tok.describe()),
                    None => syntax_err(self.end, "`)`", "end of input"),
                }
            }
            _ => syntax_err(
                self.here(),
                "an action prefix, a variable, or `(`",
                self.found(),
            ),
        }
    }
}
