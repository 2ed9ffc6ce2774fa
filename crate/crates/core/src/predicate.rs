//! Boolean consequence predicates.
//!
//! A segment predicate decides, for one system state, whether the hazardous
//! event ends in that consequence segment. It is a boolean expression over
//! function-success literals and the values of earlier segments for the same
//! state:
//!
//! ```text
//! expr  := or
//! or    := and ('|' and)*
//! and   := unary ('&' unary)*
//! unary := '!' unary | atom
//! atom  := 'true' | 'false' | IDENT | '(' expr ')'
//! ```
//!
//! `not`, `and` and `or` are accepted as synonyms for `!`, `&` and `|`.
//! Identifiers are case-sensitive and resolve against function names first,
//! then against strictly earlier segment names.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Parsed predicate. Literals carry resolved indices, not names.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Predicate {
    True,
    False,
    /// Success of function `k` (0-based column of the mapping matrix).
    Function(usize),
    /// Value of the earlier segment `h` (0-based) for the same state.
    Segment(usize),
    Not(Box<Predicate>),
    And(Box<Predicate>, Box<Predicate>),
    Or(Box<Predicate>, Box<Predicate>),
}

impl Predicate {
    #[allow(clippy::should_implement_trait)]
    pub fn not(inner: Predicate) -> Self {
        Predicate::Not(Box::new(inner))
    }

    pub fn and(lhs: Predicate, rhs: Predicate) -> Self {
        Predicate::And(Box::new(lhs), Box::new(rhs))
    }

    pub fn or(lhs: Predicate, rhs: Predicate) -> Self {
        Predicate::Or(Box::new(lhs), Box::new(rhs))
    }

    /// Left-folded conjunction; an empty iterator yields `True`.
    pub fn all(items: impl IntoIterator<Item = Predicate>) -> Self {
        items
            .into_iter()
            .reduce(Predicate::and)
            .unwrap_or(Predicate::True)
    }

    /// Left-folded disjunction; an empty iterator yields `False`.
    pub fn any(items: impl IntoIterator<Item = Predicate>) -> Self {
        items
            .into_iter()
            .reduce(Predicate::or)
            .unwrap_or(Predicate::False)
    }

    /// Evaluate against one state's function row and prior segment values.
    pub fn eval(&self, ctx: &EvalContext) -> bool {
        match self {
            Predicate::True => true,
            Predicate::False => false,
            Predicate::Function(k) => ctx.function(*k),
            Predicate::Segment(h) => ctx.prior(*h),
            Predicate::Not(inner) => !inner.eval(ctx),
            Predicate::And(a, b) => a.eval(ctx) && b.eval(ctx),
            Predicate::Or(a, b) => a.eval(ctx) || b.eval(ctx),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Predicate::True | Predicate::False | Predicate::Function(_) | Predicate::Segment(_) => {
                1
            }
            Predicate::Not(inner) => 1 + inner.depth(),
            Predicate::And(a, b) | Predicate::Or(a, b) => 1 + a.depth().max(b.depth()),
        }
    }

    /// Visit every literal, depth first.
    pub fn for_each_literal(&self, f: &mut impl FnMut(&Predicate)) {
        match self {
            Predicate::True | Predicate::False => {}
            Predicate::Function(_) | Predicate::Segment(_) => f(self),
            Predicate::Not(inner) => inner.for_each_literal(f),
            Predicate::And(a, b) | Predicate::Or(a, b) => {
                a.for_each_literal(f);
                b.for_each_literal(f);
            }
        }
    }

    /// Canonical text form. `parse(display(p)) == p` for any predicate whose
    /// indices resolve in `names`.
    pub fn display<'a>(&'a self, names: &'a PredicateEnv<'a>) -> PredicateDisplay<'a> {
        PredicateDisplay { pred: self, names }
    }
}

/// One state's inputs to predicate evaluation: the function success row and
/// the already-computed values of earlier segments, both as bit sets
/// (bit `k` is function `k`, bit `h` is segment `h`).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EvalContext {
    pub phi: u64,
    pub prior_gamma: u64,
}

impl EvalContext {
    pub fn new(phi: u64, prior_gamma: u64) -> Self {
        Self { phi, prior_gamma }
    }

    pub fn from_bools(phi: &[bool], prior_gamma: &[bool]) -> Self {
        Self {
            phi: pack_bits(phi),
            prior_gamma: pack_bits(prior_gamma),
        }
    }

    #[inline]
    pub fn function(&self, k: usize) -> bool {
        (self.phi >> k) & 1 == 1
    }

    #[inline]
    pub fn prior(&self, h: usize) -> bool {
        (self.prior_gamma >> h) & 1 == 1
    }
}

pub(crate) fn pack_bits(bits: &[bool]) -> u64 {
    bits.iter()
        .enumerate()
        .fold(0u64, |acc, (i, &b)| acc | (u64::from(b) << i))
}

/// Evaluate segment predicates in order for one function row, threading each
/// result into the context of the following segments. Returns the full gamma
/// row as a bit set.
pub fn gamma_row<'a>(predicates: impl IntoIterator<Item = &'a Predicate>, phi: u64) -> u64 {
    let mut ctx = EvalContext::new(phi, 0);
    for (h, pred) in predicates.into_iter().enumerate() {
        if pred.eval(&ctx) {
            ctx.prior_gamma |= 1 << h;
        }
    }
    ctx.prior_gamma
}

/// Names visible while parsing the predicate of segment `current`.
#[derive(Debug, Clone, Copy)]
pub struct PredicateEnv<'a> {
    pub functions: &'a [String],
    /// All segment names in scheme order, including the current and later
    /// ones so that forward references get a precise error.
    pub segments: &'a [String],
    pub current: usize,
}

impl<'a> PredicateEnv<'a> {
    pub fn new(functions: &'a [String], segments: &'a [String], current: usize) -> Self {
        Self {
            functions,
            segments,
            current,
        }
    }

    fn resolve(&self, ident: &str, pos: usize) -> Result<Predicate, PredicateError> {
        if let Some(k) = self.functions.iter().position(|f| f == ident) {
            return Ok(Predicate::Function(k));
        }
        match self.segments.iter().position(|s| s == ident) {
            Some(h) if h < self.current => Ok(Predicate::Segment(h)),
            Some(h) => Err(PredicateError::ForwardReference {
                name: ident.to_string(),
                pos,
                is_self: h == self.current,
            }),
            None => Err(PredicateError::UnknownIdentifier {
                name: ident.to_string(),
                pos,
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PredicateError {
    #[error("syntax error at {}: expected {}, found {found}", describe_pos(*.pos, *.at_end), .expected.join(" or "))]
    Syntax {
        pos: usize,
        at_end: bool,
        expected: Vec<&'static str>,
        found: String,
    },
    #[error("unknown identifier `{name}` at position {pos}")]
    UnknownIdentifier { name: String, pos: usize },
    #[error("`{name}` at position {pos} refers to {} segment; only earlier segments may be referenced", if *.is_self { "the current" } else { "a later" })]
    ForwardReference {
        name: String,
        pos: usize,
        is_self: bool,
    },
    #[error("empty predicate")]
    Empty,
}

fn describe_pos(pos: usize, at_end: bool) -> String {
    if at_end {
        format!("end of input (position {pos})")
    } else {
        format!("position {pos}")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Token<'s> {
    Not,
    And,
    Or,
    LParen,
    RParen,
    True,
    False,
    Ident(&'s str),
}

impl Token<'_> {
    fn describe(&self) -> String {
        match self {
            Token::Not => "'!'".into(),
            Token::And => "'&'".into(),
            Token::Or => "'|'".into(),
            Token::LParen => "'('".into(),
            Token::RParen => "')'".into(),
            Token::True => "'true'".into(),
            Token::False => "'false'".into(),
            Token::Ident(s) => format!("identifier `{s}`"),
        }
    }
}

fn lex(text: &str) -> Result<Vec<(usize, Token<'_>)>, PredicateError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let tok = match c {
            b' ' | b'\t' | b'\r' | b'\n' => {
                i += 1;
                continue;
            }
            b'!' => Token::Not,
            b'&' => Token::And,
            b'|' => Token::Or,
            b'(' => Token::LParen,
            b')' => Token::RParen,
            c if c.is_ascii_alphabetic() || c == b'_' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                let word = &text[start..i];
                let tok = match word {
                    "true" => Token::True,
                    "false" => Token::False,
                    "not" => Token::Not,
                    "and" => Token::And,
                    "or" => Token::Or,
                    _ => Token::Ident(word),
                };
                out.push((start, tok));
                continue;
            }
            _ => {
                let ch = text[i..].chars().next().unwrap_or('?');
                return Err(PredicateError::Syntax {
                    pos: i,
                    at_end: false,
                    expected: vec!["an operator, identifier or parenthesis"],
                    found: format!("character {ch:?}"),
                });
            }
        };
        out.push((i, tok));
        i += 1;
    }
    Ok(out)
}

const EXPECT_ATOM: [&str; 5] = ["identifier", "'true'", "'false'", "'!'", "'('"];

struct Parser<'s, 'e> {
    tokens: Vec<(usize, Token<'s>)>,
    next: usize,
    len: usize,
    env: &'e PredicateEnv<'e>,
}

impl<'s> Parser<'s, '_> {
    fn peek(&self) -> Option<&Token<'s>> {
        self.tokens.get(self.next).map(|(_, t)| t)
    }

    fn error(&self, expected: Vec<&'static str>) -> PredicateError {
        match self.tokens.get(self.next) {
            Some((pos, tok)) => PredicateError::Syntax {
                pos: *pos,
                at_end: false,
                expected,
                found: tok.describe(),
            },
            None => PredicateError::Syntax {
                pos: self.len,
                at_end: true,
                expected,
                found: "end of input".into(),
            },
        }
    }

    fn or(&mut self) -> Result<Predicate, PredicateError> {
        let mut lhs = self.and()?;
        while self.peek() == Some(&Token::Or) {
            self.next += 1;
            lhs = Predicate::or(lhs, self.and()?);
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<Predicate, PredicateError> {
        let mut lhs = self.unary()?;
        while self.peek() == Some(&Token::And) {
            self.next += 1;
            lhs = Predicate::and(lhs, self.unary()?);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Predicate, PredicateError> {
        if self.peek() == Some(&Token::Not) {
            self.next += 1;
            return Ok(Predicate::not(self.unary()?));
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<Predicate, PredicateError> {
        let Some((pos, tok)) = self.tokens.get(self.next).cloned() else {
            return Err(self.error(EXPECT_ATOM.to_vec()));
        };
        match tok {
            Token::True => {
                self.next += 1;
                Ok(Predicate::True)
            }
            Token::False => {
                self.next += 1;
                Ok(Predicate::False)
            }
            Token::Ident(name) => {
                self.next += 1;
                self.env.resolve(name, pos)
            }
            Token::LParen => {
                self.next += 1;
                let inner = self.or()?;
                if self.peek() != Some(&Token::RParen) {
                    return Err(self.error(vec!["'&'", "'|'", "')'"]));
                }
                self.next += 1;
                Ok(inner)
            }
            _ => Err(self.error(EXPECT_ATOM.to_vec())),
        }
    }
}

/// Parse a predicate for segment `env.current`.
pub fn parse_predicate(text: &str, env: &PredicateEnv<'_>) -> Result<Predicate, PredicateError> {
    if text.trim().is_empty() {
        return Err(PredicateError::Empty);
    }
    let tokens = lex(text)?;
    let mut parser = Parser {
        tokens,
        next: 0,
        len: text.len(),
        env,
    };
    let pred = parser.or()?;
    if parser.next < parser.tokens.len() {
        return Err(parser.error(vec!["'&'", "'|'", "end of input"]));
    }
    Ok(pred)
}

pub struct PredicateDisplay<'a> {
    pred: &'a Predicate,
    names: &'a PredicateEnv<'a>,
}

// Binding strength: or = 0, and = 1, unary/atom = 2.
fn write_pred(
    f: &mut fmt::Formatter<'_>,
    pred: &Predicate,
    names: &PredicateEnv<'_>,
    min_level: u8,
) -> fmt::Result {
    let (level, open) = match pred {
        Predicate::Or(..) => (0, min_level > 0),
        Predicate::And(..) => (1, min_level > 1),
        _ => (2, false),
    };
    if open {
        f.write_str("(")?;
    }
    match pred {
        Predicate::True => f.write_str("true")?,
        Predicate::False => f.write_str("false")?,
        Predicate::Function(k) => match names.functions.get(*k) {
            Some(name) => f.write_str(name)?,
            None => write!(f, "<function {k}>")?,
        },
        Predicate::Segment(h) => match names.segments.get(*h) {
            Some(name) => f.write_str(name)?,
            None => write!(f, "<segment {h}>")?,
        },
        Predicate::Not(inner) => {
            f.write_str("!")?;
            write_pred(f, inner, names, 2)?;
        }
        // Both operators parse left-associative, so the right operand binds
        // one level tighter.
        Predicate::And(a, b) => {
            write_pred(f, a, names, level)?;
            f.write_str(" & ")?;
            write_pred(f, b, names, level + 1)?;
        }
        Predicate::Or(a, b) => {
            write_pred(f, a, names, level)?;
            f.write_str(" | ")?;
            write_pred(f, b, names, level + 1)?;
        }
    }
    if open {
        f.write_str(")")?;
    }
    Ok(())
}

impl fmt::Display for PredicateDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_pred(f, self.pred, self.names, 0)
    }
}
