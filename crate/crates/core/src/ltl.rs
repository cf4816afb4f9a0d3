//! LTL formulas: abstract syntax, parsing, and negation normal form.
//!
//! Concrete grammar (ASCII):
//!
//! ```text
//! phi ::= "true" | "false" | IDENT | "!" phi | phi "&" phi | phi "|" phi
//!       | "X" phi | "F" phi | "G" phi | phi "U" phi | phi "R" phi | "(" phi ")"
//! ```
//!
//! Precedence: unary operators bind tightest, then `U`/`R` (right
//! associative), then `&`, then `|`. `F p` is sugar for `true U p` and `G p`
//! for `false R p`. Identifiers match `[a-zA-Z_][a-zA-Z0-9_']*`; the single
//! letters `U R X F G` and the words `true`/`false` are reserved.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LtlError {
    #[error("syntax error at byte {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("unknown atomic proposition `{0}`")]
    UnknownAtom(String),
    #[error("letter mentions proposition index {0} outside the declared alphabet")]
    LetterOutsideAlphabet(usize),
}

#[derive(Clone, PartialEq, Eq, Hash)]
pub enum Ltl {
    True,
    False,
    Atom(String),
    Not(Box<Ltl>),
    And(Box<Ltl>, Box<Ltl>),
    Or(Box<Ltl>, Box<Ltl>),
    Next(Box<Ltl>),
    Until(Box<Ltl>, Box<Ltl>),
    Release(Box<Ltl>, Box<Ltl>),
}

impl fmt::Debug for Ltl {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for Ltl {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ltl::True => write!(f, "true"),
            Ltl::False => write!(f, "false"),
            Ltl::Atom(s) => write!(f, "{s}"),
            Ltl::Not(p) => write!(f, "!{p}"),
            Ltl::Next(p) => write!(f, "X {p}"),
            Ltl::And(a, b) => write!(f, "({a} & {b})"),
            Ltl::Or(a, b) => write!(f, "({a} | {b})"),
            Ltl::Until(a, b) => write!(f, "({a} U {b})"),
            Ltl::Release(a, b) => write!(f, "({a} R {b})"),
        }
    }
}

impl Ltl {
    pub fn not(p: Ltl) -> Ltl {
        Ltl::Not(Box::new(p))
    }
    pub fn and(a: Ltl, b: Ltl) -> Ltl {
        Ltl::And(Box::new(a), Box::new(b))
    }
    pub fn or(a: Ltl, b: Ltl) -> Ltl {
        Ltl::Or(Box::new(a), Box::new(b))
    }
    pub fn next(p: Ltl) -> Ltl {
        Ltl::Next(Box::new(p))
    }
    pub fn until(a: Ltl, b: Ltl) -> Ltl {
        Ltl::Until(Box::new(a), Box::new(b))
    }
    pub fn release(a: Ltl, b: Ltl) -> Ltl {
        Ltl::Release(Box::new(a), Box::new(b))
    }
    pub fn finally(p: Ltl) -> Ltl {
        Ltl::until(Ltl::True, p)
    }
    pub fn globally(p: Ltl) -> Ltl {
        Ltl::release(Ltl::False, p)
    }

    /// Names of the atomic propositions occurring in the formula.
    pub fn atoms(&self) -> BTreeSet<&str> {
        let mut out = BTreeSet::new();
        self.collect_atoms(&mut out);
        out
    }

    fn collect_atoms<'a>(&'a self, out: &mut BTreeSet<&'a str>) {
        match self {
            Ltl::True | Ltl::False => {}
            Ltl::Atom(s) => {
                out.insert(s);
            }
            Ltl::Not(p) | Ltl::Next(p) => p.collect_atoms(out),
            Ltl::And(a, b) | Ltl::Or(a, b) | Ltl::Until(a, b) | Ltl::Release(a, b) => {
                a.collect_atoms(out);
                b.collect_atoms(out);
            }
        }
    }

    /// True when negation only appears directly above atoms.
    pub fn is_nnf(&self) -> bool {
        match self {
            Ltl::True | Ltl::False | Ltl::Atom(_) => true,
            Ltl::Not(p) => matches!(**p, Ltl::Atom(_)),
            Ltl::Next(p) => p.is_nnf(),
            Ltl::And(a, b) | Ltl::Or(a, b) | Ltl::Until(a, b) | Ltl::Release(a, b) => {
                a.is_nnf() && b.is_nnf()
            }
        }
    }
}

/// Negation normal form by dualization: `and`/`or`, `until`/`release` are
/// dual pairs and `next` is self-dual.
pub fn to_nnf(f: &Ltl) -> Ltl {
    fn pos(f: &Ltl) -> Ltl {
        match f {
            Ltl::True | Ltl::False | Ltl::Atom(_) => f.clone(),
            Ltl::Not(p) => neg(p),
            Ltl::And(a, b) => Ltl::and(pos(a), pos(b)),
            Ltl::Or(a, b) => Ltl::or(pos(a), pos(b)),
            Ltl::Next(p) => Ltl::next(pos(p)),
            Ltl::Until(a, b) => Ltl::until(pos(a), pos(b)),
            Ltl::Release(a, b) => Ltl::release(pos(a), pos(b)),
        }
    }
    fn neg(f: &Ltl) -> Ltl {
        match f {
            Ltl::True => Ltl::False,
            Ltl::False => Ltl::True,
            Ltl::Atom(_) => Ltl::not(f.clone()),
            Ltl::Not(p) => pos(p),
            Ltl::And(a, b) => Ltl::or(neg(a), neg(b)),
            Ltl::Or(a, b) => Ltl::and(neg(a), neg(b)),
            Ltl::Next(p) => Ltl::next(neg(p)),
            Ltl::Until(a, b) => Ltl::release(neg(a), neg(b)),
            Ltl::Release(a, b) => Ltl::until(neg(a), neg(b)),
        }
    }
    pos(f)
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    LParen,
    RParen,
    Bang,
    Amp,
    Pipe,
    True,
    False,
    OpU,
    OpR,
    OpX,
    OpF,
    OpG,
    Ident(String),
}

fn tokenize(text: &str) -> Result<Vec<(usize, Tok)>, LtlError> {
    let bytes = text.as_bytes();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        match c {
            ' ' | '\t' | '\r' | '\n' => i += 1,
            '(' => {
                toks.push((i, Tok::LParen));
                i += 1;
            }
            ')' => {
                toks.push((i, Tok::RParen));
                i += 1;
            }
            '!' => {
                toks.push((i, Tok::Bang));
                i += 1;
            }
            '&' => {
                toks.push((i, Tok::Amp));
                i += 1;
            }
            '|' => {
                toks.push((i, Tok::Pipe));
                i += 1;
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < bytes.len() {
                    let c = bytes[i] as char;
                    if c.is_ascii_alphanumeric() || c == '_' || c == '\'' {
                        i += 1;
                    } else {
                        break;
                    }
                }
                let word = &text[start..i];
                let tok = match word {
                    "true" => Tok::True,
                    "false" => Tok::False,
                    "U" => Tok::OpU,
                    "R" => Tok::OpR,
                    "X" => Tok::OpX,
                    "F" => Tok::OpF,
                    "G" => Tok::OpG,
                    _ => Tok::Ident(word.to_string()),
                };
                toks.push((start, tok));
            }
            other => {
                return Err(LtlError::Syntax {
                    pos: i,
                    msg: format!("unknown token `{other}`"),
                })
            }
        }
    }
    Ok(toks)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).cloned();
        self.pos += 1;
        t.map(|(_, t)| t)
    }

    fn here(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end, |(p, _)| *p)
    }

    fn err<T>(&self, msg: &str) -> Result<T, LtlError> {
        Err(LtlError::Syntax { pos: self.here(), msg: msg.to_string() })
    }

    // or ::= and ("|" and)*
    fn parse_or(&mut self) -> Result<Ltl, LtlError> {
        let mut lhs = self.parse_and()?;
        while self.peek() == Some(&Tok::Pipe) {
            self.bump();
            let rhs = self.parse_and()?;
            lhs = Ltl::or(lhs, rhs);
        }
        Ok(lhs)
    }

    // and ::= until ("&" until)*
    fn parse_and(&mut self) -> Result<Ltl, LtlError> {
        let mut lhs = self.parse_until()?;
        while self.peek() == Some(&Tok::Amp) {
            self.bump();
            let rhs = self.parse_until()?;
            lhs = Ltl::and(lhs, rhs);
        }
        Ok(lhs)
    }

    // until ::= unary (("U" | "R") until)?    (right associative)
    fn parse_until(&mut self) -> Result<Ltl, LtlError> {
        let lhs = self.parse_unary()?;
        match self.peek() {
            Some(Tok::OpU) => {
                self.bump();
                let rhs = self.parse_until()?;
                Ok(Ltl::until(lhs, rhs))
            }
            Some(Tok::OpR) => {
                self.bump();
                let rhs = self.parse_until()?;
                Ok(Ltl::release(lhs, rhs))
            }
            _ => Ok(lhs),
        }
    }

    fn parse_unary(&mut self) -> Result<Ltl, LtlError> {
        match self.peek() {
            Some(Tok::Bang) => {
                self.bump();
                Ok(Ltl::not(self.parse_unary()?))
            }
            Some(Tok::OpX) => {
                self.bump();
                Ok(Ltl::next(self.parse_unary()?))
            }
            Some(Tok::OpF) => {
                self.bump();
                Ok(Ltl::finally(self.parse_unary()?))
            }
            Some(Tok::OpG) => {
                self.bump();
                Ok(Ltl::globally(self.parse_unary()?))
            }
            _ => self.parse_primary(),
        }
    }

    fn parse_primary(&mut self) -> Result<Ltl, LtlError> {
        match self.bump() {
            Some(Tok::True) => Ok(Ltl::True),
            Some(Tok::False) => Ok(Ltl::False),
            Some(Tok::Ident(name)) => Ok(Ltl::Atom(name)),
            Some(Tok::LParen) => {
                let inner = self.parse_or()?;
                if self.bump() != Some(Tok::RParen) {
                    self.pos -= 1;
                    return self.err("expected `)`");
                }
                Ok(inner)
            }
            Some(_) => {
                self.pos -= 1;
                self.err("expected a formula")
            }
            None => self.err("unexpected end of input"),
        }
    }
}

pub fn parse_ltl(text: &str) -> Result<Ltl, LtlError> {
    let toks = tokenize(text)?;
    let mut p = Parser { toks, pos: 0, end: text.len() };
    let f = p.parse_or()?;
    if p.pos != p.toks.len() {
        return p.err("trailing input after formula");
    }
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn atom(s: &str) -> Ltl {
        Ltl::Atom(s.to_string())
    }

    #[test]
    fn globally_desugars_to_release() {
        let f = parse_ltl("G !ap2").unwrap();
        assert_eq!(f, Ltl::release(Ltl::False, Ltl::not(atom("ap2"))));
    }

    #[test]
    fn starvation_formula_parses_with_expected_precedence() {
        let f = parse_ltl("F ap1 & G !ap2").unwrap();
        assert_eq!(
            f,
            Ltl::and(
                Ltl::until(Ltl::True, atom("ap1")),
                Ltl::release(Ltl::False, Ltl::not(atom("ap2"))),
            )
        );
    }

    #[test]
    fn missing_operand_is_a_syntax_error() {
        assert!(matches!(parse_ltl("ap1 U"), Err(LtlError::Syntax { .. })));
    }

    #[test]
    fn unknown_token_reports_position() {
        match parse_ltl("ap1 # ap2") {
            Err(LtlError::Syntax { pos, .. }) => assert_eq!(pos, 4),
            other => panic!("expected syntax error, got {other:?}"),
        }
    }

    #[test]
    fn until_is_right_associative() {
        let f = parse_ltl("a U b U c").unwrap();
        assert_eq!(f, Ltl::until(atom("a"), Ltl::until(atom("b"), atom("c"))));
    }

    #[test]
    fn or_binds_loosest() {
        let f = parse_ltl("a & b | c").unwrap();
        assert_eq!(f, Ltl::or(Ltl::and(atom("a"), atom("b")), atom("c")));
    }

    #[test]
    fn primed_identifiers_are_atoms() {
        let f = parse_ltl("F ap2'").unwrap();
        assert_eq!(f, Ltl::finally(atom("ap2'")));
    }

    #[test]
    fn nnf_de_morgan() {
        let f = Ltl::not(Ltl::and(atom("a"), atom("b")));
        assert_eq!(to_nnf(&f), Ltl::or(Ltl::not(atom("a")), Ltl::not(atom("b"))));
    }

    #[test]
    fn nnf_until_release_duality() {
        let f = Ltl::not(Ltl::until(atom("a"), atom("b")));
        assert_eq!(to_nnf(&f), Ltl::release(Ltl::not(atom("a")), Ltl::not(atom("b"))));
    }

    #[test]
    fn nnf_double_negation() {
        let f = Ltl::not(Ltl::not(atom("a")));
        assert_eq!(to_nnf(&f), atom("a"));
    }

    #[test]
    fn nnf_result_is_nnf() {
        let f = parse_ltl("!(a U (X !(b & c)))").unwrap();
        assert!(to_nnf(&f).is_nnf());
    }
}
