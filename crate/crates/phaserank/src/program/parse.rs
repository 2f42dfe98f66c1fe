//! Parser for the ITS text dialect.
//!
//! ```text
//! (GOAL COMPLEXITY)
//! (STARTTERM (FUNCTIONSYMBOLS l0))
//! (VAR x y u)
//! (RULES
//!   l0(x, y) -> l1(x, y)
//!   l1(x, y) -> l1(x + y, y - 1) :|: x > 0 && u <= 3
//! )
//! ```
//!
//! Program variables are the argument names of the first rule's left-hand
//! side (or the `VAR` list when there are no rules). Arguments are
//! positional, so each rule may use its own names. Every other variable is
//! temporary, declared in `VAR` or not. A right-hand side may be wrapped as
//! `Com_1(l(...))`.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use super::{Atom, Constraint, IntegerProgram, Location, Polynomial, Transition, TransitionId, Var};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("{line}:{column}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    LParen,
    RParen,
    Comma,
    Arrow,
    Bar,
    And,
    Rel(&'static str),
    Plus,
    Minus,
    Star,
    Ident(String),
    Num(i64),
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    line: usize,
    column: usize,
}

fn lex(text: &str) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    let err = |line, column, m: &str| ParseError { line, column, message: m.to_string() };
    while i < chars.len() {
        let c = chars[i];
        let (l0, c0) = (line, col);
        let adv = |n: usize, i: &mut usize, col: &mut usize| {
            *i += n;
            *col += n;
        };
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            adv(1, &mut i, &mut col);
            continue;
        }
        if c == '#' || (c == '/' && chars.get(i + 1) == Some(&'/')) {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let rest: String = chars[i..chars.len().min(i + 3)].iter().collect();
        let (tok, n) = if rest.starts_with(":|:") {
            (Tok::Bar, 3)
        } else if rest.starts_with("->") {
            (Tok::Arrow, 2)
        } else if rest.starts_with("&&") || rest.starts_with("/\\") {
            (Tok::And, 2)
        } else if rest.starts_with("<=") {
            (Tok::Rel("<="), 2)
        } else if rest.starts_with(">=") {
            (Tok::Rel(">="), 2)
        } else if rest.starts_with("==") {
            (Tok::Rel("="), 2)
        } else {
            match c {
                '(' => (Tok::LParen, 1),
                ')' => (Tok::RParen, 1),
                ',' => (Tok::Comma, 1),
                '<' => (Tok::Rel("<"), 1),
                '>' => (Tok::Rel(">"), 1),
                '=' => (Tok::Rel("="), 1),
                '+' => (Tok::Plus, 1),
                '-' => (Tok::Minus, 1),
                '*' => (Tok::Star, 1),
                d if d.is_ascii_digit() => {
                    let mut j = i;
                    while j < chars.len() && chars[j].is_ascii_digit() {
                        j += 1;
                    }
                    let s: String = chars[i..j].iter().collect();
                    let v = s.parse::<i64>().map_err(|_| err(l0, c0, "integer literal out of range"))?;
                    (Tok::Num(v), j - i)
                }
                a if a.is_alphabetic() || a == '_' => {
                    let mut j = i;
                    while j < chars.len()
                        && (chars[j].is_alphanumeric() || matches!(chars[j], '_' | '\'' | '.' | '!'))
                    {
                        j += 1;
                    }
                    (Tok::Ident(chars[i..j].iter().collect()), j - i)
                }
                other => return Err(err(l0, c0, &format!("unexpected character '{other}'"))),
            }
        };
        out.push(Token { tok, line: l0, column: c0 });
        adv(n, &mut i, &mut col);
    }
    Ok(out)
}

struct RawRule {
    line: usize,
    column: usize,
    source: String,
    args: Vec<String>,
    target: String,
    rhs: Vec<Polynomial>,
    guard: Vec<Atom>,
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    end: (usize, usize),
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn peek2(&self) -> Option<&Tok> {
        self.toks.get(self.pos + 1).map(|t| &t.tok)
    }

    fn here(&self) -> (usize, usize) {
        self.toks.get(self.pos).map(|t| (t.line, t.column)).unwrap_or(self.end)
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T, ParseError> {
        let (line, column) = self.here();
        Err(ParseError { line, column, message: message.into() })
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), ParseError> {
        if self.peek() == Some(&tok) {
            self.pos += 1;
            Ok(())
        } else {
            self.error(format!("expected {what}"))
        }
    }

    fn ident(&mut self, what: &str) -> Result<String, ParseError> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => self.error(format!("expected {what}")),
        }
    }

    fn keyword(&mut self, kw: &str) -> Result<(), ParseError> {
        match self.peek() {
            Some(Tok::Ident(s)) if s.eq_ignore_ascii_case(kw) => {
                self.pos += 1;
                Ok(())
            }
            _ => self.error(format!("expected {kw}")),
        }
    }

    fn expr(&mut self) -> Result<Polynomial, ParseError> {
        let mut acc = self.term()?;
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.pos += 1;
                    acc = acc.add(&self.term()?);
                }
                Some(Tok::Minus) => {
                    self.pos += 1;
                    acc = acc.sub(&self.term()?);
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<Polynomial, ParseError> {
        let mut acc = self.factor()?;
        while self.peek() == Some(&Tok::Star) {
            self.pos += 1;
            acc = acc.mul(&self.factor()?);
        }
        Ok(acc)
    }

    fn factor(&mut self) -> Result<Polynomial, ParseError> {
        match self.peek().cloned() {
            Some(Tok::Num(n)) => {
                self.pos += 1;
                Ok(Polynomial::constant(n))
            }
            Some(Tok::Ident(s)) => {
                self.pos += 1;
                Ok(Polynomial::var(Var::new(&s)))
            }
            Some(Tok::Minus) => {
                self.pos += 1;
                Ok(self.factor()?.neg())
            }
            Some(Tok::LParen) => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(Tok::RParen, "')'")?;
                Ok(e)
            }
            _ => self.error("expected an expression"),
        }
    }

    fn atoms(&mut self) -> Result<Vec<Atom>, ParseError> {
        if let Some(Tok::Ident(s)) = self.peek() {
            if s.eq_ignore_ascii_case("true") && self.peek2() != Some(&Tok::LParen) {
                self.pos += 1;
                return Ok(Vec::new());
            }
        }
        let lhs = self.expr()?;
        let rel = match self.peek() {
            Some(Tok::Rel(r)) => *r,
            _ => return self.error("expected a comparison operator"),
        };
        self.pos += 1;
        let rhs = self.expr()?;
        Ok(match rel {
            "<" => vec![Atom::lt(&lhs, &rhs)],
            "<=" => vec![Atom::le(&lhs, &rhs)],
            ">" => vec![Atom::gt(&lhs, &rhs)],
            ">=" => vec![Atom::ge(&lhs, &rhs)],
            _ => vec![Atom::le(&lhs, &rhs), Atom::ge(&lhs, &rhs)],
        })
    }

    fn arg_list(&mut self) -> Result<Vec<Polynomial>, ParseError> {
        self.expect(Tok::LParen, "'('")?;
        let mut out = Vec::new();
        if self.peek() == Some(&Tok::RParen) {
            self.pos += 1;
            return Ok(out);
        }
        loop {
            out.push(self.expr()?);
            match self.peek() {
                Some(Tok::Comma) => self.pos += 1,
                Some(Tok::RParen) => {
                    self.pos += 1;
                    return Ok(out);
                }
                _ => return self.error("expected ',' or ')'"),
            }
        }
    }

    fn rule(&mut self) -> Result<RawRule, ParseError> {
        let (line, column) = self.here();
        let source = self.ident("a location")?;
        let (al, ac) = self.here();
        let args = self
            .arg_list()?
            .into_iter()
            .map(|p| p.as_var().map(|v| v.name().to_string()))
            .collect::<Option<Vec<_>>>()
            .ok_or(ParseError {
                line: al,
                column: ac,
                message: "left-hand side arguments must be variables".into(),
            })?;
        self.expect(Tok::Arrow, "'->'")?;
        let mut wrapped = false;
        if let (Some(Tok::Ident(s)), Some(Tok::LParen)) = (self.peek(), self.peek2()) {
            if s.starts_with("Com_") {
                self.pos += 2;
                wrapped = true;
            }
        }
        let target = self.ident("a target location")?;
        let rhs = self.arg_list()?;
        if wrapped {
            self.expect(Tok::RParen, "')' closing Com_")?;
        }
        let mut guard = Vec::new();
        if self.peek() == Some(&Tok::Bar) {
            self.pos += 1;
            guard.extend(self.atoms()?);
            while self.peek() == Some(&Tok::And) {
                self.pos += 1;
                guard.extend(self.atoms()?);
            }
        }
        Ok(RawRule { line, column, source, args, target, rhs, guard })
    }
}

/// Parses a program in the ITS dialect described in the module docs.
pub fn parse_program(text: &str) -> Result<IntegerProgram, ParseError> {
    let toks = lex(text)?;
    let end = toks.last().map(|t| (t.line, t.column + 1)).unwrap_or((1, 1));
    let mut ps = Parser { toks, pos: 0, end };
    let mut start: Option<String> = None;
    let mut declared: Vec<String> = Vec::new();
    let mut rules: Vec<RawRule> = Vec::new();
    while ps.peek().is_some() {
        ps.expect(Tok::LParen, "'('")?;
        let section = ps.ident("a section name")?.to_ascii_uppercase();
        match section.as_str() {
            "GOAL" => {
                ps.ident("a goal")?;
            }
            "STARTTERM" => {
                ps.expect(Tok::LParen, "'('")?;
                ps.keyword("FUNCTIONSYMBOLS")?;
                start = Some(ps.ident("the start location")?);
                ps.expect(Tok::RParen, "')'")?;
            }
            "VAR" => {
                while let Some(Tok::Ident(s)) = ps.peek() {
                    declared.push(s.clone());
                    ps.pos += 1;
                }
            }
            "RULES" => {
                while ps.peek() != Some(&Tok::RParen) {
                    if ps.peek().is_none() {
                        return ps.error("unterminated RULES section");
                    }
                    rules.push(ps.rule()?);
                }
            }
            other => return ps.error(format!("unknown section {other}")),
        }
        ps.expect(Tok::RParen, "')'")?;
    }
    let start = start.ok_or(ParseError { line: 1, column: 1, message: "missing STARTTERM".into() })?;
    build(start, declared, rules)
}

fn build(start: String, declared: Vec<String>, rules: Vec<RawRule>) -> Result<IntegerProgram, ParseError> {
    let pv: Vec<Var> = match rules.first() {
        Some(r) => r.args.iter().map(|a| Var::new(a)).collect(),
        None => declared.iter().map(|a| Var::new(a)).collect(),
    };
    let pv_set: BTreeSet<&str> = pv.iter().map(|v| v.name()).collect();
    if pv_set.len() != pv.len() {
        let r = &rules[0];
        return Err(ParseError { line: r.line, column: r.column, message: "repeated argument name".into() });
    }
    let initial = Location::new(&start);
    let mut locations: BTreeSet<Location> = BTreeSet::new();
    locations.insert(initial.clone());
    let mut ts = Vec::new();
    for (i, r) in rules.into_iter().enumerate() {
        let fail = |m: &str| ParseError { line: r.line, column: r.column, message: m.to_string() };
        if r.args.len() != pv.len() || r.rhs.len() != pv.len() {
            return Err(fail(&format!("expected {} arguments on both sides", pv.len())));
        }
        let mut uniq = BTreeSet::new();
        if !r.args.iter().all(|a| uniq.insert(a.clone())) {
            return Err(fail("repeated argument name"));
        }
        if r.target == start {
            return Err(fail("rule targets the start location"));
        }
        // Positional renaming; free names that clash with a program variable get fresh names.
        let mut ren: BTreeMap<Var, Var> = BTreeMap::new();
        for (a, v) in r.args.iter().zip(&pv) {
            ren.insert(Var::new(a), v.clone());
        }
        let mut free: BTreeSet<Var> = r.guard.iter().flat_map(|a| a.vars()).collect();
        for e in &r.rhs {
            free.extend(e.vars());
        }
        for v in free {
            if !ren.contains_key(&v) && pv_set.contains(v.name()) {
                let mut k = 0;
                let fresh = loop {
                    let cand = Var::new(&format!("{}_{}_{}", v.name(), i, k));
                    if !pv_set.contains(cand.name()) {
                        break cand;
                    }
                    k += 1;
                };
                ren.insert(v, fresh);
            }
        }
        let guard = Constraint::from_atoms(r.guard.iter().map(|a| Atom::le_zero(a.poly().rename(&ren))));
        let update = pv.iter().cloned().zip(r.rhs.iter().map(|e| e.rename(&ren))).collect();
        let source = Location::new(&r.source);
        let target = Location::new(&r.target);
        locations.insert(source.clone());
        locations.insert(target.clone());
        ts.push(Transition { id: TransitionId(i as u32), source, target, guard, update });
    }
    IntegerProgram::new(pv, locations, initial, ts)
        .map_err(|e| ParseError { line: 1, column: 1, message: e.to_string() })
}
