//! Problem-file frontend: parsing, DNF normalization, and the variable
//! partition checks.
//!
//! A problem file declares a shared/private variable partition and two
//! formulas built from non-strict polynomial inequalities:
//!
//! ```text
//! shared x y;
//! psi_only r R;
//! phi := x^2 + y^2 - 1 >= 0 & y >= 0 | 0.04 - x^2 >= 0;
//! psi := 4 <= R <= 6 & R^2 - x^2 - y^2 >= 0;
//! ```
//!
//! `&` binds tighter than `|`, parentheses group, `a <= e <= b` chains lower
//! to pairs of atoms, and `p = q` lowers to the two inequalities `p - q >= 0`
//! and `q - p >= 0`. Decimal literals are read as exact rationals, and `n/d`
//! between numeric literals is accepted so canonical renderings re-parse.
//! Strict inequalities are rejected. Comments start with `#`.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::poly::{Monomial, Polynomial, VarId, VarTable};
use crate::rat::{self, Rat};

/// A single non-strict constraint `poly >= 0`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Atom {
    pub poly: Polynomial,
}

impl Atom {
    pub fn new(poly: Polynomial) -> Self {
        Self { poly }
    }
}

/// Conjunction of atoms; denotes a closed basic semialgebraic set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Clause {
    pub atoms: Vec<Atom>,
}

impl Clause {
    pub fn new(atoms: Vec<Atom>) -> Self {
        assert!(!atoms.is_empty(), "clause must have at least one atom");
        Self { atoms }
    }

    pub fn holds(&self, point: &[f64]) -> bool {
        self.atoms
            .iter()
            .all(|a| a.poly.evaluate(point).map(|v| v >= 0.0).unwrap_or(false))
    }

    pub fn holds_exact(&self, point: &[Rat]) -> bool {
        self.atoms.iter().all(|a| {
            a.poly
                .evaluate_exact(point)
                .map(|v| v >= rat::zero())
                .unwrap_or(false)
        })
    }

    /// Variable bounds implied by univariate degree-1 atoms (`6 - R >= 0`
    /// bounds `R` above by 6). Returns `(var, lower, upper)` per bounded var.
    pub fn linear_bounds(&self) -> Vec<(VarId, Option<Rat>, Option<Rat>)> {
        let mut out: Vec<(VarId, Option<Rat>, Option<Rat>)> = Vec::new();
        for atom in &self.atoms {
            let support = atom.poly.support();
            if support.len() != 1 || atom.poly.degree() != Some(1) {
                continue;
            }
            let v = support[0];
            let nvars = atom.poly.nvars();
            let a = atom.poly.coeff(&Monomial::var(nvars, v, 1));
            let c = atom.poly.coeff(&Monomial::unit(nvars));
            // a*v + c >= 0
            let bound = -c / a.clone();
            let entry = match out.iter_mut().find(|(u, _, _)| *u == v) {
                Some(e) => e,
                None => {
                    out.push((v, None, None));
                    out.last_mut().unwrap()
                }
            };
            if a > rat::zero() {
                let lo = &mut entry.1;
                if lo.as_ref().map(|b| bound > *b).unwrap_or(true) {
                    *lo = Some(bound);
                }
            } else {
                let hi = &mut entry.2;
                if hi.as_ref().map(|b| bound < *b).unwrap_or(true) {
                    *hi = Some(bound);
                }
            }
        }
        out
    }
}

/// Disjunction of clauses; denotes a closed semialgebraic set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Formula {
    pub clauses: Vec<Clause>,
}

impl Formula {
    pub fn new(clauses: Vec<Clause>) -> Self {
        assert!(!clauses.is_empty(), "formula must have at least one clause");
        Self { clauses }
    }

    pub fn holds(&self, point: &[f64]) -> bool {
        self.clauses.iter().any(|c| c.holds(point))
    }

    pub fn holds_exact(&self, point: &[Rat]) -> bool {
        self.clauses.iter().any(|c| c.holds_exact(point))
    }
}

/// Validated problem: partitioned variables and the two DNF formulas.
#[derive(Debug, Clone)]
pub struct ProblemInstance {
    pub table: Arc<VarTable>,
    pub shared: Vec<VarId>,
    pub phi_private: Vec<VarId>,
    pub psi_private: Vec<VarId>,
    pub phi: Formula,
    pub psi: Formula,
}

impl ProblemInstance {
    /// Variables admissible in `phi` (shared then phi-private).
    pub fn phi_vars(&self) -> Vec<VarId> {
        self.shared
            .iter()
            .chain(&self.phi_private)
            .copied()
            .collect()
    }

    /// Variables admissible in `psi` (shared then psi-private).
    pub fn psi_vars(&self) -> Vec<VarId> {
        self.shared
            .iter()
            .chain(&self.psi_private)
            .copied()
            .collect()
    }
}

impl fmt::Display for ProblemInstance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names = |vs: &[VarId]| {
            vs.iter()
                .map(|&v| self.table.name(v))
                .collect::<Vec<_>>()
                .join(" ")
        };
        writeln!(f, "shared {};", names(&self.shared))?;
        if !self.phi_private.is_empty() {
            writeln!(f, "phi_only {};", names(&self.phi_private))?;
        }
        if !self.psi_private.is_empty() {
            writeln!(f, "psi_only {};", names(&self.psi_private))?;
        }
        let render_formula = |formula: &Formula| {
            formula
                .clauses
                .iter()
                .map(|c| {
                    let body = c
                        .atoms
                        .iter()
                        .map(|a| format!("{} >= 0", a.poly))
                        .collect::<Vec<_>>()
                        .join(" & ");
                    if formula.clauses.len() > 1 {
                        format!("({body})")
                    } else {
                        body
                    }
                })
                .collect::<Vec<_>>()
                .join(" | ")
        };
        writeln!(f, "phi := {};", render_formula(&self.phi))?;
        writeln!(f, "psi := {};", render_formula(&self.psi))
    }
}

/// Parse and validation errors, with source positions where available.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("{line}:{col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("{line}:{col}: strict inequalities unsupported; use >=, <= or =")]
    StrictInequality { line: usize, col: usize },
    #[error("{line}:{col}: unknown variable '{name}'")]
    UnknownVariable { line: usize, col: usize, name: String },
    #[error("{line}:{col}: variable '{name}' is private to the other formula")]
    WrongPartition { line: usize, col: usize, name: String },
    #[error("variable '{name}' declared twice")]
    DuplicateDeclaration { name: String },
    #[error("missing {what}")]
    Missing { what: &'static str },
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Num(Rat),
    Plus,
    Minus,
    Star,
    Caret,
    Slash,
    LPar,
    RPar,
    Amp,
    Pipe,
    Le,
    Ge,
    Eq,
    Assign,
    Semi,
}

#[derive(Debug, Clone, Copy)]
struct Pos {
    line: usize,
    col: usize,
}

fn lex(text: &str) -> Result<Vec<(Tok, Pos)>, ParseError> {
    let mut toks = Vec::new();
    let mut line = 1usize;
    let mut col = 1usize;
    let chars: Vec<char> = text.chars().collect();
    let mut i = 0;
    let syntax = |line, col, msg: String| ParseError::Syntax { line, col, msg };
    while i < chars.len() {
        let c = chars[i];
        let pos = Pos { line, col };
        let mut single = |tok: Tok, i: &mut usize, col: &mut usize| {
            toks.push((tok, pos));
            *i += 1;
            *col += 1;
        };
        match c {
            '\n' => {
                i += 1;
                line += 1;
                col = 1;
            }
            ' ' | '\t' | '\r' => {
                i += 1;
                col += 1;
            }
            '#' => {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                }
            }
            '+' => single(Tok::Plus, &mut i, &mut col),
            '-' => single(Tok::Minus, &mut i, &mut col),
            '*' => single(Tok::Star, &mut i, &mut col),
            '^' => single(Tok::Caret, &mut i, &mut col),
            '/' => single(Tok::Slash, &mut i, &mut col),
            '(' => single(Tok::LPar, &mut i, &mut col),
            ')' => single(Tok::RPar, &mut i, &mut col),
            '&' => single(Tok::Amp, &mut i, &mut col),
            '|' => single(Tok::Pipe, &mut i, &mut col),
            ';' => single(Tok::Semi, &mut i, &mut col),
            '=' => single(Tok::Eq, &mut i, &mut col),
            '<' | '>' => {
                if i + 1 < chars.len() && chars[i + 1] == '=' {
                    toks.push((if c == '<' { Tok::Le } else { Tok::Ge }, pos));
                    i += 2;
                    col += 2;
                } else {
                    return Err(ParseError::StrictInequality {
                        line: pos.line,
                        col: pos.col,
                    });
                }
            }
            ':' => {
                if i + 1 < chars.len() && chars[i + 1] == '=' {
                    toks.push((Tok::Assign, pos));
                    i += 2;
                    col += 2;
                } else {
                    return Err(syntax(pos.line, pos.col, "expected ':='".into()));
                }
            }
            c if c.is_ascii_digit() || c == '.' => {
                let start = i;
                let mut seen_dot = false;
                while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                    if chars[i] == '.' {
                        if seen_dot {
                            return Err(syntax(pos.line, pos.col, "malformed number".into()));
                        }
                        seen_dot = true;
                    }
                    i += 1;
                }
                let s: String = chars[start..i].iter().collect();
                col += i - start;
                let q = rat::parse_literal(&s)
                    .ok_or_else(|| syntax(pos.line, pos.col, format!("malformed number '{s}'")))?;
                toks.push((Tok::Num(q), pos));
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                let s: String = chars[start..i].iter().collect();
                col += i - start;
                toks.push((Tok::Ident(s), pos));
            }
            other => {
                return Err(syntax(
                    pos.line,
                    pos.col,
                    format!("unexpected character '{other}'"),
                ));
            }
        }
    }
    Ok(toks)
}

/// Boolean structure before DNF normalization. `Atoms` is the conjunction of
/// constraints produced by one (possibly chained) relation.
#[derive(Debug, Clone)]
enum BExpr {
    Atoms(Vec<Polynomial>),
    And(Box<BExpr>, Box<BExpr>),
    Or(Box<BExpr>, Box<BExpr>),
}

impl BExpr {
    #[cfg(test)]
    fn holds_exact(&self, point: &[Rat]) -> bool {
        match self {
            BExpr::Atoms(ps) => ps
                .iter()
                .all(|p| p.evaluate_exact(point).unwrap() >= rat::zero()),
            BExpr::And(a, b) => a.holds_exact(point) && b.holds_exact(point),
            BExpr::Or(a, b) => a.holds_exact(point) || b.holds_exact(point),
        }
    }
}

/// Distribute conjunction over disjunction; each inner vec is one clause.
fn to_dnf(e: &BExpr) -> Vec<Vec<Polynomial>> {
    match e {
        BExpr::Atoms(ps) => vec![ps.clone()],
        BExpr::Or(a, b) => {
            let mut out = to_dnf(a);
            out.extend(to_dnf(b));
            out
        }
        BExpr::And(a, b) => {
            let left = to_dnf(a);
            let right = to_dnf(b);
            let mut out = Vec::with_capacity(left.len() * right.len());
            for ca in &left {
                for cb in &right {
                    let mut clause = ca.clone();
                    clause.extend(cb.iter().cloned());
                    out.push(clause);
                }
            }
            out
        }
    }
}

struct Parser<'a> {
    toks: &'a [(Tok, Pos)],
    pos: usize,
    table: Arc<VarTable>,
    /// Variables admissible in the current formula; `None` allows all.
    allowed: Option<Vec<VarId>>,
    /// Names known to the problem but private to the other side.
    foreign: Vec<String>,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn here(&self) -> Pos {
        self.toks
            .get(self.pos)
            .or_else(|| self.toks.last())
            .map(|(_, p)| *p)
            .unwrap_or(Pos { line: 1, col: 1 })
    }

    fn bump(&mut self) -> Option<&Tok> {
        let t = self.toks.get(self.pos).map(|(t, _)| t);
        self.pos += 1;
        t
    }

    fn expect(&mut self, t: &Tok, what: &str) -> Result<(), ParseError> {
        let pos = self.here();
        match self.bump() {
            Some(got) if got == t => Ok(()),
            _ => Err(ParseError::Syntax {
                line: pos.line,
                col: pos.col,
                msg: format!("expected {what}"),
            }),
        }
    }

    fn err(&self, msg: impl Into<String>) -> ParseError {
        let p = self.here();
        ParseError::Syntax {
            line: p.line,
            col: p.col,
            msg: msg.into(),
        }
    }

    /// Does the group starting at the current `(` contain boolean structure?
    fn paren_is_boolean(&self) -> bool {
        debug_assert_eq!(self.peek(), Some(&Tok::LPar));
        let mut depth = 0usize;
        for (t, _) in &self.toks[self.pos..] {
            match t {
                Tok::LPar => depth += 1,
                Tok::RPar => {
                    depth -= 1;
                    if depth == 0 {
                        return false;
                    }
                }
                Tok::Amp | Tok::Pipe | Tok::Le | Tok::Ge | Tok::Eq => return true,
                _ => {}
            }
        }
        false
    }

    fn parse_bexpr(&mut self) -> Result<BExpr, ParseError> {
        let mut lhs = self.parse_bterm()?;
        while self.peek() == Some(&Tok::Pipe) {
            self.bump();
            let rhs = self.parse_bterm()?;
            lhs = BExpr::Or(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn parse_bterm(&mut self) -> Result<BExpr, ParseError> {
        let mut lhs = self.parse_bfactor()?;
        while self.peek() == Some(&Tok::Amp) {
            self.bump();
            let rhs = self.parse_bfactor()?;
            lhs = BExpr::And(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn parse_bfactor(&mut self) -> Result<BExpr, ParseError> {
        if self.peek() == Some(&Tok::LPar) && self.paren_is_boolean() {
            self.bump();
            let inner = self.parse_bexpr()?;
            self.expect(&Tok::RPar, "')'")?;
            return Ok(inner);
        }
        self.parse_relation()
    }

    /// `poly (rel poly)+`, chains lowered pairwise to `p >= 0` atoms.
    fn parse_relation(&mut self) -> Result<BExpr, ParseError> {
        let mut polys = vec![self.parse_poly()?];
        let mut rels = Vec::new();
        loop {
            match self.peek() {
                Some(Tok::Le) => {
                    self.bump();
                    rels.push(Tok::Le);
                }
                Some(Tok::Ge) => {
                    self.bump();
                    rels.push(Tok::Ge);
                }
                Some(Tok::Eq) => {
                    self.bump();
                    rels.push(Tok::Eq);
                }
                _ => break,
            }
            polys.push(self.parse_poly()?);
        }
        if rels.is_empty() {
            return Err(self.err("expected a relation (>=, <= or =)"));
        }
        let mut atoms = Vec::new();
        for (k, rel) in rels.iter().enumerate() {
            let a = &polys[k];
            let b = &polys[k + 1];
            match rel {
                Tok::Ge => atoms.push(a.sub(b)),
                Tok::Le => atoms.push(b.sub(a)),
                Tok::Eq => {
                    atoms.push(a.sub(b));
                    atoms.push(b.sub(a));
                }
                _ => unreachable!(),
            }
        }
        Ok(BExpr::Atoms(atoms))
    }

    fn parse_poly(&mut self) -> Result<Polynomial, ParseError> {
        let mut acc = self.parse_term()?;
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.bump();
                    acc = acc.add(&self.parse_term()?);
                }
                Some(Tok::Minus) => {
                    self.bump();
                    acc = acc.sub(&self.parse_term()?);
                }
                _ => break,
            }
        }
        Ok(acc)
    }

    fn parse_term(&mut self) -> Result<Polynomial, ParseError> {
        let mut acc = self.parse_unary()?;
        while self.peek() == Some(&Tok::Star) {
            self.bump();
            acc = acc.mul(&self.parse_unary()?);
        }
        Ok(acc)
    }

    fn parse_unary(&mut self) -> Result<Polynomial, ParseError> {
        if self.peek() == Some(&Tok::Minus) {
            self.bump();
            return Ok(self.parse_unary()?.neg());
        }
        self.parse_power()
    }

    fn parse_power(&mut self) -> Result<Polynomial, ParseError> {
        let base = self.parse_primary()?;
        if self.peek() == Some(&Tok::Caret) {
            self.bump();
            let pos = self.here();
            match self.bump().cloned() {
                Some(Tok::Num(q)) if q.is_integer() && q >= rat::zero() => {
                    let e: u32 = u32::try_from(q.to_integer()).map_err(|_| ParseError::Syntax {
                        line: pos.line,
                        col: pos.col,
                        msg: "exponent too large".into(),
                    })?;
                    return Ok(base.pow(e));
                }
                _ => {
                    return Err(ParseError::Syntax {
                        line: pos.line,
                        col: pos.col,
                        msg: "exponent must be a nonnegative integer".into(),
                    })
                }
            }
        }
        Ok(base)
    }

    fn parse_primary(&mut self) -> Result<Polynomial, ParseError> {
        let pos = self.here();
        match self.bump().cloned() {
            Some(Tok::Num(q)) => {
                // `n/d` between numeric literals forms a rational literal
                if self.peek() == Some(&Tok::Slash) {
                    self.bump();
                    let dpos = self.here();
                    match self.bump().cloned() {
                        Some(Tok::Num(d)) if d != rat::zero() => {
                            Ok(Polynomial::constant(self.table.clone(), q / d))
                        }
                        _ => Err(ParseError::Syntax {
                            line: dpos.line,
                            col: dpos.col,
                            msg: "'/' is only allowed between numeric literals".into(),
                        }),
                    }
                } else {
                    Ok(Polynomial::constant(self.table.clone(), q))
                }
            }
            Some(Tok::Ident(name)) => {
                let v = self
                    .table
                    .lookup(&name)
                    .ok_or_else(|| ParseError::UnknownVariable {
                        line: pos.line,
                        col: pos.col,
                        name: name.clone(),
                    })?;
                if let Some(allowed) = &self.allowed {
                    if !allowed.contains(&v) {
                        return if self.foreign.contains(&name) {
                            Err(ParseError::WrongPartition {
                                line: pos.line,
                                col: pos.col,
                                name,
                            })
                        } else {
                            Err(ParseError::UnknownVariable {
                                line: pos.line,
                                col: pos.col,
                                name,
                            })
                        };
                    }
                }
                Ok(Polynomial::variable(self.table.clone(), v))
            }
            Some(Tok::LPar) => {
                let inner = self.parse_poly()?;
                self.expect(&Tok::RPar, "')'")?;
                Ok(inner)
            }
            _ => Err(ParseError::Syntax {
                line: pos.line,
                col: pos.col,
                msg: "expected a number, variable or '('".into(),
            }),
        }
    }
}

/// Parse a polynomial expression over an existing variable table.
pub fn parse_polynomial(text: &str, table: &Arc<VarTable>) -> Result<Polynomial, ParseError> {
    let toks = lex(text)?;
    let mut p = Parser {
        toks: &toks,
        pos: 0,
        table: table.clone(),
        allowed: None,
        foreign: Vec::new(),
    };
    let poly = p.parse_poly()?;
    if p.pos != toks.len() {
        return Err(p.err("trailing input after polynomial"));
    }
    Ok(poly)
}

/// Parse a problem file into a validated instance in DNF.
pub fn parse_problem(text: &str) -> Result<ProblemInstance, ParseError> {
    let (instance, _, _) = parse_problem_raw(text)?;
    Ok(instance)
}

/// Parse, also returning the pre-DNF boolean structure of both formulas.
fn parse_problem_raw(text: &str) -> Result<(ProblemInstance, BExpr, BExpr), ParseError> {
    let toks = lex(text)?;
    // split into statements on ';'
    let mut statements: Vec<&[(Tok, Pos)]> = Vec::new();
    let mut start = 0;
    for (i, (t, _)) in toks.iter().enumerate() {
        if *t == Tok::Semi {
            statements.push(&toks[start..i]);
            start = i + 1;
        }
    }
    if start != toks.len() {
        let p = toks[start].1;
        return Err(ParseError::Syntax {
            line: p.line,
            col: p.col,
            msg: "statement not terminated by ';'".into(),
        });
    }

    // first pass: declarations
    let mut shared_names: Vec<String> = Vec::new();
    let mut phi_names: Vec<String> = Vec::new();
    let mut psi_names: Vec<String> = Vec::new();
    let mut formula_stmts: Vec<(&str, &[(Tok, Pos)])> = Vec::new();
    for stmt in &statements {
        if stmt.is_empty() {
            continue;
        }
        let (head, pos) = match &stmt[0] {
            (Tok::Ident(s), p) => (s.as_str(), *p),
            (_, p) => {
                return Err(ParseError::Syntax {
                    line: p.line,
                    col: p.col,
                    msg: "expected a declaration or formula definition".into(),
                })
            }
        };
        match head {
            "shared" | "phi_only" | "psi_only" => {
                let bucket = match head {
                    "shared" => &mut shared_names,
                    "phi_only" => &mut phi_names,
                    _ => &mut psi_names,
                };
                if stmt.len() == 1 {
                    return Err(ParseError::Syntax {
                        line: pos.line,
                        col: pos.col,
                        msg: format!("'{head}' needs at least one variable"),
                    });
                }
                for (t, p) in &stmt[1..] {
                    match t {
                        Tok::Ident(name) => bucket.push(name.clone()),
                        _ => {
                            return Err(ParseError::Syntax {
                                line: p.line,
                                col: p.col,
                                msg: "expected a variable name".into(),
                            })
                        }
                    }
                }
            }
            "phi" | "psi" => {
                if stmt.len() < 2 || stmt[1].0 != Tok::Assign {
                    return Err(ParseError::Syntax {
                        line: pos.line,
                        col: pos.col,
                        msg: format!("expected '{head} := <formula>'"),
                    });
                }
                formula_stmts.push((head, &stmt[2..]));
            }
            other => {
                return Err(ParseError::Syntax {
                    line: pos.line,
                    col: pos.col,
                    msg: format!("unknown statement '{other}'"),
                })
            }
        }
    }

    let mut table = VarTable::new();
    let mut seen: Vec<&str> = Vec::new();
    for name in shared_names.iter().chain(&phi_names).chain(&psi_names) {
        if seen.contains(&name.as_str()) {
            return Err(ParseError::DuplicateDeclaration { name: name.clone() });
        }
        seen.push(name);
        table.add(name.clone());
    }
    let table = Arc::new(table);
    let ids =
        |names: &[String]| -> Vec<VarId> { names.iter().map(|n| table.lookup(n).unwrap()).collect() };
    let shared = ids(&shared_names);
    let phi_private = ids(&phi_names);
    let psi_private = ids(&psi_names);

    // second pass: formulas, restricted to each side's partition
    let mut phi_expr = None;
    let mut psi_expr = None;
    for (side, body) in formula_stmts {
        let (allowed, foreign) = if side == "phi" {
            (
                shared
                    .iter()
                    .chain(&phi_private)
                    .copied()
                    .collect::<Vec<_>>(),
                psi_names.clone(),
            )
        } else {
            (
                shared
                    .iter()
                    .chain(&psi_private)
                    .copied()
                    .collect::<Vec<_>>(),
                phi_names.clone(),
            )
        };
        let mut parser = Parser {
            toks: body,
            pos: 0,
            table: table.clone(),
            allowed: Some(allowed),
            foreign,
        };
        let expr = parser.parse_bexpr()?;
        if parser.pos != body.len() {
            return Err(parser.err("trailing input in formula"));
        }
        if side == "phi" {
            phi_expr = Some(expr);
        } else {
            psi_expr = Some(expr);
        }
    }
    let phi_expr = phi_expr.ok_or(ParseError::Missing {
        what: "phi definition",
    })?;
    let psi_expr = psi_expr.ok_or(ParseError::Missing {
        what: "psi definition",
    })?;
    if shared.is_empty() {
        return Err(ParseError::Missing {
            what: "shared variable declaration",
        });
    }

    let formula_of = |e: &BExpr| {
        Formula::new(
            to_dnf(e)
                .into_iter()
                .map(|atoms| Clause::new(atoms.into_iter().map(Atom::new).collect()))
                .collect(),
        )
    };
    let instance = ProblemInstance {
        table: table.clone(),
        shared,
        phi_private,
        psi_private,
        phi: formula_of(&phi_expr),
        psi: formula_of(&psi_expr),
    };
    Ok((instance, phi_expr, psi_expr))
}

/// Kind of multiplier attached to a generator: sum-of-squares for
/// inequalities, unconstrained for equalities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum MultKind {
    Sos,
    Free,
}

/// Which auxiliary generators to append when extending a clause.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExtensionMode {
    Polynomial,
    Semialgebraic,
}

/// Extend a homogenized clause with the auxiliary generators that restore
/// boundedness on the unit sphere.
///
/// The input atoms reappear unchanged (SOS-weighted) and are followed by:
/// the homogenizing variable `x0` (SOS); in semialgebraic mode the fresh
/// variable `w` (SOS); the unit-sphere equality `x0^2 + ||vars||^2 - 1`
/// (free), where `vars` are the shared plus side-private variables and, in
/// semialgebraic mode, `w`; and in semialgebraic mode the quadric
/// `x0^2 + ||shared||^2 - w^2` (free) tying `w` to the lifted norm.
pub fn clause_extension(
    clause: &Clause,
    mode: ExtensionMode,
    x0: VarId,
    w: Option<VarId>,
    shared: &[VarId],
    side_private: &[VarId],
) -> Vec<(Polynomial, MultKind)> {
    let table = clause.atoms[0].poly.table().clone();
    let nvars = table.len();
    let mut gens: Vec<(Polynomial, MultKind)> = clause
        .atoms
        .iter()
        .map(|a| (a.poly.clone(), MultKind::Sos))
        .collect();
    gens.push((Polynomial::variable(table.clone(), x0), MultKind::Sos));
    if mode == ExtensionMode::Semialgebraic {
        let w = w.expect("semialgebraic extension needs w");
        gens.push((Polynomial::variable(table.clone(), w), MultKind::Sos));
    }
    // unit sphere: x0^2 + sum of squares - 1
    let mut sphere = Polynomial::from_terms(
        table.clone(),
        [
            (Monomial::var(nvars, x0, 2), rat::one()),
            (Monomial::unit(nvars), -rat::one()),
        ],
    );
    for &v in shared.iter().chain(side_private) {
        sphere.add_term(Monomial::var(nvars, v, 2), rat::one());
    }
    if mode == ExtensionMode::Semialgebraic {
        let w = w.unwrap();
        sphere.add_term(Monomial::var(nvars, w, 2), rat::one());
        gens.push((sphere, MultKind::Free));
        // x0^2 + ||shared||^2 - w^2
        let mut quadric =
            Polynomial::from_terms(table.clone(), [(Monomial::var(nvars, x0, 2), rat::one())]);
        for &v in shared {
            quadric.add_term(Monomial::var(nvars, v, 2), rat::one());
        }
        quadric.add_term(Monomial::var(nvars, w, 2), -rat::one());
        gens.push((quadric, MultKind::Free));
    } else {
        gens.push((sphere, MultKind::Free));
    }
    gens
}
