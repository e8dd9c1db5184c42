//! Global predicates over the variable bindings exposed by a state.
//!
//! Text syntax is `id: EXPR` (the id is optional in predicate files). `EXPR`
//! is a boolean formula built from comparisons (`= != < <= > >=`, also
//! `≠ ≤ ≥`), arithmetic on numbers (`+ - *`, also `− ×`), connectives
//! `and`/`or`/`not`, parentheses, identifiers, decimal numbers, double-quoted
//! strings and `true`/`false`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::cut::State;
use crate::graph::{EdgeLabel, Scalar, VertexId};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("predicate syntax error at column {column}: {message}")]
pub struct ParseError {
    pub column: usize,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Lit(Scalar),
    Var(String),
    Neg(Box<Expr>),
    Arith(ArithOp, Box<Expr>, Box<Expr>),
    Cmp(CmpOp, Box<Expr>, Box<Expr>),
    Not(Box<Expr>),
    And(Box<Expr>, Box<Expr>),
    Or(Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn variables(&self) -> BTreeSet<&str> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars<'a>(&'a self, out: &mut BTreeSet<&'a str>) {
        match self {
            Expr::Lit(_) => {}
            Expr::Var(v) => {
                out.insert(v);
            }
            Expr::Neg(e) | Expr::Not(e) => e.collect_vars(out),
            Expr::Arith(_, a, b) | Expr::Cmp(_, a, b) | Expr::And(a, b) | Expr::Or(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
        }
    }
}

/// Result of checking a predicate against a state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    Violated,
    NotViolated,
    /// A referenced variable is unbound, or the expression is ill-typed.
    Unevaluable(String),
}

impl Outcome {
    pub fn is_violated(&self) -> bool {
        matches!(self, Outcome::Violated)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlobalPredicate {
    pub id: String,
    pub expr: Expr,
    source: String,
}

impl GlobalPredicate {
    pub fn new(id: impl Into<String>, expr_text: &str) -> Result<Self, ParseError> {
        Ok(GlobalPredicate {
            id: id.into(),
            expr: parse_expr(expr_text)?,
            source: expr_text.trim().to_string(),
        })
    }

    /// Parses `id: EXPR`, or a bare `EXPR` which takes `default_id`.
    pub fn parse_line(line: &str, default_id: &str) -> Result<Self, ParseError> {
        if let Some((head, tail)) = line.split_once(':') {
            let head = head.trim();
            if is_identifier(head) {
                return GlobalPredicate::new(head, tail);
            }
        }
        GlobalPredicate::new(default_id, line)
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn eval(&self, state: &State) -> Outcome {
        eval_predicate(self, state)
    }
}

impl fmt::Display for GlobalPredicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.id, self.source)
    }
}

impl FromStr for GlobalPredicate {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        GlobalPredicate::parse_line(s, "p0")
    }
}

/// Parses a predicate file: one predicate per line, blank lines and `#`
/// comments skipped. Unnamed predicates get `p<index>` by position.
pub fn parse_predicates(text: &str) -> Result<Vec<GlobalPredicate>, (usize, ParseError)> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let default_id = format!("p{}", out.len());
        out.push(GlobalPredicate::parse_line(trimmed, &default_id).map_err(|e| (lineno + 1, e))?);
    }
    Ok(out)
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Variable bindings from the data atoms of a state. When several atoms bind
/// the same variable the one whose edge source has the greatest vertex id
/// wins.
pub fn bindings(state: &State) -> BTreeMap<String, Scalar> {
    let mut chosen: BTreeMap<String, (VertexId, Scalar)> = BTreeMap::new();
    for atom in state.atoms() {
        if let EdgeLabel::Data { var, value } = &atom.label {
            let src = atom.edge_key.src;
            match chosen.get(var) {
                Some((prev, _)) if *prev > src => {}
                _ => {
                    chosen.insert(var.clone(), (src, value.clone()));
                }
            }
        }
    }
    chosen.into_iter().map(|(k, (_, v))| (k, v)).collect()
}

pub fn eval_predicate(p: &GlobalPredicate, state: &State) -> Outcome {
    eval_with_bindings(&p.expr, &bindings(state))
}

pub fn eval_with_bindings(expr: &Expr, env: &BTreeMap<String, Scalar>) -> Outcome {
    let unbound: Vec<&str> = expr
        .variables()
        .into_iter()
        .filter(|v| !env.contains_key(*v))
        .collect();
    if !unbound.is_empty() {
        return Outcome::Unevaluable(format!("unbound: {}", unbound.join(", ")));
    }
    match eval(expr, env) {
        Ok(Scalar::Bool(true)) => Outcome::NotViolated,
        Ok(Scalar::Bool(false)) => Outcome::Violated,
        Ok(other) => Outcome::Unevaluable(format!(
            "expression yields a {}, not a boolean",
            other.type_name()
        )),
        Err(msg) => Outcome::Unevaluable(msg),
    }
}

#[derive(Clone, Copy)]
enum Num {
    I(i64),
    F(f64),
}

impl Num {
    fn of(v: &Scalar) -> Option<Num> {
        match v {
            Scalar::Int(i) => Some(Num::I(*i)),
            Scalar::Float(x) => Some(Num::F(*x)),
            _ => None,
        }
    }

    fn as_f64(self) -> f64 {
        match self {
            Num::I(i) => i as f64,
            Num::F(x) => x,
        }
    }
}

fn eval(expr: &Expr, env: &BTreeMap<String, Scalar>) -> Result<Scalar, String> {
    match expr {
        Expr::Lit(v) => Ok(v.clone()),
        Expr::Var(name) => env.get(name).cloned().ok_or_else(|| format!("unbound: {name}")),
        Expr::Neg(e) => match eval(e, env)? {
            Scalar::Int(i) => i.checked_neg().map(Scalar::Int).ok_or_else(overflow),
            Scalar::Float(x) => Ok(Scalar::Float(-x)),
            other => Err(format!("cannot negate a {}", other.type_name())),
        },
        Expr::Arith(op, a, b) => {
            let (a, b) = (eval(a, env)?, eval(b, env)?);
            let (x, y) = match (Num::of(&a), Num::of(&b)) {
                (Some(x), Some(y)) => (x, y),
                _ => {
                    return Err(format!(
                        "arithmetic on {} and {}",
                        a.type_name(),
                        b.type_name()
                    ))
                }
            };
            match (x, y) {
                (Num::I(x), Num::I(y)) => match op {
                    ArithOp::Add => x.checked_add(y),
                    ArithOp::Sub => x.checked_sub(y),
                    ArithOp::Mul => x.checked_mul(y),
                }
                .map(Scalar::Int)
                .ok_or_else(overflow),
                _ => {
                    let (x, y) = (x.as_f64(), y.as_f64());
                    Ok(Scalar::Float(match op {
                        ArithOp::Add => x + y,
                        ArithOp::Sub => x - y,
                        ArithOp::Mul => x * y,
                    }))
                }
            }
        }
        Expr::Cmp(op, a, b) => {
            let (a, b) = (eval(a, env)?, eval(b, env)?);
            compare_scalars(*op, &a, &b).map(Scalar::Bool)
        }
        Expr::Not(e) => Ok(Scalar::Bool(!as_bool(&eval(e, env)?)?)),
        Expr::And(a, b) => {
            let (a, b) = (as_bool(&eval(a, env)?)?, as_bool(&eval(b, env)?)?);
            Ok(Scalar::Bool(a && b))
        }
        Expr::Or(a, b) => {
            let (a, b) = (as_bool(&eval(a, env)?)?, as_bool(&eval(b, env)?)?);
            Ok(Scalar::Bool(a || b))
        }
    }
}

fn overflow() -> String {
    "integer overflow".to_string()
}

fn as_bool(v: &Scalar) -> Result<bool, String> {
    match v {
        Scalar::Bool(b) => Ok(*b),
        other => Err(format!("expected a boolean, found a {}", other.type_name())),
    }
}

fn compare_scalars(op: CmpOp, a: &Scalar, b: &Scalar) -> Result<bool, String> {
    use std::cmp::Ordering;
    let ord: Ordering = match (a, b) {
        (Scalar::Str(x), Scalar::Str(y)) => x.cmp(y),
        (Scalar::Bool(x), Scalar::Bool(y)) => {
            return match op {
                CmpOp::Eq => Ok(x == y),
                CmpOp::Ne => Ok(x != y),
                _ => Err("ordering comparison on booleans".to_string()),
            }
        }
        _ => match (Num::of(a), Num::of(b)) {
            (Some(Num::I(x)), Some(Num::I(y))) => x.cmp(&y),
            (Some(x), Some(y)) => x
                .as_f64()
                .partial_cmp(&y.as_f64())
                .ok_or_else(|| "comparison with NaN".to_string())?,
            _ => {
                return Err(format!(
                    "cannot compare {} with {}",
                    a.type_name(),
                    b.type_name()
                ))
            }
        },
    };
    Ok(match op {
        CmpOp::Eq => ord.is_eq(),
        CmpOp::Ne => ord.is_ne(),
        CmpOp::Lt => ord.is_lt(),
        CmpOp::Le => ord.is_le(),
        CmpOp::Gt => ord.is_gt(),
        CmpOp::Ge => ord.is_ge(),
    })
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Lit(Scalar),
    And,
    Or,
    Not,
    Cmp(CmpOp),
    Plus,
    Minus,
    Star,
    LParen,
    RParen,
}

fn lex(src: &str) -> Result<Vec<(usize, Tok)>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let err = |column: usize, message: String| ParseError { column, message };
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let col = i + 1;
        let next = chars.get(i + 1).copied();
        match c {
            _ if c.is_whitespace() => i += 1,
            '(' => {
                out.push((col, Tok::LParen));
                i += 1;
            }
            ')' => {
                out.push((col, Tok::RParen));
                i += 1;
            }
            '+' => {
                out.push((col, Tok::Plus));
                i += 1;
            }
            '-' | '−' => {
                out.push((col, Tok::Minus));
                i += 1;
            }
            '*' | '×' => {
                out.push((col, Tok::Star));
                i += 1;
            }
            '≠' => {
                out.push((col, Tok::Cmp(CmpOp::Ne)));
                i += 1;
            }
            '≤' => {
                out.push((col, Tok::Cmp(CmpOp::Le)));
                i += 1;
            }
            '≥' => {
                out.push((col, Tok::Cmp(CmpOp::Ge)));
                i += 1;
            }
            '=' => {
                out.push((col, Tok::Cmp(CmpOp::Eq)));
                i += if next == Some('=') { 2 } else { 1 };
            }
            '!' if next == Some('=') => {
                out.push((col, Tok::Cmp(CmpOp::Ne)));
                i += 2;
            }
            '!' => {
                out.push((col, Tok::Not));
                i += 1;
            }
            '<' if next == Some('=') => {
                out.push((col, Tok::Cmp(CmpOp::Le)));
                i += 2;
            }
            '<' if next == Some('>') => {
                out.push((col, Tok::Cmp(CmpOp::Ne)));
                i += 2;
            }
            '<' => {
                out.push((col, Tok::Cmp(CmpOp::Lt)));
                i += 1;
            }
            '>' if next == Some('=') => {
                out.push((col, Tok::Cmp(CmpOp::Ge)));
                i += 2;
            }
            '>' => {
                out.push((col, Tok::Cmp(CmpOp::Gt)));
                i += 1;
            }
            '&' if next == Some('&') => {
                out.push((col, Tok::And));
                i += 2;
            }
            '|' if next == Some('|') => {
                out.push((col, Tok::Or));
                i += 2;
            }
            '"' => {
                let mut s = String::new();
                i += 1;
                loop {
                    match chars.get(i) {
                        None => return Err(err(col, "unterminated string literal".into())),
                        Some('"') => {
                            i += 1;
                            break;
                        }
                        Some('\\') => {
                            match chars.get(i + 1) {
                                Some('n') => s.push('\n'),
                                Some('t') => s.push('\t'),
                                Some(&other) => s.push(other),
                                None => {
                                    return Err(err(col, "unterminated string literal".into()))
                                }
                            }
                            i += 2;
                        }
                        Some(&ch) => {
                            s.push(ch);
                            i += 1;
                        }
                    }
                }
                out.push((col, Tok::Lit(Scalar::Str(s))));
            }
            _ if c.is_ascii_digit() => {
                let start = i;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                let mut is_float = false;
                if i + 1 < chars.len() && chars[i] == '.' && chars[i + 1].is_ascii_digit() {
                    is_float = true;
                    i += 1;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
                let text: String = chars[start..i].iter().collect();
                let lit = if is_float {
                    Scalar::Float(text.parse().map_err(|_| err(col, "bad number".into()))?)
                } else {
                    Scalar::Int(
                        text.parse()
                            .map_err(|_| err(col, format!("integer literal {text} out of range")))?,
                    )
                };
                out.push((col, Tok::Lit(lit)));
            }
            _ if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                let word: String = chars[start..i].iter().collect();
                let tok = match word.as_str() {
                    "and" => Tok::And,
                    "or" => Tok::Or,
                    "not" => Tok::Not,
                    "true" => Tok::Lit(Scalar::Bool(true)),
                    "false" => Tok::Lit(Scalar::Bool(false)),
                    _ => Tok::Ident(word),
                };
                out.push((col, tok));
            }
            other => return Err(err(col, format!("unexpected character `{other}`"))),
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    end_col: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn column(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end_col, |(c, _)| *c)
    }

    fn fail<T>(&self, message: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError {
            column: self.column(),
            message: message.into(),
        })
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == Some(tok) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn disjunction(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.conjunction()?;
        while self.eat(&Tok::Or) {
            lhs = Expr::Or(Box::new(lhs), Box::new(self.conjunction()?));
        }
        Ok(lhs)
    }

    fn conjunction(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.negation()?;
        while self.eat(&Tok::And) {
            lhs = Expr::And(Box::new(lhs), Box::new(self.negation()?));
        }
        Ok(lhs)
    }

    fn negation(&mut self) -> Result<Expr, ParseError> {
        if self.eat(&Tok::Not) {
            return Ok(Expr::Not(Box::new(self.negation()?)));
        }
        self.comparison()
    }

    fn comparison(&mut self) -> Result<Expr, ParseError> {
        let lhs = self.sum()?;
        if let Some(Tok::Cmp(op)) = self.peek().cloned() {
            self.pos += 1;
            let rhs = self.sum()?;
            if matches!(self.peek(), Some(Tok::Cmp(_))) {
                return self.fail("comparisons cannot be chained");
            }
            return Ok(Expr::Cmp(op, Box::new(lhs), Box::new(rhs)));
        }
        Ok(lhs)
    }

    fn sum(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.product()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Plus) => ArithOp::Add,
                Some(Tok::Minus) => ArithOp::Sub,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            lhs = Expr::Arith(op, Box::new(lhs), Box::new(self.product()?));
        }
    }

    fn product(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        while self.eat(&Tok::Star) {
            lhs = Expr::Arith(ArithOp::Mul, Box::new(lhs), Box::new(self.unary()?));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.eat(&Tok::Minus) {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        match self.peek().cloned() {
            Some(Tok::Lit(v)) => {
                self.pos += 1;
                Ok(Expr::Lit(v))
            }
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                Ok(Expr::Var(name))
            }
            Some(Tok::LParen) => {
                self.pos += 1;
                let inner = self.disjunction()?;
                if !self.eat(&Tok::RParen) {
                    return self.fail("expected `)`");
                }
                Ok(inner)
            }
            Some(tok) => self.fail(format!("unexpected token {tok:?}")),
            None => self.fail("unexpected end of expression"),
        }
    }
}

pub fn parse_expr(src: &str) -> Result<Expr, ParseError> {
    let toks = lex(src)?;
    let mut parser = Parser {
        toks,
        pos: 0,
        end_col: src.chars().count() + 1,
    };
    let expr = parser.disjunction()?;
    if parser.pos != parser.toks.len() {
        return parser.fail("trailing input");
    }
    Ok(expr)
}
