//! Signatures, the variable-free fluted formula AST, its concrete grammar and printer.
//!
//! A formula is read against a context of `d` variables `x1..xd`. An atom of
//! arity `k` reads the last `k` variables of the context, and every quantifier
//! binds the next variable `x(d+1)`. Equality (`=`) reads the last two
//! variables; `That` is the diagonal of the distinguished transitive relation.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Index of a predicate inside its [`Signature`].
pub type PredId = usize;

/// Name of the built-in equality predicate.
pub const EQUALITY: &str = "=";
/// Name of the diagonal predicate of the distinguished transitive relation.
pub const THAT: &str = "That";

/// Kind of a predicate symbol.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredKind {
    Ordinary,
    Transitive,
    Equality,
    THat,
}

/// A predicate symbol.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Predicate {
    pub name: String,
    pub arity: usize,
    pub kind: PredKind,
}

impl Predicate {
    /// True for predicates whose extension is stored rather than derived.
    pub fn is_stored(&self) -> bool {
        matches!(self.kind, PredKind::Ordinary | PredKind::Transitive)
    }
}

/// Errors raised while building a signature.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SignatureError {
    #[error("predicate `{0}` declared twice")]
    DuplicateName(String),
    #[error("predicate `{name}` has invalid arity {arity}")]
    BadArity { name: String, arity: usize },
    #[error("`That` requires a distinguished transitive relation")]
    NoTransitive,
    #[error("invalid predicate name `{0}`")]
    BadName(String),
}

/// A purely relational signature.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Signature {
    preds: Vec<Predicate>,
    by_name: HashMap<String, PredId>,
}

fn valid_ident(name: &str) -> bool {
    let mut chars = name.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
        && !matches!(name, "forall" | "exists" | "true" | "false" | "sig" | "trans" | "eq")
}

impl Signature {
    /// Empty signature.
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&mut self, p: Predicate) -> Result<PredId, SignatureError> {
        if self.by_name.contains_key(&p.name) {
            return Err(SignatureError::DuplicateName(p.name));
        }
        let id = self.preds.len();
        self.by_name.insert(p.name.clone(), id);
        self.preds.push(p);
        Ok(id)
    }

    /// Declares an ordinary predicate.
    pub fn add_ordinary(&mut self, name: &str, arity: usize) -> Result<PredId, SignatureError> {
        if !valid_ident(name) || name == THAT {
            return Err(SignatureError::BadName(name.to_string()));
        }
        if arity == 0 {
            return Err(SignatureError::BadArity { name: name.to_string(), arity });
        }
        self.push(Predicate { name: name.to_string(), arity, kind: PredKind::Ordinary })
    }

    /// Declares a distinguished transitive relation.
    pub fn add_transitive(&mut self, name: &str) -> Result<PredId, SignatureError> {
        if !valid_ident(name) || name == THAT {
            return Err(SignatureError::BadName(name.to_string()));
        }
        self.push(Predicate { name: name.to_string(), arity: 2, kind: PredKind::Transitive })
    }

    /// Enables equality; idempotent.
    pub fn enable_equality(&mut self) -> PredId {
        match self.equality() {
            Some(id) => id,
            None => self
                .push(Predicate { name: EQUALITY.into(), arity: 2, kind: PredKind::Equality })
                .expect("fresh equality"),
        }
    }

    /// Enables `That`, the diagonal of the first transitive relation; idempotent.
    pub fn enable_that(&mut self) -> Result<PredId, SignatureError> {
        if let Some(id) = self.that() {
            return Ok(id);
        }
        if self.distinguished().is_none() {
            return Err(SignatureError::NoTransitive);
        }
        self.push(Predicate { name: THAT.into(), arity: 1, kind: PredKind::THat })
    }

    /// Declares a fresh ordinary predicate whose name starts with `base`.
    pub fn add_fresh(&mut self, base: &str, arity: usize) -> PredId {
        let name = self.fresh_name(base);
        self.add_ordinary(&name, arity).expect("fresh name is unused")
    }

    /// `base` itself if unused, otherwise `base_k` for the least unused `k`.
    pub fn fresh_name(&self, base: &str) -> String {
        if !self.by_name.contains_key(base) && valid_ident(base) {
            return base.to_string();
        }
        (1..)
            .map(|k| format!("{base}_{k}"))
            .find(|n| !self.by_name.contains_key(n))
            .expect("unbounded supply")
    }

    pub fn lookup(&self, name: &str) -> Option<PredId> {
        self.by_name.get(name).copied()
    }

    pub fn pred(&self, id: PredId) -> &Predicate {
        &self.preds[id]
    }

    pub fn preds(&self) -> &[Predicate] {
        &self.preds
    }

    pub fn len(&self) -> usize {
        self.preds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.preds.is_empty()
    }

    pub fn name(&self, id: PredId) -> &str {
        &self.preds[id].name
    }

    pub fn arity(&self, id: PredId) -> usize {
        self.preds[id].arity
    }

    pub fn kind(&self, id: PredId) -> PredKind {
        self.preds[id].kind
    }

    pub fn equality(&self) -> Option<PredId> {
        self.preds.iter().position(|p| p.kind == PredKind::Equality)
    }

    pub fn that(&self) -> Option<PredId> {
        self.preds.iter().position(|p| p.kind == PredKind::THat)
    }

    /// All distinguished transitive relations, in declaration order.
    pub fn transitive(&self) -> Vec<PredId> {
        self.ids_of(PredKind::Transitive)
    }

    /// The first transitive relation; `That` is its diagonal.
    pub fn distinguished(&self) -> Option<PredId> {
        self.preds.iter().position(|p| p.kind == PredKind::Transitive)
    }

    pub fn ids_of(&self, kind: PredKind) -> Vec<PredId> {
        (0..self.preds.len()).filter(|&i| self.preds[i].kind == kind).collect()
    }

    /// Predicates of arity at most `m` (equality only when `m >= 2`), in id order.
    pub fn eligible(&self, m: usize) -> Vec<PredId> {
        (0..self.preds.len()).filter(|&i| self.preds[i].arity <= m).collect()
    }

    /// Unary predicates including `That`.
    pub fn unary(&self) -> Vec<PredId> {
        (0..self.preds.len()).filter(|&i| self.preds[i].arity == 1).collect()
    }

    /// Largest arity of any predicate.
    pub fn max_arity(&self) -> usize {
        self.preds.iter().map(|p| p.arity).max().unwrap_or(0)
    }

    /// Header line in the formula file format.
    pub fn header(&self) -> String {
        let ord: Vec<String> = self
            .preds
            .iter()
            .filter(|p| p.kind == PredKind::Ordinary)
            .map(|p| format!("{}/{}", p.name, p.arity))
            .collect();
        let tr: Vec<&str> = self
            .preds
            .iter()
            .filter(|p| p.kind == PredKind::Transitive)
            .map(|p| p.name.as_str())
            .collect();
        let mut s = format!("sig {{ {} }}", ord.join(", "));
        if !tr.is_empty() {
            s.push_str(&format!(" trans {{ {} }}", tr.join(", ")));
        }
        if self.equality().is_some() {
            s.push_str(" eq");
        }
        if self.that().is_some() && tr.len() > 1 {
            s.push_str(" that");
        }
        s
    }

    /// Copy of the signature keeping only predicates accepted by `keep`,
    /// together with the map from old to new ids.
    pub fn restrict(&self, keep: impl Fn(&Predicate) -> bool) -> (Signature, Vec<Option<PredId>>) {
        let mut out = Signature::new();
        let mut map = vec![None; self.preds.len()];
        for (i, p) in self.preds.iter().enumerate() {
            if keep(p) {
                map[i] = Some(out.push(p.clone()).expect("names stay unique"));
            }
        }
        (out, map)
    }
}

/// Variable-free fluted formula.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Formula {
    True,
    False,
    Atom(PredId),
    Not(Box<Formula>),
    And(Vec<Formula>),
    Or(Vec<Formula>),
    /// Exactly one of the operands holds.
    Xor(Vec<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    Forall(Box<Formula>),
    Exists(Box<Formula>),
}

impl Formula {
    pub fn atom(p: PredId) -> Self {
        Formula::Atom(p)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(f: Formula) -> Self {
        Formula::Not(Box::new(f))
    }

    pub fn implies(a: Formula, b: Formula) -> Self {
        Formula::Implies(Box::new(a), Box::new(b))
    }

    pub fn forall(f: Formula) -> Self {
        Formula::Forall(Box::new(f))
    }

    pub fn exists(f: Formula) -> Self {
        Formula::Exists(Box::new(f))
    }

    /// `k` nested universal quantifiers.
    pub fn forall_n(k: usize, f: Formula) -> Self {
        (0..k).fold(f, |acc, _| Formula::forall(acc))
    }

    /// Conjunction that collapses the empty and singleton cases.
    pub fn and(mut fs: Vec<Formula>) -> Self {
        match fs.len() {
            0 => Formula::True,
            1 => fs.pop().expect("one element"),
            _ => Formula::And(fs),
        }
    }

    /// Disjunction that collapses the empty and singleton cases.
    pub fn or(mut fs: Vec<Formula>) -> Self {
        match fs.len() {
            0 => Formula::False,
            1 => fs.pop().expect("one element"),
            _ => Formula::Or(fs),
        }
    }

    /// Literal: the atom or its negation.
    pub fn lit(p: PredId, positive: bool) -> Self {
        if positive {
            Formula::Atom(p)
        } else {
            Formula::not(Formula::Atom(p))
        }
    }

    pub fn is_quantifier_free(&self) -> bool {
        match self {
            Formula::True | Formula::False | Formula::Atom(_) => true,
            Formula::Not(g) => g.is_quantifier_free(),
            Formula::And(v) | Formula::Or(v) | Formula::Xor(v) => {
                v.iter().all(Formula::is_quantifier_free)
            }
            Formula::Implies(a, b) => a.is_quantifier_free() && b.is_quantifier_free(),
            Formula::Forall(_) | Formula::Exists(_) => false,
        }
    }

    /// Predicates occurring in the formula.
    pub fn preds(&self, out: &mut Vec<PredId>) {
        match self {
            Formula::True | Formula::False => {}
            Formula::Atom(p) => {
                if !out.contains(p) {
                    out.push(*p)
                }
            }
            Formula::Not(g) | Formula::Forall(g) | Formula::Exists(g) => g.preds(out),
            Formula::And(v) | Formula::Or(v) | Formula::Xor(v) => v.iter().for_each(|g| g.preds(out)),
            Formula::Implies(a, b) => {
                a.preds(out);
                b.preds(out)
            }
        }
    }

    /// Kleene evaluation of a quantifier-free formula under a partial valuation.
    /// Returns `None` when the value is undetermined.
    pub fn eval_prop(&self, val: &mut impl FnMut(PredId) -> Option<bool>) -> Option<bool> {
        match self {
            Formula::True => Some(true),
            Formula::False => Some(false),
            Formula::Atom(p) => val(*p),
            Formula::Not(g) => g.eval_prop(val).map(|b| !b),
            Formula::And(v) => {
                let mut unknown = false;
                for g in v {
                    match g.eval_prop(val) {
                        Some(false) => return Some(false),
                        None => unknown = true,
                        Some(true) => {}
                    }
                }
                if unknown {
                    None
                } else {
                    Some(true)
                }
            }
            Formula::Or(v) => {
                let mut unknown = false;
                for g in v {
                    match g.eval_prop(val) {
                        Some(true) => return Some(true),
                        None => unknown = true,
                        Some(false) => {}
                    }
                }
                if unknown {
                    None
                } else {
                    Some(false)
                }
            }
            Formula::Xor(v) => {
                let (mut t, mut u) = (0usize, 0usize);
                for g in v {
                    match g.eval_prop(val) {
                        Some(true) => t += 1,
                        None => u += 1,
                        Some(false) => {}
                    }
                }
                if t > 1 {
                    Some(false)
                } else if u == 0 {
                    Some(t == 1)
                } else {
                    None
                }
            }
            Formula::Implies(a, b) => match (a.eval_prop(val), b.eval_prop(val)) {
                (Some(false), _) | (_, Some(true)) => Some(true),
                (Some(true), Some(false)) => Some(false),
                _ => None,
            },
            Formula::Forall(_) | Formula::Exists(_) => {
                panic!("eval_prop called on a quantified formula")
            }
        }
    }

    /// Renders the formula in the concrete grammar.
    pub fn display<'a>(&'a self, sig: &'a Signature) -> FormulaDisplay<'a> {
        FormulaDisplay { f: self, sig }
    }

    /// Replaces every atom by the formula returned from `sub`.
    pub fn substitute(&self, sub: &impl Fn(PredId) -> Formula) -> Formula {
        match self {
            Formula::True => Formula::True,
            Formula::False => Formula::False,
            Formula::Atom(p) => sub(*p),
            Formula::Not(g) => Formula::not(g.substitute(sub)),
            Formula::And(v) => Formula::And(v.iter().map(|g| g.substitute(sub)).collect()),
            Formula::Or(v) => Formula::Or(v.iter().map(|g| g.substitute(sub)).collect()),
            Formula::Xor(v) => Formula::Xor(v.iter().map(|g| g.substitute(sub)).collect()),
            Formula::Implies(a, b) => Formula::implies(a.substitute(sub), b.substitute(sub)),
            Formula::Forall(g) => Formula::forall(g.substitute(sub)),
            Formula::Exists(g) => Formula::exists(g.substitute(sub)),
        }
    }

    /// Maps predicate ids, e.g. after moving a formula to a larger signature.
    pub fn remap(&self, map: &impl Fn(PredId) -> PredId) -> Formula {
        self.substitute(&|p| Formula::Atom(map(p)))
    }

    /// Top-level conjuncts, flattening nested conjunctions.
    pub fn conjuncts(&self) -> Vec<&Formula> {
        match self {
            Formula::And(v) => v.iter().flat_map(|g| g.conjuncts()).collect(),
            Formula::True => vec![],
            f => vec![f],
        }
    }
}

/// Helper returned by [`Formula::display`].
pub struct FormulaDisplay<'a> {
    f: &'a Formula,
    sig: &'a Signature,
}

impl fmt::Display for FormulaDisplay<'_> {
    fn fmt(&self, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_formula(out, self.f, self.sig)
    }
}

fn write_nary(out: &mut fmt::Formatter<'_>, v: &[Formula], op: &str, empty: &str, sig: &Signature) -> fmt::Result {
    match v {
        [] => out.write_str(empty),
        [g] => write_formula(out, g, sig),
        _ => {
            out.write_str("(")?;
            for (k, g) in v.iter().enumerate() {
                if k > 0 {
                    write!(out, " {op} ")?;
                }
                write_formula(out, g, sig)?;
            }
            out.write_str(")")
        }
    }
}

fn write_formula(out: &mut fmt::Formatter<'_>, f: &Formula, sig: &Signature) -> fmt::Result {
    match f {
        Formula::True => out.write_str("true"),
        Formula::False => out.write_str("false"),
        Formula::Atom(p) => out.write_str(sig.name(*p)),
        Formula::Not(g) => {
            out.write_str("!")?;
            write_formula(out, g, sig)
        }
        Formula::And(v) => write_nary(out, v, "&", "true", sig),
        Formula::Or(v) => write_nary(out, v, "|", "false", sig),
        Formula::Xor(v) => write_nary(out, v, "^", "false", sig),
        Formula::Implies(a, b) => {
            out.write_str("(")?;
            write_formula(out, a, sig)?;
            out.write_str(" -> ")?;
            write_formula(out, b, sig)?;
            out.write_str(")")
        }
        Formula::Forall(g) => {
            out.write_str("forall ")?;
            write_formula(out, g, sig)
        }
        Formula::Exists(g) => {
            out.write_str("exists ")?;
            write_formula(out, g, sig)
        }
    }
}

/// Renders `f` in the concrete grammar.
pub fn print(f: &Formula, sig: &Signature) -> String {
    f.display(sig).to_string()
}

/// Renders a formula file: the signature header followed by the sentence.
pub fn print_file(f: &Formula, sig: &Signature) -> String {
    format!("{}\n{}\n", sig.header(), print(f, sig))
}

/// Parse failures.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseError {
    #[error("syntax error at {line}:{col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("unknown predicate `{name}` at {line}:{col}")]
    UnknownPredicate { name: String, line: usize, col: usize },
    #[error(transparent)]
    Signature(#[from] SignatureError),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) enum Tok {
    Ident(String),
    Num(usize),
    Sym(&'static str),
}

#[derive(Clone, Debug)]
pub(crate) struct Token {
    pub tok: Tok,
    pub line: usize,
    pub col: usize,
}

pub(crate) fn tokenize(text: &str) -> Result<Vec<Token>, ParseError> {
    const SYMS: [&str; 14] = ["->", "(", ")", "{", "}", ",", "/", "!", "&", "|", "^", "=", "+", "-"];
    let mut toks = Vec::new();
    let (mut line, mut col) = (1usize, 1usize);
    let chars: Vec<char> = text.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c == '\n' {
            line += 1;
            col = 1;
            i += 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '#' {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let start_col = col;
        if c.is_ascii_alphabetic() || c == '_' {
            let mut s = String::new();
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                s.push(chars[i]);
                i += 1;
                col += 1;
            }
            toks.push(Token { tok: Tok::Ident(s), line, col: start_col });
            continue;
        }
        if c.is_ascii_digit() {
            let mut n = 0usize;
            while i < chars.len() && chars[i].is_ascii_digit() {
                n = n.saturating_mul(10).saturating_add(chars[i] as usize - '0' as usize);
                i += 1;
                col += 1;
            }
            toks.push(Token { tok: Tok::Num(n), line, col: start_col });
            continue;
        }
        let rest: String = chars[i..chars.len().min(i + 2)].iter().collect();
        match SYMS.iter().find(|s| rest.starts_with(**s)) {
            Some(s) => {
                toks.push(Token { tok: Tok::Sym(s), line, col: start_col });
                i += s.len();
                col += s.len();
            }
            None => {
                return Err(ParseError::Syntax { line, col, msg: format!("unexpected character `{c}`") })
            }
        }
    }
    Ok(toks)
}

/// Recursive-descent parser over a token stream.
pub(crate) struct Parser<'a> {
    pub toks: Vec<Token>,
    pub pos: usize,
    pub sig: &'a Signature,
}

impl<'a> Parser<'a> {
    pub fn new(toks: Vec<Token>, sig: &'a Signature) -> Self {
        Parser { toks, pos: 0, sig }
    }

    pub fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    pub fn at_end(&self) -> bool {
        self.pos >= self.toks.len()
    }

    pub fn err(&self, msg: impl Into<String>) -> ParseError {
        let (line, col) = match self.toks.get(self.pos).or(self.toks.last()) {
            Some(t) => (t.line, t.col),
            None => (1, 1),
        };
        ParseError::Syntax { line, col, msg: msg.into() }
    }

    pub fn expect_sym(&mut self, s: &str) -> Result<(), ParseError> {
        match self.peek() {
            Some(Tok::Sym(t)) if *t == s => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(self.err(format!("expected `{s}`"))),
        }
    }

    pub fn eat_sym(&mut self, s: &str) -> bool {
        if matches!(self.peek(), Some(Tok::Sym(t)) if *t == s) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    pub fn ident(&mut self) -> Result<String, ParseError> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => Err(self.err("expected identifier")),
        }
    }

    pub fn pred_name(&mut self) -> Result<PredId, ParseError> {
        let tok = self.toks.get(self.pos).cloned();
        let name = if self.eat_sym("=") { EQUALITY.to_string() } else { self.ident()? };
        self.sig.lookup(&name).ok_or_else(|| {
            let (line, col) = tok.map(|t| (t.line, t.col)).unwrap_or((1, 1));
            ParseError::UnknownPredicate { name, line, col }
        })
    }

    pub fn formula(&mut self) -> Result<Formula, ParseError> {
        match self.peek().cloned() {
            Some(Tok::Ident(s)) => match s.as_str() {
                "true" => {
                    self.pos += 1;
                    Ok(Formula::True)
                }
                "false" => {
                    self.pos += 1;
                    Ok(Formula::False)
                }
                "forall" => {
                    self.pos += 1;
                    Ok(Formula::forall(self.formula()?))
                }
                "exists" => {
                    self.pos += 1;
                    Ok(Formula::exists(self.formula()?))
                }
                _ => Ok(Formula::Atom(self.pred_name()?)),
            },
            Some(Tok::Sym("=")) => Ok(Formula::Atom(self.pred_name()?)),
            Some(Tok::Sym("!")) => {
                self.pos += 1;
                Ok(Formula::not(self.formula()?))
            }
            Some(Tok::Sym("(")) => {
                self.pos += 1;
                let first = self.formula()?;
                let op = match self.peek() {
                    Some(Tok::Sym(s)) if matches!(*s, "->" | "&" | "|" | "^") => *s,
                    Some(Tok::Sym(")")) => {
                        self.pos += 1;
                        return Ok(first);
                    }
                    _ => return Err(self.err("expected `->`, `&`, `|`, `^` or `)`")),
                };
                let mut items = vec![first];
                while self.eat_sym(op) {
                    items.push(self.formula()?);
                }
                self.expect_sym(")")?;
                Ok(match op {
                    "->" => {
                        if items.len() != 2 {
                            return Err(self.err("`->` takes exactly two operands"));
                        }
                        let b = items.pop().expect("two");
                        let a = items.pop().expect("two");
                        Formula::implies(a, b)
                    }
                    "&" => Formula::And(items),
                    "|" => Formula::Or(items),
                    _ => Formula::Xor(items),
                })
            }
            _ => Err(self.err("expected a formula")),
        }
    }

    /// Parses `sig { p/1, r/2 } trans { T } eq that`; every part is optional.
    pub fn header(&mut self) -> Result<Signature, ParseError> {
        let mut sig = Signature::new();
        let mut explicit_that = false;
        loop {
            match self.peek() {
                Some(Tok::Ident(s)) if s == "sig" => {
                    self.pos += 1;
                    self.expect_sym("{")?;
                    if !self.eat_sym("}") {
                        loop {
                            let name = self.ident()?;
                            self.expect_sym("/")?;
                            let arity = match self.peek() {
                                Some(Tok::Num(n)) => *n,
                                _ => return Err(self.err("expected arity")),
                            };
                            self.pos += 1;
                            sig.add_ordinary(&name, arity)?;
                            if self.eat_sym("}") {
                                break;
                            }
                            self.expect_sym(",")?;
                        }
                    }
                }
                Some(Tok::Ident(s)) if s == "trans" => {
                    self.pos += 1;
                    self.expect_sym("{")?;
                    if !self.eat_sym("}") {
                        loop {
                            let name = self.ident()?;
                            sig.add_transitive(&name)?;
                            if self.eat_sym("}") {
                                break;
                            }
                            self.expect_sym(",")?;
                        }
                    }
                }
                Some(Tok::Ident(s)) if s == "eq" => {
                    self.pos += 1;
                    sig.enable_equality();
                }
                Some(Tok::Ident(s)) if s == "that" => {
                    self.pos += 1;
                    explicit_that = true;
                }
                _ => break,
            }
        }
        if explicit_that || sig.transitive().len() == 1 {
            sig.enable_that()?;
        }
        Ok(sig)
    }
}

/// Parses a formula over `sig`.
pub fn parse(text: &str, sig: &Signature) -> Result<Formula, ParseError> {
    let mut p = Parser::new(tokenize(text)?, sig);
    let f = p.formula()?;
    if !p.at_end() {
        return Err(p.err("trailing input"));
    }
    Ok(f)
}

/// Parses a signature header on its own.
pub fn parse_header(text: &str) -> Result<Signature, ParseError> {
    let empty = Signature::new();
    let mut p = Parser::new(tokenize(text)?, &empty);
    let sig = p.header()?;
    if !p.at_end() {
        return Err(p.err("trailing input"));
    }
    Ok(sig)
}

/// Parses a formula file: an optional header followed by one sentence.
///
/// `That` is added automatically when exactly one transitive relation is
/// declared, or when the header carries the `that` keyword.
pub fn parse_file(text: &str) -> Result<(Signature, Formula), ParseError> {
    let toks = tokenize(text)?;
    let empty = Signature::new();
    let mut hp = Parser::new(toks.clone(), &empty);
    let sig = hp.header()?;
    let pos = hp.pos;
    let mut p = Parser::new(toks, &sig);
    p.pos = pos;
    let f = p.formula()?;
    if !p.at_end() {
        return Err(p.err("trailing input"));
    }
    Ok((sig, f))
}

/// Result of [`validate`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Validation {
    pub quantifier_depth: usize,
    pub max_arity: usize,
    pub variable_bound: usize,
}

/// Validation failures.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ValidationError {
    #[error("atom `{atom}` of arity {arity} exceeds context depth {depth}")]
    ArityExceedsContext { atom: String, arity: usize, depth: usize },
}

/// Checks that every atom fits its context when `free_prefix` variables are free.
pub fn validate(sig: &Signature, f: &Formula, free_prefix: usize) -> Result<Validation, ValidationError> {
    fn go(sig: &Signature, f: &Formula, d: usize, qd: &mut usize, ma: &mut usize, base: usize) -> Result<(), ValidationError> {
        match f {
            Formula::True | Formula::False => Ok(()),
            Formula::Atom(p) => {
                let a = sig.arity(*p);
                if a > d {
                    return Err(ValidationError::ArityExceedsContext {
                        atom: sig.name(*p).to_string(),
                        arity: a,
                        depth: d,
                    });
                }
                *ma = (*ma).max(a);
                Ok(())
            }
            Formula::Not(g) => go(sig, g, d, qd, ma, base),
            Formula::And(v) | Formula::Or(v) | Formula::Xor(v) => {
                v.iter().try_for_each(|g| go(sig, g, d, qd, ma, base))
            }
            Formula::Implies(a, b) => {
                go(sig, a, d, qd, ma, base)?;
                go(sig, b, d, qd, ma, base)
            }
            Formula::Forall(g) | Formula::Exists(g) => {
                *qd = (*qd).max(d + 1 - base);
                go(sig, g, d + 1, qd, ma, base)
            }
        }
    }
    let (mut qd, mut ma) = (0, 0);
    go(sig, f, free_prefix, &mut qd, &mut ma, free_prefix)?;
    Ok(Validation { quantifier_depth: qd, max_arity: ma, variable_bound: free_prefix + qd })
}

/// Classical rendering with variables `x1, x2, ...`; the first `start` are free.
pub fn render_with_variables(sig: &Signature, f: &Formula, start: usize) -> Result<String, ValidationError> {
    validate(sig, f, start)?;
    fn go(sig: &Signature, f: &Formula, d: usize, out: &mut String) {
        match f {
            Formula::True => out.push_str("true"),
            Formula::False => out.push_str("false"),
            Formula::Atom(p) => {
                let pr = sig.pred(*p);
                if pr.kind == PredKind::Equality {
                    out.push_str(&format!("x{} = x{}", d - 1, d));
                } else {
                    let args: Vec<String> = (d + 1 - pr.arity..=d).map(|i| format!("x{i}")).collect();
                    out.push_str(&format!("{}({})", pr.name, args.join(",")));
                }
            }
            Formula::Not(g) => {
                out.push('!');
                let paren = matches!(**g, Formula::Atom(p) if sig.kind(p) == PredKind::Equality);
                if paren {
                    out.push('(');
                }
                go(sig, g, d, out);
                if paren {
                    out.push(')');
                }
            }
            Formula::And(v) | Formula::Or(v) | Formula::Xor(v) => {
                let (op, empty) = match f {
                    Formula::And(_) => ("&", "true"),
                    Formula::Or(_) => ("|", "false"),
                    _ => ("^", "false"),
                };
                if v.is_empty() {
                    out.push_str(empty);
                    return;
                }
                out.push('(');
                for (k, g) in v.iter().enumerate() {
                    if k > 0 {
                        out.push_str(&format!(" {op} "));
                    }
                    go(sig, g, d, out);
                }
                out.push(')');
            }
            Formula::Implies(a, b) => {
                out.push('(');
                go(sig, a, d, out);
                out.push_str(" -> ");
                go(sig, b, d, out);
                out.push(')');
            }
            Formula::Forall(g) | Formula::Exists(g) => {
                let q = if matches!(f, Formula::Forall(_)) { "forall" } else { "exists" };
                out.push_str(&format!("{q} x{} ", d + 1));
                go(sig, g, d + 1, out);
            }
        }
    }
    let mut out = String::new();
    go(sig, f, start, &mut out);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn admires_sig() -> Signature {
        parse_header("sig { student/1, prof/1, admires/2 }").unwrap()
    }

    #[test]
    fn parses_student_example() {
        let sig = admires_sig();
        let f = parse("forall (student -> !forall (prof -> admires))", &sig).unwrap();
        let (s, p, a) = (sig.lookup("student").unwrap(), sig.lookup("prof").unwrap(), sig.lookup("admires").unwrap());
        let expected = Formula::forall(Formula::implies(
            Formula::Atom(s),
            Formula::not(Formula::forall(Formula::implies(Formula::Atom(p), Formula::Atom(a)))),
        ));
        assert_eq!(f, expected);
        let v = validate(&sig, &f, 0).unwrap();
        assert_eq!(v, Validation { quantifier_depth: 2, max_arity: 2, variable_bound: 2 });
    }

    #[test]
    fn intro_three_place_example() {
        let sig = parse_header("sig { student/1, prof/1, course/1, intro/3 }").unwrap();
        let f = parse("forall (student -> forall (prof -> exists (course & intro)))", &sig).unwrap();
        assert_eq!(validate(&sig, &f, 0).unwrap().variable_bound, 3);
    }

    #[test]
    fn constants_and_errors() {
        let sig = admires_sig();
        assert_eq!(parse("true", &sig).unwrap(), Formula::True);
        let f = parse("forall admires", &sig).unwrap();
        assert!(matches!(validate(&sig, &f, 0), Err(ValidationError::ArityExceedsContext { depth: 1, .. })));
        assert!(validate(&sig, &Formula::Atom(sig.lookup("prof").unwrap()), 0).is_err());
        assert!(matches!(parse("forall nope", &sig), Err(ParseError::UnknownPredicate { .. })));
        assert!(matches!(parse("(prof & ", &sig), Err(ParseError::Syntax { .. })));
        assert!(matches!(parse("(prof & prof | prof)", &sig), Err(ParseError::Syntax { .. })));
    }

    #[test]
    fn printing() {
        let sig = parse_header("sig { p/1, q/1 } trans { T }").unwrap();
        let (p, q, t) = (sig.lookup("p").unwrap(), sig.lookup("q").unwrap(), sig.lookup("T").unwrap());
        let f = Formula::forall(Formula::implies(Formula::Atom(p), Formula::exists(Formula::Atom(t))));
        assert_eq!(print(&f, &sig), "forall (p -> exists T)");
        assert_eq!(print(&Formula::True, &sig), "true");
        assert_eq!(print(&Formula::Xor(vec![Formula::Atom(p), Formula::Atom(q)]), &sig), "(p ^ q)");
    }

    #[test]
    fn header_round_trip() {
        let text = "sig { p/1, r/2 } trans { T } eq\nforall exists (T & !=)";
        let (sig, f) = parse_file(text).unwrap();
        assert!(sig.that().is_some());
        assert!(sig.equality().is_some());
        let again = parse_file(&print_file(&f, &sig)).unwrap();
        assert_eq!(again.0, sig);
        assert_eq!(again.1, f);
    }

    #[test]
    fn renders_with_variables() {
        let sig = admires_sig();
        let f = parse("forall (prof -> admires)", &sig).unwrap();
        assert_eq!(render_with_variables(&sig, &f, 1).unwrap(), "forall x2 (prof(x2) -> admires(x1,x2))");
        let g = parse("forall (student -> !forall (prof -> admires))", &sig).unwrap();
        assert_eq!(
            render_with_variables(&sig, &g, 0).unwrap(),
            "forall x1 (student(x1) -> !forall x2 (prof(x2) -> admires(x1,x2)))"
        );
        assert_eq!(render_with_variables(&sig, &Formula::True, 0).unwrap(), "true");
    }

    #[test]
    fn validate_is_monotone_in_prefix() {
        let sig = admires_sig();
        let f = parse("(prof & forall admires)", &sig).unwrap();
        let v1 = validate(&sig, &f, 1).unwrap();
        let v2 = validate(&sig, &f, 2).unwrap();
        assert_eq!(v2.variable_bound, v1.variable_bound + 1);
    }

    #[test]
    fn kleene_xor() {
        let f = Formula::Xor(vec![Formula::Atom(0), Formula::Atom(1)]);
        assert_eq!(f.eval_prop(&mut |p| if p == 0 { Some(true) } else { None }), None);
        assert_eq!(f.eval_prop(&mut |_| Some(true)), Some(false));
        assert_eq!(f.eval_prop(&mut |p| Some(p == 1)), Some(true));
    }
}
