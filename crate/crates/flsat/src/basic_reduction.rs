//! Basic formulas, the reduction from spread normal form, and the quadratic
//! transformation.
//!
//! Basic formulas live over a signature of unary predicates together with
//! `T`, `That` and equality. 1-types range over all unary predicates,
//! `That` included.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::normal_form::{assign_clauses, SpreadNormalForm};
use crate::oracle::check_model;
use crate::resolution::{extend_type_saturated, restrict, saturate, Clause, ClauseSet, Literal};
use crate::semantics::{cliques, fluted_type_of, FlutedType, Structure};
use crate::syntax::{parse, Formula, ParseError, PredId, PredKind, Signature};

/// A basic formula. `pi`, `pi2` are 1-types; `mu` is a quantifier-free unary formula.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Basic {
    /// `forall (pi -> exists (mu & T & !=))`
    B1 { pi: FlutedType, mu: Formula },
    /// `forall (pi -> exists (mu & !T & !=))`
    B2 { pi: FlutedType, mu: Formula },
    /// `forall (pi -> forall (pi2 -> T))`, `pi != pi2`
    B3 { pi: FlutedType, pi2: FlutedType },
    /// `forall (pi -> forall (pi2 -> !T))`, `pi != pi2`
    B4 { pi: FlutedType, pi2: FlutedType },
    /// `forall (pi -> forall (pi -> (= | T)))`
    B5 { pi: FlutedType },
    /// `forall (pi -> forall (pi -> (= | !T)))`
    B6 { pi: FlutedType },
    /// `forall mu`
    B7 { mu: Formula },
    /// `exists mu`
    B8 { mu: Formula },
}

impl Basic {
    pub fn tag(&self) -> &'static str {
        match self {
            Basic::B1 { .. } => "B1",
            Basic::B2 { .. } => "B2",
            Basic::B3 { .. } => "B3",
            Basic::B4 { .. } => "B4",
            Basic::B5 { .. } => "B5",
            Basic::B6 { .. } => "B6",
            Basic::B7 { .. } => "B7",
            Basic::B8 { .. } => "B8",
        }
    }

    pub fn to_formula(&self, sig: &Signature) -> Formula {
        let t = sig.distinguished().expect("T");
        let e = sig.equality().expect("equality");
        let ne = Formula::not(Formula::atom(e));
        match self {
            Basic::B1 { pi, mu } | Basic::B2 { pi, mu } => {
                let tl = Formula::lit(t, matches!(self, Basic::B1 { .. }));
                Formula::forall(Formula::implies(pi.to_formula(), Formula::exists(Formula::And(vec![mu.clone(), tl, ne]))))
            }
            Basic::B3 { pi, pi2 } | Basic::B4 { pi, pi2 } => {
                let tl = Formula::lit(t, matches!(self, Basic::B3 { .. }));
                Formula::forall(Formula::implies(pi.to_formula(), Formula::forall(Formula::implies(pi2.to_formula(), tl))))
            }
            Basic::B5 { pi } | Basic::B6 { pi } => {
                let tl = Formula::lit(t, matches!(self, Basic::B5 { .. }));
                let body = Formula::Or(vec![Formula::atom(e), tl]);
                Formula::forall(Formula::implies(pi.to_formula(), Formula::forall(Formula::implies(pi.to_formula(), body))))
            }
            Basic::B7 { mu } => Formula::forall(mu.clone()),
            Basic::B8 { mu } => Formula::exists(mu.clone()),
        }
    }

    /// One line: the tag followed by its payload, `;`-separated.
    pub fn to_line(&self, sig: &Signature) -> String {
        let p = |f: &Formula| crate::print(f, sig);
        match self {
            Basic::B1 { pi, mu } | Basic::B2 { pi, mu } => format!("{} {} ; {}", self.tag(), pi.display(sig), p(mu)),
            Basic::B3 { pi, pi2 } | Basic::B4 { pi, pi2 } => {
                format!("{} {} ; {}", self.tag(), pi.display(sig), pi2.display(sig))
            }
            Basic::B5 { pi } | Basic::B6 { pi } => format!("{} {}", self.tag(), pi.display(sig)),
            Basic::B7 { mu } | Basic::B8 { mu } => format!("{} {}", self.tag(), p(mu)),
        }
    }

    fn remap(&self, map: &dyn Fn(PredId) -> PredId) -> Basic {
        let t = |pi: &FlutedType| remap_type(pi, map);
        let f = |mu: &Formula| mu.remap(&|p| map(p));
        match self {
            Basic::B1 { pi, mu } => Basic::B1 { pi: t(pi), mu: f(mu) },
            Basic::B2 { pi, mu } => Basic::B2 { pi: t(pi), mu: f(mu) },
            Basic::B3 { pi, pi2 } => Basic::B3 { pi: t(pi), pi2: t(pi2) },
            Basic::B4 { pi, pi2 } => Basic::B4 { pi: t(pi), pi2: t(pi2) },
            Basic::B5 { pi } => Basic::B5 { pi: t(pi) },
            Basic::B6 { pi } => Basic::B6 { pi: t(pi) },
            Basic::B7 { mu } => Basic::B7 { mu: f(mu) },
            Basic::B8 { mu } => Basic::B8 { mu: f(mu) },
        }
    }
}

fn remap_type(pi: &FlutedType, map: &dyn Fn(PredId) -> PredId) -> FlutedType {
    let mut lits: Vec<(PredId, bool)> = pi.lits.iter().map(|&(p, b)| (map(p), b)).collect();
    lits.sort();
    FlutedType { arity: pi.arity, lits }
}

/// A set of basic formulas over a signature of unary predicates, `T`,
/// `That` and equality.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BasicSet {
    pub sig: Signature,
    pub formulas: Vec<Basic>,
}

#[derive(Debug, Error)]
pub enum BasicError {
    #[error("basic formulas need a signature of unary predicates with T, That and equality: {0}")]
    BadSignature(String),
    #[error("line {line}: {msg}")]
    Line { line: usize, msg: String },
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("expansion failed: {0}")]
    Expansion(String),
    #[error("ran out of fresh improper 1-types: {needed} cliques, {available} types")]
    OutOfImproperTypes { needed: usize, available: usize },
}

/// Checks that `sig` fits basic formulas: unary predicates plus the
/// distinguished `T`, `That` and equality.
pub fn check_basic_signature(sig: &Signature) -> Result<(), BasicError> {
    if sig.transitive().len() != 1 || sig.that().is_none() || sig.equality().is_none() {
        return Err(BasicError::BadSignature("need exactly one T, That and equality".into()));
    }
    if let Some(p) = sig.preds().iter().find(|p| p.kind == PredKind::Ordinary && p.arity != 1) {
        return Err(BasicError::BadSignature(format!("`{}` has arity {}", p.name, p.arity)));
    }
    Ok(())
}

/// All 1-types over the unary predicates of `sig`, in lexicographic order of
/// polarities (negative first).
pub fn all_one_types(sig: &Signature) -> Vec<FlutedType> {
    allowed_one_types(sig, &[])
}

/// 1-types satisfying every quantifier-free unary formula in `constraints`,
/// in lexicographic order of polarities (negative first).
pub fn allowed_one_types(sig: &Signature, constraints: &[Formula]) -> Vec<FlutedType> {
    let mut out = enumerate_one_types(sig, constraints, usize::MAX);
    out.sort();
    out
}

/// Up to `limit` 1-types satisfying `constraints`, enumerated by a SAT solver
/// with blocking clauses.
pub fn enumerate_one_types(sig: &Signature, constraints: &[Formula], limit: usize) -> Vec<FlutedType> {
    use varisat::{ExtendFormula, Lit, Solver};
    fn enc(solver: &mut Solver<'_>, vars: &BTreeMap<PredId, Lit>, f: &Formula) -> Lit {
        let fresh = |solver: &mut Solver<'_>| solver.new_lit();
        match f {
            Formula::True | Formula::False => {
                let l = fresh(solver);
                solver.add_clause(&[if matches!(f, Formula::True) { l } else { !l }]);
                l
            }
            Formula::Atom(p) => vars[p],
            Formula::Not(g) => !enc(solver, vars, g),
            Formula::Implies(a, b) => {
                let na = !enc(solver, vars, a);
                let b = enc(solver, vars, b);
                enc_or(solver, &[na, b])
            }
            Formula::And(v) => {
                let ls: Vec<Lit> = v.iter().map(|g| !enc(solver, vars, g)).collect();
                !enc_or(solver, &ls)
            }
            Formula::Or(v) => {
                let ls: Vec<Lit> = v.iter().map(|g| enc(solver, vars, g)).collect();
                enc_or(solver, &ls)
            }
            Formula::Xor(v) => {
                let ls: Vec<Lit> = v.iter().map(|g| enc(solver, vars, g)).collect();
                let some = enc_or(solver, &ls);
                let mut clashes = Vec::new();
                for a in 0..ls.len() {
                    for b in a + 1..ls.len() {
                        clashes.push(!enc_or(solver, &[!ls[a], !ls[b]]));
                    }
                }
                let clash = enc_or(solver, &clashes);
                !enc_or(solver, &[!some, clash])
            }
            Formula::Forall(_) | Formula::Exists(_) => panic!("type constraints must be quantifier-free"),
        }
    }
    fn enc_or(solver: &mut Solver<'_>, ls: &[Lit]) -> Lit {
        let r = solver.new_lit();
        let mut big: Vec<Lit> = ls.to_vec();
        big.push(!r);
        solver.add_clause(&big);
        for &l in ls {
            solver.add_clause(&[!l, r]);
        }
        r
    }
    let unary = sig.unary();
    let mut solver = Solver::new();
    let vars: BTreeMap<PredId, Lit> = unary.iter().map(|&p| (p, solver.new_lit())).collect();
    for c in constraints {
        let l = enc(&mut solver, &vars, c);
        solver.add_clause(&[l]);
    }
    let mut out = Vec::new();
    while out.len() < limit && solver.solve().expect("in-memory SAT solving") {
        let model: BTreeSet<Lit> = solver.model().expect("model after sat").into_iter().collect();
        let lits: Vec<(PredId, bool)> = unary.iter().map(|&p| (p, model.contains(&vars[&p]))).collect();
        let block: Vec<Lit> = lits.iter().map(|&(p, b)| if b { !vars[&p] } else { vars[&p] }).collect();
        solver.add_clause(&block);
        let mut lits = lits;
        lits.sort();
        out.push(FlutedType { arity: 1, lits });
    }
    out
}

impl BasicSet {
    pub fn new(sig: Signature) -> Result<Self, BasicError> {
        check_basic_signature(&sig)?;
        Ok(BasicSet { sig, formulas: Vec::new() })
    }

    pub fn to_formula(&self) -> Formula {
        Formula::and(self.formulas.iter().map(|b| b.to_formula(&self.sig)).collect())
    }

    /// True iff `s` is a well-formed model of every formula.
    pub fn holds_in(&self, s: &Structure) -> bool {
        check_model(s, &self.to_formula())
    }

    /// Drops duplicate formulas, keeping the first occurrence.
    pub fn dedup(&mut self) {
        let mut seen = BTreeSet::new();
        self.formulas.retain(|b| seen.insert(b.clone()));
    }

    /// Line-oriented rendering: the signature header, then one formula per line.
    pub fn to_text(&self) -> String {
        let mut s = self.sig.header();
        s.push('\n');
        for b in &self.formulas {
            s.push_str(&b.to_line(&self.sig));
            s.push('\n');
        }
        s
    }

    /// Parses [`BasicSet::to_text`] output; `#` starts a comment.
    pub fn parse(text: &str) -> Result<BasicSet, BasicError> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()));
        let (_, header) = lines.find(|(_, l)| !l.is_empty()).ok_or(BasicError::Line { line: 1, msg: "empty".into() })?;
        let sig = crate::syntax::parse_header(header)?;
        let mut set = BasicSet::new(sig)?;
        for (line, l) in lines {
            if l.is_empty() {
                continue;
            }
            let err = |msg: String| BasicError::Line { line, msg };
            let (tag, rest) = l.split_once(char::is_whitespace).ok_or_else(|| err("missing payload".into()))?;
            let rest = rest.trim();
            let ty = |s: &str| parse_type(&set.sig, s.trim()).map_err(&err);
            let fm = |s: &str| parse(s.trim(), &set.sig).map_err(|e| err(e.to_string()));
            let two = || rest.split_once(';').ok_or_else(|| err("expected `;`".into()));
            let b = match tag {
                "B1" | "B2" => {
                    let (a, m) = two()?;
                    let (pi, mu) = (ty(a)?, fm(m)?);
                    if tag == "B1" {
                        Basic::B1 { pi, mu }
                    } else {
                        Basic::B2 { pi, mu }
                    }
                }
                "B3" | "B4" => {
                    let (a, c) = two()?;
                    let (pi, pi2) = (ty(a)?, ty(c)?);
                    if pi == pi2 {
                        return Err(err("B3/B4 need distinct types".into()));
                    }
                    if tag == "B3" {
                        Basic::B3 { pi, pi2 }
                    } else {
                        Basic::B4 { pi, pi2 }
                    }
                }
                "B5" => Basic::B5 { pi: ty(rest)? },
                "B6" => Basic::B6 { pi: ty(rest)? },
                "B7" => Basic::B7 { mu: fm(rest)? },
                "B8" => Basic::B8 { mu: fm(rest)? },
                _ => return Err(err(format!("unknown tag `{tag}`"))),
            };
            set.formulas.push(b);
        }
        Ok(set)
    }
}

/// Parses `{p+, That-}`; every unary predicate must occur exactly once.
pub fn parse_type(sig: &Signature, s: &str) -> Result<FlutedType, String> {
    let inner = s.strip_prefix('{').and_then(|x| x.strip_suffix('}')).ok_or("expected `{...}`")?;
    let mut lits = Vec::new();
    for item in inner.split(',').map(str::trim).filter(|x| !x.is_empty()) {
        let (name, pos) = if let Some(n) = item.strip_suffix('+') {
            (n, true)
        } else if let Some(n) = item.strip_suffix('-') {
            (n, false)
        } else {
            return Err(format!("literal `{item}` lacks a sign"));
        };
        let p = sig.lookup(name.trim()).ok_or(format!("unknown predicate `{name}`"))?;
        if sig.arity(p) != 1 {
            return Err(format!("`{name}` is not unary"));
        }
        lits.push((p, pos));
    }
    lits.sort();
    let ids: Vec<PredId> = lits.iter().map(|l| l.0).collect();
    if ids != sig.unary() {
        return Err("a 1-type assigns every unary predicate exactly once".into());
    }
    Ok(FlutedType { arity: 1, lits })
}

impl fmt::Display for BasicSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

/// Restriction of a spread signature to unary predicates, `T`, `That` and
/// equality, in the order the header parser uses, with the id map.
fn basic_signature(sig: &Signature) -> (Signature, Vec<Option<PredId>>) {
    let mut out = Signature::new();
    let mut map = vec![None; sig.len()];
    for (p, pr) in sig.preds().iter().enumerate() {
        if pr.kind == PredKind::Ordinary && pr.arity == 1 {
            map[p] = Some(out.add_ordinary(&pr.name, 1).expect("unique names"));
        }
    }
    let t = sig.distinguished().expect("T");
    map[t] = Some(out.add_transitive(sig.name(t)).expect("unique names"));
    map[sig.equality().expect("equality")] = Some(out.enable_equality());
    map[sig.that().expect("That")] = Some(out.enable_that().expect("T present"));
    (out, map)
}

fn type_value(pi: &FlutedType) -> impl Fn(PredId) -> Option<bool> + '_ {
    move |p| pi.value(p)
}

/// Clause-set unions and their restricted saturations, cached by index sets.
struct Saturations<'a> {
    snf: &'a SpreadNormalForm,
    cache: BTreeMap<(BTreeSet<usize>, BTreeSet<usize>), (ClauseSet, ClauseSet)>,
}

impl<'a> Saturations<'a> {
    /// `(Delta_J ∪ Omega ∪ extra)` and its `°`, where `extra` collects the
    /// existential demands in `ex` (with their control literals and `o_i`).
    fn get(&mut self, j: &BTreeSet<usize>, ex: &BTreeSet<usize>) -> &(ClauseSet, ClauseSet) {
        let snf = self.snf;
        self.cache.entry((j.clone(), ex.clone())).or_insert_with(|| {
            let mut set = snf.omega.clone();
            set.m = 2;
            for &k in j {
                set.clauses.extend(snf.univ[k].delta.clauses.iter().cloned());
            }
            for &i in ex {
                let e = &snf.exist[i];
                set.clauses.extend(e.gamma.clauses.iter().cloned());
                set.clauses.extend(e.kappa.literals(&snf.sig).map(Clause::unit));
                if let Some(o) = e.o {
                    set.clauses.insert(Clause::unit(Literal::new(o, true)));
                }
            }
            let star = saturate(&snf.sig, &set);
            let circ = restrict(&snf.sig, &star);
            (star, circ)
        })
    }
}

/// Reduces a spread normal form to basic formulas. The conjunction of the
/// output follows from the input, and every model of the output expands to
/// a model of the input (see [`expand_basic_model`]).
pub fn spread_to_basic(snf: &SpreadNormalForm) -> BasicSet {
    let sig = &snf.sig;
    let (bsig, map) = basic_signature(sig);
    let m = |p: PredId| map[p].expect("predicate kept in the basic signature");
    let t = sig.distinguished().expect("T");
    let e = sig.equality().expect("equality");
    let that = sig.that().expect("That");
    let mut out: Vec<Basic> = vec![Basic::B8 { mu: Formula::True }];
    out.extend(snf.lambdas.iter().map(|l| Basic::B8 { mu: l.clone() }));

    // Unary universal constraints.
    let mut unary: Vec<Formula> = Vec::new();
    let mut sats = Saturations { snf, cache: BTreeMap::new() };
    let empty = BTreeSet::new();
    let omega_circ = sats.get(&empty, &empty).1.clone();
    for c in omega_circ.iter() {
        if c.lits().iter().all(|l| sig.arity(l.pred) == 1) {
            unary.push(c.to_formula());
        }
    }
    for (a, &o) in snf.o_preds.iter().enumerate() {
        for &o2 in &snf.o_preds[a + 1..] {
            unary.push(Formula::not(Formula::And(vec![Formula::atom(o), Formula::atom(o2)])));
        }
    }
    for u in &snf.univ {
        if u.delta.contains_bottom() {
            unary.push(crate::normal_form::nnf(&u.nu, false));
        }
    }
    out.extend(unary.iter().map(|f| Basic::B7 { mu: f.clone() }));
    let candidates = allowed_one_types(sig, &unary);

    // Per type: the universal conjuncts that apply and the self-pair check.
    let mut live: Vec<(FlutedType, BTreeSet<usize>)> = Vec::new();
    for pi in candidates {
        let val = type_value(&pi);
        let j: BTreeSet<usize> =
            (0..snf.univ.len()).filter(|&k| snf.univ[k].nu.eval_prop(&mut |p| val(p)) == Some(true)).collect();
        let eq_demands: BTreeSet<usize> = (0..snf.exist.len())
            .filter(|&i| snf.exist[i].kappa.eq && snf.exist[i].mu.eval_prop(&mut |p| val(p)) == Some(true))
            .collect();
        let self_t = pi.value(that).expect("That in type");
        let circ = &sats.get(&j, &eq_demands).1;
        let self_ok = circ.eval(&mut |p| {
            if p == e {
                Some(true)
            } else if p == t {
                Some(self_t)
            } else {
                pi.value(p)
            }
        }) == Some(true);
        if !self_ok {
            out.push(Basic::B7 { mu: Formula::not(pi.to_formula()) });
            continue;
        }
        let mut dead = false;
        let mut demands = Vec::new();
        for (i, ex) in snf.exist.iter().enumerate() {
            if ex.kappa.eq || ex.mu.eval_prop(&mut |p| val(p)) != Some(true) {
                continue;
            }
            let one = BTreeSet::from([i]);
            let circ = sats.get(&j, &one).1.clone();
            let theta = assign_clauses(&circ, |p| {
                if p == e {
                    Some(false)
                } else if p == t {
                    Some(ex.kappa.t)
                } else {
                    None
                }
            });
            if theta.contains_bottom() {
                dead = true;
                break;
            }
            let mu = theta.to_formula();
            demands.push(if ex.kappa.t { Basic::B1 { pi: pi.clone(), mu } } else { Basic::B2 { pi: pi.clone(), mu } });
        }
        if dead {
            out.push(Basic::B7 { mu: Formula::not(pi.to_formula()) });
            continue;
        }
        out.extend(demands);
        live.push((pi.clone(), j));
    }

    // Pairs of distinct elements.
    for (pi, j) in &live {
        let circ = sats.get(j, &empty).1.clone();
        for (pi2, _) in &live {
            let ok = |tv: bool| {
                circ.eval(&mut |p| {
                    if p == e {
                        Some(false)
                    } else if p == t {
                        Some(tv)
                    } else {
                        pi2.value(p)
                    }
                }) == Some(true)
            };
            let (ok_t, ok_f) = (ok(true), ok(false));
            if pi == pi2 {
                if !ok_f {
                    out.push(Basic::B5 { pi: pi.clone() });
                }
                if !ok_t {
                    out.push(Basic::B6 { pi: pi.clone() });
                }
            } else {
                if !ok_f {
                    out.push(Basic::B3 { pi: pi.clone(), pi2: pi2.clone() });
                }
                if !ok_t {
                    out.push(Basic::B4 { pi: pi.clone(), pi2: pi2.clone() });
                }
            }
        }
    }
    let mut set = BasicSet { sig: bsig, formulas: out.iter().map(|b| b.remap(&m)).collect() };
    set.dedup();
    set
}

/// Expands a model of `spread_to_basic(snf)` to a model of `snf` by choosing
/// the binary ordinary relations pair by pair with [`extend_type_saturated`].
pub fn expand_basic_model(snf: &SpreadNormalForm, model: &Structure) -> Result<Structure, BasicError> {
    let sig = &snf.sig;
    let (_, map) = basic_signature(sig);
    let n = model.size();
    let mut s = Structure::new(sig.clone(), n);
    for (p, pr) in sig.preds().iter().enumerate() {
        if pr.is_stored() {
            if let Some(bp) = map[p] {
                for tup in model.tuples(bp) {
                    s.set(p, &tup, true);
                }
            }
        }
    }
    let binary: Vec<PredId> =
        (0..sig.len()).filter(|&p| sig.kind(p) == PredKind::Ordinary && sig.arity(p) == 2).collect();
    let t = sig.distinguished().expect("T");
    let mut sats = Saturations { snf, cache: BTreeMap::new() };
    let mut assigned = vec![vec![false; n]; n];
    let apply = |s: &mut Structure, a: usize, b: usize, star: &ClauseSet| -> Result<(), BasicError> {
        let tau = fluted_type_of(s, &[a, b]).restrict(|p| !binary.contains(&p));
        let plus = extend_type_saturated(sig, star, &tau)
            .ok_or_else(|| BasicError::Expansion(format!("no extension for pair ({a},{b})")))?;
        for &p in &binary {
            s.set(p, &[a, b], plus.value(p) == Some(true));
        }
        Ok(())
    };
    for a in 0..n {
        let ty = fluted_type_of(&s, &[a]);
        let holds = |f: &Formula| ty.satisfies(f) == Some(true);
        let j: BTreeSet<usize> = (0..snf.univ.len()).filter(|&k| holds(&snf.univ[k].nu)).collect();
        let eq_demands: BTreeSet<usize> =
            (0..snf.exist.len()).filter(|&i| snf.exist[i].kappa.eq && holds(&snf.exist[i].mu)).collect();
        let star = sats.get(&j, &eq_demands).0.clone();
        apply(&mut s, a, a, &star)?;
        assigned[a][a] = true;
        for (i, ex) in snf.exist.iter().enumerate() {
            if ex.kappa.eq || !holds(&ex.mu) {
                continue;
            }
            let (star, circ) = sats.get(&j, &BTreeSet::from([i])).clone();
            let witness = (0..n).find(|&b| {
                b != a
                    && !assigned[a][b]
                    && s.holds(t, &[a, b]) == ex.kappa.t
                    && circ.eval(&mut |p| {
                        if binary.contains(&p) {
                            None
                        } else {
                            Some(fluted_type_of(&s, &[a, b]).value(p).unwrap_or(false))
                        }
                    }) == Some(true)
            });
            let b = witness.ok_or_else(|| BasicError::Expansion(format!("no witness for conjunct {i} at {a}")))?;
            apply(&mut s, a, b, &star)?;
            assigned[a][b] = true;
        }
        let star = sats.get(&j, &BTreeSet::new()).0.clone();
        for b in 0..n {
            if !assigned[a][b] {
                apply(&mut s, a, b, &star)?;
                assigned[a][b] = true;
            }
        }
    }
    Ok(s)
}

/// The quadratic transformation together with its fresh predicates.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QuadraticSet {
    pub set: BasicSet,
    /// `p_0 .. p_{2l-1}`.
    pub fresh: Vec<PredId>,
    /// Predicate ids of the original signature inside the new one.
    pub embed: Vec<PredId>,
}

impl QuadraticSet {
    /// `!p_0 & ... & !p_{2l-1}`.
    pub fn p0_bar(&self) -> Formula {
        Formula::and(self.fresh.iter().map(|&p| Formula::lit(p, false)).collect())
    }

    /// A 1-type over the extended signature is proper iff it entails `p0_bar`.
    pub fn is_proper(&self, pi: &FlutedType) -> bool {
        self.fresh.iter().all(|&p| pi.value(p) == Some(false))
    }

    /// Proper 1-types paired with their restriction to the original signature.
    pub fn proper_types(&self, original: &Signature) -> Vec<(FlutedType, FlutedType)> {
        all_one_types(original)
            .into_iter()
            .map(|pi| (self.lift_type(&pi), pi))
            .collect()
    }

    /// The proper 1-type extending `pi`.
    pub fn lift_type(&self, pi: &FlutedType) -> FlutedType {
        let mut lits: Vec<(PredId, bool)> = pi.lits.iter().map(|&(p, b)| (self.embed[p], b)).collect();
        lits.extend(self.fresh.iter().map(|&p| (p, false)));
        lits.sort();
        FlutedType { arity: 1, lits }
    }

    /// The restriction of a model of the transformed set to its proper
    /// elements, over the original signature.
    pub fn restrict_to_proper(&self, original: &Signature, s: &Structure) -> Structure {
        let elems: Vec<usize> =
            (0..s.size()).filter(|&a| self.fresh.iter().all(|&p| !s.holds(p, &[a]))).collect();
        let sub = s.restrict(&elems);
        let mut out = Structure::new(original.clone(), elems.len());
        for (p, pr) in original.preds().iter().enumerate() {
            if pr.is_stored() {
                for tup in sub.tuples(self.embed[p]) {
                    out.set(p, &tup, true);
                }
            }
        }
        out
    }

    /// Pads a model of the transformed set in which every element is proper
    /// into a quadratic model: each clique determined by a pair of types
    /// receives one new element with a fresh improper type.
    pub fn pad_to_quadratic(&self, s: &Structure) -> Result<Structure, BasicError> {
        let sig = s.sig();
        let t = sig.distinguished().expect("T");
        let cp = cliques(s);
        let n = s.size();
        let types: Vec<FlutedType> = (0..n).map(|a| fluted_type_of(s, &[a])).collect();
        let mut where_realized: BTreeMap<&FlutedType, BTreeSet<usize>> = BTreeMap::new();
        for a in 0..n {
            where_realized.entry(&types[a]).or_default().insert(cp.block_of[a]);
        }
        let mut targets: BTreeSet<usize> = BTreeSet::new();
        let realized: Vec<&FlutedType> = where_realized.keys().copied().collect();
        for (x, p1) in realized.iter().enumerate() {
            for p2 in &realized[x + 1..] {
                let both: Vec<usize> =
                    where_realized[p1].intersection(&where_realized[*p2]).copied().collect();
                if both.len() == 1 {
                    targets.insert(both[0]);
                }
            }
        }
        let available = (1usize << self.fresh.len()) - 1;
        if targets.len() > available {
            return Err(BasicError::OutOfImproperTypes { needed: targets.len(), available });
        }
        let mut out = Structure::new(sig.clone(), n + targets.len());
        for (p, pr) in sig.preds().iter().enumerate() {
            if pr.is_stored() {
                for tup in s.tuples(p) {
                    out.set(p, &tup, true);
                }
            }
        }
        for (k, &block) in targets.iter().enumerate() {
            let e = n + k;
            let rep = cp.blocks[block][0];
            let code = k + 1;
            for (bit, &p) in self.fresh.iter().enumerate() {
                out.set(p, &[e], code >> bit & 1 == 1);
            }
            out.set(t, &[e, e], true);
            for x in 0..n {
                if s.holds(t, &[rep, x]) {
                    out.set(t, &[e, x], true);
                }
                if s.holds(t, &[x, rep]) {
                    out.set(t, &[x, e], true);
                }
            }
        }
        Ok(out)
    }
}

/// Guards every type and every `mu` with `p0_bar` over fresh predicates
/// `p_0 .. p_{2l-1}` (`l` counts unary predicates including `That`) and adds
/// `exists p0_bar`.
pub fn quadratic_transform(phi: &BasicSet) -> QuadraticSet {
    let mut sig = phi.sig.clone();
    let l = phi.sig.unary().len();
    let fresh: Vec<PredId> = (0..2 * l).map(|_| sig.add_fresh("p", 1)).collect();
    let embed: Vec<PredId> = (0..phi.sig.len()).collect();
    let mut q = QuadraticSet { set: BasicSet { sig, formulas: Vec::new() }, fresh, embed };
    let bar = q.p0_bar();
    let guard = |mu: &Formula| Formula::and(vec![mu.clone(), bar.clone()]);
    let mut out = Vec::new();
    for b in &phi.formulas {
        out.push(match b {
            Basic::B1 { pi, mu } => Basic::B1 { pi: q.lift_type(pi), mu: guard(mu) },
            Basic::B2 { pi, mu } => Basic::B2 { pi: q.lift_type(pi), mu: guard(mu) },
            Basic::B3 { pi, pi2 } => Basic::B3 { pi: q.lift_type(pi), pi2: q.lift_type(pi2) },
            Basic::B4 { pi, pi2 } => Basic::B4 { pi: q.lift_type(pi), pi2: q.lift_type(pi2) },
            Basic::B5 { pi } => Basic::B5 { pi: q.lift_type(pi) },
            Basic::B6 { pi } => Basic::B6 { pi: q.lift_type(pi) },
            Basic::B7 { mu } => Basic::B7 { mu: Formula::implies(bar.clone(), mu.clone()) },
            Basic::B8 { mu } => Basic::B8 { mu: guard(mu) },
        });
    }
    out.push(Basic::B8 { mu: bar.clone() });
    q.set.formulas = out;
    q.set.dedup();
    q
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::normal_form::{to_normal_form, to_spread, WEncoding};
    use crate::oracle::{find_model, Mode};
    use crate::syntax::{parse_file, parse_header};

    fn phi1_basic() -> (SpreadNormalForm, BasicSet) {
        let (sig, f) = parse_file("sig { } trans { T } eq\n(forall exists T & forall forall (T -> !=))").unwrap();
        let nf = to_normal_form(&sig, &f, 2).unwrap();
        let snf = to_spread(&nf, &[], WEncoding::default()).unwrap();
        let b = spread_to_basic(&snf);
        (snf, b)
    }

    #[test]
    fn phi1_reduction_shape() {
        let (snf, b) = phi1_basic();
        assert!(check_basic_signature(&b.sig).is_ok());
        assert!(b.formulas.contains(&Basic::B8 { mu: Formula::True }));
        let that = b.sig.that().unwrap();
        let rules_out_that = |s: &Structure| (0..s.size()).all(|a| !s.holds(b.sig.distinguished().unwrap(), &[a, a]));
        assert!(b.formulas.iter().any(|x| matches!(x, Basic::B1 { pi, .. } if pi.value(that) == Some(false))));
        for n in 1..=4 {
            if let Some(s) = find_model(&b.sig, &b.to_formula(), n, Mode::Exactly).unwrap() {
                assert!(rules_out_that(&s));
                let big = expand_basic_model(&snf, &s).unwrap();
                assert!(check_model(&big, &snf.to_formula()));
            }
        }
    }

    #[test]
    fn bottom_and_universal_only() {
        let (sig, f) = parse_file("sig { p/1 } trans { T } eq\n(forall p & forall (p -> forall (p -> T)))").unwrap();
        let nf = to_normal_form(&sig, &f, 2).unwrap();
        let b = spread_to_basic(&to_spread(&nf, &[], WEncoding::default()).unwrap());
        assert!(b.formulas.iter().all(|x| !matches!(x, Basic::B1 { .. } | Basic::B2 { .. })));
        let (sig2, f2) = parse_file("sig { p/1 } trans { T } eq\nforall forall false").unwrap();
        let nf2 = to_normal_form(&sig2, &f2, 2).unwrap();
        let b2 = spread_to_basic(&to_spread(&nf2, &[], WEncoding::default()).unwrap());
        assert!(b2.formulas.contains(&Basic::B7 { mu: Formula::False }));
    }

    #[test]
    fn quadratic_examples() {
        let sig = parse_header("sig { p/1 } trans { T } eq").unwrap();
        let p = sig.lookup("p").unwrap();
        let phi = BasicSet { sig: sig.clone(), formulas: vec![Basic::B8 { mu: Formula::atom(p) }] };
        let q = quadratic_transform(&phi);
        assert_eq!(q.fresh.len(), 4);
        let bar = q.p0_bar();
        assert_eq!(
            q.set.formulas,
            vec![Basic::B8 { mu: Formula::and(vec![Formula::atom(p), bar.clone()]) }, Basic::B8 { mu: bar.clone() }]
        );
        for n in 1..=3 {
            let a = find_model(&sig, &phi.to_formula(), n, Mode::AtMost).unwrap().is_some();
            let b = find_model(&q.set.sig, &q.set.to_formula(), n, Mode::AtMost).unwrap().is_some();
            assert_eq!(a, b);
        }
        let empty = quadratic_transform(&BasicSet { sig: sig.clone(), formulas: vec![] });
        assert_eq!(empty.set.formulas, vec![Basic::B8 { mu: empty.p0_bar() }]);
        let b7 = quadratic_transform(&BasicSet { sig: sig.clone(), formulas: vec![Basic::B7 { mu: Formula::atom(p) }] });
        assert_eq!(b7.set.formulas[0], Basic::B7 { mu: Formula::implies(b7.p0_bar(), Formula::atom(p)) });
    }

    #[test]
    fn proper_type_correspondence() {
        let sig = parse_header("sig { p/1 } trans { T } eq").unwrap();
        let q = quadratic_transform(&BasicSet { sig: sig.clone(), formulas: vec![] });
        let pairs = q.proper_types(&sig);
        assert_eq!(pairs.len(), 1 << sig.unary().len());
        assert!(pairs.iter().all(|(lifted, _)| q.is_proper(lifted)));
        let improper = all_one_types(&q.set.sig).into_iter().filter(|t| !q.is_proper(t)).count();
        assert_eq!(improper, (1 << q.set.sig.unary().len()) - pairs.len());
    }

    #[test]
    fn text_round_trip() {
        let (_, b) = phi1_basic();
        let text = b.to_text();
        let back = BasicSet::parse(&text).unwrap();
        assert_eq!(back.formulas, b.formulas);
    }
}
