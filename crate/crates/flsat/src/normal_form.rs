//! Normal form and spread normal form.
//!
//! A normal form over `m` variables is a conjunction of
//! `forall^{m-1} (mu -> exists (kappa & Gamma))`,
//! `forall^{m-1} (nu -> forall Delta)` and `forall^m Omega`, where `kappa`
//! is a control formula and `Gamma`, `Delta`, `Omega` are fluted clause sets.
//! Sentences are converted by negation normal form followed by renaming of
//! quantified subformulas with fresh predicates.

use std::fmt;

use serde_json::{json, Value};
use thiserror::Error;

use crate::resolution::{Clause, ClauseSet, Literal};
use crate::semantics::FlutedType;
use crate::syntax::{validate, Formula, PredId, PredKind, Signature, ValidationError};

/// One of `(T & =)`, `(T & !=)`, `(!T & =)`, `(!T & !=)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Control {
    pub t: bool,
    pub eq: bool,
}

impl Control {
    pub const ALL: [Control; 4] = [
        Control { t: true, eq: true },
        Control { t: true, eq: false },
        Control { t: false, eq: true },
        Control { t: false, eq: false },
    ];

    pub fn to_formula(self, sig: &Signature) -> Formula {
        let t = sig.distinguished().expect("distinguished transitive predicate");
        let e = sig.equality().expect("equality");
        Formula::And(vec![Formula::lit(t, self.t), Formula::lit(e, self.eq)])
    }

    /// The two unit literals of the control formula.
    pub fn literals(self, sig: &Signature) -> [Literal; 2] {
        [
            Literal::new(sig.distinguished().expect("distinguished transitive predicate"), self.t),
            Literal::new(sig.equality().expect("equality"), self.eq),
        ]
    }

    /// Truth value the control formula fixes for `p`, if any. Under `=`
    /// the witness is the element itself, so `That` agrees with `T`.
    pub fn fixes(self, sig: &Signature, p: PredId) -> Option<bool> {
        match sig.kind(p) {
            PredKind::Transitive if Some(p) == sig.distinguished() => Some(self.t),
            PredKind::Equality => Some(self.eq),
            PredKind::THat if self.eq => Some(self.t),
            _ => None,
        }
    }
}

impl fmt::Display for Control {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}T & {}=)", if self.t { "" } else { "!" }, if self.eq { "" } else { "!" })
    }
}

/// `forall^{m-1} (mu -> exists (kappa & gamma))`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExistConjunct {
    pub mu: Formula,
    pub kappa: Control,
    pub gamma: ClauseSet,
}

/// `forall^{m-1} (nu -> forall delta)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UnivConjunct {
    pub nu: Formula,
    pub delta: ClauseSet,
}

/// A predicate introduced by a transformation, with a description of its role.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FreshPredicate {
    pub pred: PredId,
    pub role: &'static str,
    pub source: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NormalForm {
    pub m: usize,
    pub sig: Signature,
    pub exist: Vec<ExistConjunct>,
    pub univ: Vec<UnivConjunct>,
    pub omega: ClauseSet,
    pub fresh: Vec<FreshPredicate>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum NormalFormError {
    #[error("not a sentence: {0}")]
    NotASentence(#[from] ValidationError),
    #[error("the sentence needs {needed} variables but the target is {m}")]
    VariableBoundExceeded { needed: usize, m: usize },
    #[error("normal forms need at least two variables, got {0}")]
    TooFewVariables(usize),
    #[error("the solver pipeline supports one transitive relation, found {0}")]
    MultipleTransitive(usize),
    #[error("spread normal form needs a two-variable normal form, got m = {0}")]
    NotTwoVariable(usize),
    #[error("royal type {0} is not a 1-type over the normal form's signature")]
    BadRoyalType(String),
}

/// Conversion of a quantifier-free negation normal form to clauses, by
/// distribution with subsumption pruning.
pub fn cnf(f: &Formula, m: usize) -> ClauseSet {
    let clauses: Vec<Clause> = match f {
        Formula::True => Vec::new(),
        Formula::False => vec![Clause::bottom()],
        Formula::Atom(p) => vec![Clause::unit(Literal::new(*p, true))],
        Formula::Not(b) => match b.as_ref() {
            Formula::Atom(p) => vec![Clause::unit(Literal::new(*p, false))],
            other => return cnf(&nnf(other, false), m),
        },
        Formula::And(fs) => {
            let mut out = ClauseSet::new(m);
            for c in fs {
                out.clauses.extend(cnf(c, m).clauses);
            }
            return out.reduce_subsumed();
        }
        Formula::Or(fs) => {
            let mut acc = ClauseSet::from_clauses(m, [Clause::bottom()]);
            for c in fs {
                let rhs = cnf(c, m);
                let mut next = ClauseSet::new(m);
                for a in &acc.clauses {
                    for b in &rhs.clauses {
                        if let Some(cl) = Clause::new(a.lits().iter().chain(b.lits()).copied().collect()) {
                            next.clauses.insert(cl);
                        }
                    }
                }
                acc = next.reduce_subsumed();
            }
            return acc;
        }
        Formula::Implies(..) | Formula::Xor(_) => return cnf(&nnf(f, true), m),
        Formula::Forall(_) | Formula::Exists(_) => panic!("cnf of a quantified formula"),
    };
    ClauseSet::from_clauses(m, clauses)
}

/// Negation normal form of `f` (of its negation when `pos` is false):
/// negation only on atoms, no implications, exclusive disjunctions expanded.
pub fn nnf(f: &Formula, pos: bool) -> Formula {
    match f {
        Formula::True => constant(pos),
        Formula::False => constant(!pos),
        Formula::Atom(p) => Formula::lit(*p, pos),
        Formula::Not(b) => nnf(b, !pos),
        Formula::And(fs) => {
            let cs = fs.iter().map(|c| nnf(c, pos)).collect();
            if pos {
                Formula::and(cs)
            } else {
                Formula::or(cs)
            }
        }
        Formula::Or(fs) => {
            let cs = fs.iter().map(|c| nnf(c, pos)).collect();
            if pos {
                Formula::or(cs)
            } else {
                Formula::and(cs)
            }
        }
        Formula::Implies(a, b) => {
            if pos {
                Formula::or(vec![nnf(a, false), nnf(b, true)])
            } else {
                Formula::and(vec![nnf(a, true), nnf(b, false)])
            }
        }
        Formula::Xor(fs) => {
            let pairs: Vec<(usize, usize)> =
                (0..fs.len()).flat_map(|i| (i + 1..fs.len()).map(move |j| (i, j))).collect();
            if pos {
                let mut cs = vec![Formula::or(fs.iter().map(|c| nnf(c, true)).collect())];
                cs.extend(pairs.iter().map(|&(i, j)| Formula::or(vec![nnf(&fs[i], false), nnf(&fs[j], false)])));
                Formula::and(cs)
            } else {
                let mut cs = vec![Formula::and(fs.iter().map(|c| nnf(c, false)).collect())];
                cs.extend(pairs.iter().map(|&(i, j)| Formula::and(vec![nnf(&fs[i], true), nnf(&fs[j], true)])));
                Formula::or(cs)
            }
        }
        Formula::Forall(b) => {
            if pos {
                Formula::forall(nnf(b, true))
            } else {
                Formula::exists(nnf(b, false))
            }
        }
        Formula::Exists(b) => {
            if pos {
                Formula::exists(nnf(b, true))
            } else {
                Formula::forall(nnf(b, false))
            }
        }
    }
}

/// Sets the predicates fixed by `val` and simplifies; may produce the empty clause.
pub fn assign_clauses(set: &ClauseSet, val: impl Fn(PredId) -> Option<bool>) -> ClauseSet {
    let mut out = ClauseSet::new(set.m);
    'outer: for c in &set.clauses {
        let mut lits = Vec::new();
        for l in c.lits() {
            match val(l.pred) {
                Some(b) if b == l.positive => continue 'outer,
                Some(_) => {}
                None => lits.push(*l),
            }
        }
        out.clauses.insert(Clause::new(lits).expect("subset of a non-tautology"));
    }
    out.reduce_subsumed()
}

fn max_atom_arity(sig: &Signature, f: &Formula) -> usize {
    let mut ps = Vec::new();
    f.preds(&mut ps);
    ps.iter().map(|&p| sig.arity(p)).max().unwrap_or(0)
}

fn clause_set_arity(sig: &Signature, s: &ClauseSet) -> usize {
    s.iter().map(|c| c.max_arity(sig)).max().unwrap_or(0)
}

/// Prepares a signature for the pipeline: exactly one transitive relation,
/// with equality and `That` available.
pub fn pipeline_signature(sig: &Signature) -> Result<Signature, NormalFormError> {
    let mut out = sig.clone();
    match out.transitive().len() {
        0 => {
            let name = out.fresh_name("T");
            out.add_transitive(&name).expect("fresh name");
        }
        1 => {}
        k => return Err(NormalFormError::MultipleTransitive(k)),
    }
    out.enable_equality();
    if out.that().is_none() {
        out.enable_that().expect("transitive predicate present");
    }
    Ok(out)
}

struct Builder {
    m: usize,
    sig: Signature,
    exist: Vec<ExistConjunct>,
    univ: Vec<UnivConjunct>,
    omega: ClauseSet,
    fresh: Vec<FreshPredicate>,
}

impl Builder {
    fn fresh_pred(&mut self, base: &str, arity: usize, role: &'static str, source: String) -> PredId {
        let p = self.sig.add_fresh(base, arity);
        self.fresh.push(FreshPredicate { pred: p, role, source });
        p
    }

    fn add_omega(&mut self, f: &Formula) {
        let c = cnf(f, self.m);
        self.omega.clauses.extend(c.clauses);
    }

    fn top(&mut self, g: &Formula, d: usize) {
        match g {
            Formula::True => {}
            Formula::And(fs) => fs.iter().for_each(|c| self.top(c, d)),
            Formula::Forall(b) if d < self.m => self.top(b, d + 1),
            _ if g.is_quantifier_free() => self.add_omega(g),
            Formula::Exists(b) => {
                let body = self.rename(b, d + 1);
                self.emit_exists(Formula::True, d, &body);
            }
            Formula::Or(fs) => {
                let (qf, quant): (Vec<&Formula>, Vec<&Formula>) = fs.iter().partition(|c| c.is_quantifier_free());
                let single = quant.len() == 1 && matches!(quant[0], Formula::Exists(_) | Formula::Forall(_));
                if single {
                    let mu = nnf(&Formula::Or(qf.into_iter().cloned().collect()), false);
                    match quant[0] {
                        Formula::Exists(b) => {
                            let body = self.rename(b, d + 1);
                            self.emit_exists(mu, d, &body);
                        }
                        Formula::Forall(b) => {
                            let body = self.rename(b, d + 1);
                            let delta = cnf(&body, self.m);
                            self.univ.push(UnivConjunct { nu: mu, delta });
                        }
                        _ => unreachable!(),
                    }
                } else {
                    let r = self.rename(g, d);
                    self.add_omega(&r);
                }
            }
            _ => {
                let r = self.rename(g, d);
                self.add_omega(&r);
            }
        }
    }

    /// Replaces each maximal quantified subformula at depth `d` by a fresh atom.
    fn rename(&mut self, g: &Formula, d: usize) -> Formula {
        match g {
            Formula::And(fs) => Formula::and(fs.iter().map(|c| self.rename(c, d)).collect()),
            Formula::Or(fs) => Formula::or(fs.iter().map(|c| self.rename(c, d)).collect()),
            Formula::Forall(b) | Formula::Exists(b) => {
                let body = self.rename(b, d + 1);
                let source = format!("{}", g.display(&self.sig));
                let q = self.fresh_pred("q", d.max(1), "rename", source);
                if matches!(g, Formula::Exists(_)) {
                    self.emit_exists(Formula::atom(q), d, &body);
                } else {
                    let delta = cnf(&body, self.m);
                    self.univ.push(UnivConjunct { nu: Formula::atom(q), delta });
                }
                Formula::atom(q)
            }
            _ => g.clone(),
        }
    }

    /// Emits `forall^d (mu -> exists body)` split over the control cases.
    fn emit_exists(&mut self, mu: Formula, d: usize, body: &Formula) {
        let gamma = cnf(body, self.m);
        let sig = self.sig.clone();
        let mut cases: Vec<(Control, ClauseSet)> = Vec::new();
        for c in Control::ALL {
            let g = assign_clauses(&gamma, |p| c.fixes(&sig, p));
            if !g.contains_bottom() {
                cases.push((c, g));
            }
        }
        if cases.is_empty() {
            self.add_omega(&nnf(&mu, false));
            return;
        }
        let guards: Vec<Formula> = if cases.len() == 1 {
            vec![mu.clone()]
        } else {
            let source = format!("{}", Formula::exists(body.clone()).display(&sig));
            let sels: Vec<Formula> = (0..cases.len())
                .map(|_| Formula::atom(self.fresh_pred("s", d.max(1), "control selector", source.clone())))
                .collect();
            let mut dis = vec![nnf(&mu, false)];
            dis.extend(sels.iter().cloned());
            self.add_omega(&Formula::or(dis));
            sels
        };
        let unary_guard = max_atom_arity(&self.sig, &mu) <= 1;
        for (guard, (c, g)) in guards.into_iter().zip(cases) {
            if c.eq && unary_guard && clause_set_arity(&self.sig, &g) <= 1 {
                // The witness is the element itself: a unary constraint.
                let that = self.sig.that().expect("That enabled");
                let consequent = Formula::and(vec![Formula::lit(that, c.t), g.to_formula()]);
                self.add_omega(&Formula::or(vec![nnf(&guard, false), consequent]));
            } else {
                self.exist.push(ExistConjunct { mu: guard, kappa: c, gamma: g });
            }
        }
    }
}

fn constant(b: bool) -> Formula {
    if b {
        Formula::True
    } else {
        Formula::False
    }
}

/// The instance of an `m`-clause at `x_{m-1} = x_m` when it is expressible
/// as a unary clause: `=` becomes true and `T` becomes `That`.
pub fn diagonal_clause(sig: &Signature, c: &Clause) -> Option<Clause> {
    let that = sig.that()?;
    let mut lits = Vec::new();
    for l in c.lits() {
        match sig.kind(l.pred) {
            PredKind::Equality if l.positive => return None,
            PredKind::Equality => {}
            PredKind::Transitive if Some(l.pred) == sig.distinguished() => lits.push(Literal::new(that, l.positive)),
            _ if sig.arity(l.pred) <= 1 => lits.push(*l),
            _ => return None,
        }
    }
    Clause::new(lits)
}

fn sig_is_eq_or_t(sig: &Signature, p: PredId) -> bool {
    matches!(sig.kind(p), PredKind::Equality | PredKind::Transitive)
}

/// Converts a sentence with at most `m` variables to normal form. The result
/// implies `f`, and every model of `f` expands to a model of the result.
pub fn to_normal_form(sig: &Signature, f: &Formula, m: usize) -> Result<NormalForm, NormalFormError> {
    if m < 2 {
        return Err(NormalFormError::TooFewVariables(m));
    }
    let v = validate(sig, f, 0)?;
    if v.variable_bound > m {
        return Err(NormalFormError::VariableBoundExceeded { needed: v.variable_bound, m });
    }
    let sig = pipeline_signature(sig)?;
    let mut b = Builder { m, sig, exist: Vec::new(), univ: Vec::new(), omega: ClauseSet::new(m), fresh: Vec::new() };
    b.top(&nnf(f, true), 0);
    let diag: Vec<Clause> = b
        .omega
        .iter()
        .filter(|c| c.lits().iter().any(|l| sig_is_eq_or_t(&b.sig, l.pred)))
        .filter_map(|c| diagonal_clause(&b.sig, c))
        .collect();
    b.omega.clauses.extend(diag);
    let omega = b.omega.reduce_subsumed();
    Ok(NormalForm { m, sig: b.sig, exist: b.exist, univ: b.univ, omega, fresh: b.fresh })
}

/// Renders a normal form as a sentence.
pub fn normal_form_to_formula(nf: &NormalForm) -> Formula {
    let k = nf.m - 1;
    let mut cs = Vec::new();
    for e in &nf.exist {
        let body = Formula::and(vec![e.kappa.to_formula(&nf.sig), e.gamma.to_formula()]);
        cs.push(Formula::forall_n(k, Formula::implies(e.mu.clone(), Formula::exists(body))));
    }
    for u in &nf.univ {
        cs.push(Formula::forall_n(k, Formula::implies(u.nu.clone(), Formula::forall(u.delta.to_formula()))));
    }
    if !nf.omega.is_empty() {
        cs.push(Formula::forall_n(nf.m, nf.omega.to_formula()));
    }
    Formula::and(cs)
}

fn fresh_json(sig: &Signature, fresh: &[FreshPredicate]) -> Value {
    Value::Array(
        fresh
            .iter()
            .map(|f| json!({"name": sig.name(f.pred), "arity": sig.arity(f.pred), "role": f.role, "source": f.source}))
            .collect(),
    )
}

impl NormalForm {
    /// Fresh-predicate provenance with `"format": 1`.
    pub fn provenance_json(&self) -> Value {
        json!({"format": 1, "m": self.m, "fresh": fresh_json(&self.sig, &self.fresh)})
    }
}

/// How the routing patterns of the spread normal form are encoded.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum WEncoding {
    /// Separate bits for every existential conjunct, with a reserved
    /// all-false pattern meaning "no demand". Complete for expansion.
    #[default]
    PerConjunct,
    /// One shared block of `ceil(log2((L+1)|S|))` bits holding full
    /// patterns. Every element satisfies exactly one pattern, so the output
    /// still implies the input, but expansion can fail.
    Shared,
}

/// `forall (mu -> exists (o & kappa & gamma))`; `o` is absent for equality
/// controls, whose witness is the element itself.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SpreadExist {
    pub mu: Formula,
    pub o: Option<PredId>,
    pub kappa: Control,
    pub gamma: ClauseSet,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SpreadNormalForm {
    pub sig: Signature,
    pub lambdas: Vec<Formula>,
    pub exist: Vec<SpreadExist>,
    pub univ: Vec<UnivConjunct>,
    pub omega: ClauseSet,
    /// The `o_i`; pairwise disjointness is part of the form.
    pub o_preds: Vec<PredId>,
    pub w_preds: Vec<PredId>,
    pub fresh: Vec<FreshPredicate>,
}

fn ceil_log2(x: usize) -> usize {
    if x <= 1 {
        0
    } else {
        (usize::BITS - (x - 1).leading_zeros()) as usize
    }
}

fn pattern(bits: &[PredId], code: usize) -> Formula {
    Formula::and(bits.iter().enumerate().map(|(b, &w)| Formula::lit(w, code >> b & 1 == 1)).collect())
}

/// Spreads the witnesses of a two-variable normal form, routing demands met
/// by a king of royal type `royal[l-1]` through patterns `w<i,l>`.
pub fn to_spread(nf: &NormalForm, royal: &[FlutedType], enc: WEncoding) -> Result<SpreadNormalForm, NormalFormError> {
    if nf.m != 2 {
        return Err(NormalFormError::NotTwoVariable(nf.m));
    }
    let unary = nf.sig.unary();
    for r in royal {
        let vocab: Vec<PredId> = r.lits.iter().map(|l| l.0).collect();
        if r.arity != 1 || vocab != unary {
            return Err(NormalFormError::BadRoyalType(r.display(&nf.sig)));
        }
    }
    let mut sig = nf.sig.clone();
    let mut fresh = nf.fresh.clone();
    let mut add = |sig: &mut Signature, base: &str, role: &'static str, source: String| {
        let p = sig.add_fresh(base, 1);
        fresh.push(FreshPredicate { pred: p, role, source });
        p
    };
    let l_count = royal.len();
    let spread: Vec<usize> = (0..nf.exist.len()).filter(|&i| !nf.exist[i].kappa.eq).collect();
    let mut w_preds = Vec::new();
    // Pattern for (conjunct i, route l); `None` routes are unused.
    let mut patterns: Vec<Vec<Formula>> = vec![Vec::new(); nf.exist.len()];
    match enc {
        WEncoding::PerConjunct => {
            let k = ceil_log2(l_count + 2);
            for &i in &spread {
                let bits: Vec<PredId> =
                    (0..k).map(|b| add(&mut sig, "w", "route bit", format!("conjunct {i} bit {b}"))).collect();
                w_preds.extend(&bits);
                patterns[i] = (0..=l_count).map(|l| pattern(&bits, l + 1)).collect();
            }
        }
        WEncoding::Shared => {
            let k = ceil_log2((l_count + 1) * spread.len());
            let bits: Vec<PredId> = (0..k).map(|b| add(&mut sig, "w", "route bit", format!("bit {b}"))).collect();
            w_preds.extend(&bits);
            for (n, &i) in spread.iter().enumerate() {
                patterns[i] = (0..=l_count).map(|l| pattern(&bits, n * (l_count + 1) + l)).collect();
            }
        }
    }
    let mut out = SpreadNormalForm {
        sig: sig.clone(),
        lambdas: royal.iter().map(FlutedType::to_formula).collect(),
        exist: Vec::new(),
        univ: Vec::new(),
        omega: nf.omega.clone(),
        o_preds: Vec::new(),
        w_preds,
        fresh: Vec::new(),
    };
    for (i, e) in nf.exist.iter().enumerate() {
        if e.kappa.eq {
            out.exist.push(SpreadExist { mu: e.mu.clone(), o: None, kappa: e.kappa, gamma: e.gamma.clone() });
            continue;
        }
        let o = add(&mut sig, "o", "spread witness", format!("conjunct {i}"));
        out.o_preds.push(o);
        let pats = &patterns[i];
        out.exist.push(SpreadExist { mu: pats[0].clone(), o: Some(o), kappa: e.kappa, gamma: e.gamma.clone() });
        for (l, pi) in royal.iter().enumerate() {
            let not_pi: Vec<Literal> = pi.lits.iter().map(|&(p, b)| Literal::new(p, !b)).collect();
            let mut delta = ClauseSet::new(2);
            let units = e.kappa.literals(&nf.sig).map(Clause::unit);
            for c in e.gamma.iter().chain(units.iter()) {
                if let Some(cl) = Clause::new(c.lits().iter().chain(&not_pi).copied().collect()) {
                    delta.clauses.insert(cl);
                }
            }
            out.univ.push(UnivConjunct { nu: pats[l + 1].clone(), delta });
        }
        let nu = Formula::and(vec![e.mu.clone(), nnf(&Formula::or(pats.clone()), false)]);
        out.univ.push(UnivConjunct { nu, delta: ClauseSet::from_clauses(2, [Clause::bottom()]) });
    }
    out.univ.extend(nf.univ.iter().cloned());
    out.sig = sig;
    out.fresh = fresh;
    Ok(out)
}

impl SpreadNormalForm {
    /// The existential conjuncts whose witnesses are spread.
    pub fn spread_count(&self) -> usize {
        self.o_preds.len()
    }

    /// Renders the spread form as a sentence.
    pub fn to_formula(&self) -> Formula {
        let mut cs: Vec<Formula> = self.lambdas.iter().map(|l| Formula::exists(l.clone())).collect();
        for e in &self.exist {
            let mut body = vec![e.kappa.to_formula(&self.sig), e.gamma.to_formula()];
            if let Some(o) = e.o {
                body.insert(0, Formula::atom(o));
            }
            cs.push(Formula::forall(Formula::implies(e.mu.clone(), Formula::exists(Formula::and(body)))));
        }
        for u in &self.univ {
            cs.push(Formula::forall(Formula::implies(u.nu.clone(), Formula::forall(u.delta.to_formula()))));
        }
        if !self.omega.is_empty() {
            cs.push(Formula::forall_n(2, self.omega.to_formula()));
        }
        for (a, &o) in self.o_preds.iter().enumerate() {
            for &o2 in &self.o_preds[a + 1..] {
                cs.push(Formula::forall(Formula::not(Formula::And(vec![Formula::atom(o), Formula::atom(o2)]))));
            }
        }
        Formula::and(cs)
    }

    pub fn provenance_json(&self) -> Value {
        json!({"format": 1, "m": 2, "fresh": fresh_json(&self.sig, &self.fresh)})
    }
}
