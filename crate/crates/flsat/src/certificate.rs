//! Certificates ⟨Ω, ≪, V⟩ for sets of basic formulas: condition checking,
//! satisfaction of basic formulas, extraction from quadratic structures and
//! SAT-based search.
//!
//! 1-types are stored once in [`Certificate::types`] and referred to by index.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::time::{Duration, Instant};

use serde_json::{json, Map, Value};
use thiserror::Error;
use varisat::{ExtendFormula, Lit, Solver};

use crate::basic_reduction::{check_basic_signature, enumerate_one_types, Basic, BasicSet};
use crate::semantics::{check_wellformed, cliques, is_quadratic, one_types, FlutedType, Structure};
use crate::syntax::{Formula, PredId, Signature};

/// Multiset of 1-types truncated at 2: type index to count in `{1, 2}`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CliqueType {
    pub counts: BTreeMap<usize, u8>,
}

impl CliqueType {
    pub fn get(&self, t: usize) -> u8 {
        self.counts.get(&t).copied().unwrap_or(0)
    }

    pub fn contains(&self, t: usize) -> bool {
        self.get(t) > 0
    }

    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.counts.iter().filter(|(_, &c)| c > 0).map(|(&t, _)| t)
    }
}

/// A clique-type together with the 1-types reachable outside the clique.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CliqueSuperType {
    pub xi: CliqueType,
    pub pi: BTreeSet<usize>,
}

/// A candidate certificate. `omega` is kept sorted and free of duplicates.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Certificate {
    pub sig: Signature,
    pub types: Vec<FlutedType>,
    pub omega: Vec<CliqueSuperType>,
    pub ll: BTreeSet<(usize, usize)>,
    pub v: BTreeSet<usize>,
}

#[derive(Debug, Error)]
pub enum CertificateError {
    #[error("structure is not quadratic")]
    NotQuadratic,
    #[error("structure is not well formed: {0}")]
    NotWellFormed(String),
    #[error("signature unsuitable for certificates: {0}")]
    BadSignature(String),
    #[error("malformed certificate JSON: {0}")]
    Json(String),
    #[error("SAT backend failed: {0}")]
    Solver(String),
    #[error("search produced a certificate that fails validation: {0}")]
    Unsound(String),
}

/// One violated condition with the witnessing tuple spelled out.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    /// `C1`..`C6`, `LL` (strict partial order) or `SHAPE`.
    pub condition: &'static str,
    pub detail: String,
}

/// Every violation found by [`check_conditions`].
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ConditionReport {
    pub violations: Vec<Violation>,
}

impl ConditionReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, condition: &str) -> bool {
        self.violations.iter().any(|v| v.condition == condition)
    }

    fn push(&mut self, condition: &'static str, detail: String) {
        self.violations.push(Violation { condition, detail });
    }
}

impl fmt::Display for ConditionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "all conditions hold");
        }
        for v in &self.violations {
            writeln!(f, "{}: {}", v.condition, v.detail)?;
        }
        Ok(())
    }
}

/// Options for [`cert_satisfies`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SatOptions {
    /// Read case 3(iii) as quantifying over super-types with `π ∈ Π`
    /// instead of `π ∈ ξ`.
    pub case3_literal: bool,
}

impl Certificate {
    /// Builds a certificate, sorting and deduplicating `omega`.
    pub fn new(
        sig: Signature,
        types: Vec<FlutedType>,
        omega: Vec<CliqueSuperType>,
        ll: BTreeSet<(usize, usize)>,
        v: BTreeSet<usize>,
    ) -> Self {
        let mut c = Certificate { sig, types, omega, ll, v };
        c.omega.sort();
        c.omega.dedup();
        c
    }

    pub fn index_of(&self, pi: &FlutedType) -> Option<usize> {
        self.types.iter().position(|t| t == pi)
    }

    /// `¬That` occurs in some 1-type of `xi`.
    pub fn is_soliton(&self, xi: &CliqueType) -> bool {
        let that = self.sig.that();
        xi.support().any(|t| that.is_some_and(|h| self.types[t].value(h) == Some(false)))
    }

    /// `xi ∩ V ≠ ∅`.
    pub fn meets_v(&self, xi: &CliqueType) -> bool {
        xi.support().any(|t| self.v.contains(&t))
    }

    /// Some super-type has `t` in its clique-type.
    pub fn occurs(&self, t: usize) -> bool {
        self.omega.iter().any(|s| s.xi.contains(t))
    }

    /// JSON: `{"types": [[bool..]], "omega": [{"xi": {idx: count}, "pi": [idx]}], "ll": [[i,j]], "v": [i]}`,
    /// literal vectors ordered as [`Signature::unary`].
    pub fn to_json(&self) -> Value {
        let unary = self.sig.unary();
        let types: Vec<Value> =
            self.types.iter().map(|t| Value::from(unary.iter().map(|&p| t.value(p) == Some(true)).collect::<Vec<_>>())).collect();
        let omega: Vec<Value> = self
            .omega
            .iter()
            .map(|s| {
                let xi: Map<String, Value> = s.xi.counts.iter().map(|(t, c)| (t.to_string(), json!(c))).collect();
                json!({"xi": xi, "pi": s.pi.iter().collect::<Vec<_>>()})
            })
            .collect();
        let ll: Vec<Value> = self.ll.iter().map(|&(a, b)| json!([a, b])).collect();
        json!({"types": types, "omega": omega, "ll": ll, "v": self.v.iter().collect::<Vec<_>>()})
    }

    pub fn from_json(v: &Value, sig: &Signature) -> Result<Certificate, CertificateError> {
        let bad = |m: &str| CertificateError::Json(m.to_string());
        let unary = sig.unary();
        let idx = |x: &Value| x.as_u64().map(|i| i as usize).ok_or_else(|| bad("expected an index"));
        let mut types = Vec::new();
        for t in v["types"].as_array().ok_or_else(|| bad("`types` must be an array"))? {
            let bits = t.as_array().ok_or_else(|| bad("a type must be an array of booleans"))?;
            if bits.len() != unary.len() {
                return Err(bad("type length differs from the number of unary predicates"));
            }
            let mut lits = Vec::new();
            for (&p, b) in unary.iter().zip(bits) {
                let b = b.as_bool().or_else(|| b.as_u64().map(|x| x != 0)).ok_or_else(|| bad("expected a boolean"))?;
                lits.push((p, b));
            }
            lits.sort();
            types.push(FlutedType { arity: 1, lits });
        }
        let mut omega = Vec::new();
        for s in v["omega"].as_array().ok_or_else(|| bad("`omega` must be an array"))? {
            let mut xi = CliqueType::default();
            for (k, c) in s["xi"].as_object().ok_or_else(|| bad("`xi` must be an object"))? {
                let t: usize = k.parse().map_err(|_| bad("`xi` keys must be indices"))?;
                let c = c.as_u64().ok_or_else(|| bad("counts must be integers"))?;
                xi.counts.insert(t, c.min(255) as u8);
            }
            let pi = s["pi"].as_array().ok_or_else(|| bad("`pi` must be an array"))?.iter().map(idx).collect::<Result<_, _>>()?;
            omega.push(CliqueSuperType { xi, pi });
        }
        let mut ll = BTreeSet::new();
        for p in v["ll"].as_array().ok_or_else(|| bad("`ll` must be an array"))? {
            let p = p.as_array().filter(|p| p.len() == 2).ok_or_else(|| bad("`ll` entries are pairs"))?;
            ll.insert((idx(&p[0])?, idx(&p[1])?));
        }
        let v = v["v"].as_array().ok_or_else(|| bad("`v` must be an array"))?.iter().map(idx).collect::<Result<_, _>>()?;
        Ok(Certificate::new(sig.clone(), types, omega, ll, v))
    }

    /// Human-readable rendering with 1-types spelled out.
    pub fn display(&self) -> String {
        let mut s = String::new();
        for (i, t) in self.types.iter().enumerate() {
            s.push_str(&format!("type #{i} = {}\n", t.display(&self.sig)));
        }
        for (k, o) in self.omega.iter().enumerate() {
            let xi: Vec<String> = o.xi.counts.iter().map(|(t, c)| format!("#{t}:{c}")).collect();
            let pi: Vec<String> = o.pi.iter().map(|t| format!("#{t}")).collect();
            s.push_str(&format!("omega[{k}] = ({{{}}}, {{{}}})\n", xi.join(", "), pi.join(", ")));
        }
        let ll: Vec<String> = self.ll.iter().map(|(a, b)| format!("#{a} << #{b}")).collect();
        let v: Vec<String> = self.v.iter().map(|t| format!("#{t}")).collect();
        s.push_str(&format!("ll = {{{}}}\nV = {{{}}}\n", ll.join(", "), v.join(", ")));
        s
    }
}

/// Lists every violation of (C1)-(C6), of `≪` being a strict partial order,
/// and of basic shape (indices in range, distinct 1-types, counts in {1,2}).
pub fn check_conditions(c: &Certificate) -> ConditionReport {
    let mut r = ConditionReport::default();
    let n = c.types.len();
    let unary = c.sig.unary();
    for (i, t) in c.types.iter().enumerate() {
        if t.arity != 1 || t.lits.iter().map(|l| l.0).collect::<Vec<_>>() != unary {
            r.push("SHAPE", format!("type #{i} is not a 1-type over the unary predicates"));
        }
        if c.types[..i].contains(t) {
            r.push("SHAPE", format!("type #{i} duplicates an earlier type"));
        }
    }
    let in_range = |t: usize| t < n;
    for (k, s) in c.omega.iter().enumerate() {
        if s.xi.support().next().is_none() {
            r.push("SHAPE", format!("omega[{k}] has an empty clique-type"));
        }
        for (&t, &cnt) in &s.xi.counts {
            if !in_range(t) || !(1..=2).contains(&cnt) {
                r.push("SHAPE", format!("omega[{k}] maps #{t} to {cnt}"));
            }
        }
        if let Some(t) = s.pi.iter().find(|&&t| !in_range(t)) {
            r.push("SHAPE", format!("omega[{k}] reaches unknown type #{t}"));
        }
    }
    if let Some(&(a, b)) = c.ll.iter().find(|&&(a, b)| !in_range(a) || !in_range(b)) {
        r.push("SHAPE", format!("ll mentions unknown pair (#{a}, #{b})"));
    }
    if let Some(t) = c.v.iter().find(|&&t| !in_range(t)) {
        r.push("SHAPE", format!("V mentions unknown type #{t}"));
    }
    if !r.is_empty() {
        return r;
    }

    for &(a, b) in &c.ll {
        if a == b {
            r.push("LL", format!("#{a} << #{a}"));
        }
        for &(b2, d) in c.ll.range((b, 0)..(b + 1, 0)) {
            debug_assert_eq!(b2, b);
            if !c.ll.contains(&(a, d)) {
                r.push("LL", format!("#{a} << #{b} << #{d} but not #{a} << #{d}"));
            }
        }
    }

    let subset = |a: &CliqueSuperType, big: &BTreeSet<usize>| a.xi.support().all(|t| big.contains(&t)) && a.pi.is_subset(big);
    for (k, s) in c.omega.iter().enumerate() {
        // (C1)
        for &p in &s.pi {
            let ok = c.omega.iter().any(|s2| {
                s2.xi.contains(p) && subset(s2, &s.pi) && !s.xi.support().any(|t| c.v.contains(&t) && s2.pi.contains(&t))
            });
            if !ok {
                r.push("C1", format!("omega[{k}] reaches #{p} but no super-type witnesses it"));
            }
        }
        // (C4)
        if c.is_soliton(&s.xi) {
            let sup: Vec<usize> = s.xi.support().collect();
            if sup.len() != 1 || s.xi.get(sup[0]) != 1 {
                r.push("C4", format!("omega[{k}] is a soliton clique-type but not a single 1-type with count 1"));
            }
        }
        for &(a, b) in &c.ll {
            // (C5)
            if s.xi.contains(b) && s.pi.contains(&a) {
                r.push("C5", format!("omega[{k}] contains #{b}, #{a} << #{b}, yet #{a} is reachable"));
            }
            // (C6)
            if s.xi.contains(a) && s.xi.contains(b) && !c.meets_v(&s.xi) {
                r.push("C6", format!("omega[{k}] contains #{a} << #{b} but no type of V"));
            }
        }
        for (k2, s2) in c.omega.iter().enumerate() {
            if k2 == k {
                continue;
            }
            // (C2)
            if let Some(&(a, b)) = c.ll.iter().find(|&&(a, b)| s.xi.contains(a) && s2.xi.contains(b)) {
                if !subset(s2, &s.pi) {
                    r.push("C2", format!("#{a} << #{b} from omega[{k}] to omega[{k2}] but omega[{k2}] is not reachable"));
                }
            }
            // (C3)
            if k < k2 {
                if let Some(t) = s.xi.support().find(|&t| s2.xi.contains(t) && c.v.contains(&t)) {
                    r.push("C3", format!("omega[{k}] and omega[{k2}] share #{t} of V"));
                }
            }
        }
    }
    r
}

/// The satisfaction relation between a certificate and a basic formula.
pub fn cert_satisfies(c: &Certificate, psi: &Basic, opts: SatOptions) -> bool {
    let ent = |t: usize, mu: &Formula| c.types[t].entails(mu);
    let holding = |pi: &FlutedType| -> Vec<&CliqueSuperType> {
        match c.index_of(pi) {
            Some(p) => c.omega.iter().filter(|s| s.xi.contains(p)).collect(),
            None => Vec::new(),
        }
    };
    match psi {
        Basic::B1 { pi, mu } => holding(pi).into_iter().all(|s| {
            let p = c.index_of(pi).expect("held");
            (ent(p, mu) && s.xi.get(p) == 2)
                || s.xi.support().any(|t| t != p && ent(t, mu))
                || s.pi.iter().any(|&t| ent(t, mu))
        }),
        Basic::B2 { pi, mu } => holding(pi).into_iter().all(|s| {
            c.omega.iter().any(|s2| {
                s2.xi.support().any(|t| ent(t, mu))
                    && !c.ll.iter().any(|&(a, b)| s.pi.contains(&a) && s2.xi.contains(b))
                    && !s2.xi.support().any(|t| s.pi.contains(&t) && c.v.contains(&t))
                    && (s2 != s || !c.meets_v(&s.xi))
            })
        }),
        Basic::B3 { pi, pi2 } => {
            let (Some(p), Some(q)) = (c.index_of(pi), c.index_of(pi2)) else { return true };
            if !c.occurs(p) || !c.occurs(q) || c.ll.contains(&(p, q)) {
                return true;
            }
            let first = |s: &CliqueSuperType| if opts.case3_literal { s.pi.contains(&p) } else { s.xi.contains(p) };
            c.omega.iter().filter(|s| first(s)).all(|s| {
                c.omega.iter().filter(|s2| s2.xi.contains(q)).all(|s2| s == s2 && c.meets_v(&s.xi))
            })
        }
        Basic::B4 { pi, pi2 } => {
            let q = c.index_of(pi2);
            holding(pi).into_iter().all(|s| q.is_none_or(|q| !s.xi.contains(q) && !s.pi.contains(&q)))
        }
        Basic::B5 { pi } => {
            let h = holding(pi);
            h.len() <= 1 && h.iter().all(|s| c.meets_v(&s.xi))
        }
        Basic::B6 { pi } => match c.index_of(pi) {
            Some(p) => c.omega.iter().all(|s| !(s.xi.contains(p) && s.pi.contains(&p)) && s.xi.get(p) <= 1),
            None => true,
        },
        Basic::B7 { mu } => c.omega.iter().all(|s| s.xi.support().all(|t| ent(t, mu))),
        Basic::B8 { mu } => c.omega.iter().any(|s| s.xi.support().any(|t| ent(t, mu))),
    }
}

/// The certificate of a quadratic, well-formed structure over a basic
/// signature.
pub fn certificate_of(s: &Structure) -> Result<Certificate, CertificateError> {
    let sig = s.sig();
    check_basic_signature(sig).map_err(|e| CertificateError::BadSignature(e.to_string()))?;
    let wf = check_wellformed(s);
    if !wf.is_empty() {
        return Err(CertificateError::NotWellFormed(wf.to_string()));
    }
    if !is_quadratic(s) {
        return Err(CertificateError::NotQuadratic);
    }
    let t = sig.distinguished().expect("T");
    let tys = one_types(s);
    let types: Vec<FlutedType> = tys.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect();
    let id: Vec<usize> = tys.iter().map(|x| types.iter().position(|y| y == x).expect("realized")).collect();
    let cp = cliques(s);
    let n = s.size();
    let mut omega = Vec::new();
    for a in 0..n {
        let mut xi = CliqueType::default();
        for &b in &cp.blocks[cp.block_of[a]] {
            let e = xi.counts.entry(id[b]).or_insert(0);
            *e = (*e + 1).min(2);
        }
        let pi = (0..n).filter(|&b| s.holds(t, &[a, b]) && !s.holds(t, &[b, a])).map(|b| id[b]).collect();
        omega.push(CliqueSuperType { xi, pi });
    }
    let all_t = |p: usize, q: usize| (0..n).all(|a| id[a] != p || (0..n).all(|b| id[b] != q || s.holds(t, &[a, b])));
    let mut ll = BTreeSet::new();
    for p in 0..types.len() {
        for q in 0..types.len() {
            if all_t(p, q) && !all_t(q, p) {
                ll.insert((p, q));
            }
        }
    }
    let mut blocks_of: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); types.len()];
    for a in 0..n {
        blocks_of[id[a]].insert(cp.block_of[a]);
    }
    let v = (0..types.len()).filter(|&p| blocks_of[p].len() == 1).collect();
    Ok(Certificate::new(sig.clone(), types, omega, ll, v))
}

/// Limits for [`search`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SearchBudget {
    /// Wall-clock limit, checked between deepening rounds.
    pub time: Option<Duration>,
}

impl Default for SearchBudget {
    fn default() -> Self {
        SearchBudget { time: Some(Duration::from_secs(60)) }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SearchStatus {
    Sat,
    UnsatAtCap,
    BudgetExhausted,
}

impl fmt::Display for SearchStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SearchStatus::Sat => "sat",
            SearchStatus::UnsatAtCap => "unsat_at_cap",
            SearchStatus::BudgetExhausted => "budget_exhausted",
        })
    }
}

#[derive(Clone, Debug)]
pub struct SearchOutcome {
    pub status: SearchStatus,
    pub certificate: Option<Certificate>,
    /// Largest `|Ω|` fully explored.
    pub explored: usize,
    /// Size of the candidate 1-type universe.
    pub universe: usize,
}

/// Largest candidate universe searched when proving unsatisfiability at a cap.
pub const UNIVERSE_LIMIT: usize = 160;

/// Full universes up to this size are searched directly.
const DIRECT_LIMIT: usize = 64;

/// The demand structure of a basic set: `B7` constraints, `B8` roots, and
/// the `B1`/`B2` witness formulas owed by each named type.
struct Demands {
    b7: Vec<Formula>,
    roots: Vec<Formula>,
    owed: BTreeMap<FlutedType, Vec<Formula>>,
    named: BTreeSet<FlutedType>,
    witness: Vec<Formula>,
}

impl Demands {
    fn new(phi: &BasicSet) -> Self {
        let mut d =
            Demands { b7: Vec::new(), roots: Vec::new(), owed: BTreeMap::new(), named: BTreeSet::new(), witness: Vec::new() };
        for b in &phi.formulas {
            match b {
                Basic::B7 { mu } => d.b7.push(mu.clone()),
                Basic::B1 { pi, mu } | Basic::B2 { pi, mu } => {
                    d.named.insert(pi.clone());
                    d.owed.entry(pi.clone()).or_default().push(mu.clone());
                    d.witness.push(mu.clone());
                }
                Basic::B8 { mu } => {
                    d.roots.push(mu.clone());
                    d.witness.push(mu.clone());
                }
                Basic::B3 { pi, pi2 } | Basic::B4 { pi, pi2 } => {
                    d.named.insert(pi.clone());
                    d.named.insert(pi2.clone());
                }
                Basic::B5 { pi } | Basic::B6 { pi } => {
                    d.named.insert(pi.clone());
                }
            }
        }
        d
    }

    fn allowed(&self, t: &FlutedType) -> bool {
        self.b7.iter().all(|m| t.entails(m))
    }

    /// Up to `pool` allowed types of each `That` polarity satisfying no
    /// witness formula. Such types are interchangeable, and a certificate
    /// never needs more than one of them per super-type.
    fn inert(&self, sig: &Signature, pool: usize) -> BTreeSet<FlutedType> {
        let mut out = BTreeSet::new();
        if let Some(h) = sig.that() {
            for polarity in [true, false] {
                let mut cs = self.b7.clone();
                cs.extend(self.witness.iter().map(|m| Formula::not(m.clone())));
                cs.push(Formula::lit(h, polarity));
                out.extend(enumerate_one_types(sig, &cs, pool));
            }
        }
        out
    }

    /// Closes `base` under demands, starting from the `B8` roots: each
    /// demand is given up to `width` satisfying types, and every added type
    /// brings its own demands.
    fn closure(&self, sig: &Signature, base: &BTreeSet<FlutedType>, width: usize) -> BTreeSet<FlutedType> {
        let mut u = base.clone();
        let mut queue: Vec<Formula> = self.roots.clone();
        for t in base {
            queue.extend(self.owed.get(t).into_iter().flatten().cloned());
        }
        let mut seen = BTreeSet::new();
        while let Some(mu) = queue.pop() {
            if !seen.insert(mu.clone()) {
                continue;
            }
            let have = u.iter().filter(|t| t.entails(&mu)).count();
            if have >= width {
                continue;
            }
            let mut cs = self.b7.clone();
            cs.push(mu);
            cs.extend(u.iter().map(|t| Formula::not(t.to_formula())));
            for t in enumerate_one_types(sig, &cs, width - have) {
                queue.extend(self.owed.get(&t).into_iter().flatten().cloned());
                u.insert(t);
            }
            if u.len() > UNIVERSE_LIMIT {
                break;
            }
        }
        u
    }

    /// Every allowed type that is named or satisfies a witness formula, plus
    /// `base`; `None` if there are more than [`UNIVERSE_LIMIT`].
    fn full(&self, sig: &Signature, base: &BTreeSet<FlutedType>) -> Option<BTreeSet<FlutedType>> {
        let mut u = base.clone();
        u.extend(self.named.iter().filter(|t| self.allowed(t)).cloned());
        let mut cs = self.b7.clone();
        cs.push(Formula::or(self.witness.clone()));
        u.extend(enumerate_one_types(sig, &cs, UNIVERSE_LIMIT + 1));
        (u.len() <= UNIVERSE_LIMIT).then_some(u)
    }
}

/// CNF encoding of "a certificate with exactly `k` distinct super-types over
/// `types` satisfies `phi`".
struct Encoding<'a> {
    solver: Solver<'a>,
    k: usize,
    n: usize,
    xin: Vec<Vec<Lit>>,
    two: Vec<Vec<Lit>>,
    pin: Vec<Vec<Lit>>,
    vv: Vec<Lit>,
    ll: Vec<Vec<Lit>>,
    /// `sub[a][b]` forces `ξ_a ∪ Π_a ⊆ Π_b`.
    sub: Vec<Vec<Lit>>,
    /// `disj[a][b]` forces `ξ_a ∩ V ∩ Π_b = ∅`.
    disj: Vec<Vec<Lit>>,
    /// `hasv[a]` forces `ξ_a ∩ V ≠ ∅`; `nov[a]` forces `ξ_a ∩ V = ∅`.
    hasv: Vec<Lit>,
    nov: Vec<Lit>,
    /// `noll[a][b]`: no `π ∈ Π_a`, `π' ∈ ξ_b` with `π ≪ π'`.
    noll: Vec<Vec<Lit>>,
    occ: Vec<Lit>,
}

impl<'a> Encoding<'a> {
    fn fresh(solver: &mut Solver<'a>) -> Lit {
        solver.new_var().positive()
    }

    fn grid(solver: &mut Solver<'a>, a: usize, b: usize) -> Vec<Vec<Lit>> {
        (0..a).map(|_| (0..b).map(|_| Self::fresh(solver)).collect()).collect()
    }

    fn new(types: &[FlutedType], that: Option<PredId>, k: usize) -> Self {
        let mut solver = Solver::new();
        let n = types.len();
        let xin = Self::grid(&mut solver, k, n);
        let two = Self::grid(&mut solver, k, n);
        let pin = Self::grid(&mut solver, k, n);
        let vv: Vec<Lit> = (0..n).map(|_| Self::fresh(&mut solver)).collect();
        let ll = Self::grid(&mut solver, n, n);
        let sub = Self::grid(&mut solver, k, k);
        let disj = Self::grid(&mut solver, k, k);
        let noll = Self::grid(&mut solver, k, k);
        let hasv: Vec<Lit> = (0..k).map(|_| Self::fresh(&mut solver)).collect();
        let nov: Vec<Lit> = (0..k).map(|_| Self::fresh(&mut solver)).collect();
        let occ: Vec<Lit> = (0..n).map(|_| Self::fresh(&mut solver)).collect();
        let mut e = Encoding { solver, k, n, xin, two, pin, vv, ll, sub, disj, hasv, nov, noll, occ };
        e.structure(types, that);
        e
    }

    fn clause(&mut self, c: &[Lit]) {
        self.solver.add_clause(c);
    }

    fn structure(&mut self, types: &[FlutedType], that: Option<PredId>) {
        let (k, n) = (self.k, self.n);
        for a in 0..k {
            for t in 0..n {
                self.clause(&[!self.two[a][t], self.xin[a][t]]);
                self.clause(&[!self.xin[a][t], self.occ[t]]);
            }
            let nonempty = self.xin[a].clone();
            self.clause(&nonempty);
        }
        // ≪ is a strict partial order.
        for a in 0..n {
            self.clause(&[!self.ll[a][a]]);
            for b in 0..n {
                for c in 0..n {
                    if a != b && b != c && a != c {
                        self.clause(&[!self.ll[a][b], !self.ll[b][c], self.ll[a][c]]);
                    }
                }
            }
        }
        // Auxiliary definitions (one direction suffices: used positively).
        for a in 0..k {
            for b in 0..k {
                for t in 0..n {
                    self.clause(&[!self.sub[a][b], !self.xin[a][t], self.pin[b][t]]);
                    self.clause(&[!self.sub[a][b], !self.pin[a][t], self.pin[b][t]]);
                    self.clause(&[!self.disj[a][b], !self.xin[a][t], !self.vv[t], !self.pin[b][t]]);
                    for u in 0..n {
                        if t != u {
                            self.clause(&[!self.noll[a][b], !self.pin[a][t], !self.xin[b][u], !self.ll[t][u]]);
                        }
                    }
                }
            }
            let mut c = vec![!self.hasv[a]];
            for t in 0..n {
                let y = Self::fresh(&mut self.solver);
                self.clause(&[!y, self.xin[a][t]]);
                self.clause(&[!y, self.vv[t]]);
                c.push(y);
                self.clause(&[!self.nov[a], !self.xin[a][t], !self.vv[t]]);
            }
            self.clause(&c);
        }
        // Pairwise distinct super-types.
        for a in 0..k {
            for b in a + 1..k {
                let mut diff = Vec::new();
                for t in 0..n {
                    for (x, y) in [(self.xin[a][t], self.xin[b][t]), (self.two[a][t], self.two[b][t]), (self.pin[a][t], self.pin[b][t])]
                    {
                        let d = Self::fresh(&mut self.solver);
                        self.clause(&[!d, x, y]);
                        self.clause(&[!d, !x, !y]);
                        diff.push(d);
                    }
                }
                self.clause(&diff);
            }
        }
        // (C1)
        for a in 0..k {
            for t in 0..n {
                let mut c = vec![!self.pin[a][t]];
                for b in 0..k {
                    let w = Self::fresh(&mut self.solver);
                    self.clause(&[!w, self.xin[b][t]]);
                    self.clause(&[!w, self.sub[b][a]]);
                    self.clause(&[!w, self.disj[a][b]]);
                    c.push(w);
                }
                self.clause(&c);
            }
        }
        // (C2), (C3)
        for a in 0..k {
            for b in 0..k {
                if a == b {
                    continue;
                }
                for t in 0..n {
                    for u in 0..n {
                        if t != u {
                            self.clause(&[!self.xin[a][t], !self.xin[b][u], !self.ll[t][u], self.sub[b][a]]);
                        }
                    }
                    if a < b {
                        self.clause(&[!self.xin[a][t], !self.xin[b][t], !self.vv[t]]);
                    }
                }
            }
        }
        // (C4)
        if let Some(h) = that {
            for t in (0..n).filter(|&t| types[t].value(h) == Some(false)) {
                for a in 0..k {
                    self.clause(&[!self.xin[a][t], !self.two[a][t]]);
                    for u in (0..n).filter(|&u| u != t) {
                        self.clause(&[!self.xin[a][t], !self.xin[a][u]]);
                    }
                }
            }
        }
        // (C5), (C6)
        for a in 0..k {
            for t in 0..n {
                for u in 0..n {
                    if t != u {
                        self.clause(&[!self.xin[a][u], !self.ll[t][u], !self.pin[a][t]]);
                        self.clause(&[!self.xin[a][t], !self.xin[a][u], !self.ll[t][u], self.hasv[a]]);
                    }
                }
            }
        }
    }

    fn formula(&mut self, types: &[FlutedType], psi: &Basic) {
        let (k, n) = (self.k, self.n);
        let idx = |pi: &FlutedType| types.iter().position(|t| t == pi);
        let sat = |mu: &Formula| -> Vec<usize> { (0..n).filter(|&t| types[t].entails(mu)).collect() };
        match psi {
            Basic::B1 { pi, mu } => {
                let Some(p) = idx(pi) else { return };
                let good = sat(mu);
                for a in 0..k {
                    let mut c = vec![!self.xin[a][p]];
                    if good.contains(&p) {
                        c.push(self.two[a][p]);
                    }
                    c.extend(good.iter().filter(|&&t| t != p).map(|&t| self.xin[a][t]));
                    c.extend(good.iter().map(|&t| self.pin[a][t]));
                    self.clause(&c);
                }
            }
            Basic::B2 { pi, mu } => {
                let Some(p) = idx(pi) else { return };
                let good = sat(mu);
                for a in 0..k {
                    let mut c = vec![!self.xin[a][p]];
                    for b in 0..k {
                        let w = Self::fresh(&mut self.solver);
                        let mut has = vec![!w];
                        has.extend(good.iter().map(|&t| self.xin[b][t]));
                        self.clause(&has);
                        self.clause(&[!w, self.noll[a][b]]);
                        self.clause(&[!w, self.disj[b][a]]);
                        if a == b {
                            self.clause(&[!w, self.nov[a]]);
                        }
                        c.push(w);
                    }
                    self.clause(&c);
                }
            }
            Basic::B3 { pi, pi2 } => {
                let (Some(p), Some(q)) = (idx(pi), idx(pi2)) else { return };
                let iii = Self::fresh(&mut self.solver);
                self.clause(&[!self.occ[p], !self.occ[q], self.ll[p][q], iii]);
                for a in 0..k {
                    for b in 0..k {
                        if a != b {
                            self.clause(&[!iii, !self.xin[a][p], !self.xin[b][q]]);
                        }
                    }
                    self.clause(&[!iii, !self.xin[a][p], !self.xin[a][q], self.hasv[a]]);
                }
            }
            Basic::B4 { pi, pi2 } => {
                let (Some(p), Some(q)) = (idx(pi), idx(pi2)) else { return };
                for a in 0..k {
                    self.clause(&[!self.xin[a][p], !self.xin[a][q]]);
                    self.clause(&[!self.xin[a][p], !self.pin[a][q]]);
                }
            }
            Basic::B5 { pi } => {
                let Some(p) = idx(pi) else { return };
                for a in 0..k {
                    self.clause(&[!self.xin[a][p], self.hasv[a]]);
                    for b in a + 1..k {
                        self.clause(&[!self.xin[a][p], !self.xin[b][p]]);
                    }
                }
            }
            Basic::B6 { pi } => {
                let Some(p) = idx(pi) else { return };
                for a in 0..k {
                    self.clause(&[!self.xin[a][p], !self.pin[a][p]]);
                    self.clause(&[!self.two[a][p]]);
                }
            }
            Basic::B7 { mu } => {
                for t in (0..n).filter(|&t| !types[t].entails(mu)) {
                    for a in 0..k {
                        self.clause(&[!self.xin[a][t]]);
                    }
                }
            }
            Basic::B8 { mu } => {
                let good = sat(mu);
                let c: Vec<Lit> = (0..k).flat_map(|a| good.iter().map(move |&t| (a, t))).map(|(a, t)| self.xin[a][t]).collect();
                self.clause(&c);
            }
        }
    }

    fn decode(&self, sig: &Signature, types: &[FlutedType], model: &[Lit]) -> Certificate {
        let truth: BTreeSet<Lit> = model.iter().copied().filter(|l| l.is_positive()).collect();
        let val = |l: Lit| truth.contains(&l);
        let used: BTreeSet<usize> = (0..self.n).filter(|&t| (0..self.k).any(|a| val(self.xin[a][t]))).collect();
        let map: BTreeMap<usize, usize> = used.iter().enumerate().map(|(i, &t)| (t, i)).collect();
        let omega = (0..self.k)
            .map(|a| {
                let mut xi = CliqueType::default();
                for &t in &used {
                    if val(self.xin[a][t]) {
                        xi.counts.insert(map[&t], if val(self.two[a][t]) { 2 } else { 1 });
                    }
                }
                let pi = used.iter().filter(|&&t| val(self.pin[a][t])).map(|t| map[t]).collect();
                CliqueSuperType { xi, pi }
            })
            .collect();
        let ll = used
            .iter()
            .flat_map(|&t| used.iter().map(move |&u| (t, u)))
            .filter(|&(t, u)| t != u && val(self.ll[t][u]))
            .map(|(t, u)| (map[&t], map[&u]))
            .collect();
        let v = used.iter().filter(|&&t| val(self.vv[t])).map(|t| map[t]).collect();
        let tys = used.iter().map(|&t| types[t].clone()).collect();
        Certificate::new(sig.clone(), tys, omega, ll, v)
    }
}

/// Iterative deepening on `|Ω|` up to `max_omega`, each round a SAT query,
/// over a universe of candidate 1-types. Small universes are searched whole;
/// otherwise the universe starts as the
/// demand closure from the `B8` roots and widens until it stops growing; a
/// negative answer is then confirmed over every named or witnessing type.
/// If that full universe exceeds [`UNIVERSE_LIMIT`] the status is
/// `BudgetExhausted`. Every returned certificate passes [`check_conditions`]
/// and satisfies every formula of `phi`.
pub fn search(phi: &BasicSet, max_omega: usize, budget: SearchBudget) -> Result<SearchOutcome, CertificateError> {
    check_basic_signature(&phi.sig).map_err(|e| CertificateError::BadSignature(e.to_string()))?;
    let start = Instant::now();
    let sig = &phi.sig;
    let demands = Demands::new(phi);
    let unmet = |mu: &Formula| {
        let mut cs = demands.b7.clone();
        cs.push(mu.clone());
        enumerate_one_types(sig, &cs, 1).is_empty()
    };
    if demands.roots.iter().any(unmet) {
        return Ok(SearchOutcome { status: SearchStatus::UnsatAtCap, certificate: None, explored: max_omega, universe: 0 });
    }
    let inert = demands.inert(sig, max_omega);
    let small = demands.full(sig, &inert).filter(|u| u.len() <= DIRECT_LIMIT);
    let mut previous: Option<BTreeSet<FlutedType>> = None;
    let mut width = 1;
    loop {
        let grown = match &small {
            Some(u) => u.clone(),
            None => demands.closure(sig, &inert, width),
        };
        let saturated = small.is_some() || previous.as_ref() == Some(&grown);
        let (universe, last) = if saturated || grown.len() > UNIVERSE_LIMIT {
            match demands.full(sig, &grown) {
                Some(u) => (u, true),
                None => {
                    let out = SearchOutcome { status: SearchStatus::BudgetExhausted, certificate: None, explored: 0, universe: grown.len() };
                    return Ok(out);
                }
            }
        } else {
            (grown.clone(), false)
        };
        let types: Vec<FlutedType> = universe.into_iter().collect();
        let mut explored = 0;
        for k in 1..=max_omega {
            if budget.time.is_some_and(|t| start.elapsed() > t) {
                return Ok(SearchOutcome { status: SearchStatus::BudgetExhausted, certificate: None, explored, universe: types.len() });
            }
            let mut enc = Encoding::new(&types, sig.that(), k);
            for psi in &phi.formulas {
                enc.formula(&types, psi);
            }
            if enc.solver.solve().map_err(|e| CertificateError::Solver(e.to_string()))? {
                let model = enc.solver.model().expect("model after sat");
                let cert = enc.decode(sig, &types, &model);
                validate(&cert, phi)?;
                return Ok(SearchOutcome { status: SearchStatus::Sat, certificate: Some(cert), explored: k, universe: types.len() });
            }
            explored = k;
        }
        if last {
            return Ok(SearchOutcome { status: SearchStatus::UnsatAtCap, certificate: None, explored, universe: types.len() });
        }
        previous = Some(grown);
        width *= 2;
    }
}

/// Both validators; the error names the first failure.
pub fn validate(c: &Certificate, phi: &BasicSet) -> Result<(), CertificateError> {
    let report = check_conditions(c);
    if !report.is_empty() {
        return Err(CertificateError::Unsound(report.to_string()));
    }
    if let Some(psi) = phi.formulas.iter().find(|psi| !cert_satisfies(c, psi, SatOptions::default())) {
        return Err(CertificateError::Unsound(format!("not satisfied: {}", psi.to_line(&phi.sig))));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse_header;

    fn that_sig() -> Signature {
        parse_header("sig { } trans { T } eq").unwrap()
    }

    fn pi_minus(sig: &Signature) -> FlutedType {
        FlutedType { arity: 1, lits: vec![(sig.that().unwrap(), false)] }
    }

    fn minus_cert(count: u8) -> Certificate {
        let sig = that_sig();
        let xi = CliqueType { counts: [(0, count)].into() };
        let omega = vec![CliqueSuperType { xi, pi: [0].into() }];
        Certificate::new(sig.clone(), vec![pi_minus(&sig)], omega, BTreeSet::new(), BTreeSet::new())
    }

    #[test]
    fn pi_minus_certificate_conditions() {
        assert!(check_conditions(&minus_cert(1)).is_empty());
        let r = check_conditions(&minus_cert(2));
        assert!(r.has("C4"), "{r}");
    }

    #[test]
    fn missing_c1_witness_reported() {
        let sig = parse_header("sig { p/1 } trans { T } eq").unwrap();
        let tys = crate::basic_reduction::all_one_types(&sig);
        let xi = CliqueType { counts: [(3, 1)].into() };
        let omega = vec![CliqueSuperType { xi, pi: [1].into() }];
        let c = Certificate::new(sig, tys, omega, BTreeSet::new(), BTreeSet::new());
        assert!(check_conditions(&c).has("C1"));
    }

    #[test]
    fn satisfaction_cases_on_pi_minus() {
        let c = minus_cert(1);
        let sig = &c.sig;
        let pm = pi_minus(sig);
        let h = sig.that().unwrap();
        let b1 = Basic::B1 { pi: pm.clone(), mu: Formula::True };
        assert!(cert_satisfies(&c, &b1, SatOptions::default()));
        let b7 = Basic::B7 { mu: Formula::lit(h, false) };
        assert!(cert_satisfies(&c, &b7, SatOptions::default()));
        let b6 = Basic::B6 { pi: pm };
        assert!(!cert_satisfies(&c, &b6, SatOptions::default()));
    }

    #[test]
    fn literal_case3_reading_accepts_a_false_b3() {
        // Two unrelated solitons of different types: B3 fails in the structure.
        let sig = parse_header("sig { p/1 } trans { T } eq").unwrap();
        let p = sig.lookup("p").unwrap();
        let mut s = Structure::new(sig.clone(), 2);
        s.set(p, &[0], true);
        let c = certificate_of(&s).unwrap();
        let types = crate::semantics::one_types(&s);
        let psi = Basic::B3 { pi: types[0].clone(), pi2: types[1].clone() };
        assert!(!crate::eval(&s, &psi.to_formula(&sig), &[]).unwrap());
        assert!(!cert_satisfies(&c, &psi, SatOptions::default()));
        assert!(cert_satisfies(&c, &psi, SatOptions { case3_literal: true }));
    }

    #[test]
    fn extraction_examples() {
        let sig = parse_header("sig { p/1 } trans { T } eq").unwrap();
        let (t, p) = (sig.distinguished().unwrap(), sig.lookup("p").unwrap());
        let mut s = Structure::new(sig.clone(), 2);
        for a in 0..2 {
            for b in 0..2 {
                s.set(t, &[a, b], true);
            }
        }
        let c = certificate_of(&s).unwrap();
        assert_eq!(c.omega, vec![CliqueSuperType { xi: CliqueType { counts: [(0, 2)].into() }, pi: BTreeSet::new() }]);
        assert!(c.ll.is_empty());
        assert_eq!(c.v, [0].into());
        assert!(check_conditions(&c).is_empty());

        // Two cliques: a p-clique below a ¬p-clique.
        let mut s = Structure::new(sig.clone(), 2);
        s.set(p, &[0], true);
        for (a, b) in [(0, 0), (1, 1), (0, 1)] {
            s.set(t, &[a, b], true);
        }
        let c = certificate_of(&s).unwrap();
        let ip = c.types.iter().position(|x| x.value(p) == Some(true)).unwrap();
        assert_eq!(c.ll, [(ip, 1 - ip)].into());
        assert!(check_conditions(&c).is_empty());
    }

    #[test]
    fn search_trivial_examples() {
        let sig = parse_header("sig { p/1 } trans { T } eq").unwrap();
        let p = sig.lookup("p").unwrap();
        let mut phi = BasicSet::new(sig).unwrap();
        phi.formulas.push(Basic::B8 { mu: Formula::atom(p) });
        let out = search(&phi, 3, SearchBudget::default()).unwrap();
        assert_eq!(out.status, SearchStatus::Sat);
        assert_eq!(out.certificate.unwrap().omega.len(), 1);
        phi.formulas.push(Basic::B7 { mu: Formula::not(Formula::atom(p)) });
        let out = search(&phi, 3, SearchBudget::default()).unwrap();
        assert_eq!(out.status, SearchStatus::UnsatAtCap);
    }

    #[test]
    fn json_round_trip() {
        let c = minus_cert(1);
        let back = Certificate::from_json(&c.to_json(), &c.sig).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn phi1_search_finds_soliton_chain_certificate() {
        use crate::basic_reduction::{quadratic_transform, spread_to_basic};
        use crate::normal_form::{to_normal_form, to_spread, WEncoding};
        let (sig, f) = crate::parse_file("sig { } trans { T } eq\n(forall exists T & forall forall (T -> !=))").unwrap();
        let nf = to_normal_form(&sig, &f, 2).unwrap();
        let snf = to_spread(&nf, &[], WEncoding::default()).unwrap();
        let q = quadratic_transform(&spread_to_basic(&snf));
        let out = search(&q.set, 4, SearchBudget::default()).unwrap();
        assert_eq!(out.status, SearchStatus::Sat);
        let c = out.certificate.unwrap();
        let h = c.sig.that().unwrap();
        // Every proper clique is a soliton reaching itself.
        for s in &c.omega {
            for t in s.xi.support().filter(|&t| q.is_proper(&c.types[t])) {
                assert_eq!(c.types[t].value(h), Some(false));
                assert!(s.pi.contains(&t));
            }
        }
    }
}
