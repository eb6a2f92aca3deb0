//! Fluted clauses, maximal ordinary resolution, saturation and type extension.
//!
//! Inside a fluted `m`-clause every predicate determines its atom (it reads
//! the last `arity` variables), so a literal is a predicate with a sign and
//! clauses are handled propositionally.

use std::collections::BTreeSet;

use crate::semantics::FlutedType;
use crate::syntax::{Formula, PredId, PredKind, Signature};

/// A fluted literal.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Literal {
    pub pred: PredId,
    pub positive: bool,
}

impl Literal {
    pub fn new(pred: PredId, positive: bool) -> Self {
        Literal { pred, positive }
    }

    pub fn negate(self) -> Self {
        Literal { pred: self.pred, positive: !self.positive }
    }

    pub fn to_formula(self) -> Formula {
        Formula::lit(self.pred, self.positive)
    }
}

/// A non-tautological disjunction of fluted literals; empty means false.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Clause {
    lits: Vec<Literal>,
}

impl Clause {
    /// Sorted, deduplicated clause, or `None` for a tautology.
    pub fn new(mut lits: Vec<Literal>) -> Option<Clause> {
        lits.sort();
        lits.dedup();
        if lits.windows(2).any(|w| w[0].pred == w[1].pred) {
            return None;
        }
        Some(Clause { lits })
    }

    /// The empty clause.
    pub fn bottom() -> Clause {
        Clause { lits: Vec::new() }
    }

    pub fn unit(l: Literal) -> Clause {
        Clause { lits: vec![l] }
    }

    pub fn lits(&self) -> &[Literal] {
        &self.lits
    }

    pub fn is_bottom(&self) -> bool {
        self.lits.is_empty()
    }

    pub fn contains(&self, l: Literal) -> bool {
        self.lits.binary_search(&l).is_ok()
    }

    /// Every literal of `self` occurs in `other`.
    pub fn subsumes(&self, other: &Clause) -> bool {
        self.lits.iter().all(|l| other.contains(*l))
    }

    pub fn to_formula(&self) -> Formula {
        Formula::or(self.lits.iter().map(|l| l.to_formula()).collect())
    }

    /// Kleene value under a partial valuation.
    pub fn eval(&self, val: &mut impl FnMut(PredId) -> Option<bool>) -> Option<bool> {
        let mut unknown = false;
        for l in &self.lits {
            match val(l.pred) {
                Some(b) if b == l.positive => return Some(true),
                None => unknown = true,
                _ => {}
            }
        }
        if unknown {
            None
        } else {
            Some(false)
        }
    }

    /// Largest predicate arity in the clause (0 for the empty clause).
    pub fn max_arity(&self, sig: &Signature) -> usize {
        self.lits.iter().map(|l| sig.arity(l.pred)).max().unwrap_or(0)
    }

    /// Mentions an ordinary predicate of arity `m`.
    pub fn has_ordinary_of_arity(&self, sig: &Signature, m: usize) -> bool {
        self.lits.iter().any(|l| sig.kind(l.pred) == PredKind::Ordinary && sig.arity(l.pred) == m)
    }

    /// `{a+, r-}`.
    pub fn display(&self, sig: &Signature) -> String {
        let parts: Vec<String> =
            self.lits.iter().map(|l| format!("{}{}", sig.name(l.pred), if l.positive { "+" } else { "-" })).collect();
        format!("{{{}}}", parts.join(", "))
    }
}

/// A set of fluted `m`-clauses, read as their conjunction.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct ClauseSet {
    pub m: usize,
    pub clauses: BTreeSet<Clause>,
}

impl ClauseSet {
    pub fn new(m: usize) -> Self {
        ClauseSet { m, clauses: BTreeSet::new() }
    }

    pub fn from_clauses(m: usize, clauses: impl IntoIterator<Item = Clause>) -> Self {
        ClauseSet { m, clauses: clauses.into_iter().collect() }
    }

    pub fn contains_bottom(&self) -> bool {
        self.clauses.contains(&Clause::bottom())
    }

    pub fn len(&self) -> usize {
        self.clauses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clauses.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Clause> {
        self.clauses.iter()
    }

    pub fn union(&self, other: &ClauseSet) -> ClauseSet {
        ClauseSet { m: self.m.max(other.m), clauses: self.clauses.union(&other.clauses).cloned().collect() }
    }

    /// Conjunction of the clauses.
    pub fn to_formula(&self) -> Formula {
        Formula::and(self.clauses.iter().map(Clause::to_formula).collect())
    }

    /// Kleene value of the conjunction under a partial valuation.
    pub fn eval(&self, val: &mut impl FnMut(PredId) -> Option<bool>) -> Option<bool> {
        let mut unknown = false;
        for c in &self.clauses {
            match c.eval(val) {
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

    /// Some clause has every literal falsified by the partial valuation.
    pub fn violated_by(&self, val: &mut impl FnMut(PredId) -> Option<bool>) -> bool {
        self.eval(val) == Some(false)
    }

    /// Removes clauses subsumed by another clause of the set.
    pub fn reduce_subsumed(&self) -> ClauseSet {
        let list: Vec<&Clause> = self.clauses.iter().collect();
        let keep = list
            .iter()
            .enumerate()
            .filter(|(i, c)| {
                !list.iter().enumerate().any(|(j, d)| j != *i && d.subsumes(c) && (d.lits.len() < c.lits.len() || j < *i))
            })
            .map(|(_, c)| (*c).clone())
            .collect();
        ClauseSet { m: self.m, clauses: keep }
    }

    /// Display as `{{a+, b-}, {T+}}`.
    pub fn display(&self, sig: &Signature) -> String {
        let parts: Vec<String> = self.clauses.iter().map(|c| c.display(sig)).collect();
        format!("{{{}}}", parts.join(", "))
    }
}

/// Maximal ordinary resolvent of `g` and `d`: resolves on an ordinary atom
/// positive in `g`, negative in `d`, and of maximum arity among the
/// predicates of `g` and among those of `d`. Returns `None` when no such atom
/// exists or the resolvent is a tautology.
pub fn mo_resolve(sig: &Signature, g: &Clause, d: &Clause) -> Option<Clause> {
    let (mg, md) = (g.max_arity(sig), d.max_arity(sig));
    for l in &g.lits {
        if !l.positive || sig.kind(l.pred) != PredKind::Ordinary {
            continue;
        }
        let a = sig.arity(l.pred);
        if a != mg || a != md || !d.contains(l.negate()) {
            continue;
        }
        let lits: Vec<Literal> = g
            .lits
            .iter()
            .filter(|x| x.pred != l.pred)
            .chain(d.lits.iter().filter(|x| x.pred != l.pred))
            .copied()
            .collect();
        return Clause::new(lits);
    }
    None
}

/// Closure of `gamma` under maximal ordinary resolution; tautologies are
/// never produced.
pub fn saturate(sig: &Signature, gamma: &ClauseSet) -> ClauseSet {
    let mut all: Vec<Clause> = gamma.clauses.iter().cloned().collect();
    let mut seen: BTreeSet<Clause> = gamma.clauses.clone();
    let mut next = 0;
    while next < all.len() {
        let c = all[next].clone();
        for k in 0..=next {
            let d = all[k].clone();
            for r in [mo_resolve(sig, &c, &d), mo_resolve(sig, &d, &c)].into_iter().flatten() {
                if seen.insert(r.clone()) {
                    all.push(r);
                }
            }
        }
        next += 1;
    }
    ClauseSet { m: gamma.m, clauses: seen }
}

/// Drops every clause mentioning an ordinary predicate of arity `m`.
pub fn restrict(sig: &Signature, gstar: &ClauseSet) -> ClauseSet {
    let m = gstar.m;
    let clauses = gstar.clauses.iter().filter(|c| !c.has_ordinary_of_arity(sig, m)).cloned().collect();
    ClauseSet { m: if m > 2 { m - 1 } else { m }, clauses }
}

/// Vocabulary of fluted `m`-types over `sig` that omits ordinary `m`-ary predicates.
pub fn restricted_vocabulary(sig: &Signature, m: usize) -> Vec<PredId> {
    sig.eligible(m)
        .into_iter()
        .filter(|&p| !(sig.kind(p) == PredKind::Ordinary && sig.arity(p) == m))
        .collect()
}

/// Extends `tau`, a type over the vocabulary without ordinary `m`-ary
/// predicates, to a full `m`-type consistent with `gamma`. Ordinary `m`-ary
/// predicates are decided in (arity, name) order, positive first. Returns
/// `None` iff `tau` violates the restricted saturation.
pub fn extend_type(sig: &Signature, gamma: &ClauseSet, tau: &FlutedType) -> Option<FlutedType> {
    let gstar = saturate(sig, gamma);
    extend_type_saturated(sig, &gstar, tau)
}

/// [`extend_type`] with a precomputed saturation.
pub fn extend_type_saturated(sig: &Signature, gstar: &ClauseSet, tau: &FlutedType) -> Option<FlutedType> {
    let m = gstar.m.max(tau.arity);
    let mut open: Vec<PredId> = sig
        .eligible(m)
        .into_iter()
        .filter(|&p| sig.kind(p) == PredKind::Ordinary && sig.arity(p) == m && tau.value(p).is_none())
        .collect();
    open.sort_by(|&a, &b| (sig.arity(a), sig.name(a)).cmp(&(sig.arity(b), sig.name(b))));
    let mut assigned: Vec<(PredId, bool)> = tau.lits.clone();
    let violated = |assigned: &[(PredId, bool)]| {
        gstar.violated_by(&mut |p| assigned.iter().find(|l| l.0 == p).map(|l| l.1))
    };
    if violated(&assigned) {
        return None;
    }
    for &p in &open {
        assigned.push((p, true));
        if violated(&assigned) {
            assigned.pop();
            assigned.push((p, false));
            if violated(&assigned) {
                return None;
            }
        }
    }
    assigned.sort();
    Some(FlutedType { arity: m, lits: assigned })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse_header;

    fn setup() -> (Signature, PredId, PredId, PredId, PredId, PredId) {
        let sig = parse_header("sig { a/1, b/1, r/2, s/2 } trans { T } eq").unwrap();
        let id = |n: &str| sig.lookup(n).unwrap();
        let (a, b, r, s, t) = (id("a"), id("b"), id("r"), id("s"), id("T"));
        (sig, a, b, r, s, t)
    }

    fn cl(lits: &[(PredId, bool)]) -> Clause {
        Clause::new(lits.iter().map(|&(p, b)| Literal::new(p, b)).collect()).unwrap()
    }

    #[test]
    fn resolvent_examples() {
        let (sig, a, b, r, s, t) = setup();
        let g = cl(&[(a, true), (r, true)]);
        let d = cl(&[(b, true), (r, false)]);
        assert_eq!(mo_resolve(&sig, &g, &d), Some(cl(&[(a, true), (b, true)])));
        let d2 = cl(&[(a, false), (s, true)]);
        assert_eq!(mo_resolve(&sig, &g, &d2), None);
        assert_eq!(mo_resolve(&sig, &cl(&[(t, true)]), &cl(&[(t, false)])), None);
    }

    #[test]
    fn saturation_examples() {
        let (sig, a, b, r, _, t) = setup();
        let gamma = ClauseSet::from_clauses(2, [cl(&[(a, true), (r, true)]), cl(&[(b, true), (r, false)])]);
        let star = saturate(&sig, &gamma);
        assert_eq!(star.len(), 3);
        assert!(star.clauses.contains(&cl(&[(a, true), (b, true)])));
        assert_eq!(restrict(&sig, &star).clauses, [cl(&[(a, true), (b, true)])].into_iter().collect());
        let fixed = ClauseSet::from_clauses(2, [cl(&[(a, true)]), cl(&[(t, true)])]);
        assert_eq!(saturate(&sig, &fixed), fixed);
        let contra = ClauseSet::from_clauses(2, [cl(&[(r, true)]), cl(&[(r, false)])]);
        assert!(saturate(&sig, &contra).contains_bottom());
        let mixed = ClauseSet::from_clauses(2, [cl(&[(t, true), (r, true)])]);
        assert!(restrict(&sig, &mixed).is_empty());
        let only_t = ClauseSet::from_clauses(2, [cl(&[(t, true)])]);
        assert_eq!(restrict(&sig, &only_t), only_t);
    }

    #[test]
    fn type_extension_examples() {
        let (sig, a, b, r, s, _) = setup();
        let gamma = ClauseSet::from_clauses(2, [cl(&[(r, true), (a, true)]), cl(&[(r, false), (b, true)])]);
        let vocab = restricted_vocabulary(&sig, 2);
        let tau = FlutedType {
            arity: 2,
            lits: vocab.iter().map(|&p| (p, p == a)).collect(),
        };
        let plus = extend_type(&sig, &gamma, &tau).unwrap();
        assert_eq!(plus.value(r), Some(false));
        assert_eq!(plus.value(s), Some(true));
        let bad = FlutedType { arity: 2, lits: vocab.iter().map(|&p| (p, false)).collect() };
        assert!(extend_type(&sig, &gamma, &bad).is_none());
        let plain = ClauseSet::from_clauses(2, [cl(&[(a, true)])]);
        let tau2 = FlutedType { arity: 2, lits: vocab.iter().map(|&p| (p, true)).collect() };
        let ext = extend_type(&sig, &plain, &tau2).unwrap();
        assert_eq!(ext.restrict(|p| vocab.contains(&p)), tau2);
    }

    #[test]
    fn subsumption_reduction() {
        let (_, a, b, _, _, _) = setup();
        let set = ClauseSet::from_clauses(1, [cl(&[(a, true)]), cl(&[(a, true), (b, true)])]);
        assert_eq!(set.reduce_subsumed().clauses, [cl(&[(a, true)])].into_iter().collect());
    }
}
