//! Minimal covers, the reduction of an `(m+1)`-variable normal form to an
//! `m`-variable one, and the end-to-end solve loop.

use std::time::{Duration, Instant};

use serde_json::{json, Value};
use thiserror::Error;

use crate::basic_reduction::{allowed_one_types, quadratic_transform, spread_to_basic, BasicError, BasicSet, QuadraticSet};
use crate::certificate::{search, Certificate, CertificateError, SearchBudget, SearchStatus};
use crate::model_synthesis::{synthesize, verify_prefix, PrefixReport, SynthesisError, SynthesizedPrefix};
use crate::normal_form::{
    to_normal_form, to_spread, NormalForm, NormalFormError, SpreadNormalForm, WEncoding,
};
use crate::resolution::{restrict, saturate, Clause, ClauseSet};
use crate::semantics::FlutedType;
use crate::syntax::{validate, Formula, PredId, Signature};

/// Default bound on `|I|` for [`minimal_covers`].
pub const DEFAULT_COVER_BOUND: usize = 4;

/// Cells of a minimal cover, each sorted, listed in lexicographic order.
/// Covers are ordered by number of cells, then lexicographically.
pub type MinimalCover = Vec<Vec<usize>>;

#[derive(Debug, Error)]
pub enum MultivarError {
    #[error("index set of size {size} exceeds the bound {bound}")]
    IndexSetTooLarge { size: usize, bound: usize },
    #[error("a two-variable normal form cannot be reduced further")]
    NotReducible,
    #[error(transparent)]
    NormalForm(#[from] NormalFormError),
    #[error(transparent)]
    Basic(#[from] BasicError),
    #[error(transparent)]
    Certificate(#[from] CertificateError),
    #[error(transparent)]
    Synthesis(#[from] SynthesisError),
    #[error("not a sentence: {0}")]
    Validation(String),
}

/// All minimal covers of `set`: covers in which every cell owns an element
/// no other cell contains. The empty set has the single empty cover.
pub fn minimal_covers(set: &[usize], bound: usize) -> Result<Vec<MinimalCover>, MultivarError> {
    let mut items = set.to_vec();
    items.sort_unstable();
    items.dedup();
    let n = items.len();
    if n > bound {
        return Err(MultivarError::IndexSetTooLarge { size: n, bound });
    }
    let masks: Vec<u32> = (1u32..1 << n).collect();
    let full = (1u32 << n) - 1;
    let mut out: Vec<MinimalCover> = Vec::new();
    let mut chosen: Vec<u32> = Vec::new();
    fn rec(masks: &[u32], start: usize, full: u32, n: usize, chosen: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        let union = chosen.iter().fold(0, |a, &b| a | b);
        if union == full {
            let minimal = (0..chosen.len()).all(|i| {
                let others = chosen.iter().enumerate().filter(|&(j, _)| j != i).fold(0, |a, (_, &b)| a | b);
                others != full
            });
            if minimal {
                out.push(chosen.clone());
            }
            return;
        }
        if chosen.len() == n {
            return;
        }
        for i in start..masks.len() {
            chosen.push(masks[i]);
            rec(masks, i + 1, full, n, chosen, out);
            chosen.pop();
        }
    }
    let mut raw = Vec::new();
    rec(&masks, 0, full, n, &mut chosen, &mut raw);
    for cover in raw {
        let mut cells: Vec<Vec<usize>> =
            cover.iter().map(|&m| (0..n).filter(|&b| m >> b & 1 == 1).map(|b| items[b]).collect()).collect();
        cells.sort();
        out.push(cells);
    }
    out.sort_by(|a, b| (a.len(), a).cmp(&(b.len(), b)));
    Ok(out)
}

/// Options for [`reduce_arity`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ReduceOptions {
    pub cover_bound: usize,
    /// Skip index pairs `(I, J)` whose guards are propositionally inconsistent.
    pub prune: bool,
}

impl Default for ReduceOptions {
    fn default() -> Self {
        ReduceOptions { cover_bound: DEFAULT_COVER_BOUND, prune: true }
    }
}

/// The emitted conjuncts, tagged by family (`24`..`29`), and the resulting
/// normal form.
#[derive(Clone, Debug)]
pub struct ArityReduction {
    pub conjuncts: Vec<(u8, Formula)>,
    pub sig: Signature,
    pub nf: NormalForm,
}

impl ArityReduction {
    pub fn count(&self, family: u8) -> usize {
        self.conjuncts.iter().filter(|c| c.0 == family).count()
    }

    pub fn formula(&self) -> Formula {
        Formula::and(self.conjuncts.iter().map(|c| c.1.clone()).collect())
    }
}

fn subsets(n: usize) -> impl Iterator<Item = Vec<usize>> {
    (0u32..1 << n).map(move |m| (0..n).filter(|&b| m >> b & 1 == 1).collect())
}

fn label(set: &[usize]) -> String {
    set.iter().map(|i| i.to_string()).collect::<Vec<_>>().join("_")
}

/// Reduces a normal form over `m + 1 ≥ 3` variables to one over `m`
/// variables that is satisfiable over the same domains. Control formulas are
/// absorbed into the witness clause sets.
pub fn reduce_arity(nf: &NormalForm, opts: ReduceOptions) -> Result<ArityReduction, MultivarError> {
    if nf.m < 3 {
        return Err(MultivarError::NotReducible);
    }
    let m = nf.m - 1;
    let mut sig = nf.sig.clone();
    let gammas: Vec<ClauseSet> = nf
        .exist
        .iter()
        .map(|e| {
            let mut g = e.gamma.clone();
            g.clauses.extend(e.kappa.literals(&nf.sig).into_iter().map(Clause::unit));
            g
        })
        .collect();
    let (ns, nt) = (nf.exist.len(), nf.univ.len());
    let mut out: Vec<(u8, Formula)> = Vec::new();
    let forall_m = |f: Formula| Formula::forall_n(m, f);
    let forall_m1 = |f: Formula| Formula::forall_n(m - 1, f);
    let consistent = |f: &Formula| -> bool {
        let mut ps = Vec::new();
        f.preds(&mut ps);
        ps.sort_unstable();
        ps.dedup();
        if ps.len() > 20 {
            return true;
        }
        (0u64..1 << ps.len()).any(|bits| {
            f.eval_prop(&mut |p| ps.iter().position(|&q| q == p).map(|i| bits >> i & 1 == 1)) == Some(true)
        })
    };
    let mut q: Vec<Option<PredId>> = Vec::new();
    let mut cj: Vec<ClauseSet> = Vec::new();
    for j_set in subsets(nt) {
        let mut base = nf.omega.clone();
        for &j in &j_set {
            base = base.union(&nf.univ[j].delta);
        }
        cj.push(base);
        if j_set.is_empty() {
            q.push(None);
            continue;
        }
        let qp = sig.add_fresh(&format!("q_{}", label(&j_set)), m - 1);
        let nus = Formula::and(j_set.iter().map(|&j| nf.univ[j].nu.clone()).collect());
        out.push((25, forall_m(Formula::implies(nus, Formula::atom(qp)))));
        q.push(Some(qp));
    }
    for ji in 0..1usize << nt {
        let restricted = restrict(&nf.sig, &saturate(&nf.sig, &cj[ji]));
        let body = Formula::forall(restricted.to_formula());
        out.push((28, forall_m1(match q[ji] {
            Some(qp) => Formula::implies(Formula::atom(qp), body),
            None => body,
        })));
    }
    for i_set in subsets(ns).filter(|s| !s.is_empty()) {
        let covers = minimal_covers(&i_set, opts.cover_bound)?;
        for (ji, j_set) in subsets(nt).enumerate() {
            let mut guard: Vec<Formula> = i_set.iter().map(|&i| nf.exist[i].mu.clone()).collect();
            guard.extend(j_set.iter().map(|&j| nf.univ[j].nu.clone()));
            let guard = Formula::and(guard);
            if opts.prune && !consistent(&guard) {
                continue;
            }
            let tag = format!("{}_{}", label(&i_set), label(&j_set));
            let pij = sig.add_fresh(&format!("p_{tag}"), m - 1);
            out.push((24, forall_m(Formula::implies(guard, Formula::atom(pij)))));
            let mut options = Vec::new();
            for (mi, cover) in covers.iter().enumerate() {
                let pm = sig.add_fresh(&format!("p_{tag}_{mi}"), m - 1);
                options.push(Formula::atom(pm));
                let mut hs = Vec::new();
                for (h, cell) in cover.iter().enumerate() {
                    let ph = sig.add_fresh(&format!("p_{tag}_{mi}_{h}"), m);
                    let mut c = cj[ji].clone();
                    for &i in cell {
                        c = c.union(&gammas[i]);
                    }
                    let restricted = restrict(&nf.sig, &saturate(&nf.sig, &c));
                    let body = Formula::and(vec![Formula::atom(ph), restricted.to_formula()]);
                    out.push((27, forall_m1(Formula::implies(Formula::atom(pm), Formula::exists(body)))));
                    hs.push(ph);
                }
                for a in 0..hs.len() {
                    for b in a + 1..hs.len() {
                        out.push((29, forall_m(Formula::not(Formula::and(vec![Formula::atom(hs[a]), Formula::atom(hs[b])])))));
                    }
                }
            }
            out.push((26, forall_m(Formula::implies(Formula::atom(pij), Formula::or(options)))));
        }
    }
    out.sort_by_key(|c| c.0);
    let formula = Formula::and(out.iter().map(|c| c.1.clone()).collect());
    let reduced = to_normal_form(&sig, &formula, m)?;
    Ok(ArityReduction { conjuncts: out, sig, nf: reduced })
}

/// Options for [`solve`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SolveOptions {
    pub m: usize,
    pub max_omega: usize,
    pub royal_cap: usize,
    pub depth: usize,
    pub budget: Option<Duration>,
    pub encoding: WEncoding,
    pub reduce: ReduceOptions,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            m: 2,
            max_omega: 4,
            royal_cap: 2,
            depth: 4,
            budget: Some(Duration::from_secs(60)),
            encoding: WEncoding::default(),
            reduce: ReduceOptions::default(),
        }
    }
}

/// Everything a successful run produced.
#[derive(Clone, Debug)]
pub struct SolveArtifacts {
    pub normal_forms: Vec<NormalForm>,
    pub royal: Vec<FlutedType>,
    pub spread: SpreadNormalForm,
    pub basic: BasicSet,
    pub quadratic: QuadraticSet,
    pub certificate: Certificate,
    pub prefix: SynthesizedPrefix,
    pub prefix_report: PrefixReport,
}

#[derive(Clone, Debug)]
pub struct SolveResult {
    pub status: SearchStatus,
    /// Royal-set guesses tried.
    pub guesses: usize,
    pub normal_forms: Vec<NormalForm>,
    pub artifacts: Option<Box<SolveArtifacts>>,
}

/// Royal-set guesses: subsets of the 1-types allowed by the unary clauses of
/// `Ω`, smallest first, of size at most `cap`.
pub fn royal_guesses(nf: &NormalForm, cap: usize) -> Vec<Vec<FlutedType>> {
    let unary: Vec<Formula> = nf
        .omega
        .iter()
        .filter(|c| c.lits().iter().all(|l| nf.sig.arity(l.pred) <= 1))
        .map(Clause::to_formula)
        .collect();
    let types = allowed_one_types(&nf.sig, &unary);
    let mut out = vec![Vec::new()];
    let mut layer: Vec<(usize, Vec<FlutedType>)> = vec![(0, Vec::new())];
    for _ in 0..cap {
        let mut next = Vec::new();
        for (start, set) in &layer {
            for (i, t) in types.iter().enumerate().skip(*start) {
                let mut s = set.clone();
                s.push(t.clone());
                next.push((i + 1, s));
            }
        }
        out.extend(next.iter().map(|(_, s)| s.clone()));
        layer = next;
    }
    out
}

/// Normalizes `f` at `opts.m` variables, reduces to two variables, then for
/// each royal-set guess runs spread form, basic reduction, the quadratic
/// transformation and certificate search. The first certificate found is
/// validated and a prefix of its model synthesized.
pub fn solve(sig: &Signature, f: &Formula, opts: SolveOptions) -> Result<SolveResult, MultivarError> {
    let start = Instant::now();
    let v = validate(sig, f, 0).map_err(|e| MultivarError::Validation(e.to_string()))?;
    let m = opts.m.max(v.variable_bound).max(2);
    let mut nfs = vec![to_normal_form(sig, f, m)?];
    while nfs.last().expect("non-empty").m > 2 {
        let r = reduce_arity(nfs.last().expect("non-empty"), opts.reduce)?;
        nfs.push(r.nf);
    }
    let nf = nfs.last().expect("non-empty").clone();
    let mut exhausted = false;
    let mut guesses = 0;
    for royal in royal_guesses(&nf, opts.royal_cap) {
        let remaining = opts.budget.map(|b| b.saturating_sub(start.elapsed()));
        if remaining.is_some_and(|r| r.is_zero()) {
            exhausted = true;
            break;
        }
        guesses += 1;
        let spread = to_spread(&nf, &royal, opts.encoding)?;
        let basic = spread_to_basic(&spread);
        let quadratic = quadratic_transform(&basic);
        let out = search(&quadratic.set, opts.max_omega, SearchBudget { time: remaining })?;
        match out.status {
            SearchStatus::Sat => {
                let certificate = out.certificate.expect("certificate on sat");
                let prefix = synthesize(&certificate, opts.depth)?;
                let prefix_report = verify_prefix(&prefix, &certificate, &quadratic.set);
                let artifacts = SolveArtifacts {
                    normal_forms: nfs.clone(),
                    royal,
                    spread,
                    basic,
                    quadratic,
                    certificate,
                    prefix,
                    prefix_report,
                };
                return Ok(SolveResult { status: SearchStatus::Sat, guesses, normal_forms: nfs, artifacts: Some(Box::new(artifacts)) });
            }
            SearchStatus::BudgetExhausted => exhausted = true,
            SearchStatus::UnsatAtCap => {}
        }
    }
    let status = if exhausted { SearchStatus::BudgetExhausted } else { SearchStatus::UnsatAtCap };
    Ok(SolveResult { status, guesses, normal_forms: nfs, artifacts: None })
}

impl SolveResult {
    /// Summary JSON; the certificate is included when found.
    pub fn to_json(&self) -> Value {
        let mut v = json!({
            "format": 1,
            "status": self.status.to_string(),
            "guesses": self.guesses,
            "normal_form_vars": self.normal_forms.iter().map(|n| n.m).collect::<Vec<_>>(),
        });
        if let Some(a) = &self.artifacts {
            v["royal"] = json!(a.royal.iter().map(|t| t.display(&a.spread.sig)).collect::<Vec<_>>());
            v["certificate"] = a.certificate.to_json();
            v["prefix_clean"] = json!(a.prefix_report.is_clean());
            v["prefix_size"] = json!(a.prefix.structure.size());
        }
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{find_model, Mode};
    use crate::normal_form::normal_form_to_formula;
    use crate::syntax::parse_file;

    #[test]
    fn small_minimal_covers() {
        assert_eq!(minimal_covers(&[1], 4).unwrap(), vec![vec![vec![1]]]);
        assert_eq!(minimal_covers(&[1, 2], 4).unwrap(), vec![vec![vec![1, 2]], vec![vec![1], vec![2]]]);
        assert_eq!(minimal_covers(&[], 4).unwrap(), vec![Vec::<Vec<usize>>::new()]);
        assert!(matches!(minimal_covers(&[1, 2, 3, 4, 5], 4), Err(MultivarError::IndexSetTooLarge { .. })));
    }

    #[test]
    fn empty_index_sets_leave_only_omega() {
        let (sig, f) = parse_file("sig { r/3 } trans { T } eq\n(forall forall forall r)").unwrap();
        let nf = to_normal_form(&sig, &f, 3).unwrap();
        assert!(nf.exist.is_empty() && nf.univ.is_empty());
        let r = reduce_arity(&nf, ReduceOptions::default()).unwrap();
        assert_eq!(r.conjuncts.len(), 1);
        assert_eq!(r.count(28), 1);
    }

    #[test]
    fn solve_small_examples() {
        let (sig, f) = parse_file("sig { p/1 } trans { T } eq\n(exists p & forall !p)").unwrap();
        assert_eq!(solve(&sig, &f, SolveOptions::default()).unwrap().status, SearchStatus::UnsatAtCap);
        let (sig, f) = parse_file("sig { p/1, q/1 } trans { T } eq\n(exists p & forall (p -> exists (T & q)))").unwrap();
        let r = solve(&sig, &f, SolveOptions::default()).unwrap();
        assert_eq!(r.status, SearchStatus::Sat);
        assert!(r.artifacts.unwrap().prefix_report.is_clean());
        assert!(find_model(&sig, &f, 2, Mode::AtMost).unwrap().is_some());
    }

    fn is_minimal_cover(set: &[usize], cells: &[Vec<usize>]) -> bool {
        let covers = |cs: &[&Vec<usize>]| set.iter().all(|x| cs.iter().any(|c| c.contains(x)));
        let all: Vec<&Vec<usize>> = cells.iter().collect();
        covers(&all)
            && (0..cells.len()).all(|i| {
                let rest: Vec<&Vec<usize>> = cells.iter().enumerate().filter(|&(j, _)| j != i).map(|x| x.1).collect();
                !covers(&rest)
            })
    }

    #[test]
    fn minimal_covers_match_brute_force() {
        for n in 0..=4usize {
            let set: Vec<usize> = (0..n).collect();
            let got = minimal_covers(&set, 4).unwrap();
            assert!(got.len() as u64 <= 1u64 << (n * n));
            let cells: Vec<Vec<usize>> = subsets(n).filter(|c| !c.is_empty()).collect();
            let mut expected = 0;
            for choice in 0u32..1 << cells.len() {
                let chosen: Vec<Vec<usize>> =
                    (0..cells.len()).filter(|&b| choice >> b & 1 == 1).map(|b| cells[b].clone()).collect();
                if chosen.len() <= n && is_minimal_cover(&set, &chosen) {
                    expected += 1;
                    let mut sorted = chosen.clone();
                    sorted.sort();
                    assert!(got.contains(&sorted), "{sorted:?}");
                }
            }
            assert_eq!(got.len(), expected.max(if n == 0 { 1 } else { 0 }));
            assert!(got.iter().all(|c| is_minimal_cover(&set, c)));
        }
    }

    #[test]
    fn conjunct_counts_match_closed_form() {
        let (sig, f) = parse_file(
            "sig { a/1, b/1, r/3, s/3, d/3 } trans { T } eq\n\
             (forall forall (a -> exists r) & forall forall (b -> exists s) & forall forall (a -> forall d))",
        )
        .unwrap();
        let mut nf = to_normal_form(&sig, &f, 3).unwrap();
        nf.exist.retain(|e| e.kappa.t && !e.kappa.eq);
        assert_eq!((nf.exist.len(), nf.univ.len()), (2, 1));
        let r = reduce_arity(&nf, ReduceOptions { prune: false, ..ReduceOptions::default() }).unwrap();
        let (s, t) = (2usize, 1usize);
        let pairs = ((1 << s) - 1) * (1 << t);
        // Singletons have one cover of one cell; {0,1} has [{0,1}] and [{0},{1}].
        let cells_per_j = 1 + 1 + (1 + 2);
        assert_eq!(r.count(24), pairs);
        assert_eq!(r.count(25), (1 << t) - 1);
        assert_eq!(r.count(26), pairs);
        assert_eq!(r.count(27), cells_per_j * (1 << t));
        assert_eq!(r.count(28), 1 << t);
        assert_eq!(r.count(29), 1 << t);
        assert_eq!(r.nf.m, 2);
    }

    #[test]
    fn reduction_preserves_satisfiability_per_size() {
        for text in [
            "sig { r/2, s/3 } trans { T } eq\n(forall forall (r -> exists s))",
            "sig { r/2, s/3 } trans { T } eq\n(forall forall (r -> exists (s & !T)) & forall forall forall (s -> !=))",
        ] {
            let (sig, f) = parse_file(text).unwrap();
            let mut nf = to_normal_form(&sig, &f, 3).unwrap();
            // Drop the `=` controls to keep the reduced signature small.
            nf.exist.retain(|e| !e.kappa.eq);
            let red = reduce_arity(&nf, ReduceOptions::default()).unwrap();
            let g = normal_form_to_formula(&nf);
            let h = normal_form_to_formula(&red.nf);
            for n in 1..=3 {
                let a = find_model(&nf.sig, &g, n, Mode::Exactly).unwrap().is_some();
                let b = find_model(&red.nf.sig, &h, n, Mode::Exactly).unwrap().is_some();
                assert_eq!(a, b, "{text} at size {n}");
            }
        }
    }
}
