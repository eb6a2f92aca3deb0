//! Seeded generators for random test data: structures, 1-types, basic
//! formulas. All generators draw from a caller-supplied RNG, so a fixed seed
//! reproduces the data exactly.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::basic_reduction::{all_one_types, Basic, BasicSet};
use crate::normal_form::{Control, ExistConjunct, NormalForm, UnivConjunct};
use crate::resolution::{Clause, ClauseSet, Literal};
use crate::semantics::{all_tuples, is_quadratic, FlutedType, Structure};
use crate::syntax::{Formula, PredId, Signature};

/// The RNG used throughout for reproducible data.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Every stored relation filled independently with probability `density`;
/// transitive relations are then closed.
pub fn random_structure(rng: &mut impl Rng, sig: &Signature, n: usize, density: f64) -> Structure {
    let mut s = Structure::new(sig.clone(), n);
    for (p, pr) in sig.preds().iter().enumerate() {
        if !pr.is_stored() {
            continue;
        }
        for t in all_tuples(n, pr.arity) {
            if rng.gen_bool(density) {
                s.set(p, &t, true);
            }
        }
    }
    s.close_transitive();
    s
}

/// A random well-formed quadratic structure of size `1..=max_n`, by rejection.
pub fn random_quadratic_structure(rng: &mut impl Rng, sig: &Signature, max_n: usize) -> Structure {
    loop {
        let n = rng.gen_range(1..=max_n);
        let density = [0.15, 0.3, 0.5][rng.gen_range(0..3)];
        let s = random_structure(rng, sig, n, density);
        if is_quadratic(&s) {
            return s;
        }
    }
}

/// A random quantifier-free unary formula: `⊤`, a literal, or a conjunction
/// or disjunction of two literals.
pub fn random_mu(rng: &mut impl Rng, sig: &Signature) -> Formula {
    let unary = sig.unary();
    let lit = |rng: &mut dyn rand::RngCore| Formula::lit(*unary.choose(rng).expect("unary"), rng.gen_bool(0.5));
    match rng.gen_range(0..5) {
        0 => Formula::True,
        1 | 2 => lit(rng),
        3 => Formula::and(vec![lit(rng), lit(rng)]),
        _ => Formula::or(vec![lit(rng), lit(rng)]),
    }
}

/// A random basic formula whose 1-types come from `types` (non-empty).
pub fn random_basic(rng: &mut impl Rng, sig: &Signature, types: &[FlutedType]) -> Basic {
    let pick = |rng: &mut dyn rand::RngCore| types.choose(rng).expect("types").clone();
    loop {
        let b = match rng.gen_range(0..8) {
            0 => Basic::B1 { pi: pick(rng), mu: random_mu(rng, sig) },
            1 => Basic::B2 { pi: pick(rng), mu: random_mu(rng, sig) },
            2 => Basic::B3 { pi: pick(rng), pi2: pick(rng) },
            3 => Basic::B4 { pi: pick(rng), pi2: pick(rng) },
            4 => Basic::B5 { pi: pick(rng) },
            5 => Basic::B6 { pi: pick(rng) },
            6 => Basic::B7 { mu: random_mu(rng, sig) },
            _ => Basic::B8 { mu: random_mu(rng, sig) },
        };
        match &b {
            Basic::B3 { pi, pi2 } | Basic::B4 { pi, pi2 } if pi == pi2 => continue,
            _ => return b,
        }
    }
}

/// A random set of `len` basic formulas over all 1-types of `sig`.
pub fn random_basic_set(rng: &mut impl Rng, sig: &Signature, len: usize) -> BasicSet {
    let types = all_one_types(sig);
    let mut set = BasicSet::new(sig.clone()).expect("basic signature");
    set.formulas = (0..len).map(|_| random_basic(rng, sig, &types)).collect();
    set
}

/// A random non-tautological clause of 1 to 3 literals over `preds`.
pub fn random_clause(rng: &mut impl Rng, preds: &[PredId]) -> Clause {
    loop {
        let k = rng.gen_range(1..=3);
        let lits = (0..k).map(|_| Literal::new(*preds.choose(rng).expect("preds"), rng.gen_bool(0.5))).collect();
        if let Some(c) = Clause::new(lits) {
            return c;
        }
    }
}

/// A random fluted `m`-clause set of `len` clauses over the predicates of
/// arity at most `m`.
pub fn random_clause_set(rng: &mut impl Rng, sig: &Signature, m: usize, len: usize) -> ClauseSet {
    let preds = sig.eligible(m);
    ClauseSet::from_clauses(m, (0..len).map(|_| random_clause(rng, &preds)))
}

/// A random fluted formula with `bound` variables in scope, using at most
/// `max_vars` variables in total and nesting to `depth`.
pub fn random_fluted(rng: &mut impl Rng, sig: &Signature, bound: usize, max_vars: usize, depth: usize) -> Formula {
    let atoms: Vec<PredId> = (0..sig.len()).filter(|&p| sig.arity(p) <= bound).collect();
    let can_quantify = bound < max_vars && depth > 0;
    let leaf = |rng: &mut dyn rand::RngCore| match atoms.choose(rng) {
        Some(&p) => Formula::lit(p, rng.gen_bool(0.5)),
        None => Formula::True,
    };
    if depth == 0 {
        return leaf(rng);
    }
    match rng.gen_range(0..6) {
        0 if !atoms.is_empty() => leaf(rng),
        0 | 1 if can_quantify => {
            let body = random_fluted(rng, sig, bound + 1, max_vars, depth - 1);
            if rng.gen_bool(0.5) {
                Formula::forall(body)
            } else {
                Formula::exists(body)
            }
        }
        2 => Formula::not(random_fluted(rng, sig, bound, max_vars, depth - 1)),
        3 => Formula::implies(
            random_fluted(rng, sig, bound, max_vars, depth - 1),
            random_fluted(rng, sig, bound, max_vars, depth - 1),
        ),
        4 => Formula::or(vec![
            random_fluted(rng, sig, bound, max_vars, depth - 1),
            random_fluted(rng, sig, bound, max_vars, depth - 1),
        ]),
        _ => Formula::and(vec![
            random_fluted(rng, sig, bound, max_vars, depth - 1),
            random_fluted(rng, sig, bound, max_vars, depth - 1),
        ]),
    }
}

/// A random fluted sentence in at most `max_vars` variables: a conjunction
/// of one or two quantified formulas.
pub fn random_sentence(rng: &mut impl Rng, sig: &Signature, max_vars: usize, depth: usize) -> Formula {
    let k = rng.gen_range(1..=2);
    let parts = (0..k)
        .map(|_| {
            let body = random_fluted(rng, sig, 1, max_vars, depth);
            if rng.gen_bool(0.5) {
                Formula::forall(body)
            } else {
                Formula::exists(body)
            }
        })
        .collect();
    Formula::and(parts)
}

/// A small random 3-variable normal form over `sig` (which must carry a
/// transitive relation, equality and `That`): one or two existential
/// conjuncts, at most one universal conjunct and at most one `omega` clause.
pub fn random_tiny_normal_form(rng: &mut impl Rng, sig: &Signature) -> NormalForm {
    let two = sig.eligible(2);
    let three = sig.eligible(3);
    let guard = |rng: &mut dyn rand::RngCore| {
        if rng.gen_bool(0.3) {
            Formula::True
        } else {
            Formula::lit(*two.choose(rng).expect("preds"), rng.gen_bool(0.5))
        }
    };
    let exist = (0..rng.gen_range(1..=2))
        .map(|_| ExistConjunct {
            mu: guard(rng),
            kappa: *Control::ALL.choose(rng).expect("controls"),
            gamma: ClauseSet::from_clauses(3, (0..rng.gen_range(0..=2)).map(|_| random_clause(rng, &three))),
        })
        .collect();
    let univ = (0..rng.gen_range(0..=1))
        .map(|_| UnivConjunct {
            nu: guard(rng),
            delta: ClauseSet::from_clauses(3, [random_clause(rng, &three)]),
        })
        .collect();
    let omega = ClauseSet::from_clauses(3, (0..rng.gen_range(0..=1)).map(|_| random_clause(rng, &three)));
    NormalForm { m: 3, sig: sig.clone(), exist, univ, omega, fresh: Vec::new() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse_header;

    #[test]
    fn seeded_generation_is_reproducible() {
        let sig = parse_header("sig { p/1, q/1 } trans { T } eq").unwrap();
        let a = random_basic_set(&mut rng(7), &sig, 6);
        let b = random_basic_set(&mut rng(7), &sig, 6);
        assert_eq!(a, b);
        let s = random_quadratic_structure(&mut rng(3), &sig, 5);
        assert!(is_quadratic(&s));
        assert!(crate::semantics::check_wellformed(&s).is_empty());
    }

    #[test]
    fn sentences_are_fluted_and_within_the_variable_bound() {
        let sig = parse_header("sig { p/1, q/1, r/2 } trans { T } eq").unwrap();
        let mut r = rng(11);
        for _ in 0..200 {
            let f = random_sentence(&mut r, &sig, 2, 3);
            let v = crate::syntax::validate(&sig, &f, 0).unwrap();
            assert!(v.variable_bound <= 2);
        }
    }

    #[test]
    fn clause_sets_use_eligible_predicates() {
        let sig = parse_header("sig { a/1, r/2, s/3 } trans { T } eq").unwrap();
        let mut r = rng(5);
        for _ in 0..50 {
            let set = random_clause_set(&mut r, &sig, 2, 3);
            assert!(set.iter().all(|c| c.lits().iter().all(|l| sig.arity(l.pred) <= 2)));
            assert!(set.iter().all(|c| !c.is_bottom()));
        }
    }

    #[test]
    fn tiny_normal_forms_round_trip_to_sentences() {
        let base = parse_header("sig { p/1, r/2, s/3 } trans { T } eq").unwrap();
        let sig = crate::normal_form::pipeline_signature(&base).unwrap();
        let mut r = rng(2);
        for _ in 0..30 {
            let nf = random_tiny_normal_form(&mut r, &sig);
            assert!((1..=2).contains(&nf.exist.len()));
            let f = crate::normal_form::normal_form_to_formula(&nf);
            let v = crate::syntax::validate(&sig, &f, 0).unwrap();
            assert!(v.variable_bound <= 3);
        }
    }
}
