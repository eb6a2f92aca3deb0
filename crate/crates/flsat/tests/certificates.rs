//! Certificate extraction, satisfaction and search against structures and
//! the prefix construction.

use flsat::basic_reduction::quadratic_transform;
use flsat::certificate::{cert_satisfies, certificate_of, check_conditions, search, SatOptions, SearchBudget, SearchStatus};
use flsat::model_synthesis::{synthesize, verify_prefix};
use flsat::oracle::{find_model, Mode};
use flsat::random::{random_basic, random_basic_set, random_quadratic_structure, rng};
use flsat::semantics::one_types;
use flsat::syntax::parse_header;
use flsat::eval;
use rand::Rng;

#[test]
fn extraction_round_trip() {
    let sig = parse_header("sig { p/1, q/1 } trans { T } eq").unwrap();
    let mut r = rng(11);
    let mut true_count = 0;
    for _ in 0..200 {
        let s = random_quadratic_structure(&mut r, &sig, 6);
        let c = certificate_of(&s).unwrap();
        let report = check_conditions(&c);
        assert!(report.is_empty(), "{report}\n{}", c.display());
        let realized: Vec<_> = one_types(&s);
        for _ in 0..20 {
            let psi = random_basic(&mut r, &sig, &realized);
            if eval(&s, &psi.to_formula(&sig), &[]).unwrap() {
                true_count += 1;
                assert!(cert_satisfies(&c, &psi, SatOptions::default()), "{}\n{}", psi.to_line(&sig), c.display());
            }
        }
    }
    assert!(true_count > 500, "too few true formulas: {true_count}");
}

#[test]
fn search_results_yield_clean_prefixes() {
    let sig = parse_header("sig { p/1, q/1 } trans { T } eq").unwrap();
    let mut r = rng(5);
    let mut done = 0;
    while done < 100 {
        let len = r.gen_range(2..=6);
        let phi = random_basic_set(&mut r, &sig, len);
        if find_model(&sig, &phi.to_formula(), 4, Mode::AtMost).unwrap().is_none() {
            continue;
        }
        done += 1;
        let q = quadratic_transform(&phi);
        let out = search(&q.set, 4, SearchBudget::default()).unwrap();
        assert_eq!(out.status, SearchStatus::Sat, "{}", phi.to_text());
        let c = out.certificate.unwrap();
        let p = synthesize(&c, 6).unwrap();
        let rep = verify_prefix(&p, &c, &q.set);
        assert!(rep.is_clean(), "{rep}\n{}\n{}", phi.to_text(), c.display());
    }
}
