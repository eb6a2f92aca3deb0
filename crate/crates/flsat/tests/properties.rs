//! Property tests over seeded random data: every case draws its inputs from
//! a proptest-chosen seed.

use proptest::prelude::*;

use flsat::certificate::{certificate_of, check_conditions};
use flsat::corpus::{half, mod3, mod6};
use flsat::oracle::{find_model, find_model_with, check_model, Mode, OracleConfig};
use flsat::random::{random_clause_set, random_quadratic_structure, random_sentence, random_structure, rng};
use flsat::resolution::{extend_type, restrict, restricted_vocabulary, saturate};
use flsat::semantics::{check_wellformed, inflate, realized_types};
use flsat::syntax::{parse, parse_header, print, print_file};
use flsat::{parse_file, FlutedType};

fn sentence_sig() -> flsat::Signature {
    parse_header("sig { p/1, q/1, r/2 } trans { T } eq").unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn printing_round_trips(seed in any::<u64>()) {
        let sig = sentence_sig();
        let f = random_sentence(&mut rng(seed), &sig, 2, 3);
        let text = print(&f, &sig);
        let g = parse(&text, &sig).unwrap();
        prop_assert_eq!(print(&g, &sig), text);
        let (sig2, h) = parse_file(&print_file(&f, &sig)).unwrap();
        prop_assert_eq!(print(&h, &sig2), print(&f, &sig));
    }

    #[test]
    fn cdcl_and_enumeration_agree(seed in any::<u64>(), n in 1usize..=3) {
        let sig = sentence_sig();
        let f = random_sentence(&mut rng(seed), &sig, 2, 3);
        let direct = find_model(&sig, &f, n, Mode::Exactly).unwrap();
        let cfg = OracleConfig { decision_limit: Some(u64::MAX), ..OracleConfig::default() };
        let enumerated = find_model_with(&cfg, &sig, &f, n, Mode::Exactly).unwrap();
        prop_assert_eq!(direct.is_some(), enumerated.is_some());
        if let Some(s) = direct {
            prop_assert_eq!(s.size(), n);
            prop_assert!(check_wellformed(&s).is_empty());
            prop_assert!(check_model(&s, &f));
        }
    }

    #[test]
    fn extended_types_satisfy_the_clauses(seed in any::<u64>(), len in 1usize..=5) {
        let sig = flsat::normal_form::pipeline_signature(&parse_header("sig { a/1, b/1, r/2, s/2 }").unwrap()).unwrap();
        let mut r = rng(seed);
        let gamma = random_clause_set(&mut r, &sig, 2, len);
        let gdeg = restrict(&sig, &saturate(&sig, &gamma));
        let vocab = restricted_vocabulary(&sig, 2);
        for code in 0..1usize << vocab.len() {
            let tau = FlutedType { arity: 2, lits: vocab.iter().enumerate().map(|(i, &p)| (p, code >> i & 1 == 1)).collect() };
            let consistent = !gdeg.violated_by(&mut |p| tau.value(p));
            match extend_type(&sig, &gamma, &tau) {
                Some(ext) => {
                    prop_assert!(consistent);
                    prop_assert_eq!(gamma.eval(&mut |p| ext.value(p)), Some(true));
                }
                None => prop_assert!(!consistent),
            }
        }
    }

    #[test]
    fn inflation_keeps_two_types(seed in any::<u64>(), n in 1usize..=5, copies in 1usize..=3) {
        let sig = sentence_sig();
        let s = random_structure(&mut rng(seed), &sig, n, 0.4);
        let t = inflate(&s, copies);
        prop_assert!(check_wellformed(&t).is_empty());
        prop_assert_eq!(realized_types(&t, 2), realized_types(&s, 2));
        prop_assert!(t.size() >= s.size());
    }

    #[test]
    fn extracted_certificates_meet_the_conditions(seed in any::<u64>()) {
        let sig = parse_header("sig { p/1 } trans { T } eq").unwrap();
        let s = random_quadratic_structure(&mut rng(seed), &sig, 5);
        let c = certificate_of(&s).unwrap();
        prop_assert!(check_conditions(&c).is_empty());
    }

    #[test]
    fn index_helpers_are_euclidean(x in -1000i64..1000) {
        prop_assert!(mod6(x) < 6);
        prop_assert_eq!((x - mod6(x) as i64).rem_euclid(6), 0);
        prop_assert!(mod3(x) < 3);
        prop_assert_eq!((x - mod3(x) as i64).rem_euclid(3), 0);
        let h = half(x);
        prop_assert!(2 * h <= x && x < 2 * h + 2);
    }
}
