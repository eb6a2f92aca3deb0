//! Corpus generators checked end to end: formulas parse back, intended
//! models satisfy what they are built for.

use flsat::corpus::{
    build_2T_grid, build_2T_torus, check_grid_lemma, colour_table_mismatches, encode_2T, encode_2t_conjunct_count,
    encode_3T, encode_3T_finite, example2_prefix, example_formulas, phi_grid_2t, verify_3t_prefix, CorpusError,
    TilingSystem,
};
use flsat::oracle::{check_model, find_model, Mode};
use flsat::semantics::check_wellformed;
use flsat::syntax::{print_file, validate};
use flsat::{parse_file, print};

fn two_tiles() -> TilingSystem {
    serde_json::from_str(
        r#"{"tiles": ["a", "b"], "h": [["a","b"],["b","a"]], "v": [["a","a"],["b","b"]], "initial": "a", "final": "b"}"#,
    )
    .unwrap()
}

#[test]
fn encodings_round_trip_through_the_grammar() {
    let ts = two_tiles();
    for enc in [encode_2T(&ts).unwrap(), encode_3T(&ts).unwrap(), encode_3T_finite(&ts).unwrap()] {
        let f = enc.formula();
        let (sig, g) = parse_file(&print_file(&f, &enc.sig)).unwrap();
        assert_eq!(print(&g, &sig), print(&f, &enc.sig));
        assert!(validate(&sig, &g, 0).unwrap().variable_bound <= 2);
    }
    assert_eq!(encode_2T(&ts).unwrap().conjuncts.len(), encode_2t_conjunct_count(2));
}

#[test]
fn tiling_json_is_validated() {
    let bad: TilingSystem = serde_json::from_str(r#"{"tiles": ["a"], "h": [["a","z"]], "v": [], "initial": "a"}"#).unwrap();
    assert!(matches!(encode_2T(&bad), Err(CorpusError::UnknownTile(t)) if t == "z"));
}

#[test]
fn examples_have_no_small_models() {
    let ex = example_formulas();
    assert!(find_model(&ex.phi1.sig, &ex.phi1.formula, 5, Mode::AtMost).unwrap().is_none());
    assert!(find_model(&ex.phi2.sig, &ex.phi2.formula, 4, Mode::AtMost).unwrap().is_none());
    assert!(check_wellformed(&example2_prefix(10)).is_empty());
}

#[test]
fn grid_structures() {
    assert!(check_model(&build_2T_torus(1), &phi_grid_2t().formula()));
    let grid = build_2T_grid(8, 8);
    assert!(check_wellformed(&grid).is_empty());
    assert!(check_grid_lemma(&grid, 8, 8).is_clean());
}

#[test]
fn boustrophedon_prefix_is_clean_at_300_steps() {
    let (s, report) = verify_3t_prefix(300);
    assert_eq!(s.size(), 300);
    assert!(report.is_clean(), "{report:?}");
    assert!(report.p3_checked > 0);
}

#[test]
fn colour_table_disagrees_only_on_reversed_rows() {
    let rows: Vec<(u8, usize)> = colour_table_mismatches().iter().map(|m| (m.conjunct, m.index)).collect();
    assert_eq!(rows, [(47, 1), (47, 2), (47, 4), (47, 5), (49, 1), (49, 2), (49, 4), (49, 5)]);
    for m in colour_table_mismatches() {
        let mirrored = colour_table_mismatches()
            .into_iter()
            .find(|o| o.conjunct == m.conjunct && o.index == (6 - m.index) % 6)
            .unwrap();
        assert_eq!(m.table, mirrored.emitted);
    }
}
