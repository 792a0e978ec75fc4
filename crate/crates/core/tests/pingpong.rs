use pingpong_core::pingpong::*;
use pingpong_core::words::{enumerate_reduced, Sides};
use proptest::prelude::*;

fn load(name: &str) -> PingPongConfig {
    let text = std::fs::read_to_string(format!("{}/../../configs/{name}", env!("CARGO_MANIFEST_DIR"))).unwrap();
    parse_config_json(&text).unwrap()
}

fn diagonal_config(top: f64, radius: f64) -> PingPongConfig {
    let text = format!(
        r#"{{
        "gamma1": {{"letters": [[[{top}, 0.0], [0.0, {bottom}]]], "is_group": false}},
        "gamma2": {{"letters": [[[{c}, {s}], [{s}, {c}]]], "is_group": false}},
        "U1": {{"space": "P", "balls": [{{"center": [1.0, 0.0], "radius": {radius}}}]}},
        "U2": {{"space": "P", "balls": [{{"center": [1.0, 1.0], "radius": {radius}}}]}},
        "V1": {{"space": "Gr", "balls": [{{"center": [1.0, 0.0], "radius": {radius}}}]}},
        "V2": {{"space": "Gr", "balls": [{{"center": [1.0, 1.0], "radius": {radius}}}]}}
    }}"#,
        bottom = 1.0 / top,
        c = 0.5 * (top + 1.0 / top),
        s = 0.5 * (top - 1.0 / top),
    );
    parse_config_json(&text).unwrap()
}

#[test]
fn shipped_schottky_certificate_fixture() {
    let cert = certify(&load("schottky_sl2.json")).unwrap();
    // dist([e₁], P(((e₁+e₂)/√2)^⊥)) = 1/√2, less two radii of 0.15.
    let eps = std::f64::consts::FRAC_1_SQRT_2 - 0.3;
    assert!((cert.epsilon - eps).abs() < 1e-12);
    assert!((cert.theta - 0.15).abs() < 1e-12);
    assert!((cert.m - gap_threshold_formula(eps, 0.15, 2)).abs() < 1e-9);
    assert!((cert.m - 16.0 / (eps * 0.15)).abs() < 1e-9);
    assert!(cert.min_margin() > MARGIN_FLOOR);
    assert!((cert.min_margin() - 0.063823309028930).abs() < 1e-9, "{}", cert.min_margin());
}

#[test]
fn overlapping_regions_do_not_certify() {
    let err = certify(&diagonal_config(10.0, 0.45)).unwrap_err();
    assert_eq!(err.code(), "E_CERT");
}

#[test]
fn strongly_proximal_letter_attracts_exactly() {
    let c = diagonal_config(1e6, 0.1);
    let cert = certify(&c).unwrap();
    let words = enumerate_reduced(c.sides(), 1, 1).unwrap();
    let w = words.iter().find(|w| w.word().id() == "1:1").unwrap();
    match check_xi_attraction(w, &c, &cert).unwrap() {
        XiCheck::Checked { dist_u, pass, .. } => assert!(pass && dist_u == 0.0),
        other => panic!("expected a checked word, got {other:?}"),
    }
}

#[test]
fn no_exceptional_letters_above_threshold() {
    let c = diagonal_config(100.0, 0.1);
    let cert = certify(&c).unwrap();
    assert!(gap_threshold(&cert) < 1e4);
    assert!(exceptional_letters(&c.gamma1, &cert).unwrap().is_empty());
    assert!(exceptional_letters(&c.gamma2, &cert).unwrap().is_empty());
}

#[test]
fn weak_letters_are_exceptional() {
    let c = load("rotated_semigroups.json");
    let cert = certify(&c).unwrap();
    assert_eq!(exceptional_letters(&c.gamma1, &cert).unwrap(), vec![1]);
}

#[test]
fn short_words_are_checked_or_skipped() {
    let c = load("schottky_sl2.json");
    let cert = certify(&c).unwrap();
    let mut skipped = 0;
    for w in enumerate_reduced(c.sides(), 4, 1).unwrap() {
        match check_xi_attraction(&w, &c, &cert).unwrap() {
            XiCheck::Inapplicable { gap } => {
                assert!(gap < cert.m);
                skipped += 1;
            }
            XiCheck::Checked { pass, .. } => assert!(pass, "{}", w.word().id()),
        }
    }
    assert!(skipped > 0);
}

#[test]
fn every_short_word_maps_the_opposite_region_inside() {
    let c = load("schottky_sl2.json");
    for (n, len) in [(6, 1), (3, 2)] {
        for w in enumerate_reduced(c.sides(), n, len).unwrap() {
            let m = word_inclusion_margin(&w, &c).unwrap();
            assert!(m > 0.0, "{} margin {m}", w.word().id());
        }
    }
}

#[test]
fn minimal_gap_grows_with_syllables() {
    let c = load("schottky_sl2.json");
    let words = enumerate_reduced(c.sides(), 6, 1).unwrap();
    let mut mins = vec![f64::INFINITY; 7];
    for w in &words {
        let n = w.syllable_count();
        mins[n] = mins[n].min(word_gap(w));
    }
    assert!(mins[1..].windows(2).all(|p| p[1] > p[0]), "{mins:?}");
}

#[test]
fn group_config_meets_a_free_product_condition() {
    assert!(free_product_condition(&load("schottky_sl2.json")).is_some());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn stronger_letters_keep_certifying(top in 20.0f64..1e4, radius in 0.05f64..0.2) {
        let c = diagonal_config(top, radius);
        let cert = certify(&c).unwrap();
        prop_assert!(cert.theta < cert.epsilon * cert.epsilon);
        prop_assert!(cert.inclusion_margins.iter().all(|m| m.margin > 0.0));
        let words = enumerate_reduced(Sides::new(&c.gamma1, &c.gamma2).unwrap(), 3, 1).unwrap();
        for w in &words {
            prop_assert!(word_inclusion_margin(w, &c).unwrap() > 0.0);
        }
    }

    #[test]
    fn config_json_round_trips(top in 20.0f64..1e4) {
        let c = diagonal_config(top, 0.1);
        let back = parse_config_json(&c.to_json()).unwrap();
        prop_assert_eq!(back.to_json(), c.to_json());
    }
}
