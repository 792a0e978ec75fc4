use pingpong_core::error::Error;
use pingpong_core::estimates::*;
use pingpong_core::experiment::run_estimates;
use pingpong_core::pingpong::{certify, parse_config_json, PingPongConfig};
use pingpong_core::sampling::{haar_orthogonal, trial_rng, Factored};
use pingpong_core::words::enumerate_reduced;
use proptest::prelude::*;
use rand::Rng;

fn load(name: &str) -> PingPongConfig {
    let text = std::fs::read_to_string(format!("{}/../../configs/{name}", env!("CARGO_MANIFEST_DIR"))).unwrap();
    parse_config_json(&text).unwrap()
}

fn schottky_stats(n: usize, len: usize) -> Vec<WordStats> {
    let c = load("schottky_sl2.json");
    let words = enumerate_reduced(c.sides(), n, len).unwrap();
    all_word_stats(&words, c.sides()).unwrap()
}

#[test]
fn adding_words_never_raises_fitted_constants() {
    let small = schottky_stats(4, 1);
    let large = schottky_stats(6, 2);
    for (f, key) in [
        (verify_norm_product as fn(&[WordStats]) -> _, "C2"),
        (verify_gap_product, "C3"),
        (verify_eigen_gap_product, "C4"),
    ] {
        let a: EstimateReport = f(&small).unwrap();
        let b: EstimateReport = f(&large).unwrap();
        assert!(b.fitted_constants[key] <= a.fitted_constants[key] + 1e-12, "{key}");
        assert!(b.fitted_constants[key] > 0.0, "{key}");
    }
}

#[test]
fn eigenvalue_cross_checks_on_even_words() {
    let r = verify_eigen_gap_product(&schottky_stats(6, 2)).unwrap();
    assert_eq!(r.diagnostics["l1_above_s1_count"], 0.0);
    assert!(r.diagnostics["eigen_norm_product_constant"] > 0.0);
    assert!(r.samples.iter().all(|s| s.n % 2 == 0));
    assert!(r.unasserted.iter().all(|s| s.n % 2 == 1));
}

#[test]
fn single_letter_norms_are_exact() {
    let r = verify_norm_product(&schottky_stats(1, 1)).unwrap();
    assert!((r.fitted_constants["C2"] - 1.0).abs() < 1e-9);
}

#[test]
fn uncertified_configs_are_refused() {
    let err = run_estimates(&load("quarter_turn_semigroups.json"), 4, 1).unwrap_err();
    assert_eq!(err.code(), "E_CERT");
}

#[test]
fn too_few_syllable_counts_is_insufficient() {
    let c = load("schottky_sl2.json");
    let cert = certify(&c).unwrap();
    let err = verify_gap_growth(&cert, &schottky_stats(2, 1)).unwrap_err();
    assert!(matches!(err, Error::InsufficientData(_)), "{err}");
}

#[test]
fn quasi_isometry_fit_on_the_schottky_group() {
    let c = load("schottky_sl2.json");
    let cert = certify(&c).unwrap();
    let r = verify_qi(&c, &cert, &schottky_stats(6, 2)).unwrap();
    assert!(r.all_pass);
    assert_eq!(r.diagnostics["upper_violations"], 0.0);
    assert!(r.fitted_constants["lower_slope"] > 0.0);
}

#[test]
fn semigroups_have_no_quasi_isometry_fit() {
    let c = load("rotated_semigroups.json");
    let cert = certify(&c).unwrap();
    assert!(verify_qi(&c, &cert, &[]).is_err());
}

#[test]
fn csv_has_one_row_per_sample() {
    let r = verify_gap_product(&schottky_stats(3, 1)).unwrap();
    let rows = r.csv_rows();
    assert_eq!(rows.len(), r.samples.len());
    assert!(rows.iter().all(|row| row.split(',').count() == CSV_HEADER.split(',').count()));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gap_index_satisfies_both_inequalities(seed in any::<u64>(), d in 4usize..8, frac in 0.05f64..0.95) {
        let mut rng = trial_rng(seed, 400, 0);
        let top: f64 = rng.gen_range(0.5..8.0);
        let mut logs: Vec<f64> = (0..d - 2).map(|_| rng.gen_range(-top..top)).collect();
        logs.push(top);
        logs.push(-top);
        logs.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let s: Vec<f64> = logs.iter().map(|x| x.exp()).collect();
        let f = Factored::from_factors(&haar_orthogonal(d, &mut rng), &s, &haar_orthogonal(d, &mut rng));
        let eps = frac * 2.0 / (d - 1) as f64;
        let gi = select_gap_index(&f.g, eps, 1e-9).unwrap();
        prop_assert!(gi.ratio >= gi.ratio_bound * (1.0 - 1e-9));
        prop_assert!(gi.sigma_k >= gi.sigma_bound * (1.0 - 1e-9));
        prop_assert!(!gi.out_of_hypothesis);
    }

    #[test]
    fn lemma_suite_is_reproducible(seed in any::<u64>()) {
        let a = lemma_suite(seed, 20, 1e-9).unwrap();
        let b = lemma_suite(seed, 20, 1e-9).unwrap();
        prop_assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }
}
