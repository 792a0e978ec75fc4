//! One verdict line per acceptance criterion. Exits nonzero on any failure
//! only when ACCEPTANCE_STRICT=1, so the full workspace test run still
//! reports every line.

use std::path::PathBuf;
use std::time::{Duration, Instant};

use pingpong_core::experiment::{
    parse_nested_json, run_certify, run_estimates, run_freeprod, run_lemmas, run_linalg_checks, run_metric_checks,
    Artifacts, FreeprodParams,
};
use pingpong_core::pingpong::{certify, parse_config_json, PingPongConfig, MARGIN_FLOOR};

const SEED: u64 = 42;
const LEMMA_TRIALS: usize = 1000;
const LEMMA_TOL: f64 = 1e-9;
const LEMMA_BUDGET: Duration = Duration::from_secs(60);
const LINALG_TRIALS: usize = 1000;
const MIN_EPSILON: f64 = 0.3;
const WORD_SYLLABLES: usize = 6;
const WORD_SYLLABLE_LEN: usize = 2;
const DISTINCT_SYLLABLES: usize = 4;
const DISTINCT_FLOOR: f64 = 1e-6;
const MIN_R2: f64 = 0.9;
const METRIC_PAIRS: usize = 200;
const REP_EPS: f64 = 0.5;
const REP_SYLLABLES: usize = 4;
const LONG_BUDGET: Duration = Duration::from_secs(300);

fn config_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn load_config(name: &str) -> PingPongConfig {
    let text = std::fs::read_to_string(config_path(name)).expect("shipped config");
    parse_config_json(&text).expect("valid shipped config")
}

struct Verdict {
    pass: bool,
    detail: String,
}

/// Outputs of one full run; `bytes` is every JSON summary and CSV table in
/// order, for the determinism comparison.
struct Run {
    verdicts: Vec<Verdict>,
    bytes: Vec<String>,
}

fn record(bytes: &mut Vec<String>, a: &Artifacts) {
    bytes.push(serde_json::to_string(&a.summary).unwrap());
    bytes.push(a.csv.clone().unwrap_or_default());
    bytes.push(a.plot.clone().unwrap_or_default());
}

fn failure(e: impl std::fmt::Display) -> Verdict {
    Verdict { pass: false, detail: format!("error: {e}") }
}

fn run_all() -> Run {
    let mut bytes = Vec::new();
    let mut verdicts = Vec::new();
    let sl2 = load_config("schottky_sl2.json");

    let t = Instant::now();
    verdicts.push(match run_lemmas(SEED, LEMMA_TRIALS, LEMMA_TOL) {
        Ok(a) => {
            let elapsed = t.elapsed();
            record(&mut bytes, &a);
            let failing: Vec<String> = a.summary["checks"]
                .as_array()
                .unwrap()
                .iter()
                .filter(|c| c["asserted"] == true && c["violations"].as_u64() != Some(0))
                .map(|c| format!("{} ({} violations)", c["name"].as_str().unwrap(), c["violations"]))
                .collect();
            let pass = a.pass && elapsed < LEMMA_BUDGET;
            let detail = if failing.is_empty() {
                format!("all checks {LEMMA_TRIALS}/{LEMMA_TRIALS}, {:.1}s", elapsed.as_secs_f64())
            } else {
                format!("failing: {}, {:.1}s", failing.join(", "), elapsed.as_secs_f64())
            };
            Verdict { pass, detail }
        }
        Err(e) => failure(e),
    });

    verdicts.push(match run_linalg_checks(SEED, LINALG_TRIALS) {
        Ok(r) => {
            bytes.push(serde_json::to_string(&r).unwrap());
            Verdict {
                pass: r.pass,
                detail: format!(
                    "reconstruction {:.2e}, wedge {:.2e}, phi {:.2e}",
                    r.reconstruction_worst, r.wedge_worst, r.phi_worst
                ),
            }
        }
        Err(e) => failure(e),
    });

    let t = Instant::now();
    verdicts.push(match (certify(&sl2), run_estimates(&sl2, WORD_SYLLABLES, WORD_SYLLABLE_LEN)) {
        (Ok(cert), Ok(a)) => {
            let elapsed = t.elapsed();
            record(&mut bytes, &a);
            let s = &a.summary;
            let lambda = s["gap_growth"]["fitted_constants"]["lambda"].as_f64().unwrap_or(f64::NAN);
            let r2 = s["gap_growth"]["diagnostics"]["r2"].as_f64().unwrap_or(f64::NAN);
            let c = |k: &str, n: &str| s[k]["fitted_constants"][n].as_f64().unwrap_or(f64::NAN);
            let (c2, c3, c4) = (c("norm_product", "C2"), c("gap_product", "C3"), c("eigen_gap_product", "C4"));
            let pass = cert.epsilon >= MIN_EPSILON
                && cert.min_margin() > MARGIN_FLOOR
                && a.pass
                && lambda > 1.0
                && r2 > MIN_R2
                && c2 > 0.0
                && c3 > 0.0
                && c4 > 0.0
                && elapsed < LONG_BUDGET;
            Verdict {
                pass,
                detail: format!(
                    "eps {:.3}, margin {:.2e}, lambda {lambda:.3}, R2 {r2:.4}, C2 {c2:.3}, C3 {c3:.3}, C4 {c4:.3}, {:.1}s",
                    cert.epsilon,
                    cert.min_margin(),
                    elapsed.as_secs_f64()
                ),
            }
        }
        (Err(e), _) | (_, Err(e)) => failure(e),
    });

    match run_certify(&sl2, WORD_SYLLABLES, WORD_SYLLABLE_LEN, DISTINCT_SYLLABLES) {
        Ok(a) => {
            record(&mut bytes, &a);
            let att = &a.summary["attraction"];
            let checked = att["checked"].as_u64().unwrap_or(0);
            let violations = att["violations"].as_u64().unwrap_or(u64::MAX);
            verdicts.push(Verdict {
                pass: checked > 0 && violations == 0,
                detail: format!("{checked} words above the gap threshold, {violations} violations"),
            });
            let d = &a.summary["distinctness"];
            let min = d["min_distance"].as_f64().unwrap_or(0.0);
            verdicts.push(Verdict {
                pass: min > DISTINCT_FLOOR,
                detail: format!("{} words, min distance {min:.4}", d["words"]),
            });
        }
        Err(e) => {
            verdicts.push(failure(&e));
            verdicts.push(failure(&e));
        }
    }

    let nested = std::fs::read_to_string(config_path("nested_domains.json"))
        .map_err(|e| e.to_string())
        .and_then(|t| parse_nested_json(&t).map_err(|e| e.to_string()));
    verdicts.push(match nested.and_then(|n| run_metric_checks(&n, SEED, METRIC_PAIRS).map_err(|e| e.to_string())) {
        Ok(r) => {
            bytes.push(serde_json::to_string(&r).unwrap());
            Verdict {
                pass: r.pass,
                detail: format!(
                    "interval {:.6} (rel err {:.1e}), invariance {:.1e}, monotonicity violations {}, contraction {:.3}",
                    r.interval_dist, r.interval_rel_err, r.invariance_worst, r.monotonicity_violations, r.contraction_ratio
                ),
            }
        }
        Err(e) => failure(e),
    });

    let t = Instant::now();
    let params = FreeprodParams {
        d: 2,
        eta: 0.25,
        eps: REP_EPS,
        max_syllables: REP_SYLLABLES,
        max_syllable_len: WORD_SYLLABLE_LEN,
        budget: 8,
        max_power: 8,
    };
    verdicts.push(match run_freeprod(&sl2, &params) {
        Ok(a) => {
            let elapsed = t.elapsed();
            record(&mut bytes, &a);
            let r = &a.summary["rep_product"];
            let dist = r["diagnostics"]["min_pairwise_distance"].as_f64().unwrap_or(0.0);
            Verdict {
                pass: a.pass && dist > DISTINCT_FLOOR && elapsed < LONG_BUDGET,
                detail: format!(
                    "{} words, min ratio {:.3e}, min distance {dist:.3e}, {:.1}s",
                    r["samples"],
                    r["min_ratio"].as_f64().unwrap_or(f64::NAN),
                    elapsed.as_secs_f64()
                ),
            }
        }
        Err(e) => failure(e),
    });

    Run { verdicts, bytes }
}

fn in_pool(threads: usize) -> Run {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(run_all)
}

const NAMES: [&str; 8] = [
    "inequality suite",
    "cartan and exterior powers",
    "sl2 certificate and word estimates",
    "gap direction attraction",
    "pairwise distinct words",
    "caratheodory metric",
    "convex representation pipeline",
    "determinism across runs and thread counts",
];

fn main() {
    let first = in_pool(4);
    let second = in_pool(1);
    let mut verdicts = first.verdicts;
    let mismatch = first.bytes.iter().zip(&second.bytes).position(|(a, b)| a != b);
    let same = first.bytes.len() == second.bytes.len() && mismatch.is_none();
    verdicts.push(Verdict {
        pass: same,
        detail: match mismatch {
            None if same => format!("{} artifacts identical with 4 and 1 threads", first.bytes.len()),
            None => "artifact counts differ".to_string(),
            Some(i) => format!("artifact {i} differs"),
        },
    });
    let mut failed = 0;
    for (i, (name, v)) in NAMES.iter().zip(&verdicts).enumerate() {
        println!("criterion {} {name}: {} ({})", i + 1, if v.pass { "PASS" } else { "FAIL" }, v.detail);
        if !v.pass {
            failed += 1;
        }
    }
    println!("acceptance: {} passed, {failed} failed", verdicts.len() - failed);
    if failed > 0 && std::env::var("ACCEPTANCE_STRICT").as_deref() == Ok("1") {
        std::process::exit(1);
    }
}
