use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn run(args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_pingpong-lab"));
    cmd.args(args).env_remove("PINGPONG_LAB_THREADS");
    if let Some(t) = threads {
        cmd.env("PINGPONG_LAB_THREADS", t);
    }
    cmd.output().unwrap()
}

fn error_code(out: &Output) -> String {
    let line = String::from_utf8_lossy(&out.stderr);
    let v: Value = serde_json::from_str(line.trim()).unwrap_or_else(|_| panic!("not JSON: {line}"));
    v["error"]["code"].as_str().unwrap().to_string()
}

fn read(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap()
}

#[test]
fn certify_writes_summary_and_samples() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cert.json");
    let cfg = config("schottky_sl2.json");
    let r = run(&["certify", "--config", cfg.to_str().unwrap(), "--max-syllables", "3", "--out", out.to_str().unwrap()], None);
    assert_eq!(r.status.code(), Some(0), "{}", String::from_utf8_lossy(&r.stderr));
    let v: Value = serde_json::from_str(&read(&out)).unwrap();
    assert_eq!(v["task"], "certify");
    assert_eq!(v["seed"], 42);
    assert_eq!(v["pass"], true);
    assert!(v["result"]["certificate"]["epsilon"].as_f64().unwrap() >= 0.3);
    assert!(read(&dir.path().join("cert.csv")).starts_with("word,n,length,gap"));
    let names: Vec<_> = std::fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(names.len(), 2, "{names:?}");
}

#[test]
fn missing_config_is_an_input_error() {
    let r = run(&["certify", "--config", "/definitely/not/here.json"], None);
    assert_eq!(r.status.code(), Some(1));
    assert_eq!(error_code(&r), "E_INPUT");
}

#[test]
fn malformed_config_is_a_parse_error() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"gamma1\": ").unwrap();
    let r = run(&["qi", "--config", bad.to_str().unwrap()], None);
    assert_eq!(r.status.code(), Some(1));
    assert_eq!(error_code(&r), "E_PARSE");
}

#[test]
fn uncertifiable_config_reports_its_code() {
    let cfg = config("quarter_turn_semigroups.json");
    let r = run(&["estimate", "--config", cfg.to_str().unwrap()], None);
    assert_eq!(r.status.code(), Some(1));
    assert_eq!(error_code(&r), "E_CERT");
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(run(&["bogus"], None).status.code(), Some(1));
    assert_eq!(run(&["lemmas", "--trials", "many"], None).status.code(), Some(1));
    let r = run(&["lemmas", "--trials", "0"], None);
    assert_eq!((r.status.code(), error_code(&r).as_str()), (Some(1), "E_INPUT"));
    assert_eq!(run(&["--help"], None).status.code(), Some(0));
}

#[test]
fn bad_thread_count_is_rejected() {
    let r = run(&["lemmas", "--trials", "1"], Some("zero"));
    assert_eq!((r.status.code(), error_code(&r).as_str()), (Some(1), "E_INPUT"));
}

#[test]
fn failed_checks_exit_two_with_witnesses() {
    // The 2δ/ε ball-image contraction bound fails on some draws.
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("lemmas.json");
    let r = run(&["lemmas", "--trials", "100", "--out", out.to_str().unwrap()], None);
    assert_eq!(r.status.code(), Some(2));
    let v: Value = serde_json::from_str(&read(&out)).unwrap();
    assert_eq!(v["pass"], false);
    let checks = v["result"]["checks"].as_array().unwrap();
    let failing = checks.iter().find(|c| c["violations"].as_u64().unwrap() > 0).unwrap();
    assert!(!failing["counterexamples"].as_array().unwrap().is_empty());
}

#[test]
fn freeprod_defaults_to_the_shipped_letters() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.json");
    let r = run(&["freeprod", "--max-syllables", "3", "--out", out.to_str().unwrap()], None);
    assert_eq!(r.status.code(), Some(0), "{}", String::from_utf8_lossy(&r.stderr));
    let v: Value = serde_json::from_str(&read(&out)).unwrap();
    assert_eq!(v["result"]["pair"]["m"], 10);
    assert!(read(&dir.path().join("report.plot.dat")).starts_with("n log_ratio\n"));
    let r = run(&["freeprod", "--d", "3"], None);
    assert_eq!(r.status.code(), Some(1));
}

#[test]
fn outputs_do_not_depend_on_thread_count() {
    let cfg = config("schottky_sl2.json");
    let cfg = cfg.to_str().unwrap();
    let sl3 = config("schottky_sl3.json");
    for task in [
        vec!["lemmas", "--trials", "40", "--seed", "9"],
        vec!["estimate", "--config", cfg, "--max-syllables", "4"],
        vec!["anosov-search", "--config", sl3.to_str().unwrap()],
    ] {
        let mut seen = Vec::new();
        for threads in ["1", "4"] {
            let dir = tempfile::tempdir().unwrap();
            let out = dir.path().join("o.json");
            let mut args = task.clone();
            args.extend(["--out", out.to_str().unwrap()]);
            let r = run(&args, Some(threads));
            assert_ne!(r.status.code(), Some(1), "{}", String::from_utf8_lossy(&r.stderr));
            let mut files: Vec<(String, String)> = std::fs::read_dir(dir.path())
                .unwrap()
                .map(|e| {
                    let p = e.unwrap().path();
                    (p.file_name().unwrap().to_string_lossy().into_owned(), read(&p))
                })
                .collect();
            files.sort();
            seen.push(files);
        }
        assert_eq!(seen[0], seen[1], "{}", task[0]);
    }
}
