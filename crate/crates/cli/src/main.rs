//! `pingpong-lab`: batch front-end over the core library. Each subcommand
//! writes a JSON summary (plus CSV samples and two-column plot data where
//! the run produces them) and exits 0 when every asserted check holds,
//! 2 when one fails and 1 on bad input.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pingpong_core::experiment::{
    run_anosov_search, run_certify, run_estimates, run_freeprod, run_lemmas, run_qi, Artifacts, FreeprodParams,
};
use pingpong_core::pingpong::{parse_config_json, PingPongConfig};
use pingpong_core::{Error, Result};
use serde_json::json;

/// Letters used by `freeprod` when no config is given.
const DEFAULT_FREEPROD_CONFIG: &str = include_str!("../../../configs/schottky_sl2.json");
const THREADS_VAR: &str = "PINGPONG_LAB_THREADS";

#[derive(Parser)]
#[command(name = "pingpong-lab", version, about = "Ping-pong certification and singular value experiments")]
struct Cli {
    #[command(subcommand)]
    task: Task,
}

#[derive(Args)]
struct Output {
    /// JSON summary path; CSV and plot data go next to it.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

#[derive(Args)]
struct Words {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value_t = 6)]
    max_syllables: usize,
    #[arg(long, default_value_t = 2)]
    max_syllable_len: usize,
}

#[derive(Subcommand)]
enum Task {
    /// Certify ping-pong position and check attraction on enumerated words.
    Certify {
        #[command(flatten)]
        words: Words,
        #[command(flatten)]
        out: Output,
    },
    /// Growth and product estimates over reduced words.
    Estimate {
        #[command(flatten)]
        words: Words,
        #[command(flatten)]
        out: Output,
    },
    /// Randomized singular value inequalities.
    Lemmas {
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        #[command(flatten)]
        out: Output,
    },
    /// Quasi-isometry fit of log σ₁/σ_d against word length.
    Qi {
        #[command(flatten)]
        words: Words,
        #[command(flatten)]
        out: Output,
    },
    /// Free-product representation and its product bound.
    Freeprod {
        /// Letters to represent; the shipped SL₂ Schottky group if omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 2)]
        d: usize,
        #[arg(long, default_value_t = 0.25)]
        eta: f64,
        #[arg(long, default_value_t = 0.5)]
        eps: f64,
        #[arg(long, default_value_t = 4)]
        max_syllables: usize,
        #[arg(long, default_value_t = 1)]
        max_syllable_len: usize,
        /// Doublings of the axis power.
        #[arg(long, default_value_t = 8)]
        budget: u32,
        #[arg(long, default_value_t = 8)]
        max_power: u32,
        #[command(flatten)]
        out: Output,
    },
    /// Extend a certified group by a proximal semigroup.
    AnosovSearch {
        #[arg(long)]
        config: PathBuf,
        /// Certification attempts.
        #[arg(long, default_value_t = 64)]
        budget: usize,
        #[command(flatten)]
        out: Output,
    },
}

impl Task {
    fn name(&self) -> &'static str {
        match self {
            Task::Certify { .. } => "certify",
            Task::Estimate { .. } => "estimate",
            Task::Lemmas { .. } => "lemmas",
            Task::Qi { .. } => "qi",
            Task::Freeprod { .. } => "freeprod",
            Task::AnosovSearch { .. } => "anosov-search",
        }
    }

    fn output(&self) -> &Output {
        match self {
            Task::Certify { out, .. }
            | Task::Estimate { out, .. }
            | Task::Lemmas { out, .. }
            | Task::Qi { out, .. }
            | Task::Freeprod { out, .. }
            | Task::AnosovSearch { out, .. } => out,
        }
    }
}

fn load_config(path: &Path) -> Result<PingPongConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::Input(format!("cannot read {}: {e}", path.display())))?;
    parse_config_json(&text)
}

fn positive(name: &str, v: usize) -> Result<()> {
    if v == 0 {
        return Err(Error::Input(format!("--{name} must be positive")));
    }
    Ok(())
}

fn check_words(w: &Words) -> Result<PingPongConfig> {
    positive("max-syllables", w.max_syllables)?;
    positive("max-syllable-len", w.max_syllable_len)?;
    load_config(&w.config)
}

fn execute(task: &Task) -> Result<Artifacts> {
    let seed = task.output().seed;
    match task {
        Task::Certify { words, .. } => {
            let c = check_words(words)?;
            run_certify(&c, words.max_syllables, words.max_syllable_len, words.max_syllables.min(4))
        }
        Task::Estimate { words, .. } => {
            let c = check_words(words)?;
            run_estimates(&c, words.max_syllables, words.max_syllable_len)
        }
        Task::Qi { words, .. } => {
            let c = check_words(words)?;
            run_qi(&c, words.max_syllables, words.max_syllable_len)
        }
        Task::Lemmas { trials, tol, .. } => {
            positive("trials", *trials)?;
            if !(*tol > 0.0) {
                return Err(Error::Input(format!("--tol {tol} must be positive")));
            }
            run_lemmas(seed, *trials, *tol)
        }
        Task::Freeprod { config, d, eta, eps, max_syllables, max_syllable_len, budget, max_power, .. } => {
            positive("max-syllables", *max_syllables)?;
            positive("max-syllable-len", *max_syllable_len)?;
            positive("max-power", *max_power as usize)?;
            let c = match config {
                Some(p) => load_config(p)?,
                None => parse_config_json(DEFAULT_FREEPROD_CONFIG)?,
            };
            let p = FreeprodParams {
                d: *d,
                eta: *eta,
                eps: *eps,
                max_syllables: *max_syllables,
                max_syllable_len: *max_syllable_len,
                budget: *budget,
                max_power: *max_power,
            };
            run_freeprod(&c, &p)
        }
        Task::AnosovSearch { config, budget, .. } => {
            positive("budget", *budget)?;
            run_anosov_search(&load_config(config)?, seed, *budget)
        }
    }
}

/// Write to a sibling temporary file, then rename over the target.
fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let io = |e: std::io::Error| Error::Io(format!("{}: {e}", path.display()));
    let name = path.file_name().ok_or_else(|| Error::Input(format!("{} is not a file path", path.display())))?;
    let mut tmp_name = name.to_os_string();
    tmp_name.push(format!(".tmp{}", std::process::id()));
    let tmp = path.with_file_name(tmp_name);
    let mut f = fs::File::create(&tmp).map_err(io)?;
    f.write_all(contents.as_bytes()).map_err(io)?;
    f.sync_all().map_err(io)?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        io(e)
    })
}

fn sibling(path: &Path, ext: &str) -> PathBuf {
    path.with_extension(ext)
}

fn emit(task: &Task, a: &Artifacts) -> Result<()> {
    let out = task.output();
    let doc = json!({ "task": task.name(), "seed": out.seed, "pass": a.pass, "result": a.summary });
    let text = serde_json::to_string_pretty(&doc).expect("serializable") + "\n";
    match &out.out {
        Some(path) => {
            write_atomic(path, &text)?;
            if let Some(csv) = &a.csv {
                write_atomic(&sibling(path, "csv"), csv)?;
            }
            if let Some(plot) = &a.plot {
                write_atomic(&sibling(path, "plot.dat"), plot)?;
            }
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var(THREADS_VAR) else { return Ok(()) };
    let n: usize = v.trim().parse().map_err(|_| Error::Input(format!("{THREADS_VAR}={v} is not a count")))?;
    if n == 0 {
        return Err(Error::Input(format!("{THREADS_VAR} must be positive")));
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| Error::Input(e.to_string()))
}

fn fail(e: &Error) -> ExitCode {
    eprintln!("{}", json!({ "error": { "code": e.code(), "message": e.to_string() } }));
    ExitCode::from(1)
}

fn main() -> ExitCode {
    // clap exits 2 on usage errors; here 2 is reserved for failed checks.
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    if let Err(e) = configure_threads() {
        return fail(&e);
    }
    let artifacts = match execute(&cli.task) {
        Ok(a) => a,
        Err(e) => return fail(&e),
    };
    if let Err(e) = emit(&cli.task, &artifacts) {
        return fail(&e);
    }
    if artifacts.pass {
        ExitCode::SUCCESS
    } else {
        eprintln!("{}: asserted checks failed; see the result for counterexamples", cli.task.name());
        ExitCode::from(2)
    }
}
