//! Batch runs shared by the command line tool and the acceptance target.
//! Every runner returns a JSON summary, optional CSV rows and optional plot
//! data, plus the verdict of its asserted checks.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::cmetric::{
    caratheodory_dist, contraction_ratio, interval_domain, sampled_dist, ProperDomain,
};
use crate::convexrep::{admit_letters, anosov_semigroup_search, build_rep_pair, verify_rep_product};
use crate::error::{Error, Result};
use crate::estimates::{
    all_word_stats, lemma_suite, verify_eigen_gap_product, verify_gap_growth, verify_gap_product, verify_norm_product,
    verify_qi, EstimateReport, CSV_HEADER,
};
use crate::linalg::{cartan_decompose, phi_rep, wedge_square, SquareMatrix};
use crate::pingpong::{
    certify, check_xi_attraction, distinctness, free_product_condition, PingPongConfig, XiCheck,
};
use crate::projgeom::{pullback_hyperplane, ProjPoint};
use crate::sampling::{haar_orthogonal, trial_rng, unit_vector, Factored};
use nalgebra::DVector;
use crate::words::enumerate_reduced;

#[derive(Clone, Debug)]
pub struct Artifacts {
    pub summary: Value,
    pub csv: Option<String>,
    pub plot: Option<String>,
    pub pass: bool,
}

fn to_value<T: Serialize>(t: &T) -> Value {
    serde_json::to_value(t).expect("serializable")
}

fn csv_table(reports: &[&EstimateReport]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in reports {
        for row in r.csv_rows() {
            out.push_str(&row);
            out.push('\n');
        }
    }
    out
}

/// The randomized inequality suite.
pub fn run_lemmas(seed: u64, trials: usize, tol: f64) -> Result<Artifacts> {
    let report = lemma_suite(seed, trials, tol)?;
    let mut csv = String::from("check,asserted,trials,passed,violations,skipped,out_of_hypothesis,worst_excess\n");
    for c in &report.checks {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            c.name, c.asserted, c.trials, c.passed, c.violations, c.skipped, c.out_of_hypothesis, c.worst_excess
        ));
    }
    Ok(Artifacts { pass: report.all_pass, summary: to_value(&report), csv: Some(csv), plot: None })
}

/// Worst relative errors of the Cartan reconstruction and of the top
/// singular values of ∧²g and φ(g) against exact factor data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinalgReport {
    pub trials: usize,
    pub max_dim: usize,
    pub max_log10_condition: f64,
    pub reconstruction_worst: f64,
    pub wedge_worst: f64,
    pub phi_worst: f64,
    pub phi_dims: Vec<usize>,
    pub pass: bool,
}

pub const LINALG_MAX_DIM: usize = 12;
pub const LINALG_PHI_DIMS: [usize; 3] = [2, 3, 4];
pub const RECONSTRUCTION_TOL: f64 = 1e-10;
pub const SPECTRAL_TOL: f64 = 1e-9;

/// g = k·diag(s)·k′ with cond ≤ 1e8 and d ≤ 12. ∧² and φ are evaluated
/// factor by factor (both are homomorphisms), so the reference values s₁s₂
/// and (s₁/s_d)² are exact.
pub fn run_linalg_checks(seed: u64, trials: usize) -> Result<LinalgReport> {
    let rows: Vec<(f64, f64, f64)> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(seed, 20, t as u64);
            let d = rng.gen_range(2..=LINALG_MAX_DIM);
            let f = Factored::random(d, -4.0, 4.0, &mut rng);
            let cd = cartan_decompose(&f.g)?;
            let recon = cd.reconstruct().dist_op(&f.g) / f.g.op_norm();
            let k = SquareMatrix::from_real(f.k.clone())?;
            let kp = SquareMatrix::from_real(f.kp.clone())?;
            let s = SquareMatrix::diag(&f.s)?;
            let wedge = wedge_square(&k)?.mul(&wedge_square(&s)?).mul(&wedge_square(&kp)?);
            let w_ref = f.s[0] * f.s[1];
            let wedge_err = (wedge.op_norm() - w_ref).abs() / w_ref;
            let dp = LINALG_PHI_DIMS[t % LINALG_PHI_DIMS.len()];
            let g = Factored::random(dp, -4.0, 4.0, &mut rng);
            let phi = phi_rep(&SquareMatrix::from_real(g.k.clone())?)?
                .mul(&phi_rep(&SquareMatrix::diag(&g.s)?)?)
                .mul(&phi_rep(&SquareMatrix::from_real(g.kp.clone())?)?);
            let p_ref = (g.s[0] / g.s[dp - 1]).powi(2);
            let phi_err = (phi.op_norm() - p_ref).abs() / p_ref;
            Ok((recon, wedge_err, phi_err))
        })
        .collect::<Result<_>>()?;
    let worst = |f: fn(&(f64, f64, f64)) -> f64| rows.iter().map(f).fold(0.0, f64::max);
    let (r, w, p) = (worst(|x| x.0), worst(|x| x.1), worst(|x| x.2));
    Ok(LinalgReport {
        trials,
        max_dim: LINALG_MAX_DIM,
        max_log10_condition: 8.0,
        reconstruction_worst: r,
        wedge_worst: w,
        phi_worst: p,
        phi_dims: LINALG_PHI_DIMS.to_vec(),
        pass: trials > 0 && r <= RECONSTRUCTION_TOL && w <= SPECTRAL_TOL && p <= SPECTRAL_TOL,
    })
}

/// Attraction check of gap directions over enumerated words.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttractionSummary {
    pub words: usize,
    pub checked: usize,
    pub inapplicable: usize,
    pub violations: usize,
    pub worst_dist_u: f64,
    pub worst_dist_v: f64,
    pub bound: f64,
    pub counterexamples: Vec<String>,
}

/// Certificate, free-product condition, the gap-direction attraction check
/// on words with at most `max_syllables` syllables, and pairwise
/// distinctness on words with at most `distinct_syllables` syllables.
pub fn run_certify(
    config: &PingPongConfig,
    max_syllables: usize,
    max_syllable_len: usize,
    distinct_syllables: usize,
) -> Result<Artifacts> {
    let cert = certify(config)?;
    let words = enumerate_reduced(config.sides(), max_syllables, max_syllable_len)?;
    let checks: Vec<XiCheck> = words.par_iter().map(|w| check_xi_attraction(w, config, &cert)).collect::<Result<_>>()?;
    let mut att = AttractionSummary {
        words: words.len(),
        checked: 0,
        inapplicable: 0,
        violations: 0,
        worst_dist_u: 0.0,
        worst_dist_v: 0.0,
        bound: cert.epsilon / 8.0,
        counterexamples: Vec::new(),
    };
    for (w, c) in words.iter().zip(&checks) {
        match c {
            XiCheck::Inapplicable { .. } => att.inapplicable += 1,
            XiCheck::Checked { dist_u, dist_v, pass, .. } => {
                att.checked += 1;
                att.worst_dist_u = att.worst_dist_u.max(*dist_u);
                att.worst_dist_v = att.worst_dist_v.max(*dist_v);
                if !pass {
                    att.violations += 1;
                    if att.counterexamples.len() < 5 {
                        att.counterexamples.push(w.word().id());
                    }
                }
            }
        }
    }
    let short: Vec<_> = words.iter().filter(|w| w.word().syllable_count() <= distinct_syllables).cloned().collect();
    let distinct = distinctness(&short);
    let condition = free_product_condition(config);
    let pass = att.violations == 0 && distinct.min_distance > 1e-6 && condition.is_some();
    let summary = json!({
        "certificate": cert,
        "free_product_condition": condition,
        "attraction": att,
        "distinctness": distinct,
    });
    let mut csv = String::from("word,n,length,gap,dist_u,dist_v,status\n");
    for (w, c) in words.iter().zip(&checks) {
        let line = match c {
            XiCheck::Inapplicable { gap } => format!("{},{},{},{},,,inapplicable\n", w.word().id(), w.word().syllable_count(), w.word().word_length(), gap),
            XiCheck::Checked { gap, dist_u, dist_v, pass, .. } => format!(
                "{},{},{},{},{},{},{}\n",
                w.word().id(),
                w.word().syllable_count(),
                w.word().word_length(),
                gap,
                dist_u,
                dist_v,
                if *pass { "pass" } else { "fail" }
            ),
        };
        csv.push_str(&line);
    }
    Ok(Artifacts { summary, csv: Some(csv), plot: None, pass })
}

/// The four word estimates with fitted constants; plot data is n against
/// log σ₁/σ₂ for every word.
pub fn run_estimates(config: &PingPongConfig, max_syllables: usize, max_syllable_len: usize) -> Result<Artifacts> {
    let cert = certify(config)?;
    let words = enumerate_reduced(config.sides(), max_syllables, max_syllable_len)?;
    let stats = all_word_stats(&words, config.sides())?;
    let growth = verify_gap_growth(&cert, &stats)?;
    let norm = verify_norm_product(&stats)?;
    let gap = verify_gap_product(&stats)?;
    let eigen = verify_eigen_gap_product(&stats)?;
    let pass = growth.all_pass && growth.diagnostics["r2"] > 0.9 && norm.all_pass && gap.all_pass && eigen.all_pass;
    let mut plot = String::from("n log_gap\n");
    for s in &stats {
        plot.push_str(&format!("{} {}\n", s.n, s.log_gap));
    }
    let summary = json!({
        "certificate": cert,
        "words": words.len(),
        "gap_growth": summary_of(&growth),
        "norm_product": summary_of(&norm),
        "gap_product": summary_of(&gap),
        "eigen_gap_product": summary_of(&eigen),
    });
    Ok(Artifacts { summary, csv: Some(csv_table(&[&growth, &norm, &gap, &eigen])), plot: Some(plot), pass })
}

/// Report without its sample list (which goes to the CSV); the sample
/// with the smallest ratio stays as the witness when a bound fails.
fn summary_of(r: &EstimateReport) -> Value {
    let worst = r.samples.iter().min_by(|a, b| a.ratio.total_cmp(&b.ratio));
    json!({
        "worst_sample": worst,
        "tag": r.tag,
        "samples": r.samples.len(),
        "unasserted": r.unasserted.len(),
        "fitted_constants": r.fitted_constants,
        "diagnostics": r.diagnostics,
        "min_ratio": r.min_ratio,
        "all_pass": r.all_pass,
    })
}

pub fn run_qi(config: &PingPongConfig, max_syllables: usize, max_syllable_len: usize) -> Result<Artifacts> {
    let cert = certify(config)?;
    let words = enumerate_reduced(config.sides(), max_syllables, max_syllable_len)?;
    let stats = all_word_stats(&words, config.sides())?;
    let qi = verify_qi(config, &cert, &stats)?;
    let mut plot = String::from("length log_s1_over_sd\n");
    for s in &stats {
        plot.push_str(&format!("{} {}\n", s.length, s.log_s1_sd));
    }
    Ok(Artifacts {
        pass: qi.all_pass,
        summary: json!({ "certificate": cert, "words": words.len(), "quasi_isometry": summary_of(&qi) }),
        csv: Some(csv_table(&[&qi])),
        plot: Some(plot),
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FreeprodParams {
    pub d: usize,
    pub eta: f64,
    pub eps: f64,
    pub max_syllables: usize,
    pub max_syllable_len: usize,
    pub budget: u32,
    pub max_power: u32,
}

/// Builds the pair, raises the letters of `gens` to admissible powers and
/// checks the product bound on every reduced word.
pub fn run_freeprod(config: &PingPongConfig, p: &FreeprodParams) -> Result<Artifacts> {
    if config.dim() != p.d {
        return Err(Error::Dimension { expected: p.d, got: config.dim() });
    }
    let pair = build_rep_pair(p.d, p.eta, p.budget)?;
    let (g1, a1) = admit_letters(&pair, &config.gamma1, p.max_power)?;
    let (g2, a2) = admit_letters(&pair, &config.gamma2, p.max_power)?;
    let report = verify_rep_product(&pair, &g1, &g2, p.max_syllables, p.max_syllable_len, p.eps)?;
    let mut plot = String::from("n log_ratio\n");
    for s in &report.samples {
        plot.push_str(&format!("{} {}\n", s.n, s.log_lhs));
    }
    Ok(Artifacts {
        pass: report.all_pass,
        summary: json!({
            "params": p,
            "pair": pair,
            "admissions": a1.iter().chain(&a2).collect::<Vec<_>>(),
            "rep_product": summary_of(&report),
        }),
        csv: Some(csv_table(&[&report])),
        plot: Some(plot),
    })
}

pub fn run_anosov_search(config: &PingPongConfig, seed: u64, budget: usize) -> Result<Artifacts> {
    let (search, _) = anosov_semigroup_search(config, seed, budget)?;
    Ok(Artifacts { pass: search.certificate.min_margin() > crate::pingpong::MARGIN_FLOOR, summary: to_value(&search), csv: None, plot: None })
}

/// Nested proper domains, inner ⊂ outer.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NestedPair {
    pub inner: ProperDomain,
    pub outer: ProperDomain,
}

pub fn parse_nested_json(text: &str) -> Result<NestedPair> {
    serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub interval_dist: f64,
    pub interval_rel_err: f64,
    pub pairs: usize,
    pub invariance_worst: f64,
    pub monotonicity_violations: usize,
    pub contraction_ratio: f64,
    pub pass: bool,
}

pub const INVARIANCE_TOL: f64 = 1e-12;

/// Interval value, invariance under a fixed transformation with transported
/// dual samples, exact monotonicity once the inner domain also carries the
/// outer samples, and the contraction ratio of the nested pair.
pub fn run_metric_checks(nested: &NestedPair, seed: u64, pairs: usize) -> Result<MetricReport> {
    let interval = interval_domain();
    let dist = caratheodory_dist(&interval, &ProjPoint::from_real(&[1.0, 0.0])?, &ProjPoint::from_real(&[1.0, 0.5])?)?;
    let rel = (dist - 3f64.ln()).abs() / 3f64.ln();
    let inner = nested.inner.with_extra_samples(&nested.outer.all_duals())?;
    let outer = &nested.outer;
    let d = inner.region().dim();
    let ball = &inner.region().balls()[inner.region().largest_ball()];
    let c = ball.center.real_rep();
    let mut pts = Vec::with_capacity(pairs);
    for t in 0..pairs {
        let mut r = trial_rng(seed, 31, t as u64);
        let a = point_near(&c, 0.9 * ball.radius, &mut r)?;
        let b = point_near(&c, 0.9 * ball.radius, &mut r)?;
        pts.push((a, b));
    }
    let mut rng = trial_rng(seed, 30, 0);
    let g = {
        let k = haar_orthogonal(d, &mut rng);
        let s: Vec<f64> = (0..d).map(|i| 1.0 + 0.5 * i as f64).collect();
        Factored::from_factors(&k, &s, &haar_orthogonal(d, &mut rng))
    };
    let duals = outer.all_duals();
    let moved: Vec<_> = duals.iter().map(|h| pullback_hyperplane(&g.g_inv, h)).collect();
    let mut invariance: f64 = 0.0;
    let mut mono = 0;
    for (x, y) in &pts {
        let a = sampled_dist(&duals, x, y);
        let b = sampled_dist(&moved, &crate::projgeom::act(&g.g, x), &crate::projgeom::act(&g.g, y));
        invariance = invariance.max((a - b).abs());
        if caratheodory_dist(&inner, x, y)? < caratheodory_dist(outer, x, y)? {
            mono += 1;
        }
    }
    let ratio = contraction_ratio(&inner, outer, &pts)?;
    Ok(MetricReport {
        interval_dist: dist,
        interval_rel_err: rel,
        pairs,
        invariance_worst: invariance,
        monotonicity_violations: mono,
        contraction_ratio: ratio,
        pass: rel < 0.01 && invariance <= INVARIANCE_TOL && mono == 0 && ratio > 1.0,
    })
}

/// A point at sine distance below `radius` from the unit vector c.
fn point_near<R: Rng>(c: &DVector<f64>, radius: f64, rng: &mut R) -> Result<ProjPoint> {
    let mut t = unit_vector(c.len(), rng);
    t -= c * c.dot(&t);
    let n = t.norm();
    if n < 1e-12 {
        return ProjPoint::from_real_vector(c);
    }
    let psi = (radius * rng.gen::<f64>()).asin();
    ProjPoint::from_real_vector(&(c + t * (psi.tan() / n)))
}
