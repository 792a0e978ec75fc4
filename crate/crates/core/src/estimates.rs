//! Word-growth estimates with fitted constants, the quasi-isometry fit, the
//! gap-index selection rule, and a randomized suite of the basic
//! singular-value inequalities.
//!
//! A fitted constant is the infimum over the finite sample that makes the
//! inequality hold, so its witness word has ratio exactly 1.

use std::collections::BTreeMap;

use nalgebra::DVector;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{eigenvalue_moduli, singular_values, wedge_square, SquareMatrix, C64};
use crate::pingpong::{PingPongCertificate, PingPongConfig};
use crate::projgeom::{inner, proj_dist, separated_point, Hyperplane, ProjPoint};
use crate::sampling::{trial_rng, unit_vector, Factored};
use crate::words::{ReducedWord, Sides, Word};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateTag {
    /// σ₁/σ₂(w) ≥ C₁λⁿ.
    GapGrowth,
    /// σ₁(w) ≥ C₂ⁿ Π σ₁(γ_i).
    NormProduct,
    /// σ₁/σ₂(w) ≥ C₃ⁿ Π σ₁/σ₂(γ_i).
    GapProduct,
    /// ℓ₁/ℓ₂(w) ≥ C₄ⁿ Π σ₁/σ₂(γ_i), n even.
    EigenGapProduct,
    /// c^{-1}|w| − C ≤ log σ₁/σ_d(w) ≤ c|w| + C.
    QuasiIsometry,
    /// σ₁/σ_m(ρ(w)) ≥ Π (σ₁/σ_d(γ_i))^{2−ε}.
    RepProduct,
}

impl EstimateTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            EstimateTag::GapGrowth => "gap_growth",
            EstimateTag::NormProduct => "norm_product",
            EstimateTag::GapProduct => "gap_product",
            EstimateTag::EigenGapProduct => "eigen_gap_product",
            EstimateTag::QuasiIsometry => "quasi_isometry",
            EstimateTag::RepProduct => "rep_product",
        }
    }
}

/// One word's inequality, in logarithms: log_lhs ≥ log_rhs, ratio = e^{lhs−rhs}.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateSample {
    pub word: String,
    pub n: usize,
    pub length: usize,
    pub log_lhs: f64,
    pub log_rhs: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub tag: EstimateTag,
    pub samples: Vec<EstimateSample>,
    /// Reported but never asserted (odd words for the eigenvalue bound).
    pub unasserted: Vec<EstimateSample>,
    pub fitted_constants: BTreeMap<String, f64>,
    pub diagnostics: BTreeMap<String, f64>,
    pub min_ratio: f64,
    pub all_pass: bool,
}

pub const CSV_HEADER: &str = "word,tag,n,length,log_lhs,log_rhs,ratio";

impl EstimateReport {
    pub fn csv_rows(&self) -> Vec<String> {
        self.samples
            .iter()
            .map(|s| format!("{},{},{},{},{},{},{}", s.word, self.tag.as_str(), s.n, s.length, s.log_lhs, s.log_rhs, s.ratio))
            .collect()
    }
}

/// Logarithmic singular data of a word and of its syllables.
#[derive(Clone, Debug, PartialEq)]
pub struct WordStats {
    pub id: String,
    pub n: usize,
    pub length: usize,
    pub log_s1: f64,
    pub log_gap: f64,
    pub log_s1_sd: f64,
    pub log_eigen_gap: f64,
    pub log_l1: f64,
    pub syllable_log_s1: Vec<f64>,
    pub syllable_log_gap: Vec<f64>,
    pub syllable_log_s1_sd: Vec<f64>,
}

fn log_gap(w: &ReducedWord) -> f64 {
    2.0 * w.eval().op_norm().ln() - w.wedge().op_norm().ln()
}

fn log_s1_sd(w: &ReducedWord) -> f64 {
    w.eval().op_norm().ln() + w.eval_inv().op_norm().ln()
}

pub fn word_stats(w: &ReducedWord, sides: Sides<'_>) -> Result<WordStats> {
    let l1 = eigenvalue_moduli(w.eval())?[0];
    let lw = eigenvalue_moduli(w.wedge())?[0];
    let mut s1 = Vec::with_capacity(w.syllable_count());
    let mut gap = Vec::with_capacity(w.syllable_count());
    let mut sd = Vec::with_capacity(w.syllable_count());
    for syl in w.word().syllables() {
        let sw = ReducedWord::build(Word::reduce(vec![syl.clone()]), sides)?;
        s1.push(sw.eval().op_norm().ln());
        gap.push(log_gap(&sw));
        sd.push(log_s1_sd(&sw));
    }
    Ok(WordStats {
        id: w.word().id(),
        n: w.syllable_count(),
        length: w.word_length(),
        log_s1: w.eval().op_norm().ln(),
        log_gap: log_gap(w),
        log_s1_sd: log_s1_sd(w),
        log_eigen_gap: 2.0 * l1.ln() - lw.ln(),
        log_l1: l1.ln(),
        syllable_log_s1: s1,
        syllable_log_gap: gap,
        syllable_log_s1_sd: sd,
    })
}

/// Stats for many words, computed in parallel, order kept.
pub fn all_word_stats(words: &[ReducedWord], sides: Sides<'_>) -> Result<Vec<WordStats>> {
    words.par_iter().map(|w| word_stats(w, sides)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

/// Ordinary least squares of y on x.
pub fn linear_fit(points: &[(f64, f64)]) -> Result<LinearFit> {
    let n = points.len() as f64;
    if points.len() < 2 {
        return Err(Error::InsufficientData(format!("{} points", points.len())));
    }
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::InsufficientData("all x values coincide".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = points.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let r2 = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    Ok(LinearFit { slope, intercept, r2 })
}

/// Minimum of y for each distinct key, sorted by key.
fn per_key_minima(items: impl Iterator<Item = (usize, f64)>) -> Vec<(f64, f64)> {
    let mut m: BTreeMap<usize, f64> = BTreeMap::new();
    for (k, y) in items {
        let e = m.entry(k).or_insert(f64::INFINITY);
        *e = e.min(y);
    }
    m.into_iter().map(|(k, y)| (k as f64, y)).collect()
}

/// Exponential growth fit of log gaps against syllable count.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthFit {
    pub lambda: f64,
    pub c1: f64,
    pub r2: f64,
}

/// Fits log gap ≈ log C + n log λ on per-n minima, then lowers C to the
/// infimum over all samples.
pub fn growth_fit(samples: &[(usize, f64)]) -> Result<GrowthFit> {
    let minima = per_key_minima(samples.iter().copied());
    if minima.len() < 3 {
        return Err(Error::InsufficientData(format!("{} distinct syllable counts, need 3", minima.len())));
    }
    let fit = linear_fit(&minima)?;
    let log_c1 = samples.iter().map(|&(n, y)| y - n as f64 * fit.slope).fold(f64::INFINITY, f64::min);
    Ok(GrowthFit { lambda: fit.slope.exp(), c1: log_c1.exp(), r2: fit.r2 })
}

/// σ₁/σ₂ growth over certified words: passes iff λ > 1.
pub fn verify_gap_growth(_cert: &PingPongCertificate, stats: &[WordStats]) -> Result<EstimateReport> {
    let pts: Vec<(usize, f64)> = stats.iter().map(|s| (s.n, s.log_gap)).collect();
    let fit = growth_fit(&pts)?;
    let (ll, lc) = (fit.lambda.ln(), fit.c1.ln());
    let samples: Vec<EstimateSample> = stats
        .iter()
        .map(|s| {
            let rhs = lc + s.n as f64 * ll;
            EstimateSample { word: s.id.clone(), n: s.n, length: s.length, log_lhs: s.log_gap, log_rhs: rhs, ratio: (s.log_gap - rhs).exp() }
        })
        .collect();
    let min_ratio = samples.iter().map(|s| s.ratio).fold(f64::INFINITY, f64::min);
    let mut fitted = BTreeMap::new();
    fitted.insert("C1".into(), fit.c1);
    fitted.insert("lambda".into(), fit.lambda);
    let mut diag = BTreeMap::new();
    diag.insert("r2".into(), fit.r2);
    Ok(EstimateReport {
        tag: EstimateTag::GapGrowth,
        samples,
        unasserted: Vec::new(),
        fitted_constants: fitted,
        diagnostics: diag,
        min_ratio,
        all_pass: fit.lambda > 1.0 && min_ratio >= 1.0 - 1e-12,
    })
}

struct ProductTerm<'a> {
    id: &'a str,
    n: usize,
    length: usize,
    log_lhs: f64,
    log_factor: f64,
}

/// Largest c with lhs ≥ cⁿ·factor for every term, and the samples it induces.
fn product_constant(terms: &[ProductTerm<'_>]) -> (f64, Vec<EstimateSample>) {
    let log_c = terms.iter().map(|t| (t.log_lhs - t.log_factor) / t.n as f64).fold(f64::INFINITY, f64::min);
    let samples = terms
        .iter()
        .map(|t| {
            let rhs = t.n as f64 * log_c + t.log_factor;
            EstimateSample { word: t.id.to_string(), n: t.n, length: t.length, log_lhs: t.log_lhs, log_rhs: rhs, ratio: (t.log_lhs - rhs).exp() }
        })
        .collect();
    (log_c.exp(), samples)
}

fn product_report(tag: EstimateTag, name: &str, terms: Vec<ProductTerm<'_>>) -> Result<EstimateReport> {
    if terms.is_empty() {
        return Err(Error::InsufficientData("no words".into()));
    }
    let (c, samples) = product_constant(&terms);
    let min_ratio = samples.iter().map(|s| s.ratio).fold(f64::INFINITY, f64::min);
    let mut fitted = BTreeMap::new();
    fitted.insert(name.to_string(), c);
    Ok(EstimateReport {
        tag,
        samples,
        unasserted: Vec::new(),
        fitted_constants: fitted,
        diagnostics: BTreeMap::new(),
        min_ratio,
        all_pass: c > 0.0 && c.is_finite(),
    })
}

/// σ₁(w) ≥ C₂ⁿ Π σ₁(γ_i).
pub fn verify_norm_product(stats: &[WordStats]) -> Result<EstimateReport> {
    let terms = stats
        .iter()
        .map(|s| ProductTerm { id: &s.id, n: s.n, length: s.length, log_lhs: s.log_s1, log_factor: s.syllable_log_s1.iter().sum() })
        .collect();
    product_report(EstimateTag::NormProduct, "C2", terms)
}

/// σ₁/σ₂(w) ≥ C₃ⁿ Π σ₁/σ₂(γ_i).
pub fn verify_gap_product(stats: &[WordStats]) -> Result<EstimateReport> {
    let terms = stats
        .iter()
        .map(|s| ProductTerm { id: &s.id, n: s.n, length: s.length, log_lhs: s.log_gap, log_factor: s.syllable_log_gap.iter().sum() })
        .collect();
    product_report(EstimateTag::GapProduct, "C3", terms)
}

fn eigen_term(s: &WordStats) -> ProductTerm<'_> {
    ProductTerm { id: &s.id, n: s.n, length: s.length, log_lhs: s.log_eigen_gap, log_factor: s.syllable_log_gap.iter().sum() }
}

/// ℓ₁/ℓ₂(w) ≥ C₄ⁿ Π σ₁/σ₂(γ_i) on even words. Odd words are scored with the
/// fitted C₄ and reported separately. Also checks ℓ₁ ≤ σ₁ and reports the
/// constant of ℓ₁(w) ≥ cⁿ Π σ₁(γ_i).
pub fn verify_eigen_gap_product(stats: &[WordStats]) -> Result<EstimateReport> {
    let even: Vec<&WordStats> = stats.iter().filter(|s| s.n % 2 == 0).collect();
    let mut report = product_report(EstimateTag::EigenGapProduct, "C4", even.iter().map(|s| eigen_term(s)).collect())?;
    let log_c4 = report.fitted_constants["C4"].ln();
    report.unasserted = stats
        .iter()
        .filter(|s| s.n % 2 == 1)
        .map(|s| {
            let t = eigen_term(s);
            let rhs = s.n as f64 * log_c4 + t.log_factor;
            EstimateSample { word: s.id.clone(), n: s.n, length: s.length, log_lhs: t.log_lhs, log_rhs: rhs, ratio: (t.log_lhs - rhs).exp() }
        })
        .collect();
    let odd_min = report.unasserted.iter().map(|s| s.ratio).fold(f64::INFINITY, f64::min);
    let l1_violations = even.iter().filter(|s| s.log_l1 > s.log_s1 + 1e-9).count();
    let (c_l1, _) = product_constant(
        &even
            .iter()
            .map(|s| ProductTerm { id: &s.id, n: s.n, length: s.length, log_lhs: s.log_l1, log_factor: s.syllable_log_s1.iter().sum() })
            .collect::<Vec<_>>(),
    );
    report.diagnostics.insert("odd_min_ratio".into(), odd_min);
    report.diagnostics.insert("l1_above_s1_count".into(), l1_violations as f64);
    report.diagnostics.insert("eigen_norm_product_constant".into(), c_l1);
    report.all_pass = report.all_pass && l1_violations == 0;
    Ok(report)
}

/// Fits c^{-1}|w| − C ≤ log σ₁/σ_d(w) ≤ c|w| + C. The upper side uses the
/// largest letter ratio (submultiplicativity); the lower slope comes from
/// per-length minima. Passes iff the lower slope is positive.
pub fn verify_qi(config: &PingPongConfig, _cert: &PingPongCertificate, stats: &[WordStats]) -> Result<EstimateReport> {
    if !config.is_group() {
        return Err(Error::Input("the quasi-isometry fit needs two groups".into()));
    }
    let mut c_up: f64 = 0.0;
    for side in [1u8, 2] {
        let g = config.gens(side);
        for l in g.alphabet() {
            let s = singular_values(g.matrix(l)?);
            c_up = c_up.max((s[0] / s[s.len() - 1]).ln());
        }
    }
    let minima = per_key_minima(stats.iter().map(|s| (s.length, s.log_s1_sd)));
    if minima.len() < 3 {
        return Err(Error::InsufficientData(format!("{} distinct word lengths, need 3", minima.len())));
    }
    let fit = linear_fit(&minima)?;
    let s_low = fit.slope;
    let big_c = stats.iter().map(|s| s_low * s.length as f64 - s.log_s1_sd).fold(0.0, f64::max);
    let c = if s_low > 0.0 { (1.0 / s_low).max(c_up).max(1.0) } else { f64::INFINITY };
    let samples: Vec<EstimateSample> = stats
        .iter()
        .map(|s| {
            let rhs = s_low * s.length as f64 - big_c;
            EstimateSample { word: s.id.clone(), n: s.n, length: s.length, log_lhs: s.log_s1_sd, log_rhs: rhs, ratio: (s.log_s1_sd - rhs).exp() }
        })
        .collect();
    let upper_violations = stats.iter().filter(|s| s.log_s1_sd > c_up * s.length as f64 + 1e-9 * (1.0 + s.log_s1_sd.abs())).count();
    let min_ratio = samples.iter().map(|s| s.ratio).fold(f64::INFINITY, f64::min);
    let mut fitted = BTreeMap::new();
    fitted.insert("c".into(), c);
    fitted.insert("C".into(), big_c);
    fitted.insert("lower_slope".into(), s_low);
    fitted.insert("upper_slope".into(), c_up);
    let mut diag = BTreeMap::new();
    diag.insert("r2".into(), fit.r2);
    diag.insert("upper_violations".into(), upper_violations as f64);
    Ok(EstimateReport {
        tag: EstimateTag::QuasiIsometry,
        samples,
        unasserted: Vec::new(),
        fitted_constants: fitted,
        diagnostics: diag,
        min_ratio,
        all_pass: s_low > 0.0 && upper_violations == 0,
    })
}

/// Outcome of the gap-index selection rule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapIndex {
    pub k: usize,
    pub sigma_k: f64,
    pub ratio: f64,
    /// σ₁^{1−dε}.
    pub sigma_bound: f64,
    /// σ₁^ε.
    pub ratio_bound: f64,
    /// d < 4: the scan is well defined but outside the usual hypothesis.
    pub out_of_hypothesis: bool,
}

/// Minimal k with σ_k/σ_{k+1} ≥ σ₁^ε for g with σ₁σ_d = 1 and 0 < ε < 2/(d−1).
pub fn select_gap_index(g: &SquareMatrix, eps: f64, tol: f64) -> Result<GapIndex> {
    let d = g.dim();
    if d < 2 {
        return Err(Error::Dimension { expected: 2, got: d });
    }
    if !(eps > 0.0 && eps < 2.0 / (d - 1) as f64) {
        return Err(Error::Input(format!("eps {eps} outside (0, {})", 2.0 / (d - 1) as f64)));
    }
    let s = singular_values(g);
    // σ_d of a stored matrix is only known to about eps·σ₁.
    let allowance = tol + 8.0 * d as f64 * f64::EPSILON * s[0] * s[0];
    if !((s[0] * s[d - 1] - 1.0).abs() <= allowance) {
        return Err(Error::Precondition(format!("σ₁σ_d = {} is not 1", s[0] * s[d - 1])));
    }
    let ratio_bound = s[0].powf(eps);
    let sigma_bound = s[0].powf(1.0 - d as f64 * eps);
    for k in 1..d {
        let ratio = s[k - 1] / s[k];
        // Near σ₁ = 1 rounding can put every ratio just below σ₁^ε.
        if ratio >= ratio_bound * (1.0 - tol) {
            return Ok(GapIndex { k, sigma_k: s[k - 1], ratio, sigma_bound, ratio_bound, out_of_hypothesis: d < 4 });
        }
    }
    let (k, ratio) = (1..d).map(|k| (k, s[k - 1] / s[k])).fold((0, 0.0), |a, b| if b.1 > a.1 { b } else { a });
    Err(Error::NoGap { k, ratio })
}

// ---------------------------------------------------------------------------
// Randomized inequality suite.

/// Per-check tally; `asserted` checks decide the overall verdict.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckCount {
    pub name: String,
    pub asserted: bool,
    pub trials: usize,
    pub passed: usize,
    pub violations: usize,
    pub skipped: usize,
    pub out_of_hypothesis: usize,
    /// Largest lhs/rhs-type excess over all trials (≤ 0 means never violated).
    pub worst_excess: f64,
    pub counterexamples: Vec<serde_json::Value>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub seed: u64,
    pub trials: usize,
    pub tol: f64,
    pub checks: Vec<CheckCount>,
    pub all_pass: bool,
}

/// Kept counterexamples per check.
pub const MAX_COUNTEREXAMPLES: usize = 5;

/// Retries allowed when drawing inputs that satisfy a hypothesis.
pub const MAX_RETRIES: usize = 100;

/// Dimensions cycled through by trial index.
pub const SUITE_DIMS: [usize; 4] = [2, 3, 4, 6];

#[derive(Clone, Debug)]
enum Outcome {
    Pass { excess: f64, flagged: bool },
    Fail { excess: f64, payload: serde_json::Value },
    Skip,
}

fn judge(excess: f64, flagged: bool, payload: impl FnOnce() -> serde_json::Value) -> Outcome {
    if excess > 0.0 {
        Outcome::Fail { excess, payload: payload() }
    } else {
        Outcome::Pass { excess, flagged }
    }
}

fn rows(m: &SquareMatrix) -> serde_json::Value {
    serde_json::to_value(m).unwrap_or(serde_json::Value::Null)
}

fn vec_json(v: &DVector<f64>) -> serde_json::Value {
    serde_json::json!(v.iter().copied().collect::<Vec<_>>())
}

fn to_c(v: &DVector<f64>) -> DVector<C64> {
    v.map(|x| C64::new(x, 0.0))
}

fn apply(f: &Factored, x: &DVector<f64>) -> DVector<f64> {
    f.g.apply(&to_c(x)).map(|z| z.re)
}

fn pd(x: &DVector<f64>, y: &DVector<f64>) -> f64 {
    proj_dist(&ProjPoint::from_real_vector(x).expect("nonzero"), &ProjPoint::from_real_vector(y).expect("nonzero"))
}

/// Unit vector orthogonal to x.
fn orthogonal_unit<R: Rng>(x: &DVector<f64>, rng: &mut R) -> DVector<f64> {
    loop {
        let r = unit_vector(x.len(), rng);
        let t = &r - x * x.dot(&r);
        let n = t.norm();
        if n > 1e-6 {
            return t / n;
        }
    }
}

/// Violation excess for lhs ≤ rhs, relative to the scale of both sides.
fn excess_le(lhs: f64, rhs: f64, tol: f64) -> f64 {
    if rhs.is_infinite() && rhs > 0.0 {
        return -1.0;
    }
    lhs - rhs - tol * (1.0 + rhs.abs().max(lhs.abs()))
}

type Check = fn(usize, &mut rand_chacha::ChaCha8Rng, f64) -> Outcome;

/// Points of gB_δ(x) against the radius (2δ/ε)(σ₂/σ₁), or the corrected
/// (2δ/ε²)(σ₂/σ₁), where ε ≤ dist(x, repelling hyperplane) and δ ≤ ε/2.
fn ball_image_common(d: usize, rng: &mut rand_chacha::ChaCha8Rng, tol: f64, corrected: bool) -> Outcome {
    let g = Factored::random(d, -6.0, 6.0, rng);
    let x = unit_vector(d, rng);
    let a = x.dot(&g.right(0)).abs();
    let eps = a * (1.0 - rng.gen::<f64>());
    let delta = 0.5 * eps * (1.0 - rng.gen::<f64>());
    if !(eps > 0.0 && eps < 1.0 && delta > 0.0) {
        return Outcome::Skip;
    }
    let ratio = g.s[1] / g.s[0];
    let bound = if corrected { 2.0 * delta / (eps * eps) * ratio } else { 2.0 * delta / eps * ratio };
    let gx = apply(&g, &x);
    let mut lhs: f64 = 0.0;
    for _ in 0..64 {
        let t = orthogonal_unit(&x, rng);
        let y = &x * (1.0 - delta * delta).sqrt() + t * delta;
        lhs = lhs.max(pd(&gx, &apply(&g, &y)));
    }
    let e = excess_le(lhs, bound, tol);
    judge(e, false, || serde_json::json!({"g": rows(&g.g), "x": vec_json(&x), "epsilon": eps, "delta": delta, "lhs": lhs, "rhs": bound}))
}

fn ball_image_contraction(d: usize, rng: &mut rand_chacha::ChaCha8Rng, tol: f64) -> Outcome {
    ball_image_common(d, rng, tol, false)
}

fn ball_image_corrected(d: usize, rng: &mut rand_chacha::ChaCha8Rng, tol: f64) -> Outcome {
    ball_image_common(d, rng, tol, true)
}

/// If gB_δ(x) ⊂ B_r(gx) then σ₁/σ₂(g) ≥ (δ/4r)·dist(x, repelling hyperplane).
/// r is the largest observed image distance over 64 boundary points and the
/// extremal point x + t·v₂ (normalized), which is all the bound depends on.
fn gap_from_ball_image(d: usize, rng: &mut rand_chacha::ChaCha8Rng, tol: f64) -> Outcome {
    for _ in 0..MAX_RETRIES {
        let g = Factored::random(d, -6.0, 6.0, rng);
        let x = unit_vector(d, rng);
        let delta = 1.0 - rng.gen::<f64>();
        if delta >= 1.0 {
            continue;
        }
        let v2 = g.right(1);
        let c = x.dot(&v2).abs();
        let sq = (1.0 - c * c).max(0.0).sqrt();
        let t = delta / (delta + sq);
        let uy = (&x + &v2 * t).normalize();
        let gx = apply(&g, &x);
        let mut r = pd(&gx, &apply(&g, &uy));
        for _ in 0..64 {
            let w = orthogonal_unit(&x, rng);
            let y = &x * (1.0 - delta * delta).sqrt() + w * delta;
            r = r.max(pd(&gx, &apply(&g, &y)));
        }
        if !(r > 0.0 && r < 1.0) {
            continue;
        }
        let a = x.dot(&g.right(0)).abs();
        let lhs = g.s[0] / g.s[1];
        let rhs = delta / (4.0 * r) * a;
        let e = excess_le(rhs, lhs, tol);
        return judge(e, false, || serde_json::json!({"g": rows(&g.g), "x": vec_json(&x), "delta": delta, "r": r, "lhs": lhs, "rhs": rhs}));
    }
    Outcome::Skip
}

/// d_P(gx, Ξ₁(g)) ≤ (σ₂/σ₁)(g) / dist(x, repelling hyperplane).
fn attraction_to_top_direction(d: usize, rng: &mut rand_chacha::ChaCha8Rng, tol: f64) -> Outcome {
    let g = Factored::random(d, -6.0, 6.0, rng);
    let x = unit_vector(d, rng);
    let a = x.dot(&g.right(0)).abs();
    if a == 0.0 {
        return Outcome::Skip;
    }
    let lhs = pd(&apply(&g, &x), &g.left(0));
    let rhs = g.s[1] / g.s[0] / a;
    judge(excess_le(lhs, rhs, tol), false, || serde_json::json!({"g": rows(&g.g), "x": vec_json(&x), "lhs": lhs, "rhs": rhs}))
}

fn log_product_gap(w1: &Factored, w2: &Factored) -> Result<f64> {
    let p = w1.g.mul(&w2.g);
    let wp = wedge_square(&w1.g)?.mul(&wedge_square(&w2.g)?);
    Ok(2.0 * p.op_norm().ln() - wp.op_norm().ln())
}

/// σ₁/σ₂(w₁w₂) ≥ (σ_d/σ₁)(w_i)²·σ₁/σ₂(w₁)·σ₁/σ₂(w₂) for i = 1, 2.
fn product_gap_lower(d: usize, rng: &mut rand_chacha::ChaCha8Rng, tol: f64) -> Outcome {
    let w1 = Factored::random(d, -6.0, 6.0, rng);
    let w2 = Factored::random(d, -6.0, 6.0, rng);
    let Ok(lhs) = log_product_gap(&w1, &w2) else { return Outcome::Skip };
    let base = (w1.s[0] / w1.s[1]).ln() + (w2.s[0] / w2.s[1]).ln();
    let mut worst = f64::NEG_INFINITY;
    for w in [&w1, &w2] {
        let rhs = 2.0 * (w.s[d - 1] / w.s[0]).ln() + base;
        // in logs: relative slack tol on both sides
        worst = worst.max(rhs - lhs - tol * (1.0 + lhs.abs()));
    }
    judge(worst, false, || serde_json::json!({"w1": rows(&w1.g), "w2": rows(&w2.g), "log_lhs": lhs, "excess": worst}))
}

/// σ₁(g₁g₂)/(σ₁(g₁)σ₁(g₂)) ≥ |⟨Ξ₁(g₂), (k′_{g₁})^{-1}e₁⟩|.
fn product_norm_lower(d: usize, rng: &mut rand_chacha::ChaCha8Rng, tol: f64) -> Outcome {
    let g1 = Factored::random(d, -6.0, 6.0, rng);
    let g2 = Factored::random(d, -6.0, 6.0, rng);
    let lhs = g1.g.mul(&g2.g).op_norm() / (g1.s[0] * g2.s[0]);
    let rhs = g2.left(0).dot(&g1.right(0)).abs();
    judge(excess_le(rhs, lhs, tol), false, || serde_json::json!({"g1": rows(&g1.g), "g2": rows(&g2.g), "lhs": lhs, "rhs": rhs}))
}

/// d_P(Ξ₁(g₁g₂), Ξ₁(g₁)) ≤ √(d−1)σ₂(g₁)σ₁(g₂)/σ₁(g₁g₂)
///                      ≤ (σ₂/σ₁)(g₁)·√(d−1)/|⟨Ξ₁(g₂), (k′_{g₁})^{-1}e₁⟩|.
fn direction_stability(g1: &Factored, g2: &Factored, tol: f64) -> Outcome {
    let d = g1.s.len();
    let p = g1.g.mul(&g2.g);
    let Ok(svd) = crate::linalg::svd(&p) else { return Outcome::Skip };
    let top = ProjPoint::new(svd.u.column(0).into_owned(), p.field()).expect("unit");
    let lhs = proj_dist(&top, &ProjPoint::from_real_vector(&g1.left(0)).expect("unit"));
    let root = ((d - 1) as f64).sqrt();
    let mid = root * g1.s[1] * g2.s[0] / p.op_norm();
    let dist = g2.left(0).dot(&g1.right(0)).abs();
    let rhs = if dist > 0.0 { g1.s[1] / g1.s[0] * root / dist } else { f64::INFINITY };
    let e = excess_le(lhs, mid, tol).max(excess_le(mid, rhs, tol));
    judge(e, false, || serde_json::json!({"g1": rows(&g1.g), "g2": rows(&g2.g), "lhs": lhs, "mid": mid, "rhs": rhs}))
}

fn top_direction_stability(d: usize, rng: &mut rand_chacha::ChaCha8Rng, tol: f64) -> Outcome {
    let g1 = Factored::random(d, -6.0, 6.0, rng);
    let g2 = Factored::random(d, -6.0, 6.0, rng);
    direction_stability(&g1, &g2, tol)
}

/// The hyperplane version: d_Gr(k_{g₁g₂}e_d^⊥, k_{g₁}e_d^⊥) against
/// √(d−1)σ_d(g₁g₂)/(σ_d(g₂)σ_{d−1}(g₁)), which is the top-direction bound for
/// the pair g₁^{-t}, g₂^{-t}.
fn bottom_hyperplane_stability(d: usize, rng: &mut rand_chacha::ChaCha8Rng, tol: f64) -> Outcome {
    let g1 = Factored::random(d, -6.0, 6.0, rng);
    let g2 = Factored::random(d, -6.0, 6.0, rng);
    direction_stability(&g1.inverse_adjoint(), &g2.inverse_adjoint(), tol)
}

/// A point y with d_P(x, y) ≤ θ and dist(y, P(V)) ≥ θ/2.
fn separated_point_check(d: usize, rng: &mut rand_chacha::ChaCha8Rng, tol: f64) -> Outcome {
    let n = unit_vector(d, rng);
    let theta = 1.0 - rng.gen::<f64>();
    if theta >= 1.0 {
        return Outcome::Skip;
    }
    // Half of the trials start close to the hyperplane.
    let x = if rng.gen::<bool>() {
        let t = orthogonal_unit(&n, rng);
        (t + &n * (0.5 * theta * rng.gen::<f64>())).normalize()
    } else {
        unit_vector(d, rng)
    };
    let xp = ProjPoint::from_real_vector(&x).expect("unit");
    let v = Hyperplane::from_real_normal(n.as_slice()).expect("unit");
    let Ok(y) = separated_point(&xp, theta, &v) else { return Outcome::Skip };
    let moved = proj_dist(&xp, &y);
    let dist = inner(y.rep(), v.normal().rep()).norm();
    let e = excess_le(moved, theta, tol).max(excess_le(theta / 2.0, dist, tol));
    judge(e, false, || serde_json::json!({"x": vec_json(&x), "normal": vec_json(&n), "theta": theta, "moved": moved, "dist": dist}))
}

/// σ_k ≥ σ₁^{1−dε} and σ_k/σ_{k+1} ≥ σ₁^ε at the selected index.
fn gap_index_selection(d: usize, rng: &mut rand_chacha::ChaCha8Rng, tol: f64) -> Outcome {
    let top = rng.gen_range(0.0..=6.0f64);
    let mut s: Vec<f64> = (0..d).map(|_| 10f64.powf(rng.gen_range(-top..=top))).collect();
    s[0] = 10f64.powf(top);
    s[d - 1] = 10f64.powf(-top);
    s.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let k = crate::sampling::haar_orthogonal(d, rng);
    let kp = crate::sampling::haar_orthogonal(d, rng);
    let g = Factored::from_factors(&k, &s, &kp);
    let eps = 2.0 / (d - 1) as f64 * (1.0 - rng.gen::<f64>());
    if !(eps < 2.0 / (d - 1) as f64) {
        return Outcome::Skip;
    }
    match select_gap_index(&g.g, eps, tol) {
        Ok(sel) => {
            let e1 = (sel.sigma_bound.ln() - sel.sigma_k.ln()) - tol * (1.0 + sel.sigma_k.ln().abs());
            let e2 = (sel.ratio_bound.ln() - sel.ratio.ln()) - tol * (1.0 + sel.ratio.ln().abs());
            judge(e1.max(e2), sel.out_of_hypothesis, || serde_json::json!({"g": rows(&g.g), "eps": eps, "selection": sel}))
        }
        Err(err) => Outcome::Fail { excess: f64::INFINITY, payload: serde_json::json!({"g": rows(&g.g), "eps": eps, "error": err.to_string()}) },
    }
}

/// (name, asserted, stream, check). Two checks sharing a stream see the same inputs.
const CHECKS: [(&str, bool, u64, Check); 10] = [
    ("ball_image_contraction", true, 1, ball_image_contraction),
    ("ball_image_corrected", false, 1, ball_image_corrected),
    ("gap_from_ball_image", true, 2, gap_from_ball_image),
    ("attraction_to_top_direction", true, 3, attraction_to_top_direction),
    ("product_gap_lower", true, 4, product_gap_lower),
    ("product_norm_lower", true, 5, product_norm_lower),
    ("top_direction_stability", true, 6, top_direction_stability),
    ("bottom_hyperplane_stability", true, 7, bottom_hyperplane_stability),
    ("separated_point", true, 8, separated_point_check),
    ("gap_index_selection", true, 9, gap_index_selection),
];

pub fn check_names() -> Vec<&'static str> {
    CHECKS.iter().map(|c| c.0).collect()
}

/// Runs every check on `trials` random inputs. Inputs depend only on
/// (seed, check stream, trial), so the result is independent of threading.
pub fn lemma_suite(seed: u64, trials: usize, tol: f64) -> Result<SuiteReport> {
    if trials == 0 {
        return Err(Error::Input("trials must be at least 1".into()));
    }
    if !(tol >= 0.0 && tol.is_finite()) {
        return Err(Error::Input(format!("tolerance {tol} must be finite and non-negative")));
    }
    let checks: Vec<CheckCount> = CHECKS
        .iter()
        .map(|&(name, asserted, stream, check)| {
            let outcomes: Vec<Outcome> = (0..trials)
                .into_par_iter()
                .map(|t| {
                    let d = SUITE_DIMS[t % SUITE_DIMS.len()];
                    let mut rng = trial_rng(seed, stream, t as u64);
                    check(d, &mut rng, tol)
                })
                .collect();
            let mut c = CheckCount {
                name: name.into(),
                asserted,
                trials,
                passed: 0,
                violations: 0,
                skipped: 0,
                out_of_hypothesis: 0,
                worst_excess: f64::NEG_INFINITY,
                counterexamples: Vec::new(),
            };
            for (t, o) in outcomes.into_iter().enumerate() {
                match o {
                    Outcome::Pass { excess, flagged } => {
                        c.passed += 1;
                        c.out_of_hypothesis += flagged as usize;
                        c.worst_excess = c.worst_excess.max(excess);
                    }
                    Outcome::Fail { excess, payload } => {
                        c.violations += 1;
                        c.worst_excess = c.worst_excess.max(excess);
                        if c.counterexamples.len() < MAX_COUNTEREXAMPLES {
                            c.counterexamples.push(serde_json::json!({"trial": t, "dim": SUITE_DIMS[t % SUITE_DIMS.len()], "data": payload}));
                        }
                    }
                    Outcome::Skip => c.skipped += 1,
                }
            }
            c
        })
        .collect();
    let all_pass = checks.iter().filter(|c| c.asserted).all(|c| c.violations == 0);
    Ok(SuiteReport { seed, trials, tol, checks, all_pass })
}
