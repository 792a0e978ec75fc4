//! Ping-pong configurations and their certification.
//!
//! Certification is letter-level. Each letter ℓ of side i gets a set of
//! target balls of U_i, grown to a fixpoint: ℓ must map every ball of U_j
//! (j ≠ i) and every target ball of a letter that may precede it inside a
//! syllable (anything but ℓ^{-1}) into one ball of U_i. Induction on the
//! letters of a reduced word then gives γŪ_j ⊂ U_i for all syllables γ.
//! The V side is the same with ℓ* acting on normals.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cartan_decompose, gap_frame, SquareMatrix};
use crate::projgeom::{
    ball_image, ball_image_from, proj_dist, region_separation, BallRegion, Hyperplane, ProjPoint, Space,
};
use crate::words::{Letter, ReducedWord, Sides};

pub use crate::words::SemigroupGens;

/// Smallest inclusion margin accepted by `certify`.
pub const MARGIN_FLOOR: f64 = 1e-6;

/// Slack subtracted from every containment margin.
pub const BOUND_SLACK: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct PingPongConfig {
    pub gamma1: SemigroupGens,
    pub gamma2: SemigroupGens,
    pub u1: BallRegion,
    pub u2: BallRegion,
    pub v1: BallRegion,
    pub v2: BallRegion,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigJson {
    gamma1: serde_json::Value,
    gamma2: serde_json::Value,
    #[serde(rename = "U1")]
    u1: BallRegion,
    #[serde(rename = "U2")]
    u2: BallRegion,
    #[serde(rename = "V1")]
    v1: BallRegion,
    #[serde(rename = "V2")]
    v2: BallRegion,
}

impl PingPongConfig {
    pub fn new(
        gamma1: SemigroupGens,
        gamma2: SemigroupGens,
        u1: BallRegion,
        u2: BallRegion,
        v1: BallRegion,
        v2: BallRegion,
    ) -> Result<Self> {
        let d = gamma1.dim();
        if gamma1.label() != 1 || gamma2.label() != 2 {
            return Err(Error::Input("generating sets must carry labels 1 and 2".into()));
        }
        if gamma2.dim() != d {
            return Err(Error::Dimension { expected: d, got: gamma2.dim() });
        }
        for (name, r, space) in [("U1", &u1, Space::P), ("U2", &u2, Space::P), ("V1", &v1, Space::Gr), ("V2", &v2, Space::Gr)] {
            if r.dim() != d {
                return Err(Error::Dimension { expected: d, got: r.dim() });
            }
            if r.space() != space {
                return Err(Error::Input(format!("{name} must be a region in {space:?}")));
            }
        }
        Ok(PingPongConfig { gamma1, gamma2, u1, u2, v1, v2 })
    }

    pub fn dim(&self) -> usize {
        self.gamma1.dim()
    }

    pub fn sides(&self) -> Sides<'_> {
        Sides { g1: &self.gamma1, g2: &self.gamma2 }
    }

    pub fn gens(&self, side: u8) -> &SemigroupGens {
        if side == 1 {
            &self.gamma1
        } else {
            &self.gamma2
        }
    }

    pub fn u(&self, side: u8) -> &BallRegion {
        if side == 1 {
            &self.u1
        } else {
            &self.u2
        }
    }

    pub fn v(&self, side: u8) -> &BallRegion {
        if side == 1 {
            &self.v1
        } else {
            &self.v2
        }
    }

    pub fn is_group(&self) -> bool {
        self.gamma1.is_group() && self.gamma2.is_group()
    }

    pub fn to_json(&self) -> String {
        let j = ConfigJson {
            gamma1: self.gamma1.to_json_value(),
            gamma2: self.gamma2.to_json_value(),
            u1: self.u1.clone(),
            u2: self.u2.clone(),
            v1: self.v1.clone(),
            v2: self.v2.clone(),
        };
        serde_json::to_string_pretty(&j).expect("serializable")
    }
}

/// Parses `{"gamma1": gens, "gamma2": gens, "U1": region, ..., "V2": region}`
/// where gens is `{"letters": [matrix, ...], "is_group": bool}`.
pub fn parse_config_json(text: &str) -> Result<PingPongConfig> {
    let j: ConfigJson = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    PingPongConfig::new(
        SemigroupGens::from_json_value(j.gamma1, 1)?,
        SemigroupGens::from_json_value(j.gamma2, 2)?,
        j.u1,
        j.u2,
        j.v1,
        j.v2,
    )
}

/// Worst containment margin of one letter on one side of the certificate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LetterMargin {
    pub side: u8,
    pub letter: Letter,
    /// "U" for γŪ_j ⊂ U_i, "V" for γ^{-1}V̄_j ⊂ V_i.
    pub region: String,
    pub margin: f64,
    /// Ball indices of the target region that the letter's images land in.
    pub targets: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PingPongCertificate {
    pub dim: usize,
    pub epsilon: f64,
    pub theta: f64,
    #[serde(rename = "M")]
    pub m: f64,
    pub x1: ProjPoint,
    pub x2: ProjPoint,
    pub y1: Hyperplane,
    pub y2: Hyperplane,
    /// Separations (U1,V2), (U2,V1), (U1,V1), (U2,V2); only the first two enter ε.
    pub separations: [f64; 4],
    pub inclusion_margins: Vec<LetterMargin>,
}

impl PingPongCertificate {
    pub fn min_margin(&self) -> f64 {
        self.inclusion_margins.iter().map(|m| m.margin).fold(f64::INFINITY, f64::min)
    }
}

/// max{16/(εθ), 8√(d−1)/ε²}.
pub fn gap_threshold_formula(epsilon: f64, theta: f64, d: usize) -> f64 {
    (16.0 / (epsilon * theta)).max(8.0 * ((d - 1) as f64).sqrt() / (epsilon * epsilon))
}

pub fn gap_threshold(cert: &PingPongCertificate) -> f64 {
    cert.m
}

/// Best ball of `target` containing B(center, radius), with its margin.
pub fn best_container(target: &BallRegion, center: &ProjPoint, radius: f64) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, b) in target.balls().iter().enumerate() {
        let m = b.radius - proj_dist(center, &b.center) - radius - BOUND_SLACK;
        if m > best.1 {
            best = (i, m);
        }
    }
    best
}

struct SideCheck<'a> {
    name: &'static str,
    side: u8,
    letters: Vec<Letter>,
    maps: Vec<SquareMatrix>,
    own: &'a BallRegion,
    other: &'a BallRegion,
}

/// Target fixpoint for one side. Returns per-letter (margin, targets).
fn fixpoint(check: &SideCheck<'_>) -> Result<Vec<(f64, Vec<usize>)>> {
    let cds: Vec<_> = check.maps.iter().map(cartan_decompose).collect::<Result<_>>()?;
    let n = check.letters.len();
    let mut targets: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    loop {
        let results: Vec<Result<(f64, BTreeSet<usize>)>> = (0..n)
            .into_par_iter()
            .map(|li| {
                let l = check.letters[li];
                let mut sources: Vec<(&'static str, usize)> = (0..check.other.balls().len()).map(|b| ("other", b)).collect();
                let mut own: BTreeSet<usize> = BTreeSet::new();
                for (lj, t) in targets.iter().enumerate() {
                    if check.letters[lj] != -l {
                        own.extend(t.iter().copied());
                    }
                }
                sources.extend(own.into_iter().map(|b| ("own", b)));
                let mut margin = f64::INFINITY;
                let mut hit = BTreeSet::new();
                for (which, bi) in sources {
                    let ball = if which == "own" { &check.own.balls()[bi] } else { &check.other.balls()[bi] };
                    let img = ball_image(&check.maps[li], &cds[li], &ball.center, ball.radius).map_err(|e| {
                        Error::Certification(format!(
                            "side {} letter {l}: ball {bi} of {} meets the repelling hyperplane ({e})",
                            check.side,
                            if which == "own" { format!("{}{}", check.name, check.side) } else { format!("{}{}", check.name, 3 - check.side) }
                        ))
                    })?;
                    let (t, m) = best_container(check.own, &img.center, img.radius);
                    if !(m > MARGIN_FLOOR) {
                        return Err(Error::Certification(format!(
                            "side {} letter {l}: image of ball {bi} of {} is not inside {}{} (margin {m:.3e})",
                            check.side,
                            if which == "own" { format!("{}{}", check.name, check.side) } else { format!("{}{}", check.name, 3 - check.side) },
                            check.name,
                            check.side
                        )));
                    }
                    margin = margin.min(m);
                    hit.insert(t);
                }
                Ok((margin, hit))
            })
            .collect();
        let mut changed = false;
        let mut out = Vec::with_capacity(n);
        for (li, r) in results.into_iter().enumerate() {
            let (m, hit) = r?;
            if !hit.is_subset(&targets[li]) {
                targets[li].extend(hit.iter().copied());
                changed = true;
            }
            out.push((m, targets[li].iter().copied().collect()));
        }
        if !changed {
            return Ok(out);
        }
    }
}

/// Checks transversality and the letter-level mapping conditions.
pub fn certify(config: &PingPongConfig) -> Result<PingPongCertificate> {
    let d = config.dim();
    let separations = [
        region_separation(&config.u1, &config.v2),
        region_separation(&config.u2, &config.v1),
        region_separation(&config.u1, &config.v1),
        region_separation(&config.u2, &config.v2),
    ];
    let epsilon = separations[0].min(separations[1]);
    if !(epsilon > 0.0) {
        return Err(Error::Certification(format!(
            "regions are not transverse: sep(U1,V2) = {}, sep(U2,V1) = {}",
            separations[0], separations[1]
        )));
    }
    let largest = |r: &BallRegion| r.balls()[r.largest_ball()].radius;
    let theta = [&config.u1, &config.u2, &config.v1, &config.v2]
        .iter()
        .map(|r| largest(r))
        .fold(epsilon * epsilon * (1.0 - 1e-9), f64::min);
    let center = |r: &BallRegion| r.balls()[r.largest_ball()].center.clone();
    let mut margins = Vec::new();
    for side in [1u8, 2] {
        let gens = config.gens(side);
        let letters = gens.alphabet();
        let u_maps = letters.iter().map(|&l| gens.matrix(l).cloned()).collect::<Result<Vec<_>>>()?;
        let v_maps = u_maps.iter().map(|g| g.adjoint()).collect();
        let checks = [
            SideCheck { name: "U", side, letters: letters.clone(), maps: u_maps, own: config.u(side), other: config.u(3 - side) },
            SideCheck { name: "V", side, letters: letters.clone(), maps: v_maps, own: config.v(side), other: config.v(3 - side) },
        ];
        for check in &checks {
            for (l, (m, t)) in letters.iter().zip(fixpoint(check)?) {
                margins.push(LetterMargin { side, letter: *l, region: check.name.into(), margin: m, targets: t });
            }
        }
    }
    Ok(PingPongCertificate {
        dim: d,
        epsilon,
        theta,
        m: gap_threshold_formula(epsilon, theta, d),
        x1: center(&config.u1),
        x2: center(&config.u2),
        y1: Hyperplane::from_normal(center(&config.v1)),
        y2: Hyperplane::from_normal(center(&config.v2)),
        separations,
        inclusion_margins: margins,
    })
}

/// σ₁/σ₂ of a word evaluation, from σ₁(g)²/σ₁(∧²g).
pub fn word_gap(w: &ReducedWord) -> f64 {
    let s1 = w.eval().op_norm();
    s1 * s1 / w.wedge().op_norm()
}

/// Letters whose gap σ₁/σ₂ is below M.
pub fn exceptional_letters(gens: &SemigroupGens, cert: &PingPongCertificate) -> Result<Vec<Letter>> {
    let mut out = Vec::new();
    for l in gens.alphabet() {
        let g = gens.matrix(l)?;
        let s = crate::linalg::singular_values(g);
        if s[0] / s[1] < cert.m {
            out.push(l);
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum XiCheck {
    /// Gap below M, so the attraction bound does not apply.
    Inapplicable { gap: f64 },
    Checked { gap: f64, dist_u: f64, dist_v: f64, bound: f64, pass: bool },
}

/// Ξ₁(g) within ε/8 of U_{i(g₁)} and Ξ_{d−1}(g^{-1}) within ε/8 of V_{i(g_n)}.
pub fn check_xi_attraction(w: &ReducedWord, config: &PingPongConfig, cert: &PingPongCertificate) -> Result<XiCheck> {
    let gap = word_gap(w);
    if gap < cert.m {
        return Ok(XiCheck::Inapplicable { gap });
    }
    // Top singular directions of g and g*; no decomposition of the whole
    // product, whose bottom singular values may underflow.
    let top = |m: &SquareMatrix| -> Result<ProjPoint> { ProjPoint::new(gap_frame(m, 1)?.frame.column(0).into_owned(), m.field()) };
    let dist_u = config.u(w.first_side()).dist_to(&top(w.eval())?);
    let dist_v = config.v(w.last_side()).dist_to(&top(&w.eval().adjoint())?);
    let bound = cert.epsilon / 8.0;
    Ok(XiCheck::Checked { gap, dist_u, dist_v, bound, pass: dist_u <= bound && dist_v <= bound })
}

/// Direct check that a word maps Ū_j (j opposite its last syllable) into
/// U_{i(g₁)}: the smallest containment margin over the balls.
pub fn word_inclusion_margin(w: &ReducedWord, config: &PingPongConfig) -> Result<f64> {
    // σ₂/σ₁ from the letter-by-letter ∧² product; the top right singular
    // vector of g is the top left one of g*.
    let top = w.eval().op_norm();
    let ratio = w.wedge().op_norm() / (top * top);
    let right = gap_frame(&w.eval().adjoint(), 1)?.frame.column(0).into_owned();
    let source = config.u(3 - w.last_side());
    let target = config.u(w.first_side());
    let mut worst = f64::INFINITY;
    for b in source.balls() {
        let img = ball_image_from(w.eval(), &right, ratio, &b.center, b.radius)?;
        worst = worst.min(best_container(target, &img.center, img.radius).1);
    }
    Ok(worst)
}

/// Closures of two regions share no point.
pub fn regions_disjoint(a: &BallRegion, b: &BallRegion) -> bool {
    a.balls().iter().all(|x| b.balls().iter().all(|y| proj_dist(&x.center, &y.center) > x.radius + y.radius))
}

/// The condition under which the generated group is the free product:
/// disjoint U regions, disjoint V regions, or two groups.
pub fn free_product_condition(config: &PingPongConfig) -> Option<&'static str> {
    if regions_disjoint(&config.u1, &config.u2) {
        Some("disjoint U regions")
    } else if regions_disjoint(&config.v1, &config.v2) {
        Some("disjoint V regions")
    } else if config.is_group() {
        Some("both sides are groups")
    } else {
        None
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Distinctness {
    pub words: usize,
    pub min_distance: f64,
    pub closest: Option<(String, String)>,
}

/// Smallest operator-norm distance between evaluations of distinct words.
pub fn distinctness(words: &[ReducedWord]) -> Distinctness {
    let items: Vec<(String, &SquareMatrix)> = words.iter().map(|w| (w.word().id(), w.eval())).collect();
    distinctness_of(&items)
}

/// Same as [`distinctness`] for arbitrary labelled matrices.
pub fn distinctness_of(items: &[(String, &SquareMatrix)]) -> Distinctness {
    let best = (0..items.len())
        .into_par_iter()
        .map(|i| {
            let mut b = (f64::INFINITY, i, i);
            for j in i + 1..items.len() {
                let dist = items[i].1.dist_op(items[j].1);
                if dist < b.0 {
                    b = (dist, i, j);
                }
            }
            b
        })
        .reduce(|| (f64::INFINITY, usize::MAX, usize::MAX), |a, b| if b.0 < a.0 || (b.0 == a.0 && (b.1, b.2) < (a.1, a.2)) { b } else { a });
    Distinctness {
        words: items.len(),
        min_distance: best.0,
        closest: (best.1 != usize::MAX && best.1 != best.2).then(|| (items[best.1].0.clone(), items[best.2].0.clone())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::projgeom::Ball;

    fn ball(angle: f64, r: f64) -> Ball {
        Ball { center: ProjPoint::from_real(&[angle.cos(), angle.sin()]).unwrap(), radius: r }
    }

    fn rotated_config(angle: f64, r: f64) -> PingPongConfig {
        let a = SquareMatrix::diag(&[10.0, 0.1]).unwrap();
        let (c, s) = (angle.cos(), angle.sin());
        let rot = SquareMatrix::from_rows(&[vec![c, -s], vec![s, c]]).unwrap();
        let b = rot.mul(&a).mul(&rot.transpose());
        let g1 = SemigroupGens::new(vec![a], false, 1).unwrap();
        let g2 = SemigroupGens::new(vec![b], false, 2).unwrap();
        let p = |t: f64| BallRegion::new(Space::P, vec![ball(t, r)]).unwrap();
        let g = |t: f64| BallRegion::new(Space::Gr, vec![ball(t, r)]).unwrap();
        PingPongConfig::new(g1, g2, p(0.0), p(angle), g(0.0), g(angle)).unwrap()
    }

    #[test]
    fn threshold_formula() {
        assert!((gap_threshold_formula(0.5, 0.2, 2) - 160.0).abs() < 1e-12);
        assert!((gap_threshold_formula(1.0, 1.0, 5) - 16.0).abs() < 1e-12);
    }

    #[test]
    fn rotated_semigroups_certify() {
        let cfg = rotated_config(std::f64::consts::FRAC_PI_4, 0.1);
        let cert = certify(&cfg).unwrap();
        assert!(cert.epsilon >= 0.5, "{}", cert.epsilon);
        assert!(cert.theta < cert.epsilon * cert.epsilon);
        assert!(cert.min_margin() > MARGIN_FLOOR);
        assert_eq!(cert.inclusion_margins.len(), 4);
    }

    #[test]
    fn quarter_turn_copy_has_no_separation() {
        let cfg = rotated_config(std::f64::consts::FRAC_PI_2, 0.2);
        match certify(&cfg) {
            Err(Error::Certification(msg)) => assert!(msg.contains("sep(U1,V2) = 0"), "{msg}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn config_json_round_trip() {
        let cfg = rotated_config(std::f64::consts::FRAC_PI_4, 0.1);
        let back = parse_config_json(&cfg.to_json()).unwrap();
        assert_eq!(back.to_json(), cfg.to_json());
        assert!(parse_config_json("{}").is_err());
    }
}
