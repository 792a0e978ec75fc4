//! Caratheodory metric on proper domains, cross-ratios, and the exact
//! Hilbert metric on ellipsoids and polytopes for comparison.
//!
//! With a finite set S of dual hyperplanes, sup over pairs of log|χ| equals
//! max_S f − min_S f for f(u) = log|⟨x,u⟩| − log|⟨y,u⟩|, so the sampled
//! distance is an exact pseudometric computed in O(|S|).

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Field, C64};
use crate::projgeom::{complex_embed, inner, proj_dist, BallRegion, Hyperplane, ProjPoint, Space};
use crate::sampling::{trial_rng, unit_vector};

/// Degeneracy threshold for cross-ratio denominators.
pub const DEGENERACY_TOL: f64 = 1e-12;

/// Default angular resolution of the dual sampler, in degrees.
pub const DEFAULT_RESOLUTION_DEG: f64 = 2.0;

const SUPPORT_INFLATION: f64 = 1e-6;
const RANDOM_SAMPLES_PER_BALL: usize = 2000;
const SAMPLER_SEED: u64 = 0x5eed_d0a1;

#[derive(Clone, Debug, PartialEq)]
pub struct ProperDomain {
    region: BallRegion,
    dual_witness: Hyperplane,
    dual_samples: Vec<Hyperplane>,
}

/// Smallest |⟨c, n⟩| − r over the balls: positive iff n^⊥ misses the closure.
pub fn transversality_margin(region: &BallRegion, n: &Hyperplane) -> f64 {
    region
        .balls()
        .iter()
        .map(|b| inner(b.center.rep(), n.normal().rep()).norm() - b.radius)
        .fold(f64::INFINITY, f64::min)
}

impl ProperDomain {
    pub fn new(region: BallRegion, dual_witness: Hyperplane, dual_samples: Vec<Hyperplane>) -> Result<Self> {
        if region.space() != Space::P {
            return Err(Error::Input("a proper domain lives in projective space".into()));
        }
        let d = region.dim();
        for h in std::iter::once(&dual_witness).chain(dual_samples.iter()) {
            if h.dim() != d {
                return Err(Error::Dimension { expected: d, got: h.dim() });
            }
        }
        let m = transversality_margin(&region, &dual_witness);
        if !(m > 0.0) {
            return Err(Error::Degenerate(format!("witness hyperplane meets the closure (margin {m})")));
        }
        for (i, h) in dual_samples.iter().enumerate() {
            let m = transversality_margin(&region, h);
            if !(m > 0.0) {
                return Err(Error::Degenerate(format!("dual sample {i} meets the closure (margin {m})")));
            }
        }
        Ok(ProperDomain { region, dual_witness, dual_samples })
    }

    pub fn with_default_sampler(region: BallRegion, dual_witness: Hyperplane) -> Result<Self> {
        Self::with_resolution(region, dual_witness, DEFAULT_RESOLUTION_DEG)
    }

    pub fn with_resolution(region: BallRegion, dual_witness: Hyperplane, resolution_deg: f64) -> Result<Self> {
        let samples = default_dual_samples(&region, resolution_deg);
        Self::new(region, dual_witness, samples)
    }

    /// Adds hyperplanes of another domain's dual that also avoid this closure.
    pub fn with_extra_samples(&self, extra: &[Hyperplane]) -> Result<Self> {
        let mut samples = self.dual_samples.clone();
        for h in extra {
            if transversality_margin(&self.region, h) > 0.0 {
                samples.push(h.clone());
            }
        }
        Self::new(self.region.clone(), self.dual_witness.clone(), samples)
    }

    pub fn region(&self) -> &BallRegion {
        &self.region
    }

    pub fn dual_witness(&self) -> &Hyperplane {
        &self.dual_witness
    }

    pub fn dual_samples(&self) -> &[Hyperplane] {
        &self.dual_samples
    }

    /// Witness followed by samples.
    pub fn all_duals(&self) -> Vec<Hyperplane> {
        std::iter::once(self.dual_witness.clone()).chain(self.dual_samples.iter().cloned()).collect()
    }
}

/// Orthonormal basis of the complement of the real unit vector c.
fn real_complement(c: &DVector<f64>) -> DMatrix<f64> {
    let d = c.len();
    let mut m = DMatrix::<f64>::identity(d, d);
    m.set_column(0, c);
    let q = m.qr().q();
    q.columns(1, d - 1).into_owned()
}

fn tangent_directions(k: usize, resolution_deg: f64) -> Vec<DVector<f64>> {
    let step = resolution_deg.to_radians();
    match k {
        1 => vec![DVector::from_vec(vec![1.0]), DVector::from_vec(vec![-1.0])],
        2 => {
            let n = (360.0 / resolution_deg).round() as usize;
            (0..n).map(|i| {
                let a = i as f64 * step;
                DVector::from_vec(vec![a.cos(), a.sin()])
            })
            .collect()
        }
        3 => {
            let nt = (180.0 / resolution_deg).round() as usize;
            let np = (360.0 / resolution_deg).round() as usize;
            let mut out = Vec::with_capacity(nt * np);
            for i in 0..nt {
                let t = (i as f64 + 0.5) * step;
                for j in 0..np {
                    let p = j as f64 * step;
                    out.push(DVector::from_vec(vec![t.sin() * p.cos(), t.sin() * p.sin(), t.cos()]));
                }
            }
            out
        }
        _ => Vec::new(),
    }
}

/// Supporting hyperplanes of slightly inflated balls, kept when they avoid
/// every ball of the region: a grid of the given angular resolution in each
/// tangent parameter for real d ≤ 4, a fixed-seed random set otherwise.
pub fn default_dual_samples(region: &BallRegion, resolution_deg: f64) -> Vec<Hyperplane> {
    let d = region.dim();
    let field = region.field();
    let mut out = Vec::new();
    for (bi, ball) in region.balls().iter().enumerate() {
        let s = ball.radius + (1.0 - ball.radius) * SUPPORT_INFLATION;
        let tc = (1.0 - s * s).sqrt();
        let c = ball.center.rep();
        let candidates: Vec<DVector<C64>> = if field == Field::Real && d <= 4 && d >= 2 {
            let cr = ball.center.real_rep();
            let basis = real_complement(&cr);
            tangent_directions(d - 1, resolution_deg)
                .into_iter()
                .map(|t| (&cr * s + &basis * t * tc).map(|x| C64::new(x, 0.0)))
                .collect()
        } else {
            let mut rng = trial_rng(SAMPLER_SEED, bi as u64, d as u64);
            (0..RANDOM_SAMPLES_PER_BALL)
                .filter_map(|_| {
                    let raw: DVector<C64> = if field == Field::Real {
                        unit_vector(d, &mut rng).map(|x| C64::new(x, 0.0))
                    } else {
                        DVector::from_fn(d, |_, _| C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
                    };
                    let proj = c.map(|z| z * inner(&raw, c));
                    let t = &raw - proj;
                    let n = t.norm();
                    (n > 1e-9).then(|| c.map(|z| z * s) + t.map(|z| z * (tc / n)))
                })
                .collect()
        };
        for v in candidates {
            if let Ok(p) = ProjPoint::new(v, field) {
                let h = Hyperplane::from_normal(p);
                if transversality_margin(region, &h) > 0.0 {
                    out.push(h);
                }
            }
        }
    }
    out
}

/// χ([v1],[v2]; u1^⊥, u2^⊥) = ⟨v1,u1⟩⟨v2,u2⟩ / (⟨v1,u2⟩⟨v2,u1⟩).
pub fn cross_ratio(v1: &ProjPoint, v2: &ProjPoint, u1: &Hyperplane, u2: &Hyperplane) -> Result<C64> {
    let a = inner(v1.rep(), u2.normal().rep());
    let b = inner(v2.rep(), u1.normal().rep());
    if a.norm() < DEGENERACY_TOL {
        return Err(Error::Degenerate(format!("⟨v1,u2⟩ = {a}")));
    }
    if b.norm() < DEGENERACY_TOL {
        return Err(Error::Degenerate(format!("⟨v2,u1⟩ = {b}")));
    }
    Ok(inner(v1.rep(), u1.normal().rep()) * inner(v2.rep(), u2.normal().rep()) / (a * b))
}

fn embedded(x: &ProjPoint) -> ProjPoint {
    if x.field() == Field::Complex {
        complex_embed(x).expect("complex point")
    } else {
        x.clone()
    }
}

/// sup over pairs in `duals` of log|χ(x, y; u1, u2)|, through ι/ι* for ℂ.
pub fn sampled_dist(duals: &[Hyperplane], x: &ProjPoint, y: &ProjPoint) -> f64 {
    let (ex, ey) = (embedded(x), embedded(y));
    let mut hi = f64::NEG_INFINITY;
    let mut lo = f64::INFINITY;
    for u in duals {
        let eu = embedded(u.normal());
        let f = inner(ex.rep(), eu.rep()).norm().ln() - inner(ey.rep(), eu.rep()).norm().ln();
        hi = hi.max(f);
        lo = lo.min(f);
    }
    if hi.is_finite() && lo.is_finite() {
        (hi - lo).max(0.0)
    } else {
        0.0
    }
}

/// Lower bound on d_U(x, y) from the stored dual hyperplanes.
pub fn caratheodory_dist(domain: &ProperDomain, x: &ProjPoint, y: &ProjPoint) -> Result<f64> {
    for (name, p) in [("x", x), ("y", y)] {
        if p.dim() != domain.region.dim() {
            return Err(Error::Dimension { expected: domain.region.dim(), got: p.dim() });
        }
        let inside = domain.region.balls().iter().any(|b| proj_dist(p, &b.center) <= b.radius + 1e-12);
        if !inside {
            return Err(Error::OutsideDomain(name.into()));
        }
    }
    Ok(sampled_dist(&domain.all_duals(), x, y))
}

/// A convex body in an affine chart.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConvexBody {
    /// {z : (z−c)ᵀA(z−c) < 1}, A positive definite.
    Ellipsoid { center: Vec<f64>, shape: Vec<Vec<f64>> },
    /// {z : a_i·z < b_i}.
    Polytope { normals: Vec<Vec<f64>>, offsets: Vec<f64> },
}

impl ConvexBody {
    pub fn ball(center: &[f64], radius: f64) -> ConvexBody {
        let n = center.len();
        let shape = (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 / (radius * radius) } else { 0.0 }).collect()).collect();
        ConvexBody::Ellipsoid { center: center.to_vec(), shape }
    }

    pub fn dim(&self) -> usize {
        match self {
            ConvexBody::Ellipsoid { center, .. } => center.len(),
            ConvexBody::Polytope { normals, .. } => normals.first().map_or(0, |r| r.len()),
        }
    }

    pub fn contains(&self, z: &[f64]) -> bool {
        match self {
            ConvexBody::Ellipsoid { center, shape } => {
                let u: Vec<f64> = z.iter().zip(center).map(|(a, b)| a - b).collect();
                quad(shape, &u, &u) < 1.0
            }
            ConvexBody::Polytope { normals, offsets } => {
                normals.iter().zip(offsets).all(|(a, b)| dot(a, z) < *b)
            }
        }
    }

    /// Chord parameters t_a < 0 < 1 < t_b where x + t(y−x) meets the boundary.
    fn chord(&self, x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
        let v: Vec<f64> = y.iter().zip(x).map(|(a, b)| a - b).collect();
        match self {
            ConvexBody::Ellipsoid { center, shape } => {
                let u: Vec<f64> = x.iter().zip(center).map(|(a, b)| a - b).collect();
                let a = quad(shape, &v, &v);
                let b = 2.0 * quad(shape, &u, &v);
                let c = quad(shape, &u, &u) - 1.0;
                let disc = b * b - 4.0 * a * c;
                if !(a > 0.0) || !(disc > 0.0) {
                    return Err(Error::Degenerate("chord misses the ellipsoid".into()));
                }
                let q = -0.5 * (b + b.signum() * disc.sqrt());
                let (r1, r2) = (q / a, c / q);
                Ok((r1.min(r2), r1.max(r2)))
            }
            ConvexBody::Polytope { normals, offsets } => {
                let mut ta = f64::NEG_INFINITY;
                let mut tb = f64::INFINITY;
                for (n, b) in normals.iter().zip(offsets) {
                    let den = dot(n, &v);
                    if den.abs() < 1e-300 {
                        continue;
                    }
                    let t = (b - dot(n, x)) / den;
                    if den > 0.0 {
                        tb = tb.min(t);
                    } else {
                        ta = ta.max(t);
                    }
                }
                if !ta.is_finite() || !tb.is_finite() {
                    return Err(Error::Degenerate("unbounded polytope along the chord".into()));
                }
                Ok((ta, tb))
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn quad(m: &[Vec<f64>], u: &[f64], v: &[f64]) -> f64 {
    m.iter().zip(u).map(|(row, ui)| ui * dot(row, v)).sum()
}

/// Hilbert distance ½·log of the boundary cross-ratio along the chord.
pub fn hilbert_dist(body: &ConvexBody, x: &[f64], y: &[f64]) -> Result<f64> {
    let n = body.dim();
    if x.len() != n || y.len() != n {
        return Err(Error::Dimension { expected: n, got: x.len().max(y.len()) });
    }
    if !body.contains(x) || !body.contains(y) {
        return Err(Error::OutsideDomain("hilbert_dist needs interior points".into()));
    }
    if x == y {
        return Ok(0.0);
    }
    let (ta, tb) = body.chord(x, y)?;
    Ok(0.5 * (((1.0 - ta) * tb) / ((-ta) * (tb - 1.0))).ln())
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DomainJson {
    region: BallRegion,
    dual_witness: Hyperplane,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dual_samples: Option<Vec<Hyperplane>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    resolution_deg: Option<f64>,
}

impl Serialize for ProperDomain {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        DomainJson {
            region: self.region.clone(),
            dual_witness: self.dual_witness.clone(),
            dual_samples: Some(self.dual_samples.clone()),
            resolution_deg: None,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for ProperDomain {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let j = DomainJson::deserialize(de)?;
        let r = match j.dual_samples {
            Some(s) => ProperDomain::new(j.region, j.dual_witness, s),
            None => {
                let res = j.resolution_deg.unwrap_or(DEFAULT_RESOLUTION_DEG);
                if !(res >= 0.25 && res <= 90.0) {
                    return Err(serde::de::Error::custom(format!("resolution {res} outside [0.25, 90] degrees")));
                }
                ProperDomain::with_resolution(j.region, j.dual_witness, res)
            }
        };
        r.map_err(serde::de::Error::custom)
    }
}

/// Parses a domain: region, witness, and either explicit dual samples or a
/// sampler resolution.
pub fn parse_domain_json(text: &str) -> Result<ProperDomain> {
    serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
}

/// The projective interval {[(1, t)] : |t| < 1} in P(ℝ²).
pub fn interval_domain() -> ProperDomain {
    let region = BallRegion::single(Space::P, ProjPoint::basis(2, 0), std::f64::consts::FRAC_1_SQRT_2).unwrap();
    ProperDomain::with_default_sampler(region, Hyperplane::from_normal(ProjPoint::basis(2, 0))).unwrap()
}

/// Affine chart z ↦ [z, 1] of the last coordinate.
pub fn affine_point(z: &[f64]) -> ProjPoint {
    let mut v = z.to_vec();
    v.push(1.0);
    ProjPoint::from_real(&v).expect("nonzero")
}

/// min over pairs of d_{inner}/d_{outer}.
pub fn contraction_ratio(inner_domain: &ProperDomain, outer: &ProperDomain, pairs: &[(ProjPoint, ProjPoint)]) -> Result<f64> {
    let mut best = f64::INFINITY;
    for (x, y) in pairs {
        let a = caratheodory_dist(inner_domain, x, y)?;
        let b = caratheodory_dist(outer, x, y)?;
        if b > 0.0 {
            best = best.min(a / b);
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn p(v: &[f64]) -> ProjPoint {
        ProjPoint::from_real(v).unwrap()
    }
    fn h(v: &[f64]) -> Hyperplane {
        Hyperplane::from_real_normal(v).unwrap()
    }

    #[test]
    fn cross_ratio_examples() {
        let x = p(&[0.3, 0.7]);
        let u1 = h(&[1.0, 1.0]);
        let u2 = h(&[1.0, -1.0]);
        assert_relative_eq!(cross_ratio(&x, &x, &u1, &u2).unwrap().re, 1.0, epsilon = 1e-15);
        let c = cross_ratio(&p(&[1.0, 0.0]), &p(&[0.0, 1.0]), &u1, &u2).unwrap();
        assert_relative_eq!(c.re, -1.0, epsilon = 1e-15);
        assert!(cross_ratio(&p(&[1.0, 1.0]), &x, &u1, &u2).is_err());
    }

    #[test]
    fn interval_fixture_gives_log_three() {
        let u = interval_domain();
        assert_eq!(u.dual_samples().len(), 2);
        let x = p(&[1.0, 0.0]);
        let y = p(&[1.0, 0.5]);
        let d = caratheodory_dist(&u, &x, &y).unwrap();
        assert!((d - 3f64.ln()).abs() / 3f64.ln() < 0.01, "{d}");
        assert!(d <= 3f64.ln());
        assert_eq!(caratheodory_dist(&u, &x, &x).unwrap(), 0.0);
        assert!(matches!(caratheodory_dist(&u, &x, &p(&[0.0, 1.0])), Err(Error::OutsideDomain(_))));
    }

    #[test]
    fn hilbert_interval() {
        let body = ConvexBody::Polytope { normals: vec![vec![1.0], vec![-1.0]], offsets: vec![1.0, 1.0] };
        assert_relative_eq!(hilbert_dist(&body, &[0.0], &[0.5]).unwrap(), 0.5 * 3f64.ln(), epsilon = 1e-15);
        assert_eq!(hilbert_dist(&body, &[0.2], &[0.2]).unwrap(), 0.0);
        let ball = ConvexBody::ball(&[0.0], 1.0);
        assert_relative_eq!(hilbert_dist(&ball, &[0.0], &[0.5]).unwrap(), 0.5 * 3f64.ln(), epsilon = 1e-15);
        assert!(hilbert_dist(&ball, &[0.0], &[1.5]).is_err());
    }

    #[test]
    fn sampler_counts_follow_resolution() {
        let r3 = BallRegion::single(Space::P, p(&[0.0, 0.0, 1.0]), 0.3).unwrap();
        assert_eq!(default_dual_samples(&r3, 2.0).len(), 180);
        let r4 = BallRegion::single(Space::P, p(&[0.0, 0.0, 0.0, 1.0]), 0.3).unwrap();
        assert_eq!(default_dual_samples(&r4, 2.0).len(), 16200);
    }

    #[test]
    fn domain_json_round_trip() {
        let u = interval_domain();
        let text = serde_json::to_string(&u).unwrap();
        assert_eq!(parse_domain_json(&text).unwrap(), u);
        let short = r#"{"region":{"space":"P","balls":[{"center":[1.0,0.0],"radius":0.5}]},"dual_witness":[1.0,0.0]}"#;
        assert_eq!(parse_domain_json(short).unwrap().dual_samples().len(), 2);
        let bad = r#"{"region":{"space":"P","balls":[{"center":[1.0,0.0],"radius":0.5}]},"dual_witness":[0.0,1.0]}"#;
        assert!(parse_domain_json(bad).is_err());
    }
}
