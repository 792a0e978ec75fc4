//! Metric geometry of P(𝕂^d) and Gr_{d−1}(𝕂^d).
//!
//! ⟨u, v⟩ = Σ u_i·conj(v_i). d_P([u],[v]) is the sine of the angle between
//! the lines, d_Gr(u^⊥, v^⊥) = d_P([u],[v]), dist([u], P(n^⊥)) = |⟨u, n⟩|.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cartan_decompose, CartanData, Field, SquareMatrix, C64};

/// Slack for pure geometry identities.
pub const GEOM_SLACK: f64 = 1e-12;

pub fn inner(u: &DVector<C64>, v: &DVector<C64>) -> C64 {
    v.dotc(u)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProjPoint {
    rep: DVector<C64>,
    field: Field,
}

impl ProjPoint {
    pub fn new(v: DVector<C64>, field: Field) -> Result<Self> {
        if v.is_empty() {
            return Err(Error::Input("empty vector".into()));
        }
        if v.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("vector"));
        }
        if field == Field::Real && v.iter().any(|z| z.im != 0.0) {
            return Err(Error::Field("real point with imaginary entries"));
        }
        let n = v.norm();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::Input("zero vector has no projective class".into()));
        }
        // Already-unit vectors are kept as given so a stored point survives
        // a serialization round trip bit for bit.
        if (n - 1.0).abs() <= 4.0 * f64::EPSILON {
            return Ok(ProjPoint { rep: v, field });
        }
        Ok(ProjPoint { rep: v.map(|z| z / n), field })
    }

    pub fn from_real(v: &[f64]) -> Result<Self> {
        Self::new(DVector::from_iterator(v.len(), v.iter().map(|&x| C64::new(x, 0.0))), Field::Real)
    }

    pub fn from_real_vector(v: &DVector<f64>) -> Result<Self> {
        Self::new(v.map(|x| C64::new(x, 0.0)), Field::Real)
    }

    pub fn from_complex(v: DVector<C64>) -> Result<Self> {
        Self::new(v, Field::Complex)
    }

    pub fn basis(d: usize, i: usize) -> Self {
        let mut v = DVector::from_element(d, C64::new(0.0, 0.0));
        v[i] = C64::new(1.0, 0.0);
        ProjPoint { rep: v, field: Field::Real }
    }

    pub fn rep(&self) -> &DVector<C64> {
        &self.rep
    }

    pub fn real_rep(&self) -> DVector<f64> {
        self.rep.map(|z| z.re)
    }

    pub fn dim(&self) -> usize {
        self.rep.len()
    }

    pub fn field(&self) -> Field {
        self.field
    }

    pub fn approx_eq(&self, other: &ProjPoint, tol: f64) -> bool {
        proj_dist(self, other) <= tol
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Hyperplane {
    normal: ProjPoint,
}

impl Hyperplane {
    pub fn from_normal(normal: ProjPoint) -> Self {
        Hyperplane { normal }
    }

    pub fn from_real_normal(n: &[f64]) -> Result<Self> {
        Ok(Hyperplane { normal: ProjPoint::from_real(n)? })
    }

    pub fn normal(&self) -> &ProjPoint {
        &self.normal
    }

    pub fn dim(&self) -> usize {
        self.normal.dim()
    }
}

fn check_dims(a: usize, b: usize) {
    assert_eq!(a, b, "projective dimension mismatch");
}

pub fn proj_dist(x: &ProjPoint, y: &ProjPoint) -> f64 {
    check_dims(x.dim(), y.dim());
    let c = inner(&y.rep, &x.rep);
    let r = &y.rep - x.rep.map(|z| z * c);
    r.norm().min(1.0)
}

/// The Plücker form ‖u∧v‖/(‖u‖‖v‖) of the same distance.
pub fn proj_dist_wedge(u: &DVector<C64>, v: &DVector<C64>) -> f64 {
    let d = u.len();
    let mut s = 0.0;
    for i in 0..d {
        for j in i + 1..d {
            s += (u[i] * v[j] - u[j] * v[i]).norm_sqr();
        }
    }
    (s.sqrt() / (u.norm() * v.norm())).min(1.0)
}

pub fn gr_dist(v: &Hyperplane, w: &Hyperplane) -> f64 {
    proj_dist(&v.normal, &w.normal)
}

pub fn dist_point_hyperplane(x: &ProjPoint, v: &Hyperplane) -> f64 {
    check_dims(x.dim(), v.dim());
    inner(&x.rep, &v.normal.rep).norm().min(1.0)
}

/// Distance from a point to P(S), S spanned by the orthonormal columns of `frame`.
pub fn dist_point_subspace(x: &ProjPoint, frame: &DMatrix<C64>) -> Result<f64> {
    let d = x.dim();
    if frame.nrows() != d {
        return Err(Error::Dimension { expected: d, got: frame.nrows() });
    }
    let k = frame.ncols();
    if k == 0 || k >= d {
        return Err(Error::Input(format!("frame of {k} columns in dimension {d}")));
    }
    let gram = frame.adjoint() * frame;
    if (gram - DMatrix::<C64>::identity(k, k)).iter().any(|z| z.norm() > 1e-9) {
        return Err(Error::Input("frame not orthonormal".into()));
    }
    let proj = frame * (frame.adjoint() * &x.rep);
    Ok((&x.rep - proj).norm().min(1.0))
}

/// inf over the closed ball of radius sin(ρ) of a sine-of-angle distance
/// whose value at the center is `center_dist`.
pub fn ball_inf(center_dist: f64, radius: f64) -> f64 {
    let a = center_dist.clamp(0.0, 1.0).asin();
    let r = radius.clamp(0.0, 1.0).asin();
    if a <= r {
        0.0
    } else {
        (a - r).sin()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Space {
    P,
    Gr,
}

/// Closed ball. In a `Gr` region the center is the normal of the hyperplane.
#[derive(Clone, Debug, PartialEq)]
pub struct Ball {
    pub center: ProjPoint,
    pub radius: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BallRegion {
    space: Space,
    balls: Vec<Ball>,
}

impl BallRegion {
    pub fn new(space: Space, balls: Vec<Ball>) -> Result<Self> {
        let first = balls.first().ok_or_else(|| Error::Input("region needs at least one ball".into()))?;
        let d = first.center.dim();
        for b in &balls {
            if b.center.dim() != d {
                return Err(Error::Dimension { expected: d, got: b.center.dim() });
            }
            if !(b.radius > 0.0 && b.radius < 1.0) {
                return Err(Error::Input(format!("radius {} outside (0,1)", b.radius)));
            }
        }
        Ok(BallRegion { space, balls })
    }

    pub fn single(space: Space, center: ProjPoint, radius: f64) -> Result<Self> {
        Self::new(space, vec![Ball { center, radius }])
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn balls(&self) -> &[Ball] {
        &self.balls
    }

    pub fn dim(&self) -> usize {
        self.balls[0].center.dim()
    }

    pub fn field(&self) -> Field {
        self.balls.iter().fold(Field::Real, |f, b| f.join(b.center.field()))
    }

    /// Index of the ball of largest radius (first on ties).
    pub fn largest_ball(&self) -> usize {
        let mut best = 0;
        for (i, b) in self.balls.iter().enumerate() {
            if b.radius > self.balls[best].radius {
                best = i;
            }
        }
        best
    }

    pub fn contains(&self, x: &ProjPoint) -> bool {
        self.balls.iter().any(|b| proj_dist(x, &b.center) <= b.radius)
    }

    /// Exact distance from a point (or normal) to the union of closed balls.
    pub fn dist_to(&self, x: &ProjPoint) -> f64 {
        self.balls.iter().map(|b| ball_inf(proj_dist(x, &b.center), b.radius)).fold(f64::INFINITY, f64::min)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum VectorJson {
    Real(Vec<f64>),
    Complex(Vec<[f64; 2]>),
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BallJson {
    center: VectorJson,
    radius: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RegionJson {
    space: Space,
    balls: Vec<BallJson>,
}

fn point_to_json(p: &ProjPoint) -> VectorJson {
    match p.field {
        Field::Real => VectorJson::Real(p.rep.iter().map(|z| z.re).collect()),
        Field::Complex => VectorJson::Complex(p.rep.iter().map(|z| [z.re, z.im]).collect()),
    }
}

fn point_from_json(v: VectorJson) -> Result<ProjPoint> {
    match v {
        VectorJson::Real(x) => ProjPoint::from_real(&x),
        VectorJson::Complex(x) => {
            ProjPoint::from_complex(DVector::from_iterator(x.len(), x.iter().map(|p| C64::new(p[0], p[1]))))
        }
    }
}

impl Serialize for ProjPoint {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        point_to_json(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for ProjPoint {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        point_from_json(VectorJson::deserialize(de)?).map_err(serde::de::Error::custom)
    }
}

impl Serialize for Hyperplane {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.normal.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Hyperplane {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        Ok(Hyperplane { normal: ProjPoint::deserialize(de)? })
    }
}

impl Serialize for BallRegion {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        RegionJson {
            space: self.space,
            balls: self.balls.iter().map(|b| BallJson { center: point_to_json(&b.center), radius: b.radius }).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for BallRegion {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let json = RegionJson::deserialize(de)?;
        let mut balls = Vec::with_capacity(json.balls.len());
        for b in json.balls {
            let center = point_from_json(b.center).map_err(serde::de::Error::custom)?;
            balls.push(Ball { center, radius: b.radius });
        }
        BallRegion::new(json.space, balls).map_err(serde::de::Error::custom)
    }
}

pub fn parse_region_json(text: &str) -> Result<BallRegion> {
    serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
}

/// Certified lower bound on the distance between two closed regions.
pub fn region_separation(a: &BallRegion, b: &BallRegion) -> f64 {
    let mut best = f64::INFINITY;
    for x in &a.balls {
        for y in &b.balls {
            let center = if a.space == b.space {
                proj_dist(&x.center, &y.center)
            } else {
                inner(x.center.rep(), y.center.rep()).norm().min(1.0)
            };
            best = best.min(center - x.radius - y.radius);
        }
    }
    best.max(0.0)
}

fn phase(z: C64) -> C64 {
    let n = z.norm();
    if n > 0.0 {
        z / n
    } else {
        C64::new(1.0, 0.0)
    }
}

/// A point within θ of x whose distance to P(V) is at least θ/2.
///
/// Rotates V's normal to e₁ by a Householder reflection, replaces the
/// e₁-coordinate by θ/2 when it is smaller, and rotates back.
pub fn separated_point(x: &ProjPoint, theta: f64, v: &Hyperplane) -> Result<ProjPoint> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::Input(format!("theta {theta} outside (0,1)")));
    }
    if x.dim() != v.dim() {
        return Err(Error::Dimension { expected: x.dim(), got: v.dim() });
    }
    let n = v.normal.rep();
    // H n = α e₁ with α = −phase(n₁); H is Hermitian and unitary.
    let alpha = -phase(n[0]);
    let mut w = n.clone();
    w[0] -= alpha;
    let wn = w.norm_squared();
    let householder = |u: &DVector<C64>| -> DVector<C64> {
        if wn == 0.0 {
            return u.clone();
        }
        let c = w.dotc(u) * (2.0 / wn);
        u - w.map(|z| z * c)
    };
    let xr = householder(x.rep());
    if xr[0].norm() >= theta / 2.0 {
        return Ok(x.clone());
    }
    let mut w0 = xr.clone();
    w0[0] = C64::new(0.0, 0.0);
    let w0n = w0.norm();
    let gamma = if xr[0].norm() > 0.0 { phase(xr[0]) } else { alpha };
    let mut vp = w0.map(|z| z * ((1.0 - theta * theta / 4.0).sqrt() / w0n));
    vp[0] = gamma * (theta / 2.0);
    ProjPoint::new(householder(&vp), x.field.join(v.normal.field))
}

/// Interleaved realification (Re z₁, Im z₁, Re z₂, Im z₂, …).
pub fn realify(v: &DVector<C64>) -> DVector<f64> {
    DVector::from_fn(2 * v.len(), |i, _| if i % 2 == 0 { v[i / 2].re } else { v[i / 2].im })
}

fn plucker(v: &DVector<C64>) -> DVector<f64> {
    let a = realify(v);
    let b = realify(&v.map(|z| z * C64::new(0.0, 1.0)));
    let n = a.len();
    let mut out = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            out.push(a[i] * b[j] - a[j] * b[i]);
        }
    }
    DVector::from_vec(out)
}

/// ι: P(ℂ^d) → P(∧²ℝ^{2d}), [v] ↦ [v ∧ iv] with ℂ^d realified.
pub fn complex_embed(x: &ProjPoint) -> Result<ProjPoint> {
    if x.field != Field::Complex {
        return Err(Error::Field("complex point required"));
    }
    ProjPoint::from_real_vector(&plucker(x.rep()))
}

/// ι*: hyperplanes of ℂ^d to hyperplanes of ∧²ℝ^{2d}; ⟨ι(v), ι*(n)⟩ = |⟨v, n⟩|².
pub fn complex_embed_dual(v: &Hyperplane) -> Result<Hyperplane> {
    Ok(Hyperplane { normal: complex_embed(&v.normal)? })
}

/// [g·x].
pub fn act(g: &SquareMatrix, x: &ProjPoint) -> ProjPoint {
    ProjPoint::new(g.apply(x.rep()), g.field().join(x.field)).expect("invertible matrix maps nonzero to nonzero")
}

/// g^{-1}·V, whose normal is g*·n.
pub fn pullback_hyperplane(g: &SquareMatrix, v: &Hyperplane) -> Hyperplane {
    Hyperplane { normal: act(&g.adjoint(), &v.normal) }
}

/// Ξ₁(g) = [k_g e₁].
pub fn xi1(cd: &CartanData) -> ProjPoint {
    ProjPoint::new(cd.k_column(0), cd.k.field()).expect("unit column")
}

/// P((k′_g)^{-1} e₁^⊥) = Ξ_{d−1}(g^{-1}), the hyperplane g pushes away from.
pub fn repelling_hyperplane(cd: &CartanData) -> Hyperplane {
    Hyperplane { normal: ProjPoint::new(cd.k_prime_inv_column(0), cd.k_prime.field()).expect("unit row") }
}

/// Rigorous image of a closed ball: g·B(c, δ) ⊂ B(g·c, δ′) with
/// δ′ = (σ₂/σ₁)·δ/(a(a−δ)), a = dist(c, repelling hyperplane of g).
#[derive(Clone, Debug)]
pub struct BallImage {
    pub center: ProjPoint,
    pub radius: f64,
    pub transversality: f64,
}

pub fn ball_image(g: &SquareMatrix, cd: &CartanData, center: &ProjPoint, radius: f64) -> Result<BallImage> {
    let ratio = if cd.mu.len() > 1 { (cd.mu[1] - cd.mu[0]).exp() } else { 0.0 };
    ball_image_from(g, &cd.k_prime_inv_column(0), ratio, center, radius)
}

/// Same bound from the top right singular vector and σ₂/σ₁ supplied by the
/// caller, for products whose bottom singular values are not representable.
pub fn ball_image_from(g: &SquareMatrix, top_right: &DVector<C64>, ratio: f64, center: &ProjPoint, radius: f64) -> Result<BallImage> {
    let a = inner(center.rep(), top_right).norm();
    if !(radius < a) {
        return Err(Error::Degenerate(format!("ball of radius {radius} meets the repelling hyperplane (distance {a})")));
    }
    let r = (ratio * radius / (a * (a - radius))).min(1.0);
    Ok(BallImage { center: act(g, center), radius: r, transversality: a })
}

pub fn ball_image_of(g: &SquareMatrix, center: &ProjPoint, radius: f64) -> Result<BallImage> {
    let cd = cartan_decompose(g)?;
    ball_image(g, &cd, center, radius)
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
    const S: f64 = std::f64::consts::FRAC_1_SQRT_2;

    #[test]
    fn proj_dist_examples() {
        assert_eq!(proj_dist(&p(&[1.0, 0.0]), &p(&[1.0, 0.0])), 0.0);
        assert_relative_eq!(proj_dist(&p(&[1.0, 0.0]), &p(&[0.0, 1.0])), 1.0);
        assert_relative_eq!(proj_dist(&p(&[1.0, 0.0]), &p(&[1.0, 1.0])), S, epsilon = 1e-15);
    }

    #[test]
    fn gr_dist_examples() {
        assert_eq!(gr_dist(&h(&[1.0, 0.0]), &h(&[1.0, 0.0])), 0.0);
        assert_relative_eq!(gr_dist(&h(&[1.0, 0.0]), &h(&[0.0, 1.0])), 1.0);
        assert_relative_eq!(gr_dist(&h(&[1.0, 0.0]), &h(&[1.0, 1.0])), S, epsilon = 1e-15);
    }

    #[test]
    fn point_subspace_examples() {
        let e1perp = DMatrix::from_fn(2, 1, |i, _| C64::new(if i == 1 { 1.0 } else { 0.0 }, 0.0));
        assert_relative_eq!(dist_point_subspace(&p(&[1.0, 0.0]), &e1perp).unwrap(), 1.0);
        assert_relative_eq!(dist_point_subspace(&p(&[0.0, 1.0]), &e1perp).unwrap(), 0.0);
        assert_relative_eq!(dist_point_subspace(&p(&[1.0, 1.0]), &e1perp).unwrap(), S, epsilon = 1e-15);
        assert_relative_eq!(dist_point_hyperplane(&p(&[1.0, 1.0]), &h(&[1.0, 0.0])), S, epsilon = 1e-15);
        let bad = DMatrix::from_element(2, 1, C64::new(1.0, 0.0));
        assert!(dist_point_subspace(&p(&[1.0, 0.0]), &bad).is_err());
    }

    #[test]
    fn region_separation_examples() {
        let a = BallRegion::single(Space::P, p(&[1.0, 0.0, 0.0]), 0.1).unwrap();
        let b = BallRegion::single(Space::Gr, p(&[1.0, 0.0, 0.0]), 0.1).unwrap();
        assert_relative_eq!(region_separation(&a, &b), 0.8, epsilon = 1e-15);
        let a = BallRegion::single(Space::P, p(&[1.0, 0.0, 0.0]), 0.2).unwrap();
        let b = BallRegion::single(Space::Gr, p(&[0.0, 1.0, 0.0]), 0.1).unwrap();
        assert_eq!(region_separation(&a, &b), 0.0);
        let a = BallRegion::single(Space::P, p(&[1.0, 0.0]), 0.6).unwrap();
        let b = BallRegion::single(Space::Gr, p(&[1.0, 0.0]), 0.6).unwrap();
        assert_eq!(region_separation(&a, &b), 0.0);
    }

    #[test]
    fn separated_point_examples() {
        let y = separated_point(&p(&[1.0, 0.0]), 0.5, &h(&[1.0, 0.0])).unwrap();
        assert_eq!(y, p(&[1.0, 0.0]));
        let y = separated_point(&p(&[1.0, 0.0]), 0.5, &h(&[0.0, 1.0])).unwrap();
        let expect = p(&[(1.0f64 - 0.0625).sqrt(), 0.25]);
        assert!(proj_dist(&y, &expect) < 1e-15);
        assert_relative_eq!(proj_dist(&y, &p(&[1.0, 0.0])), 0.25, epsilon = 1e-15);
        assert!(separated_point(&p(&[1.0, 0.0]), 1.0, &h(&[0.0, 1.0])).is_err());
    }

    #[test]
    fn complex_embedding_of_first_axis() {
        let x = ProjPoint::from_complex(DVector::from_vec(vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)])).unwrap();
        let e = complex_embed(&x).unwrap();
        assert_eq!(e.dim(), 6);
        assert_relative_eq!(e.rep()[0].re.abs(), 1.0);
        let one = ProjPoint::from_complex(DVector::from_vec(vec![C64::new(0.0, 1.0)])).unwrap();
        assert_eq!(complex_embed(&one).unwrap().dim(), 1);
        assert!(complex_embed(&p(&[1.0, 0.0])).is_err());
    }

    #[test]
    fn region_json_round_trip() {
        let text = r#"{"space":"Gr","balls":[{"center":[1.0,0.0],"radius":0.25}]}"#;
        let r = parse_region_json(text).unwrap();
        assert_eq!(r.space(), Space::Gr);
        assert_eq!(serde_json::to_string(&r).unwrap(), text);
        assert!(parse_region_json(r#"{"space":"P","balls":[]}"#).is_err());
        assert!(parse_region_json(r#"{"space":"P","balls":[{"center":[0,0],"radius":0.1}]}"#).is_err());
        assert!(parse_region_json(r#"{"space":"P","balls":[{"center":[1,0],"radius":1.5}]}"#).is_err());
    }

    #[test]
    fn ball_image_contains_sampled_images() {
        let g = SquareMatrix::from_rows(&[vec![3.0, 1.0], vec![0.5, 0.4]]).unwrap();
        let c = p(&[1.0, 0.3]);
        let img = ball_image_of(&g, &c, 0.1).unwrap();
        for i in 0..64 {
            let t = i as f64 / 64.0 * std::f64::consts::PI;
            let rot = 0.1f64.asin();
            let base = c.real_rep();
            let perp = DVector::from_vec(vec![-base[1], base[0]]);
            let y = base * rot.cos() + perp * (rot.sin() * if t < 1.5 { 1.0 } else { -1.0 });
            let gy = act(&g, &ProjPoint::from_real_vector(&y).unwrap());
            assert!(proj_dist(&gy, &img.center) <= img.radius + 1e-12);
        }
    }
}
