//! Representations of SL_d ∗ SL_d through the tensor action on
//! Sym_d ⊗ Sym_d, the convex domains behind them, and two searches that use
//! convexity: the avoidance test for gap subspaces and the proximal-power
//! extension of a ping-pong group.
//!
//! Coordinates on ℝ^m are (V⊗V) ⊕ U with V = Sym_d(ℝ) in its orthonormal
//! basis, V⊗V indexed by i·n + j (n = dim V) and U the last coordinate.
//! ρ₁(g) = φ(g) ⊕ 1 and ρ₂(g) = w·ρ₁(g)·w^{-1}.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimates::{EstimateReport, EstimateSample, EstimateTag};
use crate::linalg::{cartan_decompose, gap_frame, phi_dim, phi_rep, singular_values, sym_vec, SquareMatrix};
use crate::pingpong::{
    best_container, certify, distinctness_of, PingPongCertificate, PingPongConfig, BOUND_SLACK, MARGIN_FLOOR,
};
use crate::projgeom::{
    ball_image, ball_inf, dist_point_subspace, proj_dist, region_separation, Ball, BallRegion, Hyperplane, ProjPoint,
    Space,
};
use crate::sampling::{trial_rng, unit_vector};
use crate::words::{enumerate_reduced, SemigroupGens, Sides, Word};

/// (N, m) = (d²(d+1)²/4, N + 1).
pub fn rep_dims(d: usize) -> (usize, usize) {
    let n = phi_dim(d);
    (n, n + 1)
}

// Shape of the d = 2 construction. The chain spacing (≈0.025) leaves room
// for letter images of 𝒞₂ inside a single chain ball.
const CHAIN_SIZE: usize = 128;
const CHAIN_RADIUS: f64 = 0.1;
const TARGET_RADIUS: f64 = 0.05;
const TARGET_ANGLE: f64 = FRAC_PI_4;
const AXIS_SPREAD: f64 = 0.02;
const AXIS_EIGENVALUE: f64 = 4.0;
const CONE_TILT: f64 = 0.95;

/// Relative tolerance on det = 1 and on σ₁σ_N = 1.
pub const UNIMODULAR_TOL: f64 = 1e-9;

fn real(m: &SquareMatrix) -> Result<DMatrix<f64>> {
    m.to_real()
}

fn lift(m: DMatrix<f64>) -> Result<SquareMatrix> {
    SquareMatrix::from_real(m)
}

fn pad(v: &DVector<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(v.len() + 1);
    out.rows_mut(0, v.len()).copy_from(v);
    out
}

fn unit_u(m: usize) -> DVector<f64> {
    let mut e = DVector::zeros(m);
    e[m - 1] = 1.0;
    e
}

fn point(v: &DVector<f64>) -> ProjPoint {
    ProjPoint::from_real_vector(v).expect("nonzero finite vector")
}

fn identity_sym(d: usize) -> DVector<f64> {
    sym_vec(&DMatrix::identity(d, d))
}

/// [I ⊗ I] in P(ℝ^m): pairs to 1/d with every limit direction.
pub fn identity_direction(d: usize) -> DVector<f64> {
    let i = identity_sym(d);
    let v = pad(&i.kronecker(&i));
    let n = v.norm();
    v / n
}

/// [xxᵗ ⊗ yyᵗ] for x = (cos t, sin t), y = (−sin t, cos t).
fn limit_direction(t: f64) -> DVector<f64> {
    let x = DVector::from_vec(vec![t.cos(), t.sin()]);
    let y = DVector::from_vec(vec![-t.sin(), t.cos()]);
    pad(&sym_vec(&(&x * x.transpose())).kronecker(&sym_vec(&(&y * y.transpose()))))
}

/// Orthonormal basis of the complement of the (orthonormal) `span`.
fn orthonormal_complement(span: &[DVector<f64>], dim: usize) -> Vec<DVector<f64>> {
    let mut basis: Vec<DVector<f64>> = span.to_vec();
    let mut out = Vec::new();
    for k in 0..dim {
        if basis.len() == dim {
            break;
        }
        let mut v = DVector::zeros(dim);
        v[k] = 1.0;
        for _ in 0..2 {
            for b in &basis {
                let c = b.dot(&v);
                v -= b * c;
            }
        }
        let n = v.norm();
        if n > 1e-8 {
            v /= n;
            basis.push(v.clone());
            out.push(v);
        }
    }
    out
}

fn sym_op_norm(v: &DVector<f64>, d: usize) -> f64 {
    let x = crate::linalg::sym_mat(v, d);
    SymmetricEigen::new(x).eigenvalues.iter().fold(0.0f64, |a, l| a.max(l.abs()))
}

/// PD matrices b₁…b_n around I whose tensor products b_i ⊗ b_j span a
/// simplicial cone inside the cone over PD ⊗ PD.
fn simplicial_frame(d: usize) -> Result<DMatrix<f64>> {
    let q1 = identity_sym(d) / (d as f64).sqrt();
    let rest = orthonormal_complement(std::slice::from_ref(&q1), q1.len());
    let sum: DVector<f64> = rest.iter().fold(DVector::zeros(q1.len()), |a, r| a + r);
    let worst = rest.iter().map(|r| sym_op_norm(r, d)).fold(sym_op_norm(&sum, d), f64::max);
    let tau = CONE_TILT / ((d as f64).sqrt() * worst);
    let mut cols = vec![&q1 - &sum * tau];
    cols.extend(rest.iter().map(|r| &q1 + r * tau));
    for b in &cols {
        if Cholesky::new(crate::linalg::sym_mat(b, d)).is_none() {
            return Err(Error::Degenerate("simplicial frame left the PD cone".into()));
        }
    }
    Ok(DMatrix::from_columns(&cols))
}

/// Angular margin by which the ball B(c, r) sits inside the simplicial cone
/// over b_i ⊗ b_j (plus the U line): π/2 − asin r − max angle(ℓ, c) over
/// its facet functionals ℓ. Positive means the whole ball is inside.
fn sum_cone_margin(d: usize, center: &DVector<f64>, radius: f64) -> Result<f64> {
    let b = simplicial_frame(d)?;
    let binv = b.try_inverse().ok_or(Error::Singular(0.0))?;
    let n = binv.nrows();
    let c = center / center.norm();
    let mut worst = 0.0f64;
    for k in 0..n {
        for l in 0..n {
            let f = pad(&binv.row(k).transpose().kronecker(&binv.row(l).transpose()));
            let cos = (f.dot(&c) / f.norm()).clamp(-1.0, 1.0);
            worst = worst.max(cos.acos());
        }
    }
    Ok(FRAC_PI_2 - radius.asin() - worst)
}

/// A convex domain in projective space with the data used to test it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ConvexDomainSpec {
    /// Klein model {x₁² + … + x_{k−1}² < x_k²} in P(ℝ^k).
    Ellipsoid { dim: usize },
    /// Positive definite matrices in P(Sym_d(ℝ)), orthonormal coordinates.
    PdCone { d: usize },
    /// Cone over PD ⊗ PD plus the U line in P(ℝ^m). Contains a projective
    /// line, so it is convex but not properly convex; membership is tested
    /// through an inscribed simplicial cone.
    SumCone { d: usize },
    Ball { center: Vec<f64>, radius: f64 },
}

impl ConvexDomainSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            ConvexDomainSpec::Ellipsoid { dim } if *dim < 2 => Err(Error::Input(format!("ellipsoid in dimension {dim}"))),
            ConvexDomainSpec::PdCone { d } | ConvexDomainSpec::SumCone { d } if *d < 2 => {
                Err(Error::Input(format!("matrix size {d} below 2")))
            }
            ConvexDomainSpec::Ball { center, radius } => {
                if !(*radius > 0.0 && *radius < 1.0) {
                    return Err(Error::Input(format!("radius {radius} outside (0,1)")));
                }
                if center.len() < 2 {
                    return Err(Error::Input("ball center needs dimension at least 2".into()));
                }
                ProjPoint::from_real(center).map(|_| ())
            }
            _ => Ok(()),
        }
    }

    pub fn ambient_dim(&self) -> usize {
        match self {
            ConvexDomainSpec::Ellipsoid { dim } => *dim,
            ConvexDomainSpec::PdCone { d } => d * (d + 1) / 2,
            ConvexDomainSpec::SumCone { d } => rep_dims(*d).1,
            ConvexDomainSpec::Ball { center, .. } => center.len(),
        }
    }

    pub fn properly_convex(&self) -> bool {
        !matches!(self, ConvexDomainSpec::SumCone { .. })
    }

    /// Hyperplane at infinity of the affine chart the domain is drawn in.
    pub fn chart(&self) -> Hyperplane {
        let n = match self {
            ConvexDomainSpec::Ellipsoid { dim } => {
                let mut e = DVector::zeros(*dim);
                e[dim - 1] = 1.0;
                e
            }
            ConvexDomainSpec::PdCone { d } => identity_sym(*d),
            ConvexDomainSpec::SumCone { d } => identity_direction(*d),
            ConvexDomainSpec::Ball { center, .. } => DVector::from_column_slice(center),
        };
        Hyperplane::from_normal(point(&n))
    }

    /// A hyperplane missing the closure; none for the sum cone.
    pub fn witness(&self) -> Option<Hyperplane> {
        self.properly_convex().then(|| self.chart())
    }

    /// Signed margin of the closed ball B(c, r): positive iff it lies inside.
    pub fn ball_depth(&self, center: &ProjPoint, radius: f64) -> Result<f64> {
        if center.dim() != self.ambient_dim() {
            return Err(Error::Dimension { expected: self.ambient_dim(), got: center.dim() });
        }
        let c = center.real_rep();
        let r = radius.clamp(0.0, 1.0).asin();
        Ok(match self {
            ConvexDomainSpec::Ellipsoid { dim } => {
                let cos = (c[dim - 1].abs() / c.norm()).min(1.0);
                FRAC_PI_4 - cos.acos() - r
            }
            ConvexDomainSpec::PdCone { d } => {
                let x = crate::linalg::sym_mat(&c, *d);
                let x = if x.trace() < 0.0 { -x } else { x };
                let lmin = SymmetricEigen::new(x).eigenvalues.min();
                (lmin / c.norm()).clamp(-1.0, 1.0).asin() - r
            }
            ConvexDomainSpec::SumCone { d } => {
                let s = if c.dot(&identity_direction(*d)) < 0.0 { -c } else { c };
                sum_cone_margin(*d, &s, radius)?
            }
            ConvexDomainSpec::Ball { center: b, radius: rb } => {
                *rb - proj_dist(center, &ProjPoint::from_real(b)?) - radius
            }
        })
    }

    pub fn contains(&self, x: &ProjPoint) -> Result<bool> {
        Ok(self.ball_depth(x, 0.0)? > 0.0)
    }

    /// Admissibility of g as a symmetry. Ellipsoids: gᵗJg = λJ with λ > 0.
    /// Other kinds: g maps every probe point into the domain (a necessary
    /// condition only).
    pub fn check_preserved(&self, g: &SquareMatrix, probes: &[ProjPoint]) -> Result<()> {
        let k = self.ambient_dim();
        if g.dim() != k {
            return Err(Error::Dimension { expected: k, got: g.dim() });
        }
        match self {
            ConvexDomainSpec::Ellipsoid { dim } => {
                let m = real(g)?;
                let j = DMatrix::from_fn(*dim, *dim, |a, b| if a != b { 0.0 } else if a == dim - 1 { -1.0 } else { 1.0 });
                let q = m.transpose() * &j * &m;
                let lambda = -q[(dim - 1, dim - 1)];
                let err = (&q - &j * lambda).norm();
                if !(lambda > 0.0) || err > 1e-9 * q.norm() {
                    return Err(Error::Precondition(format!("matrix does not preserve the quadratic form (defect {err:.2e})")));
                }
                Ok(())
            }
            _ => {
                for (i, p) in probes.iter().enumerate() {
                    let img = crate::projgeom::act(g, p);
                    if !self.contains(&img)? {
                        return Err(Error::Precondition(format!("probe point {i} leaves the domain")));
                    }
                }
                Ok(())
            }
        }
    }
}

/// Margins of the construction, each required above `MARGIN_FLOOR`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepMargins {
    /// w·𝒞̄₁ ⊂ 𝒞₂.
    pub w_forward: f64,
    /// w^{-1}·𝒞̄₁ ⊂ 𝒞₂.
    pub w_backward: f64,
    /// 𝒞̄₁ ∩ 𝒞̄₂ = ∅.
    pub disjoint: f64,
    /// distance from 𝒞̄₁ to P(U).
    pub avoids_u: f64,
    /// distance of 𝒞̄₁ ∪ 𝒞̄₂ to the hyperplane at infinity of the chart.
    pub chart: f64,
    /// angular depth of 𝒞̄₂ in the sum cone.
    pub sum_cone: f64,
}

impl RepMargins {
    pub fn min(&self) -> f64 {
        [self.w_forward, self.w_backward, self.disjoint, self.avoids_u, self.chart, self.sum_cone]
            .into_iter()
            .fold(f64::INFINITY, f64::min)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RepPair {
    pub d: usize,
    pub m: usize,
    pub eta: f64,
    /// Letters need σ₁/σ₂ of their φ image at least this large.
    pub gap_threshold: f64,
    /// w = P·diag(λⁿ, 1, …, 1, λ^{-n})·P^{-1}.
    pub w_power: u32,
    pub w_eigenvalue: f64,
    pub w: SquareMatrix,
    pub w_inv: SquareMatrix,
    pub c1: BallRegion,
    pub c2: BallRegion,
    pub margins: RepMargins,
    /// Places where the construction replaces an existence argument by a
    /// finite check.
    pub deviations: Vec<String>,
}

/// Axis matrix P = [p(α−δ), Q, p(α+δ)], p(θ) = cos θ·Ĩ + sin θ·e_U.
fn axis_frame(d: usize) -> DMatrix<f64> {
    let (_, m) = rep_dims(d);
    let it = identity_direction(d);
    let e = unit_u(m);
    let p = |t: f64| &it * t.cos() + &e * t.sin();
    let mut cols = vec![p(TARGET_ANGLE - AXIS_SPREAD)];
    cols.extend(orthonormal_complement(&[it.clone(), e.clone()], m));
    cols.push(p(TARGET_ANGLE + AXIS_SPREAD));
    DMatrix::from_columns(&cols)
}

fn axis_power(d: usize, n: u32) -> Result<(SquareMatrix, SquareMatrix)> {
    let p = axis_frame(d);
    let pinv = p.clone().try_inverse().ok_or(Error::Singular(0.0))?;
    let m = p.nrows();
    let top = AXIS_EIGENVALUE.powi(n as i32);
    let diag = |s: f64| {
        DMatrix::from_fn(m, m, |i, j| match (i == j, i) {
            (false, _) => 0.0,
            (true, 0) => s,
            (true, k) if k == m - 1 => 1.0 / s,
            _ => 1.0,
        })
    };
    Ok((lift(&p * diag(top) * &pinv)?, lift(&p * diag(1.0 / top) * &pinv)?))
}

/// Worst margin of g·𝒞̄_src inside 𝒞_dst over the balls of the source.
fn region_map_margin(g: &SquareMatrix, src: &BallRegion, dst: &BallRegion) -> Result<f64> {
    let cd = cartan_decompose(g)?;
    let mut worst = f64::INFINITY;
    for b in src.balls() {
        match ball_image(g, &cd, &b.center, b.radius) {
            Ok(img) => worst = worst.min(best_container(dst, &img.center, img.radius).1),
            Err(_) => return Ok(f64::NEG_INFINITY),
        }
    }
    Ok(worst)
}

/// (d / cos α)^{1/η}: above it, ‖ρ₁(g)c₂‖ ≥ σ₁(φ(g))^{1−η} because c₂
/// pairs to at least cos α/d with every limit direction.
pub fn rep_gap_threshold(d: usize, eta: f64) -> f64 {
    (d as f64 / TARGET_ANGLE.cos()).powf(1.0 / eta)
}

/// Builds (w, 𝒞₁, 𝒞₂) for d = 2, doubling the power of w at most `budget`
/// times until both w-inclusions hold.
pub fn build_rep_pair(d: usize, eta: f64, budget: u32) -> Result<RepPair> {
    if d < 2 {
        return Err(Error::Input(format!("d = {d} is below 2")));
    }
    if d != 2 {
        let (_, m) = rep_dims(d);
        return Err(Error::Input(format!(
            "only d = 2 is constructed (d = {d} would give m = {m}; its limit-set cover is not implemented)"
        )));
    }
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::Input(format!("eta {eta} outside (0,1)")));
    }
    if budget == 0 {
        return Err(Error::Input("search budget must be positive".into()));
    }
    let (_, m) = rep_dims(d);
    let chain: Vec<Ball> = (0..CHAIN_SIZE)
        .map(|j| Ball { center: point(&limit_direction(std::f64::consts::PI * j as f64 / CHAIN_SIZE as f64)), radius: CHAIN_RADIUS })
        .collect();
    let c1 = BallRegion::new(Space::P, chain)?;
    let it = identity_direction(d);
    let e = unit_u(m);
    let c2_center = &it * TARGET_ANGLE.cos() + &e * TARGET_ANGLE.sin();
    let c2 = BallRegion::single(Space::P, point(&c2_center), TARGET_RADIUS)?;

    let ep = point(&e);
    let it_plane = Hyperplane::from_normal(point(&it));
    let mut disjoint = f64::INFINITY;
    let mut avoids_u = f64::INFINITY;
    let mut chart = f64::INFINITY;
    for b in c1.balls().iter().chain(c2.balls()) {
        chart = chart.min(ball_inf(crate::projgeom::dist_point_hyperplane(&b.center, &it_plane), b.radius));
    }
    for b in c1.balls() {
        disjoint = disjoint.min(proj_dist(&b.center, &c2.balls()[0].center) - b.radius - TARGET_RADIUS);
        avoids_u = avoids_u.min(ball_inf(proj_dist(&b.center, &ep), b.radius));
    }
    let sum_cone = sum_cone_margin(d, &c2_center, TARGET_RADIUS)?;
    for (name, v) in [("disjointness", disjoint), ("avoidance of P(U)", avoids_u), ("chart", chart), ("sum cone", sum_cone)] {
        if !(v > MARGIN_FLOOR) {
            return Err(Error::Certification(format!("{name} margin {v:.3e} for the region pair")));
        }
    }

    let mut best = f64::NEG_INFINITY;
    for k in 0..budget {
        let n = 1u32 << k.min(20);
        let (w, w_inv) = axis_power(d, n)?;
        let fwd = region_map_margin(&w, &c1, &c2)?;
        let bwd = region_map_margin(&w_inv, &c1, &c2)?;
        let margin = fwd.min(bwd);
        if margin > MARGIN_FLOOR {
            return Ok(RepPair {
                d,
                m,
                eta,
                gap_threshold: rep_gap_threshold(d, eta),
                w_power: n,
                w_eigenvalue: AXIS_EIGENVALUE,
                w,
                w_inv,
                c1,
                c2,
                margins: RepMargins { w_forward: fwd, w_backward: bwd, disjoint, avoids_u, chart, sum_cone },
                deviations: vec![
                    "C1 is a ball chain around the limit directions [xx^t (x) yy^t] of the phi images, not a neighbourhood of the whole PD domain".into(),
                    "C2 inside the sum cone is shown with an inscribed simplicial cone over b_i (x) b_j, b_i positive definite".into(),
                    "the compact identity neighbourhood is replaced by gap_threshold on sigma1/sigma2 of phi(g), and finite-index subgroups by powers of letters".into(),
                    "rho2(g) C1 inside C2 is shown by composing w^-1 C1 in C2, rho1(g) C2 in C1 and w C1 in C2".into(),
                ],
            });
        }
        best = best.max(margin);
        if k >= 20 {
            break;
        }
    }
    Err(Error::Budget(format!("no power of w maps C1 into C2; best margin {best:.3e}")))
}

fn check_unimodular(g: &SquareMatrix, what: &str) -> Result<()> {
    let det = g.det();
    let scale = g.op_norm().powi(g.dim() as i32).max(1.0);
    if (det.re - 1.0).abs() > UNIMODULAR_TOL * scale || det.im.abs() > UNIMODULAR_TOL * scale {
        return Err(Error::Precondition(format!("{what} has determinant {} instead of 1", det.re)));
    }
    Ok(())
}

/// ρ₁(g) = φ(g) ⊕ 1.
pub fn rho1(g: &SquareMatrix) -> Result<SquareMatrix> {
    let phi = real(&phi_rep(g)?)?;
    let n = phi.nrows();
    let mut out = DMatrix::identity(n + 1, n + 1);
    out.view_mut((0, 0), (n, n)).copy_from(&phi);
    lift(out)
}

impl RepPair {
    /// ρ_side(g).
    pub fn rho(&self, side: u8, g: &SquareMatrix) -> Result<SquareMatrix> {
        if g.dim() != self.d {
            return Err(Error::Dimension { expected: self.d, got: g.dim() });
        }
        let r = rho1(g)?;
        Ok(if side == 1 { r } else { self.w.mul(&r).mul(&self.w_inv) })
    }
}

/// ρ(w) and ρ(w)^{-1}, syllable by syllable. Every letter must have det 1.
pub fn apply_rep_with_inverse(pair: &RepPair, sides: Sides<'_>, word: &Word) -> Result<(SquareMatrix, SquareMatrix)> {
    if sides.dim() != pair.d {
        return Err(Error::Dimension { expected: pair.d, got: sides.dim() });
    }
    let mut fwd = SquareMatrix::identity(pair.m);
    let mut inv = SquareMatrix::identity(pair.m);
    for s in word.syllables() {
        let gens = sides.side(s.side);
        for &l in &s.letters {
            check_unimodular(gens.matrix(l)?, &format!("side {} letter {l}", s.side))?;
        }
        let g = gens.evaluate_letters(&s.letters)?;
        let mut gi = SquareMatrix::identity(pair.d);
        for &l in s.letters.iter().rev() {
            gi = gi.mul(gens.inverse_matrix(l)?);
        }
        fwd = fwd.mul(&pair.rho(s.side, &g)?);
        inv = pair.rho(s.side, &gi)?.mul(&inv);
    }
    Ok((fwd, inv))
}

pub fn apply_rep(pair: &RepPair, sides: Sides<'_>, word: &Word) -> Result<SquareMatrix> {
    Ok(apply_rep_with_inverse(pair, sides, word)?.0)
}

/// Letter-level checks for one admitted element g (both ρ₁ and ρ₂).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LetterCheck {
    /// σ₁/σ₂ of φ(g).
    pub phi_gap: f64,
    /// σ₁ of φ(g).
    pub phi_norm: f64,
    /// min over i of the margin of ρ_i(g)𝒞̄_{3−i} ⊂ 𝒞_i.
    pub inclusion_margin: f64,
    /// min over i and ball centers v of 𝒞_{3−i} of ‖ρ_i(g)v‖/σ₁(φ(g))^{1−η}.
    pub norm_ratio: f64,
}

impl LetterCheck {
    pub fn passes(&self, threshold: f64) -> bool {
        self.phi_gap >= threshold && self.inclusion_margin > MARGIN_FLOOR && self.norm_ratio >= 1.0
    }
}

pub fn letter_check(pair: &RepPair, g: &SquareMatrix) -> Result<LetterCheck> {
    let phi = phi_rep(g)?;
    let s = singular_values(&phi);
    let unimodular = s[0] * s[s.len() - 1];
    if (unimodular - 1.0).abs() > 1e-6 {
        return Err(Error::Precondition(format!("sigma_1 sigma_N of phi(g) is {unimodular}, not 1")));
    }
    let r1 = rho1(g)?;
    let r2 = pair.w.mul(&r1).mul(&pair.w_inv);
    let into_c1 = region_map_margin(&r1, &pair.c2, &pair.c1)?;
    // ρ₂(g)𝒞̄₁ ⊂ 𝒞₂ by composition through w^{-1}, ρ₁(g), w.
    let into_c2 = into_c1.min(pair.margins.w_forward).min(pair.margins.w_backward);
    let scale = s[0].powf(1.0 - pair.eta);
    let mut norm_ratio = f64::INFINITY;
    for b in pair.c2.balls() {
        norm_ratio = norm_ratio.min(r1.apply(b.center.rep()).norm() / scale);
    }
    for b in pair.c1.balls() {
        norm_ratio = norm_ratio.min(r2.apply(b.center.rep()).norm() / scale);
    }
    Ok(LetterCheck { phi_gap: s[0] / s[1], phi_norm: s[0], inclusion_margin: into_c1.min(into_c2), norm_ratio })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Admission {
    pub side: u8,
    /// 1-based index into the original letters.
    pub letter: usize,
    pub power: u32,
    pub check: LetterCheck,
    pub inverse_check: Option<LetterCheck>,
}

/// Replaces each letter by its smallest power (up to `max_power`) that
/// clears the gap threshold and the letter-level checks; inverses are
/// checked too for groups.
pub fn admit_letters(pair: &RepPair, gens: &SemigroupGens, max_power: u32) -> Result<(SemigroupGens, Vec<Admission>)> {
    let mut letters = Vec::new();
    let mut log = Vec::new();
    for (i, g) in gens.letters().iter().enumerate() {
        check_unimodular(g, &format!("side {} letter {}", gens.label(), i + 1))?;
        let mut admitted = None;
        for p in 1..=max_power {
            let h = g.pow(p);
            let check = letter_check(pair, &h)?;
            let inverse_check = if gens.is_group() { Some(letter_check(pair, &h.try_inverse()?)?) } else { None };
            let ok = check.passes(pair.gap_threshold) && inverse_check.as_ref().map_or(true, |c| c.passes(pair.gap_threshold));
            if ok {
                admitted = Some((h, Admission { side: gens.label(), letter: i + 1, power: p, check, inverse_check }));
                break;
            }
        }
        let (h, a) = admitted.ok_or_else(|| {
            Error::Budget(format!("side {} letter {} fails the letter checks up to power {max_power}", gens.label(), i + 1))
        })?;
        letters.push(h);
        log.push(a);
    }
    Ok((SemigroupGens::new(letters, gens.is_group(), gens.label())?, log))
}

/// σ₁/σ_m(ρ(w)) ≥ Π (σ₁/σ_d(γ_i))^{2−ε} on all reduced words, together with
/// pairwise distinctness of the images and the letter-level inclusion and
/// norm checks. Letters below the gap threshold are refused.
pub fn verify_rep_product(
    pair: &RepPair,
    gens1: &SemigroupGens,
    gens2: &SemigroupGens,
    max_syllables: usize,
    max_syllable_len: usize,
    eps: f64,
) -> Result<EstimateReport> {
    if !(eps > 0.0 && eps < 2.0) {
        return Err(Error::Input(format!("eps {eps} outside (0,2)")));
    }
    let mut inclusion = f64::INFINITY;
    let mut norm_ratio = f64::INFINITY;
    for gens in [gens1, gens2] {
        for l in gens.alphabet() {
            let g = gens.matrix(l)?;
            let c = letter_check(pair, g)?;
            if c.phi_gap < pair.gap_threshold {
                return Err(Error::Precondition(format!(
                    "side {} letter {l}: phi gap {:.4} below threshold {:.4}; raise it to a power",
                    gens.label(),
                    c.phi_gap,
                    pair.gap_threshold
                )));
            }
            inclusion = inclusion.min(c.inclusion_margin);
            norm_ratio = norm_ratio.min(c.norm_ratio);
        }
    }
    let sides = Sides::new(gens1, gens2)?;
    let words = enumerate_reduced(sides, max_syllables, max_syllable_len)?;
    let exponent = 2.0 - eps;
    let rows: Vec<(EstimateSample, f64, SquareMatrix)> = words
        .par_iter()
        .map(|w| {
            let (fwd, inv) = apply_rep_with_inverse(pair, sides, w.word())?;
            let log_lhs = fwd.op_norm().ln() + inv.op_norm().ln();
            let mut log_sum = 0.0;
            for s in w.word().syllables() {
                let rw = sides.evaluate(&Word::reduce(vec![s.clone()]))?;
                log_sum += rw.eval().op_norm().ln() + rw.eval_inv().op_norm().ln();
            }
            let log_rhs = exponent * log_sum;
            let sample = EstimateSample {
                word: w.word().id(),
                n: w.syllable_count(),
                length: w.word_length(),
                log_lhs,
                log_rhs,
                ratio: (log_lhs - log_rhs).exp(),
            };
            Ok((sample, 2.0 - log_lhs / log_sum, fwd))
        })
        .collect::<Result<_>>()?;
    let items: Vec<(String, &SquareMatrix)> = rows.iter().map(|(s, _, m)| (s.word.clone(), m)).collect();
    let distinct = distinctness_of(&items);
    let words_pass = rows.iter().all(|(s, _, _)| s.log_lhs + BOUND_SLACK >= s.log_rhs);
    let min_ratio = rows.iter().map(|(s, _, _)| s.ratio).fold(f64::INFINITY, f64::min);
    let eps_needed = rows.iter().map(|(_, e, _)| *e).fold(f64::NEG_INFINITY, f64::max);
    let mut fitted = BTreeMap::new();
    fitted.insert("smallest_eps".to_string(), eps_needed);
    let mut diagnostics = BTreeMap::new();
    diagnostics.insert("min_pairwise_distance".to_string(), distinct.min_distance);
    diagnostics.insert("letter_inclusion_margin".to_string(), inclusion);
    diagnostics.insert("norm_bound_ratio".to_string(), norm_ratio);
    diagnostics.insert("pair_margin".to_string(), pair.margins.min());
    let all_pass = !rows.is_empty()
        && words_pass
        && distinct.min_distance > MARGIN_FLOOR
        && inclusion > MARGIN_FLOOR
        && norm_ratio >= 1.0;
    Ok(EstimateReport {
        tag: EstimateTag::RepProduct,
        samples: rows.into_iter().map(|(s, _, _)| s).collect(),
        unasserted: Vec::new(),
        fitted_constants: fitted,
        diagnostics,
        min_ratio,
        all_pass,
    })
}

/// One rung of the gap ladder.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrontierRow {
    pub level: f64,
    pub count: usize,
    /// min over sampled g with gap above `level` of inf_{x∈K} dist(x, P(Ξ_k(g))).
    pub min_dist: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct XiFrontier {
    pub index: usize,
    pub rows: Vec<FrontierRow>,
    pub epsilon: f64,
    pub level: f64,
    pub monotone: bool,
    pub pass: bool,
}

/// Scans a sample of domain symmetries for how close Ξ_k(g) comes to the
/// compact set K once σ_k/σ_{k+1}(g) exceeds each level of the ladder.
pub fn check_xi_avoids_compact(
    domain: &ConvexDomainSpec,
    compact: &BallRegion,
    sample: &[SquareMatrix],
    index: usize,
    ladder: &[f64],
) -> Result<XiFrontier> {
    domain.validate()?;
    if !domain.properly_convex() {
        return Err(Error::Input("the domain must be properly convex".into()));
    }
    let dim = domain.ambient_dim();
    if compact.dim() != dim || compact.space() != Space::P {
        return Err(Error::Input(format!("K must be a region of P(R^{dim})")));
    }
    if index == 0 || index >= dim {
        return Err(Error::Index(format!("gap index {index} for dimension {dim}")));
    }
    if ladder.is_empty() || ladder.windows(2).any(|w| !(w[0] < w[1])) || !(ladder[0] >= 1.0) {
        return Err(Error::Input("ladder must be increasing and start at 1 or above".into()));
    }
    for (i, b) in compact.balls().iter().enumerate() {
        let depth = domain.ball_depth(&b.center, b.radius)?;
        if !(depth > 0.0) {
            return Err(Error::Precondition(format!("ball {i} of K is not inside the domain (depth {depth:.3e})")));
        }
    }
    let probes: Vec<ProjPoint> = compact.balls().iter().map(|b| b.center.clone()).collect();
    for (i, g) in sample.iter().enumerate() {
        domain.check_preserved(g, &probes).map_err(|e| Error::Precondition(format!("sample element {i}: {e}")))?;
    }
    let measured: Vec<Option<(f64, f64)>> = sample
        .par_iter()
        .map(|g| {
            let s = singular_values(g);
            let gap = s[index - 1] / s[index];
            if !(gap > ladder[0]) {
                return Ok(None);
            }
            let frame = gap_frame(g, index)?.frame;
            let mut dist = f64::INFINITY;
            for b in compact.balls() {
                dist = dist.min(ball_inf(dist_point_subspace(&b.center, &frame)?, b.radius));
            }
            Ok(Some((gap, dist)))
        })
        .collect::<Result<_>>()?;
    let rows: Vec<FrontierRow> = ladder
        .iter()
        .map(|&level| {
            let hits: Vec<f64> = measured.iter().flatten().filter(|(g, _)| *g > level).map(|(_, d)| *d).collect();
            FrontierRow { level, count: hits.len(), min_dist: hits.iter().copied().fold(f64::INFINITY, f64::min) }
        })
        .collect();
    let top = rows.last().expect("nonempty ladder");
    if top.count == 0 {
        return Err(Error::InsufficientData(format!("no sample element has gap above {}", top.level)));
    }
    let monotone = rows.windows(2).all(|w| w[1].min_dist >= w[0].min_dist);
    Ok(XiFrontier {
        index,
        epsilon: top.min_dist,
        level: top.level,
        monotone,
        pass: monotone && top.min_dist > 0.0,
        rows,
    })
}

/// Powers of a hyperbolic isometry of the Klein disk:
/// [[cosh t, 0, sinh t], [0, 1, 0], [sinh t, 0, cosh t]]^k, k = 1..=count.
pub fn boost_powers(t: f64, count: u32) -> Result<Vec<SquareMatrix>> {
    let (c, s) = (t.cosh(), t.sinh());
    let b = SquareMatrix::from_rows(&[vec![c, 0.0, s], vec![0.0, 1.0, 0.0], vec![s, 0.0, c]])?;
    Ok((1..=count).map(|k| b.pow(k)).collect())
}

/// μ^r on [v₀] and μ^{-r/(d−1)} on the hyperplane n₀^⊥; det = 1.
pub fn proximal_element(v0: &DVector<f64>, n0: &DVector<f64>, mu: f64, r: u32) -> Result<SquareMatrix> {
    if r == 0 {
        return Err(Error::Input("power r = 0 gives the identity".into()));
    }
    if !(mu > 1.0) {
        return Err(Error::Input(format!("expansion {mu} must exceed 1")));
    }
    let d = v0.len();
    if n0.len() != d {
        return Err(Error::Dimension { expected: d, got: n0.len() });
    }
    let pairing = n0.dot(v0);
    if !(pairing.abs() > 1e-3 * v0.norm() * n0.norm()) {
        return Err(Error::Degenerate("attracting point lies on its repelling hyperplane".into()));
    }
    let p = v0 * n0.transpose() / pairing;
    let top = mu.powi(r as i32);
    let rest = top.powf(-1.0 / (d as f64 - 1.0));
    lift(&p * top + (DMatrix::identity(d, d) - &p) * rest)
}

#[derive(Clone, Debug, Serialize)]
pub struct AnosovSearch {
    pub candidate: usize,
    pub attracting: ProjPoint,
    pub repelling: Hyperplane,
    pub expansion: f64,
    pub r: u32,
    pub letter_power: u32,
    pub radius: f64,
    pub score: f64,
    pub certify_calls: usize,
    pub g: SquareMatrix,
    pub certificate: PingPongCertificate,
    /// The certified configuration, in the config JSON format.
    pub config: serde_json::Value,
}

pub const ANOSOV_CANDIDATES: usize = 32;
pub const ANOSOV_EXPANSION: f64 = 8.0;
const ANOSOV_STREAM: u64 = 40;
const ANOSOV_MAX_DOUBLINGS: u32 = 7;
const LETTER_POWERS: [u32; 3] = [1, 2, 4];

fn merged(a: &BallRegion, b: &BallRegion) -> Result<BallRegion> {
    BallRegion::new(a.space(), a.balls().iter().chain(b.balls()).cloned().collect())
}

/// Separation of a candidate ([v₀], n₀^⊥) from the limit-set cover U and
/// the hyperplane cover V of the base group; the new regions get radius
/// score/6.
pub fn candidate_score(base: &PingPongConfig, v0: &DVector<f64>, n0: &DVector<f64>) -> Result<f64> {
    let u = merged(&base.u1, &base.u2)?;
    let v = merged(&base.v1, &base.v2)?;
    let tiny = 1e-12;
    let pv = BallRegion::single(Space::P, point(v0), tiny)?;
    let gn = BallRegion::single(Space::Gr, point(n0), tiny)?;
    let score = [
        region_separation(&pv, &v),
        region_separation(&u, &gn),
        region_separation(&pv, &u),
        region_separation(&gn, &v),
    ]
    .into_iter()
    .fold(f64::INFINITY, f64::min);
    let c = (n0.dot(v0) / (n0.norm() * v0.norm())).abs();
    Ok(if c < 0.3 { 0.0 } else { score })
}

/// The base configuration with every letter replaced by its q-th power.
pub fn raise_letters(base: &PingPongConfig, q: u32) -> Result<PingPongConfig> {
    let raise = |g: &SemigroupGens| SemigroupGens::new(g.letters().iter().map(|x| x.pow(q)).collect(), g.is_group(), g.label());
    PingPongConfig::new(raise(&base.gamma1)?, raise(&base.gamma2)?, base.u1.clone(), base.u2.clone(), base.v1.clone(), base.v2.clone())
}

fn failing_side(e: &Error) -> Option<u8> {
    let Error::Certification(msg) = e else { return None };
    msg.strip_prefix("side ").and_then(|s| s.chars().next()).and_then(|c| c.to_digit(10)).map(|d| d as u8)
}

/// Extends a certified group Γ (both sides merged into one group) by a
/// proximal semigroup ⟨g^r⟩ so that the pair is in ping-pong position.
/// Letters of Γ may be replaced by powers (from `LETTER_POWERS`) first; the
/// base must certify for at least one of them. `budget` bounds the number
/// of certification attempts on extended configurations.
pub fn anosov_semigroup_search(base: &PingPongConfig, seed: u64, budget: usize) -> Result<(AnosovSearch, PingPongConfig)> {
    if !base.is_group() {
        return Err(Error::Input("the base configuration must consist of two groups".into()));
    }
    let mut powers = Vec::new();
    let mut base_failure = String::new();
    for q in LETTER_POWERS {
        match certify(&raise_letters(base, q)?) {
            Ok(_) => powers.push(q),
            Err(e) => base_failure = e.to_string(),
        }
    }
    if powers.is_empty() {
        return Err(Error::Precondition(format!("no letter power of the base configuration certifies: {base_failure}")));
    }
    let d = base.dim();
    let u = merged(&base.u1, &base.u2)?;
    let v = merged(&base.v1, &base.v2)?;
    let mut scored: Vec<(usize, f64, DVector<f64>, DVector<f64>)> = (0..ANOSOV_CANDIDATES)
        .into_par_iter()
        .map(|i| {
            let mut rng = trial_rng(seed, ANOSOV_STREAM, i as u64);
            let v0 = unit_vector(d, &mut rng);
            let mut n0 = unit_vector(d, &mut rng);
            if n0.dot(&v0) < 0.0 {
                n0 = -n0;
            }
            let s = candidate_score(base, &v0, &n0)?;
            Ok((i, s, v0, n0))
        })
        .collect::<Result<_>>()?;
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut calls = 0usize;
    let mut last = String::from("no candidate separated from the base regions");
    for (idx, score, v0, n0) in scored.into_iter().filter(|c| c.1 > 0.0) {
        let radius = score / 6.0;
        let u2 = BallRegion::single(Space::P, point(&v0), radius)?;
        let v2 = BallRegion::single(Space::Gr, point(&n0), radius)?;
        for &q in &powers {
            let raised: Vec<SquareMatrix> = base.gamma1.letters().iter().chain(base.gamma2.letters()).map(|g| g.pow(q)).collect();
            let gamma = SemigroupGens::new(raised, true, 1)?;
            for k in 0..ANOSOV_MAX_DOUBLINGS {
                if calls >= budget {
                    return Err(Error::Budget(format!("{calls} certification attempts; last failure: {last}")));
                }
                let r = 1u32 << k;
                let g = proximal_element(&v0, &n0, ANOSOV_EXPANSION, r)?;
                let side2 = SemigroupGens::new(vec![g.clone()], false, 2)?;
                let config = PingPongConfig::new(gamma.clone(), side2, u.clone(), u2.clone(), v.clone(), v2.clone())?;
                calls += 1;
                match certify(&config) {
                    Ok(certificate) => {
                        let json = serde_json::from_str(&config.to_json()).expect("config JSON");
                        return Ok((
                            AnosovSearch {
                                candidate: idx,
                                attracting: point(&v0),
                                repelling: Hyperplane::from_normal(point(&n0)),
                                expansion: ANOSOV_EXPANSION,
                                r,
                                letter_power: q,
                                radius,
                                score,
                                certify_calls: calls,
                                g,
                                certificate,
                                config: json,
                            },
                            config,
                        ));
                    }
                    Err(e) => {
                        let side = failing_side(&e);
                        last = e.to_string();
                        // Only the proximal side improves with r.
                        if side != Some(2) {
                            break;
                        }
                    }
                }
            }
        }
    }
    Err(Error::Budget(format!("{calls} certification attempts; last failure: {last}")))
}
