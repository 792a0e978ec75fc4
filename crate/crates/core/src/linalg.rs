//! Dense linear algebra over ℝ and ℂ: singular values, Cartan decomposition,
//! eigenvalue moduli, the subspaces Ξ_k and the ∧², Sym and φ representations.
//!
//! Basis conventions:
//! - ∧²: e_i∧e_j for i < j, lexicographic.
//! - Sym: E_ii and (E_ij + E_ji)/√2 for i ≤ j, lexicographic.
//! - ⊗: nalgebra's Kronecker order, (i, k) ↦ i·n + k.

use nalgebra::{Complex, DMatrix, DVector, Schur};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;

/// Default relative tolerance.
pub const TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Field {
    Real,
    Complex,
}

impl Field {
    pub fn join(self, other: Field) -> Field {
        if self == Field::Complex || other == Field::Complex {
            Field::Complex
        } else {
            Field::Real
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SquareMatrix {
    entries: DMatrix<C64>,
    field: Field,
}

fn lift(m: &DMatrix<f64>) -> DMatrix<C64> {
    m.map(|x| C64::new(x, 0.0))
}

impl SquareMatrix {
    pub fn from_real(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::Dimension { expected: m.nrows(), got: m.ncols() });
        }
        if m.nrows() == 0 {
            return Err(Error::Input("empty matrix".into()));
        }
        if m.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("matrix"));
        }
        Ok(SquareMatrix { entries: lift(&m), field: Field::Real })
    }

    pub fn from_complex(m: DMatrix<C64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::Dimension { expected: m.nrows(), got: m.ncols() });
        }
        if m.nrows() == 0 {
            return Err(Error::Input("empty matrix".into()));
        }
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("matrix"));
        }
        Ok(SquareMatrix { entries: m, field: Field::Complex })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::Input("empty matrix".into()));
        }
        for r in rows {
            if r.len() != n {
                return Err(Error::Dimension { expected: n, got: r.len() });
            }
        }
        Self::from_real(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    pub fn identity(d: usize) -> Self {
        SquareMatrix { entries: DMatrix::identity(d, d), field: Field::Real }
    }

    pub fn diag(values: &[f64]) -> Result<Self> {
        let d = values.len();
        Self::from_real(DMatrix::from_fn(d, d, |i, j| if i == j { values[i] } else { 0.0 }))
    }

    /// Wraps a product of validated matrices without re-checking.
    pub(crate) fn raw(entries: DMatrix<C64>, field: Field) -> Self {
        SquareMatrix { entries, field }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn field(&self) -> Field {
        self.field
    }

    pub fn entries(&self) -> &DMatrix<C64> {
        &self.entries
    }

    pub fn to_real(&self) -> Result<DMatrix<f64>> {
        match self.field {
            Field::Real => Ok(self.entries.map(|z| z.re)),
            Field::Complex => Err(Error::Field("real matrix required")),
        }
    }

    pub fn mul(&self, other: &SquareMatrix) -> SquareMatrix {
        assert_eq!(self.dim(), other.dim(), "matrix product dimension mismatch");
        SquareMatrix { entries: &self.entries * &other.entries, field: self.field.join(other.field) }
    }

    pub fn apply(&self, v: &DVector<C64>) -> DVector<C64> {
        &self.entries * v
    }

    pub fn adjoint(&self) -> SquareMatrix {
        SquareMatrix { entries: self.entries.adjoint(), field: self.field }
    }

    pub fn transpose(&self) -> SquareMatrix {
        SquareMatrix { entries: self.entries.transpose(), field: self.field }
    }

    pub fn scale(&self, c: f64) -> SquareMatrix {
        SquareMatrix { entries: self.entries.map(|z| z * c), field: self.field }
    }

    pub fn sub(&self, other: &SquareMatrix) -> SquareMatrix {
        SquareMatrix { entries: &self.entries - &other.entries, field: self.field.join(other.field) }
    }

    pub fn det(&self) -> C64 {
        match self.field {
            Field::Real => C64::new(self.entries.map(|z| z.re).determinant(), 0.0),
            Field::Complex => self.entries.clone().determinant(),
        }
    }

    pub fn try_inverse(&self) -> Result<SquareMatrix> {
        let inv = match self.field {
            Field::Real => self.entries.map(|z| z.re).try_inverse().map(|m| lift(&m)),
            Field::Complex => self.entries.clone().try_inverse(),
        };
        match inv {
            Some(m) if m.iter().all(|z| z.re.is_finite() && z.im.is_finite()) => {
                Ok(SquareMatrix { entries: m, field: self.field })
            }
            _ => Err(Error::Singular(0.0)),
        }
    }

    pub fn pow(&self, n: u32) -> SquareMatrix {
        let mut result = SquareMatrix::identity(self.dim());
        result.field = self.field;
        let mut base = self.clone();
        let mut e = n;
        while e > 0 {
            if e & 1 == 1 {
                result = result.mul(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base);
            }
        }
        result
    }

    /// Operator norm σ₁.
    /// σ₁ as the square root of the top eigenvalue of g*g; the symmetric
    /// solver's backward error is eps·σ₁², so σ₁ keeps full relative accuracy.
    pub fn op_norm(&self) -> f64 {
        if self.dim() == 0 {
            return 0.0;
        }
        match self.field {
            Field::Real => {
                let a = self.entries.map(|z| z.re);
                let scale = a.amax();
                if scale == 0.0 {
                    return 0.0;
                }
                let a = a / scale;
                scale * a.tr_mul(&a).symmetric_eigenvalues().max().max(0.0).sqrt()
            }
            Field::Complex => {
                let scale = self.entries.iter().map(|z| z.norm()).fold(0.0, f64::max);
                if scale == 0.0 {
                    return 0.0;
                }
                let a = self.entries.unscale(scale);
                scale * a.ad_mul(&a).symmetric_eigenvalues().max().max(0.0).sqrt()
            }
        }
    }

    pub fn dist_op(&self, other: &SquareMatrix) -> f64 {
        self.sub(other).op_norm()
    }

    pub fn is_identity(&self, tol: f64) -> bool {
        let id = DMatrix::<C64>::identity(self.dim(), self.dim());
        (&self.entries - id).iter().all(|z| z.norm() <= tol)
    }

    /// Rejects matrices whose smallest singular value vanishes.
    pub fn check_invertible(&self) -> Result<()> {
        let s = singular_values(self);
        let smin = *s.last().unwrap();
        if !(smin > 0.0) || !(smin > s[0] * f64::EPSILON) {
            return Err(Error::Singular(smin));
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum MatrixJson {
    Real(Vec<Vec<f64>>),
    Complex(Vec<Vec<[f64; 2]>>),
}

impl Serialize for SquareMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let d = self.dim();
        let json = match self.field {
            Field::Real => MatrixJson::Real((0..d).map(|i| (0..d).map(|j| self.entries[(i, j)].re).collect()).collect()),
            Field::Complex => MatrixJson::Complex(
                (0..d)
                    .map(|i| (0..d).map(|j| [self.entries[(i, j)].re, self.entries[(i, j)].im]).collect())
                    .collect(),
            ),
        };
        json.serialize(s)
    }
}

impl<'de> Deserialize<'de> for SquareMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let json = MatrixJson::deserialize(de)?;
        let m = match json {
            MatrixJson::Real(rows) => SquareMatrix::from_rows(&rows),
            MatrixJson::Complex(rows) => {
                let n = rows.len();
                if rows.iter().any(|r| r.len() != n) {
                    Err(Error::Input("ragged matrix".into()))
                } else if n == 0 {
                    Err(Error::Input("empty matrix".into()))
                } else {
                    SquareMatrix::from_complex(DMatrix::from_fn(n, n, |i, j| C64::new(rows[i][j][0], rows[i][j][1])))
                }
            }
        };
        m.map_err(serde::de::Error::custom)
    }
}

/// Parses a matrix from its JSON form (rows of floats, or rows of [re, im]).
pub fn parse_matrix_json(text: &str) -> Result<SquareMatrix> {
    serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
}

pub(crate) struct Svd {
    pub u: DMatrix<C64>,
    pub s: Vec<f64>,
    pub v_t: DMatrix<C64>,
}

fn max_iter(d: usize) -> usize {
    2000 * d.max(4)
}

fn sorted_order(s: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..s.len()).collect();
    idx.sort_by(|&a, &b| s[b].partial_cmp(&s[a]).unwrap_or(std::cmp::Ordering::Equal));
    idx
}

/// Sweeps allowed before the Jacobi iteration gives up.
const JACOBI_SWEEPS: usize = 80;

/// One-sided Jacobi: rotates column pairs of A·V until they are mutually
/// orthogonal, so the column norms are the singular values. Each singular
/// value comes out with high relative accuracy, which the bidiagonal solver
/// does not give for products spanning many orders of magnitude. Real input
/// only ever sees sign phases, so it stays real.
fn jacobi(m: &DMatrix<C64>, want_vectors: bool) -> Result<(DMatrix<C64>, Vec<f64>, DMatrix<C64>)> {
    let d = m.ncols();
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite("svd input"));
    }
    // Below d·ε the rotation angles are rounding noise and may cycle.
    let threshold = f64::EPSILON * d as f64;
    // Columns this small are rounding residue of a rank drop.
    let floor = (f64::EPSILON * m.norm()).powi(2);
    let mut a = m.clone();
    let mut v = DMatrix::<C64>::identity(d, d);
    let mut converged = d < 2;
    for _ in 0..JACOBI_SWEEPS {
        let mut rotated = false;
        for i in 0..d {
            for j in i + 1..d {
                let alpha = a.column(i).norm_squared();
                let beta = a.column(j).norm_squared();
                if alpha <= floor || beta <= floor {
                    continue;
                }
                let gamma = a.column(i).dotc(&a.column(j));
                let g = gamma.norm();
                if !(g > threshold * (alpha * beta).sqrt()) {
                    continue;
                }
                rotated = true;
                let phase = gamma / g;
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + zeta.hypot(1.0));
                let c = 1.0 / t.hypot(1.0);
                let sn = c * t;
                for (x, w) in [(&mut a, true), (&mut v, want_vectors)] {
                    if !w {
                        continue;
                    }
                    for r in 0..d {
                        let xi = x[(r, i)];
                        let xj = x[(r, j)] * phase.conj();
                        x[(r, i)] = xi * c - xj * sn;
                        x[(r, j)] = xi * sn + xj * c;
                    }
                }
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Convergence("jacobi svd"));
    }
    let s: Vec<f64> = (0..d).map(|k| a.column(k).norm()).collect();
    if !want_vectors {
        return Ok((DMatrix::zeros(0, 0), s, DMatrix::zeros(0, 0)));
    }
    // Left vectors: normalized columns, completed to a unitary basis where
    // a column is residue.
    let mut u = DMatrix::<C64>::zeros(d, d);
    let mut filled = vec![false; d];
    for k in 0..d {
        if s[k] * s[k] > floor {
            u.set_column(k, &(a.column(k) / C64::new(s[k], 0.0)));
            filled[k] = true;
        }
    }
    // Each missing column is the basis vector with the largest residual
    // against the filled ones; that residual is at least √((d−m)/d).
    for k in 0..d {
        if filled[k] {
            continue;
        }
        let mut best: Option<DVector<C64>> = None;
        for e in 0..d {
            let mut x = DVector::<C64>::zeros(d);
            x[e] = C64::new(1.0, 0.0);
            for _ in 0..2 {
                for kk in 0..d {
                    if filled[kk] {
                        let col = u.column(kk).into_owned();
                        let proj = col.dotc(&x);
                        x -= col * proj;
                    }
                }
            }
            if best.as_ref().map_or(true, |b| x.norm() > b.norm()) {
                best = Some(x);
            }
        }
        let x = best.expect("d > 0");
        let n = x.norm();
        u.set_column(k, &(x / C64::new(n, 0.0)));
        filled[k] = true;
    }
    Ok((u, s, v.adjoint()))
}

pub(crate) fn svd(g: &SquareMatrix) -> Result<Svd> {
    let d = g.dim();
    let (u, s, v_t) = jacobi(&g.entries, true)?;
    let order = sorted_order(&s);
    let u_sorted = DMatrix::from_fn(d, d, |i, j| u[(i, order[j])]);
    let v_sorted = DMatrix::from_fn(d, d, |i, j| v_t[(order[i], j)]);
    Ok(Svd { u: u_sorted, s: order.iter().map(|&i| s[i]).collect(), v_t: v_sorted })
}

/// Singular values, non-increasing. NaN when the input is not finite.
pub fn singular_values(g: &SquareMatrix) -> Vec<f64> {
    let mut s = match jacobi(&g.entries, false) {
        Ok((_, s, _)) => s,
        Err(_) => vec![f64::NAN; g.dim()],
    };
    s.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    s
}

/// σ_i(g)/σ_j(g) with 1-based indices.
pub fn sigma_ratio(g: &SquareMatrix, i: usize, j: usize) -> Result<f64> {
    let d = g.dim();
    if i == 0 || j == 0 || i > d || j > d {
        return Err(Error::Index(format!("({i}, {j}) for dimension {d}")));
    }
    if i == j {
        return Ok(1.0);
    }
    let s = singular_values(g);
    Ok(s[i - 1] / s[j - 1])
}

/// g = k · exp(diag(mu)) · k_prime.
#[derive(Clone, Debug)]
pub struct CartanData {
    pub k: SquareMatrix,
    pub mu: Vec<f64>,
    pub k_prime: SquareMatrix,
}

impl CartanData {
    /// σ_i for 1-based i.
    pub fn sigma(&self, i: usize) -> f64 {
        self.mu[i - 1].exp()
    }

    pub fn reconstruct(&self) -> SquareMatrix {
        let d = self.mu.len();
        let mid = DMatrix::from_fn(d, d, |i, j| if i == j { C64::new(self.mu[i].exp(), 0.0) } else { C64::new(0.0, 0.0) });
        SquareMatrix::raw(self.k.entries() * mid * self.k_prime.entries(), self.k.field().join(self.k_prime.field()))
    }

    /// Column `i` (0-based) of k, i.e. k·e_{i+1}.
    pub fn k_column(&self, i: usize) -> DVector<C64> {
        self.k.entries().column(i).into_owned()
    }

    /// (k′)^{-1} e_{i+1} = (k′)* e_{i+1}, the (i+1)-th right singular vector.
    pub fn k_prime_inv_column(&self, i: usize) -> DVector<C64> {
        self.k_prime.entries().row(i).adjoint()
    }
}

pub fn cartan_decompose(g: &SquareMatrix) -> Result<CartanData> {
    let r = svd(g)?;
    let smin = *r.s.last().unwrap();
    if !(smin > 0.0) || !smin.is_finite() {
        return Err(Error::Singular(smin));
    }
    Ok(CartanData {
        k: SquareMatrix::raw(r.u, g.field),
        mu: r.s.iter().map(|s| s.ln()).collect(),
        k_prime: SquareMatrix::raw(r.v_t, g.field),
    })
}

/// Moduli of eigenvalues, non-increasing.
pub fn eigenvalue_moduli(g: &SquareMatrix) -> Result<Vec<f64>> {
    let d = g.dim();
    let mut l: Vec<f64> = match g.field {
        Field::Real => {
            let schur = Schur::try_new(g.entries.map(|z| z.re), f64::EPSILON, max_iter(d))
                .ok_or(Error::Convergence("schur"))?;
            schur.complex_eigenvalues().iter().map(|z| z.norm()).collect()
        }
        Field::Complex => {
            let schur = Schur::try_new(g.entries.clone(), f64::EPSILON, max_iter(d)).ok_or(Error::Convergence("schur"))?;
            schur.eigenvalues().ok_or(Error::Convergence("schur eigenvalues"))?.iter().map(|z| z.norm()).collect()
        }
    };
    if l.iter().any(|x| !x.is_finite()) {
        return Err(Error::Convergence("schur produced non-finite values"));
    }
    l.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    Ok(l)
}

/// σ₁(g^{2^squarings})^{2^{-squarings}}, computed by repeated squaring with
/// renormalization; tends to ℓ₁(g).
pub fn spectral_radius_by_powers(g: &SquareMatrix, squarings: u32) -> f64 {
    let n0 = g.op_norm();
    let mut h = g.scale(1.0 / n0);
    let mut log = n0.ln();
    for _ in 0..squarings {
        let sq = h.mul(&h);
        let n = sq.op_norm();
        if n == 0.0 {
            return 0.0;
        }
        log = 2.0 * log + n.ln();
        h = sq.scale(1.0 / n);
    }
    (log / 2f64.powi(squarings as i32)).exp()
}

/// Orthonormal frame for Ξ_k(g).
#[derive(Clone, Debug)]
pub struct GapFrame {
    pub index: usize,
    pub frame: DMatrix<C64>,
    pub gap_ratio: f64,
}

pub fn gap_frame(g: &SquareMatrix, k: usize) -> Result<GapFrame> {
    gap_frame_tol(g, k, TOL)
}

pub fn gap_frame_tol(g: &SquareMatrix, k: usize, tol: f64) -> Result<GapFrame> {
    let d = g.dim();
    if k == 0 || k >= d {
        return Err(Error::Index(format!("gap index {k} for dimension {d}")));
    }
    let r = svd(g)?;
    let ratio = r.s[k - 1] / r.s[k];
    if !(ratio > 1.0 + tol) {
        return Err(Error::NoGap { k, ratio });
    }
    Ok(GapFrame { index: k, frame: r.u.columns(0, k).into_owned(), gap_ratio: ratio })
}

/// Lexicographic list of pairs i < j.
pub fn wedge_pairs(d: usize) -> Vec<(usize, usize)> {
    let mut v = Vec::with_capacity(d * (d - 1) / 2);
    for i in 0..d {
        for j in i + 1..d {
            v.push((i, j));
        }
    }
    v
}

/// Lexicographic list of pairs i ≤ j.
pub fn sym_pairs(d: usize) -> Vec<(usize, usize)> {
    let mut v = Vec::with_capacity(d * (d + 1) / 2);
    for i in 0..d {
        for j in i..d {
            v.push((i, j));
        }
    }
    v
}

pub fn wedge_square(g: &SquareMatrix) -> Result<SquareMatrix> {
    let d = g.dim();
    if d < 2 {
        return Err(Error::Input("wedge square needs dimension at least 2".into()));
    }
    let p = wedge_pairs(d);
    let e = &g.entries;
    let w = DMatrix::from_fn(p.len(), p.len(), |a, b| {
        let (i, j) = p[a];
        let (k, l) = p[b];
        e[(i, k)] * e[(j, l)] - e[(i, l)] * e[(j, k)]
    });
    Ok(SquareMatrix::raw(w, g.field))
}

/// Coordinates of a symmetric matrix in the orthonormal Sym basis.
pub fn sym_vec(x: &DMatrix<f64>) -> DVector<f64> {
    let p = sym_pairs(x.nrows());
    DVector::from_iterator(
        p.len(),
        p.iter().map(|&(i, j)| if i == j { x[(i, i)] } else { (x[(i, j)] + x[(j, i)]) / std::f64::consts::SQRT_2 }),
    )
}

/// Inverse of [`sym_vec`].
pub fn sym_mat(v: &DVector<f64>, d: usize) -> DMatrix<f64> {
    let mut x = DMatrix::zeros(d, d);
    for (a, &(i, j)) in sym_pairs(d).iter().enumerate() {
        if i == j {
            x[(i, i)] = v[a];
        } else {
            x[(i, j)] = v[a] / std::f64::consts::SQRT_2;
            x[(j, i)] = v[a] / std::f64::consts::SQRT_2;
        }
    }
    x
}

/// Matrix of X ↦ gᵗXg on Sym_d(ℝ). Sym(gh) = Sym(h)·Sym(g).
pub fn sym_square_rep(g: &SquareMatrix) -> Result<SquareMatrix> {
    let m = g.to_real()?;
    let d = m.nrows();
    let p = sym_pairs(d);
    let n = p.len();
    let mut s = DMatrix::<f64>::zeros(n, n);
    for (b, &(k, l)) in p.iter().enumerate() {
        let mut basis = DMatrix::<f64>::zeros(d, d);
        if k == l {
            basis[(k, k)] = 1.0;
        } else {
            basis[(k, l)] = std::f64::consts::FRAC_1_SQRT_2;
            basis[(l, k)] = std::f64::consts::FRAC_1_SQRT_2;
        }
        let img = m.transpose() * basis * &m;
        s.set_column(b, &sym_vec(&img));
    }
    SquareMatrix::from_real(s)
}

/// φ(g) = ψ(Sym(gᵗ)) with ψ(h) = h ⊗ h^{-t}; equals Sym(gᵗ) ⊗ Sym(g^{-1}).
/// A homomorphism, invariant under scalar multiples of g.
pub fn phi_rep(g: &SquareMatrix) -> Result<SquareMatrix> {
    let m = g.to_real()?;
    let inv = m.clone().try_inverse().ok_or(Error::Singular(0.0))?;
    let a = sym_square_rep(&SquareMatrix::from_real(m.transpose())?)?.to_real()?;
    let b = sym_square_rep(&SquareMatrix::from_real(inv)?)?.to_real()?;
    SquareMatrix::from_real(a.kronecker(&b))
}

/// d²(d+1)²/4.
pub fn phi_dim(d: usize) -> usize {
    let n = d * (d + 1) / 2;
    n * n
}
