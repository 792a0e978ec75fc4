//! Deterministic random inputs: one ChaCha stream per (seed, stream, index),
//! so results do not depend on evaluation order.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg::{C64, SquareMatrix};

pub fn trial_rng(seed: u64, stream: u64, index: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&stream.to_le_bytes());
    key[16..24].copy_from_slice(&index.to_le_bytes());
    key[24..].copy_from_slice(b"pplab-v1");
    ChaCha8Rng::from_seed(key)
}

pub fn gaussian_matrix<R: Rng>(d: usize, rng: &mut R) -> DMatrix<f64> {
    DMatrix::from_fn(d, d, |_, _| rng.sample(StandardNormal))
}

/// Haar-distributed orthogonal matrix (QR of a Gaussian matrix, signs fixed).
pub fn haar_orthogonal<R: Rng>(d: usize, rng: &mut R) -> DMatrix<f64> {
    let qr = gaussian_matrix(d, rng).qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..d {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Haar-distributed unitary matrix.
pub fn haar_unitary<R: Rng>(d: usize, rng: &mut R) -> DMatrix<C64> {
    let z = DMatrix::from_fn(d, d, |_, _| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)));
    let qr = z.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..d {
        let p = r[(j, j)];
        if p.norm() > 0.0 {
            let phase = p / p.norm();
            let mut col = q.column_mut(j);
            col *= phase;
        }
    }
    q
}

pub fn unit_vector<R: Rng>(d: usize, rng: &mut R) -> DVector<f64> {
    loop {
        let v = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let n = v.norm();
        if n > 1e-12 {
            return v / n;
        }
    }
}

pub fn complex_unit_vector<R: Rng>(d: usize, rng: &mut R) -> DVector<C64> {
    loop {
        let v = DVector::from_fn(d, |_, _| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)));
        let n = v.norm();
        if n > 1e-12 {
            return v.map(|z| z / n);
        }
    }
}

/// Singular spectrum with log10 of each value uniform in [lo, hi], sorted
/// non-increasing.
pub fn log_uniform_spectrum<R: Rng>(d: usize, lo: f64, hi: f64, rng: &mut R) -> Vec<f64> {
    let mut s: Vec<f64> = (0..d).map(|_| 10f64.powf(rng.gen_range(lo..=hi))).collect();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap());
    s
}

/// g = k·diag(s)·k′ together with g^{-1} = k′ᵗ·diag(1/s)·kᵗ, both formed
/// from the factors, which are kept as exact Cartan data.
#[derive(Clone, Debug)]
pub struct Factored {
    pub g: SquareMatrix,
    pub g_inv: SquareMatrix,
    pub k: DMatrix<f64>,
    pub s: Vec<f64>,
    pub kp: DMatrix<f64>,
}

impl Factored {
    pub fn from_factors(k: &DMatrix<f64>, s: &[f64], kp: &DMatrix<f64>) -> Factored {
        let d = s.len();
        let sd = DMatrix::from_fn(d, d, |i, j| if i == j { s[i] } else { 0.0 });
        let si = DMatrix::from_fn(d, d, |i, j| if i == j { 1.0 / s[i] } else { 0.0 });
        let g = k * sd * kp;
        let g_inv = kp.transpose() * si * k.transpose();
        Factored {
            g: SquareMatrix::from_real(g).expect("finite factors"),
            g_inv: SquareMatrix::from_real(g_inv).expect("finite factors"),
            k: k.clone(),
            s: s.to_vec(),
            kp: kp.clone(),
        }
    }

    pub fn random<R: Rng>(d: usize, lo: f64, hi: f64, rng: &mut R) -> Factored {
        let k = haar_orthogonal(d, rng);
        let kp = haar_orthogonal(d, rng);
        let s = log_uniform_spectrum(d, lo, hi, rng);
        Self::from_factors(&k, &s, &kp)
    }

    /// k·e_{i+1}.
    pub fn left(&self, i: usize) -> DVector<f64> {
        self.k.column(i).into_owned()
    }

    /// (k′)^{-1}·e_{i+1}, the (i+1)-th right singular vector.
    pub fn right(&self, i: usize) -> DVector<f64> {
        self.kp.row(i).transpose()
    }

    /// g^{-t} = k·diag(1/s)·k′, re-sorted so the spectrum is non-increasing.
    pub fn inverse_adjoint(&self) -> Factored {
        let d = self.s.len();
        let k = DMatrix::from_fn(d, d, |i, j| self.k[(i, d - 1 - j)]);
        let kp = DMatrix::from_fn(d, d, |i, j| self.kp[(d - 1 - i, j)]);
        let s: Vec<f64> = self.s.iter().rev().map(|x| 1.0 / x).collect();
        Factored { g: self.g_inv.adjoint(), g_inv: self.g.adjoint(), k, s, kp }
    }
}
