use nalgebra::DMatrix;
use pingpong_core::linalg::C64 as Complex64;
use pingpong_core::linalg::*;
use pingpong_core::sampling::{haar_orthogonal, trial_rng, Factored};
use proptest::prelude::*;
use rand::Rng;

fn factored(seed: u64, d: usize, decades: f64) -> Factored {
    let mut rng = trial_rng(seed, 100, d as u64);
    Factored::random(d, -decades, decades, &mut rng)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

/// Operator-norm distance between the orthogonal projectors onto two frames.
fn subspace_gap(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
    let pa = a * a.adjoint();
    let pb = b * b.adjoint();
    SquareMatrix::from_complex(pa - pb).unwrap().op_norm()
}

#[test]
fn unipotent_top_singular_vector_angle() {
    let g = SquareMatrix::from_rows(&[vec![1.0, 1.0], vec![0.0, 1.0]]).unwrap();
    let f = gap_frame(&g, 1).unwrap();
    let v = f.frame.column(0);
    let angle = (v[1].norm() / v[0].norm()).atan();
    let expected = (2.0 / (1.0 + 5f64.sqrt())).atan();
    assert!((angle - expected).abs() < 1e-12, "{angle} vs {expected}");
}

#[test]
fn wedge_of_identity_is_identity() {
    for d in 2..6 {
        assert!(wedge_square(&SquareMatrix::identity(d)).unwrap().is_identity(1e-15));
    }
    assert!(wedge_square(&SquareMatrix::identity(1)).is_err());
}

#[test]
fn phi_top_value_on_sl3_matches_singular_values() {
    for t in 0..50 {
        let mut rng = trial_rng(5, 101, t);
        let f = Factored::random(3, -1.0, 1.0, &mut rng);
        let det = f.s.iter().product::<f64>().cbrt();
        let g = f.g.scale(1.0 / det);
        let s = singular_values(&g);
        let want = (s[0] / s[2]).powi(2);
        assert!(rel(phi_rep(&g).unwrap().op_norm(), want) < 1e-9);
        assert!(rel(phi_rep(&g.try_inverse().unwrap()).unwrap().op_norm(), want) < 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn singular_values_multiply_to_determinant(seed in any::<u64>(), d in 2usize..7) {
        let f = factored(seed, d, 2.0);
        let s = singular_values(&f.g);
        let prod: f64 = s.iter().product();
        prop_assert!(rel(prod, f.g.det().norm()) < 1e-9);
        prop_assert!(s.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn reconstruction_within_relative_bound(seed in any::<u64>(), d in 2usize..13) {
        let f = factored(seed, d, 4.0);
        let cd = cartan_decompose(&f.g).unwrap();
        prop_assert!(cd.reconstruct().dist_op(&f.g) <= 1e-10 * f.g.op_norm());
        // Small singular values of a formed matrix are only determined to eps·σ₁.
        for (i, s) in f.s.iter().enumerate() {
            prop_assert!((cd.sigma(i + 1) - s).abs() <= 1e-12 * f.s[0]);
        }
    }

    #[test]
    fn spectral_radius_at_most_top_singular_value(seed in any::<u64>(), d in 2usize..7) {
        let f = factored(seed, d, 2.0);
        let l = eigenvalue_moduli(&f.g).unwrap();
        prop_assert!(l[0] <= f.g.op_norm() * (1.0 + 1e-9));
    }

    #[test]
    fn gap_frame_ignores_right_orthogonal_factors(seed in any::<u64>(), d in 2usize..7, k in 1usize..6) {
        prop_assume!(k < d);
        let f = factored(seed, d, 2.0);
        prop_assume!(f.s[k - 1] / f.s[k] > 1.5);
        let mut rng = trial_rng(seed, 102, 0);
        let mut perm: Vec<usize> = (0..d).collect();
        for i in (1..d).rev() {
            perm.swap(i, rng.gen_range(0..=i));
        }
        let p = DMatrix::from_fn(d, d, |i, j| if perm[j] == i { 1.0 } else { 0.0 });
        let gp = f.g.mul(&SquareMatrix::from_real(p).unwrap());
        let a = gap_frame(&f.g, k).unwrap().frame;
        let b = gap_frame(&gp, k).unwrap().frame;
        prop_assert!(subspace_gap(&a, &b) <= 1e-8);
    }

    #[test]
    fn wedge_square_is_multiplicative(seed in any::<u64>(), d in 2usize..7) {
        let g = factored(seed, d, 1.0).g;
        let h = factored(seed ^ 0x5555, d, 1.0).g;
        let lhs = wedge_square(&g.mul(&h)).unwrap();
        let rhs = wedge_square(&g).unwrap().mul(&wedge_square(&h).unwrap());
        prop_assert!(lhs.dist_op(&rhs) <= 1e-9 * rhs.op_norm());
        let s = singular_values(&g);
        prop_assert!(rel(wedge_square(&g).unwrap().op_norm(), s[0] * s[1]) < 1e-9);
    }

    #[test]
    fn phi_is_multiplicative(seed in any::<u64>(), d in 2usize..4) {
        let g = factored(seed, d, 0.5).g;
        let h = factored(seed ^ 0xaaaa, d, 0.5).g;
        let lhs = phi_rep(&g.mul(&h)).unwrap();
        let rhs = phi_rep(&g).unwrap().mul(&phi_rep(&h).unwrap());
        prop_assert!(lhs.dist_op(&rhs) <= 1e-9 * rhs.op_norm());
    }

    #[test]
    fn sym_square_preserves_positive_definite(seed in any::<u64>(), d in 2usize..5) {
        let mut rng = trial_rng(seed, 103, 0);
        let g = factored(seed, d, 1.0).g;
        let rep = sym_square_rep(&g).unwrap().to_real().unwrap();
        let k = haar_orthogonal(d, &mut rng);
        let ev = DMatrix::from_fn(d, d, |i, j| if i == j { rng.gen_range(0.1..10.0) } else { 0.0 });
        let x = &k * ev * k.transpose();
        let y = sym_mat(&(rep * sym_vec(&x)), d);
        let direct = g.to_real().unwrap().transpose() * &x * g.to_real().unwrap();
        prop_assert!((&y - &direct).norm() <= 1e-9 * direct.norm());
        prop_assert!(y.symmetric_eigenvalues().min() > 0.0);
    }
}
