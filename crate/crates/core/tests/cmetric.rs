use pingpong_core::cmetric::*;
use pingpong_core::experiment::parse_nested_json;
use pingpong_core::linalg::SquareMatrix;
use pingpong_core::projgeom::{act, pullback_hyperplane, BallRegion, Hyperplane, ProjPoint, Space};
use pingpong_core::sampling::{trial_rng, unit_vector, Factored};
use proptest::prelude::*;
use rand::Rng;

fn nested() -> (ProperDomain, ProperDomain) {
    let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/nested_domains.json")).unwrap();
    let n = parse_nested_json(&text).unwrap();
    (n.inner, n.outer)
}

/// Unit disk in the chart z ↦ [z, 1] of P(R^3), with sampled duals.
fn klein_domain() -> ProperDomain {
    let region = BallRegion::single(Space::P, ProjPoint::basis(3, 2), std::f64::consts::FRAC_1_SQRT_2).unwrap();
    ProperDomain::with_default_sampler(region, Hyperplane::from_normal(ProjPoint::basis(3, 2))).unwrap()
}

fn disk_point<R: Rng>(rng: &mut R, r: f64) -> [f64; 2] {
    let a: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    let s = r * rng.gen::<f64>().sqrt();
    [s * a.cos(), s * a.sin()]
}

fn to_chart(p: &ProjPoint) -> Vec<f64> {
    let v = p.real_rep();
    vec![v[0] / v[2], v[1] / v[2]]
}

/// Boost along x₁ composed with a rotation of the (x₁, x₂) plane; both
/// preserve x₁² + x₂² < x₃².
fn disk_isometry(t: f64, a: f64) -> SquareMatrix {
    let boost = SquareMatrix::from_rows(&[vec![t.cosh(), 0.0, t.sinh()], vec![0.0, 1.0, 0.0], vec![t.sinh(), 0.0, t.cosh()]]).unwrap();
    let rot = SquareMatrix::from_rows(&[vec![a.cos(), -a.sin(), 0.0], vec![a.sin(), a.cos(), 0.0], vec![0.0, 0.0, 1.0]]).unwrap();
    rot.mul(&boost)
}

#[test]
fn interval_matches_closed_form() {
    let u = interval_domain();
    for t in [0.1, 0.3, 0.5, 0.7] {
        let x = ProjPoint::from_real(&[1.0, 0.0]).unwrap();
        let y = ProjPoint::from_real(&[1.0, t]).unwrap();
        let want = ((1.0 + t) / (1.0 - t)).ln();
        assert!((caratheodory_dist(&u, &x, &y).unwrap() - want).abs() < 0.01 * want);
    }
    assert!((hilbert_dist(&ConvexBody::ball(&[0.0], 1.0), &[0.0], &[0.5]).unwrap() - 0.5 * 3f64.ln()).abs() < 1e-12);
}

#[test]
fn points_outside_are_rejected() {
    let (inner, _) = nested();
    let far = ProjPoint::basis(3, 0);
    assert!(caratheodory_dist(&inner, &far, &ProjPoint::basis(3, 2)).is_err());
}

#[test]
fn caratheodory_to_hilbert_ratio_is_nearly_constant() {
    // The ratio itself is reported; only its spread is asserted.
    let dom = klein_domain();
    let disk = ConvexBody::ball(&[0.0, 0.0], 1.0);
    let mut rng = trial_rng(3, 300, 0);
    let mut ratios = Vec::new();
    while ratios.len() < 100 {
        let (a, b) = (disk_point(&mut rng, 0.6), disk_point(&mut rng, 0.6));
        let h = hilbert_dist(&disk, &a, &b).unwrap();
        if h < 0.05 {
            continue;
        }
        let c = caratheodory_dist(&dom, &affine_point(&a), &affine_point(&b)).unwrap();
        ratios.push(c / h);
    }
    let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ratios.iter().copied().fold(0.0, f64::max);
    println!("caratheodory/hilbert in [{lo:.4}, {hi:.4}]");
    assert!(hi / lo < 1.02, "spread {lo} .. {hi}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cross_ratio_swapping_points_inverts(seed in any::<u64>(), d in 2usize..5) {
        let mut rng = trial_rng(seed, 301, 0);
        let p = |rng: &mut rand_chacha::ChaCha8Rng| ProjPoint::from_real_vector(&unit_vector(d, rng)).unwrap();
        let (v1, v2) = (p(&mut rng), p(&mut rng));
        let (u1, u2) = (Hyperplane::from_normal(p(&mut rng)), Hyperplane::from_normal(p(&mut rng)));
        if let (Ok(a), Ok(b)) = (cross_ratio(&v1, &v2, &u1, &u2), cross_ratio(&v2, &v1, &u1, &u2)) {
            prop_assert!(((a * b).norm() - 1.0).abs() < 1e-9);
            prop_assert!((cross_ratio(&v1, &v1, &u1, &u2).unwrap().re - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn symmetric_and_triangle(seed in any::<u64>()) {
        let (inner, _) = nested();
        let mut rng = trial_rng(seed, 302, 0);
        let pts: Vec<ProjPoint> = (0..3).map(|_| affine_point(&disk_point(&mut rng, 0.15))).collect();
        let d = |a: usize, b: usize| caratheodory_dist(&inner, &pts[a], &pts[b]).unwrap();
        prop_assert!((d(0, 1) - d(1, 0)).abs() < 1e-12);
        prop_assert!(d(0, 0) == 0.0);
        prop_assert!(d(0, 2) <= d(0, 1) + d(1, 2) + 1e-9);
    }

    #[test]
    fn invariant_under_transported_duals(seed in any::<u64>()) {
        let (_, outer) = nested();
        let mut rng = trial_rng(seed, 303, 0);
        let g = Factored::random(3, -1.0, 1.0, &mut rng);
        let duals = outer.all_duals();
        let moved: Vec<Hyperplane> = duals.iter().map(|h| pullback_hyperplane(&g.g_inv, h)).collect();
        let x = affine_point(&disk_point(&mut rng, 0.3));
        let y = affine_point(&disk_point(&mut rng, 0.3));
        let a = sampled_dist(&duals, &x, &y);
        let b = sampled_dist(&moved, &act(&g.g, &x), &act(&g.g, &y));
        prop_assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
    }

    #[test]
    fn smaller_domain_gives_larger_distance(seed in any::<u64>()) {
        let (inner, outer) = nested();
        let inner = inner.with_extra_samples(&outer.all_duals()).unwrap();
        let mut rng = trial_rng(seed, 304, 0);
        let x = affine_point(&disk_point(&mut rng, 0.18));
        let y = affine_point(&disk_point(&mut rng, 0.18));
        prop_assert!(caratheodory_dist(&inner, &x, &y).unwrap() >= caratheodory_dist(&outer, &x, &y).unwrap());
    }

    #[test]
    fn hilbert_distance_invariant_under_disk_isometries(seed in any::<u64>()) {
        let disk = ConvexBody::ball(&[0.0, 0.0], 1.0);
        let mut rng = trial_rng(seed, 305, 0);
        let g = disk_isometry(rng.gen_range(-1.0..1.0), rng.gen_range(0.0..6.0));
        let (a, b) = (disk_point(&mut rng, 0.7), disk_point(&mut rng, 0.7));
        let ga = to_chart(&act(&g, &affine_point(&a)));
        let gb = to_chart(&act(&g, &affine_point(&b)));
        let h = hilbert_dist(&disk, &a, &b).unwrap();
        prop_assert!((hilbert_dist(&disk, &ga, &gb).unwrap() - h).abs() <= 1e-9 * h.max(1.0));
    }
}
