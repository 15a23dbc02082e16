use hpid::homogeneity::{
    verify_field_homogeneity, Canonical, Dilation, Experimental, HomNormSpec, HomogeneousNorm, WeightedSum,
};
use hpid::linalg::{euclidean_norm, SymMatrix};
use hpid::plant::{ClosedLoop, NormChoice};
use hpid::stability::certify;
use hpid::GainSet;
use proptest::prelude::*;

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

fn certified_p() -> SymMatrix {
    certify(&GainSet::certified_default()).unwrap().p
}

fn nonzero_vec(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0..3.0f64, n).prop_filter("away from origin", |x| euclidean_norm(x) > 1e-3)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn group_law(mu in -0.45..0.45f64, s in -3.0..3.0f64, t in -3.0..3.0f64, x in nonzero_vec(3)) {
        let dil = Dilation::extended(mu).unwrap();
        let composed = dil.apply(s, &dil.apply(t, &x).unwrap()).unwrap();
        let direct = dil.apply(s + t, &x).unwrap();
        for (a, b) in composed.iter().zip(&direct) {
            prop_assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
        }
        prop_assert_eq!(dil.apply(0.0, &x).unwrap(), x);
    }

    #[test]
    fn weighted_sum_scales(mu in -0.45..0.45f64, s in -3.0..3.0f64, x in nonzero_vec(2),
                           c0 in 0.1..5.0f64, c1 in 0.1..5.0f64) {
        let dil = Dilation::hpid(mu).unwrap();
        let w = WeightedSum::new(vec![c0, c1]).unwrap();
        let lhs = w.norm(&dil, &dil.apply(s, &x).unwrap()).unwrap();
        prop_assert!(rel_err(lhs, s.exp() * w.norm(&dil, &x).unwrap()) <= 1e-9);
    }

    #[test]
    fn canonical_scales_and_solves_its_equation(mu in -0.3..0.3f64, s in -3.0..3.0f64, x in nonzero_vec(3)) {
        let dil = Dilation::extended(mu).unwrap();
        let p = certified_p();
        let c = Canonical::new(p.clone(), 1e-12).unwrap();
        let lambda = c.norm(&dil, &x).unwrap();
        let z = dil.apply(-lambda.ln(), &x).unwrap();
        prop_assert!((p.quad_form(&z).sqrt() - 1.0).abs() <= 1e-10);
        let scaled = c.norm(&dil, &dil.apply(s, &x).unwrap()).unwrap();
        prop_assert!(rel_err(scaled, s.exp() * lambda) <= 1e-9);
    }

    #[test]
    fn experimental_scales(mu in -0.45..0.45f64, s in -3.0..3.0f64, x in nonzero_vec(2),
                           zeta in 0.1..3.0f64, gamma in 0.1..3.0f64) {
        let e = Experimental::new(zeta, gamma, mu).unwrap();
        let dil = e.dilation();
        let scaled = e.norm(&dil.apply(s, &x).unwrap()).unwrap();
        prop_assert!(rel_err(scaled, s.exp() * e.norm(&x).unwrap()) <= 1e-9);
    }

    /// The canonical unit sphere is the `P`-unit sphere, and the two norms
    /// agree on which side of it a point lies.
    #[test]
    fn canonical_unit_ball_matches_p_ball(mu in -0.3..0.3f64, x in nonzero_vec(3)) {
        let dil = Dilation::extended(mu).unwrap();
        let p = certified_p();
        let c = Canonical::new(p.clone(), 1e-12).unwrap();
        let pn = p.quad_form(&x).sqrt();
        let on_sphere: Vec<f64> = x.iter().map(|v| v / pn).collect();
        prop_assert!((c.norm(&dil, &on_sphere).unwrap() - 1.0).abs() <= 1e-10);
        let lambda = c.norm(&dil, &x).unwrap();
        prop_assert_eq!(lambda < 1.0, pn < 1.0);
    }

    #[test]
    fn field_is_homogeneous(mu in prop::sample::select(vec![-0.2, -0.1, 0.0, 0.1, 0.2]),
                            s in -2.0..2.0f64, x in nonzero_vec(3)) {
        let cl = ClosedLoop::new(GainSet::certified_default(), mu, NormChoice::default().build(mu).unwrap()).unwrap();
        let report = verify_field_homogeneity(
            |y| Ok(cl.field(&[y[0], y[1], y[2]])?.to_vec()),
            &cl.extended_dilation(),
            mu,
            &[(s, x)],
        ).unwrap();
        prop_assert!(report.passed, "residual {}", report.max_residual);
    }
}

/// Central differences with step 1e-6 against the analytic gradient.
#[test]
fn canonical_gradient_matches_finite_differences() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
    let p = certified_p();
    let c = Canonical::new(p, 1e-12).unwrap();
    for k in 0..100 {
        let dil = Dilation::extended(rng.random_range(-0.3..0.3)).unwrap();
        let x: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
        let grad = c.gradient(&dil, &x).unwrap();
        let h = 1e-6;
        for i in 0..3 {
            let mut hi = x.clone();
            let mut lo = x.clone();
            hi[i] += h;
            lo[i] -= h;
            let fd = (c.norm(&dil, &hi).unwrap() - c.norm(&dil, &lo).unwrap()) / (2.0 * h);
            let scale = euclidean_norm(&grad).max(1e-12);
            assert!((grad[i] - fd).abs() / scale <= 1e-5, "point {k}, component {i}: {} vs {fd}", grad[i]);
        }
    }
}

#[test]
fn field_homogeneity_suite_over_two_hundred_samples() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    for mu in [-0.2, -0.1, 0.0, 0.1, 0.2] {
        let samples: Vec<(f64, Vec<f64>)> = (0..200)
            .map(|_| (rng.random_range(-2.0..2.0), (0..3).map(|_| rng.random_range(-3.0..3.0)).collect()))
            .collect();
        let cl = ClosedLoop::new(GainSet::certified_default(), mu, NormChoice::default().build(mu).unwrap()).unwrap();
        let report = verify_field_homogeneity(
            |y| Ok(cl.field(&[y[0], y[1], y[2]])?.to_vec()),
            &cl.extended_dilation(),
            mu,
            &samples,
        )
        .unwrap();
        assert!(report.passed, "mu = {mu}: residual {}", report.max_residual);
    }
}

/// A non-homogeneous field is caught.
#[test]
fn inhomogeneous_field_is_rejected() {
    let dil = Dilation::extended(0.1).unwrap();
    let report = verify_field_homogeneity(
        |y| Ok(vec![y[1], -y[0] - y[1] + y[2], -y[0].powi(3)]),
        &dil,
        0.1,
        &[(1.0, vec![1.0, 0.5, 0.2])],
    )
    .unwrap();
    assert!(!report.passed);
}

#[test]
fn canonical_pairing_requires_monotone_dilation() {
    let p = SymMatrix::from_rows(&[vec![1.0, 0.99], vec![0.99, 1.0]]).unwrap();
    let dil = Dilation::new(vec![0.1, 1.9]).unwrap();
    let spec = HomNormSpec::Canonical(Canonical::new(p, 1e-12).unwrap());
    assert!(HomogeneousNorm::new(spec, dil).is_err());
}
