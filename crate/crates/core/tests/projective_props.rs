use confkob::geodesic::{shoot, ShootSpec};
use confkob::manifold::MetricModel;
use confkob::projective::{
    development_arc, poincare_distance, projective_parameter, projective_parameter_with, Moebius,
    ProjectiveOptions, ProjectivePoint, SignConvention,
};
use proptest::prelude::*;

fn moebius() -> impl Strategy<Value = Moebius<f64>> {
    prop::array::uniform4(-2.0..2.0f64)
        .prop_filter("nondegenerate", |[a, b, c, d]| (a * d - b * c).abs() > 0.2)
        .prop_map(|[a, b, c, d]| Moebius::new(a, b, c, d).unwrap())
}

/// EdS photon through `(0, 0, x3, t)` along `x3`.
fn eds_param(t: f64, budget: f64) -> confkob::HomogeneousParameterF64 {
    let m = MetricModel::einstein_de_sitter(4).unwrap();
    let v = m
        .null_project(&[0.0, 0.0, 0.0, t], &[0.3, 0.0, 0.8, 1.0])
        .unwrap();
    let traj = shoot(
        &m,
        &ShootSpec::new(vec![0.0, 0.0, 0.0, t], v).with_budget(budget),
    )
    .unwrap();
    projective_parameter(&m, &traj, 0.0).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn poincare_distance_is_a_metric(a in -0.99..0.99f64, b in -0.99..0.99f64, c in -0.99..0.99f64) {
        let d = |x, y| poincare_distance(x, y).unwrap();
        prop_assert_eq!(d(a, b), d(b, a));
        prop_assert!(d(a, b) >= 0.0);
        prop_assert_eq!(d(a, a), 0.0);
        prop_assert!(d(a, c) <= d(a, b) + d(b, c) + 1e-12);
    }

    #[test]
    fn moebius_group_laws(m1 in moebius(), m2 in moebius(), m3 in moebius(), t in -3.0..3.0f64) {
        prop_assert!((m1.det().abs() - 1.0).abs() < 1e-12);
        let left = m1.compose(&m2).compose(&m3);
        let right = m1.compose(&m2.compose(&m3));
        prop_assert!(left.distance(&right) < 1e-12);
        prop_assert!(m1.compose(&m1.invert()).distance(&Moebius::identity()) < 1e-12);
        let p = ProjectivePoint::new(t, 1.0);
        let composed = m1.compose(&m2).apply(&p);
        let stepwise = m1.apply(&m2.apply(&p));
        prop_assert!(composed.equivalent(&stepwise, 1e-12));
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 12, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn schwarzian_is_moebius_invariant(t in 0.5..4.0f64, m in moebius(), f in 0.1..0.9f64) {
        let param = eds_param(t, 10.0);
        let (lo, hi) = param.range();
        let s = lo + f * (hi - lo);
        let moved = param.transformed(&m);
        let h = 1e-2 * (s - lo).min(1.0);
        // The stencil must stay well clear of poles of the transformed
        // parameter; near a simple pole |f / f'| is the distance to it.
        let e = 1e-5;
        let near = match (moved.value(s), moved.value(s + e), moved.value(s - e)) {
            (Some(f), Some(fp), Some(fm)) => (f * 2.0 * e / (fp - fm)).abs(),
            _ => 0.0,
        };
        prop_assume!(near > 100.0 * h);
        let a = param.schwarzian_measured(s, h).unwrap();
        let b = moved.schwarzian_measured(s, h).unwrap();
        prop_assert!((a - b).abs() <= 2e-5 * (1.0 + a.abs()), "{a} vs {b}");
    }

    #[test]
    fn parameter_solves_the_projective_equation(t in 0.5..4.0f64) {
        let param = eds_param(t, 10.0);
        let (lo, hi) = param.range();
        for k in 1..=32 {
            let s = lo + (hi - lo) * (0.05 + 0.9 * k as f64 / 33.0);
            let h = 1e-2 * (s - lo).min(1.0);
            let measured = param.schwarzian_measured(s, h).unwrap();
            let expected = param.schwarzian_expected(s).unwrap();
            prop_assert!((measured - expected).abs() <= 1e-5 * (1.0 + expected.abs()), "s = {s}: {measured} vs {expected}");
        }
    }

    #[test]
    fn normalization_and_wronskian(t in 0.5..4.0f64, f in 0.05..0.95f64) {
        let param = eds_param(t, 10.0);
        let (lo, hi) = param.range();
        let rebased = param.with_base(lo + f * (hi - lo)).unwrap();
        let (p, dp, ddp) = rebased.normalization();
        prop_assert!(p.abs() <= 1e-8 && (dp - 1.0).abs() <= 1e-8 && ddp.abs() <= 1e-8);
        prop_assert!(param.wronskian_drift() <= 1e-8);
        prop_assert!(rebased.wronskian_drift() <= 1e-8);
    }

    #[test]
    fn arc_distance_is_moebius_invariant(t in 0.5..4.0f64, m in moebius(), f1 in 0.05..0.95f64, f2 in 0.05..0.95f64) {
        let param = eds_param(t, 50.0);
        let (lo, hi) = param.range();
        let (s1, s2) = (lo + f1 * (hi - lo), lo + f2 * (hi - lo));
        let arc = development_arc(&param).unwrap();
        let moved = param.transformed(&m);
        let moved_arc = development_arc(&moved).unwrap();
        let a = arc.distance(&param.point(s1), &param.point(s2)).unwrap();
        let b = moved_arc.distance(&m.apply(&param.point(s1)), &m.apply(&param.point(s2))).unwrap();
        prop_assert!((a - b).abs() <= 1e-10 * (1.0 + a), "{a} vs {b}");
    }

    #[test]
    fn homogeneous_evaluation_survives_poles(s in -2.4..2.4f64) {
        // Constant q = 1 on the equator of R x S^2: p = tan s.
        let m = MetricModel::<f64>::custom_diagonal(3, &["1", "sin(x1)^2", "-1"], &["x1", "3.141592653589793 - x1"]).unwrap();
        let spec = ShootSpec::new(vec![std::f64::consts::FRAC_PI_2, 0.0, 0.0], vec![0.0, 1.0, 1.0]).with_budget(5.0);
        let traj = shoot(&m, &spec).unwrap();
        let opts = ProjectiveOptions::default().with_convention(SignConvention::ConformallyInvariant);
        let param = projective_parameter_with(&m, &traj, 0.0, &opts).unwrap();
        for s in [s, std::f64::consts::FRAC_PI_2] {
            let u = param.eval(s);
            prop_assert!(u.iter().all(|c| c.is_finite()));
            prop_assert!(param.point(s).is_valid());
            prop_assert!(param.point(s).equivalent(&ProjectivePoint::new(s.sin(), s.cos()), 1e-8));
        }
    }
}
