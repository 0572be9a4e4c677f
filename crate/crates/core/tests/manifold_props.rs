use confkob::manifold::MetricModel;
use confkob::workbench::{build_model, ModelSpec};
use proptest::prelude::*;

fn builtins() -> Vec<MetricModel<f64>> {
    vec![
        MetricModel::einstein_de_sitter(4).unwrap(),
        MetricModel::minkowski(4).unwrap(),
        MetricModel::minkowski_halfspace(4).unwrap(),
        MetricModel::frw_power(4, 0.4).unwrap(),
        MetricModel::frw_power(5, 0.8).unwrap(),
    ]
}

fn point(n: usize) -> impl Strategy<Value = Vec<f64>> {
    (prop::collection::vec(-5.0..5.0f64, n - 1), 0.5..10.0f64).prop_map(|(mut x, t)| {
        x.push(t);
        x
    })
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-12)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 100, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn stored_tensors_are_symmetric(x in point(4)) {
        let custom: MetricModel<f64> = build_model(&ModelSpec::custom(
            vec!["t^(4/3)*(1 + 0.1*sin(x1))", "exp(0.2*x2)", "1 + x3^2", "-1"],
            vec!["t"],
        )).unwrap();
        let conformal = MetricModel::conformal(MetricModel::einstein_de_sitter(4).unwrap(), "1 + 0.1*x1^2").unwrap();
        for m in [MetricModel::einstein_de_sitter(4).unwrap(), custom, conformal] {
            prop_assert_eq!(m.metric_at(&x).unwrap().asymmetry(), 0.0);
            prop_assert_eq!(m.ricci_at(&x).unwrap().asymmetry(), 0.0);
            prop_assert!(m.christoffel_at(&x).unwrap().lower_asymmetry() <= 1e-15);
        }
    }

    #[test]
    fn analytic_and_finite_difference_curvature_agree(x in point(5)) {
        for m in builtins() {
            let x = &x[5 - m.dimension()..];
            let exact = m.ricci_analytic(x).unwrap();
            let fd = m.ricci_fd(x).unwrap();
            let scale = exact.max_abs().max(1e-12);
            prop_assert!(exact.max_abs_diff(&fd) <= 1e-5 * scale, "{}: {:?} vs {:?}", m.label(), exact, fd);
            let (a, b) = (m.scalar_curvature_at(x).unwrap(), m.scalar_curvature_fd(x).unwrap());
            prop_assert!((a - b).abs() <= 1e-5 * a.abs().max(1e-12) + 1e-12);
        }
    }

    #[test]
    fn scalar_curvature_is_the_trace(x in point(5)) {
        for m in builtins() {
            let x = &x[5 - m.dimension()..];
            let traced = m.inverse_metric_at(x).unwrap().trace_against(&m.ricci_at(x).unwrap());
            let r = m.scalar_curvature_at(x).unwrap();
            prop_assert!((traced - r).abs() <= 1e-9 * r.abs().max(1.0));
        }
    }

    #[test]
    fn conformal_metric_is_rescaled(x in point(4), a in -1.0..1.0f64, b in 0.1..2.0f64) {
        let base = MetricModel::einstein_de_sitter(4).unwrap();
        let factor = format!("{b}*exp({a}*x1) + t");
        let m = MetricModel::conformal(base.clone(), &factor).unwrap();
        let omega = b * (a * x[0]).exp() + x[3];
        let g = base.metric_at(&x).unwrap();
        let h = m.metric_at(&x).unwrap();
        prop_assert!(h.max_abs_diff(&g.scale(omega * omega)) <= 4.0 * f64::EPSILON * h.max_abs());
    }

    #[test]
    fn null_projection_is_idempotent(x in point(4), v in prop::collection::vec(-3.0..3.0f64, 4)) {
        prop_assume!(v[..3].iter().any(|c| c.abs() > 1e-3));
        for m in builtins().into_iter().filter(|m| m.dimension() == 4) {
            let once = m.null_project(&x, &v).unwrap();
            let twice = m.null_project(&x, &once).unwrap();
            for (p, q) in once.iter().zip(&twice) {
                prop_assert!(rel(*q, *p) <= 1e-14 || (p - q).abs() <= 1e-14);
            }
            prop_assert!(m.is_null(&x, &once, 1e-12));
        }
    }
}
