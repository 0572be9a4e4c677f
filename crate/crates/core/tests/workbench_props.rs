use confkob::geodesic::{shoot, ShootSpec};
use confkob::manifold::MetricModel;
use confkob::workbench::{
    build_model, eds_conformal_map, eds_conformal_pushforward, run_scenario, ModelSpec,
    ScenarioConfig,
};
use proptest::prelude::*;

fn point() -> impl Strategy<Value = Vec<f64>> {
    (prop::collection::vec(-5.0..5.0f64, 3), 0.1..10.0f64).prop_map(|(mut x, t)| {
        x.push(t);
        x
    })
}

/// Largest distance from the points to the straight line `p + tau d`.
fn off_line(points: &[Vec<f64>], p: &[f64], d: &[f64]) -> f64 {
    let dd: f64 = d.iter().map(|c| c * c).sum();
    points
        .iter()
        .map(|q| {
            let w: Vec<f64> = q.iter().zip(p).map(|(a, b)| a - b).collect();
            let tau = w.iter().zip(d).map(|(a, b)| a * b).sum::<f64>() / dd;
            w.iter()
                .zip(d)
                .map(|(a, b)| (a - tau * b).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 100, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn frw_two_thirds_is_eds(x in point()) {
        let eds: MetricModel<f64> = build_model(&ModelSpec::eds()).unwrap();
        let frw: MetricModel<f64> = build_model(&ModelSpec::frw_power(4, 2.0 / 3.0)).unwrap();
        let g = eds.metric_at(&x).unwrap();
        prop_assert!(g.max_abs_diff(&frw.metric_at(&x).unwrap()) <= 1e-12 * g.max_abs());
        let r = eds.ricci_at(&x).unwrap();
        prop_assert!(r.max_abs_diff(&frw.ricci_at(&x).unwrap()) <= 1e-9 * r.max_abs().max(1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 16, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn eds_photons_map_to_flat_lines(x in point(), v in prop::collection::vec(-1.0..1.0f64, 3)) {
        prop_assume!(v.iter().map(|c| c * c).sum::<f64>() > 0.01);
        let eds: MetricModel<f64> = build_model(&ModelSpec::eds()).unwrap();
        let pullback: MetricModel<f64> = build_model(&ModelSpec::eds_pullback()).unwrap();
        let mut dir = v.clone();
        dir.push(1.0);
        let dir = eds.null_project(&x, &dir).unwrap();
        let line_point = eds_conformal_map(&x, false).unwrap();
        let line_dir = eds_conformal_pushforward(&x, &dir).unwrap();
        for m in [&eds, &pullback] {
            let traj = shoot(m, &ShootSpec::new(x.clone(), dir.clone()).with_budget(10.0)).unwrap();
            let (lo, hi) = traj.s_range();
            // A compact window that stays clear of t = 0.
            let window: Vec<Vec<f64>> = (0..=40)
                .map(|k| traj.position(lo + (hi - lo) * (0.05 + 0.95 * k as f64 / 40.0)))
                .filter(|p| p[3] > 1e-3)
                .map(|p| eds_conformal_map(&p, false).unwrap())
                .collect();
            prop_assert!(window.len() > 10);
            let gap = off_line(&window, &line_point, &line_dir);
            prop_assert!(gap <= 1e-6, "{}: {gap}", m.label());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 3, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn scenario_reports_are_deterministic(seed in 0..1000u64) {
        let cfg = ScenarioConfig { seed, ..ScenarioConfig::default() };
        let a = serde_json::to_string(&run_scenario("minkowski-degenerate", &cfg).unwrap()).unwrap();
        let b = serde_json::to_string(&run_scenario("minkowski-degenerate", &cfg).unwrap()).unwrap();
        prop_assert_eq!(a, b);
    }
}
