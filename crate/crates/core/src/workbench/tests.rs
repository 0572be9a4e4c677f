use super::*;
use crate::sampling::rng;
use rand::Rng;

#[test]
fn eds_spec_builds_the_warped_metric() {
    let m: MetricModel<f64> = build_model(&ModelSpec::eds()).unwrap();
    let g = m.metric_at(&[0.3, 0.0, -1.0, 8.0]).unwrap();
    for i in 0..3 {
        assert!((g[(i, i)] - 16.0).abs() < 1e-12);
    }
    assert_eq!(g[(3, 3)], -1.0);
    assert!(!m.in_domain(&[0.0, 0.0, 0.0, -1.0]));

    let flat: MetricModel<f64> = build_model(&ModelSpec::new(ModelKind::Minkowski, 4)).unwrap();
    assert_eq!(
        flat.metric_at(&[5.0, -3.0, 2.0, -7.0]).unwrap(),
        crate::linalg::Matrix::diagonal(&[1.0, 1.0, 1.0, -1.0])
    );
}

#[test]
fn custom_and_frw_agree_with_eds() {
    let eds: MetricModel<f64> = build_model(&ModelSpec::eds()).unwrap();
    let frw: MetricModel<f64> = build_model(&ModelSpec::frw_power(4, 2.0 / 3.0)).unwrap();
    let custom: MetricModel<f64> = build_model(&ModelSpec::custom(
        vec!["t^(4/3)", "t^(4/3)", "t^(4/3)", "-1"],
        vec!["t"],
    ))
    .unwrap();
    let mut r = rng(3);
    for _ in 0..100 {
        let x = [
            r.gen_range(-5.0..5.0),
            r.gen_range(-5.0..5.0),
            r.gen_range(-5.0..5.0),
            r.gen_range(0.1..10.0),
        ];
        let g = eds.metric_at(&x).unwrap();
        assert!(g.max_abs_diff(&custom.metric_at(&x).unwrap()) <= 1e-12 * g.max_abs());
        assert!(g.max_abs_diff(&frw.metric_at(&x).unwrap()) <= 1e-12 * g.max_abs());
    }
    let x = [0.0, 1.0, 2.0, 1.7];
    let a = eds.ricci_at(&x).unwrap();
    assert!(a.max_abs_diff(&frw.ricci_at(&x).unwrap()) < 1e-9);
}

#[test]
fn spec_errors() {
    assert!(matches!(
        build_model::<f64>(&ModelSpec::new(ModelKind::Eds, 2)),
        Err(Error::UnsupportedDimension(2))
    ));
    assert!(matches!(
        build_model::<f64>(&ModelSpec::new(ModelKind::FrwPower, 4)),
        Err(Error::InvalidSpec(_))
    ));
    let bad = ModelSpec::custom(vec!["t^(4/3", "1", "1", "-1"], vec![]);
    match build_model::<f64>(&bad) {
        Err(Error::Parse(e)) => assert_eq!(e.position, 6),
        other => panic!("{other:?}"),
    }
    let parsed = ModelSpec::from_json(r#"{"model":"frw_power","params":{"a":0.5}}"#).unwrap();
    assert_eq!(parsed.dimension, 4);
    assert_eq!(parsed.params.a, Some(0.5));
    assert!(ModelSpec::from_json(r#"{"model":"desitter"}"#).is_err());
}

#[test]
fn conformal_map_values() {
    let p = eds_conformal_map(&[0.0, 0.0, 3.0, 1.0], false).unwrap();
    assert_eq!(p, vec![0.0, 0.0, 3.0, 3.0]);
    let q = eds_conformal_map::<f64>(&[0.0, 0.0, 0.0, 0.125], false).unwrap();
    assert!((q[3] - 1.5).abs() < 1e-15);
    let mut r = rng(11);
    for _ in 0..50 {
        let x: [f64; 4] = [
            r.gen_range(-3.0..3.0),
            r.gen_range(-3.0..3.0),
            r.gen_range(-3.0..3.0),
            r.gen_range(0.01..20.0),
        ];
        let back = eds_conformal_map(&eds_conformal_map(&x, false).unwrap(), true).unwrap();
        assert!(crate::max_abs_diff(&x, &back) <= 1e-12 * x[3].max(1.0));
    }
    assert!(matches!(
        eds_conformal_map(&[0.0, 0.0, 0.0, 0.0], false),
        Err(Error::OutOfDomain { .. })
    ));
}

#[test]
fn pullback_matches_rescaled_eds() {
    let rep = pullback_check(&[vec![0.0, 0.0, 0.0, 1.0], vec![1.0, 2.0, 3.0, 8.0]]).unwrap();
    assert!(rep.passed);
    assert!(rep.max_deviation <= 1e-12, "{}", rep.max_deviation);
    assert!(pullback_check(&[vec![0.0, 0.0, 0.0, -1.0]]).is_err());

    // The standard photon maps to (0, 0, 3 s^(1/5), 3 s^(1/5)), on the flat cone.
    for s in [0.3, 1.0, 2.5, 7.0f64] {
        let p = eds_conformal_map(&[0.0, 0.0, 3.0 * s.powf(0.2), s.powf(0.6)], false).unwrap();
        assert!((p[2] - 3.0 * s.powf(0.2)).abs() < 1e-12);
        assert!((p[3] - p[2]).abs() < 1e-12);
    }
    let pb: MetricModel<f64> = build_model(&ModelSpec::eds_pullback()).unwrap();
    let g = pb.metric_at(&[0.0, 0.0, 0.0, 8.0]).unwrap();
    assert!((g[(0, 0)] - 1.0).abs() < 1e-12 && (g[(3, 3)] + 1.0 / 16.0).abs() < 1e-12);
    assert!(pb.einstein_residual_at(&[0.2, 0.1, 0.0, 2.0]).unwrap() < 1e-9);
}

#[test]
fn unknown_scenario() {
    assert_eq!(
        run_scenario("unknown", &ScenarioConfig::default()).unwrap_err(),
        Error::UnknownScenario("unknown".into())
    );
}

#[test]
fn minkowski_degenerate_scenario() {
    let rep = run_scenario("minkowski-degenerate", &ScenarioConfig::default()).unwrap();
    assert!(rep.passed, "{rep:#?}");
    let lengths = &rep.checks[1].measured["lengths"];
    let expect = [
        2.0 * (11.0f64 / 9.0).ln(),
        2.0 * (101.0f64 / 99.0).ln(),
        2.0 * (1001.0f64 / 999.0).ln(),
    ];
    for (i, e) in expect.iter().enumerate() {
        assert!((lengths[i].as_f64().unwrap() - e).abs() < 1e-12);
    }
    assert!((lengths[1].as_f64().unwrap() - 0.0400).abs() < 1e-4);
    assert!((lengths[2].as_f64().unwrap() - 0.0040).abs() < 1e-5);
}
