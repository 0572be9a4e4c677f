use confkob::geodesic::{shoot, ShootSpec};
use confkob::kobayashi::{
    chain_length, estimate_distance, rebuild_chain, single_link_estimate, SearchConfig,
    JOIN_TOLERANCE,
};
use confkob::manifold::MetricModel;
use confkob::projective::SignConvention;
use confkob::workbench::{
    eds_conformal_map, eds_records_to_halfspace, run_scenario, ScenarioConfig,
};

fn invariant() -> SearchConfig {
    SearchConfig {
        starts: 3,
        iterations: 25,
        k_max: 2,
        convention: SignConvention::ConformallyInvariant,
        ..SearchConfig::default()
    }
}

#[test]
fn halfspace_lengths_match_under_the_invariant_sign() {
    let eds = MetricModel::einstein_de_sitter(4).unwrap();
    let half = MetricModel::minkowski_halfspace(4).unwrap();
    let cfg = invariant();
    let x = vec![0.0, 0.0, 3.0, 1.0];
    let traj = shoot(
        &eds,
        &ShootSpec::new(x.clone(), vec![0.0, 0.0, 0.6, 0.6]).with_budget(50.0),
    )
    .unwrap();
    let y = traj.position(1.0);
    let chain = single_link_estimate(&eds, &x, &y, &cfg).unwrap().unwrap();
    let a = chain_length(&chain, JOIN_TOLERANCE).unwrap();
    // Along the standard photon the invariant-sign cost is (1/5) log(s2 / s1).
    assert!((a - 0.2 * 2f64.ln()).abs() < 1e-8, "{a}");

    let (hx, hy) = (
        eds_conformal_map(&x, false).unwrap(),
        eds_conformal_map(&y, false).unwrap(),
    );
    let records = eds_records_to_halfspace(&chain.records()).unwrap();
    let carried = rebuild_chain(
        &half,
        &hx,
        &hy,
        &records,
        &cfg.link_settings(),
        JOIN_TOLERANCE,
    )
    .unwrap();
    let b = chain_length(&carried, JOIN_TOLERANCE).unwrap();
    assert!((a - b).abs() < 1e-6, "{a} vs {b}");

    let p = vec![0.1, -0.2, 0.0, 1.0];
    let q = vec![0.4, 0.3, 0.2, 1.8];
    let e = estimate_distance(&eds, &p, &q, &cfg).unwrap();
    let h = estimate_distance(
        &half,
        &eds_conformal_map(&p, false).unwrap(),
        &eds_conformal_map(&q, false).unwrap(),
        &cfg,
    )
    .unwrap();
    assert!(
        (e.value - h.value).abs() < 2e-4,
        "{} vs {}",
        e.value,
        h.value
    );
}

#[test]
fn eds_theorem_scenario_under_both_signs() {
    let published = run_scenario("eds-theorem", &ScenarioConfig::default()).unwrap();
    for check in &published.checks {
        // Only the cross-check depends on the sign in front of the Ricci term.
        assert_eq!(
            check.passed,
            check.name != "conformal_cross_check",
            "{check:#?}"
        );
    }

    let mut cfg = ScenarioConfig::default();
    cfg.search.convention = SignConvention::ConformallyInvariant;
    let report = run_scenario("eds-theorem", &cfg).unwrap();
    assert!(report.passed, "{report:#?}");
}
