use confkob::geodesic::{shoot, ShootSpec};
use confkob::kobayashi::{
    chain_length, estimate_distance, rebuild_chain, segment_cost, single_link_estimate,
    transport_chain, EuclideanMotion, SearchConfig, JOIN_TOLERANCE,
};
use confkob::manifold::MetricModel;
use confkob::projective::{
    projective_parameter_with, segment_cost_on, CompanionPath, ProjectiveOptions, SignConvention,
};
use proptest::prelude::*;

fn quick() -> SearchConfig {
    SearchConfig {
        starts: 3,
        iterations: 25,
        k_max: 2,
        ..SearchConfig::default()
    }
}

/// A random EdS photon with two points on it.
fn photon() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, f64)> {
    (
        0.5..3.0f64,
        0.0..std::f64::consts::TAU,
        -0.9..0.9f64,
        0.3..2.0f64,
    )
        .prop_map(|(t, phi, z, span)| {
            let r = (1.0 - z * z).sqrt();
            (
                vec![0.2, -0.1, 0.0, t],
                vec![r * phi.cos(), r * phi.sin(), z, 1.0],
                span,
            )
        })
}

fn eds() -> MetricModel<f64> {
    MetricModel::einstein_de_sitter(4).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 6, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn estimates_never_exceed_the_single_link_cost((x, v, span) in photon(), seed in 0..100u64) {
        let m = eds();
        let v = m.null_project(&x, &v).unwrap();
        let traj = shoot(&m, &ShootSpec::new(x.clone(), v).with_budget(50.0)).unwrap();
        let y = traj.position(span);
        let cost = segment_cost(&m, &traj, 0.0, span).unwrap();
        let est = estimate_distance(&m, &x, &y, &quick().with_seed(seed)).unwrap();
        prop_assert!(est.value <= cost + 1e-6, "{} > {cost}", est.value);
        prop_assert!(est.value > 0.0);
    }

    #[test]
    fn estimates_are_symmetric((x, v, span) in photon(), seed in 0..100u64) {
        let m = eds();
        let v = m.null_project(&x, &v).unwrap();
        let traj = shoot(&m, &ShootSpec::new(x.clone(), v).with_budget(50.0)).unwrap();
        let y = traj.position(span);
        let cfg = quick().with_seed(seed);
        let fwd = estimate_distance(&m, &x, &y, &cfg).unwrap();
        let back = estimate_distance(&m, &y, &x, &cfg).unwrap();
        prop_assert!((fwd.value - back.value).abs() <= 1e-6);
        let reversed = fwd.chain.reversed();
        let length = chain_length(&reversed, JOIN_TOLERANCE).unwrap();
        prop_assert!((length - fwd.value).abs() <= 1e-12);
    }

    #[test]
    fn more_starts_never_hurt(x in prop::collection::vec(-0.5..0.5f64, 3), t in 0.8..2.0f64, dy in prop::collection::vec(-0.4..0.4f64, 3), seed in 0..100u64) {
        let m = eds();
        let mut a = x.clone();
        a.push(t);
        let mut b: Vec<f64> = x.iter().zip(&dy).map(|(p, d)| p + d).collect();
        b.push(t + 0.6);
        let cfg = quick().with_seed(seed);
        let few = estimate_distance(&m, &a, &b, &cfg).unwrap();
        let many = estimate_distance(&m, &a, &b, &SearchConfig { starts: 2 * cfg.starts, ..cfg }).unwrap();
        prop_assert!(many.value <= few.value, "{} > {}", many.value, few.value);
    }

    #[test]
    fn spatial_motions_preserve_chain_length((x, v, span) in photon(), angle in -3.0..3.0f64, shift in prop::collection::vec(-5.0..5.0f64, 3), plane in 0..3usize) {
        let m = eds();
        let v = m.null_project(&x, &v).unwrap();
        let traj = shoot(&m, &ShootSpec::new(x.clone(), v).with_budget(50.0)).unwrap();
        let y = traj.position(span);
        let cfg = quick();
        let chain = single_link_estimate(&m, &x, &y, &cfg).unwrap().unwrap();
        let (i, j) = [(0, 1), (0, 2), (1, 2)][plane];
        let motion = EuclideanMotion::plane_rotation(3, i, j, angle, shift);
        let moved = transport_chain(&m, &chain, &motion, &cfg.link_settings(), JOIN_TOLERANCE).unwrap();
        let a = chain_length(&chain, JOIN_TOLERANCE).unwrap();
        let b = chain_length(&moved, JOIN_TOLERANCE).unwrap();
        prop_assert!((a - b).abs() <= 1e-8, "{a} vs {b}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 16, failure_persistence: None, ..ProptestConfig::default() })]

    /// `Omega = c t^alpha` keeps the rescaled model self-similar, so both ends of
    /// every photon are resolved the same way as in EdS itself.
    #[test]
    fn chain_length_is_conformally_invariant((x, v, span) in photon(), alpha in -0.45..0.6f64, c in 0.5..2.0f64) {
        let m = eds();
        let v = m.null_project(&x, &v).unwrap();
        let traj = shoot(&m, &ShootSpec::new(x.clone(), v).with_budget(50.0)).unwrap();
        let y = traj.position(span);
        let cfg = SearchConfig { convention: SignConvention::ConformallyInvariant, ..quick() };
        let chain = single_link_estimate(&m, &x, &y, &cfg).unwrap().unwrap();
        let rescaled = MetricModel::conformal(m, &format!("{c}*t^({alpha})")).unwrap();
        let settings = cfg.link_settings();
        let other = rebuild_chain(&rescaled, &x, &y, &chain.records(), &settings, JOIN_TOLERANCE).unwrap();
        let a = chain_length(&chain, JOIN_TOLERANCE).unwrap();
        let b = chain_length(&other, JOIN_TOLERANCE).unwrap();
        prop_assert!((a - b).abs() <= 1e-6, "{a} vs {b}");
    }

    #[test]
    fn einstein_shortcut_matches_the_general_path(x in prop::collection::vec(-3.0..3.0f64, 3), t in 0.2..5.0f64, v in prop::collection::vec(-1.0..1.0f64, 3), f1 in 0.0..1.0f64, f2 in 0.0..1.0f64) {
        prop_assume!(v.iter().map(|c| c * c).sum::<f64>() > 0.01);
        for m in [MetricModel::minkowski(4).unwrap(), MetricModel::minkowski_halfspace(4).unwrap()] {
            let mut start = x.clone();
            start.push(t);
            let mut dir = v.clone();
            dir.push(1.0);
            let dir = m.null_project(&start, &dir).unwrap();
            let traj = shoot(&m, &ShootSpec::new(start, dir).with_budget(20.0)).unwrap();
            let (lo, hi) = traj.s_range();
            let (s1, s2) = (lo + 0.02 * (hi - lo) + 0.96 * f1 * (hi - lo), lo + 0.02 * (hi - lo) + 0.96 * f2 * (hi - lo));
            let general = projective_parameter_with(&m, &traj, 0.0, &ProjectiveOptions::default()).unwrap();
            let shortcut = projective_parameter_with(&m, &traj, 0.0, &ProjectiveOptions::default().with_path(CompanionPath::EinsteinShortcut)).unwrap();
            for s in [s1, s2] {
                prop_assert!((general.value(s).unwrap() - s).abs() <= 1e-8 * (1.0 + s.abs()));
            }
            let a = segment_cost_on(&general, s1, s2).unwrap();
            let b = segment_cost_on(&shortcut, s1, s2).unwrap();
            prop_assert!((a - b).abs() <= 1e-8, "{}: {a} vs {b}", m.label());
        }
    }
}

#[test]
fn estimate_reached_by_shooting_toward_the_big_bang() {
    // In search order the link runs from the later point back toward t = 0,
    // and the first span guess overshoots the boundary.
    let m = eds();
    let x = vec![0.2, -0.1, 0.0, 0.5];
    let v = m
        .null_project(&x, &[-0.9882053013849215, 0.15313485009865205, 0.0, 1.0])
        .unwrap();
    let traj = shoot(&m, &ShootSpec::new(x.clone(), v).with_budget(50.0)).unwrap();
    let span = 1.5313891497634908;
    let y = traj.position(span);
    let cost = segment_cost(&m, &traj, 0.0, span).unwrap();
    let fwd = estimate_distance(&m, &x, &y, &quick()).unwrap();
    let back = estimate_distance(&m, &y, &x, &quick()).unwrap();
    assert!(
        fwd.value.is_finite() && fwd.value <= cost + 1e-6,
        "{} vs {cost}",
        fwd.value
    );
    assert_eq!(fwd.value, back.value);
}
