use super::*;

fn eds() -> MetricModel<f64> {
    MetricModel::einstein_de_sitter(4).unwrap()
}

/// Standard photon of the EdS model in its own parameter `u > 0`.
fn photon(u: f64) -> Vec<f64> {
    vec![0.0, 0.0, 3.0 * u.powf(0.2), u.powf(0.6)]
}

fn photon_shoot(budget: f64) -> GeodesicTrajectory<f64> {
    let spec =
        ShootSpec::new(vec![0.0, 0.0, 3.0, 1.0], vec![0.0, 0.0, 0.6, 0.6]).with_budget(budget);
    shoot(&eds(), &spec).unwrap()
}

#[test]
fn minkowski_lines_are_straight() {
    let m = MetricModel::<f64>::minkowski(4).unwrap();
    let spec = ShootSpec::new(vec![0.0; 4], vec![0.0, 0.0, 1.0, 1.0]).with_budget(100.0);
    let traj = shoot(&m, &spec).unwrap();
    assert_eq!(traj.minus_end().flag, EndFlag::BudgetReached);
    assert_eq!(traj.plus_end().flag, EndFlag::BudgetReached);
    assert_eq!(traj.s_range(), (-100.0, 100.0));
    for k in 0..=200 {
        let s = -100.0 + k as f64;
        let x = traj.position(s);
        assert!((x[2] - s).abs() < 1e-10 && (x[3] - s).abs() < 1e-10);
        assert!(x[0].abs() < 1e-12);
    }
    let dom = traj.maximal_affine_domain();
    assert!(dom.past_complete && dom.future_complete);
    assert!(geodesic_residual(&m, &traj, 64).unwrap() < 1e-12);
}

#[test]
fn standard_photon_matches_closed_form() {
    let traj = photon_shoot(10.0);
    let mut worst = 0.0f64;
    for k in 0..=480 {
        let u = 0.2 + 4.8 * k as f64 / 480.0;
        let x = traj.position(u - 1.0);
        for (a, b) in x.iter().zip(photon(u)) {
            worst = worst.max((a - b).abs());
        }
    }
    assert!(worst < 1e-6, "sup error {worst:e}");
    assert!(traj.null_drift() <= 1e-8);
    let end = traj.minus_end();
    assert_eq!(end.flag, EndFlag::DomainExit);
    assert!((end.s_limit + 1.0).abs() < 1e-6, "{}", end.s_limit);
    let dom = traj.maximal_affine_domain();
    assert!(!dom.past_complete && dom.future_complete);
}

#[test]
fn halfspace_exit_is_bracketed() {
    let m = MetricModel::<f64>::minkowski_halfspace(4).unwrap();
    let spec = ShootSpec::new(vec![0.0, 0.0, 1.0, 1.0], vec![0.0, 0.0, 1.0, 1.0]);
    let traj = shoot(&m, &spec).unwrap();
    let end = traj.minus_end();
    assert_eq!(end.flag, EndFlag::DomainExit);
    let (a, b) = end.exit_bracket.unwrap();
    assert!(b - a <= 1e-10);
    assert!((end.s_limit + 1.0).abs() < 1e-8, "{}", end.s_limit);
    assert_eq!(traj.plus_end().flag, EndFlag::BudgetReached);
}

#[test]
fn residual_of_closed_form_curves() {
    let m = eds();
    let exact = SampledCurve {
        curve: |u: f64| photon(u),
        h: 1e-4,
    };
    let r = curve_residual(&m, &exact, 0.2, 5.0, 200).unwrap();
    assert!(r < 1e-6, "{r:e}");
    let perturbed = SampledCurve {
        curve: |u: f64| {
            let mut x = photon(u);
            x[3] += 0.01;
            x
        },
        h: 1e-4,
    };
    let r = curve_residual(&m, &perturbed, 0.2, 5.0, 200).unwrap();
    assert!(r > 1e-3, "{r:e}");
    let traj = photon_shoot(4.0);
    let (lo, hi) = (-0.8, 4.0);
    assert!(curve_residual(&m, &traj, lo, hi, 200).unwrap() < 1e-6);
}

#[test]
fn ngc_on_photon_and_flat_line() {
    let m = eds();
    let traj = photon_shoot(10.0);
    let report = ngc_along(&m, &traj, 1e-10).unwrap();
    assert!(report.holds);
    assert!(report.witness.is_some());
    assert_eq!(report.samples, NGC_SAMPLES);
    // Ric(l', l') = (12/25) u^-2; oracle contracts the finite-difference Ricci tensor.
    for u in [0.3, 1.0, 2.5, 7.0] {
        let y = traj.state(u - 1.0);
        let fd = m.ricci_fd(&y[..4]).unwrap().form(&y[4..], &y[4..]);
        let want = 12.0 / 25.0 / (u * u);
        assert!((fd - want).abs() < 1e-5 * want, "u = {u}: {fd} vs {want}");
        assert!((m.ricci_along(&y[..4], &y[4..]).unwrap() - want).abs() < 1e-8 * want);
    }
    let flat = MetricModel::<f64>::minkowski(4).unwrap();
    let line = shoot(
        &flat,
        &ShootSpec::new(vec![0.0; 4], vec![0.6, 0.8, 0.0, 1.0]),
    )
    .unwrap();
    let report = ngc_along(&flat, &line, 1e-10).unwrap();
    assert!(!report.holds && report.witness.is_none());
}

#[test]
fn ngc_samples_cluster_toward_incomplete_end() {
    let traj = photon_shoot(10.0);
    let params = sample_parameters(&traj, NGC_SAMPLES);
    let (lo, _) = traj.s_range();
    let near = params.iter().filter(|&&s| s - lo < 1e-3).count();
    assert!(near > 50, "{near}");
}

#[test]
fn shoot_errors() {
    let m = eds();
    let spec = ShootSpec::new(vec![0.0, 0.0, 3.0, 1.0], vec![0.0, 0.0, 0.6, 0.3]);
    assert!(matches!(shoot(&m, &spec), Err(Error::NotNull { .. })));
    let spec = ShootSpec::new(vec![0.0, 0.0, 3.0, 0.0], vec![0.0, 0.0, 0.6, 0.6]);
    assert!(matches!(shoot(&m, &spec), Err(Error::OutOfDomain { .. })));
    let slab = MetricModel::<f64>::custom_diagonal(4, &["1", "1", "1", "-1"], &["t", "1e-12 - t"])
        .unwrap();
    let spec = ShootSpec::new(vec![0.0, 0.0, 0.0, 5e-13], vec![0.0, 0.0, 1.0, 1.0]);
    assert_eq!(shoot(&slab, &spec).unwrap_err(), Error::ImmediateExit);
}

#[test]
fn reversed_direction_traces_same_points() {
    let m = eds();
    let v = m
        .null_project(&[0.5, -0.2, 1.0, 2.0], &[0.3, 0.4, -0.2, 1.0])
        .unwrap();
    let back: Vec<f64> = v.iter().map(|c| -c).collect();
    let a = shoot(
        &m,
        &ShootSpec::new(vec![0.5, -0.2, 1.0, 2.0], v).with_budget(5.0),
    )
    .unwrap();
    let b = shoot(
        &m,
        &ShootSpec::new(vec![0.5, -0.2, 1.0, 2.0], back).with_budget(5.0),
    )
    .unwrap();
    for s in [-1.0, -0.3, 0.7, 3.0] {
        let pa = a.position(s);
        let pb = b.position(-s);
        assert!(crate::max_abs_diff(&pa, &pb) < 1e-8);
    }
    assert!((a.minus_end().s_limit + b.plus_end().s_limit).abs() < 1e-8);
}

#[test]
fn timelike_fixture_shows_drift() {
    let m = MetricModel::<f64>::minkowski(4).unwrap();
    let spec = ShootSpec::new(vec![0.0; 4], vec![0.0, 0.0, 0.5, 1.0])
        .with_budget(2.0)
        .unconstrained();
    let traj = shoot(&m, &spec).unwrap();
    assert!(traj.null_drift() > 0.5);
    assert_eq!(traj.reprojections(), 0);
}

#[test]
fn csv_export_has_header_and_full_precision() {
    let m = eds();
    let traj = photon_shoot(1.0);
    let (csv, cols) = trajectory_csv(&m, &traj, &[]);
    assert_eq!(
        cols,
        [
            "s",
            "x1",
            "x2",
            "x3",
            "t",
            "dx1",
            "dx2",
            "dx3",
            "dt",
            "null_residual"
        ]
    );
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), cols.join(","));
    let first: Vec<f64> = lines
        .next()
        .unwrap()
        .split(',')
        .map(|v| v.parse().unwrap())
        .collect();
    assert_eq!(first.len(), 10);
    assert_eq!(first[0], traj.nodes()[0].0);
    assert_eq!(csv.lines().count(), traj.nodes().len() + 1);
    let sidecar = TrajectorySidecar::new(&traj, None, cols);
    let json = serde_json::to_string(&sidecar).unwrap();
    let back: TrajectorySidecar = serde_json::from_str(&json).unwrap();
    assert_eq!(back, sidecar);
    assert_eq!(back.minus_end.flag, EndFlag::DomainExit);
}

#[test]
fn f32_shoot_runs() {
    let m = MetricModel::<f32>::einstein_de_sitter(4).unwrap();
    let spec = ShootSpec::new(vec![0.0, 0.0, 3.0, 1.0], vec![0.0, 0.0, 0.6, 0.6])
        .with_budget(3.0)
        .with_tolerances(1e-5, 1e-6);
    let mut spec = spec;
    spec.min_step = 1e-5;
    spec.null_tolerance = 1e-4;
    let traj = shoot(&m, &spec).unwrap();
    let x = traj.position(1.0);
    assert!((x[3] - 2f32.powf(0.6)).abs() < 1e-3);
}
