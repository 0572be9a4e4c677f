use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use confkob::geodesic::{shoot, sidecar_path, write_trajectory_csv, ShootSpec, TrajectorySidecar};
use confkob::kobayashi::{
    estimate_distance, estimate_refine_triangle, EstimateStatus, SearchConfig,
};
use confkob::manifold::{check_ncc, MetricModel, SampleSpec};
use confkob::projective::{development_arc, projective_shoot, ArcKind, SignConvention};
use confkob::workbench::{build_model, ngc_survey, run_scenario, ModelSpec, ScenarioConfig};

#[derive(Parser)]
#[command(
    name = "confkob",
    version,
    about = "Null geodesics, projective parameters and conformal pseudodistance estimates"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Metric, Ricci tensor and scalar curvature at a point.
    Curvature {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        point: String,
    },
    /// Integrate a null geodesic and write it as CSV with a JSON sidecar.
    Shoot {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        start: String,
        #[arg(long, allow_hyphen_values = true)]
        dir: String,
        #[arg(long, default_value_t = 50.0)]
        budget: f64,
        #[arg(long, default_value_t = 1e-10)]
        rtol: f64,
        #[arg(long, default_value_t = 1e-12)]
        atol: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Projective parameter along a trajectory written by `shoot`.
    Projparam {
        #[arg(long)]
        traj: PathBuf,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        base: f64,
        #[arg(long, value_enum, default_value_t = Convention::AsPublished)]
        convention: Convention,
        /// CSV destination; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Upper bound for the pseudodistance between two points, or a matrix over a point list.
    Distance {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, allow_hyphen_values = true, required_unless_present = "points")]
        from: Option<String>,
        #[arg(long, allow_hyphen_values = true, required_unless_present = "points")]
        to: Option<String>,
        /// CSV of points, one per row; switches to batch mode.
        #[arg(long, conflicts_with_all = ["from", "to"])]
        points: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// JSON with any subset of the search configuration fields.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Null convergence and null generic conditions on random samples.
    Conditions {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[arg(long, default_value_t = 20)]
        geodesics: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
    /// Run a scripted scenario.
    Scenario {
        name: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Convention {
    AsPublished,
    ConformallyInvariant,
}

impl From<Convention> for SignConvention {
    fn from(c: Convention) -> Self {
        match c {
            Convention::AsPublished => SignConvention::AsPublished,
            Convention::ConformallyInvariant => SignConvention::ConformallyInvariant,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

/// `Ok(false)` means the command ran but a check failed.
fn run(command: Command) -> anyhow::Result<bool> {
    match command {
        Command::Curvature { model, point } => {
            let (_, m) = load_model(&model)?;
            let x = parse_point(&point, m.dimension())?;
            let sample = m.curvature_sample(&x)?;
            emit(&serde_json::to_value(sample)?, None)?;
            Ok(true)
        }
        Command::Shoot {
            model,
            start,
            dir,
            budget,
            rtol,
            atol,
            out,
        } => {
            let (spec, m) = load_model(&model)?;
            let x = parse_point(&start, m.dimension())?;
            let v = parse_point(&dir, m.dimension())?;
            let shoot_spec = ShootSpec::new(x, v)
                .with_budget(budget)
                .with_tolerances(rtol, atol);
            let traj = shoot(&m, &shoot_spec)?;
            let sidecar = write_trajectory_csv(&out, &m, &traj, Some(spec.to_json()), &[])
                .with_context(|| format!("writing {}", out.display()))?;
            emit(&serde_json::to_value(sidecar)?, None)?;
            Ok(true)
        }
        Command::Projparam {
            traj,
            base,
            convention,
            out,
        } => projparam(&traj, base, convention.into(), out.as_deref()),
        Command::Distance {
            model,
            from,
            to,
            points,
            seed,
            config,
            out,
        } => {
            let (spec, m) = load_model(&model)?;
            let mut cfg: SearchConfig = match &config {
                Some(path) => serde_json::from_str(&read(path)?)
                    .with_context(|| format!("parsing config {}", path.display()))?,
                None => SearchConfig::default(),
            };
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            let label = model_label(&spec, &m);
            match points {
                Some(path) => distance_matrix(
                    &m,
                    &label,
                    &read_points(&path, m.dimension())?,
                    &cfg,
                    out.as_deref(),
                ),
                None => {
                    let x = parse_point(from.as_deref().unwrap_or_default(), m.dimension())?;
                    let y = parse_point(to.as_deref().unwrap_or_default(), m.dimension())?;
                    let est = estimate_distance(&m, &x, &y, &cfg)?;
                    emit(&serde_json::to_value(est.report(&label))?, out.as_deref())?;
                    Ok(est.status != EstimateStatus::Failed)
                }
            }
        }
        Command::Conditions {
            model,
            samples,
            geodesics,
            seed,
            tol,
        } => {
            let (spec, m) = load_model(&model)?;
            let ncc = check_ncc(
                &m,
                &SampleSpec {
                    count: samples,
                    seed,
                    ..SampleSpec::default()
                },
                tol,
            )?;
            let ngc = ngc_survey(&m, geodesics, seed, tol)?;
            let passed = ncc.passed && ngc.passed;
            let report = json!({
                "model": model_label(&spec, &m),
                "ncc": ncc,
                "ngc": ngc,
                "passed": passed,
            });
            emit(&report, None)?;
            Ok(passed)
        }
        Command::Scenario {
            name,
            seed,
            config,
            out,
        } => {
            let mut cfg: ScenarioConfig = match &config {
                Some(path) => serde_json::from_str(&read(path)?)
                    .with_context(|| format!("parsing config {}", path.display()))?,
                None => ScenarioConfig::default(),
            };
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            let report = run_scenario(&name, &cfg)?;
            emit(&serde_json::to_value(&report)?, out.as_deref())?;
            Ok(report.passed)
        }
    }
}

fn read(path: &Path) -> anyhow::Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load_model(path: &Path) -> anyhow::Result<(ModelSpec, MetricModel<f64>)> {
    let spec = ModelSpec::from_json(&read(path)?)
        .with_context(|| format!("model file {}", path.display()))?;
    let model = build_model(&spec).with_context(|| format!("model file {}", path.display()))?;
    Ok((spec, model))
}

fn model_label(spec: &ModelSpec, model: &MetricModel<f64>) -> String {
    match spec.to_json()["model"].as_str() {
        Some(kind) if spec.conformal_factor.is_none() => kind.to_string(),
        _ => model.label().to_string(),
    }
}

fn parse_point(text: &str, dimension: usize) -> anyhow::Result<Vec<f64>> {
    let values = text
        .split(',')
        .map(|c| {
            c.trim()
                .parse::<f64>()
                .with_context(|| format!("bad number `{}` in `{text}`", c.trim()))
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    if values.len() != dimension {
        bail!(
            "expected {dimension} comma-separated values, got {} in `{text}`",
            values.len()
        );
    }
    Ok(values)
}

/// Rows that do not parse as numbers are treated as a header and skipped, but
/// only on the first line.
fn read_points(path: &Path, dimension: usize) -> anyhow::Result<Vec<Vec<f64>>> {
    let text = read(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        match parse_point(line, dimension) {
            Ok(p) => out.push(p),
            Err(_) if i == 0 => continue,
            Err(e) => return Err(e.context(format!("{} line {}", path.display(), i + 1))),
        }
    }
    if out.is_empty() {
        bail!("{} contains no points", path.display());
    }
    Ok(out)
}

fn emit(value: &Value, out: Option<&Path>) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match out {
        Some(path) => {
            fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
        }
        None => stdout(&(text + "\n")),
    }
}

/// A closed pipe downstream is not an error.
fn stdout(text: &str) -> anyhow::Result<()> {
    match std::io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn distance_matrix(
    model: &MetricModel<f64>,
    label: &str,
    points: &[Vec<f64>],
    cfg: &SearchConfig,
    out: Option<&Path>,
) -> anyhow::Result<bool> {
    let n = points.len();
    let mut table = Vec::with_capacity(n);
    for x in points {
        let row = points
            .iter()
            .map(|y| estimate_distance(model, x, y, cfg))
            .collect::<Result<Vec<_>, _>>()?;
        table.push(row);
    }
    let improved = estimate_refine_triangle(&mut table, cfg.join_tolerance)?;
    let mut csv = String::from("point");
    for j in 0..n {
        let _ = write!(csv, ",{j}");
    }
    csv.push('\n');
    for (i, row) in table.iter().enumerate() {
        csv.push_str(&i.to_string());
        for est in row {
            let _ = write!(csv, ",{:.16e}", est.value);
        }
        csv.push('\n');
    }
    match out {
        Some(path) => {
            fs::write(path, &csv).with_context(|| format!("writing {}", path.display()))?
        }
        None => stdout(&csv)?,
    }
    let failed = table
        .iter()
        .flatten()
        .filter(|e| e.status == EstimateStatus::Failed)
        .count();
    eprintln!(
        "{label}: {n} points, {improved} entries tightened by concatenation, {failed} failed"
    );
    Ok(failed == 0)
}

fn projparam(
    traj: &Path,
    base: f64,
    convention: SignConvention,
    out: Option<&Path>,
) -> anyhow::Result<bool> {
    let side_path = sidecar_path(traj);
    let sidecar: TrajectorySidecar = serde_json::from_str(&read(&side_path)?)
        .with_context(|| format!("parsing sidecar {}", side_path.display()))?;
    let Some(model_json) = &sidecar.model else {
        bail!(
            "sidecar {} carries no model description",
            side_path.display()
        );
    };
    let spec: ModelSpec = serde_json::from_value(model_json.clone())
        .with_context(|| format!("model in sidecar {}", side_path.display()))?;
    let model: MetricModel<f64> = build_model(&spec)?;
    let mut shoot_spec = ShootSpec::new(sidecar.start.clone(), sidecar.direction.clone())
        .with_budget(sidecar.affine_budget)
        .with_tolerances(sidecar.rtol, sidecar.atol);
    shoot_spec.min_step = sidecar.min_step;

    let param = projective_shoot(&model, &shoot_spec, convention)?;
    let (lo, hi) = param.range();
    if !(base >= lo && base <= hi) {
        bail!("base point {base} lies outside the integrated range [{lo}, {hi}]");
    }
    let param = param.with_base(base)?;
    let arc = development_arc(&param)?;

    let nodes: Vec<f64> = param.geodesic().nodes().iter().map(|(s, _)| *s).collect();
    let mut u1 = Vec::with_capacity(nodes.len());
    let mut u2 = Vec::with_capacity(nodes.len());
    let mut p = Vec::with_capacity(nodes.len());
    for &s in &nodes {
        let u = param.eval(s);
        u1.push(u[0]);
        u2.push(u[2]);
        p.push(if u[2] == 0.0 { f64::NAN } else { u[0] / u[2] });
    }
    let extra = vec![
        ("u1".to_string(), u1),
        ("u2".to_string(), u2),
        ("p".to_string(), p),
    ];
    let summary = json!({
        "base": base,
        "convention": convention,
        "arc": {
            "kind": arc.kind,
            "p_minus": arc.p_minus,
            "p_plus": arc.p_plus,
            "turning": arc.turning(),
            "poles": arc.pole_count,
            "caveat": arc.caveat,
        },
        "wronskian_drift": param.wronskian_drift(),
        "full_line": arc.kind == ArcKind::FullLine,
    });
    match out {
        Some(path) => {
            write_trajectory_csv(path, &model, param.geodesic(), Some(spec.to_json()), &extra)
                .with_context(|| format!("writing {}", path.display()))?;
            emit(&summary, None)?;
        }
        None => {
            let (csv, _) = confkob::geodesic::trajectory_csv(&model, param.geodesic(), &extra);
            stdout(&csv)?;
            eprintln!("{}", serde_json::to_string(&summary)?);
        }
    }
    Ok(true)
}
