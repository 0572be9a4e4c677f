use std::fmt::Write as _;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{null_drift_of, EndFlag, GeodesicTrajectory, TrajectoryEnd};
use crate::manifold::MetricModel;
use crate::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndRecord {
    pub flag: EndFlag,
    pub s_last: f64,
    pub s_limit: f64,
    pub exit_bracket: Option<(f64, f64)>,
    pub steps: usize,
}

impl<T: Real> From<&TrajectoryEnd<T>> for EndRecord {
    fn from(end: &TrajectoryEnd<T>) -> Self {
        Self {
            flag: end.flag,
            s_last: end.s_last.to_f64_lossy(),
            s_limit: end.s_limit.to_f64_lossy(),
            exit_bracket: end
                .exit_bracket
                .map(|(a, b)| (a.to_f64_lossy(), b.to_f64_lossy())),
            steps: end.steps,
        }
    }
}

/// Metadata written next to a trajectory CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySidecar {
    pub model_label: String,
    /// Model description supplied by the caller, enough to re-shoot.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<serde_json::Value>,
    pub start: Vec<f64>,
    pub direction: Vec<f64>,
    pub affine_budget: f64,
    pub rtol: f64,
    pub atol: f64,
    pub min_step: f64,
    pub minus_end: EndRecord,
    pub plus_end: EndRecord,
    pub null_drift: f64,
    pub reprojections: usize,
    /// Completeness is only ever asserted up to the affine budget.
    pub completeness_note: String,
    pub columns: Vec<String>,
}

impl TrajectorySidecar {
    pub fn new<T: Real>(
        trajectory: &GeodesicTrajectory<T>,
        model: Option<serde_json::Value>,
        columns: Vec<String>,
    ) -> Self {
        let spec = trajectory.spec();
        let f = |v: &[T]| v.iter().map(|c| c.to_f64_lossy()).collect::<Vec<_>>();
        Self {
            model_label: trajectory.model_label().to_string(),
            model,
            start: f(&spec.start),
            direction: f(&spec.direction),
            affine_budget: spec.affine_budget.to_f64_lossy(),
            rtol: spec.rtol.to_f64_lossy(),
            atol: spec.atol.to_f64_lossy(),
            min_step: spec.min_step.to_f64_lossy(),
            minus_end: trajectory.minus_end().into(),
            plus_end: trajectory.plus_end().into(),
            null_drift: trajectory.null_drift().to_f64_lossy(),
            reprojections: trajectory.reprojections(),
            completeness_note: format!(
                "BudgetReached means complete up to |s| = {}",
                spec.affine_budget.to_f64_lossy()
            ),
            columns,
        }
    }
}

pub(crate) fn column_names(n: usize) -> Vec<String> {
    let mut cols = vec!["s".to_string()];
    cols.extend((1..n).map(|i| format!("x{i}")));
    cols.push("t".into());
    cols.extend((1..n).map(|i| format!("dx{i}")));
    cols.push("dt".into());
    cols.push("null_residual".into());
    cols
}

/// CSV rows at every accepted node. `extra` columns must have one value per node.
pub fn trajectory_csv<T: Real>(
    model: &MetricModel<T>,
    trajectory: &GeodesicTrajectory<T>,
    extra: &[(String, Vec<f64>)],
) -> (String, Vec<String>) {
    let n = trajectory.dimension();
    let mut cols = column_names(n);
    cols.extend(extra.iter().map(|(name, _)| name.clone()));
    let mut out = cols.join(",");
    out.push('\n');
    for (k, (s, y)) in trajectory.nodes().iter().enumerate() {
        let x = &y[..n];
        let v = &y[n..2 * n];
        let mut row: Vec<f64> = vec![s.to_f64_lossy()];
        row.extend(y[..2 * n].iter().map(|c| c.to_f64_lossy()));
        row.push(null_drift_of(model, x, v).to_f64_lossy());
        row.extend(extra.iter().map(|(_, vals)| vals[k]));
        let mut line = String::new();
        for (i, value) in row.iter().enumerate() {
            if i > 0 {
                line.push(',');
            }
            let _ = write!(line, "{value:.16e}");
        }
        out.push_str(&line);
        out.push('\n');
    }
    (out, cols)
}

/// Writes `path` and `path.json` (the sidecar).
pub fn write_trajectory_csv<T: Real>(
    path: &Path,
    model: &MetricModel<T>,
    trajectory: &GeodesicTrajectory<T>,
    model_json: Option<serde_json::Value>,
    extra: &[(String, Vec<f64>)],
) -> io::Result<TrajectorySidecar> {
    let (csv, cols) = trajectory_csv(model, trajectory, extra);
    std::fs::write(path, csv)?;
    let sidecar = TrajectorySidecar::new(trajectory, model_json, cols);
    let json = serde_json::to_string_pretty(&sidecar).map_err(io::Error::other)?;
    std::fs::write(sidecar_path(path), json)?;
    Ok(sidecar)
}

pub fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut os = path.as_os_str().to_owned();
    os.push(".json");
    os.into()
}
