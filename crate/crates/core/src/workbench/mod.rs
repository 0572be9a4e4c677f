//! Model catalog, the Einstein–de Sitter to half-space correspondence, and
//! scripted scenarios.

mod scenario;

pub use scenario::{
    ngc_survey, run_scenario, CheckResult, NgcSurvey, ScenarioConfig, ScenarioReport, SCENARIOS,
};

use serde::{Deserialize, Serialize};

use crate::error::{point_f64, Error, Result};
use crate::kobayashi::LinkRecord;
use crate::manifold::MetricModel;
use crate::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Eds,
    Minkowski,
    MinkowskiHalfspace,
    FrwPower,
    Custom,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Scale factor exponent of `frw_power`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
}

/// JSON description of a metric model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub model: ModelKind,
    #[serde(default = "default_dimension")]
    pub dimension: usize,
    #[serde(default)]
    pub params: ModelParams,
    /// Diagonal metric coefficients for `custom`, in the order `x1, ..., t`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coefficients: Option<Vec<String>>,
    /// Expressions that must all be positive on the domain (`custom` only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<Vec<String>>,
    /// Optional factor `Omega`; the model becomes `Omega^2 g`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conformal_factor: Option<String>,
}

fn default_dimension() -> usize {
    4
}

impl ModelSpec {
    pub fn new(model: ModelKind, dimension: usize) -> Self {
        Self {
            model,
            dimension,
            params: ModelParams::default(),
            coefficients: None,
            domain: None,
            conformal_factor: None,
        }
    }

    pub fn eds() -> Self {
        Self::new(ModelKind::Eds, 4)
    }

    pub fn frw_power(dimension: usize, a: f64) -> Self {
        let mut s = Self::new(ModelKind::FrwPower, dimension);
        s.params.a = Some(a);
        s
    }

    pub fn custom<S: Into<String>>(coefficients: Vec<S>, domain: Vec<S>) -> Self {
        let mut s = Self::new(ModelKind::Custom, coefficients.len());
        s.coefficients = Some(coefficients.into_iter().map(Into::into).collect());
        s.domain = Some(domain.into_iter().map(Into::into).collect());
        s
    }

    /// The pulled-back flat metric `t^(-4/3)` times Einstein–de Sitter.
    pub fn eds_pullback() -> Self {
        let mut s = Self::eds();
        s.conformal_factor = Some("t^(-2/3)".into());
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidSpec(e.to_string()))
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("model spec serializes")
    }
}

pub fn build_model<T: Real>(spec: &ModelSpec) -> Result<MetricModel<T>> {
    let n = spec.dimension;
    let base = match spec.model {
        ModelKind::Eds => MetricModel::einstein_de_sitter(n)?,
        ModelKind::Minkowski => MetricModel::minkowski(n)?,
        ModelKind::MinkowskiHalfspace => MetricModel::minkowski_halfspace(n)?,
        ModelKind::FrwPower => {
            let a = spec
                .params
                .a
                .ok_or_else(|| Error::InvalidSpec("frw_power needs params.a".into()))?;
            MetricModel::frw_power(n, T::lit(a))?
        }
        ModelKind::Custom => {
            let coefficients = spec
                .coefficients
                .as_ref()
                .ok_or_else(|| Error::InvalidSpec("custom needs coefficients".into()))?;
            let domain = spec.domain.clone().unwrap_or_default();
            MetricModel::custom_diagonal(n, coefficients, &domain)?
        }
    };
    match &spec.conformal_factor {
        Some(factor) => {
            let label = format!("{}*({})^2", base.label(), factor);
            Ok(MetricModel::conformal(base, factor)?.with_label(label))
        }
        None => Ok(base),
    }
}

/// `phi(x, t) = (x, 3 t^(1/3))`, or its inverse `(x, (T/3)^3)`.
pub fn eds_conformal_map<T: Real>(x: &[T], inverse: bool) -> Result<Vec<T>> {
    let m = x.len() - 1;
    if !(x[m] > T::zero()) {
        return Err(Error::OutOfDomain {
            point: point_f64(x),
        });
    }
    let three = T::lit(3.0);
    let mut out = x.to_vec();
    out[m] = if inverse {
        (x[m] / three).powi(3)
    } else {
        three * x[m].cbrt()
    };
    Ok(out)
}

/// Push-forward of a tangent vector at `x` under `phi`.
pub fn eds_conformal_pushforward<T: Real>(x: &[T], v: &[T]) -> Result<Vec<T>> {
    let m = x.len() - 1;
    if !(x[m] > T::zero()) {
        return Err(Error::OutOfDomain {
            point: point_f64(x),
        });
    }
    let mut out = v.to_vec();
    out[m] = v[m] * x[m].powf(T::lit(-2.0 / 3.0));
    Ok(out)
}

/// Carries link records from Einstein–de Sitter coordinates to half-space
/// coordinates. Spans are kept as first guesses; the end points decide where
/// a rebuilt link stops.
pub fn eds_records_to_halfspace(records: &[LinkRecord]) -> Result<Vec<LinkRecord>> {
    records
        .iter()
        .map(|r| {
            Ok(LinkRecord {
                start: eds_conformal_map(&r.start, false)?,
                direction: eds_conformal_pushforward(&r.start, &r.direction)?,
                end: eds_conformal_map(&r.end, false)?,
                ..r.clone()
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PullbackReport {
    pub samples: usize,
    /// Largest entrywise gap between `phi^* eta` and `t^(-4/3) g`.
    pub max_deviation: f64,
    pub worst_point: Option<Vec<f64>>,
    pub tolerance: f64,
    pub passed: bool,
}

pub const PULLBACK_TOLERANCE: f64 = 1e-9;

/// Compares the pulled-back flat metric with the rescaled Einstein–de Sitter
/// metric entrywise at every sample.
pub fn pullback_check<T: Real>(samples: &[Vec<T>]) -> Result<PullbackReport> {
    let n = samples.first().map_or(4, Vec::len);
    let eds = MetricModel::<T>::einstein_de_sitter(n)?;
    let mut worst = (0.0f64, None);
    for x in samples {
        let t = x[n - 1];
        if !(t > T::zero()) {
            return Err(Error::OutOfDomain {
                point: point_f64(x),
            });
        }
        let g = eds.metric_at(x)?;
        let scale = t.powf(T::lit(-4.0 / 3.0));
        // Jacobian of phi is diag(1, ..., 1, t^(-2/3)); eta pulls back diagonally.
        let jt = t.powf(T::lit(-2.0 / 3.0));
        for i in 0..n {
            for j in 0..n {
                let pulled = if i != j {
                    T::zero()
                } else if i == n - 1 {
                    -jt * jt
                } else {
                    T::one()
                };
                let dev = (pulled - scale * g[(i, j)]).abs().to_f64_lossy();
                if dev > worst.0 || worst.1.is_none() {
                    worst = (dev.max(worst.0), Some(point_f64(x)));
                }
            }
        }
    }
    Ok(PullbackReport {
        samples: samples.len(),
        max_deviation: worst.0,
        worst_point: worst.1,
        tolerance: PULLBACK_TOLERANCE,
        passed: worst.0 <= PULLBACK_TOLERANCE,
    })
}

#[cfg(test)]
mod tests;
