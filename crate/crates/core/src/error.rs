use thiserror::Error;

use crate::expr::ParseError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("point {point:?} lies outside the model domain")]
    OutOfDomain { point: Vec<f64> },

    #[error("metric at {point:?} has {negative} negative and {zero} null eigenvalues; expected exactly one negative")]
    Signature {
        point: Vec<f64>,
        negative: usize,
        zero: usize,
    },

    #[error("metric at {point:?} is degenerate (condition number {condition:e})")]
    DegenerateMetric { point: Vec<f64>, condition: f64 },

    #[error("spatial part of the tangent vector vanishes; no null rescaling exists")]
    ZeroSpatialPart,

    #[error("vector is not null: g(X,X) = {norm:e}")]
    NotNull { norm: f64 },

    #[error("sample specification produced no in-domain samples")]
    EmptySample,

    #[error("expected {expected} components, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("dimension {0} is not supported (need n >= 3)")]
    UnsupportedDimension(usize),

    #[error("start point is on the domain boundary; no integration step possible")]
    ImmediateExit,

    #[error("argument {0} is outside the open interval (-1, 1)")]
    OutOfInterval(f64),

    #[error("linear fractional map has vanishing determinant")]
    SingularTransform,

    #[error("derivative {0:e} too small for a Schwarzian derivative")]
    CriticalPoint(f64),

    #[error("projective point does not lie on the development arc")]
    PointOffArc,

    #[error("invalid chain: {0}")]
    InvalidChain(String),

    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),

    #[error("invalid model specification: {0}")]
    InvalidSpec(String),

    #[error(transparent)]
    Parse(#[from] ParseError),
}

pub(crate) fn point_f64<T: crate::Real>(x: &[T]) -> Vec<f64> {
    x.iter().map(|v| v.to_f64_lossy()).collect()
}
