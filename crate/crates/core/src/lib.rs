//! Conformal geometry of null geodesics and a numerical Kobayashi-type
//! pseudodistance on Lorentzian metric models.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod expr;
pub mod geodesic;
pub mod kobayashi;
pub mod linalg;
pub mod manifold;
pub mod ode;
pub mod optimize;
pub mod projective;
pub mod sampling;
mod scalar;
pub mod workbench;

pub use error::{Error, Result};
pub use scalar::{max_abs_diff, norm, Real};

pub type MetricModelF64 = manifold::MetricModel<f64>;
pub type ShootSpecF64 = geodesic::ShootSpec<f64>;
pub type TrajectoryF64 = geodesic::GeodesicTrajectory<f64>;
pub type MoebiusF64 = projective::Moebius<f64>;
pub type ProjectivePointF64 = projective::ProjectivePoint<f64>;
pub type HomogeneousParameterF64 = projective::HomogeneousParameter<f64>;
pub type DevelopmentArcF64 = projective::DevelopmentArc<f64>;
pub type ChainLinkF64 = kobayashi::ChainLink<f64>;
pub type KobayashiChainF64 = kobayashi::KobayashiChain<f64>;
pub type DistanceEstimateF64 = kobayashi::DistanceEstimate<f64>;
pub type ZeroCertificateF64 = kobayashi::ZeroCertificate<f64>;
