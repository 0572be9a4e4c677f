//! Chart-based Lorentzian metric models and pointwise geometry.
//!
//! Coordinates are `(x1, ..., x{n-1}, t)` with signature `(+, ..., +, -)`;
//! the last coordinate is the timelike one.

mod conditions;
mod curvature;

pub use conditions::{check_ncc, ConditionReport, NccWitness, SampleSpec, NULL_TOLERANCE};
pub use curvature::{Connection, CurvatureSample};

use crate::error::{point_f64, Error, Result};
use crate::expr::{Expr, ExprJet};
use crate::linalg::{Matrix, SymmetricEigen};
use crate::Real;

/// Relative eigenvalue threshold below which a metric eigenvalue counts as null.
const NULL_EIGENVALUE: f64 = 1e-14;
/// Condition number above which the metric is treated as degenerate.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, PartialEq)]
pub enum Geometry<T> {
    /// Flat metric on all of R^n.
    Minkowski,
    /// Flat metric restricted to `t > 0`.
    MinkowskiHalfSpace,
    /// `t^(2a) sum dx_i^2 - dt^2` on `t > 0`.
    FrwPower { exponent: T },
    /// Diagonal metric with expression coefficients and explicit positivity domain.
    Diagonal {
        coefficients: Vec<ExprJet>,
        domain: Vec<Expr>,
    },
    /// `factor^2` times the base metric.
    Conformal {
        base: Box<MetricModel<T>>,
        factor: ExprJet,
    },
}

/// An analytic Lorentzian metric on a coordinate chart.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricModel<T> {
    dimension: usize,
    geometry: Geometry<T>,
    label: String,
}

impl<T: Real> MetricModel<T> {
    fn checked(dimension: usize, geometry: Geometry<T>, label: &str) -> Result<Self> {
        if dimension < 3 {
            return Err(Error::UnsupportedDimension(dimension));
        }
        Ok(Self {
            dimension,
            geometry,
            label: label.to_string(),
        })
    }

    pub fn minkowski(dimension: usize) -> Result<Self> {
        Self::checked(dimension, Geometry::Minkowski, "minkowski")
    }

    pub fn minkowski_halfspace(dimension: usize) -> Result<Self> {
        Self::checked(
            dimension,
            Geometry::MinkowskiHalfSpace,
            "minkowski_halfspace",
        )
    }

    pub fn frw_power(dimension: usize, exponent: T) -> Result<Self> {
        Self::checked(dimension, Geometry::FrwPower { exponent }, "frw_power")
    }

    /// Einstein–de Sitter: `t^(4/3) sum dx_i^2 - dt^2` on `t > 0`.
    pub fn einstein_de_sitter(dimension: usize) -> Result<Self> {
        let mut m = Self::frw_power(dimension, T::lit(2.0) / T::lit(3.0))?;
        m.label = "eds".into();
        Ok(m)
    }

    /// Diagonal metric `diag(c_1, ..., c_n)`. The domain is the set where every
    /// `domain` expression is strictly positive (all of R^n when empty).
    pub fn custom_diagonal<S: AsRef<str>>(
        dimension: usize,
        coefficients: &[S],
        domain: &[S],
    ) -> Result<Self> {
        if coefficients.len() != dimension {
            return Err(Error::DimensionMismatch {
                expected: dimension,
                got: coefficients.len(),
            });
        }
        let coefficients = coefficients
            .iter()
            .map(|c| Expr::parse(c.as_ref(), dimension).map(|e| ExprJet::new(e, dimension)))
            .collect::<Result<Vec<_>, _>>()?;
        let domain = domain
            .iter()
            .map(|c| Expr::parse(c.as_ref(), dimension))
            .collect::<Result<Vec<_>, _>>()?;
        Self::checked(
            dimension,
            Geometry::Diagonal {
                coefficients,
                domain,
            },
            "custom",
        )
    }

    /// Conformal rescaling `Omega^2 g` with `Omega` given by an expression.
    pub fn conformal(base: MetricModel<T>, factor: &str) -> Result<Self> {
        let factor = ExprJet::new(Expr::parse(factor, base.dimension)?, base.dimension);
        let label = format!("conformal({})", base.label);
        let dimension = base.dimension;
        Self::checked(
            dimension,
            Geometry::Conformal {
                base: Box::new(base),
                factor,
            },
            &label,
        )
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn geometry(&self) -> &Geometry<T> {
        &self.geometry
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Whether exact Christoffel and Ricci evaluators exist for this model.
    pub fn has_analytic_curvature(&self) -> bool {
        matches!(
            self.geometry,
            Geometry::Minkowski | Geometry::MinkowskiHalfSpace | Geometry::FrwPower { .. }
        )
    }

    pub fn in_domain(&self, x: &[T]) -> bool {
        if x.len() != self.dimension || x.iter().any(|v| !v.is_finite()) {
            return false;
        }
        let t = x[self.dimension - 1];
        match &self.geometry {
            Geometry::Minkowski => true,
            Geometry::MinkowskiHalfSpace | Geometry::FrwPower { .. } => t > T::zero(),
            Geometry::Diagonal { domain, .. } => domain.iter().all(|e| e.eval(x) > T::zero()),
            Geometry::Conformal { base, factor } => {
                base.in_domain(x) && {
                    let omega = factor.eval(x);
                    omega.is_finite() && omega > T::zero()
                }
            }
        }
    }

    pub(crate) fn check_point(&self, x: &[T]) -> Result<()> {
        if x.len() != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                got: x.len(),
            });
        }
        if !self.in_domain(x) {
            return Err(Error::OutOfDomain {
                point: point_f64(x),
            });
        }
        Ok(())
    }

    /// Metric components without domain or signature checks.
    pub fn metric_raw(&self, x: &[T]) -> Matrix<T> {
        let n = self.dimension;
        match &self.geometry {
            Geometry::Minkowski | Geometry::MinkowskiHalfSpace => {
                let mut d = vec![T::one(); n];
                d[n - 1] = -T::one();
                Matrix::diagonal(&d)
            }
            Geometry::FrwPower { exponent } => {
                let scale = x[n - 1].powf(T::lit(2.0) * *exponent);
                let mut d = vec![scale; n];
                d[n - 1] = -T::one();
                Matrix::diagonal(&d)
            }
            Geometry::Diagonal { coefficients, .. } => {
                let d: Vec<T> = coefficients.iter().map(|c| c.eval(x)).collect();
                Matrix::diagonal(&d)
            }
            Geometry::Conformal { base, factor } => {
                let omega = factor.eval(x);
                base.metric_raw(x).scale(omega * omega)
            }
        }
    }

    /// Metric components `g_ab` at an in-domain point, signature-checked.
    pub fn metric_at(&self, x: &[T]) -> Result<Matrix<T>> {
        self.check_point(x)?;
        let g = self.metric_raw(x);
        self.check_signature(x, &g)?;
        Ok(g)
    }

    fn check_signature(&self, x: &[T], g: &Matrix<T>) -> Result<SymmetricEigen<T>> {
        let eig = SymmetricEigen::new(g);
        let scale = eig.values.iter().fold(T::zero(), |m, v| m.max(v.abs()));
        let null_cut = scale * T::lit(NULL_EIGENVALUE);
        let zero = eig.values.iter().filter(|v| v.abs() <= null_cut).count();
        let negative = eig.values.iter().filter(|&&v| v < -null_cut).count();
        if zero > 0 || negative != 1 || eig.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Signature {
                point: point_f64(x),
                negative,
                zero,
            });
        }
        Ok(eig)
    }

    /// Inverse metric `g^ab`, guarded against near-degenerate metrics.
    pub fn inverse_metric_at(&self, x: &[T]) -> Result<Matrix<T>> {
        self.check_point(x)?;
        let g = self.metric_raw(x);
        self.inverse_of(x, &g)
    }

    pub(crate) fn inverse_of(&self, x: &[T], g: &Matrix<T>) -> Result<Matrix<T>> {
        if let Some(d) = diagonal_entries(g) {
            // Diagonal metrics: exact inverse, same guards.
            let (lo, hi) = d.iter().fold((T::infinity(), T::zero()), |(lo, hi), v| {
                (lo.min(v.abs()), hi.max(v.abs()))
            });
            let negative = d.iter().filter(|v| **v < T::zero()).count();
            if lo == T::zero() || negative != 1 || d.iter().any(|v| !v.is_finite()) {
                return Err(Error::Signature {
                    point: point_f64(x),
                    negative,
                    zero: d.iter().filter(|v| **v == T::zero()).count(),
                });
            }
            let condition = hi / lo;
            if condition > T::lit(MAX_CONDITION) {
                return Err(Error::DegenerateMetric {
                    point: point_f64(x),
                    condition: condition.to_f64_lossy(),
                });
            }
            let inv: Vec<T> = d.iter().map(|v| T::one() / *v).collect();
            return Ok(Matrix::diagonal(&inv));
        }
        let eig = self.check_signature(x, g)?;
        let condition = eig.condition_number();
        if condition > T::lit(MAX_CONDITION) {
            return Err(Error::DegenerateMetric {
                point: point_f64(x),
                condition: condition.to_f64_lossy(),
            });
        }
        Ok(eig.inverse())
    }

    /// `g(u, v)` at `x` without checks.
    pub fn inner(&self, x: &[T], u: &[T], v: &[T]) -> T {
        self.metric_raw(x).form(u, v)
    }

    /// Finite-difference step for coordinate `i` at `x`.
    pub(crate) fn fd_step(&self, x: &[T], i: usize) -> T {
        let base = T::lit(T::FD_STEP);
        base.max(base * x[i].abs())
    }
}

fn diagonal_entries<T: Real>(g: &Matrix<T>) -> Option<Vec<T>> {
    let n = g.dim();
    for i in 0..n {
        for j in 0..n {
            if i != j && g[(i, j)] != T::zero() {
                return None;
            }
        }
    }
    Some((0..n).map(|i| g[(i, i)]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_metrics() {
        let mink = MetricModel::<f64>::minkowski(4).unwrap();
        let g = mink.metric_at(&[3.0, -1.0, 2.0, -7.0]).unwrap();
        assert_eq!(g, Matrix::diagonal(&[1.0, 1.0, 1.0, -1.0]));

        let eds = MetricModel::<f64>::einstein_de_sitter(4).unwrap();
        let g = eds.metric_at(&[0.0, 0.0, 0.0, 1.0]).unwrap();
        assert_eq!(g, Matrix::diagonal(&[1.0, 1.0, 1.0, -1.0]));

        // 8^(4/3) = (8^(1/3))^4 = 16, evaluated independently of powf.
        let sixteen = 8f64.cbrt().powi(4);
        let g = eds.metric_at(&[0.0, 0.0, 0.0, 8.0]).unwrap();
        for i in 0..3 {
            assert!((g[(i, i)] - sixteen).abs() < 1e-12);
        }
        assert_eq!(g[(3, 3)], -1.0);
    }

    #[test]
    fn domain_and_signature_errors() {
        let eds = MetricModel::<f64>::einstein_de_sitter(4).unwrap();
        assert!(matches!(
            eds.metric_at(&[0.0, 0.0, 0.0, -1.0]),
            Err(Error::OutOfDomain { .. })
        ));
        assert!(matches!(
            eds.metric_at(&[0.0, 0.0, 1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
        let riemannian =
            MetricModel::<f64>::custom_diagonal(4, &["1", "1", "1", "1"], &[]).unwrap();
        assert!(matches!(
            riemannian.metric_at(&[0.0; 4]),
            Err(Error::Signature { negative: 0, .. })
        ));
        let degenerate =
            MetricModel::<f64>::custom_diagonal(4, &["1e-13", "1", "1", "-1"], &[]).unwrap();
        assert!(matches!(
            degenerate.inverse_metric_at(&[0.0; 4]),
            Err(Error::DegenerateMetric { .. })
        ));
        assert!(matches!(
            MetricModel::<f64>::minkowski(2),
            Err(Error::UnsupportedDimension(2))
        ));
    }

    #[test]
    fn non_diagonal_inverse() {
        // A boosted-frame metric written in skewed coordinates.
        let rows = vec![
            vec![1.0, 0.0, 0.0, 0.3],
            vec![0.0, 1.0, 0.0, 0.0],
            vec![0.0, 0.0, 1.0, 0.0],
            vec![0.3, 0.0, 0.0, -1.0],
        ];
        let g = Matrix::from_rows(&rows);
        let m = MetricModel::<f64>::minkowski(4).unwrap();
        let inv = m.inverse_of(&[0.0; 4], &g).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let s: f64 = (0..4).map(|k| g[(i, k)] * inv[(k, j)]).sum();
                assert!((s - if i == j { 1.0 } else { 0.0 }).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn conformal_wrapper_scales_entrywise() {
        let eds = MetricModel::<f64>::einstein_de_sitter(4).unwrap();
        let wrapped = MetricModel::conformal(eds.clone(), "t^(-2/3)").unwrap();
        for &t in &[0.3f64, 1.0, 2.5, 9.0] {
            let x = [0.1, -0.4, 2.0, t];
            let omega = t.powf(-2.0 / 3.0);
            let want = eds.metric_at(&x).unwrap().scale(omega * omega);
            let got = wrapped.metric_at(&x).unwrap();
            assert!(got.max_abs_diff(&want) <= 4.0 * f64::EPSILON * want.max_abs());
        }
        assert!(!wrapped.in_domain(&[0.0, 0.0, 0.0, -1.0]));
    }

    #[test]
    fn f32_models_evaluate() {
        let eds = MetricModel::<f32>::einstein_de_sitter(4).unwrap();
        let g = eds.metric_at(&[0.0, 0.0, 0.0, 8.0]).unwrap();
        assert!((g[(0, 0)] - 16.0).abs() < 1e-4);
    }
}
