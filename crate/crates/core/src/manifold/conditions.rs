//! Null vectors and the pointwise energy condition.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::MetricModel;
use crate::error::{point_f64, Error, Result};
use crate::sampling;
use crate::Real;

/// Relative tolerance for accepting a vector as null.
pub const NULL_TOLERANCE: f64 = 1e-8;

impl<T: Real> MetricModel<T> {
    /// Scale against which `g(v, v)` is judged: `sum |g_ab v^a v^b|`.
    pub fn null_scale(&self, x: &[T], v: &[T]) -> T {
        let g = self.metric_raw(x);
        let n = self.dimension;
        let mut acc = T::zero();
        for a in 0..n {
            for b in 0..n {
                acc = acc + (g[(a, b)] * v[a] * v[b]).abs();
            }
        }
        acc
    }

    pub fn is_null(&self, x: &[T], v: &[T], tolerance: T) -> bool {
        let g = self.inner(x, v, v);
        g.abs() <= tolerance * self.null_scale(x, v).max(T::min_positive_value())
    }

    /// Rescales the time component of `v` so that `g(v, v) = 0`, keeping the
    /// spatial components and the sign of the time component (future when zero).
    pub fn null_project(&self, x: &[T], v: &[T]) -> Result<Vec<T>> {
        self.check_point(x)?;
        if v.len() != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                got: v.len(),
            });
        }
        self.null_project_unchecked(x, v)
    }

    pub(crate) fn null_project_unchecked(&self, x: &[T], v: &[T]) -> Result<Vec<T>> {
        let n = self.dimension;
        let tt = n - 1;
        if v[..tt].iter().all(|c| *c == T::zero()) {
            return Err(Error::ZeroSpatialPart);
        }
        let g = self.metric_raw(x);
        let a = g[(tt, tt)];
        let b: T = (0..tt).map(|i| g[(tt, i)] * v[i]).sum();
        let mut c = T::zero();
        for i in 0..tt {
            for j in 0..tt {
                c = c + g[(i, j)] * v[i] * v[j];
            }
        }
        if a >= T::zero() || c <= T::zero() {
            return Err(Error::Signature {
                point: point_f64(x),
                negative: usize::from(a < T::zero()),
                zero: 0,
            });
        }
        // a tau^2 + 2 b tau + c = 0 with a < 0 < c: one root of each sign.
        let disc = (b * b - a * c).sqrt();
        let future = (-b - disc) / a;
        let past = (-b + disc) / a;
        let tau = if v[tt] < T::zero() { past } else { future };
        let mut out = v.to_vec();
        out[tt] = tau;
        Ok(out)
    }

    /// `Ric(X, X)` for a null vector `X` at `x`.
    pub fn ncc_at(&self, x: &[T], null_vector: &[T]) -> Result<T> {
        self.check_point(x)?;
        if !self.is_null(x, null_vector, T::lit(NULL_TOLERANCE)) {
            return Err(Error::NotNull {
                norm: self.inner(x, null_vector, null_vector).to_f64_lossy(),
            });
        }
        self.ricci_along(x, null_vector)
    }
}

/// Where and how many points/directions to sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSpec {
    pub count: usize,
    pub seed: u64,
    /// Spatial coordinates are drawn uniformly from `[-extent, extent]`.
    pub spatial_extent: f64,
    /// Range for the time coordinate.
    pub time_range: (f64, f64),
    /// Log-uniform time sampling (requires a positive range).
    pub log_time: bool,
}

impl Default for SampleSpec {
    fn default() -> Self {
        Self {
            count: 1000,
            seed: 0,
            spatial_extent: 10.0,
            time_range: (0.1, 10.0),
            log_time: true,
        }
    }
}

impl SampleSpec {
    pub fn draw_point<T: Real, R: Rng>(&self, rng: &mut R, dimension: usize) -> Vec<T> {
        let mut x: Vec<T> = (0..dimension - 1)
            .map(|_| T::lit(rng.gen_range(-self.spatial_extent..=self.spatial_extent)))
            .collect();
        let (lo, hi) = self.time_range;
        let t = if self.log_time && lo > 0.0 {
            sampling::log_uniform(rng, lo, hi)
        } else {
            rng.gen_range(lo..=hi)
        };
        x.push(T::lit(t));
        x
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NccWitness {
    pub point: Vec<f64>,
    pub direction: Vec<f64>,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionReport {
    pub condition: String,
    pub samples: usize,
    pub min_value: f64,
    pub max_value: f64,
    pub tolerance: f64,
    pub witness: Option<NccWitness>,
    pub passed: bool,
}

/// Samples `Ric(X, X)` over random points and future-directed null directions.
/// Fails (with a witness) if any sample is below `-tolerance`.
pub fn check_ncc<T: Real>(
    model: &MetricModel<T>,
    spec: &SampleSpec,
    tolerance: f64,
) -> Result<ConditionReport> {
    let mut rng = sampling::rng(spec.seed);
    let n = model.dimension();
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    let mut worst: Option<NccWitness> = None;
    let mut samples = 0;
    let mut attempts = 0;
    while samples < spec.count && attempts < spec.count * 20 {
        attempts += 1;
        let x: Vec<T> = spec.draw_point(&mut rng, n);
        if !model.in_domain(&x) {
            continue;
        }
        let mut dir: Vec<T> = sampling::unit_vector(&mut rng, n - 1);
        dir.push(T::one());
        let Ok(null) = model.null_project(&x, &dir) else {
            continue;
        };
        let Ok(value) = model.ncc_at(&x, &null) else {
            continue;
        };
        let value = value.to_f64_lossy();
        samples += 1;
        max = max.max(value);
        if value < min {
            min = value;
            worst = Some(NccWitness {
                point: point_f64(&x),
                direction: point_f64(&null),
                value,
            });
        }
    }
    if samples == 0 {
        return Err(Error::EmptySample);
    }
    let passed = min >= -tolerance;
    Ok(ConditionReport {
        condition: "Ric(X,X) >= 0 for null X".into(),
        samples,
        min_value: min,
        max_value: max,
        tolerance,
        witness: if passed { None } else { worst },
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eds() -> MetricModel<f64> {
        MetricModel::einstein_de_sitter(4).unwrap()
    }

    #[test]
    fn null_projection_examples() {
        let mink = MetricModel::<f64>::minkowski(4).unwrap();
        assert_eq!(
            mink.null_project(&[0.0; 4], &[1.0, 0.0, 0.0, 0.9]).unwrap(),
            vec![1.0, 0.0, 0.0, 1.0]
        );
        let p = eds()
            .null_project(&[0.0, 0.0, 0.0, 1.0], &[1.0, 0.0, 0.0, 0.5])
            .unwrap();
        assert!((p[3] - 1.0).abs() < 1e-15);
        let p = eds()
            .null_project(&[0.0, 0.0, 0.0, 8.0], &[1.0, 0.0, 0.0, 0.5])
            .unwrap();
        assert!((p[3] - 4.0).abs() < 1e-13);
        let p = eds()
            .null_project(&[0.0, 0.0, 0.0, 8.0], &[1.0, 0.0, 0.0, -0.5])
            .unwrap();
        assert!((p[3] + 4.0).abs() < 1e-13);
        assert_eq!(
            mink.null_project(&[0.0; 4], &[0.0, 0.0, 0.0, 1.0]),
            Err(Error::ZeroSpatialPart)
        );
    }

    #[test]
    fn ncc_values() {
        let m = eds();
        let v = m
            .ncc_at(&[0.0, 0.0, 0.0, 1.0], &[1.0, 0.0, 0.0, 1.0])
            .unwrap();
        assert!((v - 4.0 / 3.0).abs() < 1e-14);
        // (2/3)(1/4)(1) + (2/3)(1/64)(16) = 1/3
        let v = m
            .ncc_at(&[0.0, 0.0, 0.0, 8.0], &[1.0, 0.0, 0.0, 4.0])
            .unwrap();
        assert!((v - 1.0 / 3.0).abs() < 1e-13);
        // Cross-check against a contraction of the finite-difference Ricci tensor.
        let fd = m
            .ricci_fd(&[0.0, 0.0, 0.0, 8.0])
            .unwrap()
            .form(&[1.0, 0.0, 0.0, 4.0], &[1.0, 0.0, 0.0, 4.0]);
        assert!((fd - 1.0 / 3.0).abs() < 1e-5);
        assert!(matches!(
            m.ncc_at(&[0.0, 0.0, 0.0, 1.0], &[1.0, 0.0, 0.0, 0.5]),
            Err(Error::NotNull { .. })
        ));
        let mink = MetricModel::<f64>::minkowski(4).unwrap();
        assert_eq!(mink.ncc_at(&[0.0; 4], &[0.0, 0.6, 0.8, 1.0]).unwrap(), 0.0);
    }

    #[test]
    fn sampled_ncc_reports() {
        let spec = SampleSpec::default();
        let report = check_ncc(&eds(), &spec, 1e-12).unwrap();
        assert!(report.passed && report.min_value > 0.0);
        assert_eq!(report.samples, 1000);

        let mink = MetricModel::<f64>::minkowski(4).unwrap();
        let report = check_ncc(&mink, &spec, 1e-12).unwrap();
        assert!(report.passed);
        assert_eq!(report.min_value, 0.0);

        // a = -1/2 gives Ric(X,X) = (m-1) a t^(2a-2) |v|^2 < 0 on null X.
        let violating = MetricModel::<f64>::frw_power(4, -0.5).unwrap();
        let x = [0.0, 0.0, 0.0, 2.0];
        let null = violating.null_project(&x, &[1.0, 0.0, 0.0, 1.0]).unwrap();
        assert!(violating.ricci_fd(&x).unwrap().form(&null, &null) < 0.0);
        let report = check_ncc(&violating, &spec, 1e-12).unwrap();
        assert!(!report.passed);
        assert!(report.witness.as_ref().unwrap().value < 0.0);

        let empty = SampleSpec {
            time_range: (-2.0, -1.0),
            log_time: false,
            ..SampleSpec::default()
        };
        assert_eq!(check_ncc(&eds(), &empty, 1e-12), Err(Error::EmptySample));
    }
}
