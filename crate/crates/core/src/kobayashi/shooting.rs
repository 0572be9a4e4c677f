use super::LinkSettings;
use crate::error::{point_f64, Error, Result};
use crate::linalg::damped_solve;
use crate::manifold::MetricModel;
use crate::ode::{self, IntegrateOptions, Tolerances};
use crate::{max_abs_diff, norm, Real};

/// Position reached from `start` with velocity `dir` after affine parameter `span`.
pub(crate) fn endpoint<T: Real>(
    model: &MetricModel<T>,
    start: &[T],
    dir: &[T],
    span: T,
    settings: &LinkSettings<T>,
) -> Result<Vec<T>> {
    let n = model.dimension();
    let mut y0 = start.to_vec();
    y0.extend_from_slice(dir);
    if span == T::zero() {
        return Ok(start.to_vec());
    }
    let mut rhs = |_s: T, y: &[T], dy: &mut [T]| -> bool {
        let (x, v) = y.split_at(n);
        let Ok(acc) = model.geodesic_acceleration(x, v) else {
            return false;
        };
        dy[..n].copy_from_slice(v);
        dy[n..].copy_from_slice(&acc);
        true
    };
    let mut opts = IntegrateOptions::new(0.0, 0.0);
    opts.tol = Tolerances {
        rtol: settings.rtol,
        atol: settings.atol,
    };
    opts.min_step = T::lit(1e-12);
    let sol = ode::integrate(&mut rhs, T::zero(), &y0, span, &opts);
    if !sol.completed {
        return Err(Error::OutOfDomain {
            point: point_f64(&sol.y_end[..n]),
        });
    }
    Ok(sol.y_end[..n].to_vec())
}

/// Future-pointing null vector at `x` whose spatial part points along the
/// coordinate vector `spatial`, scaled to unit length in the metric at `x`.
pub(crate) fn null_direction<T: Real>(
    model: &MetricModel<T>,
    x: &[T],
    spatial: &[T],
) -> Result<Vec<T>> {
    let mut v = spatial.to_vec();
    v.push(T::zero());
    let len2 = model.inner(x, &v, &v);
    if !(len2 > T::zero()) {
        return Err(Error::ZeroSpatialPart);
    }
    let scale = T::one() / len2.sqrt();
    for c in v.iter_mut() {
        *c = *c * scale;
    }
    let m = v.len() - 1;
    v[m] = T::one();
    model.null_project(x, &v)
}

/// Gnomonic chart around a unit vector: `w -> normalize(base + sum w_j e_j)`
/// with `e_j` an orthonormal basis of the complement of `base`.
#[derive(Debug, Clone)]
pub(crate) struct Chart<T> {
    base: Vec<T>,
    tangent: Vec<Vec<T>>,
}

impl<T: Real> Chart<T> {
    pub(crate) fn new(base: &[T]) -> Self {
        let m = base.len();
        let len = norm(base);
        let base: Vec<T> = if len > T::zero() {
            base.iter().map(|c| *c / len).collect()
        } else {
            (0..m)
                .map(|i| if i == 0 { T::one() } else { T::zero() })
                .collect()
        };
        let mut tangent: Vec<Vec<T>> = Vec::with_capacity(m - 1);
        for i in 0..m {
            if tangent.len() == m - 1 {
                break;
            }
            let mut e: Vec<T> = (0..m)
                .map(|j| if i == j { T::one() } else { T::zero() })
                .collect();
            for b in std::iter::once(&base).chain(tangent.iter()) {
                let d: T = e.iter().zip(b).map(|(p, q)| *p * *q).sum();
                for (p, q) in e.iter_mut().zip(b) {
                    *p = *p - d * *q;
                }
            }
            let l = norm(&e);
            if l > T::lit(1e-6) {
                tangent.push(e.iter().map(|c| *c / l).collect());
            }
        }
        Self { base, tangent }
    }

    pub(crate) fn dim(&self) -> usize {
        self.tangent.len()
    }

    pub(crate) fn spatial(&self, w: &[T]) -> Vec<T> {
        let mut v = self.base.clone();
        for (wj, e) in w.iter().zip(&self.tangent) {
            for (p, q) in v.iter_mut().zip(e) {
                *p = *p + *wj * *q;
            }
        }
        let l = norm(&v);
        v.iter().map(|c| *c / l).collect()
    }
}

/// Halves the span entries `spans` of `z0` until `residual` is defined there,
/// so a seed that overshoots the domain starts inside it.
pub(crate) fn pull_inside<T: Real, F: FnMut(&[T]) -> Option<Vec<T>>>(
    residual: &mut F,
    z0: &[T],
    spans: &[usize],
) -> Vec<T> {
    let mut z = z0.to_vec();
    for _ in 0..40 {
        if residual(&z).is_some() {
            return z;
        }
        for &i in spans {
            z[i] = z[i] * T::lit(0.5);
        }
    }
    z0.to_vec()
}

/// Damped Gauss–Newton for `residual(z) = 0` with a forward-difference
/// Jacobian. Returns the final point and its max-abs residual.
pub(crate) fn solve_residual<T: Real, F: FnMut(&[T]) -> Option<Vec<T>>>(
    mut residual: F,
    z0: &[T],
    max_iterations: usize,
    target: T,
) -> (Vec<T>, T) {
    let mut z = z0.to_vec();
    let Some(mut r) = residual(&z) else {
        return (z, T::infinity());
    };
    let sq = |r: &[T]| r.iter().map(|c| *c * *c).sum::<T>();
    let zeros = vec![T::zero(); r.len()];
    let mut cost = sq(&r);
    let mut lambda = T::lit(1e-6);
    for _ in 0..max_iterations {
        if max_abs_diff(&r, &zeros) <= target {
            break;
        }
        let cols = z.len();
        let mut jac = vec![vec![T::zero(); cols]; r.len()];
        let mut ok = true;
        for j in 0..cols {
            let h = T::lit(1e-7) * z[j].abs().max(T::one());
            let mut zp = z.clone();
            zp[j] = zp[j] + h;
            let (rp, h) = match residual(&zp) {
                Some(rp) => (rp, h),
                None => {
                    zp[j] = z[j] - h;
                    match residual(&zp) {
                        Some(rp) => (rp, -h),
                        None => {
                            ok = false;
                            break;
                        }
                    }
                }
            };
            for i in 0..r.len() {
                jac[i][j] = (rp[i] - r[i]) / h;
            }
        }
        if !ok {
            break;
        }
        let neg: Vec<T> = r.iter().map(|c| -*c).collect();
        let mut accepted = false;
        for _ in 0..12 {
            let Some(dz) = damped_solve(&jac, &neg, cols, lambda) else {
                lambda = lambda * T::lit(10.0);
                continue;
            };
            let trial: Vec<T> = z.iter().zip(&dz).map(|(a, b)| *a + *b).collect();
            if let Some(rt) = residual(&trial) {
                let c = sq(&rt);
                if c < cost {
                    z = trial;
                    r = rt;
                    cost = c;
                    lambda = (lambda / T::lit(3.0)).max(T::lit(1e-12));
                    accepted = true;
                    break;
                }
            }
            lambda = lambda * T::lit(10.0);
        }
        if !accepted {
            break;
        }
    }
    let miss = max_abs_diff(&r, &zeros);
    (z, miss)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chart_is_orthonormal_and_centered() {
        let c = Chart::<f64>::new(&[0.0, 3.0, 4.0]);
        assert_eq!(c.dim(), 2);
        let v = c.spatial(&[0.0, 0.0]);
        assert!((v[1] - 0.6).abs() < 1e-15 && (v[2] - 0.8).abs() < 1e-15);
        let w = c.spatial(&[0.3, -1.2]);
        assert!((norm(&w) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn overshooting_seed_is_pulled_inside() {
        let m = MetricModel::<f64>::minkowski_halfspace(4).unwrap();
        let settings = LinkSettings::default();
        let x = [0.0, 0.0, 0.0, 1.0];
        let y = [0.0, 0.0, -0.5, 0.5];
        let chart = Chart::new(&[0.0, 0.0, 1.0]);
        let mut residual = |z: &[f64]| {
            let d = null_direction(&m, &x, &chart.spatial(&z[..2])).ok()?;
            let e = endpoint(&m, &x, &d, z[2], &settings).ok()?;
            Some(e.iter().zip(&y).map(|(a, b)| a - b).collect::<Vec<_>>())
        };
        // Past the boundary t = 0 at span -1.
        let z0 = pull_inside(&mut residual, &[0.0, 0.0, -3.0], &[2]);
        assert_eq!(z0[2], -0.75);
        let (z, miss) = solve_residual(residual, &z0, 50, 1e-12);
        assert!(miss < 1e-12, "{miss}");
        assert!((z[2] + 0.5).abs() < 1e-10);
    }

    #[test]
    fn gauss_newton_hits_a_flat_target() {
        let m = MetricModel::<f64>::minkowski(4).unwrap();
        let settings = LinkSettings::default();
        let x = [0.0, 0.0, 0.0, 0.0];
        let y = [1.0, 2.0, 2.0, 3.0];
        let chart = Chart::new(&[1.0, 1.0, 1.0]);
        let (z, miss) = solve_residual(
            |z: &[f64]| {
                let d = null_direction(&m, &x, &chart.spatial(&z[..2])).ok()?;
                let e = endpoint(&m, &x, &d, z[2], &settings).ok()?;
                Some(e.iter().zip(&y).map(|(a, b)| a - b).collect())
            },
            &[0.0, 0.0, 1.0],
            50,
            1e-12,
        );
        assert!(miss < 1e-12, "{miss}");
        assert!((z[2] - 3.0).abs() < 1e-10);
    }
}
