//! Levi-Civita connection, Ricci tensor and scalar curvature.
//!
//! Builtin models use closed-form expressions, custom and conformal models
//! use symbolic derivatives of their coefficient expressions. The pure
//! central-difference pipeline (`*_fd`) is kept as an independent check.

use std::ops::{Index, IndexMut};

use serde::Serialize;

use super::{Geometry, MetricModel};
use crate::error::{point_f64, Error, Result};
use crate::linalg::Matrix;
use crate::Real;

/// Christoffel symbols `Gamma^a_bc`, indexed `[(a, b, c)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Connection<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Real> Connection<T> {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![T::zero(); n * n * n],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// `Gamma^a_bc u^b v^c` for every `a`.
    pub fn contract(&self, u: &[T], v: &[T]) -> Vec<T> {
        let n = self.n;
        (0..n)
            .map(|a| {
                let mut acc = T::zero();
                for b in 0..n {
                    if u[b] == T::zero() {
                        continue;
                    }
                    for c in 0..n {
                        acc = acc + self[(a, b, c)] * u[b] * v[c];
                    }
                }
                acc
            })
            .collect()
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.data
            .iter()
            .zip(&other.data)
            .fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs()))
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, &v| m.max(v.abs()))
    }

    /// Largest `|Gamma^a_bc - Gamma^a_cb|`.
    pub fn lower_asymmetry(&self) -> T {
        let n = self.n;
        let mut worst = T::zero();
        for a in 0..n {
            for b in 0..n {
                for c in 0..b {
                    worst = worst.max((self[(a, b, c)] - self[(a, c, b)]).abs());
                }
            }
        }
        worst
    }
}

impl<T> Index<(usize, usize, usize)> for Connection<T> {
    type Output = T;
    #[inline]
    fn index(&self, (a, b, c): (usize, usize, usize)) -> &T {
        &self.data[(a * self.n + b) * self.n + c]
    }
}

impl<T> IndexMut<(usize, usize, usize)> for Connection<T> {
    #[inline]
    fn index_mut(&mut self, (a, b, c): (usize, usize, usize)) -> &mut T {
        &mut self.data[(a * self.n + b) * self.n + c]
    }
}

/// Connection, Ricci tensor and scalar curvature at one point.
#[derive(Debug, Clone, Serialize)]
pub struct CurvatureSample {
    pub point: Vec<f64>,
    pub metric: Vec<Vec<f64>>,
    pub ricci: Vec<Vec<f64>>,
    pub scalar: f64,
    /// `max |Ric - (R/n) g|`.
    pub einstein_residual: f64,
    pub analytic: bool,
}

impl<T: Real> MetricModel<T> {
    /// Closed-form connection for builtin models.
    pub fn christoffel_analytic(&self, x: &[T]) -> Option<Connection<T>> {
        let n = self.dimension;
        match self.geometry {
            Geometry::Minkowski | Geometry::MinkowskiHalfSpace => Some(Connection::zeros(n)),
            Geometry::FrwPower { exponent: p } => {
                let t = x[n - 1];
                let mut gamma = Connection::zeros(n);
                // a = t^p: Gamma^t_ii = a a', Gamma^i_it = a'/a.
                let a_adot = p * t.powf(T::lit(2.0) * p - T::one());
                let hubble = p / t;
                for i in 0..n - 1 {
                    gamma[(n - 1, i, i)] = a_adot;
                    gamma[(i, i, n - 1)] = hubble;
                    gamma[(i, n - 1, i)] = hubble;
                }
                Some(gamma)
            }
            _ => None,
        }
    }

    /// Closed-form Ricci tensor for builtin models.
    pub fn ricci_analytic(&self, x: &[T]) -> Option<Matrix<T>> {
        let n = self.dimension;
        match self.geometry {
            Geometry::Minkowski | Geometry::MinkowskiHalfSpace => Some(Matrix::zeros(n)),
            Geometry::FrwPower { exponent: p } => {
                let t = x[n - 1];
                let m = T::lit((n - 1) as f64);
                let mut ric = Matrix::zeros(n);
                // Ric_ii = a a'' + (m-1) a'^2, Ric_tt = -m a''/a, with a = t^p.
                let spatial = t.powf(T::lit(2.0) * p - T::lit(2.0))
                    * (p * (p - T::one()) + (m - T::one()) * p * p);
                for i in 0..n - 1 {
                    ric[(i, i)] = spatial;
                }
                ric[(n - 1, n - 1)] = -m * p * (p - T::one()) / (t * t);
                Some(ric)
            }
            _ => None,
        }
    }

    fn stencil_point(&self, x: &[T], i: usize, offset: T) -> Result<Vec<T>> {
        let mut y = x.to_vec();
        y[i] = y[i] + offset;
        if !self.in_domain(&y) {
            return Err(Error::OutOfDomain {
                point: point_f64(&y),
            });
        }
        Ok(y)
    }

    /// Connection from central differences of the metric alone.
    pub fn christoffel_fd(&self, x: &[T]) -> Result<Connection<T>> {
        self.check_point(x)?;
        let n = self.dimension;
        let g = self.metric_raw(x);
        let ginv = self.inverse_of(x, &g)?;
        // dg[c] = d_c g_ab
        let mut dg = Vec::with_capacity(n);
        for c in 0..n {
            let h = self.fd_step(x, c);
            let plus = self.metric_raw(&self.stencil_point(x, c, h)?);
            let minus = self.metric_raw(&self.stencil_point(x, c, -h)?);
            let mut d = Matrix::zeros(n);
            for a in 0..n {
                for b in 0..n {
                    d[(a, b)] = (plus[(a, b)] - minus[(a, b)]) / (h + h);
                }
            }
            dg.push(d);
        }
        Ok(levi_civita(&ginv, &dg))
    }

    /// Metric with its first and second coordinate derivatives, for the
    /// expression-backed diagonal models.
    fn diagonal_jets(&self, x: &[T]) -> Option<MetricJets<T>> {
        let Geometry::Diagonal { coefficients, .. } = &self.geometry else {
            return None;
        };
        let n = self.dimension;
        let mut jets = MetricJets::zeros(n);
        for (i, c) in coefficients.iter().enumerate() {
            jets.g[(i, i)] = c.eval(x);
            let grad: Vec<T> = c.eval_gradient(x);
            let hess: Vec<Vec<T>> = c.eval_hessian(x);
            for a in 0..n {
                jets.dg[a][(i, i)] = grad[a];
                for b in 0..n {
                    jets.ddg[a * n + b][(i, i)] = hess[a][b];
                }
            }
        }
        Some(jets)
    }

    /// `(f, df, d df)` for `f = ln Omega` of a conformal model.
    fn log_factor_jet(factor: &crate::expr::ExprJet, x: &[T]) -> (Vec<T>, Vec<Vec<T>>) {
        let omega: T = factor.eval(x);
        let grad: Vec<T> = factor.eval_gradient(x);
        let hess: Vec<Vec<T>> = factor.eval_hessian(x);
        let n = grad.len();
        let df: Vec<T> = grad.iter().map(|g| *g / omega).collect();
        let ddf = (0..n)
            .map(|a| (0..n).map(|b| hess[a][b] / omega - df[a] * df[b]).collect())
            .collect();
        (df, ddf)
    }

    /// `Gamma~ = Gamma + delta^a_b f_c + delta^a_c f_b - g_bc grad^a f` for `e^{2f} g`.
    fn christoffel_conformal(&self, x: &[T]) -> Result<Connection<T>> {
        let Geometry::Conformal { base, factor } = &self.geometry else {
            unreachable!("conformal connection requested for non-conformal model");
        };
        let n = self.dimension;
        let mut gamma = base.christoffel_at(x)?;
        let g = base.metric_raw(x);
        let ginv = base.inverse_of(x, &g)?;
        let (df, _) = Self::log_factor_jet(factor, x);
        let grad_up = ginv.mul_vec(&df);
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    let mut v = gamma[(a, b, c)] - g[(b, c)] * grad_up[a];
                    if a == b {
                        v = v + df[c];
                    }
                    if a == c {
                        v = v + df[b];
                    }
                    gamma[(a, b, c)] = v;
                }
            }
        }
        Ok(gamma)
    }

    /// `Ric~ = Ric - (n-2)(Hess f - df df) - (Lap f + (n-2)|df|^2) g` for `e^{2f} g`.
    fn ricci_conformal(&self, x: &[T]) -> Result<Matrix<T>> {
        let Geometry::Conformal { base, factor } = &self.geometry else {
            unreachable!("conformal Ricci requested for non-conformal model");
        };
        let n = self.dimension;
        let nm2 = T::lit((n - 2) as f64);
        let ric = base.ricci_at(x)?;
        let gamma = base.christoffel_at(x)?;
        let g = base.metric_raw(x);
        let ginv = base.inverse_of(x, &g)?;
        let (df, ddf) = Self::log_factor_jet(factor, x);
        let mut hess = Matrix::zeros(n);
        for a in 0..n {
            for b in 0..n {
                let corr: T = (0..n).map(|c| gamma[(c, a, b)] * df[c]).sum();
                hess[(a, b)] = ddf[a][b] - corr;
            }
        }
        let lap = ginv.trace_against(&hess);
        let grad_sq = ginv.form(&df, &df);
        let mut out = Matrix::zeros(n);
        for a in 0..n {
            for b in 0..n {
                out[(a, b)] = ric[(a, b)]
                    - nm2 * (hess[(a, b)] - df[a] * df[b])
                    - (lap + nm2 * grad_sq) * g[(a, b)];
            }
        }
        out.symmetrize();
        Ok(out)
    }

    /// Christoffel symbols at `x`: closed form for builtins, symbolic
    /// derivatives for expression-backed models.
    pub fn christoffel_at(&self, x: &[T]) -> Result<Connection<T>> {
        self.check_point(x)?;
        if let Some(gamma) = self.christoffel_analytic(x) {
            return Ok(gamma);
        }
        match self.geometry {
            Geometry::Conformal { .. } => self.christoffel_conformal(x),
            Geometry::Diagonal { .. } => {
                let jets = self.diagonal_jets(x).expect("diagonal geometry");
                let ginv = self.inverse_of(x, &jets.g)?;
                Ok(levi_civita(&ginv, &jets.dg))
            }
            _ => self.christoffel_fd(x),
        }
    }

    /// Ricci tensor from central differences of a connection evaluator.
    fn ricci_from<F>(&self, x: &[T], connection: F) -> Result<Matrix<T>>
    where
        F: Fn(&Self, &[T]) -> Result<Connection<T>>,
    {
        self.check_point(x)?;
        let n = self.dimension;
        let gamma = connection(self, x)?;
        // dgamma[c] = d_c Gamma
        let mut dgamma = Vec::with_capacity(n);
        for c in 0..n {
            let h = self.fd_step(x, c);
            let plus = connection(self, &self.stencil_point(x, c, h)?)?;
            let minus = connection(self, &self.stencil_point(x, c, -h)?)?;
            let mut d = Connection::zeros(n);
            for (k, v) in d.data.iter_mut().enumerate() {
                *v = (plus.data[k] - minus.data[k]) / (h + h);
            }
            dgamma.push(d);
        }
        let mut ric = Matrix::zeros(n);
        for b in 0..n {
            for d in b..n {
                let mut acc = T::zero();
                for a in 0..n {
                    acc = acc + dgamma[a][(a, b, d)] - dgamma[d][(a, a, b)];
                    for e in 0..n {
                        acc = acc + gamma[(a, a, e)] * gamma[(e, b, d)]
                            - gamma[(a, d, e)] * gamma[(e, a, b)];
                    }
                }
                ric[(b, d)] = acc;
            }
        }
        ric.symmetrize_from_upper();
        Ok(ric)
    }

    /// Ricci tensor computed purely from finite differences of the metric.
    pub fn ricci_fd(&self, x: &[T]) -> Result<Matrix<T>> {
        self.ricci_from(x, Self::christoffel_fd)
    }

    /// Ricci tensor at `x` without finite differences.
    pub fn ricci_at(&self, x: &[T]) -> Result<Matrix<T>> {
        self.check_point(x)?;
        if let Some(ric) = self.ricci_analytic(x) {
            return Ok(ric);
        }
        match self.geometry {
            Geometry::Conformal { .. } => self.ricci_conformal(x),
            Geometry::Diagonal { .. } => {
                let jets = self.diagonal_jets(x).expect("diagonal geometry");
                let ginv = self.inverse_of(x, &jets.g)?;
                Ok(ricci_from_jets(&ginv, &jets))
            }
            _ => self.ricci_fd(x),
        }
    }

    /// `R = g^ab Ric_ab`.
    pub fn scalar_curvature_at(&self, x: &[T]) -> Result<T> {
        let ric = self.ricci_at(x)?;
        let ginv = self.inverse_metric_at(x)?;
        Ok(ginv.trace_against(&ric))
    }

    /// Scalar curvature from the finite-difference pipeline.
    pub fn scalar_curvature_fd(&self, x: &[T]) -> Result<T> {
        let ric = self.ricci_fd(x)?;
        let ginv = self.inverse_metric_at(x)?;
        Ok(ginv.trace_against(&ric))
    }

    /// `max |Ric - (R/n) g|` entrywise; zero exactly for Einstein metrics.
    pub fn einstein_residual_at(&self, x: &[T]) -> Result<T> {
        let ric = self.ricci_at(x)?;
        let g = self.metric_at(x)?;
        let ginv = self.inverse_of(x, &g)?;
        let r = ginv.trace_against(&ric);
        Ok(einstein_residual(&ric, &g, r))
    }

    pub fn curvature_sample(&self, x: &[T]) -> Result<CurvatureSample> {
        let g = self.metric_at(x)?;
        let ric = self.ricci_at(x)?;
        let ginv = self.inverse_of(x, &g)?;
        let r = ginv.trace_against(&ric);
        let to_rows = |m: &Matrix<T>| {
            m.rows()
                .into_iter()
                .map(|row| row.into_iter().map(Real::to_f64_lossy).collect())
                .collect()
        };
        Ok(CurvatureSample {
            point: point_f64(x),
            metric: to_rows(&g),
            ricci: to_rows(&ric),
            scalar: r.to_f64_lossy(),
            einstein_residual: einstein_residual(&ric, &g, r).to_f64_lossy(),
            analytic: self.has_analytic_curvature(),
        })
    }

    /// `x'' = -Gamma(x', x')`.
    pub fn geodesic_acceleration(&self, x: &[T], v: &[T]) -> Result<Vec<T>> {
        let n = self.dimension;
        match self.geometry {
            Geometry::Minkowski | Geometry::MinkowskiHalfSpace => {
                self.check_point(x)?;
                Ok(vec![T::zero(); n])
            }
            Geometry::FrwPower { exponent: p } => {
                self.check_point(x)?;
                let t = x[n - 1];
                let vt = v[n - 1];
                let a_adot = p * t.powf(T::lit(2.0) * p - T::one());
                let hubble = p / t;
                let spatial: T = v[..n - 1].iter().map(|&c| c * c).sum();
                let mut acc: Vec<T> = v[..n - 1]
                    .iter()
                    .map(|&c| -T::lit(2.0) * hubble * c * vt)
                    .collect();
                acc.push(-a_adot * spatial);
                Ok(acc)
            }
            _ => {
                let gamma = self.christoffel_at(x)?;
                Ok(gamma.contract(v, v).into_iter().map(|a| -a).collect())
            }
        }
    }

    /// `Ric(v, v)` at `x`.
    pub fn ricci_along(&self, x: &[T], v: &[T]) -> Result<T> {
        let n = self.dimension;
        if let Geometry::FrwPower { exponent: p } = self.geometry {
            self.check_point(x)?;
            let t = x[n - 1];
            let m = T::lit((n - 1) as f64);
            let spatial_coeff = t.powf(T::lit(2.0) * p - T::lit(2.0))
                * (p * (p - T::one()) + (m - T::one()) * p * p);
            let time_coeff = -m * p * (p - T::one()) / (t * t);
            let spatial: T = v[..n - 1].iter().map(|&c| c * c).sum();
            return Ok(spatial_coeff * spatial + time_coeff * v[n - 1] * v[n - 1]);
        }
        Ok(self.ricci_at(x)?.form(v, v))
    }
}

/// Metric components with first (`dg[c] = d_c g`) and second
/// (`ddg[c * n + e] = d_c d_e g`) coordinate derivatives.
struct MetricJets<T> {
    g: Matrix<T>,
    dg: Vec<Matrix<T>>,
    ddg: Vec<Matrix<T>>,
}

impl<T: Real> MetricJets<T> {
    fn zeros(n: usize) -> Self {
        Self {
            g: Matrix::zeros(n),
            dg: vec![Matrix::zeros(n); n],
            ddg: vec![Matrix::zeros(n); n * n],
        }
    }
}

/// Exact Ricci tensor from metric jets:
/// `Ric_bd = d_a G^a_bd - d_d G^a_ab + G^a_ae G^e_bd - G^a_de G^e_ab`.
fn ricci_from_jets<T: Real>(ginv: &Matrix<T>, jets: &MetricJets<T>) -> Matrix<T> {
    let n = ginv.dim();
    let half = T::lit(0.5);
    let gamma = levi_civita(ginv, &jets.dg);
    // d_e g^ad = -g^ap (d_e g_pq) g^qd
    let dginv: Vec<Matrix<T>> = (0..n)
        .map(|e| {
            let mut m = Matrix::zeros(n);
            for a in 0..n {
                for d in 0..n {
                    let mut acc = T::zero();
                    for p in 0..n {
                        for q in 0..n {
                            acc = acc + ginv[(a, p)] * jets.dg[e][(p, q)] * ginv[(q, d)];
                        }
                    }
                    m[(a, d)] = -acc;
                }
            }
            m
        })
        .collect();
    let s_lower =
        |d: usize, b: usize, c: usize| jets.dg[b][(d, c)] + jets.dg[c][(d, b)] - jets.dg[d][(b, c)];
    let ds_lower = |e: usize, d: usize, b: usize, c: usize| {
        jets.ddg[e * n + b][(d, c)] + jets.ddg[e * n + c][(d, b)] - jets.ddg[e * n + d][(b, c)]
    };
    // dgamma(e, a, b, c) = d_e Gamma^a_bc
    let dgamma = |e: usize, a: usize, b: usize, c: usize| {
        let mut acc = T::zero();
        for d in 0..n {
            acc = acc + dginv[e][(a, d)] * s_lower(d, b, c) + ginv[(a, d)] * ds_lower(e, d, b, c);
        }
        half * acc
    };
    let mut ric = Matrix::zeros(n);
    for b in 0..n {
        for d in b..n {
            let mut acc = T::zero();
            for a in 0..n {
                acc = acc + dgamma(a, a, b, d) - dgamma(d, a, a, b);
                for e in 0..n {
                    acc = acc + gamma[(a, a, e)] * gamma[(e, b, d)]
                        - gamma[(a, d, e)] * gamma[(e, a, b)];
                }
            }
            ric[(b, d)] = acc;
        }
    }
    ric.symmetrize_from_upper();
    ric
}

fn einstein_residual<T: Real>(ric: &Matrix<T>, g: &Matrix<T>, r: T) -> T {
    let n = g.dim();
    let lambda = r / T::lit(n as f64);
    let mut worst = T::zero();
    for i in 0..n {
        for j in 0..n {
            worst = worst.max((ric[(i, j)] - lambda * g[(i, j)]).abs());
        }
    }
    worst
}

/// `Gamma^a_bc = 1/2 g^ad (d_b g_dc + d_c g_db - d_d g_bc)`.
fn levi_civita<T: Real>(ginv: &Matrix<T>, dg: &[Matrix<T>]) -> Connection<T> {
    let n = ginv.dim();
    let half = T::lit(0.5);
    let mut gamma = Connection::zeros(n);
    for b in 0..n {
        for c in b..n {
            for a in 0..n {
                let mut acc = T::zero();
                for d in 0..n {
                    let g_ad = ginv[(a, d)];
                    if g_ad == T::zero() {
                        continue;
                    }
                    acc = acc + g_ad * (dg[b][(d, c)] + dg[c][(d, b)] - dg[d][(b, c)]);
                }
                gamma[(a, b, c)] = half * acc;
                gamma[(a, c, b)] = half * acc;
            }
        }
    }
    gamma
}

impl<T: Real> Matrix<T> {
    pub(crate) fn symmetrize_from_upper(&mut self) {
        let n = self.dim();
        for i in 0..n {
            for j in 0..i {
                self[(i, j)] = self[(j, i)];
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eds() -> MetricModel<f64> {
        MetricModel::einstein_de_sitter(4).unwrap()
    }

    #[test]
    fn flat_models_have_no_curvature() {
        let m = MetricModel::<f64>::minkowski(4).unwrap();
        let x = [1.0, 2.0, -3.0, 0.5];
        assert_eq!(m.christoffel_at(&x).unwrap().max_abs(), 0.0);
        assert_eq!(m.ricci_at(&x).unwrap().max_abs(), 0.0);
        assert_eq!(m.scalar_curvature_at(&x).unwrap(), 0.0);
        assert_eq!(m.einstein_residual_at(&x).unwrap(), 0.0);
        let h = MetricModel::<f64>::minkowski_halfspace(4).unwrap();
        assert_eq!(h.einstein_residual_at(&[5.0, 0.0, 1.0, 0.2]).unwrap(), 0.0);
    }

    #[test]
    fn eds_connection_at_unit_time() {
        // Oracle: Gamma^t_xx = (1/2) d_t t^(4/3) and Gamma^x_xt = (1/2) g^xx d_t g_xx,
        // with the derivative taken by an independent central difference.
        let h = 1e-6;
        let dgxx = ((1.0f64 + h).powf(4.0 / 3.0) - (1.0f64 - h).powf(4.0 / 3.0)) / (2.0 * h);
        let x = [0.0, 0.0, 0.0, 1.0];
        for gamma in [
            eds().christoffel_at(&x).unwrap(),
            eds().christoffel_fd(&x).unwrap(),
        ] {
            assert!((gamma[(3, 0, 0)] - 0.5 * dgxx).abs() < 1e-8);
            assert!((gamma[(0, 0, 3)] - 0.5 * dgxx).abs() < 1e-8);
            assert!((gamma[(3, 0, 0)] - 2.0 / 3.0).abs() < 1e-8);
            assert_eq!(gamma.lower_asymmetry(), 0.0);
        }
    }

    #[test]
    fn eds_ricci_and_scalar() {
        let m = eds();
        let ric = m.ricci_at(&[0.0, 0.0, 0.0, 1.0]).unwrap();
        for i in 0..4 {
            assert!((ric[(i, i)] - 2.0 / 3.0).abs() < 1e-14);
        }
        let ric = m.ricci_fd(&[0.0, 0.0, 0.0, 8.0]).unwrap();
        for i in 0..3 {
            assert!(
                (ric[(i, i)] - 1.0 / 6.0).abs() < 1e-5 / 6.0,
                "{}",
                ric[(i, i)]
            );
        }
        assert!(
            (ric[(3, 3)] - 1.0 / 96.0).abs() < 1e-5 / 96.0,
            "{}",
            ric[(3, 3)]
        );
        assert!((m.scalar_curvature_at(&[0.0, 0.0, 0.0, 1.0]).unwrap() - 4.0 / 3.0).abs() < 1e-14);
        assert!(
            (m.scalar_curvature_fd(&[0.0, 0.0, 0.0, 2.0]).unwrap() - 1.0 / 3.0).abs() < 1e-5 / 3.0
        );
    }

    #[test]
    fn eds_einstein_residual_is_one_at_unit_time() {
        // Ric - (R/4) g = diag(2/3 - 1/3, ..., 2/3 + 1/3) = diag(1/3, 1/3, 1/3, 1).
        let r = eds().einstein_residual_at(&[0.0, 0.0, 0.0, 1.0]).unwrap();
        assert!((r - 1.0).abs() < 1e-14);
    }

    #[test]
    fn stencil_must_fit_in_domain() {
        let x = [0.0, 0.0, 0.0, 1e-6];
        assert!(matches!(
            eds().christoffel_fd(&x),
            Err(Error::OutOfDomain { .. })
        ));
        assert!(eds().christoffel_at(&x).is_ok());
    }

    #[test]
    fn conformal_connection_matches_pure_fd() {
        let m = MetricModel::conformal(eds(), "t^(-2/3)").unwrap();
        let x = [0.3, -0.2, 1.0, 2.0];
        let semi = m.christoffel_at(&x).unwrap();
        let fd = m.christoffel_fd(&x).unwrap();
        assert!(semi.max_abs_diff(&fd) < 1e-8);
        // The rescaled metric is flat.
        let ric = m.ricci_at(&x).unwrap();
        assert!(ric.max_abs() < 1e-13, "{ric:?}");
    }

    #[test]
    fn exact_paths_match_finite_differences() {
        let custom = MetricModel::<f64>::custom_diagonal(
            4,
            &["t^(4/3)", "t^(4/3)", "t^(4/3)", "-1"],
            &["t"],
        )
        .unwrap();
        let x = [0.5, 1.0, -2.0, 3.0];
        let want = eds().ricci_at(&x).unwrap();
        assert!(custom.ricci_at(&x).unwrap().max_abs_diff(&want) < 1e-14);
        assert!(
            custom
                .christoffel_at(&x)
                .unwrap()
                .max_abs_diff(&eds().christoffel_at(&x).unwrap())
                < 1e-15
        );

        let lumpy = MetricModel::<f64>::custom_diagonal(
            4,
            &[
                "1 + x2^2",
                "exp(x1 * t / 3)",
                "2 + sin(x3)",
                "-(1 + t^2 / 4)",
            ],
            &[],
        )
        .unwrap();
        let x = [0.3, -0.4, 0.8, 0.6];
        let exact = lumpy.ricci_at(&x).unwrap();
        let fd = lumpy.ricci_fd(&x).unwrap();
        assert!(
            exact.max_abs_diff(&fd) < 1e-5 * exact.max_abs().max(1.0),
            "{exact:?} {fd:?}"
        );

        let conf = MetricModel::conformal(eds(), "exp(x1 / 4) * (1 + t^2)").unwrap();
        let x = [0.2, -0.1, 0.4, 1.4];
        let exact = conf.ricci_at(&x).unwrap();
        let fd = conf.ricci_fd(&x).unwrap();
        assert!(
            exact.max_abs_diff(&fd) < 1e-5 * exact.max_abs().max(1.0),
            "{exact:?} {fd:?}"
        );
    }

    #[test]
    fn geodesic_acceleration_fast_path_matches_connection() {
        let m = MetricModel::<f64>::frw_power(5, 0.4).unwrap();
        let x = [0.1, 0.2, 0.3, 0.4, 1.7];
        let v = [0.3, -0.1, 0.7, 0.2, 1.1];
        let fast = m.geodesic_acceleration(&x, &v).unwrap();
        let slow: Vec<f64> = m
            .christoffel_fd(&x)
            .unwrap()
            .contract(&v, &v)
            .into_iter()
            .map(|a| -a)
            .collect();
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).abs() < 1e-8);
        }
        let along = m.ricci_along(&x, &v).unwrap();
        let full = m.ricci_fd(&x).unwrap().form(&v, &v);
        assert!((along - full).abs() < 1e-5 * along.abs().max(1.0));
    }
}
