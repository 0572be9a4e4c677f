//! Dense square matrices and the handful of factorizations the geometry needs.

use std::ops::{Index, IndexMut};

use crate::Real;

/// Row-major square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Real> Matrix<T> {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![T::zero(); n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn diagonal(diag: &[T]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Self {
        let n = rows.len();
        let mut m = Self::zeros(n);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), n, "matrix rows must be square");
            for (j, &v) in row.iter().enumerate() {
                m[(i, j)] = v;
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn scale(&self, s: T) -> Self {
        Self {
            n: self.n,
            data: self.data.iter().map(|&v| v * s).collect(),
        }
    }

    pub fn rows(&self) -> Vec<Vec<T>> {
        self.data.chunks(self.n).map(<[T]>::to_vec).collect()
    }

    /// Bilinear form `u^T M v`.
    pub fn form(&self, u: &[T], v: &[T]) -> T {
        let mut acc = T::zero();
        for i in 0..self.n {
            let mut row = T::zero();
            for j in 0..self.n {
                row = row + self[(i, j)] * v[j];
            }
            acc = acc + u[i] * row;
        }
        acc
    }

    pub fn mul_vec(&self, v: &[T]) -> Vec<T> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self[(i, j)] * v[j]).sum())
            .collect()
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, &v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.data
            .iter()
            .zip(&other.data)
            .fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs()))
    }

    /// Largest `|M_ij - M_ji|`.
    pub fn asymmetry(&self) -> T {
        let mut worst = T::zero();
        for i in 0..self.n {
            for j in 0..i {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    /// Copies the upper triangle over the lower one.
    pub fn symmetrize(&mut self) {
        for i in 0..self.n {
            for j in 0..i {
                let v = (self[(i, j)] + self[(j, i)]) * T::lit(0.5);
                self[(i, j)] = v;
                self[(j, i)] = v;
            }
        }
    }

    pub fn trace_against(&self, other: &Self) -> T {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| a * b)
            .sum()
    }
}

impl<T> Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.n + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Matrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.n + j]
    }
}

/// Eigen-decomposition `M = V diag(values) V^T` of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct SymmetricEigen<T> {
    pub values: Vec<T>,
    /// Eigenvectors stored as columns.
    pub vectors: Matrix<T>,
}

impl<T: Real> SymmetricEigen<T> {
    /// Cyclic Jacobi rotations; converges quadratically for the tiny matrices used here.
    pub fn new(m: &Matrix<T>) -> Self {
        let n = m.dim();
        let mut a = m.clone();
        let mut v = Matrix::identity(n);
        let scale = a.max_abs().max(T::min_positive_value());
        for _sweep in 0..64 {
            let mut off = T::zero();
            for p in 0..n {
                for q in (p + 1)..n {
                    off = off.max(a[(p, q)].abs());
                }
            }
            if off <= T::epsilon() * T::lit(1e-3) * scale {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = a[(p, q)];
                    if apq == T::zero() {
                        continue;
                    }
                    let theta = (a[(q, q)] - a[(p, p)]) / (T::lit(2.0) * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                    let c = T::one() / (t * t + T::one()).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = a[(k, p)];
                        let akq = a[(k, q)];
                        a[(k, p)] = c * akp - s * akq;
                        a[(k, q)] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[(p, k)];
                        let aqk = a[(q, k)];
                        a[(p, k)] = c * apk - s * aqk;
                        a[(q, k)] = s * apk + c * aqk;
                    }
                    for k in 0..n {
                        let vkp = v[(k, p)];
                        let vkq = v[(k, q)];
                        v[(k, p)] = c * vkp - s * vkq;
                        v[(k, q)] = s * vkp + c * vkq;
                    }
                }
            }
        }
        Self {
            values: (0..n).map(|i| a[(i, i)]).collect(),
            vectors: v,
        }
    }

    pub fn condition_number(&self) -> T {
        let (lo, hi) = self
            .values
            .iter()
            .fold((T::infinity(), T::zero()), |(lo, hi), &v| {
                (lo.min(v.abs()), hi.max(v.abs()))
            });
        if lo == T::zero() {
            T::infinity()
        } else {
            hi / lo
        }
    }

    /// `V diag(1/values) V^T`.
    pub fn inverse(&self) -> Matrix<T> {
        let n = self.values.len();
        let mut out = Matrix::zeros(n);
        for i in 0..n {
            for j in i..n {
                let mut acc = T::zero();
                for k in 0..n {
                    acc = acc + self.vectors[(i, k)] * self.vectors[(j, k)] / self.values[k];
                }
                out[(i, j)] = acc;
                out[(j, i)] = acc;
            }
        }
        out
    }
}

/// Solves `A x = b` for a general square system by partial-pivot elimination.
/// Returns `None` when a pivot underflows.
pub fn solve<T: Real>(a: &Matrix<T>, b: &[T]) -> Option<Vec<T>> {
    let n = a.dim();
    let mut m = a.clone();
    let mut x = b.to_vec();
    let scale = m.max_abs();
    if scale == T::zero() {
        return None;
    }
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| {
                m[(i, col)]
                    .abs()
                    .partial_cmp(&m[(j, col)].abs())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .unwrap_or(col);
        if m[(pivot, col)].abs() <= T::epsilon() * scale * T::lit(1e-3) {
            return None;
        }
        if pivot != col {
            for k in 0..n {
                let tmp = m[(col, k)];
                m[(col, k)] = m[(pivot, k)];
                m[(pivot, k)] = tmp;
            }
            x.swap(col, pivot);
        }
        for row in (col + 1)..n {
            let f = m[(row, col)] / m[(col, col)];
            if f == T::zero() {
                continue;
            }
            for k in col..n {
                m[(row, k)] = m[(row, k)] - f * m[(col, k)];
            }
            x[row] = x[row] - f * x[col];
        }
    }
    for col in (0..n).rev() {
        let mut acc = x[col];
        for k in (col + 1)..n {
            acc = acc - m[(col, k)] * x[k];
        }
        x[col] = acc / m[(col, col)];
    }
    Some(x)
}

/// Least-squares / minimum-norm solve of a rectangular system `J dx = r`
/// (`J` is `rows x cols`, row-major) with Levenberg damping `lambda`:
/// `dx = J^T (J J^T + lambda I)^{-1} r` when `rows <= cols`,
/// `dx = (J^T J + lambda I)^{-1} J^T r` otherwise.
pub fn damped_solve<T: Real>(jac: &[Vec<T>], rhs: &[T], cols: usize, lambda: T) -> Option<Vec<T>> {
    let rows = jac.len();
    if rows <= cols {
        let mut jjt = Matrix::zeros(rows);
        for i in 0..rows {
            for j in 0..rows {
                jjt[(i, j)] = (0..cols).map(|k| jac[i][k] * jac[j][k]).sum::<T>();
            }
            jjt[(i, i)] = jjt[(i, i)] + lambda;
        }
        let y = solve(&jjt, rhs)?;
        Some(
            (0..cols)
                .map(|k| (0..rows).map(|i| jac[i][k] * y[i]).sum())
                .collect(),
        )
    } else {
        let mut jtj = Matrix::zeros(cols);
        for i in 0..cols {
            for j in 0..cols {
                jtj[(i, j)] = (0..rows).map(|k| jac[k][i] * jac[k][j]).sum::<T>();
            }
            jtj[(i, i)] = jtj[(i, i)] + lambda;
        }
        let jtr: Vec<T> = (0..cols)
            .map(|i| (0..rows).map(|k| jac[k][i] * rhs[k]).sum())
            .collect();
        solve(&jtj, &jtr)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jacobi_recovers_known_spectrum() {
        let m = Matrix::from_rows(&[
            vec![2.0, 1.0, 0.0, 0.0],
            vec![1.0, 2.0, 0.0, 0.0],
            vec![0.0, 0.0, 5.0, 0.0],
            vec![0.0, 0.0, 0.0, -1.0],
        ]);
        let eig = SymmetricEigen::new(&m);
        let mut vals: Vec<f64> = eig.values.clone();
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let want = [-1.0f64, 1.0, 3.0, 5.0];
        for (v, w) in vals.iter().zip(want) {
            assert!((v - w).abs() < 1e-13, "{vals:?}");
        }
        let inv = eig.inverse();
        let prod: Vec<f64> = (0..4)
            .flat_map(|i| {
                let inv = &inv;
                let m = &m;
                (0..4).map(move |j| (0..4).map(|k| m[(i, k)] * inv[(k, j)]).sum::<f64>())
            })
            .collect();
        for i in 0..4 {
            for j in 0..4 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((prod[i * 4 + j] - want).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn solve_pivots() {
        let a = Matrix::from_rows(&[vec![0.0, 2.0], vec![3.0, 1.0]]);
        let x: Vec<f64> = solve(&a, &[4.0, 5.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-15 && (x[1] - 2.0).abs() < 1e-15);
        let singular = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]);
        assert!(solve(&singular, &[1.0, 1.0]).is_none());
    }

    #[test]
    fn damped_solve_minimum_norm() {
        // One equation, two unknowns: x + y = 2 has minimum-norm solution (1, 1).
        let dx: Vec<f64> = damped_solve(&[vec![1.0, 1.0]], &[2.0], 2, 0.0).unwrap();
        assert!((dx[0] - 1.0).abs() < 1e-14 && (dx[1] - 1.0).abs() < 1e-14);
    }
}
