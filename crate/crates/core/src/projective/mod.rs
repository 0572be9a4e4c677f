//! Projective line geometry: linear fractional maps, the Poincaré distance on
//! `(-1, 1)`, the Schwarzian derivative, and projective parameters along null
//! geodesics obtained from the companion equation `u'' + q u = 0`.

mod arc;
mod parameter;

pub use arc::{
    arc_distance, development_arc, segment_cost_on, ArcKind, DevelopmentArc, TURNING_TOLERANCE,
};
pub use parameter::{
    projective_parameter, projective_parameter_with, projective_shoot, CompanionPath,
    HomogeneousParameter, ProjectiveOptions, SignConvention, SHORTCUT_TOLERANCE,
};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::Real;

/// Homogeneous coordinates `[u1 : u2]` on the real projective line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProjectivePoint<T> {
    pub u1: T,
    pub u2: T,
}

impl<T: Real> ProjectivePoint<T> {
    pub fn new(u1: T, u2: T) -> Self {
        Self { u1, u2 }
    }

    pub fn from_affine(p: T) -> Self {
        Self::new(p, T::one())
    }

    pub fn infinity() -> Self {
        Self::new(T::one(), T::zero())
    }

    pub fn is_valid(&self) -> bool {
        self.u1.is_finite() && self.u2.is_finite() && (self.u1 != T::zero() || self.u2 != T::zero())
    }

    /// `u1 / u2`, or `None` at infinity.
    pub fn affine(&self) -> Option<T> {
        if self.u2 == T::zero() {
            None
        } else {
            Some(self.u1 / self.u2)
        }
    }

    /// Angle of the representative vector `(u2, u1)`; defined modulo pi.
    pub fn angle(&self) -> T {
        self.u1.atan2(self.u2)
    }

    /// `u1 w2 - u2 w1`.
    pub fn det(&self, other: &Self) -> T {
        self.u1 * other.u2 - self.u2 * other.u1
    }

    fn norm(&self) -> T {
        self.u1.hypot(self.u2)
    }

    /// Equality as projective points, with a tolerance on the sine of the angle between representatives.
    pub fn equivalent(&self, other: &Self, tol: T) -> bool {
        self.det(other).abs() <= tol * self.norm() * other.norm()
    }

    pub fn scaled(&self, lambda: T) -> Self {
        Self::new(self.u1 * lambda, self.u2 * lambda)
    }
}

/// `t -> (a t + b) / (c t + d)`, stored with `|ad - bc| = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Moebius<T> {
    pub a: T,
    pub b: T,
    pub c: T,
    pub d: T,
}

impl<T: Real> Moebius<T> {
    pub fn new(a: T, b: T, c: T, d: T) -> Result<Self> {
        let det = a * d - b * c;
        let scale = a.abs().max(b.abs()).max(c.abs()).max(d.abs());
        if !det.is_finite() || det == T::zero() || det.abs() <= T::epsilon() * scale * scale {
            return Err(Error::SingularTransform);
        }
        let k = T::one() / det.abs().sqrt();
        Ok(Self {
            a: a * k,
            b: b * k,
            c: c * k,
            d: d * k,
        })
    }

    pub fn identity() -> Self {
        Self {
            a: T::one(),
            b: T::zero(),
            c: T::zero(),
            d: T::one(),
        }
    }

    /// `(t - 1) / (t + 1)`, taking `(0, inf)` onto `(-1, 1)`.
    pub fn cayley() -> Self {
        Self::new(T::one(), -T::one(), T::one(), T::one()).expect("cayley map is regular")
    }

    pub fn det(&self) -> T {
        self.a * self.d - self.b * self.c
    }

    pub fn apply(&self, p: &ProjectivePoint<T>) -> ProjectivePoint<T> {
        ProjectivePoint::new(self.a * p.u1 + self.b * p.u2, self.c * p.u1 + self.d * p.u2)
    }

    /// Action on an affine value; `None` when the image is the point at infinity.
    pub fn apply_value(&self, t: T) -> Option<T> {
        self.apply(&ProjectivePoint::from_affine(t)).affine()
    }

    /// `self` after `other`.
    pub fn compose(&self, other: &Self) -> Self {
        let m = Self {
            a: self.a * other.a + self.b * other.c,
            b: self.a * other.b + self.b * other.d,
            c: self.c * other.a + self.d * other.c,
            d: self.c * other.b + self.d * other.d,
        };
        Self::new(m.a, m.b, m.c, m.d).unwrap_or(m)
    }

    pub fn invert(&self) -> Self {
        let det = self.det();
        Self {
            a: self.d / det,
            b: -self.b / det,
            c: -self.c / det,
            d: self.a / det,
        }
    }

    /// Largest coefficient difference after fixing the overall sign.
    pub fn distance(&self, other: &Self) -> T {
        let diff = |s: T| {
            (self.a - s * other.a)
                .abs()
                .max((self.b - s * other.b).abs())
                .max((self.c - s * other.c).abs())
                .max((self.d - s * other.d).abs())
        };
        diff(T::one()).min(diff(-T::one()))
    }
}

/// Poincaré distance on `I = (-1, 1)` for the metric `4 du^2 / (1 - u^2)^2`.
pub fn poincare_distance<T: Real>(u1: T, u2: T) -> Result<T> {
    for u in [u1, u2] {
        if !(u > -T::one() && u < T::one()) {
            return Err(Error::OutOfInterval(u.to_f64_lossy()));
        }
    }
    // 2 |atanh((u1 - u2) / (1 - u1 u2))| equals |log((1+u1)(1-u2) / ((1-u1)(1+u2)))|
    // and stays accurate for nearby points.
    let w = (u1 - u2) / (T::one() - u1 * u2);
    Ok(T::lit(2.0) * w.abs().atanh())
}

/// Smallest `|f'|` accepted by the Schwarzian estimators.
pub const CRITICAL_DERIVATIVE: f64 = 1e-10;

/// `f''' / f' - (3/2) (f'' / f')^2` by second-order central differences.
pub fn schwarzian<T: Real, F: Fn(T) -> T>(f: F, s: T, h: T) -> Result<T> {
    let two = T::lit(2.0);
    let f0 = f(s);
    let p1 = f(s + h);
    let m1 = f(s - h);
    let p2 = f(s + two * h);
    let m2 = f(s - two * h);
    let d1 = (p1 - m1) / (two * h);
    let d2 = (p1 - two * f0 + m1) / (h * h);
    let d3 = (p2 - two * p1 + two * m1 - m2) / (two * h * h * h);
    if !(d1.abs() > T::lit(CRITICAL_DERIVATIVE)) {
        return Err(Error::CriticalPoint(d1.to_f64_lossy()));
    }
    let r = d2 / d1;
    Ok(d3 / d1 - T::lit(1.5) * r * r)
}

/// Richardson-extrapolated Schwarzian `(4 S(h/2) - S(h)) / 3`, error `O(h^4)`.
pub fn schwarzian_richardson<T: Real, F: Fn(T) -> T>(f: F, s: T, h: T) -> Result<T> {
    let coarse = schwarzian(&f, s, h)?;
    let fine = schwarzian(&f, s, h * T::lit(0.5))?;
    Ok((T::lit(4.0) * fine - coarse) / T::lit(3.0))
}
