use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{HomogeneousParameter, Moebius, ProjectivePoint};
use crate::error::{Error, Result};
use crate::geodesic::{EndFlag, TrajectoryEnd};
use crate::Real;

/// Tolerance on the total turning `psi_plus - psi_minus` against `pi`.
pub const TURNING_TOLERANCE: f64 = 1e-8;

/// Shape of the image of a geodesic under its projective parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ArcKind {
    /// A proper sub-arc of the projective line; carries a finite distance.
    ProperArc,
    /// The whole line minus a point.
    FullLine,
    /// The parameter passes through every point, some of them twice.
    Wraps,
}

/// Image of `s -> [u1(s) : u2(s)]` as an angular interval `(psi_minus, psi_plus)`,
/// where `psi = atan2(u1, u2)` is lifted continuously along the curve.
#[derive(Debug, Clone)]
pub struct DevelopmentArc<T> {
    pub kind: ArcKind,
    pub psi_minus: T,
    pub psi_plus: T,
    /// `p` at the two ends; `None` is the point at infinity.
    pub p_minus: Option<T>,
    pub p_plus: Option<T>,
    /// Zeros of `u2` met along the integrated range.
    pub pole_count: usize,
    /// Set when an end was only integrated up to the affine budget.
    pub caveat: Option<String>,
    /// `+1` if `psi` increases with `s`, `-1` otherwise.
    orientation: T,
    /// Lifted `(s, psi)` with consecutive jumps below `pi / 4`.
    table: Vec<(T, T)>,
}

fn pi<T: Real>() -> T {
    T::lit(PI)
}

/// `x` reduced modulo `period` into `[0, period)`.
fn modulo<T: Real>(x: T, period: T) -> T {
    let r = x - (x / period).floor() * period;
    if r >= period {
        r - period
    } else {
        r
    }
}

/// `x` reduced into `(-period / 2, period / 2]`.
fn centered<T: Real>(x: T, period: T) -> T {
    let half = period * T::lit(0.5);
    let r = modulo(x + half, period) - half;
    if r <= -half {
        r + period
    } else {
        r
    }
}

impl<T: Real> DevelopmentArc<T> {
    pub fn turning(&self) -> T {
        self.psi_plus - self.psi_minus
    }

    fn angle_of(&self, p: &ProjectivePoint<T>) -> T {
        (self.orientation * p.u1).atan2(p.u2)
    }

    fn point_at(&self, psi: T) -> ProjectivePoint<T> {
        ProjectivePoint::new(self.orientation * psi.sin(), psi.cos())
    }

    pub fn minus_point(&self) -> ProjectivePoint<T> {
        self.point_at(self.psi_minus)
    }

    pub fn plus_point(&self) -> ProjectivePoint<T> {
        self.point_at(self.psi_plus)
    }

    /// Lifted angle of `param` at `s`, continuous in `s`.
    pub fn angle_at(&self, param: &HomogeneousParameter<T>, s: T) -> T {
        let k = self.table.partition_point(|(ts, _)| *ts < s);
        let k = if k == 0 {
            0
        } else if k >= self.table.len() || s - self.table[k - 1].0 < self.table[k].0 - s {
            k - 1
        } else {
            k
        };
        let anchor = self.table[k].1;
        anchor + centered(self.angle_of(&param.point(s)) - anchor, pi())
    }

    /// The lift of `p` inside `(psi_minus, psi_plus)` for a proper arc.
    pub fn lift(&self, p: &ProjectivePoint<T>) -> Result<T> {
        if !p.is_valid() {
            return Err(Error::PointOffArc);
        }
        let a = self.angle_of(p);
        let k = ((self.psi_minus - a) / pi()).ceil();
        let mut cand = a + k * pi();
        if cand <= self.psi_minus {
            cand = cand + pi();
        }
        if cand > self.psi_minus && cand < self.psi_plus {
            Ok(cand)
        } else {
            Err(Error::PointOffArc)
        }
    }

    /// Hilbert distance between two lifted angles inside the arc.
    pub fn distance_between_angles(&self, psi1: T, psi2: T) -> Result<T> {
        if self.kind != ArcKind::ProperArc {
            return Ok(T::zero());
        }
        for psi in [psi1, psi2] {
            if !(psi > self.psi_minus && psi < self.psi_plus) {
                return Err(Error::PointOffArc);
            }
        }
        let (lo, hi) = (self.psi_minus, self.psi_plus);
        let num = (psi1 - lo).sin() * (hi - psi2).sin();
        let den = (psi2 - lo).sin() * (hi - psi1).sin();
        Ok((num / den).ln().abs())
    }

    pub fn distance(&self, p1: &ProjectivePoint<T>, p2: &ProjectivePoint<T>) -> Result<T> {
        if self.kind != ArcKind::ProperArc {
            return Ok(T::zero());
        }
        self.distance_between_angles(self.lift(p1)?, self.lift(p2)?)
    }

    /// Cost of the stretch `[s1, s2]` of the geodesic behind `param`.
    pub fn segment_cost(&self, param: &HomogeneousParameter<T>, s1: T, s2: T) -> Result<T> {
        if self.kind != ArcKind::ProperArc {
            return Ok(T::zero());
        }
        let (lo, hi) = param.range();
        for s in [s1, s2] {
            if !(s >= lo && s <= hi) {
                return Err(Error::PointOffArc);
            }
        }
        self.distance_between_angles(self.angle_at(param, s1), self.angle_at(param, s2))
    }

    /// Image of the lifted angle `psi` in `I = (-1, 1)` under [`Self::embedding`].
    pub fn interval_coordinate(&self, psi: T) -> Result<T> {
        if self.kind != ArcKind::ProperArc || self.turning() >= pi() {
            return Err(Error::SingularTransform);
        }
        if !(psi > self.psi_minus && psi < self.psi_plus) {
            return Err(Error::PointOffArc);
        }
        let a = (psi - self.psi_minus).sin();
        let b = (self.psi_plus - psi).sin();
        Ok((a - b) / (a + b))
    }

    /// Linear fractional map taking the arc onto `I = (-1, 1)`.
    pub fn embedding(&self) -> Result<Moebius<T>> {
        if self.kind != ArcKind::ProperArc || self.turning() >= pi() {
            return Err(Error::SingularTransform);
        }
        let o = self.orientation;
        let (a1, a2) = (self.psi_minus.sin(), self.psi_minus.cos());
        let (b1, b2) = (self.psi_plus.sin(), self.psi_plus.cos());
        // [u1 : u2] -> [sin(psi - psi_minus) : sin(psi_plus - psi)] lands in (0, inf).
        let l = Moebius::new(a2 * o, -a1, -b2 * o, b1)?;
        Ok(Moebius::cayley().compose(&l))
    }
}

/// Angular image of the parameter over its whole range, with end limits.
pub fn development_arc<T: Real>(param: &HomogeneousParameter<T>) -> Result<DevelopmentArc<T>> {
    let orientation = if param.wronskian_at(param.base_point()) < T::zero() {
        -T::one()
    } else {
        T::one()
    };
    let angle = |s: T| {
        let p = param.point(s);
        (orientation * p.u1).atan2(p.u2)
    };
    let nodes = param.node_parameters();
    let mut table: Vec<(T, T)> = Vec::with_capacity(nodes.len());
    let limit = pi::<T>() * T::lit(0.25);
    let two_pi = pi::<T>() * T::lit(2.0);
    for &s in &nodes {
        let Some(&(s_prev, psi_prev)) = table.last() else {
            table.push((s, angle(s)));
            continue;
        };
        if s <= s_prev {
            continue;
        }
        // Walk from the previous node, halving the step until each jump is small.
        let mut stack = vec![s];
        let (mut at, mut psi_at) = (s_prev, psi_prev);
        while let Some(target) = stack.pop() {
            let jump = centered(angle(target) - psi_at, two_pi);
            if jump.abs() > limit
                && target - at > T::epsilon() * target.abs().max(T::one()) * T::lit(16.0)
            {
                stack.push(target);
                stack.push((at + target) * T::lit(0.5));
                continue;
            }
            psi_at = psi_at + jump;
            at = target;
            table.push((at, psi_at));
        }
    }
    if table.len() < 2 {
        return Err(Error::ImmediateExit);
    }
    let mut pole_count = 0;
    for w in table.windows(2) {
        let a = param.eval(w[0].0)[2];
        let b = param.eval(w[1].0)[2];
        if (a < T::zero() && b >= T::zero()) || (a > T::zero() && b <= T::zero()) {
            pole_count += 1;
        }
    }

    let minus_limit = end_limit(param, &table, false);
    let plus_limit = end_limit(param, &table, true);
    let ang = |p: &ProjectivePoint<T>| (orientation * p.u1).atan2(p.u2);
    let tiny = T::lit(1e-9);
    let (_, psi_first) = table[0];
    let (_, psi_last) = *table.last().expect("non-empty");
    let mut back = modulo(psi_first - ang(&minus_limit), pi());
    if back > pi::<T>() - tiny {
        back = back - pi();
    }
    let mut ahead = modulo(ang(&plus_limit) - psi_last, pi());
    if ahead > pi::<T>() - tiny {
        ahead = ahead - pi();
    }
    let psi_minus = psi_first - back;
    let psi_plus = psi_last + ahead;
    let turning = psi_plus - psi_minus;
    let tol = T::lit(TURNING_TOLERANCE);
    let both_budget = param.minus_end().flag == EndFlag::BudgetReached
        && param.plus_end().flag == EndFlag::BudgetReached;
    let kind = if turning > pi::<T>() + tol {
        ArcKind::Wraps
    } else if (turning - pi()).abs() <= tol && both_budget {
        ArcKind::FullLine
    } else {
        ArcKind::ProperArc
    };
    let budget = param.geodesic().spec().affine_budget.to_f64_lossy();
    let caveat = [param.minus_end(), param.plus_end()]
        .iter()
        .any(|e| e.flag == EndFlag::BudgetReached)
        .then(|| format!("ends flagged BudgetReached are taken as complete; only |s| <= {budget} was integrated"));
    // Angles within rounding of a pole are reported as infinity.
    let affine = |psi: T| {
        let (u1, u2) = (orientation * psi.sin(), psi.cos());
        (u2.abs() > T::lit(1e-12) * u1.abs()).then(|| u1 / u2)
    };
    Ok(DevelopmentArc {
        kind,
        psi_minus,
        psi_plus,
        p_minus: affine(psi_minus),
        p_plus: affine(psi_plus),
        pole_count,
        caveat,
        orientation,
        table,
    })
}

/// Limit of `[u1 : u2]` at one end of the range, from the local behaviour of `q`.
fn end_limit<T: Real>(
    param: &HomogeneousParameter<T>,
    table: &[(T, T)],
    plus: bool,
) -> ProjectivePoint<T> {
    let end: &TrajectoryEnd<T> = if plus {
        param.plus_end()
    } else {
        param.minus_end()
    };
    let infinite = end.flag == EndFlag::BudgetReached;
    let dir = if plus { T::one() } else { -T::one() };
    let base = param.base_point();
    let (s_last, _) = if plus {
        *table.last().expect("non-empty")
    } else {
        table[0]
    };
    // Finite ends are read off a little inside the exit, where the dense
    // solution is still accurate and the exit estimate is well resolved.
    let s2 = if infinite {
        s_last
    } else {
        let (lo, hi) = param.range();
        let edge = if plus { hi } else { lo };
        let reach = (end.s_limit - base).abs();
        let tau = (T::lit(1e-6) * reach).max(T::lit(10.0) * (end.s_limit - edge).abs());
        let s = end.s_limit - dir * tau;
        if dir * (s - base) > T::zero() {
            s
        } else {
            s_last
        }
    };
    let u = param.eval(s2);
    let raw = ProjectivePoint::new(u[0], u[2]);
    let Ok(q2) = param.q_at(s2) else {
        return raw;
    };
    let span = (s2 - base).abs().max((s2 - end.s_limit).abs());
    if (q2 * span * span).abs() < T::lit(1e-10) {
        return if infinite {
            ProjectivePoint::new(u[1], u[3])
        } else {
            let last = param.eval(s_last);
            ProjectivePoint::new(last[0], last[2])
        };
    }
    // Locate the singular point of an Euler-type fit q = c / (s - s*)^2.
    let s1 = if infinite {
        s2 - dir * (s2 - base).abs() * T::lit(0.5)
    } else {
        s2 - dir * (end.s_limit - s2).abs()
    };
    let fitted = match param.q_at(s1) {
        Ok(q1) if q1 * q2 > T::zero() => {
            let r = (q1 / q2).sqrt();
            if (r - T::one()).abs() < T::lit(1e-6) {
                if infinite && q2 < T::zero() {
                    // Constant q < 0: the growing exponential dominates.
                    let k = (-q2).sqrt();
                    return ProjectivePoint::new(dir * u[1] + k * u[0], dir * u[3] + k * u[2]);
                }
                None
            } else {
                let s_star = (r * s1 - s2) / (r - T::one());
                let ahead = dir * (s_star - s2) > T::zero();
                let behind = dir * (s_star - s1) < T::zero();
                (if infinite { behind } else { ahead }).then_some(s_star)
            }
        }
        _ => None,
    };
    let s_star = if infinite {
        match fitted {
            Some(s) => s,
            None => return raw,
        }
    } else {
        // Trust the fit only if it agrees with the bracketed exit.
        match fitted {
            Some(s) if (s - end.s_limit).abs() <= (end.s_limit - s2).abs() * T::lit(0.25) => s,
            _ => end.s_limit,
        }
    };
    let tau = (s2 - s_star).abs();
    if tau == T::zero() {
        return raw;
    }
    let sigma = if s2 > s_star { T::one() } else { -T::one() };
    let c = q2 * tau * tau;
    let disc = T::one() - T::lit(4.0) * c;
    if disc <= T::zero() {
        return raw;
    }
    let root = disc.sqrt();
    let r_plus = (T::one() + root) * T::lit(0.5);
    let r_minus = (T::one() - root) * T::lit(0.5);
    // u = A + B with A ~ tau^r_plus, B ~ tau^r_minus.
    let split = |v: T, dv: T| {
        let st = sigma * tau * dv;
        ((st - r_minus * v) / root, (r_plus * v - st) / root)
    };
    let (a1, b1) = split(u[0], u[1]);
    let (a2, b2) = split(u[2], u[3]);
    let limit = if infinite {
        ProjectivePoint::new(a1, a2)
    } else {
        ProjectivePoint::new(b1, b2)
    };
    if limit.is_valid() {
        limit
    } else {
        raw
    }
}

/// Hilbert distance between two points of a proper arc.
pub fn arc_distance<T: Real>(
    arc: &DevelopmentArc<T>,
    p1: &ProjectivePoint<T>,
    p2: &ProjectivePoint<T>,
) -> Result<T> {
    arc.distance(p1, p2)
}

/// Cost of the stretch `[s1, s2]` of the geodesic behind `param`.
pub fn segment_cost_on<T: Real>(param: &HomogeneousParameter<T>, s1: T, s2: T) -> Result<T> {
    development_arc(param)?.segment_cost(param, s1, s2)
}
