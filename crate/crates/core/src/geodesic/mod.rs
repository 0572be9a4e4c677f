//! Affinely parametrized null geodesics.
//!
//! A shoot integrates `x'' = -Gamma(x', x')` from `s = 0` in both parameter
//! directions with an adaptive 5(4) pair until the chart domain is left, the
//! step size collapses, or the affine budget is used up.

mod export;

pub use export::{
    sidecar_path, trajectory_csv, write_trajectory_csv, EndRecord, TrajectorySidecar,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifold::MetricModel;
use crate::ode::{self, DenseSegment, Dopri5, Tolerances};
use crate::Real;

/// Allowed `|g(v, v)| / max(1, |v|^2)` along a trajectory.
pub const NULL_DRIFT_BOUND: f64 = 1e-8;
/// Exit parameters are bisected to this width.
pub const EXIT_BRACKET: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct ShootSpec<T> {
    pub start: Vec<T>,
    pub direction: Vec<T>,
    pub rtol: T,
    pub atol: T,
    /// Largest `|s|` integrated in each direction.
    pub affine_budget: T,
    pub min_step: T,
    pub max_steps: usize,
    /// Relative tolerance on `g(direction, direction)` at the start.
    pub null_tolerance: T,
    /// Rescale the time component whenever the drift exceeds half the bound.
    pub reproject: bool,
}

impl<T: Real> ShootSpec<T> {
    pub fn new(start: Vec<T>, direction: Vec<T>) -> Self {
        Self {
            start,
            direction,
            rtol: T::lit(1e-10),
            atol: T::lit(1e-12),
            affine_budget: T::lit(50.0),
            min_step: T::lit(1e-10),
            max_steps: 200_000,
            null_tolerance: T::lit(crate::manifold::NULL_TOLERANCE),
            reproject: true,
        }
    }

    pub fn with_budget(mut self, budget: T) -> Self {
        self.affine_budget = budget;
        self
    }

    pub fn with_tolerances(mut self, rtol: T, atol: T) -> Self {
        self.rtol = rtol;
        self.atol = atol;
        self
    }

    /// Accepts any causal character and never re-projects (test fixtures).
    pub fn unconstrained(mut self) -> Self {
        self.null_tolerance = T::infinity();
        self.reproject = false;
        self
    }

    fn validate(&self, n: usize) -> Result<()> {
        if self.start.len() != n || self.direction.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: if self.start.len() != n {
                    self.start.len()
                } else {
                    self.direction.len()
                },
            });
        }
        let positive = |v: T| v > T::zero() && !v.is_nan();
        if !(positive(self.affine_budget)
            && positive(self.min_step)
            && positive(self.rtol)
            && positive(self.atol))
        {
            return Err(Error::InvalidSpec(
                "budget, minimum step and tolerances must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EndFlag {
    DomainExit,
    StepCollapse,
    BudgetReached,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryEnd<T> {
    pub flag: EndFlag,
    /// Parameter of the last accepted node.
    pub s_last: T,
    /// Best estimate of the end of the affine domain (the bisected exit for
    /// `DomainExit`, otherwise `s_last`).
    pub s_limit: T,
    pub exit_bracket: Option<(T, T)>,
    pub steps: usize,
    pub rejected: usize,
}

impl<T: Real> TrajectoryEnd<T> {
    pub fn incomplete(&self) -> bool {
        self.flag != EndFlag::BudgetReached
    }
}

/// Dense trajectory `s -> (x(s), x'(s))` plus optional co-integrated components.
#[derive(Debug, Clone)]
pub struct GeodesicTrajectory<T> {
    dimension: usize,
    extra: usize,
    /// Ascending in `s`.
    segments: Vec<DenseSegment<T>>,
    /// Accepted nodes `(s, state)`, ascending in `s`.
    nodes: Vec<(T, Vec<T>)>,
    /// Decreasing-`s` end, then increasing-`s` end.
    ends: [TrajectoryEnd<T>; 2],
    null_drift: T,
    reprojections: usize,
    model_label: String,
    spec: ShootSpec<T>,
}

/// Affine extent and completeness per end.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AffineDomain {
    pub s_minus: f64,
    pub s_plus: f64,
    /// Complete only up to the affine budget.
    pub past_complete: bool,
    pub future_complete: bool,
    pub budget: f64,
}

impl<T: Real> GeodesicTrajectory<T> {
    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn spec(&self) -> &ShootSpec<T> {
        &self.spec
    }

    pub fn model_label(&self) -> &str {
        &self.model_label
    }

    pub fn null_drift(&self) -> T {
        self.null_drift
    }

    pub fn reprojections(&self) -> usize {
        self.reprojections
    }

    /// End reached by decreasing `s`.
    pub fn minus_end(&self) -> &TrajectoryEnd<T> {
        &self.ends[0]
    }

    /// End reached by increasing `s`.
    pub fn plus_end(&self) -> &TrajectoryEnd<T> {
        &self.ends[1]
    }

    /// Range covered by dense output.
    pub fn s_range(&self) -> (T, T) {
        (self.ends[0].s_last, self.ends[1].s_last)
    }

    pub fn nodes(&self) -> &[(T, Vec<T>)] {
        &self.nodes
    }

    pub fn segments(&self) -> &[DenseSegment<T>] {
        &self.segments
    }

    /// Components carried after `[x, v]` in each state (4 for a coupled companion).
    pub fn extra_components(&self) -> usize {
        self.extra
    }

    fn segment(&self, s: T) -> &DenseSegment<T> {
        let idx = self.segments.partition_point(|seg| seg.hi() < s);
        &self.segments[idx.min(self.segments.len() - 1)]
    }

    /// Full dense state at `s` (clamped to the covered range).
    pub fn state(&self, s: T) -> Vec<T> {
        let (lo, hi) = self.s_range();
        let s = s.max(lo).min(hi);
        self.segment(s).eval(s)
    }

    pub fn state_derivative(&self, s: T) -> Vec<T> {
        let (lo, hi) = self.s_range();
        let s = s.max(lo).min(hi);
        self.segment(s).eval_derivative(s)
    }

    pub fn position(&self, s: T) -> Vec<T> {
        self.state(s)[..self.dimension].to_vec()
    }

    pub fn velocity(&self, s: T) -> Vec<T> {
        self.state(s)[self.dimension..2 * self.dimension].to_vec()
    }

    pub fn maximal_affine_domain(&self) -> AffineDomain {
        AffineDomain {
            s_minus: self.ends[0].s_limit.to_f64_lossy(),
            s_plus: self.ends[1].s_limit.to_f64_lossy(),
            past_complete: !self.ends[0].incomplete(),
            future_complete: !self.ends[1].incomplete(),
            budget: self.spec.affine_budget.to_f64_lossy(),
        }
    }

    /// Node-based index of the node nearest to `s`.
    pub(crate) fn nearest_node(&self, s: T) -> usize {
        let idx = self.nodes.partition_point(|(ns, _)| *ns < s);
        if idx == 0 {
            0
        } else if idx >= self.nodes.len() {
            self.nodes.len() - 1
        } else if (self.nodes[idx].0 - s).abs() < (s - self.nodes[idx - 1].0).abs() {
            idx
        } else {
            idx - 1
        }
    }
}

/// Free function form of [`GeodesicTrajectory::maximal_affine_domain`].
pub fn maximal_affine_domain<T: Real>(trajectory: &GeodesicTrajectory<T>) -> AffineDomain {
    trajectory.maximal_affine_domain()
}

/// Right-hand side of co-integrated components: `(x, v, e, de) -> ok`.
pub(crate) type ExtraRhs<'a, T> = dyn FnMut(&[T], &[T], &[T], &mut [T]) -> bool + 'a;

pub(crate) struct BranchSettings<T> {
    pub tol: Tolerances<T>,
    pub min_step: T,
    pub max_steps: usize,
    pub reproject: bool,
    /// Stop when `|s - s_start|` reaches this.
    pub reach: T,
}

pub(crate) struct Branch<T> {
    pub segments: Vec<DenseSegment<T>>,
    pub nodes: Vec<(T, Vec<T>)>,
    pub end: TrajectoryEnd<T>,
    pub max_drift: T,
    pub reprojections: usize,
}

pub(crate) fn null_drift_of<T: Real>(model: &MetricModel<T>, x: &[T], v: &[T]) -> T {
    let speed: T = v.iter().map(|c| *c * *c).sum();
    model.inner(x, v, v).abs() / speed.max(T::one())
}

/// Integrates one direction (`dir = +-1`) from `(s_start, y0)`.
pub(crate) fn integrate_branch<T: Real>(
    model: &MetricModel<T>,
    s_start: T,
    y0: &[T],
    dir: T,
    settings: &BranchSettings<T>,
    extra: &mut ExtraRhs<'_, T>,
) -> Branch<T> {
    let n = model.dimension();
    let dim = y0.len();
    let mut rhs = |_s: T, y: &[T], dy: &mut [T]| -> bool {
        let (x, rest) = y.split_at(n);
        let (v, e) = rest.split_at(n);
        let Ok(acc) = model.geodesic_acceleration(x, v) else {
            return false;
        };
        dy[..n].copy_from_slice(v);
        dy[n..2 * n].copy_from_slice(&acc);
        if dim > 2 * n {
            extra(x, v, e, &mut dy[2 * n..])
        } else {
            true
        }
    };
    let mut stepper = Dopri5::new(dim);
    let mut s = s_start;
    let mut y = y0.to_vec();
    let mut f0 = vec![T::zero(); dim];
    let mut branch = Branch {
        segments: Vec::new(),
        nodes: vec![(s, y.clone())],
        end: TrajectoryEnd {
            flag: EndFlag::StepCollapse,
            s_last: s,
            s_limit: s,
            exit_bracket: None,
            steps: 0,
            rejected: 0,
        },
        max_drift: null_drift_of(model, &y[..n], &y[n..2 * n]),
        reprojections: 0,
    };
    if !rhs(s, &y, &mut f0) {
        return branch;
    }
    let half_bound = T::lit(0.5 * NULL_DRIFT_BOUND);
    let mut h = ode::initial_step(&mut rhs, s, &y, &f0, dir, &settings.tol).min(settings.reach);
    let mut last_accepted = h;
    let mut rejected_last = false;
    loop {
        let travelled = (s - s_start).abs();
        let remaining = settings.reach - travelled;
        if remaining <= T::zero() {
            branch.end.flag = EndFlag::BudgetReached;
            break;
        }
        if branch.end.steps >= settings.max_steps {
            branch.end.flag = EndFlag::StepCollapse;
            break;
        }
        let last = h >= remaining;
        if last {
            h = remaining;
        }
        match stepper.try_step(&mut rhs, s, &y, &f0, dir * h, &settings.tol) {
            Some(trial) if trial.error <= T::one() => {
                branch.end.steps += 1;
                s = if last {
                    s_start + dir * settings.reach
                } else {
                    s + dir * h
                };
                y = trial.y1;
                f0 = trial.f1;
                last_accepted = h;
                branch.segments.push(trial.segment);
                let drift = null_drift_of(model, &y[..n], &y[n..2 * n]);
                branch.max_drift = branch.max_drift.max(drift);
                if settings.reproject && drift > half_bound {
                    if let Ok(v) = model.null_project_unchecked(&y[..n], &y[n..2 * n]) {
                        y[n..2 * n].copy_from_slice(&v);
                        branch.reprojections += 1;
                        if !rhs(s, &y, &mut f0) {
                            branch.nodes.push((s, y.clone()));
                            break;
                        }
                    }
                }
                branch.nodes.push((s, y.clone()));
                h = ode::next_step_size(h, trial.error, rejected_last);
                rejected_last = false;
            }
            Some(trial) => {
                branch.end.rejected += 1;
                h = ode::next_step_size(h, trial.error, true);
                rejected_last = true;
            }
            None => {
                branch.end.rejected += 1;
                h = h * T::lit(0.5);
                rejected_last = true;
            }
        }
        if h < settings.min_step {
            classify_collapse(
                model,
                s,
                &y,
                dir,
                settings.min_step,
                last_accepted,
                &mut branch.end,
            );
            break;
        }
    }
    branch.end.s_last = s;
    if branch.end.flag != EndFlag::DomainExit {
        branch.end.s_limit = s;
    }
    branch
}

/// Decides between `DomainExit` and `StepCollapse` by probing the domain
/// predicate along the tangent line, then bisects the exit parameter.
fn classify_collapse<T: Real>(
    model: &MetricModel<T>,
    s: T,
    y: &[T],
    dir: T,
    min_step: T,
    last_accepted: T,
    end: &mut TrajectoryEnd<T>,
) {
    let n = model.dimension();
    let x = &y[..n];
    let v = &y[n..2 * n];
    let ahead = |sigma: T| -> Vec<T> {
        x.iter()
            .zip(v)
            .map(|(a, b)| *a + dir * sigma * *b)
            .collect()
    };
    let limit = (T::lit(64.0) * last_accepted).max(T::lit(1e3) * min_step);
    let mut lo = T::zero();
    let mut probe = min_step;
    let mut hi = None;
    while probe <= limit {
        if !model.in_domain(&ahead(probe)) {
            hi = Some(probe);
            break;
        }
        lo = probe;
        probe = probe * T::lit(2.0);
    }
    end.s_last = s;
    let Some(mut hi) = hi else {
        end.flag = EndFlag::StepCollapse;
        end.s_limit = s;
        return;
    };
    // Half the target width leaves room for rounding in `s + dir * sigma`.
    let width = T::lit(0.5 * EXIT_BRACKET);
    while hi - lo > width {
        let mid = (lo + hi) * T::lit(0.5);
        if model.in_domain(&ahead(mid)) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    end.flag = EndFlag::DomainExit;
    let a = s + dir * lo;
    let b = s + dir * hi;
    end.exit_bracket = Some((a.min(b), a.max(b)));
    end.s_limit = (a + b) * T::lit(0.5);
}

/// Assembles a trajectory from a backward and a forward branch started at the same node.
pub(crate) fn join_branches<T: Real>(
    model: &MetricModel<T>,
    spec: ShootSpec<T>,
    extra: usize,
    backward: Branch<T>,
    forward: Branch<T>,
) -> Result<GeodesicTrajectory<T>> {
    if backward.segments.is_empty() && forward.segments.is_empty() {
        return Err(Error::ImmediateExit);
    }
    let mut segments: Vec<DenseSegment<T>> = backward.segments.into_iter().rev().collect();
    segments.extend(forward.segments);
    let mut nodes: Vec<(T, Vec<T>)> = backward.nodes.into_iter().rev().collect();
    nodes.extend(forward.nodes.into_iter().skip(1));
    Ok(GeodesicTrajectory {
        dimension: model.dimension(),
        extra,
        segments,
        nodes,
        null_drift: backward.max_drift.max(forward.max_drift),
        reprojections: backward.reprojections + forward.reprojections,
        ends: [backward.end, forward.end],
        model_label: model.label().to_string(),
        spec,
    })
}

/// Integrates the null geodesic through `spec.start` with initial velocity
/// `spec.direction` in both parameter directions.
pub fn shoot<T: Real>(
    model: &MetricModel<T>,
    spec: &ShootSpec<T>,
) -> Result<GeodesicTrajectory<T>> {
    let y0 = shoot_checked(model, spec)?;
    let settings = BranchSettings {
        tol: Tolerances {
            rtol: spec.rtol,
            atol: spec.atol,
        },
        min_step: spec.min_step,
        max_steps: spec.max_steps,
        reproject: spec.reproject,
        reach: spec.affine_budget,
    };
    let mut none = |_: &[T], _: &[T], _: &[T], _: &mut [T]| true;
    let backward = integrate_branch(model, T::zero(), &y0, -T::one(), &settings, &mut none);
    let forward = integrate_branch(model, T::zero(), &y0, T::one(), &settings, &mut none);
    join_branches(model, spec.clone(), 0, backward, forward)
}

/// Validates a shoot request and returns the initial state `[x, v]`.
pub(crate) fn shoot_checked<T: Real>(
    model: &MetricModel<T>,
    spec: &ShootSpec<T>,
) -> Result<Vec<T>> {
    let n = model.dimension();
    spec.validate(n)?;
    model.check_point(&spec.start)?;
    if !model.is_null(&spec.start, &spec.direction, spec.null_tolerance) {
        return Err(Error::NotNull {
            norm: model
                .inner(&spec.start, &spec.direction, &spec.direction)
                .to_f64_lossy(),
        });
    }
    if model
        .geodesic_acceleration(&spec.start, &spec.direction)
        .is_err()
    {
        return Err(Error::ImmediateExit);
    }
    let mut y0 = spec.start.clone();
    y0.extend_from_slice(&spec.direction);
    Ok(y0)
}

/// Anything that can report position, velocity and acceleration along a parameter.
pub trait CurveJet<T> {
    fn jet(&self, s: T) -> (Vec<T>, Vec<T>, Vec<T>);
}

impl<T: Real> CurveJet<T> for GeodesicTrajectory<T> {
    fn jet(&self, s: T) -> (Vec<T>, Vec<T>, Vec<T>) {
        let n = self.dimension;
        let y = self.state(s);
        let dy = self.state_derivative(s);
        (y[..n].to_vec(), y[n..2 * n].to_vec(), dy[n..2 * n].to_vec())
    }
}

/// A closed-form curve differentiated by central differences with step `h`.
pub struct SampledCurve<F> {
    pub curve: F,
    pub h: f64,
}

impl<T: Real, F: Fn(T) -> Vec<T>> CurveJet<T> for SampledCurve<F> {
    fn jet(&self, s: T) -> (Vec<T>, Vec<T>, Vec<T>) {
        let h = T::lit(self.h);
        let x = (self.curve)(s);
        let p = (self.curve)(s + h);
        let m = (self.curve)(s - h);
        let v = p.iter().zip(&m).map(|(a, b)| (*a - *b) / (h + h)).collect();
        let a = p
            .iter()
            .zip(&m)
            .zip(&x)
            .map(|((a, b), c)| (*a - T::lit(2.0) * *c + *b) / (h * h))
            .collect();
        (x, v, a)
    }
}

/// `max ||x'' + Gamma(x', x')||` over `count` evenly spaced samples of `[lo, hi]`.
pub fn curve_residual<T: Real, C: CurveJet<T>>(
    model: &MetricModel<T>,
    curve: &C,
    lo: T,
    hi: T,
    count: usize,
) -> Result<T> {
    let mut worst = T::zero();
    let count = count.max(1);
    for k in 0..count {
        let s = if count == 1 {
            (lo + hi) * T::lit(0.5)
        } else {
            lo + (hi - lo) * T::lit(k as f64 / (count - 1) as f64)
        };
        let (x, v, a) = curve.jet(s);
        let gamma = model.christoffel_at(&x)?;
        let g = gamma.contract(&v, &v);
        let r: T = a.iter().zip(&g).map(|(a, g)| (*a + *g) * (*a + *g)).sum();
        worst = worst.max(r.sqrt());
    }
    Ok(worst)
}

/// Geodesic residual of a trajectory's dense output over its covered range.
pub fn geodesic_residual<T: Real>(
    model: &MetricModel<T>,
    trajectory: &GeodesicTrajectory<T>,
    sample_count: usize,
) -> Result<T> {
    let (lo, hi) = trajectory.s_range();
    curve_residual(model, trajectory, lo, hi, sample_count)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NgcReport {
    pub holds: bool,
    /// Parameter where `|Ric(x', x')|` was largest, when above the tolerance.
    pub witness: Option<f64>,
    pub max_abs: f64,
    pub samples: usize,
}

/// Sample count used by [`ngc_along`].
pub const NGC_SAMPLES: usize = 512;

/// Parameters for curvature sampling: uniform on complete ends, geometrically
/// clustered toward incomplete ones.
pub fn sample_parameters<T: Real>(trajectory: &GeodesicTrajectory<T>, count: usize) -> Vec<T> {
    let (lo, hi) = trajectory.s_range();
    let mid = if lo <= T::zero() && hi >= T::zero() {
        T::zero()
    } else {
        (lo + hi) * T::lit(0.5)
    };
    let half = (count / 2).max(2);
    let mut out = Vec::with_capacity(2 * half);
    for (side, (end, edge)) in [(trajectory.minus_end(), lo), (trajectory.plus_end(), hi)]
        .into_iter()
        .enumerate()
    {
        let span = edge - mid;
        for k in 0..half {
            // The first half includes the midpoint, the second does not.
            let frac = if side == 0 {
                T::lit(k as f64 / (half - 1) as f64)
            } else {
                T::lit((k + 1) as f64 / half as f64)
            };
            let s = if end.incomplete() && span != T::zero() {
                // Distances to the end shrink geometrically down to 1e-9 of the span.
                let ratio = T::lit(1e-9).ln();
                edge - span * (ratio * frac).exp()
            } else {
                mid + span * frac
            };
            out.push(s.max(lo).min(hi));
        }
    }
    out.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    out.dedup();
    out
}

/// Null generic condition: `Ric(x', x') != 0` somewhere along the trajectory.
pub fn ngc_along<T: Real>(
    model: &MetricModel<T>,
    trajectory: &GeodesicTrajectory<T>,
    tol: f64,
) -> Result<NgcReport> {
    let params = sample_parameters(trajectory, NGC_SAMPLES);
    let mut best = (0.0f64, None);
    for &s in &params {
        let y = trajectory.state(s);
        let n = trajectory.dimension;
        let value = match model.ricci_along(&y[..n], &y[n..2 * n]) {
            Ok(v) => v.to_f64_lossy().abs(),
            Err(Error::OutOfDomain { .. }) | Err(Error::DegenerateMetric { .. }) => continue,
            Err(e) => return Err(e),
        };
        if value > best.0 {
            best = (value, Some(s.to_f64_lossy()));
        }
    }
    let holds = best.0 > tol;
    Ok(NgcReport {
        holds,
        witness: if holds { best.1 } else { None },
        max_abs: best.0,
        samples: params.len(),
    })
}

#[cfg(test)]
mod tests;
