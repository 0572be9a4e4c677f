use serde::{Deserialize, Serialize};

use super::{schwarzian_richardson, Moebius, ProjectivePoint};
use crate::error::{Error, Result};
use crate::geodesic::{
    integrate_branch, join_branches, shoot_checked, BranchSettings, GeodesicTrajectory, ShootSpec,
    TrajectoryEnd,
};
use crate::manifold::MetricModel;
use crate::ode::{self, DenseSegment, IntegrateOptions, Tolerances};
use crate::Real;

/// Sign in front of the Ricci term of the projective equation
/// `{p, s} = 2 kappa Ric(x', x') / (n - 2)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum SignConvention {
    /// `kappa = -1`.
    #[default]
    AsPublished,
    /// `kappa = +1`, the sign for which the equation is invariant under
    /// conformal rescaling with the usual Ricci convention.
    ConformallyInvariant,
}

impl SignConvention {
    pub fn kappa<T: Real>(self) -> T {
        match self {
            SignConvention::AsPublished => -T::one(),
            SignConvention::ConformallyInvariant => T::one(),
        }
    }
}

/// Largest `|Ric(x', x')| / (1 + |x'|^2)` accepted by the affine shortcut.
pub const SHORTCUT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum CompanionPath {
    /// Re-integrate geodesic and companion together from the base point.
    #[default]
    Coupled,
    /// Integrate the companion with `q` read from the trajectory's dense output.
    AlongTrajectory,
    /// `u1 = s - s0`, `u2 = 1`; only valid where `Ric(x', x')` vanishes.
    EinsteinShortcut,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectiveOptions<T> {
    pub convention: SignConvention,
    pub path: CompanionPath,
    pub rtol: T,
    pub atol: T,
    /// Tolerances for the short re-integrations behind `eval_precise`.
    pub precise_rtol: T,
    pub precise_atol: T,
}

impl<T: Real> Default for ProjectiveOptions<T> {
    fn default() -> Self {
        Self {
            convention: SignConvention::AsPublished,
            path: CompanionPath::Coupled,
            rtol: T::lit(1e-11),
            atol: T::lit(1e-13),
            precise_rtol: T::lit(1e-13),
            precise_atol: T::lit(1e-15),
        }
    }
}

impl<T: Real> ProjectiveOptions<T> {
    pub fn with_convention(mut self, convention: SignConvention) -> Self {
        self.convention = convention;
        self
    }

    pub fn with_path(mut self, path: CompanionPath) -> Self {
        self.path = path;
        self
    }
}

#[derive(Debug, Clone)]
enum Companion<T> {
    /// State `[x, v, u1, u1', u2, u2']`.
    Coupled(GeodesicTrajectory<T>),
    /// State `[u1, u1', u2, u2']`, ascending segments and nodes.
    Along {
        segments: Vec<DenseSegment<T>>,
        nodes: Vec<(T, Vec<T>)>,
    },
    Affine,
}

/// Homogeneous solution pair of `u'' + q u = 0` along a null geodesic, with
/// `q = kappa Ric(x', x') / (n - 2)`. The projective parameter is `p = u1 / u2`.
#[derive(Debug, Clone)]
pub struct HomogeneousParameter<T> {
    model: MetricModel<T>,
    source: GeodesicTrajectory<T>,
    companion: Companion<T>,
    options: ProjectiveOptions<T>,
    /// Row-vector recombination `(u1, u2) -> (u1, u2) C` of the raw solutions.
    basis: [[T; 2]; 2],
    s0: T,
    range: (T, T),
}

pub fn projective_parameter<T: Real>(
    model: &MetricModel<T>,
    trajectory: &GeodesicTrajectory<T>,
    s0: T,
) -> Result<HomogeneousParameter<T>> {
    projective_parameter_with(model, trajectory, s0, &ProjectiveOptions::default())
}

pub fn projective_parameter_with<T: Real>(
    model: &MetricModel<T>,
    trajectory: &GeodesicTrajectory<T>,
    s0: T,
    options: &ProjectiveOptions<T>,
) -> Result<HomogeneousParameter<T>> {
    let (lo, hi) = trajectory.s_range();
    if !(s0 >= lo && s0 <= hi) {
        return Err(Error::InvalidSpec(format!(
            "base point {} outside the trajectory range [{}, {}]",
            s0.to_f64_lossy(),
            lo.to_f64_lossy(),
            hi.to_f64_lossy()
        )));
    }
    if model.dimension() != trajectory.dimension() {
        return Err(Error::DimensionMismatch {
            expected: model.dimension(),
            got: trajectory.dimension(),
        });
    }
    let n = model.dimension();
    let kappa: T = options.convention.kappa();
    let scale = kappa / T::lit((n - 2) as f64);
    let start = [T::zero(), T::one(), T::one(), T::zero()];
    let (companion, range) = match options.path {
        CompanionPath::Coupled => {
            let spec = trajectory.spec().clone();
            let mut y0 = trajectory.state(s0)[..2 * n].to_vec();
            y0.extend_from_slice(&start);
            let mut rhs = |x: &[T], v: &[T], e: &[T], de: &mut [T]| -> bool {
                let Ok(ric) = model.ricci_along(x, v) else {
                    return false;
                };
                companion_rhs(scale * ric, e, de);
                true
            };
            let branch =
                |dir: T, reach: T, rhs: &mut dyn FnMut(&[T], &[T], &[T], &mut [T]) -> bool| {
                    let settings = BranchSettings {
                        tol: Tolerances {
                            rtol: options.rtol,
                            atol: options.atol,
                        },
                        min_step: spec.min_step,
                        max_steps: spec.max_steps,
                        reproject: spec.reproject,
                        reach,
                    };
                    integrate_branch(model, s0, &y0, dir, &settings, rhs)
                };
            let mut backward = branch(-T::one(), s0 - lo, &mut rhs);
            let mut forward = branch(T::one(), hi - s0, &mut rhs);
            // Completeness is a property of the geodesic, not of this re-integration.
            backward.end = TrajectoryEnd {
                s_last: backward.end.s_last,
                ..trajectory.minus_end().clone()
            };
            forward.end = TrajectoryEnd {
                s_last: forward.end.s_last,
                ..trajectory.plus_end().clone()
            };
            let joined = join_branches(model, spec, 4, backward, forward)?;
            let range = joined.s_range();
            (Companion::Coupled(joined), range)
        }
        CompanionPath::AlongTrajectory => {
            let mut rhs = |s: T, e: &[T], de: &mut [T]| -> bool {
                let y = trajectory.state(s);
                let Ok(ric) = model.ricci_along(&y[..n], &y[n..2 * n]) else {
                    return false;
                };
                companion_rhs(scale * ric, e, de);
                true
            };
            let mut opts = IntegrateOptions::new(0.0, 0.0);
            opts.tol = Tolerances {
                rtol: options.rtol,
                atol: options.atol,
            };
            opts.min_step = trajectory.spec().min_step * T::lit(1e-3);
            let back = ode::integrate(&mut rhs, s0, &start, lo, &opts);
            let fwd = ode::integrate(&mut rhs, s0, &start, hi, &opts);
            let mut nodes: Vec<(T, Vec<T>)> = back
                .segments
                .iter()
                .rev()
                .map(|seg| (seg.end(), seg.eval(seg.end())))
                .collect();
            nodes.push((s0, start.to_vec()));
            nodes.extend(
                fwd.segments
                    .iter()
                    .map(|seg| (seg.end(), seg.eval(seg.end()))),
            );
            let range = (back.reached, fwd.reached);
            let mut segments: Vec<DenseSegment<T>> = back.segments.into_iter().rev().collect();
            segments.extend(fwd.segments);
            if segments.is_empty() {
                return Err(Error::ImmediateExit);
            }
            (Companion::Along { segments, nodes }, range)
        }
        CompanionPath::EinsteinShortcut => {
            for (_, y) in trajectory.nodes() {
                let (x, v) = (&y[..n], &y[n..2 * n]);
                let ric = model.ricci_along(x, v)?;
                let scale = v.iter().fold(T::one(), |acc, c| acc + *c * *c);
                if ric.abs() > T::lit(SHORTCUT_TOLERANCE) * scale {
                    return Err(Error::InvalidSpec(format!(
                        "affine shortcut needs Ric(x', x') = 0, found {} along the geodesic",
                        ric.to_f64_lossy()
                    )));
                }
            }
            (Companion::Affine, (lo, hi))
        }
    };
    Ok(HomogeneousParameter {
        model: model.clone(),
        source: trajectory.clone(),
        companion,
        options: *options,
        basis: [[T::one(), T::zero()], [T::zero(), T::one()]],
        s0,
        range,
    })
}

/// Shoots the geodesic and its companion together in one pass, with the base
/// point at the start (`s0 = 0`). The geodesic carried by the result is the
/// coupled integration itself.
pub fn projective_shoot<T: Real>(
    model: &MetricModel<T>,
    spec: &ShootSpec<T>,
    convention: SignConvention,
) -> Result<HomogeneousParameter<T>> {
    let n = model.dimension();
    let mut seed = shoot_checked(model, spec)?;
    seed.extend_from_slice(&[T::zero(), T::one(), T::one(), T::zero()]);
    let scale = convention.kappa::<T>() / T::lit((n - 2) as f64);
    let mut rhs = |x: &[T], v: &[T], e: &[T], de: &mut [T]| -> bool {
        let Ok(ric) = model.ricci_along(x, v) else {
            return false;
        };
        companion_rhs(scale * ric, e, de);
        true
    };
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
    let backward = integrate_branch(model, T::zero(), &seed, -T::one(), &settings, &mut rhs);
    let forward = integrate_branch(model, T::zero(), &seed, T::one(), &settings, &mut rhs);
    let joined = join_branches(model, spec.clone(), 4, backward, forward)?;
    let range = joined.s_range();
    let options = ProjectiveOptions {
        convention,
        rtol: spec.rtol,
        atol: spec.atol,
        ..ProjectiveOptions::default()
    };
    Ok(HomogeneousParameter {
        model: model.clone(),
        source: joined.clone(),
        companion: Companion::Coupled(joined),
        options,
        basis: [[T::one(), T::zero()], [T::zero(), T::one()]],
        s0: T::zero(),
        range,
    })
}

fn companion_rhs<T: Real>(q: T, e: &[T], de: &mut [T]) {
    de[0] = e[1];
    de[1] = -q * e[0];
    de[2] = e[3];
    de[3] = -q * e[2];
}

impl<T: Real> HomogeneousParameter<T> {
    pub fn base_point(&self) -> T {
        self.s0
    }

    pub fn convention(&self) -> SignConvention {
        self.options.convention
    }

    pub fn path(&self) -> CompanionPath {
        self.options.path
    }

    pub fn model(&self) -> &MetricModel<T> {
        &self.model
    }

    /// The geodesic this parameter lives on.
    pub fn geodesic(&self) -> &GeodesicTrajectory<T> {
        &self.source
    }

    /// Parameter range covered by the companion solution.
    pub fn range(&self) -> (T, T) {
        self.range
    }

    pub fn minus_end(&self) -> &TrajectoryEnd<T> {
        self.source.minus_end()
    }

    pub fn plus_end(&self) -> &TrajectoryEnd<T> {
        self.source.plus_end()
    }

    fn clamp(&self, s: T) -> T {
        s.max(self.range.0).min(self.range.1)
    }

    /// Raw `(u1, u1', u2, u2')` before recombination.
    fn raw(&self, s: T) -> [T; 4] {
        let s = self.clamp(s);
        match &self.companion {
            Companion::Coupled(traj) => {
                let n = traj.dimension();
                let y = traj.state(s);
                [y[2 * n], y[2 * n + 1], y[2 * n + 2], y[2 * n + 3]]
            }
            Companion::Along { segments, .. } => {
                let idx = segments.partition_point(|seg| seg.hi() < s);
                let y = segments[idx.min(segments.len() - 1)].eval(s);
                [y[0], y[1], y[2], y[3]]
            }
            Companion::Affine => [s - self.s0, T::one(), T::one(), T::zero()],
        }
    }

    fn combine(&self, r: [T; 4]) -> [T; 4] {
        let c = &self.basis;
        [
            r[0] * c[0][0] + r[2] * c[1][0],
            r[1] * c[0][0] + r[3] * c[1][0],
            r[0] * c[0][1] + r[2] * c[1][1],
            r[1] * c[0][1] + r[3] * c[1][1],
        ]
    }

    /// `(u1, u1', u2, u2')` at `s` from dense output.
    pub fn eval(&self, s: T) -> [T; 4] {
        self.combine(self.raw(s))
    }

    pub fn point(&self, s: T) -> ProjectivePoint<T> {
        let u = self.eval(s);
        ProjectivePoint::new(u[0], u[2])
    }

    /// `p(s) = u1 / u2`; `None` at a pole.
    pub fn value(&self, s: T) -> Option<T> {
        self.point(s).affine()
    }

    pub fn wronskian_at(&self, s: T) -> T {
        let u = self.eval(s);
        u[1] * u[2] - u[0] * u[3]
    }

    /// Geodesic position and velocity at `s`.
    pub fn geodesic_state(&self, s: T) -> Vec<T> {
        let n = self.model.dimension();
        match &self.companion {
            Companion::Coupled(traj) => traj.state(self.clamp(s))[..2 * n].to_vec(),
            _ => self.source.state(s)[..2 * n].to_vec(),
        }
    }

    /// `q(s) = kappa Ric(x', x') / (n - 2)`.
    pub fn q_at(&self, s: T) -> Result<T> {
        let n = self.model.dimension();
        let y = self.geodesic_state(s);
        let ric = self.model.ricci_along(&y[..n], &y[n..])?;
        Ok(self.options.convention.kappa::<T>() * ric / T::lit((n - 2) as f64))
    }

    /// Right-hand side of the projective equation, `2 q(s)`.
    pub fn schwarzian_expected(&self, s: T) -> Result<T> {
        Ok(T::lit(2.0) * self.q_at(s)?)
    }

    /// Parameters of the companion's accepted nodes, ascending.
    pub fn node_parameters(&self) -> Vec<T> {
        match &self.companion {
            Companion::Coupled(traj) => traj.nodes().iter().map(|(s, _)| *s).collect(),
            Companion::Along { nodes, .. } => nodes.iter().map(|(s, _)| *s).collect(),
            Companion::Affine => self.source.nodes().iter().map(|(s, _)| *s).collect(),
        }
    }

    /// `(u1, u1', u2, u2')` at `s` by a tight re-integration from the nearest node.
    pub fn eval_precise(&self, s: T) -> Result<[T; 4]> {
        let s = self.clamp(s);
        let n = self.model.dimension();
        let mut opts = IntegrateOptions::new(0.0, 0.0);
        opts.tol = Tolerances {
            rtol: self.options.precise_rtol,
            atol: self.options.precise_atol,
        };
        let kappa: T = self.options.convention.kappa();
        let scale = kappa / T::lit((n - 2) as f64);
        let raw = match &self.companion {
            Companion::Affine => self.raw(s),
            Companion::Coupled(traj) => {
                let (s_node, y_node) = &traj.nodes()[traj.nearest_node(s)];
                let model = &self.model;
                let mut rhs = |_s: T, y: &[T], dy: &mut [T]| -> bool {
                    let (x, rest) = y.split_at(n);
                    let (v, e) = rest.split_at(n);
                    let (Ok(acc), Ok(ric)) =
                        (model.geodesic_acceleration(x, v), model.ricci_along(x, v))
                    else {
                        return false;
                    };
                    dy[..n].copy_from_slice(v);
                    dy[n..2 * n].copy_from_slice(&acc);
                    companion_rhs(scale * ric, e, &mut dy[2 * n..]);
                    true
                };
                let sol = ode::integrate(&mut rhs, *s_node, y_node, s, &opts);
                if !sol.completed {
                    return Err(Error::OutOfDomain {
                        point: crate::error::point_f64(&sol.y_end[..n]),
                    });
                }
                let y = sol.y_end;
                [y[2 * n], y[2 * n + 1], y[2 * n + 2], y[2 * n + 3]]
            }
            Companion::Along { nodes, .. } => {
                let idx = nodes.partition_point(|(ns, _)| *ns < s);
                let idx = if idx > 0
                    && (idx == nodes.len() || (s - nodes[idx - 1].0) < (nodes[idx].0 - s))
                {
                    idx - 1
                } else {
                    idx.min(nodes.len() - 1)
                };
                let (s_node, y_node) = &nodes[idx];
                let source = &self.source;
                let model = &self.model;
                let mut rhs = |s: T, e: &[T], de: &mut [T]| -> bool {
                    let y = source.state(s);
                    let Ok(ric) = model.ricci_along(&y[..n], &y[n..2 * n]) else {
                        return false;
                    };
                    companion_rhs(scale * ric, e, de);
                    true
                };
                let sol = ode::integrate(&mut rhs, *s_node, y_node, s, &opts);
                [sol.y_end[0], sol.y_end[1], sol.y_end[2], sol.y_end[3]]
            }
        };
        Ok(self.combine(raw))
    }

    pub fn value_precise(&self, s: T) -> Result<T> {
        let u = self.eval_precise(s)?;
        Ok(u[0] / u[2])
    }

    /// Finite-difference Schwarzian of `p` at `s` (Richardson-extrapolated, step `h`).
    pub fn schwarzian_measured(&self, s: T, h: T) -> Result<T> {
        let failed = std::cell::Cell::new(None);
        let value = schwarzian_richardson(
            |t| match self.value_precise(t) {
                Ok(v) => v,
                Err(e) => {
                    failed.set(Some(e));
                    T::nan()
                }
            },
            s,
            h,
        );
        if let Some(e) = failed.take() {
            return Err(e);
        }
        value
    }

    /// `(p, p', p'')` at the base point, from the homogeneous solution.
    pub fn normalization(&self) -> (T, T, T) {
        let u = self.eval(self.s0);
        let w = u[1] * u[2] - u[0] * u[3];
        let p = u[0] / u[2];
        let dp = w / (u[2] * u[2]);
        let ddp = -T::lit(2.0) * w * u[3] / (u[2] * u[2] * u[2]);
        (p, dp, ddp)
    }

    /// Largest `|W(s) - W(s0)|` over the nodes, relative to `|u1' u2| + |u1 u2'|`.
    pub fn wronskian_drift(&self) -> T {
        let w0 = self.wronskian_at(self.s0);
        let mut worst = T::zero();
        for s in self.node_parameters() {
            let u = self.eval(s);
            let w = u[1] * u[2] - u[0] * u[3];
            let scale = (u[1] * u[2]).abs() + (u[0] * u[3]).abs();
            worst = worst.max((w - w0).abs() / scale.max(T::min_positive_value()));
        }
        worst
    }

    /// Same solution space, renormalized so that `p(s1) = 0, p'(s1) = 1, p''(s1) = 0`.
    pub fn with_base(&self, s1: T) -> Result<Self> {
        let u = self.eval(s1);
        // Phi = [[u1, u2], [u1', u2']]; new basis C' = C Phi^-1 [[0, 1], [1, 0]].
        let det = u[0] * u[3] - u[2] * u[1];
        if det == T::zero() || !det.is_finite() {
            return Err(Error::SingularTransform);
        }
        let inv = [[u[3] / det, -u[2] / det], [-u[1] / det, u[0] / det]];
        let m = [[inv[0][1], inv[0][0]], [inv[1][1], inv[1][0]]];
        let c = &self.basis;
        let basis = [
            [
                c[0][0] * m[0][0] + c[0][1] * m[1][0],
                c[0][0] * m[0][1] + c[0][1] * m[1][1],
            ],
            [
                c[1][0] * m[0][0] + c[1][1] * m[1][0],
                c[1][0] * m[0][1] + c[1][1] * m[1][1],
            ],
        ];
        Ok(Self {
            basis,
            s0: s1,
            ..self.clone()
        })
    }

    /// Projective parameter `m o p`.
    pub fn transformed(&self, m: &Moebius<T>) -> Self {
        // [u1 : u2] -> [a u1 + b u2 : c u1 + d u2] is right multiplication by [[a, c], [b, d]].
        let t = [[m.a, m.c], [m.b, m.d]];
        let c = &self.basis;
        let basis = [
            [
                c[0][0] * t[0][0] + c[0][1] * t[1][0],
                c[0][0] * t[0][1] + c[0][1] * t[1][1],
            ],
            [
                c[1][0] * t[0][0] + c[1][1] * t[1][0],
                c[1][0] * t[0][1] + c[1][1] * t[1][1],
            ],
        ];
        Self {
            basis,
            ..self.clone()
        }
    }
}
