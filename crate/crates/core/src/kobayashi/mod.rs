//! Chains of projectively parametrized null geodesic links, their lengths, and
//! upper estimates of the conformal pseudodistance.

mod certify;
mod search;
mod shooting;

pub use certify::{
    certify_zero, shrinking_interval_length, ShrinkStep, ZeroCertificate, EINSTEIN_TOLERANCE,
    SHRINK_INDICES,
};
pub use search::{
    estimate_distance, estimate_refine_triangle, single_link_estimate, CertificateReport,
    DistanceEstimate, DistanceReport, EstimateStatus, SearchConfig,
};

use serde::{Deserialize, Serialize};

use crate::error::{point_f64, Error, Result};
use crate::geodesic::{curve_residual, null_drift_of, GeodesicTrajectory, ShootSpec};
use crate::manifold::{MetricModel, NULL_TOLERANCE};
use crate::projective::{
    development_arc, poincare_distance, projective_parameter_with, projective_shoot, ArcKind,
    DevelopmentArc, HomogeneousParameter, Moebius, ProjectiveOptions, SignConvention,
};
use crate::{max_abs_diff, Real};

/// Largest coordinate gap accepted between consecutive link endpoints.
pub const JOIN_TOLERANCE: f64 = 1e-6;

/// How a link's development sits inside `I = (-1, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "type")]
pub enum LinkEmbedding<T> {
    /// Proper arc carried onto `I` by `moebius`; the link runs from `a` to `b`.
    Interval { moebius: Moebius<T>, a: T, b: T },
    /// No embedding bounds the cost away from zero (full line, wrapping, or a
    /// development of turning exactly `pi`).
    Degenerate { arc: ArcKind },
}

/// Integration settings for building links by shooting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkSettings<T> {
    pub budget: T,
    pub rtol: T,
    pub atol: T,
    pub convention: SignConvention,
}

impl<T: Real> Default for LinkSettings<T> {
    fn default() -> Self {
        Self {
            budget: T::lit(50.0),
            rtol: T::lit(1e-10),
            atol: T::lit(1e-12),
            convention: SignConvention::default(),
        }
    }
}

/// One null geodesic stretch `s_start -> s_end` with its projective parameter.
#[derive(Debug, Clone)]
pub struct ChainLink<T> {
    param: HomogeneousParameter<T>,
    arc: DevelopmentArc<T>,
    s_start: T,
    s_end: T,
    embedding: LinkEmbedding<T>,
    cost: T,
}

impl<T: Real> ChainLink<T> {
    /// The stretch `[s_start, s_end]` (either order) of the geodesic behind `param`.
    pub fn new(param: HomogeneousParameter<T>, s_start: T, s_end: T) -> Result<Self> {
        let (lo, hi) = param.range();
        for s in [s_start, s_end] {
            if !(s >= lo && s <= hi) {
                return Err(Error::OutOfDomain {
                    point: point_f64(&param.geodesic().position(s)),
                });
            }
        }
        let arc = development_arc(&param)?;
        let degenerate = LinkEmbedding::Degenerate { arc: arc.kind };
        let (embedding, cost) = match arc.embedding() {
            Ok(moebius) => {
                let pa = arc.angle_at(&param, s_start);
                let pb = arc.angle_at(&param, s_end);
                let a = arc.interval_coordinate(pa)?;
                let b = arc.interval_coordinate(pb)?;
                let cost = if s_start == s_end {
                    T::zero()
                } else {
                    match poincare_distance(a, b) {
                        Ok(d) => d,
                        Err(_) => arc.distance_between_angles(pa, pb)?,
                    }
                };
                (LinkEmbedding::Interval { moebius, a, b }, cost)
            }
            Err(Error::SingularTransform) => (degenerate, T::zero()),
            Err(e) => return Err(e),
        };
        Ok(Self {
            param,
            arc,
            s_start,
            s_end,
            embedding,
            cost,
        })
    }

    /// Shoots from `start` along `direction` and keeps the stretch `[0, span]`.
    pub fn shoot(
        model: &MetricModel<T>,
        start: &[T],
        direction: &[T],
        span: T,
        settings: &LinkSettings<T>,
    ) -> Result<Self> {
        let budget = settings.budget.max(span.abs() * T::lit(1.25));
        let spec = ShootSpec::new(start.to_vec(), direction.to_vec())
            .with_budget(budget)
            .with_tolerances(settings.rtol, settings.atol);
        let param = projective_shoot(model, &spec, settings.convention)?;
        Self::new(param, T::zero(), span)
    }

    pub fn param(&self) -> &HomogeneousParameter<T> {
        &self.param
    }

    pub fn arc(&self) -> &DevelopmentArc<T> {
        &self.arc
    }

    pub fn trajectory(&self) -> &GeodesicTrajectory<T> {
        self.param.geodesic()
    }

    pub fn s_start(&self) -> T {
        self.s_start
    }

    pub fn s_end(&self) -> T {
        self.s_end
    }

    pub fn span(&self) -> T {
        self.s_end - self.s_start
    }

    pub fn start_point(&self) -> Vec<T> {
        self.trajectory().position(self.s_start)
    }

    pub fn end_point(&self) -> Vec<T> {
        self.trajectory().position(self.s_end)
    }

    pub fn start_direction(&self) -> Vec<T> {
        self.trajectory().velocity(self.s_start)
    }

    pub fn embedding(&self) -> &LinkEmbedding<T> {
        &self.embedding
    }

    /// `rho_I(a, b)`, or 0 for a degenerate development.
    pub fn cost(&self) -> T {
        self.cost
    }

    pub fn interval(&self) -> Option<(T, T)> {
        match self.embedding {
            LinkEmbedding::Interval { a, b, .. } => Some((a, b)),
            LinkEmbedding::Degenerate { .. } => None,
        }
    }

    /// The same stretch traversed the other way.
    pub fn reversed(&self) -> Self {
        let embedding = match self.embedding {
            LinkEmbedding::Interval { moebius, a, b } => LinkEmbedding::Interval {
                moebius,
                a: b,
                b: a,
            },
            other => other,
        };
        Self {
            s_start: self.s_end,
            s_end: self.s_start,
            embedding,
            ..self.clone()
        }
    }

    pub fn record(&self) -> LinkRecord {
        let interval = self.interval();
        LinkRecord {
            start: point_f64(&self.start_point()),
            direction: point_f64(&self.start_direction()),
            span: self.span().to_f64_lossy(),
            end: point_f64(&self.end_point()),
            kind: self.arc.kind,
            a: interval.map(|(a, _)| a.to_f64_lossy()),
            b: interval.map(|(_, b)| b.to_f64_lossy()),
            cost: self.cost.to_f64_lossy(),
        }
    }
}

/// Serializable description of a link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkRecord {
    pub start: Vec<f64>,
    pub direction: Vec<f64>,
    /// Affine parameter span in the model the link was built in.
    pub span: f64,
    pub end: Vec<f64>,
    pub kind: ArcKind,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub cost: f64,
}

/// `x = x_0, ..., x_k = y` joined by `k` links (`k = 0` only for `x = y`).
#[derive(Debug, Clone)]
pub struct KobayashiChain<T> {
    links: Vec<ChainLink<T>>,
    joints: Vec<Vec<T>>,
}

impl<T: Real> KobayashiChain<T> {
    pub fn trivial(x: Vec<T>) -> Self {
        Self {
            links: Vec::new(),
            joints: vec![x],
        }
    }

    /// Joints are `x`, the end point of every link but the last, and `y`.
    pub fn new(links: Vec<ChainLink<T>>, x: Vec<T>, y: Vec<T>) -> Result<Self> {
        if links.is_empty() {
            return Err(Error::InvalidChain(
                "a chain needs at least one link".into(),
            ));
        }
        let mut joints = vec![x];
        joints.extend(links[..links.len() - 1].iter().map(|l| l.end_point()));
        joints.push(y);
        Ok(Self { links, joints })
    }

    pub fn links(&self) -> &[ChainLink<T>] {
        &self.links
    }

    pub fn joints(&self) -> &[Vec<T>] {
        &self.joints
    }

    pub fn len(&self) -> usize {
        self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    pub fn from_point(&self) -> &[T] {
        &self.joints[0]
    }

    pub fn to_point(&self) -> &[T] {
        self.joints.last().expect("at least one joint")
    }

    /// Coordinate gap at each joint.
    pub fn joint_gaps(&self) -> Vec<T> {
        if self.links.is_empty() {
            return vec![T::zero()];
        }
        let k = self.links.len();
        let mut gaps = Vec::with_capacity(k + 1);
        gaps.push(max_abs_diff(&self.links[0].start_point(), &self.joints[0]));
        for j in 1..k {
            let end = self.links[j - 1].end_point();
            let gap = max_abs_diff(&end, &self.links[j].start_point())
                .max(max_abs_diff(&end, &self.joints[j]));
            gaps.push(gap);
        }
        gaps.push(max_abs_diff(
            &self.links[k - 1].end_point(),
            &self.joints[k],
        ));
        gaps
    }

    pub fn mismatch(&self) -> T {
        self.joint_gaps().into_iter().fold(T::zero(), T::max)
    }

    /// Sum of link costs without checking the joints.
    pub fn total_cost(&self) -> T {
        self.links.iter().map(|l| l.cost).sum()
    }

    pub fn reversed(&self) -> Self {
        Self {
            links: self.links.iter().rev().map(ChainLink::reversed).collect(),
            joints: self.joints.iter().rev().cloned().collect(),
        }
    }

    /// `self` followed by `other`; the shared joint keeps `self`'s end point.
    pub fn concat(&self, other: &Self) -> Self {
        let mut links = self.links.clone();
        links.extend(other.links.iter().cloned());
        let mut joints = self.joints.clone();
        joints.extend(other.joints.iter().skip(1).cloned());
        Self { links, joints }
    }

    pub fn records(&self) -> Vec<LinkRecord> {
        self.links.iter().map(ChainLink::record).collect()
    }
}

/// `L = sum rho_I(a_i, b_i)`; fails if a joint gap exceeds `join_tolerance`.
pub fn chain_length<T: Real>(chain: &KobayashiChain<T>, join_tolerance: T) -> Result<T> {
    let gap = chain.mismatch();
    if !(gap <= join_tolerance) {
        return Err(Error::InvalidChain(format!(
            "joint gap {:e} exceeds {:e}",
            gap.to_f64_lossy(),
            join_tolerance.to_f64_lossy()
        )));
    }
    Ok(chain.total_cost())
}

/// `sum rho_I(a_i, b_i)` for bare interval pairs.
pub fn interval_length<T: Real>(intervals: &[(T, T)]) -> Result<T> {
    intervals
        .iter()
        .map(|&(a, b)| poincare_distance(a, b))
        .sum()
}

/// Cheapest single-link cost between `trajectory(s1)` and `trajectory(s2)`.
pub fn segment_cost<T: Real>(
    model: &MetricModel<T>,
    trajectory: &GeodesicTrajectory<T>,
    s1: T,
    s2: T,
) -> Result<T> {
    segment_cost_with(model, trajectory, s1, s2, SignConvention::default())
}

pub fn segment_cost_with<T: Real>(
    model: &MetricModel<T>,
    trajectory: &GeodesicTrajectory<T>,
    s1: T,
    s2: T,
    convention: SignConvention,
) -> Result<T> {
    let (lo, hi) = trajectory.s_range();
    for s in [s1, s2] {
        if !(s >= lo && s <= hi) {
            return Err(Error::OutOfDomain {
                point: point_f64(&trajectory.position(s)),
            });
        }
    }
    if s1 == s2 {
        return Ok(T::zero());
    }
    let opts = ProjectiveOptions::default().with_convention(convention);
    let param = projective_parameter_with(model, trajectory, s1, &opts)?;
    Ok(ChainLink::new(param, s1, s2)?.cost())
}

/// Closest parameter on `trajectory` to `point`, if within `tolerance`.
fn locate<T: Real>(trajectory: &GeodesicTrajectory<T>, point: &[T], tolerance: T) -> Option<T> {
    let n = trajectory.dimension();
    let dist = |s: T| max_abs_diff(&trajectory.position(s), point);
    let nodes = trajectory.nodes();
    let (k, _) = nodes
        .iter()
        .enumerate()
        .map(|(k, (_, y))| (k, max_abs_diff(&y[..n], point)))
        .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal))?;
    let mut lo = nodes[k.saturating_sub(1)].0;
    let mut hi = nodes[(k + 1).min(nodes.len() - 1)].0;
    // Golden-section search on the bracketing node interval.
    let phi = T::lit(0.618_033_988_749_894_9);
    let mut c = hi - phi * (hi - lo);
    let mut d = lo + phi * (hi - lo);
    let (mut fc, mut fd) = (dist(c), dist(d));
    for _ in 0..200 {
        if hi - lo <= T::epsilon() * (lo.abs() + hi.abs() + T::one()) {
            break;
        }
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - phi * (hi - lo);
            fc = dist(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + phi * (hi - lo);
            fd = dist(d);
        }
    }
    let s = (lo + hi) * T::lit(0.5);
    (dist(s) <= tolerance).then_some(s)
}

/// Rebuilds a chain from link records in `model` (which may differ from the
/// model the records came from). Each link is re-shot from its recorded start
/// and cut where it passes its recorded end point.
pub fn rebuild_chain<T: Real>(
    model: &MetricModel<T>,
    x: &[T],
    y: &[T],
    records: &[LinkRecord],
    settings: &LinkSettings<T>,
    join_tolerance: T,
) -> Result<KobayashiChain<T>> {
    if records.is_empty() {
        return Ok(KobayashiChain::trivial(x.to_vec()));
    }
    let mut links = Vec::with_capacity(records.len());
    for (i, rec) in records.iter().enumerate() {
        let start: Vec<T> = rec.start.iter().map(|c| T::lit(*c)).collect();
        let end: Vec<T> = rec.end.iter().map(|c| T::lit(*c)).collect();
        let mut dir: Vec<T> = rec.direction.iter().map(|c| T::lit(*c)).collect();
        if !model.is_null(&start, &dir, T::lit(NULL_TOLERANCE)) {
            dir = model.null_project(&start, &dir)?;
        }
        let span = T::lit(rec.span);
        let budget = settings.budget.max(span.abs() * T::lit(4.0));
        let spec = ShootSpec::new(start, dir)
            .with_budget(budget)
            .with_tolerances(settings.rtol, settings.atol);
        let param = projective_shoot(model, &spec, settings.convention)?;
        let traj = param.geodesic();
        let s_end = if max_abs_diff(&traj.position(span), &end) <= join_tolerance {
            span
        } else {
            locate(traj, &end, join_tolerance).ok_or_else(|| {
                Error::InvalidChain(format!("link {i} does not reach its recorded end point"))
            })?
        };
        links.push(ChainLink::new(param, T::zero(), s_end)?);
    }
    KobayashiChain::new(links, x.to_vec(), y.to_vec())
}

/// Rotation plus translation of the spatial coordinates; `t` is left alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EuclideanMotion {
    /// Orthogonal `(n-1) x (n-1)` matrix, row-major.
    pub rotation: Vec<Vec<f64>>,
    pub translation: Vec<f64>,
}

impl EuclideanMotion {
    pub fn identity(spatial_dim: usize) -> Self {
        let rotation = (0..spatial_dim)
            .map(|i| {
                (0..spatial_dim)
                    .map(|j| if i == j { 1.0 } else { 0.0 })
                    .collect()
            })
            .collect();
        Self {
            rotation,
            translation: vec![0.0; spatial_dim],
        }
    }

    /// Rotation by `angle` in the `(i, j)` coordinate plane, then a translation.
    pub fn plane_rotation(
        spatial_dim: usize,
        i: usize,
        j: usize,
        angle: f64,
        translation: Vec<f64>,
    ) -> Self {
        let mut m = Self::identity(spatial_dim);
        let (s, c) = angle.sin_cos();
        m.rotation[i][i] = c;
        m.rotation[j][j] = c;
        m.rotation[i][j] = -s;
        m.rotation[j][i] = s;
        m.translation = translation;
        m
    }

    fn rotate(&self, v: &[f64]) -> Vec<f64> {
        self.rotation
            .iter()
            .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn apply_point(&self, x: &[f64]) -> Vec<f64> {
        let m = x.len() - 1;
        let mut out: Vec<f64> = self
            .rotate(&x[..m])
            .iter()
            .zip(&self.translation)
            .map(|(a, b)| a + b)
            .collect();
        out.push(x[m]);
        out
    }

    pub fn apply_vector(&self, v: &[f64]) -> Vec<f64> {
        let m = v.len() - 1;
        let mut out = self.rotate(&v[..m]);
        out.push(v[m]);
        out
    }

    pub fn transport(&self, record: &LinkRecord) -> LinkRecord {
        LinkRecord {
            start: self.apply_point(&record.start),
            direction: self.apply_vector(&record.direction),
            end: self.apply_point(&record.end),
            ..record.clone()
        }
    }
}

/// Image of `chain` under a spatial motion, rebuilt in `model`.
pub fn transport_chain<T: Real>(
    model: &MetricModel<T>,
    chain: &KobayashiChain<T>,
    motion: &EuclideanMotion,
    settings: &LinkSettings<T>,
    join_tolerance: T,
) -> Result<KobayashiChain<T>> {
    let lift = |x: &[T]| -> Vec<T> {
        motion
            .apply_point(&point_f64(x))
            .into_iter()
            .map(T::lit)
            .collect()
    };
    let records: Vec<LinkRecord> = chain
        .records()
        .iter()
        .map(|r| motion.transport(r))
        .collect();
    rebuild_chain(
        model,
        &lift(chain.from_point()),
        &lift(chain.to_point()),
        &records,
        settings,
        join_tolerance,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainTolerances {
    pub join: f64,
    pub geodesic_residual: f64,
    pub null_drift: f64,
    pub schwarzian: f64,
}

impl Default for ChainTolerances {
    fn default() -> Self {
        Self {
            join: JOIN_TOLERANCE,
            geodesic_residual: 1e-6,
            null_drift: 1e-8,
            schwarzian: 1e-5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinkCheck {
    pub index: usize,
    pub geodesic_residual: f64,
    pub null_drift: f64,
    pub schwarzian_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainReport {
    pub passed: bool,
    pub links: Vec<LinkCheck>,
    pub joint_gaps: Vec<f64>,
    /// One line per violated check, worst offender first within each kind.
    pub failures: Vec<String>,
}

/// Checks that every link is a null geodesic carrying a projective parameter
/// and that consecutive links meet.
pub fn validate_chain<T: Real>(
    model: &MetricModel<T>,
    chain: &KobayashiChain<T>,
    tolerances: &ChainTolerances,
) -> ChainReport {
    const SAMPLES: usize = 16;
    let mut links = Vec::new();
    let mut failures = Vec::new();
    for (index, link) in chain.links().iter().enumerate() {
        let (lo, hi) = (link.s_start.min(link.s_end), link.s_start.max(link.s_end));
        let traj = link.trajectory();
        let residual = curve_residual(model, traj, lo, hi, SAMPLES)
            .map(|r| r.to_f64_lossy())
            .unwrap_or(f64::INFINITY);
        let mut drift = 0.0f64;
        for k in 0..SAMPLES {
            let s = lo + (hi - lo) * T::lit(k as f64 / (SAMPLES - 1) as f64);
            let y = traj.state(s);
            let n = model.dimension();
            drift = drift.max(null_drift_of(model, &y[..n], &y[n..2 * n]).to_f64_lossy());
        }
        let mut schwarzian = 0.0f64;
        let (r_lo, r_hi) = link.param.range();
        let h = T::lit(1e-2);
        for frac in [0.25, 0.5, 0.75] {
            let s = lo + (hi - lo) * T::lit(frac);
            let s = s.max(r_lo + T::lit(2.0) * h).min(r_hi - T::lit(2.0) * h);
            let measured = link.param.schwarzian_measured(s, h);
            let expected = link.param.schwarzian_expected(s);
            let err = match (measured, expected) {
                (Ok(m), Ok(e)) => (m - e).abs().to_f64_lossy(),
                _ => f64::INFINITY,
            };
            schwarzian = schwarzian.max(err);
        }
        if !(residual <= tolerances.geodesic_residual) {
            failures.push(format!("link {index}: geodesic residual {residual:e}"));
        }
        if !(drift <= tolerances.null_drift) {
            failures.push(format!("link {index}: null drift {drift:e}"));
        }
        if !(schwarzian <= tolerances.schwarzian) {
            failures.push(format!("link {index}: Schwarzian residual {schwarzian:e}"));
        }
        links.push(LinkCheck {
            index,
            geodesic_residual: residual,
            null_drift: drift,
            schwarzian_residual: schwarzian,
        });
    }
    let joint_gaps: Vec<f64> = chain
        .joint_gaps()
        .iter()
        .map(|g| g.to_f64_lossy())
        .collect();
    for (j, gap) in joint_gaps.iter().enumerate() {
        if !(*gap <= tolerances.join) {
            failures.push(format!("joint {j}: gap {gap:e}"));
        }
    }
    ChainReport {
        passed: failures.is_empty(),
        links,
        joint_gaps,
        failures,
    }
}
