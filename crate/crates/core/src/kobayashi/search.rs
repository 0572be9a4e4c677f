use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::certify::{shrink_step, single_link_plan, ShrinkStep, ZeroCertificate};
use super::shooting::{endpoint, null_direction, pull_inside, solve_residual, Chart};
use super::{certify_zero, ChainLink, KobayashiChain, LinkRecord, LinkSettings, JOIN_TOLERANCE};
use crate::error::{point_f64, Result};
use crate::manifold::MetricModel;
use crate::optimize::nelder_mead;
use crate::projective::{ArcKind, SignConvention};
use crate::sampling::{derive_seed, rng, unit_vector};
use crate::{max_abs_diff, norm, Real};

/// Knobs of the chain search. Every result is reproducible from this value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchConfig {
    pub seed: u64,
    /// Multistarts per link count.
    pub starts: usize,
    /// Simplex iteration cap per start.
    pub iterations: usize,
    /// Affine parameter budget per link.
    pub budget: f64,
    pub k_max: usize,
    pub join_tolerance: f64,
    /// Weight of the terminal miss in the objective.
    pub penalty: f64,
    pub rtol: f64,
    pub atol: f64,
    pub convention: SignConvention,
    /// Initial simplex edge in chart coordinates (spans use it relative to the separation).
    pub simplex_step: f64,
    /// Gauss-Newton iterations for closing the last two links onto `y`.
    pub closing_iterations: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            starts: 32,
            iterations: 200,
            budget: 50.0,
            k_max: 4,
            join_tolerance: JOIN_TOLERANCE,
            penalty: 5.0,
            rtol: 1e-10,
            atol: 1e-12,
            convention: SignConvention::default(),
            simplex_step: 0.3,
            closing_iterations: 30,
        }
    }
}

impl SearchConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn link_settings<T: Real>(&self) -> LinkSettings<T> {
        LinkSettings {
            budget: T::lit(self.budget),
            rtol: T::lit(self.rtol),
            atol: T::lit(self.atol),
            convention: self.convention,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EstimateStatus {
    ZeroCertificate,
    UpperBound,
    Failed,
}

#[derive(Debug, Clone)]
pub struct DistanceEstimate<T> {
    /// Length of the witness chain (0 under a certificate).
    pub value: T,
    pub status: EstimateStatus,
    /// Worst joint gap of the witness.
    pub mismatch: T,
    pub chain: KobayashiChain<T>,
    pub certificate: Option<ZeroCertificate<T>>,
    /// Objective evaluations spent by the search.
    pub evaluations: usize,
    pub config: SearchConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertificateReport {
    pub link_kinds: Vec<ArcKind>,
    pub turning: Vec<f64>,
    pub einstein_residual: f64,
    pub sequence: Vec<ShrinkStep>,
    pub caveat: String,
}

/// JSON form of a [`DistanceEstimate`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistanceReport {
    pub model: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub value: f64,
    pub status: EstimateStatus,
    pub mismatch: f64,
    pub seed: u64,
    pub config: SearchConfig,
    pub chain: Vec<LinkRecord>,
    pub evaluations: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificate: Option<CertificateReport>,
}

impl<T: Real> ZeroCertificate<T> {
    fn reversed(&self) -> Self {
        let chain = self.chain.reversed();
        Self {
            link_kinds: self.link_kinds.iter().rev().copied().collect(),
            turning: self.turning.iter().rev().copied().collect(),
            sequence: self.sequence.iter().map(reverse_step).collect(),
            chain,
            ..self.clone()
        }
    }

    fn report(&self) -> CertificateReport {
        CertificateReport {
            link_kinds: self.link_kinds.clone(),
            turning: self.turning.clone(),
            einstein_residual: self.einstein_residual,
            sequence: self.sequence.clone(),
            caveat: self.caveat.clone(),
        }
    }
}

fn reverse_step(step: &ShrinkStep) -> ShrinkStep {
    ShrinkStep {
        intervals: step.intervals.iter().rev().map(|&(a, b)| (b, a)).collect(),
        endpoints: step.endpoints.iter().rev().map(|&(a, b)| (b, a)).collect(),
        ..step.clone()
    }
}

impl<T: Real> DistanceEstimate<T> {
    pub fn x(&self) -> &[T] {
        self.chain.from_point()
    }

    pub fn y(&self) -> &[T] {
        self.chain.to_point()
    }

    /// The same estimate read from `y` to `x`.
    pub fn reversed(&self) -> Self {
        Self {
            chain: self.chain.reversed(),
            certificate: self.certificate.as_ref().map(ZeroCertificate::reversed),
            ..self.clone()
        }
    }

    pub fn report(&self, model: &str) -> DistanceReport {
        DistanceReport {
            model: model.to_string(),
            x: point_f64(self.x()),
            y: point_f64(self.y()),
            value: self.value.to_f64_lossy(),
            status: self.status,
            mismatch: self.mismatch.to_f64_lossy(),
            seed: self.config.seed,
            config: self.config,
            chain: self.chain.records(),
            evaluations: self.evaluations,
            certificate: self.certificate.as_ref().map(ZeroCertificate::report),
        }
    }
}

/// A finished chain together with the search coordinates that produced it.
#[derive(Debug, Clone)]
struct Candidate<T> {
    feasible: bool,
    length: T,
    score: T,
    mismatch: T,
    k: usize,
    params: Vec<T>,
    links: Vec<ChainLink<T>>,
}

fn cmp_real<T: Real>(a: T, b: T) -> Ordering {
    a.partial_cmp(&b).unwrap_or(Ordering::Equal)
}

/// Feasible first, then value, then fewer links, then smaller parameters.
fn rank<T: Real>(a: &Candidate<T>, b: &Candidate<T>) -> Ordering {
    b.feasible
        .cmp(&a.feasible)
        .then_with(|| {
            if a.feasible {
                cmp_real(a.length, b.length)
            } else {
                cmp_real(a.score, b.score)
            }
        })
        .then_with(|| a.k.cmp(&b.k))
        .then_with(|| {
            a.params
                .iter()
                .zip(&b.params)
                .map(|(p, q)| cmp_real(*p, *q))
                .find(|o| *o != Ordering::Equal)
                .unwrap_or(Ordering::Equal)
        })
}

/// Problem data shared by every start.
struct Problem<'a, T> {
    model: &'a MetricModel<T>,
    x: &'a [T],
    y: &'a [T],
    settings: LinkSettings<T>,
    config: &'a SearchConfig,
    /// Separation of `x` and `y` in an orthonormal frame at `x`.
    scale: T,
}

/// Per-start frame: chart bases for links `1..k-1` and the free spans.
struct Start<T> {
    k: usize,
    charts: Vec<Chart<T>>,
    params0: Vec<T>,
    steps: Vec<T>,
}

fn frame_split<T: Real>(model: &MetricModel<T>, p: &[T], y: &[T]) -> (Vec<T>, T, Vec<T>) {
    let g = model.metric_raw(p);
    let n = model.dimension();
    let scales: Vec<T> = (0..n).map(|i| g[(i, i)].abs().sqrt()).collect();
    let big_y: Vec<T> = (0..n - 1).map(|i| (y[i] - p[i]) * scales[i]).collect();
    let d = (y[n - 1] - p[n - 1]) * scales[n - 1];
    (big_y, d, scales)
}

impl<'a, T: Real> Problem<'a, T> {
    fn toward_y(&self) -> Vec<T> {
        let m = self.model.dimension() - 1;
        (0..m).map(|i| self.y[i] - self.x[i]).collect()
    }

    fn start(&self, k: usize, index: usize) -> Start<T> {
        let m = self.model.dimension() - 1;
        let mut r = rng(derive_seed(
            self.config.seed,
            ((k as u64) << 32) | index as u64,
        ));
        let mut charts = Vec::new();
        for j in 0..k.saturating_sub(1) {
            let base = if index == 0 && j == 0 {
                self.toward_y()
            } else {
                unit_vector::<T, _>(&mut r, m)
            };
            charts.push(Chart::new(&base));
        }
        let cd = charts.first().map_or(0, Chart::dim);
        let step = T::lit(self.config.simplex_step);
        let mut params0 = vec![T::zero(); cd * charts.len()];
        let mut steps = vec![step; params0.len()];
        for _ in 0..k.saturating_sub(2) {
            let u: f64 = rand::Rng::gen_range(&mut r, -1.0..1.0);
            params0.push(self.scale * T::lit(u));
            steps.push(self.scale * step);
        }
        if k == 1 {
            let base = if index == 0 {
                self.toward_y()
            } else {
                unit_vector::<T, _>(&mut r, m)
            };
            charts.push(Chart::new(&base));
        }
        Start {
            k,
            charts,
            params0,
            steps,
        }
    }

    /// Builds the chain for one parameter vector; the last two spans and the
    /// last direction are solved for so that the chain ends at `y`.
    fn evaluate(&self, start: &Start<T>, params: &[T]) -> Option<Candidate<T>> {
        let k = start.k;
        let model = self.model;
        let budget = self.settings.budget;
        let plan = if k == 1 {
            let chart = &start.charts[0];
            let (big_y, d, _) = frame_split(model, self.x, self.y);
            let sign = if d >= T::zero() { T::one() } else { -T::one() };
            let mut z0 = vec![T::zero(); chart.dim()];
            z0.push(sign * norm(&big_y).max(T::lit(1e-3)));
            let mut residual = |z: &[T]| -> Option<Vec<T>> {
                let span = z[z.len() - 1];
                if span.abs() > budget {
                    return None;
                }
                let dir = null_direction(model, self.x, &chart.spatial(&z[..z.len() - 1])).ok()?;
                let e = endpoint(model, self.x, &dir, span, &self.settings).ok()?;
                Some(e.iter().zip(self.y).map(|(a, b)| *a - *b).collect())
            };
            let z0 = pull_inside(&mut residual, &z0, &[z0.len() - 1]);
            let (z, _) =
                solve_residual(residual, &z0, self.config.closing_iterations, T::lit(1e-12));
            let dir = null_direction(model, self.x, &chart.spatial(&z[..z.len() - 1])).ok()?;
            vec![(self.x.to_vec(), dir, z[z.len() - 1])]
        } else {
            let cd = start.charts[0].dim();
            let (ws, spans) = params.split_at(cd * (k - 1));
            let mut plan = Vec::with_capacity(k);
            let mut p = self.x.to_vec();
            for j in 0..k - 2 {
                if spans[j].abs() > budget {
                    return None;
                }
                let dir = null_direction(
                    model,
                    &p,
                    &start.charts[j].spatial(&ws[j * cd..(j + 1) * cd]),
                )
                .ok()?;
                let next = endpoint(model, &p, &dir, spans[j], &self.settings).ok()?;
                plan.push((p, dir, spans[j]));
                p = next;
            }
            let dir = null_direction(model, &p, &start.charts[k - 2].spatial(&ws[(k - 2) * cd..]))
                .ok()?;
            let (closing, sigma) = self.closing(&p, &dir)?;
            plan.push((p, dir, sigma));
            plan.push(closing);
            plan
        };
        let mut links = Vec::with_capacity(k);
        for (s, d, span) in &plan {
            if span.abs() > budget {
                return None;
            }
            links.push(ChainLink::shoot(model, s, d, *span, &self.settings).ok()?);
        }
        let chain = KobayashiChain::new(links, self.x.to_vec(), self.y.to_vec()).ok()?;
        let mismatch = chain.mismatch();
        let length = chain.total_cost();
        let score = length + T::lit(self.config.penalty) * mismatch;
        if !score.is_finite() {
            return None;
        }
        Some(Candidate {
            feasible: mismatch <= T::lit(self.config.join_tolerance),
            length,
            score,
            mismatch,
            k,
            params: params.to_vec(),
            links: chain.links().to_vec(),
        })
    }

    /// Solves `[span of link k-1, direction and span of link k]` from the
    /// joint `p` with fixed direction `dir`, seeded by the flat construction.
    fn closing(&self, p: &[T], dir: &[T]) -> Option<((Vec<T>, Vec<T>, T), T)> {
        let model = self.model;
        let budget = self.settings.budget;
        let (big_y, d, scales) = frame_split(model, p, self.y);
        let m = big_y.len();
        let e_raw: Vec<T> = (0..m).map(|i| dir[i] * scales[i]).collect();
        let el = norm(&e_raw);
        if !(el > T::zero()) {
            return None;
        }
        let e: Vec<T> = e_raw.iter().map(|c| *c / el).collect();
        let ey: T = e.iter().zip(&big_y).map(|(a, b)| *a * *b).sum();
        let yy: T = big_y.iter().map(|c| *c * *c).sum();
        let den = T::lit(2.0) * (ey - d);
        let sigma0 = if den.abs() > T::lit(1e-12) {
            (yy - d * d) / den
        } else {
            T::zero()
        };
        let span0 = d - sigma0;
        let f: Vec<T> = (0..m)
            .map(|i| {
                let c = big_y[i] - sigma0 * e[i];
                let c = if span0 != T::zero() { c / span0 } else { c };
                c / scales[i]
            })
            .collect();
        let chart = Chart::new(&f);
        let cd = chart.dim();
        let mut z0 = vec![sigma0];
        z0.extend(vec![T::zero(); cd]);
        z0.push(span0);
        let run = |z: &[T]| -> Option<(Vec<T>, Vec<T>, Vec<T>)> {
            let (sigma, span) = (z[0], z[cd + 1]);
            if sigma.abs() > budget || span.abs() > budget {
                return None;
            }
            let joint = endpoint(model, p, dir, sigma, &self.settings).ok()?;
            let d2 = null_direction(model, &joint, &chart.spatial(&z[1..=cd])).ok()?;
            let end = endpoint(model, &joint, &d2, span, &self.settings).ok()?;
            Some((joint, d2, end))
        };
        let mut residual = |z: &[T]| -> Option<Vec<T>> {
            let (_, _, end) = run(z)?;
            Some(end.iter().zip(self.y).map(|(a, b)| *a - *b).collect())
        };
        let z0 = pull_inside(&mut residual, &z0, &[0, cd + 1]);
        let (z, _) = solve_residual(residual, &z0, self.config.closing_iterations, T::lit(1e-12));
        let (joint, d2, _) = run(&z)?;
        Some(((joint, d2, z[cd + 1]), z[0]))
    }

    /// Simplex descent from one start; keeps the best feasible chain seen at
    /// any evaluation and otherwise the best penalized one.
    fn run_start(&self, k: usize, index: usize) -> (Option<Candidate<T>>, usize) {
        let start = self.start(k, index);
        let mut best_feasible: Option<Candidate<T>> = None;
        let mut best_any: Option<Candidate<T>> = None;
        let mut evaluations = 0usize;
        let objective = |params: &[T]| -> T {
            evaluations += 1;
            let Some(c) = self.evaluate(&start, params) else {
                return T::infinity();
            };
            let score = c.score;
            if c.feasible
                && best_feasible
                    .as_ref()
                    .is_none_or(|b| rank(&c, b) == Ordering::Less)
            {
                best_feasible = Some(c.clone());
            }
            if best_any
                .as_ref()
                .is_none_or(|b| cmp_real(c.score, b.score) == Ordering::Less)
            {
                best_any = Some(c);
            }
            score
        };
        let step = start.steps.clone();
        let mut objective = objective;
        let _ = nelder_mead_steps(
            &mut objective,
            &start.params0,
            &step,
            self.config.iterations,
        );
        (best_feasible.or(best_any), evaluations)
    }
}

/// Nelder-Mead with per-coordinate initial steps (scaled coordinates).
fn nelder_mead_steps<T: Real, F: FnMut(&[T]) -> T>(
    f: &mut F,
    x0: &[T],
    steps: &[T],
    iterations: usize,
) -> T {
    let unscale = |u: &[T]| -> Vec<T> { u.iter().zip(steps).map(|(a, s)| *a * *s).collect() };
    let u0: Vec<T> = x0.iter().zip(steps).map(|(a, s)| *a / *s).collect();
    let m = nelder_mead(
        |u: &[T]| f(&unscale(u)),
        &u0,
        T::one(),
        iterations,
        T::lit(1e-12),
    );
    m.value
}

/// Upper estimate of the pseudodistance between `x` and `y`.
///
/// A zero certificate is tried first. Otherwise chains of `1..=k_max` null
/// links are searched from `config.starts` seeded starts per link count; the
/// objective is chain length plus `penalty` times the terminal miss.
pub fn estimate_distance<T: Real>(
    model: &MetricModel<T>,
    x: &[T],
    y: &[T],
    config: &SearchConfig,
) -> Result<DistanceEstimate<T>> {
    model.check_point(x)?;
    model.check_point(y)?;
    let flip = x
        .iter()
        .zip(y)
        .map(|(a, b)| cmp_real(*a, *b))
        .find(|o| *o != Ordering::Equal)
        == Some(Ordering::Greater);
    let (a, b) = if flip { (y, x) } else { (x, y) };
    let est = estimate_canonical(model, a, b, config)?;
    Ok(if flip { est.reversed() } else { est })
}

fn estimate_canonical<T: Real>(
    model: &MetricModel<T>,
    x: &[T],
    y: &[T],
    config: &SearchConfig,
) -> Result<DistanceEstimate<T>> {
    if let Some(cert) = certify_zero(model, x, y, config)? {
        return Ok(DistanceEstimate {
            value: T::zero(),
            status: EstimateStatus::ZeroCertificate,
            mismatch: cert.chain.mismatch(),
            chain: cert.chain.clone(),
            certificate: Some(cert),
            evaluations: 0,
            config: *config,
        });
    }
    let (big_y, d, _) = frame_split(model, x, y);
    let scale = norm(&big_y).max(d.abs()).max(T::lit(1e-3));
    let problem = Problem {
        model,
        x,
        y,
        settings: config.link_settings(),
        config,
        scale,
    };
    let jobs: Vec<(usize, usize)> = (1..=config.k_max.max(1))
        .flat_map(|k| (0..config.starts.max(1)).map(move |i| (k, i)))
        .collect();
    let results: Vec<(Option<Candidate<T>>, usize)> = jobs
        .par_iter()
        .map(|&(k, i)| problem.run_start(k, i))
        .collect();
    let evaluations = results.iter().map(|r| r.1).sum();
    let best = results.into_iter().filter_map(|r| r.0).reduce(|a, b| {
        if rank(&b, &a) == Ordering::Less {
            b
        } else {
            a
        }
    });
    Ok(match best {
        Some(c) => {
            let chain = KobayashiChain::new(c.links, x.to_vec(), y.to_vec())?;
            DistanceEstimate {
                value: c.length,
                status: if c.feasible {
                    EstimateStatus::UpperBound
                } else {
                    EstimateStatus::Failed
                },
                mismatch: c.mismatch,
                chain,
                certificate: None,
                evaluations,
                config: *config,
            }
        }
        None => DistanceEstimate {
            value: T::infinity(),
            status: EstimateStatus::Failed,
            mismatch: max_abs_diff(x, y),
            chain: KobayashiChain::trivial(x.to_vec()),
            certificate: None,
            evaluations,
            config: *config,
        },
    })
}

/// The single-link candidate on its own, without any search.
pub fn single_link_estimate<T: Real>(
    model: &MetricModel<T>,
    x: &[T],
    y: &[T],
    config: &SearchConfig,
) -> Result<Option<KobayashiChain<T>>> {
    let settings = config.link_settings();
    let Some((plan, miss)) = single_link_plan(model, x, y, &settings) else {
        return Ok(None);
    };
    if !(miss <= T::lit(config.join_tolerance)) {
        return Ok(None);
    }
    let links = super::certify::build_plan(model, &plan, &settings)?;
    Ok(Some(KobayashiChain::new(links, x.to_vec(), y.to_vec())?))
}

fn concat_certificates<T: Real>(
    a: &ZeroCertificate<T>,
    b: &ZeroCertificate<T>,
    chain: KobayashiChain<T>,
) -> Result<ZeroCertificate<T>> {
    let sequence = a
        .sequence
        .iter()
        .map(|s| shrink_step(&chain, s.i))
        .collect::<Result<Vec<_>>>()?;
    Ok(ZeroCertificate {
        link_kinds: a.link_kinds.iter().chain(&b.link_kinds).copied().collect(),
        turning: a.turning.iter().chain(&b.turning).copied().collect(),
        einstein_residual: a.einstein_residual.max(b.einstein_residual),
        sequence,
        caveat: a.caveat.clone(),
        chain,
    })
}

/// Tightens a square table of estimates (`estimates[i][j]` from point `i` to
/// point `j`) by concatenating witnesses through intermediate points until
/// the triangle inequality holds. Values never increase. Returns the number of
/// entries that improved by more than `tolerance`.
pub fn estimate_refine_triangle<T: Real>(
    estimates: &mut [Vec<DistanceEstimate<T>>],
    tolerance: T,
) -> Result<usize> {
    let n = estimates.len();
    let mut improved = 0;
    for z in 0..n {
        for i in 0..n {
            for j in 0..n {
                if i == j || i == z || j == z {
                    continue;
                }
                let (iz, zj) = (&estimates[i][z], &estimates[z][j]);
                if iz.status == EstimateStatus::Failed || zj.status == EstimateStatus::Failed {
                    continue;
                }
                let sum = iz.value + zj.value;
                let current = &estimates[i][j];
                let usable = current.status != EstimateStatus::Failed;
                if usable && !(sum < current.value) {
                    continue;
                }
                let chain = iz.chain.concat(&zj.chain);
                let mismatch = iz.mismatch.max(zj.mismatch);
                let (status, certificate) = match (&iz.certificate, &zj.certificate) {
                    (Some(a), Some(b)) => (
                        EstimateStatus::ZeroCertificate,
                        Some(concat_certificates(a, b, chain.clone())?),
                    ),
                    _ => (EstimateStatus::UpperBound, None),
                };
                if !usable || current.value - sum > tolerance {
                    improved += 1;
                }
                let evaluations = iz.evaluations + zj.evaluations;
                let config = current.config;
                estimates[i][j] = DistanceEstimate {
                    value: sum,
                    status,
                    mismatch,
                    chain,
                    certificate,
                    evaluations,
                    config,
                };
            }
        }
    }
    Ok(improved)
}
