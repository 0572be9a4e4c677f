use serde::Serialize;

use super::shooting::{endpoint, null_direction, pull_inside, solve_residual, Chart};
use super::{interval_length, ChainLink, KobayashiChain, LinkSettings, SearchConfig};
use crate::error::Result;
use crate::manifold::MetricModel;
use crate::projective::ArcKind;
use crate::{max_abs_diff, Real};

/// Indices `i` of the shrinking-interval sequence emitted with a certificate.
pub const SHRINK_INDICES: [u32; 3] = [10, 100, 1000];

/// Largest `einstein_residual` accepted along certificate links.
pub const EINSTEIN_TOLERANCE: f64 = 1e-6;

/// `2 k log((1 + 1/i) / (1 - 1/i))`: length of `k` links each placed on `(-1/i, 1/i)`.
pub fn shrinking_interval_length(links: usize, i: u32) -> f64 {
    let u = 1.0 / f64::from(i);
    2.0 * links as f64 * ((1.0 + u) / (1.0 - u)).ln()
}

/// One member of the certificate sequence: link `j` is parametrized by
/// `s = mid_j + u i (s_b - s_a) / 2` on `I`, so `u = -1/i, 1/i` hit its ends.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShrinkStep {
    pub i: u32,
    pub intervals: Vec<(f64, f64)>,
    /// Affine parameters reached at `u = -1/i` and `u = 1/i`, per link.
    pub endpoints: Vec<(f64, f64)>,
    /// `sum rho_I` over the intervals.
    pub length: f64,
    /// The closed form [`shrinking_interval_length`].
    pub formula: f64,
}

/// A chain of links whose developments are full lines, so that the cost of
/// each can be driven to zero.
#[derive(Debug, Clone)]
pub struct ZeroCertificate<T> {
    pub chain: KobayashiChain<T>,
    pub link_kinds: Vec<ArcKind>,
    /// Turning of each development, `pi` for a full line.
    pub turning: Vec<f64>,
    /// Worst `einstein_residual` sampled along the links.
    pub einstein_residual: f64,
    pub sequence: Vec<ShrinkStep>,
    pub caveat: String,
}

impl<T: Real> ZeroCertificate<T> {
    pub fn step(&self, i: u32) -> Result<ShrinkStep> {
        shrink_step(&self.chain, i)
    }
}

pub(crate) fn shrink_step<T: Real>(chain: &KobayashiChain<T>, i: u32) -> Result<ShrinkStep> {
    let u = 1.0 / f64::from(i);
    let mut intervals = Vec::new();
    let mut endpoints = Vec::new();
    for link in chain.links() {
        let (sa, sb) = (link.s_start().to_f64_lossy(), link.s_end().to_f64_lossy());
        let mid = 0.5 * (sa + sb);
        let stretch = f64::from(i) * (sb - sa) * 0.5;
        intervals.push((-u, u));
        endpoints.push((mid - u * stretch, mid + u * stretch));
    }
    let length = interval_length(&intervals)?;
    Ok(ShrinkStep {
        i,
        length,
        formula: shrinking_interval_length(chain.len(), i),
        intervals,
        endpoints,
    })
}

/// Metric components as an orthonormal-frame scale at `x` (diagonal part only).
fn frame_scales<T: Real>(model: &MetricModel<T>, x: &[T]) -> Vec<T> {
    let g = model.metric_raw(x);
    (0..model.dimension())
        .map(|i| g[(i, i)].abs().sqrt())
        .collect()
}

/// Candidate link plans `(start, direction, span)` joining `x` to `y`.
pub(crate) type Plan<T> = Vec<(Vec<T>, Vec<T>, T)>;

/// A single null link from `x` to `y`, if `y` is on the null cone of `x`.
pub(crate) fn single_link_plan<T: Real>(
    model: &MetricModel<T>,
    x: &[T],
    y: &[T],
    settings: &LinkSettings<T>,
) -> Option<(Plan<T>, T)> {
    let n = model.dimension();
    let m = n - 1;
    let dx: Vec<T> = (0..m).map(|i| y[i] - x[i]).collect();
    let chart = Chart::new(&dx);
    let scales = frame_scales(model, x);
    let spatial_len = (0..m)
        .map(|i| (dx[i] * scales[i]).powi(2))
        .sum::<T>()
        .sqrt();
    let sign = if y[m] >= x[m] { T::one() } else { -T::one() };
    let mut z0 = vec![T::zero(); chart.dim()];
    z0.push(sign * spatial_len.max(T::lit(1e-3)));
    let budget = settings.budget;
    let mut residual = |z: &[T]| -> Option<Vec<T>> {
        let span = z[z.len() - 1];
        if span.abs() > budget {
            return None;
        }
        let d = null_direction(model, x, &chart.spatial(&z[..z.len() - 1])).ok()?;
        let e = endpoint(model, x, &d, span, settings).ok()?;
        Some(e.iter().zip(y).map(|(a, b)| *a - *b).collect())
    };
    let z0 = pull_inside(&mut residual, &z0, &[z0.len() - 1]);
    let (z, miss) = solve_residual(residual, &z0, 40, T::lit(1e-12));
    let d = null_direction(model, x, &chart.spatial(&z[..z.len() - 1])).ok()?;
    Some((vec![(x.to_vec(), d, z[z.len() - 1])], miss))
}

/// Two null links through a point on both cones, seeded by the flat
/// construction in an orthonormal frame at `x` and refined in the model.
fn two_link_plan<T: Real>(
    model: &MetricModel<T>,
    x: &[T],
    y: &[T],
    settings: &LinkSettings<T>,
) -> Option<(Plan<T>, T)> {
    let n = model.dimension();
    let m = n - 1;
    let scales = frame_scales(model, x);
    let big_x: Vec<T> = (0..m).map(|i| (y[i] - x[i]) * scales[i]).collect();
    let big_l = crate::norm(&big_x);
    let big_d = (y[m] - x[m]) * scales[m];
    // z = x + s1 (e, 1), y = z + s2 (-e, 1) with s1 = (L + D)/2, s2 = (D - L)/2.
    let e_frame: Vec<T> = if big_l > T::zero() {
        big_x.iter().map(|c| *c / big_l).collect()
    } else {
        (0..m)
            .map(|i| if i == 0 { T::one() } else { T::zero() })
            .collect()
    };
    let e_coord: Vec<T> = (0..m).map(|i| e_frame[i] / scales[i]).collect();
    let back: Vec<T> = e_coord.iter().map(|c| -*c).collect();
    let chart1 = Chart::new(&e_coord);
    let chart2 = Chart::new(&back);
    let s1 = (big_l + big_d) * T::lit(0.5);
    let s2 = (big_d - big_l) * T::lit(0.5);
    let k = chart1.dim();
    let mut z0 = vec![T::zero(); k];
    z0.push(s1);
    z0.extend(vec![T::zero(); k]);
    z0.push(s2);
    let budget = settings.budget;
    let run = |z: &[T]| -> Option<(Plan<T>, Vec<T>)> {
        let (w1, rest) = z.split_at(k);
        let (sp1, rest) = rest.split_at(1);
        let (w2, sp2) = rest.split_at(k);
        if sp1[0].abs() > budget || sp2[0].abs() > budget {
            return None;
        }
        let d1 = null_direction(model, x, &chart1.spatial(w1)).ok()?;
        let joint = endpoint(model, x, &d1, sp1[0], settings).ok()?;
        let d2 = null_direction(model, &joint, &chart2.spatial(w2)).ok()?;
        let end = endpoint(model, &joint, &d2, sp2[0], settings).ok()?;
        Some((vec![(x.to_vec(), d1, sp1[0]), (joint, d2, sp2[0])], end))
    };
    let mut residual = |z: &[T]| -> Option<Vec<T>> {
        let (_, end) = run(z)?;
        Some(end.iter().zip(y).map(|(a, b)| *a - *b).collect())
    };
    let z0 = pull_inside(&mut residual, &z0, &[k, 2 * k + 1]);
    let (z, miss) = solve_residual(residual, &z0, 40, T::lit(1e-12));
    let (plan, _) = run(&z)?;
    Some((plan, miss))
}

pub(crate) fn build_plan<T: Real>(
    model: &MetricModel<T>,
    plan: &Plan<T>,
    settings: &LinkSettings<T>,
) -> Result<Vec<ChainLink<T>>> {
    plan.iter()
        .map(|(start, dir, span)| ChainLink::shoot(model, start, dir, *span, settings))
        .collect()
}

/// Looks for a chain of null links from `x` to `y` along which the metric is
/// Einstein and every development is a full line. Such a chain has links of
/// arbitrarily small cost, so the pseudodistance vanishes (up to the
/// completeness caveat of budget-limited integration).
pub fn certify_zero<T: Real>(
    model: &MetricModel<T>,
    x: &[T],
    y: &[T],
    config: &SearchConfig,
) -> Result<Option<ZeroCertificate<T>>> {
    model.check_point(x)?;
    model.check_point(y)?;
    let settings = config.link_settings::<T>();
    let join = T::lit(config.join_tolerance);
    let caveat = format!(
        "conditional on completeness: links were integrated to |s| <= {} only",
        config.budget
    );
    if max_abs_diff(x, y) == T::zero() {
        let chain = KobayashiChain::trivial(x.to_vec());
        let sequence = SHRINK_INDICES
            .iter()
            .map(|&i| shrink_step(&chain, i))
            .collect::<Result<Vec<_>>>()?;
        return Ok(Some(ZeroCertificate {
            chain,
            link_kinds: Vec::new(),
            turning: Vec::new(),
            einstein_residual: 0.0,
            sequence,
            caveat,
        }));
    }
    let tol = T::lit(EINSTEIN_TOLERANCE);
    for p in [x, y] {
        if !(model.einstein_residual_at(p)? <= tol) {
            return Ok(None);
        }
    }
    let candidates = [
        single_link_plan(model, x, y, &settings),
        two_link_plan(model, x, y, &settings),
    ];
    for (plan, miss) in candidates.into_iter().flatten() {
        if !(miss <= join) {
            continue;
        }
        let Ok(links) = build_plan(model, &plan, &settings) else {
            continue;
        };
        if links.iter().any(|l| l.arc().kind != ArcKind::FullLine) {
            continue;
        }
        let mut worst = T::zero();
        for link in &links {
            for k in 0..8 {
                let s = link.s_start() + link.span() * T::lit(k as f64 / 7.0);
                let r = model
                    .einstein_residual_at(&link.trajectory().position(s))
                    .unwrap_or(T::infinity());
                worst = worst.max(r);
            }
        }
        if !(worst <= tol) {
            continue;
        }
        let chain = KobayashiChain::new(links, x.to_vec(), y.to_vec())?;
        if !(chain.mismatch() <= join) {
            continue;
        }
        let sequence = SHRINK_INDICES
            .iter()
            .map(|&i| shrink_step(&chain, i))
            .collect::<Result<Vec<_>>>()?;
        return Ok(Some(ZeroCertificate {
            link_kinds: chain.links().iter().map(|l| l.arc().kind).collect(),
            turning: chain
                .links()
                .iter()
                .map(|l| l.arc().turning().to_f64_lossy())
                .collect(),
            einstein_residual: worst.to_f64_lossy(),
            chain,
            sequence,
            caveat,
        }));
    }
    Ok(None)
}
