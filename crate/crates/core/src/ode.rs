//! Dormand–Prince 5(4) with the Hairer dense output.
//!
//! The stepper is deliberately low level: drivers that need event handling
//! (domain exits, null re-projection) own the step loop and call
//! [`Dopri5::try_step`] / [`next_step_size`] directly. [`integrate`] is the
//! plain fixed-interval driver.

use crate::Real;

/// Error targets for the embedded error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances<T> {
    pub rtol: T,
    pub atol: T,
}

impl<T: Real> Tolerances<T> {
    pub fn new(rtol: f64, atol: f64) -> Self {
        Self {
            rtol: T::lit(rtol),
            atol: T::lit(atol),
        }
    }
}

/// Right-hand side `dy/ds = f(s, y)`; returns `false` when `y` cannot be
/// evaluated (out of domain, singular metric, ...).
pub trait Rhs<T> {
    fn eval(&mut self, s: T, y: &[T], dy: &mut [T]) -> bool;
}

impl<T, F: FnMut(T, &[T], &mut [T]) -> bool> Rhs<T> for F {
    fn eval(&mut self, s: T, y: &[T], dy: &mut [T]) -> bool {
        self(s, y, dy)
    }
}

/// Continuous extension over one accepted step `[s0, s0 + h]` (`h` may be negative).
#[derive(Debug, Clone, PartialEq)]
pub struct DenseSegment<T> {
    s0: T,
    h: T,
    dim: usize,
    /// `rcont1..rcont5` stored back to back.
    r: Vec<T>,
}

impl<T: Real> DenseSegment<T> {
    pub fn start(&self) -> T {
        self.s0
    }

    pub fn end(&self) -> T {
        self.s0 + self.h
    }

    pub fn lo(&self) -> T {
        self.start().min(self.end())
    }

    pub fn hi(&self) -> T {
        self.start().max(self.end())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn contains(&self, s: T) -> bool {
        s >= self.lo() && s <= self.hi()
    }

    fn theta(&self, s: T) -> T {
        (s - self.s0) / self.h
    }

    pub fn eval_into(&self, s: T, out: &mut [T]) {
        let th = self.theta(s);
        let th1 = T::one() - th;
        let d = self.dim;
        for i in 0..d {
            let r = |k: usize| self.r[k * d + i];
            out[i] = r(0) + th * (r(1) + th1 * (r(2) + th * (r(3) + th1 * r(4))));
        }
    }

    pub fn eval(&self, s: T) -> Vec<T> {
        let mut out = vec![T::zero(); self.dim];
        self.eval_into(s, &mut out);
        out
    }

    /// Derivative of the interpolant with respect to `s`.
    pub fn eval_derivative_into(&self, s: T, out: &mut [T]) {
        let th = self.theta(s);
        let th1 = T::one() - th;
        let d = self.dim;
        for i in 0..d {
            let r = |k: usize| self.r[k * d + i];
            let dd = r(3) + th1 * r(4);
            let c = r(2) + th * dd;
            let dc = dd - th * r(4);
            let b = r(1) + th1 * c;
            let db = -c + th1 * dc;
            out[i] = (b + th * db) / self.h;
        }
    }

    pub fn eval_derivative(&self, s: T) -> Vec<T> {
        let mut out = vec![T::zero(); self.dim];
        self.eval_derivative_into(s, &mut out);
        out
    }
}

/// Outcome of one attempted step.
#[derive(Debug, Clone)]
pub struct Trial<T> {
    pub y1: Vec<T>,
    pub f1: Vec<T>,
    /// Scaled RMS error; the step is acceptable when `<= 1`.
    pub error: T,
    pub segment: DenseSegment<T>,
}

const C: [f64; 6] = [0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 6] = [
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];
const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

/// Reusable stage storage for one system dimension.
#[derive(Debug, Clone)]
pub struct Dopri5<T> {
    dim: usize,
    k: Vec<Vec<T>>,
    tmp: Vec<T>,
}

impl<T: Real> Dopri5<T> {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            k: vec![vec![T::zero(); dim]; 7],
            tmp: vec![T::zero(); dim],
        }
    }

    /// Attempts a step of size `h` from `(s, y)` given `f0 = f(s, y)`.
    /// Returns `None` if any stage evaluation fails.
    pub fn try_step<F: Rhs<T>>(
        &mut self,
        f: &mut F,
        s: T,
        y: &[T],
        f0: &[T],
        h: T,
        tol: &Tolerances<T>,
    ) -> Option<Trial<T>> {
        let n = self.dim;
        self.k[0].copy_from_slice(f0);
        for stage in 1..7 {
            let row = &A[stage - 1];
            for i in 0..n {
                let mut acc = T::zero();
                for (j, &a) in row.iter().enumerate().take(stage) {
                    if a != 0.0 {
                        acc = acc + T::lit(a) * self.k[j][i];
                    }
                }
                self.tmp[i] = y[i] + h * acc;
            }
            if self.tmp.iter().any(|v| !v.is_finite()) {
                return None;
            }
            let rest = &mut self.k[stage..];
            if !f.eval(s + T::lit(C[stage - 1]) * h, &self.tmp, &mut rest[0]) {
                return None;
            }
            if rest[0].iter().any(|v| !v.is_finite()) {
                return None;
            }
        }
        // The last stage input is the 5th order solution (FSAL).
        let y1 = self.tmp.clone();
        let f1 = self.k[6].clone();

        let mut err_sq = T::zero();
        for i in 0..n {
            let e: T = (0..7).map(|j| T::lit(E[j]) * self.k[j][i]).sum::<T>() * h;
            let sc = tol.atol + tol.rtol * y[i].abs().max(y1[i].abs());
            err_sq = err_sq + (e / sc) * (e / sc);
        }
        let error = (err_sq / T::lit(n as f64)).sqrt();

        let mut r = vec![T::zero(); 5 * n];
        for i in 0..n {
            let ydiff = y1[i] - y[i];
            let bspl = h * f0[i] - ydiff;
            r[i] = y[i];
            r[n + i] = ydiff;
            r[2 * n + i] = bspl;
            r[3 * n + i] = ydiff - h * f1[i] - bspl;
            r[4 * n + i] = h * (0..7).map(|j| T::lit(D[j]) * self.k[j][i]).sum::<T>();
        }
        Some(Trial {
            y1,
            f1,
            error,
            segment: DenseSegment {
                s0: s,
                h,
                dim: n,
                r,
            },
        })
    }
}

/// Standard controller: `0.9 err^(-1/5)` clamped to `[0.2, 10]`, no growth after a rejection.
pub fn next_step_size<T: Real>(h: T, error: T, after_reject: bool) -> T {
    let fac = if error == T::zero() {
        T::lit(10.0)
    } else {
        (T::lit(0.9) * error.powf(T::lit(-0.2)))
            .max(T::lit(0.2))
            .min(T::lit(10.0))
    };
    let fac = if after_reject { fac.min(T::one()) } else { fac };
    h * fac
}

/// Hairer's starting step heuristic. Returns a magnitude (always positive).
pub fn initial_step<T: Real, F: Rhs<T>>(
    f: &mut F,
    s: T,
    y: &[T],
    f0: &[T],
    direction: T,
    tol: &Tolerances<T>,
) -> T {
    let n = y.len();
    let nf = T::lit(n as f64);
    let sc: Vec<T> = y.iter().map(|v| tol.atol + tol.rtol * v.abs()).collect();
    let rms = |v: &[T]| -> T {
        (v.iter()
            .zip(&sc)
            .map(|(a, s)| (*a / *s) * (*a / *s))
            .sum::<T>()
            / nf)
            .sqrt()
    };
    let d0 = rms(y);
    let d1 = rms(f0);
    let mut h0 = if d0 < T::lit(1e-5) || d1 < T::lit(1e-5) {
        T::lit(1e-6)
    } else {
        T::lit(0.01) * d0 / d1
    };
    let y1: Vec<T> = y
        .iter()
        .zip(f0)
        .map(|(a, b)| *a + direction * h0 * *b)
        .collect();
    let mut f1 = vec![T::zero(); n];
    if !f.eval(s + direction * h0, &y1, &mut f1) {
        return h0 * T::lit(1e-3);
    }
    let diff: Vec<T> = f1.iter().zip(f0).map(|(a, b)| *a - *b).collect();
    let d2 = rms(&diff) / h0;
    let big = d1.max(d2);
    let h1 = if big <= T::lit(1e-15) {
        (h0 * T::lit(1e-3)).max(T::lit(1e-6))
    } else {
        (T::lit(0.01) / big).powf(T::lit(0.2))
    };
    h0 = (T::lit(100.0) * h0).min(h1);
    h0
}

/// Result of [`integrate`].
#[derive(Debug, Clone)]
pub struct Solution<T> {
    /// Accepted steps in integration order.
    pub segments: Vec<DenseSegment<T>>,
    /// Parameter reached (equals the target on success).
    pub reached: T,
    pub y_end: Vec<T>,
    pub completed: bool,
    pub steps: usize,
    pub rejected: usize,
}

impl<T: Real> Solution<T> {
    /// Dense state at `s`, clamped to the integrated range.
    pub fn eval(&self, s: T) -> Vec<T> {
        segment_for(&self.segments, s).eval(s)
    }
}

/// Finds the segment containing `s` in a list ordered along the integration
/// direction (falls back to the nearest end segment).
pub fn segment_for<T: Real>(segments: &[DenseSegment<T>], s: T) -> &DenseSegment<T> {
    let forward = segments
        .first()
        .map(|seg| seg.h > T::zero())
        .unwrap_or(true);
    let idx = segments.partition_point(|seg| {
        if forward {
            seg.end() < s
        } else {
            seg.end() > s
        }
    });
    &segments[idx.min(segments.len() - 1)]
}

#[derive(Debug, Clone, Copy)]
pub struct IntegrateOptions<T> {
    pub tol: Tolerances<T>,
    pub max_steps: usize,
    pub min_step: T,
    pub max_step: T,
}

impl<T: Real> IntegrateOptions<T> {
    pub fn new(rtol: f64, atol: f64) -> Self {
        Self {
            tol: Tolerances::new(rtol, atol),
            max_steps: 100_000,
            min_step: T::lit(1e-14),
            max_step: T::infinity(),
        }
    }
}

/// Integrates from `s0` to `s1` (either direction). Stops early, with
/// `completed = false`, if the step size collapses or the step budget runs out.
pub fn integrate<T: Real, F: Rhs<T>>(
    f: &mut F,
    s0: T,
    y0: &[T],
    s1: T,
    opts: &IntegrateOptions<T>,
) -> Solution<T> {
    let n = y0.len();
    let dir = if s1 >= s0 { T::one() } else { -T::one() };
    let mut stepper = Dopri5::new(n);
    let mut s = s0;
    let mut y = y0.to_vec();
    let mut f0 = vec![T::zero(); n];
    let mut sol = Solution {
        segments: Vec::new(),
        reached: s0,
        y_end: y.clone(),
        completed: s0 == s1,
        steps: 0,
        rejected: 0,
    };
    if s0 == s1 || !f.eval(s, &y, &mut f0) {
        return sol;
    }
    let span = (s1 - s0).abs();
    let mut h = initial_step(f, s, &y, &f0, dir, &opts.tol)
        .min(opts.max_step)
        .min(span);
    let mut rejected_last = false;
    while sol.steps < opts.max_steps {
        let remaining = (s1 - s).abs();
        let last = h >= remaining;
        if last {
            h = remaining;
        }
        match stepper.try_step(f, s, &y, &f0, dir * h, &opts.tol) {
            Some(trial) if trial.error <= T::one() => {
                sol.steps += 1;
                s = if last { s1 } else { s + dir * h };
                y = trial.y1;
                f0 = trial.f1;
                let hn = next_step_size(h, trial.error, rejected_last);
                sol.segments.push(trial.segment);
                rejected_last = false;
                if last {
                    sol.completed = true;
                    break;
                }
                h = hn.min(opts.max_step);
            }
            Some(trial) => {
                sol.rejected += 1;
                rejected_last = true;
                h = next_step_size(h, trial.error, true);
            }
            None => {
                sol.rejected += 1;
                rejected_last = true;
                h = h * T::lit(0.5);
            }
        }
        if h < opts.min_step {
            break;
        }
    }
    sol.reached = s;
    sol.y_end = y;
    sol
}
