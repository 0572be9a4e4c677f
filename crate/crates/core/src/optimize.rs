//! Derivative-free minimization.

use crate::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum<T> {
    pub x: Vec<T>,
    pub value: T,
    pub evaluations: usize,
    pub iterations: usize,
}

/// Nelder–Mead with the standard coefficients (1, 2, 1/2, 1/2). Stops after
/// `max_iterations` or once the simplex values spread by less than `ftol`.
/// Ties keep the earlier vertex, so runs are reproducible.
pub fn nelder_mead<T: Real, F: FnMut(&[T]) -> T>(
    mut f: F,
    x0: &[T],
    step: T,
    max_iterations: usize,
    ftol: T,
) -> Minimum<T> {
    let n = x0.len();
    let mut evaluations = 0;
    let mut eval = |x: &[T], evaluations: &mut usize| {
        *evaluations += 1;
        let v = f(x);
        if v.is_nan() {
            T::infinity()
        } else {
            v
        }
    };
    if n == 0 {
        let value = eval(x0, &mut evaluations);
        return Minimum {
            x: Vec::new(),
            value,
            evaluations,
            iterations: 0,
        };
    }
    let mut simplex: Vec<(Vec<T>, T)> = Vec::with_capacity(n + 1);
    simplex.push((x0.to_vec(), eval(x0, &mut evaluations)));
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] = x[i] + step;
        let v = eval(&x, &mut evaluations);
        simplex.push((x, v));
    }
    let half = T::lit(0.5);
    let two = T::lit(2.0);
    let mut iterations = 0;
    while iterations < max_iterations {
        simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
        let best = simplex[0].1;
        let worst = simplex[n].1;
        if (worst - best).abs() <= ftol && worst.is_finite() {
            break;
        }
        iterations += 1;
        let centroid: Vec<T> = (0..n)
            .map(|j| simplex[..n].iter().map(|(x, _)| x[j]).sum::<T>() / T::lit(n as f64))
            .collect();
        let along = |t: T| -> Vec<T> {
            centroid
                .iter()
                .zip(&simplex[n].0)
                .map(|(c, w)| *c + t * (*w - *c))
                .collect()
        };
        let xr = along(-T::one());
        let fr = eval(&xr, &mut evaluations);
        if fr < simplex[0].1 {
            let xe = along(-two);
            let fe = eval(&xe, &mut evaluations);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
            continue;
        }
        let (xc, fc) = if fr < simplex[n].1 {
            let xc = along(-half);
            let fc = eval(&xc, &mut evaluations);
            (xc, fc)
        } else {
            let xc = along(half);
            let fc = eval(&xc, &mut evaluations);
            (xc, fc)
        };
        if fc < simplex[n].1.min(fr) {
            simplex[n] = (xc, fc);
            continue;
        }
        // Shrink toward the best vertex.
        let best_x = simplex[0].0.clone();
        for vertex in simplex.iter_mut().skip(1) {
            let x: Vec<T> = best_x
                .iter()
                .zip(&vertex.0)
                .map(|(b, v)| *b + half * (*v - *b))
                .collect();
            let v = eval(&x, &mut evaluations);
            *vertex = (x, v);
        }
    }
    simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
    let (x, value) = simplex.swap_remove(0);
    Minimum {
        x,
        value,
        evaluations,
        iterations,
    }
}
