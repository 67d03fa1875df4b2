//! Unconstrained maximization used by the M-steps and the parametric fit:
//! BFGS with central-difference gradients, and Nelder-Mead as a
//! derivative-free fallback.

use crate::error::{Error, Result};

/// Optimizer choice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Optimizer {
    QuasiNewtonNumericGrad,
    SimplexSearch,
}

#[derive(Debug, Clone)]
pub struct OptimResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Central-difference gradient with per-coordinate step `h = scale (1 + |x_i|)`.
pub fn numeric_gradient<F: Fn(&[f64]) -> f64>(f: &F, x: &[f64], scale: f64) -> Vec<f64> {
    let mut grad = vec![0.0; x.len()];
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        let h = scale * (1.0 + x[i].abs());
        probe[i] = x[i] + h;
        let fp = f(&probe);
        probe[i] = x[i] - h;
        let fm = f(&probe);
        probe[i] = x[i];
        grad[i] = (fp - fm) / (2.0 * h);
    }
    grad
}

/// Maximize `f` from `x0`. Returns the best point found; `converged` is
/// false when the gradient norm never dropped below `gtol`.
pub fn maximize<F: Fn(&[f64]) -> f64>(
    f: F,
    x0: &[f64],
    method: Optimizer,
    gtol: f64,
    max_iter: usize,
) -> Result<OptimResult> {
    match method {
        Optimizer::QuasiNewtonNumericGrad => bfgs_max(&f, x0, gtol, max_iter),
        Optimizer::SimplexSearch => nelder_mead_max(&f, x0, gtol, max_iter),
    }
}

fn bfgs_max<F: Fn(&[f64]) -> f64>(
    f: &F,
    x0: &[f64],
    gtol: f64,
    max_iter: usize,
) -> Result<OptimResult> {
    let n = x0.len();
    let neg = |x: &[f64]| -f(x);
    let grad_scale = 1e-6;
    let mut x = x0.to_vec();
    let mut fx = neg(&x);
    if !fx.is_finite() {
        return Err(Error::Numerical {
            context: "bfgs",
            detail: "objective non-finite at the starting point".into(),
        });
    }
    let mut g = numeric_gradient(&neg, &x, grad_scale);
    // inverse Hessian approximation
    let mut h_inv = identity(n);
    let mut iterations = 0;
    let mut converged = inf_norm(&g) < gtol;
    while iterations < max_iter && !converged {
        iterations += 1;
        // search direction d = -H g
        let mut d = vec![0.0; n];
        for i in 0..n {
            for j in 0..n {
                d[i] -= h_inv[i][j] * g[j];
            }
        }
        let mut slope: f64 = d.iter().zip(&g).map(|(di, gi)| di * gi).sum();
        if slope >= 0.0 {
            // not a descent direction, reset to steepest descent
            h_inv = identity(n);
            for i in 0..n {
                d[i] = -g[i];
            }
            slope = -g.iter().map(|v| v * v).sum::<f64>();
            if slope == 0.0 {
                converged = true;
                break;
            }
        }
        // backtracking Armijo line search
        let mut step = 1.0;
        let mut x_new = x.clone();
        let mut f_new;
        loop {
            for i in 0..n {
                x_new[i] = x[i] + step * d[i];
            }
            f_new = neg(&x_new);
            if f_new.is_finite() && f_new <= fx + 1e-4 * step * slope {
                break;
            }
            step *= 0.5;
            if step < 1e-14 {
                // no progress possible along this direction
                x_new.copy_from_slice(&x);
                f_new = fx;
                break;
            }
        }
        let g_new = numeric_gradient(&neg, &x_new, grad_scale);
        // BFGS update with curvature guard
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
        if sy > 1e-12 {
            let rho = 1.0 / sy;
            // H <- (I - rho s y') H (I - rho y s') + rho s s'
            let mut hy = vec![0.0; n];
            for i in 0..n {
                for j in 0..n {
                    hy[i] += h_inv[i][j] * y[j];
                }
            }
            let yhy: f64 = y.iter().zip(&hy).map(|(a, b)| a * b).sum();
            for i in 0..n {
                for j in 0..n {
                    h_inv[i][j] += rho * rho * (sy + yhy) * s[i] * s[j] / rho
                        - rho * (hy[i] * s[j] + s[i] * hy[j]);
                }
            }
        }
        let moved = s.iter().map(|v| v.abs()).fold(0.0, f64::max);
        x = x_new;
        fx = f_new;
        g = g_new;
        if inf_norm(&g) < gtol || moved < 1e-12 {
            converged = true;
        }
    }
    Ok(OptimResult { value: -fx, x, iterations, converged })
}

fn nelder_mead_max<F: Fn(&[f64]) -> f64>(
    f: &F,
    x0: &[f64],
    ftol: f64,
    max_iter: usize,
) -> Result<OptimResult> {
    let n = x0.len();
    let neg = |x: &[f64]| -f(x);
    // initial simplex around x0
    let mut simplex: Vec<Vec<f64>> = vec![x0.to_vec()];
    for i in 0..n {
        let mut v = x0.to_vec();
        v[i] += 0.1 * (1.0 + x0[i].abs());
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| neg(v)).collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical {
            context: "nelder-mead",
            detail: "objective non-finite on the initial simplex".into(),
        });
    }
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        iterations += 1;
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        let best = order[0];
        let worst = order[n];
        let second_worst = order[n - 1];
        if (values[worst] - values[best]).abs()
            <= ftol * (values[best].abs() + values[worst].abs() + 1e-30)
        {
            converged = true;
            break;
        }
        // centroid of all but the worst
        let mut centroid = vec![0.0; n];
        for &idx in order.iter().take(n) {
            for j in 0..n {
                centroid[j] += simplex[idx][j] / n as f64;
            }
        }
        let point_along = |t: f64| -> Vec<f64> {
            (0..n).map(|j| centroid[j] + t * (simplex[worst][j] - centroid[j])).collect()
        };
        let reflected = point_along(-1.0);
        let f_reflected = neg(&reflected);
        if f_reflected < values[best] {
            let expanded = point_along(-2.0);
            let f_expanded = neg(&expanded);
            if f_expanded < f_reflected {
                simplex[worst] = expanded;
                values[worst] = f_expanded;
            } else {
                simplex[worst] = reflected;
                values[worst] = f_reflected;
            }
        } else if f_reflected < values[second_worst] {
            simplex[worst] = reflected;
            values[worst] = f_reflected;
        } else {
            let contracted = point_along(0.5);
            let f_contracted = neg(&contracted);
            if f_contracted < values[worst] {
                simplex[worst] = contracted;
                values[worst] = f_contracted;
            } else {
                // shrink towards the best vertex
                let best_point = simplex[best].clone();
                for idx in 0..=n {
                    if idx == best {
                        continue;
                    }
                    for j in 0..n {
                        simplex[idx][j] = 0.5 * (simplex[idx][j] + best_point[j]);
                    }
                    values[idx] = neg(&simplex[idx]);
                }
            }
        }
    }
    let best = (0..=n).min_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap();
    Ok(OptimResult {
        value: -values[best],
        x: simplex[best].clone(),
        iterations,
        converged,
    })
}

fn identity(n: usize) -> Vec<Vec<f64>> {
    let mut m = vec![vec![0.0; n]; n];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    m
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn neg_quadratic(x: &[f64]) -> f64 {
        // maximum 3.0 at (1, -2)
        3.0 - (x[0] - 1.0).powi(2) - 2.0 * (x[1] + 2.0).powi(2) - (x[0] - 1.0) * (x[1] + 2.0)
    }

    #[test]
    fn bfgs_finds_quadratic_maximum() {
        let r = maximize(neg_quadratic, &[5.0, 5.0], Optimizer::QuasiNewtonNumericGrad, 1e-8, 200)
            .unwrap();
        assert!(r.converged);
        assert_relative_eq!(r.x[0], 1.0, epsilon = 1e-5);
        assert_relative_eq!(r.x[1], -2.0, epsilon = 1e-5);
        assert_relative_eq!(r.value, 3.0, epsilon = 1e-8);
    }

    #[test]
    fn simplex_finds_quadratic_maximum() {
        let r = maximize(neg_quadratic, &[5.0, 5.0], Optimizer::SimplexSearch, 1e-12, 2000).unwrap();
        assert!(r.converged);
        assert_relative_eq!(r.x[0], 1.0, epsilon = 1e-4);
        assert_relative_eq!(r.x[1], -2.0, epsilon = 1e-4);
    }

    #[test]
    fn bfgs_on_rosenbrock_like_ridge() {
        // maximize -((1-x)^2 + 5 (y - x^2)^2), optimum at (1, 1)
        let f = |x: &[f64]| -((1.0 - x[0]).powi(2) + 5.0 * (x[1] - x[0] * x[0]).powi(2));
        let r =
            maximize(f, &[-1.2, 1.0], Optimizer::QuasiNewtonNumericGrad, 1e-7, 2000).unwrap();
        assert_relative_eq!(r.x[0], 1.0, epsilon = 1e-3);
        assert_relative_eq!(r.x[1], 1.0, epsilon = 1e-3);
    }

    #[test]
    fn gradient_matches_analytic() {
        let f = |x: &[f64]| x[0] * x[0] * x[1] + x[1].sin();
        let g = numeric_gradient(&f, &[1.5, 0.7], 1e-6);
        assert_relative_eq!(g[0], 2.0 * 1.5 * 0.7, max_relative = 1e-7);
        assert_relative_eq!(g[1], 1.5f64 * 1.5 + 0.7f64.cos(), max_relative = 1e-7);
    }

    #[test]
    fn non_finite_start_is_reported() {
        let f = |x: &[f64]| x[0].ln();
        assert!(maximize(f, &[-1.0], Optimizer::QuasiNewtonNumericGrad, 1e-8, 50).is_err());
    }
}
