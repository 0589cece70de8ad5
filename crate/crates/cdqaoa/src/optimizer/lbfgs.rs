//! Projected L-BFGS for box-constrained smooth minimization.
//!
//! Standard two-loop recursion with a limited memory of curvature pairs,
//! combined with clamping to the box and an Armijo backtracking search along
//! the projection arc. Convergence is declared on the projected-gradient
//! infinity norm; a relative stall test on the objective value catches flat
//! valleys where the gradient threshold is never reached.

/// Callbacks of the function being minimized.
pub trait Objective {
    fn value(&mut self, x: &[f64]) -> f64;
    fn value_grad(&mut self, x: &[f64]) -> (f64, Vec<f64>);
}

#[derive(Debug, Clone)]
pub struct LbfgsSettings {
    pub memory: usize,
    pub grad_tol: f64,
    pub max_iters: usize,
    /// Armijo sufficient-decrease coefficient.
    pub armijo_c1: f64,
    /// Maximum number of step halvings per line search.
    pub max_backtracks: usize,
    /// Relative objective-change threshold of the stall test.
    pub f_stall_tol: f64,
    /// Consecutive stalled iterations before stopping.
    pub f_stall_patience: usize,
}

impl Default for LbfgsSettings {
    fn default() -> Self {
        Self {
            memory: 10,
            grad_tol: 1e-9,
            max_iters: 1000,
            armijo_c1: 1e-4,
            max_backtracks: 40,
            f_stall_tol: 1e-12,
            f_stall_patience: 3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LbfgsOutcome {
    pub point: Vec<f64>,
    pub cost: f64,
    pub iterations: usize,
    /// True when the projected gradient met the tolerance.
    pub converged: bool,
    pub trajectory: Option<Vec<Vec<f64>>>,
}

fn clamp(x: &mut [f64], lower: &[f64], upper: &[f64]) {
    for ((v, &l), &u) in x.iter_mut().zip(lower).zip(upper) {
        *v = v.clamp(l, u);
    }
}

/// Infinity norm of `x - clamp(x - g)`, the box-aware stationarity measure.
fn projected_gradient_norm(x: &[f64], g: &[f64], lower: &[f64], upper: &[f64]) -> f64 {
    x.iter()
        .zip(g)
        .zip(lower.iter().zip(upper))
        .map(|((&xi, &gi), (&l, &u))| (xi - (xi - gi).clamp(l, u)).abs())
        .fold(0.0, f64::max)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn minimize(
    objective: &mut dyn Objective,
    start: &[f64],
    lower: &[f64],
    upper: &[f64],
    settings: &LbfgsSettings,
    record_trajectory: bool,
) -> LbfgsOutcome {
    let n = start.len();
    debug_assert_eq!(lower.len(), n);
    debug_assert_eq!(upper.len(), n);

    let mut x = start.to_vec();
    clamp(&mut x, lower, upper);
    let (mut f, mut g) = objective.value_grad(&x);
    let mut trajectory = record_trajectory.then(|| vec![x.clone()]);

    let fail = |x: Vec<f64>, iterations: usize, trajectory: Option<Vec<Vec<f64>>>| LbfgsOutcome {
        point: x,
        cost: f64::NAN,
        iterations,
        converged: false,
        trajectory,
    };
    if !f.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return fail(x, 0, trajectory);
    }

    let mut s_list: Vec<Vec<f64>> = Vec::new();
    let mut y_list: Vec<Vec<f64>> = Vec::new();
    let mut rho_list: Vec<f64> = Vec::new();
    let mut stalled = 0usize;
    let mut converged = false;
    let mut iterations = 0usize;

    for iter in 0..settings.max_iters {
        iterations = iter;
        if projected_gradient_norm(&x, &g, lower, upper) <= settings.grad_tol {
            converged = true;
            break;
        }

        // two-loop recursion for d = -H g
        let mut d: Vec<f64> = g.iter().map(|v| -v).collect();
        let mut alphas = vec![0.0; s_list.len()];
        for i in (0..s_list.len()).rev() {
            let a = rho_list[i] * dot(&s_list[i], &d);
            alphas[i] = a;
            for (dj, yj) in d.iter_mut().zip(&y_list[i]) {
                *dj -= a * yj;
            }
        }
        if let (Some(s), Some(y)) = (s_list.last(), y_list.last()) {
            let scale = dot(s, y) / dot(y, y);
            if scale.is_finite() && scale > 0.0 {
                d.iter_mut().for_each(|v| *v *= scale);
            }
        }
        for i in 0..s_list.len() {
            let b = rho_list[i] * dot(&y_list[i], &d);
            for (dj, sj) in d.iter_mut().zip(&s_list[i]) {
                *dj += (alphas[i] - b) * sj;
            }
        }
        if dot(&d, &g) >= 0.0 {
            // not a descent direction: drop the memory, fall back to steepest
            s_list.clear();
            y_list.clear();
            rho_list.clear();
            d = g.iter().map(|v| -v).collect();
        }

        // backtracking along the projection arc
        let mut t = 1.0f64;
        let mut accepted = None;
        for _ in 0..=settings.max_backtracks {
            let mut x_new: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + t * di).collect();
            clamp(&mut x_new, lower, upper);
            let step: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
            let decrease = dot(&g, &step);
            if step.iter().all(|v| *v == 0.0) {
                break;
            }
            let f_new = objective.value(&x_new);
            if f_new.is_finite() && f_new <= f + settings.armijo_c1 * decrease {
                accepted = Some((x_new, f_new));
                break;
            }
            t *= 0.5;
        }
        let Some((x_new, f_new)) = accepted else {
            // line search failed: with fresh memory this point is numerically
            // stationary along the arc
            if s_list.is_empty() {
                break;
            }
            s_list.clear();
            y_list.clear();
            rho_list.clear();
            continue;
        };

        let (f_check, g_new) = objective.value_grad(&x_new);
        if !f_check.is_finite() || g_new.iter().any(|v| !v.is_finite()) {
            return fail(x_new, iter + 1, trajectory);
        }

        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        let s_norm = dot(&s, &s).sqrt();
        let y_norm = dot(&y, &y).sqrt();
        if sy > 1e-10 * s_norm * y_norm {
            if s_list.len() == settings.memory {
                s_list.remove(0);
                y_list.remove(0);
                rho_list.remove(0);
            }
            rho_list.push(1.0 / sy);
            s_list.push(s);
            y_list.push(y);
        }

        let f_prev = f;
        x = x_new;
        f = f_new;
        g = g_new;
        if let Some(traj) = trajectory.as_mut() {
            traj.push(x.clone());
        }

        if (f_prev - f).abs() <= settings.f_stall_tol * (1.0 + f.abs()) {
            stalled += 1;
            if stalled >= settings.f_stall_patience {
                break;
            }
        } else {
            stalled = 0;
        }
        iterations = iter + 1;
    }

    LbfgsOutcome {
        point: x,
        cost: f,
        iterations,
        converged,
        trajectory,
    }
}
