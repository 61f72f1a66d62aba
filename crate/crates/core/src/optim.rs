//! Small-dimension optimization used by the maximum-likelihood fits.
//!
//! Everything here minimizes. Objective values that are NaN or infinite are
//! treated as `+inf`, which lets callers encode parameter constraints by
//! returning `f64::INFINITY` outside the feasible region.

/// Result of a minimization.
#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct NelderMeadOptions {
    pub max_iter: usize,
    /// Stop when the spread of objective values over the simplex drops below
    /// `f_tol * (1 + |f_best|)`.
    pub f_tol: f64,
    /// ...and the simplex diameter drops below this.
    pub x_tol: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            max_iter: 500,
            f_tol: 1e-10,
            x_tol: 1e-8,
        }
    }
}

#[inline]
fn sanitize(v: f64) -> f64 {
    if v.is_finite() {
        v
    } else {
        f64::INFINITY
    }
}

/// Nelder–Mead simplex search with the dimension-adaptive coefficients of
/// Gao & Han.
pub fn nelder_mead<F>(mut f: F, x0: &[f64], steps: &[f64], opts: &NelderMeadOptions) -> Minimum
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    assert_eq!(steps.len(), n);
    let nf = n as f64;
    let (alpha, gamma, rho, sigma) = if n >= 2 {
        (1.0, 1.0 + 2.0 / nf, 0.75 - 0.5 / nf, 1.0 - 1.0 / nf)
    } else {
        (1.0, 2.0, 0.5, 0.5)
    };

    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(x0.to_vec());
    for i in 0..n {
        let mut v = x0.to_vec();
        v[i] += steps[i];
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| sanitize(f(v))).collect();

    let mut iterations = 0;
    let mut converged = false;
    let mut order: Vec<usize> = (0..=n).collect();
    while iterations < opts.max_iter {
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        let best = order[0];
        let worst = order[n];
        let second_worst = order[n - 1];

        let f_best = values[best];
        let f_worst = values[worst];
        let diameter = simplex
            .iter()
            .map(|v| {
                v.iter()
                    .zip(&simplex[best])
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        if f_best.is_finite()
            && (f_worst - f_best).abs() <= opts.f_tol * (1.0 + f_best.abs())
            && diameter <= opts.x_tol
        {
            converged = true;
            break;
        }
        iterations += 1;

        let mut centroid = vec![0.0; n];
        for &i in order.iter().take(n) {
            for (c, x) in centroid.iter_mut().zip(&simplex[i]) {
                *c += x / nf;
            }
        }
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[worst])
                .map(|(c, w)| c + t * (c - w))
                .collect()
        };

        let xr = along(alpha);
        let fr = sanitize(f(&xr));
        if fr < values[best] {
            let xe = along(gamma);
            let fe = sanitize(f(&xe));
            if fe < fr {
                simplex[worst] = xe;
                values[worst] = fe;
            } else {
                simplex[worst] = xr;
                values[worst] = fr;
            }
            continue;
        }
        if fr < values[second_worst] {
            simplex[worst] = xr;
            values[worst] = fr;
            continue;
        }
        let (xc, fc) = if fr < f_worst {
            let xc = along(alpha * rho);
            let fc = sanitize(f(&xc));
            (xc, fc)
        } else {
            let xc = along(-rho);
            let fc = sanitize(f(&xc));
            (xc, fc)
        };
        if fc < fr.min(f_worst) {
            simplex[worst] = xc;
            values[worst] = fc;
            continue;
        }
        // shrink towards the best vertex
        let xb = simplex[best].clone();
        for &i in order.iter().skip(1) {
            for (x, b) in simplex[i].iter_mut().zip(&xb) {
                *x = b + sigma * (*x - b);
            }
            values[i] = sanitize(f(&simplex[i]));
        }
    }

    let best = (0..=n)
        .min_by(|&a, &b| values[a].total_cmp(&values[b]))
        .unwrap_or(0);
    Minimum {
        x: simplex[best].clone(),
        value: values[best],
        iterations,
        converged,
    }
}

/// Runs [`nelder_mead`] from each start and keeps the best result. The
/// winner is restarted once from its own optimum, which fixes most
/// premature collapses of the simplex.
pub fn multi_start<F>(
    mut f: F,
    starts: &[Vec<f64>],
    steps: &[f64],
    opts: &NelderMeadOptions,
) -> Option<Minimum>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut best: Option<Minimum> = None;
    for x0 in starts {
        if !sanitize(f(x0)).is_finite() {
            continue;
        }
        let m = nelder_mead(&mut f, x0, steps, opts);
        if best.as_ref().is_none_or(|b| m.value < b.value) {
            best = Some(m);
        }
    }
    let first = best?;
    let small: Vec<f64> = steps.iter().map(|s| s * 0.1).collect();
    let again = nelder_mead(&mut f, &first.x, &small, opts);
    Some(if again.value <= first.value {
        Minimum {
            iterations: first.iterations + again.iterations,
            converged: again.converged,
            ..again
        }
    } else {
        first
    })
}

fn step_for(x: f64, rel: f64) -> f64 {
    rel * x.abs().max(1.0)
}

/// Central-difference gradient.
pub fn numeric_gradient<F: FnMut(&[f64]) -> f64>(mut f: F, x: &[f64], rel_step: f64) -> Vec<f64> {
    let mut xp = x.to_vec();
    (0..x.len())
        .map(|i| {
            let h = step_for(x[i], rel_step);
            xp[i] = x[i] + h;
            let fp = f(&xp);
            xp[i] = x[i] - h;
            let fm = f(&xp);
            xp[i] = x[i];
            (fp - fm) / (2.0 * h)
        })
        .collect()
}

/// Central-difference Hessian (symmetric, row-major).
pub fn numeric_hessian<F: FnMut(&[f64]) -> f64>(mut f: F, x: &[f64], rel_step: f64) -> Vec<Vec<f64>> {
    let n = x.len();
    let h: Vec<f64> = x.iter().map(|&v| step_for(v, rel_step)).collect();
    let f0 = f(x);
    let mut xp = x.to_vec();
    let mut hess = vec![vec![0.0; n]; n];
    for i in 0..n {
        xp[i] = x[i] + h[i];
        let fp = f(&xp);
        xp[i] = x[i] - h[i];
        let fm = f(&xp);
        xp[i] = x[i];
        hess[i][i] = (fp - 2.0 * f0 + fm) / (h[i] * h[i]);
        for j in 0..i {
            let mut eval = |si: f64, sj: f64| {
                xp[i] = x[i] + si * h[i];
                xp[j] = x[j] + sj * h[j];
                let v = f(&xp);
                xp[i] = x[i];
                xp[j] = x[j];
                v
            };
            let v = (eval(1.0, 1.0) - eval(1.0, -1.0) - eval(-1.0, 1.0) + eval(-1.0, -1.0))
                / (4.0 * h[i] * h[j]);
            hess[i][j] = v;
            hess[j][i] = v;
        }
    }
    hess
}

/// Damped Newton iterations from `x0` given gradient and Hessian of the
/// objective. Falls back to steepest descent when the Hessian is not
/// positive definite; backtracks until the objective decreases.
pub fn newton<F, G, H>(
    mut f: F,
    mut grad: G,
    mut hess: H,
    x0: &[f64],
    max_iter: usize,
    g_tol: f64,
) -> Minimum
where
    F: FnMut(&[f64]) -> f64,
    G: FnMut(&[f64]) -> Vec<f64>,
    H: FnMut(&[f64]) -> Vec<Vec<f64>>,
{
    let mut x = x0.to_vec();
    let mut fx = sanitize(f(&x));
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iter {
        let g = grad(&x);
        let gnorm = g.iter().map(|v| v.abs()).fold(0.0, f64::max);
        if !gnorm.is_finite() {
            break;
        }
        if gnorm <= g_tol * (1.0 + fx.abs()) {
            converged = true;
            break;
        }
        iterations += 1;
        let h = hess(&x);
        let dir = match cholesky_solve(&h, &g) {
            Some(d) => d.into_iter().map(|v| -v).collect::<Vec<_>>(),
            None => g.iter().map(|v| -v / (1.0 + gnorm)).collect(),
        };
        let mut t = 1.0;
        let mut moved = false;
        for _ in 0..40 {
            let xt: Vec<f64> = x.iter().zip(&dir).map(|(a, d)| a + t * d).collect();
            let ft = sanitize(f(&xt));
            if ft <= fx {
                let tiny = (fx - ft).abs() <= 1e-15 * (1.0 + fx.abs());
                x = xt;
                fx = ft;
                moved = !tiny;
                break;
            }
            t *= 0.5;
        }
        if !moved {
            // no further decrease along the Newton direction: at the optimum
            // to working precision
            converged = true;
            break;
        }
    }
    Minimum {
        x,
        value: fx,
        iterations,
        converged,
    }
}

/// Objective value, central-difference gradient and Hessian at `x`, sharing
/// function evaluations between them.
pub fn numeric_derivatives<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    x: &[f64],
    rel_step: f64,
) -> (f64, Vec<f64>, Vec<Vec<f64>>) {
    let n = x.len();
    let h: Vec<f64> = x.iter().map(|&v| step_for(v, rel_step)).collect();
    let f0 = f(x);
    let mut xp = x.to_vec();
    let mut grad = vec![0.0; n];
    let mut hess = vec![vec![0.0; n]; n];
    for i in 0..n {
        xp[i] = x[i] + h[i];
        let fp = f(&xp);
        xp[i] = x[i] - h[i];
        let fm = f(&xp);
        xp[i] = x[i];
        grad[i] = (fp - fm) / (2.0 * h[i]);
        hess[i][i] = (fp - 2.0 * f0 + fm) / (h[i] * h[i]);
        for j in 0..i {
            let mut eval = |si: f64, sj: f64| {
                xp[i] = x[i] + si * h[i];
                xp[j] = x[j] + sj * h[j];
                let v = f(&xp);
                xp[i] = x[i];
                xp[j] = x[j];
                v
            };
            let v = (eval(1.0, 1.0) - eval(1.0, -1.0) - eval(-1.0, 1.0) + eval(-1.0, -1.0))
                / (4.0 * h[i] * h[j]);
            hess[i][j] = v;
            hess[j][i] = v;
        }
    }
    (f0, grad, hess)
}

/// Result of [`newton_numeric`]: the minimum and the last finite-difference
/// Hessian, taken at most one accepted step away from `min.x`.
#[derive(Debug, Clone, PartialEq)]
pub struct NewtonOutcome {
    pub min: Minimum,
    pub hessian: Option<Vec<Vec<f64>>>,
}

/// Damped Newton with finite-difference derivatives, for smooth objectives
/// that are expensive enough that every evaluation counts. Stops when the
/// step falls below `x_tol` in every coordinate or when the Newton
/// decrement g·H⁻¹g/2 falls below `f_tol`; in the latter case the current
/// point is returned and the Hessian belongs to it.
pub fn newton_numeric<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    x0: &[f64],
    rel_step: f64,
    max_iter: usize,
    x_tol: f64,
    f_tol: f64,
) -> NewtonOutcome {
    let mut x = x0.to_vec();
    let mut fx = sanitize(f(&x));
    let mut iterations = 0;
    let mut converged = false;
    let mut hessian = None;
    while iterations < max_iter && fx.is_finite() {
        iterations += 1;
        let (_, g, h) = numeric_derivatives(&mut f, &x, rel_step);
        if g.iter().any(|v| !v.is_finite()) {
            break;
        }
        let gnorm = g.iter().map(|v| v.abs()).fold(0.0, f64::max);
        let newton_dir = cholesky_solve(&h, &g);
        hessian = Some(h);
        let dir: Vec<f64> = match newton_dir {
            Some(d) => {
                let decrement = 0.5 * d.iter().zip(&g).map(|(a, b)| a * b).sum::<f64>();
                if decrement < f_tol {
                    converged = true;
                    break;
                }
                d.into_iter().map(|v| -v).collect()
            }
            None => g.iter().map(|v| -v / (1.0 + gnorm)).collect(),
        };
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..30 {
            let xt: Vec<f64> = x.iter().zip(&dir).map(|(a, d)| a + t * d).collect();
            let ft = sanitize(f(&xt));
            if ft <= fx {
                accepted = Some((xt, ft));
                break;
            }
            t *= 0.5;
        }
        let Some((xt, ft)) = accepted else {
            converged = gnorm <= 1e-6 * (1.0 + fx.abs());
            break;
        };
        let step = x.iter().zip(&xt).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        x = xt;
        fx = ft;
        if step < x_tol {
            converged = true;
            break;
        }
    }
    NewtonOutcome {
        min: Minimum {
            x,
            value: fx,
            iterations,
            converged,
        },
        hessian,
    }
}

/// Solves `A x = b` for symmetric positive definite `A`; `None` if `A` is not
/// positive definite.
pub fn cholesky_solve(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let l = cholesky(a)?;
    let n = b.len();
    let mut y = vec![0.0; n];
    for i in 0..n {
        let s: f64 = (0..i).map(|k| l[i][k] * y[k]).sum();
        y[i] = (b[i] - s) / l[i][i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| l[k][i] * x[k]).sum();
        x[i] = (y[i] - s) / l[i][i];
    }
    Some(x)
}

fn cholesky(a: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = a.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                let d = a[i][i] - s;
                if !(d > 0.0) || !d.is_finite() {
                    return None;
                }
                l[i][j] = d.sqrt();
            } else {
                l[i][j] = (a[i][j] - s) / l[j][j];
            }
        }
    }
    Some(l)
}

/// Inverse of a symmetric positive definite matrix.
pub fn spd_inverse(a: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = a.len();
    let mut inv = vec![vec![0.0; n]; n];
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        let col = cholesky_solve(a, &e)?;
        for i in 0..n {
            inv[i][j] = col[i];
        }
    }
    Some(inv)
}

/// Solves a general square system by Gaussian elimination with partial
/// pivoting.
pub fn solve(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let mut m: Vec<Vec<f64>> = a.to_vec();
    let mut rhs = b.to_vec();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[piv][col].abs() < 1e-300 {
            return None;
        }
        m.swap(col, piv);
        rhs.swap(col, piv);
        for row in col + 1..n {
            let factor = m[row][col] / m[col][col];
            for k in col..n {
                m[row][k] -= factor * m[col][k];
            }
            rhs[row] -= factor * rhs[col];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| m[i][k] * x[k]).sum();
        x[i] = (rhs[i] - s) / m[i][i];
    }
    Some(x)
}

/// Standard errors from the Hessian of a negative log-likelihood.
pub fn standard_errors(neg_loglik_hessian: &[Vec<f64>]) -> Option<Vec<f64>> {
    let inv = spd_inverse(neg_loglik_hessian)?;
    Some((0..inv.len()).map(|i| inv[i][i].max(0.0).sqrt()).collect())
}
