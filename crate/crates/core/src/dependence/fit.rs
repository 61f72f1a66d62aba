//! Maximum-likelihood fit of a nested copula to pseudo-observations.

use super::density::{log_likelihood_prepared, PreparedRows};
use super::family::ArchimedeanFamily;
use super::nested::{DependenceModel, NestedCopulaSpec};
use super::pseudo::PseudoObservations;
use crate::error::{Error, Result};
use crate::optim::{self, NelderMeadOptions};
use crate::stats::kendall_tau;

pub const MIN_ROWS: usize = 30;

/// log-parameters below this are treated as sitting on the boundary.
const LOG_FLOOR: f64 = -12.0;

#[derive(Debug, Clone, PartialEq)]
pub struct NestedFit {
    pub spec: NestedCopulaSpec,
    pub log_likelihood: f64,
    /// Standard errors of `(theta_inner, theta_outer)`.
    pub std_errors: Option<(f64, f64)>,
    /// The optimum sits on θ₁ = θ₂ or on the outer independence boundary.
    pub constraint_active: bool,
    pub iterations: usize,
}

/// Unconstrained coordinates (a, b): θ₂ = lower + eᵃ, θ₁ = θ₂ + eᵇ.
fn to_thetas(family: ArchimedeanFamily, x: &[f64]) -> (f64, f64) {
    let lower = if family == ArchimedeanFamily::Gumbel { 1.0 } else { 0.0 };
    let t2 = lower + x[0].exp();
    (t2 + x[1].exp(), t2)
}

fn from_thetas(family: ArchimedeanFamily, t1: f64, t2: f64) -> [f64; 2] {
    let lower = if family == ArchimedeanFamily::Gumbel { 1.0 } else { 0.0 };
    [
        (t2 - lower).max(LOG_FLOOR.exp() * 10.0).ln(),
        (t1 - t2).max(LOG_FLOOR.exp() * 10.0).ln(),
    ]
}

fn average_tau(p: &PseudoObservations, pairs: &[(usize, usize)]) -> f64 {
    let cols: Vec<Vec<f64>> = (0..p.dim()).map(|j| p.column(j)).collect();
    pairs.iter().map(|&(i, j)| kendall_tau(&cols[i], &cols[j])).sum::<f64>() / pairs.len() as f64
}

/// Joint maximum likelihood over (θ₁, θ₂) subject to θ₁ ≥ θ₂.
///
/// Starts from Kendall-tau inversion on the inner and cross pairs, runs
/// damped Newton on finite-difference derivatives and falls back to a
/// simplex search if Newton stalls.
pub fn fit_nested_mle(
    p: &PseudoObservations,
    inner_family: ArchimedeanFamily,
    outer_family: ArchimedeanFamily,
    inner_indices: &[usize],
) -> Result<NestedFit> {
    if p.len() < MIN_ROWS {
        return Err(Error::InsufficientData {
            required: MIN_ROWS,
            actual: p.len(),
        });
    }
    let dim = p.dim();
    let family = inner_family;
    // validates family compatibility and the index set
    NestedCopulaSpec::new(inner_family, 2.0, inner_indices.to_vec(), outer_family, 2.0, dim)?;
    if family == ArchimedeanFamily::Frank {
        log::debug!("nested Frank fit restricted to θ > 0");
    }

    let outer: Vec<usize> = (0..dim).filter(|i| !inner_indices.contains(i)).collect();
    let mut inner_pairs = Vec::new();
    for (k, &i) in inner_indices.iter().enumerate() {
        for &j in &inner_indices[k + 1..] {
            inner_pairs.push((i, j));
        }
    }
    let cross_pairs: Vec<(usize, usize)> = inner_indices
        .iter()
        .flat_map(|&i| outer.iter().map(move |&j| (i, j)))
        .collect();
    let tau_in = average_tau(p, &inner_pairs);
    let tau_x = average_tau(p, &cross_pairs);
    let t2s = family.theta_from_tau(tau_x.max(0.01));
    let t1s = family.theta_from_tau(tau_in.max(tau_x).max(0.01)).max(t2s * 1.05);
    let x0 = from_thetas(family, t1s, t2s);

    let rows = PreparedRows::new(p.rows());
    let nll = |x: &[f64]| -> f64 {
        if x.iter().any(|v| *v < LOG_FLOOR || *v > 7.0) {
            return f64::INFINITY;
        }
        let (t1, t2) = to_thetas(family, x);
        match NestedCopulaSpec::same_family(family, t1, t2, inner_indices.to_vec(), dim) {
            Ok(spec) => -log_likelihood_prepared(&DependenceModel::Nested(spec), &rows),
            Err(_) => f64::INFINITY,
        }
    };

    // a decrement of 1e-6 in log-likelihood units is far inside the
    // sampling noise of any sample size the fit accepts
    let first = optim::newton_numeric(nll, &x0, 1e-4, 30, 1e-5, 1e-6);
    let mut best = first.min;
    let mut hessian = first.hessian;
    let mut iterations = best.iterations;
    if !best.converged {
        let nm = optim::nelder_mead(nll, &x0, &[0.3, 0.3], &NelderMeadOptions::default());
        iterations += nm.iterations;
        let polished = optim::newton_numeric(nll, &nm.x, 1e-4, 30, 1e-5, 1e-6);
        iterations += polished.min.iterations;
        let (cand, cand_h) = if polished.min.value <= nm.value {
            (polished.min, polished.hessian)
        } else {
            (nm, None)
        };
        if cand.value <= best.value {
            best = cand;
            hessian = cand_h;
        }
    }
    if !best.value.is_finite() {
        return Err(Error::Convergence("nested copula likelihood is not finite".into()));
    }
    let constraint_active = best.x.iter().any(|v| *v < LOG_FLOOR + 2.0);
    if !best.converged && !constraint_active {
        return Err(Error::Convergence(format!(
            "nested copula likelihood after {iterations} iterations"
        )));
    }
    let (t1, t2) = to_thetas(family, &best.x);
    let spec = NestedCopulaSpec::same_family(family, t1, t2, inner_indices.to_vec(), dim)?;

    // delta method from (a, b) to (θ₁, θ₂)
    let std_errors = if constraint_active {
        None
    } else {
        let h = hessian.unwrap_or_else(|| optim::numeric_derivatives(nll, &best.x, 1e-4).2);
        optim::spd_inverse(&h).map(|cov| {
            let (ea, eb) = (best.x[0].exp(), best.x[1].exp());
            let var_t2 = ea * ea * cov[0][0];
            let var_t1 = ea * ea * cov[0][0] + 2.0 * ea * eb * cov[0][1] + eb * eb * cov[1][1];
            (var_t1.max(0.0).sqrt(), var_t2.max(0.0).sqrt())
        })
    };
    Ok(NestedFit {
        spec,
        log_likelihood: -best.value,
        std_errors,
        constraint_active,
        iterations,
    })
}
