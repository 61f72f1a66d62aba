//! Annual event counts as independent Poisson draws.

use rand::RngCore;
use statrs::function::gamma::{gamma_ur, ln_gamma};

use crate::error::{Error, Result};
use crate::rng::open01;

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct AnnualCounts(pub Vec<u64>);

impl AnnualCounts {
    pub fn as_slice(&self) -> &[u64] {
        &self.0
    }

    pub fn total(&self) -> u64 {
        self.0.iter().sum()
    }
}

/// Below this mean the inversion walks up from zero.
const DIRECT_LIMIT: f64 = 30.0;

/// Poisson quantile at `u`: the least k with P(N ≤ k) ≥ u. Non-decreasing
/// in both `u` and `lambda`, so common random numbers give monotone counts.
pub fn poisson_inverse(lambda: f64, u: f64) -> u64 {
    if lambda <= 0.0 {
        return 0;
    }
    if lambda < DIRECT_LIMIT {
        let mut k = 0u64;
        let mut pmf = (-lambda).exp();
        let mut cdf = pmf;
        while cdf < u && pmf > 0.0 {
            k += 1;
            pmf *= lambda / k as f64;
            cdf += pmf;
        }
        return k;
    }
    // start at the mode and walk
    let mut k = lambda.floor();
    let ln_pmf = |k: f64| k * lambda.ln() - lambda - ln_gamma(k + 1.0);
    let mut cdf = gamma_ur(k + 1.0, lambda);
    if cdf >= u {
        let mut pmf = ln_pmf(k).exp();
        while k > 0.0 && cdf - pmf >= u {
            cdf -= pmf;
            pmf *= k / lambda;
            k -= 1.0;
        }
    } else {
        let mut pmf = ln_pmf(k).exp();
        while cdf < u && pmf > 0.0 {
            k += 1.0;
            pmf *= lambda / k;
            cdf += pmf;
        }
    }
    k as u64
}

pub fn sample_poisson<R: RngCore + ?Sized>(lambda: f64, rng: &mut R) -> u64 {
    poisson_inverse(lambda, open01(rng))
}

/// One independent Poisson count per year with means `lambdas`.
pub fn sample_annual_counts<R: RngCore + ?Sized>(lambdas: &[f64], rng: &mut R) -> Result<AnnualCounts> {
    validate_lambdas(lambdas)?;
    Ok(AnnualCounts(lambdas.iter().map(|&l| sample_poisson(l, rng)).collect()))
}

pub fn validate_lambdas(lambdas: &[f64]) -> Result<()> {
    match lambdas.iter().find(|l| !(**l >= 0.0) || !l.is_finite()) {
        Some(bad) => Err(Error::param("lambda", format!("{bad} is not a non-negative finite mean"))),
        None => Ok(()),
    }
}
