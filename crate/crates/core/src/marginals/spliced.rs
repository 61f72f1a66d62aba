//! Beta body below the threshold joined to a generalized Pareto tail above.

use super::beta::{fit_beta, BetaParams};
use super::gpd::{fit_gpd, gpd_inverse_sf, gpd_sf, GpdParams};
use crate::error::{Error, Result};
use crate::special::{beta_cdf, beta_quantile};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdSpec {
    pub threshold: f64,
    pub n_exceed: usize,
    pub n_total: usize,
    pub data_min: f64,
}

impl ThresholdSpec {
    pub fn new(threshold: f64, n_exceed: usize, n_total: usize, data_min: f64) -> Result<Self> {
        if !(data_min < threshold) || !threshold.is_finite() || !data_min.is_finite() {
            return Err(Error::param(
                "threshold",
                format!("must exceed the data minimum {data_min}, got {threshold}"),
            ));
        }
        if n_exceed == 0 || n_exceed >= n_total {
            return Err(Error::param(
                "n_exceed",
                format!("need 0 < n_exceed < n_total, got {n_exceed} of {n_total}"),
            ));
        }
        Ok(Self {
            threshold,
            n_exceed,
            n_total,
            data_min,
        })
    }

    /// n_u / n.
    pub fn exceed_fraction(&self) -> f64 {
        self.n_exceed as f64 / self.n_total as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplicedMarginal {
    pub bulk: BetaParams,
    pub tail: GpdParams,
    pub spec: ThresholdSpec,
}

/// Number of free parameters: two Beta shapes, GP shape and scale, and the
/// exceedance fraction.
pub const SPLICED_PARAMETERS: usize = 5;

impl SplicedMarginal {
    pub fn new(bulk: BetaParams, tail: GpdParams, spec: ThresholdSpec) -> Self {
        Self { bulk, tail, spec }
    }

    /// Fits the Beta body to the scaled non-exceedances and the GP tail to
    /// the excesses over `threshold`.
    pub fn fit(data: &[f64], threshold: f64) -> Result<Self> {
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("non-finite observation"));
        }
        let data_min = data.iter().copied().fold(f64::INFINITY, f64::min);
        let excesses: Vec<f64> = data
            .iter()
            .filter(|&&x| x > threshold)
            .map(|&x| x - threshold)
            .collect();
        let spec = ThresholdSpec::new(threshold, excesses.len(), data.len(), data_min)?;
        let body: Vec<f64> = data.iter().copied().filter(|&x| x <= threshold).collect();
        let scaled = scale_body(&body, data_min, threshold);
        let bulk = fit_beta(&scaled)?;
        let tail = fit_gpd(&excesses)?;
        Ok(Self { bulk, tail, spec })
    }

    pub fn cdf(&self, x: f64) -> Result<f64> {
        let ThresholdSpec {
            threshold: u,
            data_min: m,
            ..
        } = self.spec;
        if !(x >= m) {
            return Err(Error::domain(format!("{x} below the data minimum {m}")));
        }
        let f = self.spec.exceed_fraction();
        if x <= u {
            let z = (x - m) / (u - m);
            return Ok((1.0 - f) * beta_cdf(z, self.bulk.alpha, self.bulk.beta));
        }
        let y = x - u;
        if self.tail.upper_endpoint().is_some_and(|end| y >= end) {
            return Ok(1.0);
        }
        Ok(1.0 - f * gpd_sf(y, &self.tail)?)
    }

    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::domain(format!("probability {p} outside (0, 1)")));
        }
        let ThresholdSpec {
            threshold: u,
            data_min: m,
            ..
        } = self.spec;
        let f = self.spec.exceed_fraction();
        let body = 1.0 - f;
        if p <= body {
            let z = beta_quantile(p / body, self.bulk.alpha, self.bulk.beta);
            Ok((m + z * (u - m)).min(u))
        } else {
            Ok(u + gpd_inverse_sf((1.0 - p) / f, &self.tail)?)
        }
    }

    /// Quantile at a uniform draw, for simulation. Draws are strictly
    /// inside (0, 1), so this never fails for a valid marginal.
    pub fn sample_at(&self, u: f64) -> f64 {
        self.quantile(u).unwrap_or(f64::NAN)
    }
}

pub fn spliced_cdf(x: f64, m: &SplicedMarginal) -> Result<f64> {
    m.cdf(x)
}

pub fn spliced_quantile(p: f64, m: &SplicedMarginal) -> Result<f64> {
    m.quantile(p)
}

/// Maps the body to [0, 1] and moves points sitting exactly on either end
/// inwards by half the smallest positive gap.
pub fn scale_body(body: &[f64], data_min: f64, threshold: f64) -> Vec<f64> {
    let width = threshold - data_min;
    let mut z: Vec<f64> = body.iter().map(|&x| (x - data_min) / width).collect();
    let mut sorted = z.clone();
    sorted.push(0.0);
    sorted.push(1.0);
    sorted.sort_by(f64::total_cmp);
    let gap = sorted
        .windows(2)
        .map(|w| w[1] - w[0])
        .filter(|&d| d > 0.0)
        .fold(f64::INFINITY, f64::min);
    let nudge = if gap.is_finite() { gap / 2.0 } else { 0.5 };
    for v in &mut z {
        if *v <= 0.0 {
            *v = nudge;
        } else if *v >= 1.0 {
            *v = 1.0 - nudge;
        }
    }
    z
}
