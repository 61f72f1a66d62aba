//! Pearson chi-square goodness of fit with equiprobable bins.

use super::spliced::{SplicedMarginal, SPLICED_PARAMETERS};
use crate::error::{Error, Result};
use crate::special::chi2_sf;

/// Smallest expected count per bin.
pub const MIN_EXPECTED: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub p_value: f64,
    /// Bins actually used after merging.
    pub bins: usize,
    pub df: usize,
}

/// Chi-square test of `data` against the spliced model, counting all five
/// of its parameters as fitted.
pub fn chi_square_gof(data: &[f64], m: &SplicedMarginal, n_bins: usize) -> Result<ChiSquareResult> {
    chi_square_gof_cdf(data, |x| m.cdf(x), n_bins, SPLICED_PARAMETERS)
}

/// Chi-square test against an arbitrary continuous cdf. Bins are
/// equiprobable under the model; when that leaves fewer than
/// [`MIN_EXPECTED`] expected points per bin, adjacent bins are merged.
pub fn chi_square_gof_cdf<F>(data: &[f64], cdf: F, n_bins: usize, n_fitted: usize) -> Result<ChiSquareResult>
where
    F: Fn(f64) -> Result<f64>,
{
    if n_bins < 4 {
        return Err(Error::param("n_bins", "need at least 4 bins"));
    }
    if crate::stats::is_constant(data) {
        return Err(Error::Degenerate("constant sample".into()));
    }
    let n = data.len();
    let bins = n_bins.min((n as f64 / MIN_EXPECTED).floor() as usize);
    if bins < n_fitted + 2 || bins < 4 {
        return Err(Error::InsufficientData {
            required: (n_fitted + 2).max(4) * MIN_EXPECTED as usize,
            actual: n,
        });
    }
    let mut observed = vec![0usize; bins];
    for &x in data {
        let u = cdf(x)?;
        let k = ((u * bins as f64) as usize).min(bins - 1);
        observed[k] += 1;
    }
    let expected = n as f64 / bins as f64;
    let statistic: f64 = observed
        .iter()
        .map(|&o| (o as f64 - expected).powi(2) / expected)
        .sum();
    let df = bins - 1 - n_fitted;
    Ok(ChiSquareResult {
        statistic,
        p_value: chi2_sf(statistic, df as f64),
        bins,
        df,
    })
}
