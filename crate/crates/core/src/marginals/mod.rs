//! Per-indicator severity distributions.

mod beta;
mod diagnostics;
mod gof;
mod gpd;
mod spliced;

pub use beta::{fit_beta, BetaParams};
pub use diagnostics::{
    mean_excess, mean_excess_curve, parameter_stability, MeanExcessPoint, StabilityRow,
    MIN_EXCEEDANCES,
};
pub use gof::{chi_square_gof, chi_square_gof_cdf, ChiSquareResult, MIN_EXPECTED};
pub use gpd::{
    fit_gpd, gpd_cdf, gpd_inverse_sf, gpd_ln_pdf, gpd_neg_loglik, gpd_quantile, gpd_sf, GpdParams,
    SHAPE_TOL,
};
pub use spliced::{
    scale_body, spliced_cdf, spliced_quantile, SplicedMarginal, ThresholdSpec, SPLICED_PARAMETERS,
};
