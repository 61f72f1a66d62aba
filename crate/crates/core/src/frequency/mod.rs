//! Annual event frequency: ARMA intensity model and Poisson counts.

mod arma;
mod diagnostics;
mod poisson;

pub use arma::{
    ar_to_pacf, arma_log_likelihood, autocovariance, fit_arma, forecast, is_stationary, pacf_to_ar, residuals,
    simulate, ArmaFit, ArmaParams, IntensitySeries,
};
pub use diagnostics::{acf_pacf, jarque_bera, ljung_box, Correlogram, TestStatistic, MIN_RESIDUALS};
pub use poisson::{poisson_inverse, sample_annual_counts, sample_poisson, validate_lambdas, AnnualCounts};
