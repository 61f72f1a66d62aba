//! Archimedean and nested Archimedean copulas over the trigger indicators.

mod density;
mod family;
mod fit;
pub mod frailty;
mod gof;
mod nested;
mod pseudo;

pub use density::{ln_density, log_likelihood, log_likelihood_prepared, PreparedRows};
pub use family::{debye1, generator, generator_inverse, ArchimedeanFamily};
pub use fit::{fit_nested_mle, NestedFit, MIN_ROWS};
pub use gof::{ks_gof, ks_statistic, KsResult, LANE_BOOTSTRAP, MIN_BOOTSTRAP};
pub use nested::{
    copula_cdf, nested_cdf, sample_archimedean, sample_nested, DependenceModel, NestedCopulaSpec,
    FRANK_SUM_LIMIT,
};
pub use pseudo::{
    kendall_matrix, pseudo_observations, rank_pseudo_observations, spearman_matrix,
    PseudoObservations, PSEUDO_EPS,
};
