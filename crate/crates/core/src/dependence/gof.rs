//! Kolmogorov–Smirnov type goodness of fit for copulas with a parametric
//! bootstrap p-value.

use super::fit::fit_nested_mle;
use super::nested::{DependenceModel, NestedCopulaSpec};
use super::pseudo::PseudoObservations;
use crate::error::{Error, Result};
use crate::par::{map_indexed, Execution};
use crate::rng::StreamSeed;

/// RNG lane of the bootstrap replicates.
pub const LANE_BOOTSTRAP: u64 = 0xB0_07;

pub const MIN_BOOTSTRAP: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
    /// Replicates whose refit succeeded.
    pub n_boot: usize,
}

/// max over observations of |C_n(Uⱼ) − C_θ(Uⱼ)|, with C_n the empirical
/// copula evaluated at the observed points.
pub fn ks_statistic(rows: &[Vec<f64>], model: &DependenceModel) -> f64 {
    let n = rows.len() as f64;
    rows.iter()
        .map(|u| {
            let below = rows
                .iter()
                .filter(|v| v.iter().zip(u).all(|(a, b)| a <= b))
                .count() as f64;
            (below / n - model.cdf_unchecked(u)).abs()
        })
        .fold(0.0, f64::max)
}

/// KS test of a fitted nested copula. Each bootstrap replicate draws a
/// sample of the same size from `spec`, refits the nested model and
/// recomputes the statistic; replicate `b` uses its own RNG substream, so
/// the p-value does not depend on `exec`.
pub fn ks_gof(
    p: &PseudoObservations,
    spec: &NestedCopulaSpec,
    n_boot: usize,
    seed: StreamSeed,
    exec: Execution,
) -> Result<KsResult> {
    spec.validate()?;
    if p.len() < 2 {
        return Err(Error::InsufficientData {
            required: 2,
            actual: p.len(),
        });
    }
    if p.dim() != spec.dimension {
        return Err(Error::DimensionMismatch {
            expected: spec.dimension,
            actual: p.dim(),
        });
    }
    if n_boot < MIN_BOOTSTRAP {
        return Err(Error::param("n_boot", format!("need at least {MIN_BOOTSTRAP} replicates")));
    }
    let model = DependenceModel::Nested(spec.clone());
    let d = ks_statistic(p.rows(), &model);
    let n = p.len();
    let stats: Vec<Option<f64>> = map_indexed(n_boot, exec, |b| {
        let mut rng = seed.substream(LANE_BOOTSTRAP, b as u64);
        let sample = PseudoObservations::new(model.sample(n, &mut rng)).ok()?;
        let fit = fit_nested_mle(&sample, spec.inner_family, spec.outer_family, &spec.inner_indices).ok()?;
        Some(ks_statistic(sample.rows(), &DependenceModel::Nested(fit.spec)))
    });
    let ok: Vec<f64> = stats.into_iter().flatten().collect();
    if ok.len() * 10 < n_boot * 9 {
        return Err(Error::Convergence(format!(
            "bootstrap refits failed in {} of {n_boot} replicates",
            n_boot - ok.len()
        )));
    }
    let exceed = ok.iter().filter(|&&v| v >= d).count();
    Ok(KsResult {
        statistic: d,
        p_value: (1 + exceed) as f64 / (1 + ok.len()) as f64,
        n_boot: ok.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dependence::{sample_nested, ArchimedeanFamily};

    #[test]
    fn statistic_of_independence_on_grid_points() {
        // one point at (0.5, 0.5): C_n = 1, C = 0.25
        let m = DependenceModel::independence(2);
        assert!((ks_statistic(&[vec![0.5, 0.5]], &m) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn detects_wrong_parameters_and_is_order_invariant() {
        let truth = NestedCopulaSpec::same_family(ArchimedeanFamily::Gumbel, 4.0, 2.0, vec![0, 1], 3).unwrap();
        let wrong = NestedCopulaSpec::same_family(ArchimedeanFamily::Gumbel, 1.3, 1.1, vec![0, 1], 3).unwrap();
        let mut rng = StreamSeed::new(41).substream(0, 0);
        let p = PseudoObservations::new(sample_nested(150, &truth, &mut rng).unwrap()).unwrap();
        let seed = StreamSeed::new(5);
        let bad = ks_gof(&p, &wrong, 200, seed, Execution::Parallel).unwrap();
        assert!(bad.p_value < 0.01, "{bad:?}");
        let a = ks_gof(&p, &truth, 200, seed, Execution::Sequential).unwrap();
        let b = ks_gof(&p, &truth, 200, seed, Execution::Parallel).unwrap();
        assert_eq!(a, b);
        assert!(a.p_value > 0.01);
    }

    #[test]
    fn input_checks() {
        let s = NestedCopulaSpec::same_family(ArchimedeanFamily::Gumbel, 2.0, 1.5, vec![0, 1], 3).unwrap();
        let one = PseudoObservations::new(vec![vec![0.5; 3]]).unwrap();
        assert!(ks_gof(&one, &s, 200, StreamSeed::new(1), Execution::Sequential).is_err());
        let two = PseudoObservations::new(vec![vec![0.5; 3]; 40]).unwrap();
        assert!(ks_gof(&two, &s, 50, StreamSeed::new(1), Execution::Sequential).is_err());
    }
}
