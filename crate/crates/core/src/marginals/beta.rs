//! Beta model for the scaled body of the distribution.

use statrs::function::beta::ln_beta;
use statrs::function::gamma::digamma;

use crate::error::{Error, Result};
use crate::optim;
use crate::special::trigamma;
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaParams {
    pub alpha: f64,
    pub beta: f64,
    /// Standard errors of `(alpha, beta)`.
    pub std_errors: Option<(f64, f64)>,
}

impl BetaParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        for (name, v) in [("alpha", alpha), ("beta", beta)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::param(name, "must be positive and finite"));
            }
        }
        Ok(Self {
            alpha,
            beta,
            std_errors: None,
        })
    }
}

fn neg_loglik(n: f64, s1: f64, s2: f64, a: f64, b: f64) -> f64 {
    if !(a > 0.0 && b > 0.0) {
        return f64::INFINITY;
    }
    n * ln_beta(a, b) - (a - 1.0) * s1 - (b - 1.0) * s2
}

fn information(n: f64, a: f64, b: f64) -> Vec<Vec<f64>> {
    let tab = trigamma(a + b);
    vec![
        vec![n * (trigamma(a) - tab), -n * tab],
        vec![-n * tab, n * (trigamma(b) - tab)],
    ]
}

/// Maximum-likelihood Beta fit. Newton iterations on the sufficient
/// statistics Σ ln x and Σ ln(1 − x), started from the method of moments.
pub fn fit_beta(scaled: &[f64]) -> Result<BetaParams> {
    let len = scaled.len();
    if len < 10 {
        return Err(Error::InsufficientData {
            required: 10,
            actual: len,
        });
    }
    if let Some(bad) = scaled.iter().find(|v| !(**v > 0.0 && **v < 1.0)) {
        return Err(Error::domain(format!("value {bad} not strictly inside (0, 1)")));
    }
    if stats::is_constant(scaled) {
        return Err(Error::Degenerate("all values are equal".into()));
    }
    let n = len as f64;
    let s1: f64 = scaled.iter().map(|x| x.ln()).sum();
    let s2: f64 = scaled.iter().map(|x| (-x).ln_1p()).sum();
    let m = stats::mean(scaled);
    let v = stats::variance(scaled);
    let common = (m * (1.0 - m) / v - 1.0).max(0.1);
    let x0 = [m * common, (1.0 - m) * common];

    let res = optim::newton(
        |x| neg_loglik(n, s1, s2, x[0], x[1]),
        |x| {
            let dab = digamma(x[0] + x[1]);
            vec![
                n * (digamma(x[0]) - dab) - s1,
                n * (digamma(x[1]) - dab) - s2,
            ]
        },
        |x| information(n, x[0], x[1]),
        &x0,
        100,
        1e-12,
    );
    if !res.converged {
        return Err(Error::Convergence(format!(
            "Beta likelihood after {} Newton steps",
            res.iterations
        )));
    }
    let mut p = BetaParams::new(res.x[0], res.x[1])?;
    p.std_errors = optim::standard_errors(&information(n, p.alpha, p.beta)).map(|s| (s[0], s[1]));
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamSeed;
    use rand_distr::{Beta, Distribution};

    fn sample(n: usize, a: f64, b: f64, seed: u64) -> Vec<f64> {
        let mut rng = StreamSeed::new(seed).substream(0, 0);
        let d = Beta::new(a, b).unwrap();
        (0..n).map(|_| d.sample(&mut rng)).collect()
    }

    #[test]
    fn recovers_large_scale_parameters() {
        let x = sample(100_000, 1.016, 1.345, 2);
        let f = fit_beta(&x).unwrap();
        let (sa, sb) = f.std_errors.unwrap();
        assert!((f.alpha - 1.016).abs() < 3.0 * sa);
        assert!((f.beta - 1.345).abs() < 3.0 * sb);
    }

    #[test]
    fn uniform_is_beta_one_one() {
        let mut rng = StreamSeed::new(4).substream(0, 0);
        let x: Vec<f64> = (0..50_000).map(|_| crate::rng::open01(&mut rng)).collect();
        let f = fit_beta(&x).unwrap();
        assert!((f.alpha - 1.0).abs() < 0.03 && (f.beta - 1.0).abs() < 0.03);
    }

    #[test]
    fn small_shapes_converge() {
        let x = sample(5_000, 0.3, 0.4, 9);
        let f = fit_beta(&x).unwrap();
        assert!((f.alpha - 0.3).abs() < 0.03 && (f.beta - 0.4).abs() < 0.04);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(fit_beta(&[0.3; 20]), Err(Error::Degenerate(_))));
        let mut v: Vec<f64> = (1..20).map(|i| i as f64 / 20.0).collect();
        v.push(1.0);
        assert!(matches!(fit_beta(&v), Err(Error::Domain(_))));
        assert!(fit_beta(&[0.5, 0.6]).is_err());
    }
}
