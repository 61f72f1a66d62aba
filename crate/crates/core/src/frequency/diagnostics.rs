//! Residual tests and correlograms for the intensity model.

use crate::error::{Error, Result};
use crate::special::chi2_sf;
use crate::stats;

use super::arma::{sample_acf, yule_walker_pacf};

/// Smallest residual count accepted by the portmanteau and normality tests.
pub const MIN_RESIDUALS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestStatistic {
    pub statistic: f64,
    pub p_value: f64,
    pub df: usize,
}

/// Ljung–Box portmanteau test over lags 1..=n_lags. `n_fitted` (p + q of
/// the model that produced the residuals) is subtracted from the degrees of
/// freedom.
pub fn ljung_box(residuals: &[f64], n_lags: usize, n_fitted: usize) -> Result<TestStatistic> {
    let n = residuals.len();
    if n < MIN_RESIDUALS {
        return Err(Error::InsufficientData {
            required: MIN_RESIDUALS,
            actual: n,
        });
    }
    if n_lags == 0 || n_lags >= n {
        return Err(Error::param("n_lags", format!("must lie in 1..{n}")));
    }
    if n_lags <= n_fitted {
        return Err(Error::param("n_lags", format!("must exceed the {n_fitted} fitted coefficients")));
    }
    if stats::is_constant(residuals) {
        return Err(Error::Degenerate("constant residuals".into()));
    }
    let acf = sample_acf(residuals, n_lags);
    let nf = n as f64;
    let q = nf * (nf + 2.0) * (1..=n_lags).map(|k| acf[k] * acf[k] / (nf - k as f64)).sum::<f64>();
    let df = n_lags - n_fitted;
    Ok(TestStatistic {
        statistic: q,
        p_value: chi2_sf(q, df as f64),
        df,
    })
}

/// Jarque–Bera normality test on moment estimates of skewness and kurtosis.
pub fn jarque_bera(residuals: &[f64]) -> Result<TestStatistic> {
    let n = residuals.len();
    if n < MIN_RESIDUALS {
        return Err(Error::InsufficientData {
            required: MIN_RESIDUALS,
            actual: n,
        });
    }
    if stats::is_constant(residuals) {
        return Err(Error::Degenerate("constant residuals".into()));
    }
    let m = stats::mean(residuals);
    let moment = |k: i32| residuals.iter().map(|x| (x - m).powi(k)).sum::<f64>() / n as f64;
    let m2 = moment(2);
    let s = moment(3) / m2.powf(1.5);
    let k = moment(4) / (m2 * m2);
    let jb = n as f64 / 6.0 * (s * s + (k - 3.0).powi(2) / 4.0);
    Ok(TestStatistic {
        statistic: jb,
        p_value: chi2_sf(jb, 2.0),
        df: 2,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Correlogram {
    /// Lags 0..=max_lag.
    pub acf: Vec<f64>,
    /// Lags 1..=max_lag.
    pub pacf: Vec<f64>,
    /// Half-width 1.96/√n of the white-noise band.
    pub band: f64,
}

impl Correlogram {
    /// Lags k ≥ 1 whose ACF leaves the band.
    pub fn acf_outside(&self) -> Vec<usize> {
        (1..self.acf.len()).filter(|&k| self.acf[k].abs() > self.band).collect()
    }

    pub fn pacf_outside(&self) -> Vec<usize> {
        (0..self.pacf.len()).filter(|&i| self.pacf[i].abs() > self.band).map(|i| i + 1).collect()
    }
}

pub fn acf_pacf(series: &[f64], max_lag: usize) -> Result<Correlogram> {
    let n = series.len();
    if 2 * max_lag >= n {
        return Err(Error::param("max_lag", format!("must be below half the series length {n}")));
    }
    if stats::is_constant(series) {
        return Err(Error::Degenerate("constant series".into()));
    }
    let acf = sample_acf(series, max_lag);
    let pacf = yule_walker_pacf(&acf, max_lag);
    Ok(Correlogram {
        acf,
        pacf,
        band: 1.96 / (n as f64).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frequency::arma::{simulate, ArmaParams};
    use crate::rng::StreamSeed;
    use rand_distr::{Distribution, StandardNormal, StudentT};

    fn normals(n: usize, seed: u64, index: u64) -> Vec<f64> {
        let mut rng = StreamSeed::new(seed).substream(0, index);
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    #[test]
    fn both_tests_hold_size_under_iid_normal() {
        let trials = 500;
        let (mut lb, mut jb) = (0, 0);
        for t in 0..trials {
            let e = normals(200, 21, t);
            lb += (ljung_box(&e, 10, 0).unwrap().p_value < 0.05) as usize;
            jb += (jarque_bera(&e).unwrap().p_value < 0.05) as usize;
        }
        // binomial(500, 0.05) has sd ≈ 4.9; JB is slightly conservative at n = 200
        assert!((10..=45).contains(&lb), "LB rejections {lb}");
        assert!((10..=45).contains(&jb), "JB rejections {jb}");
    }

    #[test]
    fn ljung_box_detects_autocorrelation() {
        let p = ArmaParams::new(0.0, vec![0.7], vec![], 1.0).unwrap();
        let mut rng = StreamSeed::new(22).substream(0, 0);
        let x = simulate(&p, 300, 50, &mut rng);
        let r = ljung_box(&x, 10, 0).unwrap();
        assert!(r.p_value < 0.01);
        assert_eq!(ljung_box(&x, 10, 4).unwrap().df, 6);
    }

    #[test]
    fn jarque_bera_detects_heavy_tails() {
        let t3 = StudentT::new(3.0).unwrap();
        let mut rng = StreamSeed::new(23).substream(0, 0);
        let x: Vec<f64> = (0..500).map(|_| t3.sample(&mut rng)).collect();
        assert!(jarque_bera(&x).unwrap().p_value < 0.01);
    }

    #[test]
    fn too_few_residuals() {
        let e = normals(19, 1, 0);
        assert!(matches!(ljung_box(&e, 5, 0), Err(Error::InsufficientData { .. })));
        assert!(matches!(jarque_bera(&e), Err(Error::InsufficientData { .. })));
        let e = normals(40, 1, 0);
        assert!(ljung_box(&e, 4, 4).is_err());
    }

    #[test]
    fn white_noise_correlogram_mostly_within_band() {
        let (mut inside, mut total) = (0, 0);
        for t in 0..100 {
            let c = acf_pacf(&normals(400, 24, t), 20).unwrap();
            assert_eq!(c.acf[0], 1.0);
            total += 20;
            inside += 20 - c.acf_outside().len();
        }
        let frac = inside as f64 / total as f64;
        assert!((0.93..=0.97).contains(&frac), "{frac}");
    }

    #[test]
    fn ar1_correlogram_decays_and_pacf_cuts_off() {
        let p = ArmaParams::new(0.0, vec![0.8], vec![], 1.0).unwrap();
        let mut rng = StreamSeed::new(25).substream(0, 0);
        let x = simulate(&p, 5000, 200, &mut rng);
        let c = acf_pacf(&x, 10).unwrap();
        assert!((c.pacf[0] - 0.8).abs() < c.band);
        assert!(c.pacf[1..].iter().filter(|v| v.abs() > c.band).count() <= 1);
        // sampling error of the ACF of a persistent AR(1) exceeds the white
        // noise band; Bartlett's variance at lag k is roughly (1 + φ²)/(1 − φ²)/n
        let bartlett = ((1.0 + 0.64) / (1.0 - 0.64) / 5000.0f64).sqrt();
        for k in 1..=5 {
            assert!((c.acf[k] - 0.8f64.powi(k as i32)).abs() < 3.0 * bartlett * (k as f64).sqrt(), "lag {k}");
        }
        assert!(acf_pacf(&x[..20], 10).is_err());
    }
}
