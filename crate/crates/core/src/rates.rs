//! CIR short rate: closed-form zero-coupon factors and simulated paths.

use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::par::{map_indexed, ordered_sum, Execution};
use crate::rng::{SimRng, StreamSeed};
use crate::special::ln1p_over_x;

/// Substream lane for rate paths.
pub const LANE_RATES: u64 = 0x5A7E;

/// dr = k(θ − r)dt + ε√r dW.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CirParams {
    pub reversion: f64,
    pub long_run: f64,
    pub vol: f64,
    pub r0: f64,
}

impl CirParams {
    pub fn new(reversion: f64, long_run: f64, vol: f64, r0: f64) -> Result<Self> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::param(name, format!("must be positive, got {v}")))
            }
        };
        positive("reversion", reversion)?;
        positive("long_run", long_run)?;
        if !(vol >= 0.0) || !vol.is_finite() {
            return Err(Error::param("vol", format!("must be non-negative, got {vol}")));
        }
        if !(r0 >= 0.0) || !r0.is_finite() {
            return Err(Error::param("r0", format!("must be non-negative, got {r0}")));
        }
        if 2.0 * reversion * long_run < vol * vol {
            log::warn!("CIR parameters violate the Feller condition 2kθ ≥ ε²");
        }
        Ok(Self {
            reversion,
            long_run,
            vol,
            r0,
        })
    }

    /// 2kθ ≥ ε²: the rate stays strictly positive.
    pub fn feller_satisfied(&self) -> bool {
        2.0 * self.reversion * self.long_run >= self.vol * self.vol
    }

    pub fn with_r0(self, r0: f64) -> Self {
        Self { r0, ..self }
    }

    /// E[r(t)] from r(0) = r0; with ε = 0 this is the rate itself.
    pub fn mean_rate(&self, t: f64) -> f64 {
        let decay = (-self.reversion * t).exp();
        self.long_run + (self.r0 - self.long_run) * decay
    }

    fn eta(&self) -> f64 {
        (self.reversion * self.reversion + 2.0 * self.vol * self.vol).sqrt()
    }

    /// (ln A, B) for a horizon τ = s − t ≥ 0.
    ///
    /// The bracket of ln A is written through δ = η − k = 2ε²/(η + k) so
    /// the exponent 2kθ/ε² cancels analytically; this keeps the ε → 0
    /// limit exact.
    pub fn affine_coefficients(&self, tau: f64) -> (f64, f64) {
        let k = self.reversion;
        let eta = self.eta();
        let delta = 2.0 * self.vol * self.vol / (eta + k);
        let g = -(-eta * tau).exp_m1();
        let denom = 2.0 * eta - delta * g;
        let b = 2.0 * g / denom;
        let y = delta * g / (2.0 * eta);
        let c_delta = 4.0 * k * self.long_run / (eta + k);
        let ln_a = c_delta * (g / (2.0 * eta) * ln1p_over_x(-y) - tau / 2.0);
        (ln_a, b)
    }
}

/// p(t, s) = A(t, s) exp(−B(t, s) r_t).
pub fn discount_factor(t: f64, s: f64, r_t: f64, params: &CirParams) -> Result<f64> {
    if s < t {
        return Err(Error::domain(format!("maturity {s} precedes valuation time {t}")));
    }
    if !(r_t >= 0.0) {
        return Err(Error::param("r_t", format!("must be non-negative, got {r_t}")));
    }
    if s == t {
        return Ok(1.0);
    }
    let (ln_a, b) = params.affine_coefficients(s - t);
    Ok((ln_a - b * r_t).exp())
}

/// E[p(t, s)] over the law of r(t) started from r0 at time 0:
/// A(t, s)·E[exp(−B r(t))], with the Laplace transform of the scaled
/// noncentral chi-square law of r(t),
///
/// E[e^{−b r(t)}] = (1 + 2bc)^{−2kθ/ε²} exp(−b r0 e^{−kt} / (1 + 2bc)),
/// c = ε²(1 − e^{−kt}) / 4k.
pub fn expected_discount_factor(t: f64, s: f64, params: &CirParams) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::domain(format!("valuation time {t} is negative")));
    }
    if s < t {
        return Err(Error::domain(format!("maturity {s} precedes valuation time {t}")));
    }
    if s == t {
        return Ok(1.0);
    }
    let (ln_a, b) = params.affine_coefficients(s - t);
    let k = params.reversion;
    let decay = (-k * t).exp();
    let spread = -(-k * t).exp_m1();
    let x = 2.0 * b * params.vol * params.vol * spread / (4.0 * k);
    // (2kθ/ε²)·ln(1 + x) without the ε² cancellation
    let ln_shape = params.long_run * b * spread * ln1p_over_x(x);
    Ok((ln_a - ln_shape - b * params.r0 * decay / (1.0 + x)).exp())
}

/// Discount factors from a valuation time to a list of maturities.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscountCurve {
    pub valuation_time: f64,
    pub rate: f64,
    /// (maturity, factor) pairs in the order requested.
    pub factors: Vec<(f64, f64)>,
}

impl DiscountCurve {
    pub fn new(params: &CirParams, valuation_time: f64, rate: f64, maturities: &[f64]) -> Result<Self> {
        let factors = maturities
            .iter()
            .map(|&s| discount_factor(valuation_time, s, rate, params).map(|p| (s, p)))
            .collect::<Result<_>>()?;
        Ok(Self {
            valuation_time,
            rate,
            factors,
        })
    }

    pub fn get(&self, maturity: f64) -> Option<f64> {
        self.factors.iter().find(|(s, _)| *s == maturity).map(|(_, p)| *p)
    }
}

/// Simulated rates on a uniform grid; every path starts at r0.
#[derive(Debug, Clone, PartialEq)]
pub struct RatePaths {
    pub dt: f64,
    /// One row per path, `steps + 1` values each.
    pub paths: Vec<Vec<f64>>,
}

fn grid(horizon: f64, steps_per_year: usize) -> Result<(usize, f64)> {
    if steps_per_year == 0 {
        return Err(Error::param("steps_per_year", "must be at least 1"));
    }
    if !(horizon >= 0.0) || !horizon.is_finite() {
        return Err(Error::param("horizon", format!("must be non-negative, got {horizon}")));
    }
    let steps = (horizon * steps_per_year as f64).round().max(1.0) as usize;
    Ok((steps, horizon / steps as f64))
}

/// Full-truncation Euler path written into `out` (length steps + 1). The
/// latent state may go negative; the reported rate is its positive part.
pub fn simulate_path_into(params: &CirParams, dt: f64, rng: &mut SimRng, out: &mut [f64]) {
    let (k, theta, eps) = (params.reversion, params.long_run, params.vol);
    let sqrt_dt = dt.sqrt();
    let mut x = params.r0;
    out[0] = x;
    for slot in out.iter_mut().skip(1) {
        let r = x.max(0.0);
        let z: f64 = StandardNormal.sample(rng);
        x += k * (theta - r) * dt + eps * r.sqrt() * sqrt_dt * z;
        *slot = x.max(0.0);
    }
}

pub fn simulate_paths(
    params: &CirParams,
    horizon: f64,
    steps_per_year: usize,
    n_paths: usize,
    seed: StreamSeed,
    exec: Execution,
) -> Result<RatePaths> {
    let (steps, dt) = grid(horizon, steps_per_year)?;
    let paths = map_indexed(n_paths, exec, |i| {
        let mut rng = seed.substream(LANE_RATES, i as u64);
        let mut out = vec![0.0; steps + 1];
        simulate_path_into(params, dt, &mut rng, &mut out);
        out
    });
    Ok(RatePaths { dt, paths })
}

/// Trapezoidal ∫ r over a path sampled at spacing `dt`.
pub fn integrate(path: &[f64], dt: f64) -> f64 {
    match path {
        [] | [_] => 0.0,
        [first, .., last] => dt * (path.iter().sum::<f64>() - 0.5 * (first + last)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub estimate: f64,
    pub std_error: f64,
}

/// Monte Carlo E[exp(−∫ₜˢ r)] with r(t) = params.r0.
pub fn mc_discount(
    params: &CirParams,
    t: f64,
    s: f64,
    n_paths: usize,
    steps_per_year: usize,
    seed: StreamSeed,
    exec: Execution,
) -> Result<McEstimate> {
    if s < t {
        return Err(Error::domain(format!("maturity {s} precedes valuation time {t}")));
    }
    if s == t {
        return Ok(McEstimate {
            estimate: 1.0,
            std_error: 0.0,
        });
    }
    if n_paths < 2 {
        return Err(Error::InsufficientData {
            required: 2,
            actual: n_paths,
        });
    }
    let (steps, dt) = grid(s - t, steps_per_year)?;
    let values = map_indexed(n_paths, exec, |i| {
        let mut rng = seed.substream(LANE_RATES, i as u64);
        let mut out = vec![0.0; steps + 1];
        simulate_path_into(params, dt, &mut rng, &mut out);
        (-integrate(&out, dt)).exp()
    });
    let n = n_paths as f64;
    let mean = ordered_sum(&values) / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(McEstimate {
        estimate: mean,
        std_error: (var / n).sqrt(),
    })
}
