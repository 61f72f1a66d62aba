//! Frailty (mixing) distributions for Marshall–Olkin sampling. All samplers
//! return the logarithm of the draw so that large-θ frailties stay finite.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use statrs::function::beta::ln_beta;
use statrs::function::gamma::gamma;

use crate::rng::{exp1, open01};

/// ln S for S positive α-stable with Laplace transform exp(−s^α),
/// 0 < α ≤ 1 (Kanter's representation).
pub fn ln_positive_stable<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> f64 {
    if alpha >= 1.0 {
        return 0.0;
    }
    let u = PI * open01(rng);
    let e = exp1(rng);
    (alpha * u).sin().ln() - u.sin().ln() / alpha
        + (1.0 - alpha) / alpha * (((1.0 - alpha) * u).sin().ln() - e.ln())
}

/// ln G for G ~ Gamma(shape, 1); accurate for tiny shapes.
pub fn ln_gamma_variate<R: Rng + ?Sized>(shape: f64, rng: &mut R) -> f64 {
    if shape < 1.0 {
        let g = Gamma::new(shape + 1.0, 1.0).expect("positive shape").sample(rng);
        g.ln() + open01(rng).ln() / shape
    } else {
        Gamma::new(shape, 1.0).expect("positive shape").sample(rng).ln()
    }
}

/// Logarithmic-series draw with P(V = k) ∝ p^k / k, p = 1 − e^−θ, θ > 0
/// (Kemp's LK algorithm). Returned as f64 because it can exceed 2^64.
pub fn logarithmic<R: Rng + ?Sized>(theta: f64, rng: &mut R) -> f64 {
    let p = -(-theta).exp_m1();
    let v = open01(rng);
    if v >= p {
        return 1.0;
    }
    let u = open01(rng);
    let q = -(-theta * u).exp_m1();
    if v > q {
        1.0
    } else if v <= q * q {
        // ln q via ln1p keeps precision when q is within e^−θu of 1
        let ln_q = (-(-theta * u).exp()).ln_1p();
        (1.0 + v.ln() / ln_q).floor()
    } else {
        2.0
    }
}

/// Sibuya(α) draw: P(Y > k) = 1/(k B(k, 1 − α)).
pub fn sibuya<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> f64 {
    let u = open01(rng);
    if u <= alpha {
        return 1.0;
    }
    let ginv = ((1.0 - u) * gamma(1.0 - alpha)).powf(-1.0 / alpha);
    let floor = ginv.floor();
    if ginv > 4.5e15 {
        return floor;
    }
    let sf = (-(floor.ln() + ln_beta(floor, 1.0 - alpha))).exp();
    if 1.0 - u < sf {
        ginv.ceil()
    } else {
        floor
    }
}

/// ln S for S with Laplace transform exp(−v((t + s)^α − t^α)), the
/// exponentially tilted stable law. `ln_t = −inf` means no tilt.
pub fn ln_tilted_stable<R: Rng + ?Sized>(alpha: f64, ln_v: f64, ln_t: f64, rng: &mut R) -> f64 {
    if alpha >= 1.0 {
        return ln_v;
    }
    if ln_t == f64::NEG_INFINITY {
        return ln_v / alpha + ln_positive_stable(alpha, rng);
    }
    // In units of 1/t the law is tilted by exactly 1 with weight w = v t^α.
    let w = (ln_v + alpha * ln_t).exp();
    let pieces = w.ceil().max(1.0);
    let total = if pieces > 1e4 {
        // sum of many independent pieces: central limit approximation
        let mean = w * alpha;
        let sd = (w * alpha * (1.0 - alpha)).sqrt();
        let z: f64 = StandardNormal.sample(rng);
        (mean + sd * z).max(f64::MIN_POSITIVE)
    } else {
        let ln_piece = (w / pieces).ln() / alpha;
        let mut acc = 0.0;
        for _ in 0..pieces as usize {
            loop {
                let s = (ln_piece + ln_positive_stable(alpha, rng)).exp();
                if open01(rng) <= (-s).exp() {
                    acc += s;
                    break;
                }
            }
        }
        acc
    };
    total.ln() - ln_t
}

/// Sum of `n` independent Sibuya(α) draws, each kept with probability
/// c^Y (rejection otherwise), as needed for nested Frank sampling.
pub fn tilted_sibuya_sum<R: Rng + ?Sized>(alpha: f64, n: u64, ln_c: f64, rng: &mut R) -> f64 {
    let mut acc = 0.0;
    for _ in 0..n {
        loop {
            let y = sibuya(alpha, rng);
            if open01(rng).ln() <= y * ln_c {
                acc += y;
                break;
            }
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamSeed;

    fn rng() -> crate::rng::SimRng {
        StreamSeed::new(99).substream(0, 0)
    }

    #[test]
    fn stable_laplace_transform() {
        let mut r = rng();
        let alpha = 0.6;
        let n = 200_000;
        let draws: Vec<f64> = (0..n).map(|_| ln_positive_stable(alpha, &mut r).exp()).collect();
        for &s in &[0.5, 1.0, 2.0] {
            let lt = draws.iter().map(|v| (-s * v).exp()).sum::<f64>() / n as f64;
            let want = (-s.powf(alpha)).exp();
            assert!((lt - want).abs() < 0.005, "s={s} lt={lt} want={want}");
        }
    }

    #[test]
    fn tilted_stable_laplace_transform() {
        let mut r = rng();
        let (alpha, v, t) = (0.5f64, 3.0f64, 1.0f64);
        let n = 100_000;
        let draws: Vec<f64> = (0..n)
            .map(|_| ln_tilted_stable(alpha, v.ln(), t.ln(), &mut r).exp())
            .collect();
        for &s in &[0.3, 1.0] {
            let lt = draws.iter().map(|x| (-s * x).exp()).sum::<f64>() / n as f64;
            let want = (-v * ((t + s).powf(alpha) - t.powf(alpha))).exp();
            assert!((lt - want).abs() < 0.005, "s={s}");
        }
    }

    #[test]
    fn logarithmic_mean() {
        let mut r = rng();
        let theta = 2.0f64;
        let p = 1.0 - (-theta).exp();
        let want = -p / ((1.0 - p) * (1.0 - p).ln());
        let n = 200_000;
        let m = (0..n).map(|_| logarithmic(theta, &mut r)).sum::<f64>() / n as f64;
        assert!((m - want).abs() < 0.02 * want);
        let big = logarithmic(176.34, &mut r);
        assert!(big.is_finite() && big >= 1.0);
    }

    #[test]
    fn sibuya_pgf() {
        // E[z^Y] = 1 − (1 − z)^α
        let mut r = rng();
        let (alpha, n) = (0.4f64, 200_000);
        let draws: Vec<f64> = (0..n).map(|_| sibuya(alpha, &mut r)).collect();
        for &z in &[0.3f64, 0.8] {
            let got = draws.iter().map(|y| z.powf(*y)).sum::<f64>() / n as f64;
            assert!((got - (1.0 - (1.0 - z).powf(alpha))).abs() < 0.005);
        }
    }

    #[test]
    fn gamma_log_draws_are_finite_for_small_shape() {
        let mut r = rng();
        let n = 100_000;
        let shape = 0.05;
        let mut mean = 0.0;
        for _ in 0..n {
            let l = ln_gamma_variate(shape, &mut r);
            assert!(l.is_finite());
            mean += l.exp();
        }
        assert!((mean / n as f64 - shape).abs() < 0.01);
    }
}
