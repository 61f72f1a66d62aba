//! One-parameter Archimedean families: generators, their inverses and
//! derivatives, and Kendall's tau.
//!
//! Generators follow the usual table forms:
//! Gumbel φ(t) = (−ln t)^θ, Clayton φ(t) = (t^−θ − 1)/θ and
//! Frank φ(t) = −ln((e^−θt − 1)/(e^−θ − 1)). Everything that can overflow
//! for large θ is evaluated in log space.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::special::{ln1p_exp, ln_abs_expm1};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ArchimedeanFamily {
    Gumbel,
    Clayton,
    Frank,
}

impl fmt::Display for ArchimedeanFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Gumbel => "gumbel",
            Self::Clayton => "clayton",
            Self::Frank => "frank",
        })
    }
}

impl FromStr for ArchimedeanFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gumbel" => Ok(Self::Gumbel),
            "clayton" => Ok(Self::Clayton),
            "frank" => Ok(Self::Frank),
            other => Err(Error::param("family", format!("unknown copula family `{other}`"))),
        }
    }
}

/// Signed logarithm: the value is `sign * exp(ln)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct SignedLn {
    pub sign: f64,
    pub ln: f64,
}

impl SignedLn {
    fn new(sign: f64, ln: f64) -> Self {
        Self { sign, ln }
    }
}

/// ln(e^a + e^b).
pub(crate) fn log_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    if hi == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

impl ArchimedeanFamily {
    /// Checks that θ lies in the family's parameter domain.
    pub fn validate(&self, theta: f64) -> Result<()> {
        let ok = theta.is_finite()
            && match self {
                Self::Gumbel => theta >= 1.0,
                Self::Clayton => theta > 0.0,
                Self::Frank => theta != 0.0,
            };
        if ok {
            Ok(())
        } else {
            let domain = match self {
                Self::Gumbel => "θ ≥ 1",
                Self::Clayton => "θ > 0",
                Self::Frank => "θ ≠ 0",
            };
            Err(Error::param("theta", format!("{self} copula needs {domain}, got {theta}")))
        }
    }

    /// Parameter value (or limit) giving the independence copula.
    pub fn independence_theta(&self) -> f64 {
        match self {
            Self::Gumbel => 1.0,
            Self::Clayton | Self::Frank => 0.0,
        }
    }

    /// φ(t) for t in (0, 1]; +inf at t = 0.
    pub fn phi(&self, t: f64, theta: f64) -> f64 {
        if t >= 1.0 {
            return 0.0;
        }
        match self {
            Self::Gumbel => (-t.ln()).powf(theta),
            Self::Clayton => (-theta * t.ln()).exp_m1() / theta,
            Self::Frank => -(ln_abs_expm1(-theta * t) - ln_abs_expm1(-theta)),
        }
    }

    /// ψ(s) = φ⁻¹(s) for s ≥ 0.
    pub fn psi(&self, s: f64, theta: f64) -> f64 {
        if s <= 0.0 {
            return 1.0;
        }
        self.psi_ln(s.ln(), theta)
    }

    /// ψ(e^ln_s), usable when s itself would under- or overflow.
    pub fn psi_ln(&self, ln_s: f64, theta: f64) -> f64 {
        if ln_s == f64::NEG_INFINITY {
            return 1.0;
        }
        match self {
            Self::Gumbel => (-(ln_s / theta).exp()).exp(),
            Self::Clayton => (-ln1p_exp(theta.ln() + ln_s) / theta).exp(),
            Self::Frank => (-frank_ln_one_minus(ln_s, theta) / theta).clamp(0.0, 1.0),
        }
    }

    /// Kendall's tau as a function of θ.
    pub fn kendall_tau(&self, theta: f64) -> f64 {
        match self {
            Self::Gumbel => 1.0 - 1.0 / theta,
            Self::Clayton => theta / (theta + 2.0),
            Self::Frank => {
                if theta.abs() < 1e-6 {
                    theta / 9.0
                } else {
                    1.0 - 4.0 / theta * (1.0 - debye1(theta))
                }
            }
        }
    }

    /// θ giving Kendall's tau `tau`, clamped to the family domain.
    pub fn theta_from_tau(&self, tau: f64) -> f64 {
        let tau = tau.clamp(-0.999, 0.999);
        match self {
            Self::Gumbel => 1.0 / (1.0 - tau.max(0.0)),
            Self::Clayton => (2.0 * tau / (1.0 - tau)).max(1e-6),
            Self::Frank => {
                if tau.abs() < 1e-9 {
                    return 1e-6f64.copysign(tau);
                }
                let (mut lo, mut hi) = if tau > 0.0 { (0.0, 1.0) } else { (-1.0, 0.0) };
                while self.kendall_tau(hi) < tau {
                    lo = hi;
                    hi *= 2.0;
                }
                while self.kendall_tau(lo) > tau {
                    hi = lo;
                    lo *= 2.0;
                }
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if self.kendall_tau(mid) < tau {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                0.5 * (lo + hi)
            }
        }
    }

    #[cfg(test)]
    /// ψ⁽ᵏ⁾(s) for k = 0..=3 as signed logs. Frank requires θ > 0.
    pub(crate) fn psi_derivatives(&self, s: f64, theta: f64) -> [SignedLn; 4] {
        Generator::new(*self, theta).psi_derivatives(s)
    }

    #[cfg(test)]
    /// ln|φ'(u)|; φ' is negative on (0, 1).
    pub(crate) fn ln_neg_phi_d1(&self, u: f64, theta: f64) -> f64 {
        Generator::new(*self, theta).phi_d1(&Coord::new(u)).1
    }

    #[cfg(test)]
    /// ln φ''(u); φ'' is positive on (0, 1).
    pub(crate) fn ln_phi_d2(&self, u: f64, theta: f64) -> f64 {
        Generator::new(*self, theta).phi_d1_d2(&Coord::new(u)).2
    }
}

/// A point u ∈ (0, 1] with ln u and ln(−ln u) precomputed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Coord {
    pub u: f64,
    pub ln_u: f64,
    pub ln_l: f64,
}

impl Coord {
    pub fn new(u: f64) -> Self {
        Self::from_ln(u.ln())
    }

    pub fn from_ln(ln_u: f64) -> Self {
        Self {
            u: ln_u.exp(),
            ln_u,
            ln_l: (-ln_u).ln(),
        }
    }
}

/// A family at a fixed θ together with its parameter-only constants.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Generator {
    pub family: ArchimedeanFamily,
    pub theta: f64,
    ln_theta: f64,
    /// Clayton: ln(θ + 1); Frank: ln|e^−θ − 1|.
    k: f64,
}

impl Generator {
    pub fn new(family: ArchimedeanFamily, theta: f64) -> Self {
        let k = match family {
            ArchimedeanFamily::Gumbel => 0.0,
            ArchimedeanFamily::Clayton => theta.ln_1p(),
            ArchimedeanFamily::Frank => ln_abs_expm1(-theta),
        };
        Self {
            family,
            theta,
            ln_theta: theta.ln(),
            k,
        }
    }

    /// (φ(u), ln|φ'(u)|) sharing the work between them.
    pub fn phi_d1(&self, c: &Coord) -> (f64, f64) {
        let t = self.theta;
        match self.family {
            ArchimedeanFamily::Gumbel => {
                let tl = t * c.ln_l;
                (tl.exp(), self.ln_theta + tl - c.ln_l - c.ln_u)
            }
            ArchimedeanFamily::Clayton => ((-t * c.ln_u).exp_m1() / t, -(t + 1.0) * c.ln_u),
            ArchimedeanFamily::Frank => {
                // e = ln(1 − e^−θu); ln|e^θu − 1| = θu + e
                let e = ln_abs_expm1(-t * c.u);
                (self.k - e, self.ln_theta - t * c.u - e)
            }
        }
    }

    /// (φ(u), ln|φ'(u)|, ln φ''(u)).
    pub fn phi_d1_d2(&self, c: &Coord) -> (f64, f64, f64) {
        let t = self.theta;
        match self.family {
            ArchimedeanFamily::Gumbel => {
                let (phi, d1) = self.phi_d1(c);
                let d2 = self.ln_theta + (t - 2.0) * c.ln_l - 2.0 * c.ln_u + (t - 1.0 - c.ln_u).ln();
                (phi, d1, d2)
            }
            ArchimedeanFamily::Clayton => {
                let (phi, d1) = self.phi_d1(c);
                (phi, d1, self.k - (t + 2.0) * c.ln_u)
            }
            ArchimedeanFamily::Frank => {
                let e = ln_abs_expm1(-t * c.u);
                (self.k - e, self.ln_theta - t * c.u - e, 2.0 * self.ln_theta - t * c.u - 2.0 * e)
            }
        }
    }

    pub fn psi_derivatives(&self, s: f64) -> [SignedLn; 4] {
        let theta = self.theta;
        match self.family {
            ArchimedeanFamily::Clayton => {
                let l = (theta * s).ln_1p();
                let mut out = [SignedLn::new(1.0, 0.0); 4];
                let mut coef = 0.0;
                for (k, slot) in out.iter_mut().enumerate() {
                    if k >= 2 {
                        coef += (1.0 + (k - 1) as f64 * theta).ln();
                    }
                    let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                    *slot = SignedLn::new(sign, coef - (1.0 / theta + k as f64) * l);
                }
                out
            }
            ArchimedeanFamily::Gumbel => {
                let a = 1.0 / theta;
                let ls = s.ln();
                let x = (a * ls).exp();
                let lpsi = -x;
                let la = -self.ln_theta;
                let p1 = la + (a - 1.0) * ls + lpsi;
                let p2 = lpsi + la + (a - 2.0) * ls + (a * x + 1.0 - a).ln();
                let br = a * a * x * x + 3.0 * a * (1.0 - a) * x + (1.0 - a) * (2.0 - a);
                let p3 = lpsi + la + (a - 3.0) * ls + br.ln();
                [
                    SignedLn::new(1.0, lpsi),
                    SignedLn::new(-1.0, p1),
                    SignedLn::new(1.0, p2),
                    SignedLn::new(-1.0, p3),
                ]
            }
            ArchimedeanFamily::Frank => {
                // g = z/(1−z), z = (1 − e^−θ) e^−s, so 1 + g = 1/(1−z) and
                // 1 + 2g = (1+z)/(1−z)
                let ln_one_minus_z = frank_ln_one_minus(s.ln(), theta);
                let lz = self.k - s;
                let lg = lz - ln_one_minus_z;
                let l1g = -ln_one_minus_z;
                let l12g = lz.exp().ln_1p() - ln_one_minus_z;
                let lt = self.ln_theta;
                [
                    SignedLn::new(1.0, (-ln_one_minus_z / theta).ln()),
                    SignedLn::new(-1.0, lg - lt),
                    SignedLn::new(1.0, lg + l1g - lt),
                    SignedLn::new(-1.0, lg + l1g + l12g - lt),
                ]
            }
        }
    }
}

/// ln(1 + e^−s (e^−θ − 1)) for the Frank generator, from ln s.
fn frank_ln_one_minus(ln_s: f64, theta: f64) -> f64 {
    let s = ln_s.exp();
    if theta > 0.0 {
        // 1 − e^−s + e^−s−θ
        let ln_a = if ln_s < -30.0 {
            ln_s + (-0.5 * s).ln_1p()
        } else {
            ln_abs_expm1(-s)
        };
        log_add_exp(ln_a, -s - theta)
    } else {
        ln1p_exp(-s + ln_abs_expm1(-theta))
    }
}

/// Debye function D₁(x) = (1/x)∫₀ˣ t/(eᵗ − 1) dt.
pub fn debye1(x: f64) -> f64 {
    if x == 0.0 {
        return 1.0;
    }
    if x < 0.0 {
        return debye1(-x) - x / 2.0;
    }
    let f = |t: f64| if t == 0.0 { 1.0 } else { t / t.exp_m1() };
    // composite Simpson; the integrand is smooth and negligible beyond 60
    let upper = x.min(60.0);
    let n = 2000;
    let h = upper / n as f64;
    let mut acc = f(0.0) + f(upper);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(i as f64 * h);
    }
    let mut integral = acc * h / 3.0;
    if x > 60.0 {
        integral = std::f64::consts::PI.powi(2) / 6.0 - tail_integral(x);
    }
    integral / x
}

/// ∫ₓ^∞ t/(eᵗ − 1) dt for large x.
fn tail_integral(x: f64) -> f64 {
    (1..=5)
        .map(|k| {
            let k = k as f64;
            (-k * x).exp() * (x / k + 1.0 / (k * k))
        })
        .sum()
}

/// Generator φ(t).
pub fn generator(t: f64, family: ArchimedeanFamily, theta: f64) -> Result<f64> {
    family.validate(theta)?;
    if !(t > 0.0 && t <= 1.0) {
        return Err(Error::domain(format!("generator argument {t} outside (0, 1]")));
    }
    Ok(family.phi(t, theta))
}

/// Inverse generator ψ(s) = φ⁻¹(s).
pub fn generator_inverse(s: f64, family: ArchimedeanFamily, theta: f64) -> Result<f64> {
    family.validate(theta)?;
    if !(s >= 0.0) {
        return Err(Error::domain(format!("inverse generator argument {s} is negative")));
    }
    Ok(family.psi(s, theta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ArchimedeanFamily::*;

    #[test]
    fn table_values() {
        assert!((generator((-1.0f64).exp(), Gumbel, 1.0).unwrap() - 1.0).abs() < 1e-15);
        let back = generator_inverse(generator(0.3, Clayton, 2.0).unwrap(), Clayton, 2.0).unwrap();
        assert!((back - 0.3).abs() < 1e-12);
        let v = generator(0.5, Frank, 176.34).unwrap();
        assert!(v.is_finite() && v > 0.0);
        // φ(0.5) = −ln((e^−88.17 − 1)/(e^−176.34 − 1)) ≈ e^−88.17
        assert!((v / (-88.17f64).exp() - 1.0).abs() < 1e-9);
        assert!(generator(0.0, Gumbel, 2.0).is_err());
        assert!(generator(0.5, Gumbel, 0.5).is_err());
        assert!(generator_inverse(-1.0, Frank, 1.0).is_err());
    }

    #[test]
    fn generators_invert_for_all_families() {
        for (fam, thetas) in [
            (Gumbel, vec![1.0, 1.6, 44.68]),
            (Clayton, vec![0.05, 2.0, 9.58]),
            (Frank, vec![-5.0, 0.5, 87.6, 176.34]),
        ] {
            for theta in thetas {
                for i in 1..100 {
                    let t = i as f64 / 100.0;
                    let back = fam.psi(fam.phi(t, theta), theta);
                    assert!((back - t).abs() < 1e-9, "{fam} θ={theta} t={t} back={back}");
                }
            }
        }
    }

    #[test]
    fn derivative_cascade_matches_finite_differences() {
        for (fam, theta) in [(Gumbel, 2.5), (Clayton, 1.7), (Frank, 6.0), (Frank, 150.0)] {
            for &s in &[0.05, 0.4, 1.3, 3.0] {
                let d = fam.psi_derivatives(s, theta);
                let val = |k: usize| d[k].sign * d[k].ln.exp();
                assert!((val(0) - fam.psi(s, theta)).abs() < 1e-12);
                let h = 1e-4 * s;
                for k in 1..4 {
                    let num = (val_at(fam, s + h, theta, k - 1) - val_at(fam, s - h, theta, k - 1)) / (2.0 * h);
                    assert!((val(k) - num).abs() < 1e-5 * val(k).abs().max(1e-12), "{fam} s={s} k={k}");
                }
            }
            for &u in &[0.1, 0.5, 0.9] {
                let h = 1e-6;
                let d1 = (fam.phi(u + h, theta) - fam.phi(u - h, theta)) / (2.0 * h);
                let got1 = -fam.ln_neg_phi_d1(u, theta).exp();
                assert!((got1 - d1).abs() < 1e-5 * d1.abs().max(1e-12), "{fam} φ' u={u}");
                let e = 1e-4 * u / theta.max(1.0);
                let dd = |x: f64| -fam.ln_neg_phi_d1(x, theta).exp();
                let d2 = (dd(u + e) - dd(u - e)) / (2.0 * e);
                let got2 = fam.ln_phi_d2(u, theta).exp();
                assert!((got2 - d2).abs() < 1e-5 * d2.abs().max(1e-12), "{fam} φ'' u={u}");
            }
        }
    }

    fn val_at(fam: ArchimedeanFamily, s: f64, theta: f64, k: usize) -> f64 {
        let d = fam.psi_derivatives(s, theta);
        d[k].sign * d[k].ln.exp()
    }

    #[test]
    fn kendall_tau_inversion() {
        assert!((Gumbel.kendall_tau(2.0) - 0.5).abs() < 1e-15);
        assert!((Clayton.kendall_tau(2.0) - 0.5).abs() < 1e-15);
        // Frank τ(θ=5) = 0.456 701
        assert!((Frank.kendall_tau(5.0) - 0.456_701).abs() < 1e-5);
        for fam in [Gumbel, Clayton, Frank] {
            for &tau in &[0.1, 0.5, 0.9] {
                let th = fam.theta_from_tau(tau);
                assert!((fam.kendall_tau(th) - tau).abs() < 1e-9, "{fam} {tau}");
            }
        }
        assert!((Frank.kendall_tau(-5.0) + 0.456_701).abs() < 1e-5);
    }

    #[test]
    fn debye_reference() {
        // D1(1) = 0.777 504 634 112 248
        assert!((debye1(1.0) - 0.777_504_634_112_248).abs() < 1e-12);
        assert!((debye1(100.0) - std::f64::consts::PI.powi(2) / 600.0).abs() < 1e-12);
    }

    #[test]
    fn family_parsing() {
        assert_eq!("Frank".parse::<ArchimedeanFamily>().unwrap(), Frank);
        assert!("gauss".parse::<ArchimedeanFamily>().is_err());
    }
}
