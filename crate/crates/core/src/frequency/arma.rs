//! ARMA(p, q) for annual intensities: exact Gaussian likelihood through the
//! innovations algorithm, and best linear forecasts.
//!
//! The model is written around the process mean m:
//! (Λₖ − m) = Σ φᵢ(Λₖ₋ᵢ − m) + eₖ + Σ θⱼ eₖ₋ⱼ. The equivalent intercept form
//! Λₖ = μ + Σ φᵢ Λₖ₋ᵢ + … has μ = m(1 − Σ φᵢ), see [`ArmaParams::intercept`].

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::optim::{self, NelderMeadOptions};
use crate::stats;

#[derive(Debug, Clone, PartialEq)]
pub struct IntensitySeries {
    years: Vec<i32>,
    counts: Vec<f64>,
}

impl IntensitySeries {
    pub fn new(years: Vec<i32>, counts: Vec<f64>) -> Result<Self> {
        if years.len() != counts.len() {
            return Err(Error::DimensionMismatch {
                expected: years.len(),
                actual: counts.len(),
            });
        }
        if let Some(w) = years.windows(2).find(|w| w[1] != w[0] + 1) {
            return Err(Error::param(
                "years",
                format!("must increase by one; {} is followed by {}", w[0], w[1]),
            ));
        }
        if let Some(bad) = counts.iter().find(|c| !(**c >= 0.0) || !c.is_finite()) {
            return Err(Error::param("count", format!("{bad} is not a non-negative number")));
        }
        Ok(Self { years, counts })
    }

    /// Consecutive years starting at `first_year`.
    pub fn from_counts(first_year: i32, counts: Vec<f64>) -> Result<Self> {
        let years = (0..counts.len() as i32).map(|i| first_year + i).collect();
        Self::new(years, counts)
    }

    pub fn years(&self) -> &[i32] {
        &self.years
    }

    pub fn counts(&self) -> &[f64] {
        &self.counts
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArmaParams {
    /// Process mean m.
    pub mean: f64,
    pub ar: Vec<f64>,
    pub ma: Vec<f64>,
    pub noise_variance: f64,
}

impl ArmaParams {
    pub fn new(mean: f64, ar: Vec<f64>, ma: Vec<f64>, noise_variance: f64) -> Result<Self> {
        if !(noise_variance > 0.0) || !noise_variance.is_finite() {
            return Err(Error::param("noise_variance", "must be positive"));
        }
        if !is_stationary(&ar) {
            return Err(Error::param("ar", "AR polynomial has a root on or inside the unit circle"));
        }
        Ok(Self {
            mean,
            ar,
            ma,
            noise_variance,
        })
    }

    pub fn p(&self) -> usize {
        self.ar.len()
    }

    pub fn q(&self) -> usize {
        self.ma.len()
    }

    /// μ in Λₖ = μ + Σ φᵢ Λₖ₋ᵢ + eₖ + Σ θⱼ eₖ₋ⱼ.
    pub fn intercept(&self) -> f64 {
        self.mean * (1.0 - self.ar.iter().sum::<f64>())
    }
}

/// AR coefficients from partial autocorrelations (Durbin–Levinson).
pub fn pacf_to_ar(pacf: &[f64]) -> Vec<f64> {
    let mut phi: Vec<f64> = Vec::with_capacity(pacf.len());
    for (k, &r) in pacf.iter().enumerate() {
        let prev = phi.clone();
        phi.push(r);
        for j in 0..k {
            phi[j] = prev[j] - r * prev[k - 1 - j];
        }
    }
    phi
}

/// Partial autocorrelations from AR coefficients; `None` if non-stationary.
pub fn ar_to_pacf(ar: &[f64]) -> Option<Vec<f64>> {
    let mut phi = ar.to_vec();
    let mut out = vec![0.0; ar.len()];
    for k in (0..ar.len()).rev() {
        let r = phi[k];
        if !(r.abs() < 1.0) {
            return None;
        }
        out[k] = r;
        let denom = 1.0 - r * r;
        let prev = phi.clone();
        for j in 0..k {
            phi[j] = (prev[j] + r * prev[k - 1 - j]) / denom;
        }
        phi.truncate(k);
    }
    Some(out)
}

pub fn is_stationary(ar: &[f64]) -> bool {
    ar_to_pacf(ar).is_some()
}

/// Roots of 1 + c₁z + … + c_d z^d (Durand–Kerner). Trailing zero
/// coefficients lower the degree.
fn poly_roots(coeffs: &[f64]) -> Vec<Complex64> {
    let d = coeffs.iter().rposition(|c| c.abs() > 1e-14).map_or(0, |i| i + 1);
    if d == 0 {
        return Vec::new();
    }
    // monic in z: z^d + (c_{d−1}/c_d) z^{d−1} + … + 1/c_d
    let lead = coeffs[d - 1];
    let mono: Vec<f64> = (0..=d)
        .map(|k| if k == 0 { 1.0 } else { coeffs[k - 1] } / lead)
        .collect();
    let eval = |z: Complex64| mono.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c);
    let seed = Complex64::new(0.4, 0.9);
    let mut roots: Vec<Complex64> = (0..d).map(|k| seed.powu(k as u32 + 1)).collect();
    for _ in 0..1000 {
        let mut change: f64 = 0.0;
        for i in 0..d {
            let mut den = Complex64::new(1.0, 0.0);
            for j in 0..d {
                if i != j {
                    den *= roots[i] - roots[j];
                }
            }
            let delta = eval(roots[i]) / den;
            roots[i] -= delta;
            change = change.max(delta.norm());
        }
        if change < 1e-15 {
            break;
        }
    }
    roots
}

/// The invertible MA polynomial with the same autocorrelations: roots
/// inside the unit circle are reflected to 1/z̄. Returns the coefficients and
/// the factor Π|z|⁻² by which the noise variance changes.
pub fn invertible_ma(ma: &[f64]) -> (Vec<f64>, f64) {
    let roots = poly_roots(ma);
    if roots.iter().all(|z| z.norm() >= 1.0) {
        return (ma.to_vec(), 1.0);
    }
    let mut scale = 1.0;
    // Π (1 − z/zᵢ)
    let mut poly = vec![Complex64::new(1.0, 0.0)];
    for z in roots {
        let z = if z.norm() < 1.0 {
            scale /= z.norm_sqr();
            1.0 / z.conj()
        } else {
            z
        };
        let mut next = vec![Complex64::new(0.0, 0.0); poly.len() + 1];
        for (k, c) in poly.iter().enumerate() {
            next[k] += c;
            next[k + 1] -= c / z;
        }
        poly = next;
    }
    let mut out: Vec<f64> = poly[1..].iter().map(|c| c.re).collect();
    out.resize(ma.len(), 0.0);
    (out, scale)
}

/// Autocovariances γ(0..=max_lag) of the ARMA process with unit noise
/// variance.
pub fn autocovariance(ar: &[f64], ma: &[f64], max_lag: usize) -> Option<Vec<f64>> {
    let (p, q) = (ar.len(), ma.len());
    let theta = |j: usize| if j == 0 { 1.0 } else if j <= q { ma[j - 1] } else { 0.0 };
    let mut psi = vec![0.0; q + 1];
    for j in 0..=q {
        psi[j] = theta(j) + (1..=j.min(p)).map(|i| ar[i - 1] * psi[j - i]).sum::<f64>();
    }
    let c = |k: usize| -> f64 { (k..=q).map(|j| theta(j) * psi[j - k]).sum() };
    let n = p + 1;
    let mut a = vec![vec![0.0; n]; n];
    let mut b = vec![0.0; n];
    for k in 0..n {
        a[k][k] += 1.0;
        for i in 1..=p {
            let lag = (k as isize - i as isize).unsigned_abs();
            a[k][lag] -= ar[i - 1];
        }
        b[k] = c(k);
    }
    let g0 = optim::solve(&a, &b)?;
    let mut g = vec![0.0; max_lag.max(p) + 1];
    g[..n].copy_from_slice(&g0);
    for k in n..g.len() {
        g[k] = (1..=p).map(|i| ar[i - 1] * g[k - i]).sum::<f64>() + c(k);
    }
    g.truncate(max_lag + 1);
    Some(g)
}

/// Output of the innovations recursion for a demeaned series.
struct Innovations {
    /// One-step predictions X̂ₜ of the demeaned series.
    pred: Vec<f64>,
    /// Mean-square prediction errors in units of σ².
    r: Vec<f64>,
    /// θₙ,ⱼ for j = 1..=width, row-major in n.
    theta: Vec<f64>,
    width: usize,
}

impl Innovations {
    fn coef(&self, n: usize, j: usize) -> f64 {
        if j == 0 || j > self.width || j > n {
            0.0
        } else {
            self.theta[n * self.width + j - 1]
        }
    }
}

/// Innovations algorithm applied to the transformed process of Ansley,
/// which makes the recursion banded after max(p, q) steps. Runs the
/// coefficient recursion up to `n_coef` steps (≥ x.len()).
fn innovations(x: &[f64], ar: &[f64], ma: &[f64], n_coef: usize) -> Option<Innovations> {
    let (p, q) = (ar.len(), ma.len());
    let m = p.max(q);
    let gamma = autocovariance(ar, ma, m + 1)?;
    let theta_full = |j: usize| if j == 0 { 1.0 } else if j <= q { ma[j - 1] } else { 0.0 };
    let band: Vec<f64> = (0..=q).map(|h| (0..=q - h).map(|r| theta_full(r) * theta_full(r + h)).sum()).collect();
    // κ(i, j) with 1-based indices
    let kappa = |i: usize, j: usize| -> f64 {
        let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
        let h = hi - lo;
        if hi <= m {
            gamma[h]
        } else if lo <= m && hi <= 2 * m {
            gamma[h] - (1..=p).map(|r| ar[r - 1] * gamma[r.abs_diff(h)]).sum::<f64>()
        } else if lo > m && h <= q {
            band[h]
        } else {
            0.0
        }
    };

    let total = n_coef.max(x.len());
    let width = m.max(1);
    let mut inn = Innovations {
        pred: vec![0.0; x.len()],
        r: vec![0.0; total + 1],
        theta: vec![0.0; (total + 1) * width],
        width,
    };
    inn.r[0] = kappa(1, 1);
    for n in 1..=total {
        let lo_band = if n >= m { n.saturating_sub(q) } else { 0 };
        for k in n - n.min(width)..n {
            if n - k > q && n >= m {
                continue;
            }
            let mut s = kappa(n + 1, k + 1);
            for j in lo_band.max(k.saturating_sub(width))..k {
                s -= inn.coef(k, k - j) * inn.coef(n, n - j) * inn.r[j];
            }
            if !(inn.r[k] > 0.0) {
                return None;
            }
            inn.theta[n * width + n - k - 1] = s / inn.r[k];
        }
        let mut vn = kappa(n + 1, n + 1);
        for j in lo_band.max(n.saturating_sub(width))..n {
            vn -= inn.coef(n, n - j).powi(2) * inn.r[j];
        }
        inn.r[n] = vn;
    }

    for t in 1..x.len() {
        let mut s = 0.0;
        if t >= m {
            for i in 1..=p {
                s += ar[i - 1] * x[t - i];
            }
        }
        for j in 1..=t.min(width) {
            s += inn.coef(t, j) * (x[t - j] - inn.pred[t - j]);
        }
        inn.pred[t] = s;
    }
    Some(inn)
}

/// Σ (Xₜ − X̂ₜ)²/rₜ₋₁ and Σ ln rₜ₋₁ for the demeaned series.
fn innovation_sums(x: &[f64], mean: f64, ar: &[f64], ma: &[f64]) -> Option<(f64, f64)> {
    let z: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let inn = innovations(&z, ar, ma, z.len())?;
    let mut s = 0.0;
    let mut log_r = 0.0;
    let mut prod = 1.0;
    for t in 0..z.len() {
        let r = inn.r[t];
        if !(r > 0.0) {
            return None;
        }
        s += (z[t] - inn.pred[t]).powi(2) / r;
        // r ≥ 1 up to rounding; batch the logarithms through a product
        prod *= r;
        if prod > 1e200 {
            log_r += prod.ln();
            prod = 1.0;
        }
    }
    Some((s, log_r + prod.ln()))
}

/// Profile (σ² concentrated out) Gaussian log-likelihood and the implied
/// noise variance.
fn profile_loglik(x: &[f64], mean: f64, ar: &[f64], ma: &[f64]) -> Option<(f64, f64)> {
    let (s, log_r) = innovation_sums(x, mean, ar, ma)?;
    let n = x.len() as f64;
    let sigma2 = s / n;
    let ll = -0.5 * (n * (2.0 * std::f64::consts::PI * sigma2).ln() + log_r + n);
    Some((ll, sigma2))
}

/// Exact Gaussian log-likelihood at the given parameters (σ² included).
pub fn arma_log_likelihood(x: &[f64], params: &ArmaParams) -> f64 {
    let Some((s, log_r)) = innovation_sums(x, params.mean, &params.ar, &params.ma) else {
        return f64::NEG_INFINITY;
    };
    let s2 = params.noise_variance;
    let n = x.len() as f64;
    -0.5 * (n * (2.0 * std::f64::consts::PI * s2).ln() + log_r + s / s2)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArmaFit {
    pub params: ArmaParams,
    /// Standard errors ordered (mean, φ₁..φₚ, θ₁..θ_q).
    pub std_errors: Option<Vec<f64>>,
    pub log_likelihood: f64,
    /// One-step innovations Λₜ − Λ̂ₜ.
    pub residuals: Vec<f64>,
}

/// PACF values at or beyond this magnitude count as non-stationary.
const PACF_LIMIT: f64 = 0.999;

/// Exact Gaussian maximum likelihood. The AR part is searched through its
/// partial autocorrelations so every candidate is stationary; the MA part
/// is unconstrained.
pub fn fit_arma(series: &IntensitySeries, p: usize, q: usize) -> Result<ArmaFit> {
    let x = series.counts();
    let need = 3 * (p + q + 1);
    if x.len() < need {
        return Err(Error::InsufficientData {
            required: need,
            actual: x.len(),
        });
    }
    if stats::is_constant(x) {
        return Err(Error::Degenerate("constant series".into()));
    }
    let mean0 = stats::mean(x);
    let sd = stats::variance(x).sqrt();
    // unconstrained coordinates: (mean / sd, atanh pacf.., ma..)
    let unpack = |z: &[f64]| -> (f64, Vec<f64>, Vec<f64>) {
        let pacf: Vec<f64> = z[1..=p].iter().map(|v| v.tanh()).collect();
        (mean0 + sd * z[0], pacf_to_ar(&pacf), z[1 + p..].to_vec())
    };
    let nll = |z: &[f64]| -> f64 {
        if z[1..=p].iter().any(|v| v.abs() > 8.0) || z[1 + p..].iter().any(|v| v.abs() > 20.0) {
            return f64::INFINITY;
        }
        let (mean, ar, ma) = unpack(z);
        profile_loglik(x, mean, &ar, &ma).map_or(f64::INFINITY, |(ll, _)| -ll)
    };

    let mut starts = Vec::new();
    let to_z = |ar: &[f64], ma: &[f64]| -> Option<Vec<f64>> {
        let pacf = ar_to_pacf(ar)?;
        let mut z = vec![0.0];
        z.extend(pacf.iter().map(|r| r.clamp(-0.95, 0.95).atanh()));
        z.extend(ma.iter().map(|v| v.clamp(-3.0, 3.0)));
        Some(z)
    };
    if let Some(z) = hannan_rissanen(x, p, q).and_then(|(ar, ma)| to_z(&ar, &ma)) {
        starts.push(z);
    }
    let yw = pacf_to_ar(&yule_walker_pacf(&sample_acf(x, p.max(1)), p));
    starts.extend(to_z(&yw, &vec![0.0; q]));
    let dim = 1 + p + q;
    let opts = NelderMeadOptions {
        max_iter: 200 * dim,
        ..Default::default()
    };
    let simplex = optim::multi_start(nll, &starts, &vec![0.1; dim], &opts)
        .ok_or_else(|| Error::Convergence("ARMA likelihood infeasible at every start".into()))?;
    let (mean, ar, ma) = unpack(&simplex.x);
    // the likelihood cannot tell an MA root from its reflection
    let (ma, _) = invertible_ma(&ma);

    // polish and measure curvature in the natural coordinates
    let natural = |w: &[f64]| -> f64 {
        let (ar, ma) = (&w[1..=p], &w[1 + p..]);
        match ar_to_pacf(ar) {
            Some(pc) if pc.iter().all(|r| r.abs() < PACF_LIMIT) => {
                profile_loglik(x, w[0], ar, ma).map_or(f64::INFINITY, |(ll, _)| -ll)
            }
            _ => f64::INFINITY,
        }
    };
    let mut w0 = vec![mean];
    w0.extend(&ar);
    w0.extend(&ma);
    let polished = optim::newton_numeric(natural, &w0, 1e-5, 50, 1e-9, 1e-10).min;
    let w = if polished.value <= simplex.value { polished.x } else { w0 };
    let (mean, ar) = (w[0], w[1..=p].to_vec());
    let (ma, _) = invertible_ma(&w[1 + p..]);

    match ar_to_pacf(&ar) {
        Some(pc) if pc.iter().all(|r| r.abs() < PACF_LIMIT) => {}
        other => {
            return Err(Error::Convergence(format!(
                "optimum is at the stationarity boundary (partial autocorrelations {other:?})"
            )))
        }
    }
    if !simplex.converged {
        log::warn!("ARMA simplex search stopped after {} iterations", simplex.iterations);
    }
    let (ll, sigma2) = profile_loglik(x, mean, &ar, &ma)
        .ok_or_else(|| Error::Convergence("likelihood undefined at the optimum".into()))?;
    let mut w = vec![mean];
    w.extend(&ar);
    w.extend(&ma);
    let h = optim::numeric_hessian(natural, &w, 1e-5);
    let std_errors = optim::standard_errors(&h);
    if std_errors.is_none() {
        log::warn!("ARMA information matrix is not positive definite");
    }
    let params = ArmaParams::new(mean, ar, ma, sigma2)?;
    let residuals = residuals(x, &params)?;
    Ok(ArmaFit {
        params,
        std_errors,
        log_likelihood: ll,
        residuals,
    })
}

/// One-step innovations Λₜ − Λ̂ₜ of the series under `params`.
pub fn residuals(x: &[f64], params: &ArmaParams) -> Result<Vec<f64>> {
    let z: Vec<f64> = x.iter().map(|v| v - params.mean).collect();
    let inn = innovations(&z, &params.ar, &params.ma, z.len())
        .ok_or_else(|| Error::Degenerate("innovations recursion broke down".into()))?;
    Ok(z.iter().zip(&inn.pred).map(|(a, b)| a - b).collect())
}

/// Two-stage regression start: a long autoregression supplies innovation
/// estimates, then the ARMA coefficients come from least squares on lagged
/// values and lagged innovations.
fn hannan_rissanen(x: &[f64], p: usize, q: usize) -> Option<(Vec<f64>, Vec<f64>)> {
    let n = x.len();
    let m = stats::mean(x);
    let z: Vec<f64> = x.iter().map(|v| v - m).collect();
    let long = ((10.0 * (n as f64).log10()) as usize).min(n / 4).max(p + q);
    let start = long + q.max(p);
    if q == 0 || long == 0 || n < start + 3 * (p + q) {
        return (q == 0).then(|| (pacf_to_ar(&yule_walker_pacf(&sample_acf(x, p.max(1)), p)), Vec::new()));
    }
    let phi_long = pacf_to_ar(&yule_walker_pacf(&sample_acf(x, long), long));
    let mut e = vec![0.0; n];
    for t in long..n {
        e[t] = z[t] - (1..=long).map(|i| phi_long[i - 1] * z[t - i]).sum::<f64>();
    }
    let k = p + q;
    let mut xtx = vec![vec![0.0; k]; k];
    let mut xty = vec![0.0; k];
    let mut row = vec![0.0; k];
    for t in start..n {
        for i in 0..p {
            row[i] = z[t - i - 1];
        }
        for j in 0..q {
            row[p + j] = e[t - j - 1];
        }
        for a in 0..k {
            xty[a] += row[a] * z[t];
            for b in 0..k {
                xtx[a][b] += row[a] * row[b];
            }
        }
    }
    let beta = optim::solve(&xtx, &xty)?;
    Some((beta[..p].to_vec(), beta[p..].to_vec()))
}

pub(crate) fn sample_acf(x: &[f64], max_lag: usize) -> Vec<f64> {
    let n = x.len();
    let m = stats::mean(x);
    let c0: f64 = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n as f64;
    (0..=max_lag)
        .map(|k| {
            if k >= n {
                return 0.0;
            }
            let ck: f64 = (0..n - k).map(|t| (x[t] - m) * (x[t + k] - m)).sum::<f64>() / n as f64;
            ck / c0
        })
        .collect()
}

/// Partial autocorrelations 1..=p from autocorrelations (Durbin–Levinson).
pub(crate) fn yule_walker_pacf(acf: &[f64], p: usize) -> Vec<f64> {
    let mut phi: Vec<f64> = Vec::new();
    let mut v = 1.0;
    let mut out = Vec::with_capacity(p);
    for k in 1..=p {
        let num = acf[k] - (1..k).map(|j| phi[j - 1] * acf[k - j]).sum::<f64>();
        let r = if v > 0.0 { num / v } else { 0.0 };
        let prev = phi.clone();
        phi.push(r);
        for j in 1..k {
            phi[j - 1] = prev[j - 1] - r * prev[k - j - 1];
        }
        v *= 1.0 - r * r;
        out.push(r);
    }
    out
}

/// Best linear forecasts Λ̂ₙ₊₁..Λ̂ₙ₊ₕ given the whole observed series. The
/// MA terms use the in-sample innovations with the finite-sample
/// innovations coefficients θₙ₊ₕ₋₁,ⱼ. Negative forecasts are floored at 0.
pub fn forecast(params: &ArmaParams, series: &IntensitySeries, horizon: usize) -> Result<Vec<f64>> {
    if horizon == 0 {
        return Ok(Vec::new());
    }
    if !is_stationary(&params.ar) {
        return Err(Error::param("ar", "forecasting needs a stationary AR part"));
    }
    let z: Vec<f64> = series.counts().iter().map(|v| v - params.mean).collect();
    let n = z.len();
    let (p, q) = (params.p(), params.q());
    let m = p.max(q);
    let inn = innovations(&z, &params.ar, &params.ma, n + horizon)
        .ok_or_else(|| Error::Degenerate("innovations recursion broke down".into()))?;
    let resid: Vec<f64> = z.iter().zip(&inn.pred).map(|(a, b)| a - b).collect();
    let mut path = z.clone();
    let mut out = Vec::with_capacity(horizon);
    for h in 1..=horizon {
        let t = n + h - 1; // predicting index t (0-based) from data up to n − 1
        let mut s = 0.0;
        if t >= m {
            for i in 1..=p {
                s += params.ar[i - 1] * path[t - i];
            }
        }
        let width = t.min(m.max(1));
        for j in h..=width {
            s += inn.coef(t, j) * resid[t - j];
        }
        path.push(s);
        let mut v = s + params.mean;
        if v < 0.0 {
            log::warn!("negative intensity forecast {v:.4} at step {h} floored at 0");
            v = 0.0;
        }
        out.push(v);
    }
    Ok(out)
}

/// Simulates `n` values of the ARMA process after a burn-in.
pub fn simulate<R: rand::Rng + ?Sized>(params: &ArmaParams, n: usize, burn_in: usize, rng: &mut R) -> Vec<f64> {
    use rand_distr::{Distribution, Normal};
    let normal = Normal::new(0.0, params.noise_variance.sqrt()).expect("positive variance");
    let (p, q) = (params.p(), params.q());
    let total = n + burn_in;
    let mut x = vec![0.0; total];
    let mut e = vec![0.0; total];
    for t in 0..total {
        e[t] = normal.sample(rng);
        let mut v = e[t];
        for i in 1..=p.min(t) {
            v += params.ar[i - 1] * x[t - i];
        }
        for j in 1..=q.min(t) {
            v += params.ma[j - 1] * e[t - j];
        }
        x[t] = v;
    }
    x[burn_in..].iter().map(|v| v + params.mean).collect()
}
