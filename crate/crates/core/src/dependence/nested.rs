//! Flat and two-level nested Archimedean copulas: distribution functions,
//! sampling and marginalization.

use rand::Rng;

use super::family::ArchimedeanFamily;
use super::frailty;
use crate::error::{Error, Result};
use crate::rng::{exp1, open01};
use crate::special::ln1p_exp;

/// Closed-form m-dimensional Archimedean copula C(u) = ψ(Σ φ(uᵢ)).
pub fn copula_cdf(u: &[f64], family: ArchimedeanFamily, theta: f64) -> Result<f64> {
    family.validate(theta)?;
    check_cube(u)?;
    Ok(flat_cdf(u, family, theta))
}

fn check_cube(u: &[f64]) -> Result<()> {
    match u.iter().find(|v| !(**v >= 0.0 && **v <= 1.0)) {
        Some(bad) => Err(Error::domain(format!("copula argument {bad} outside [0, 1]"))),
        None => Ok(()),
    }
}

fn flat_cdf(u: &[f64], family: ArchimedeanFamily, theta: f64) -> f64 {
    if u.contains(&0.0) {
        return 0.0;
    }
    let mut free = u.iter().copied().filter(|&v| v < 1.0);
    let Some(first) = free.next() else {
        return 1.0;
    };
    let mut rest = free.peekable();
    if rest.peek().is_none() {
        return first;
    }
    let s = family.phi(first, theta) + rest.map(|v| family.phi(v, theta)).sum::<f64>();
    family.psi(s, theta)
}

/// Inner copula over a subset of coordinates nested in an outer copula of
/// the same family.
#[derive(Debug, Clone, PartialEq)]
pub struct NestedCopulaSpec {
    pub inner_family: ArchimedeanFamily,
    pub theta_inner: f64,
    pub inner_indices: Vec<usize>,
    pub outer_family: ArchimedeanFamily,
    pub theta_outer: f64,
    pub dimension: usize,
}

impl NestedCopulaSpec {
    pub fn new(
        inner_family: ArchimedeanFamily,
        theta_inner: f64,
        inner_indices: Vec<usize>,
        outer_family: ArchimedeanFamily,
        theta_outer: f64,
        dimension: usize,
    ) -> Result<Self> {
        let spec = Self {
            inner_family,
            theta_inner,
            inner_indices,
            outer_family,
            theta_outer,
            dimension,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Same family inside and outside.
    pub fn same_family(
        family: ArchimedeanFamily,
        theta_inner: f64,
        theta_outer: f64,
        inner_indices: Vec<usize>,
        dimension: usize,
    ) -> Result<Self> {
        Self::new(family, theta_inner, inner_indices, family, theta_outer, dimension)
    }

    pub fn validate(&self) -> Result<()> {
        if self.inner_family != self.outer_family {
            return Err(Error::Nesting(format!(
                "{} inside {} is not supported; use one family",
                self.inner_family, self.outer_family
            )));
        }
        self.inner_family.validate(self.theta_inner)?;
        self.outer_family.validate(self.theta_outer)?;
        if self.outer_family == ArchimedeanFamily::Frank && self.theta_outer < 0.0 {
            return Err(Error::Nesting("nested Frank copulas need θ > 0".into()));
        }
        if self.theta_inner < self.theta_outer {
            return Err(Error::Nesting(format!(
                "inner θ {} below outer θ {}",
                self.theta_inner, self.theta_outer
            )));
        }
        let mut seen = vec![false; self.dimension];
        for &i in &self.inner_indices {
            if i >= self.dimension || std::mem::replace(&mut seen[i], true) {
                return Err(Error::Nesting(format!("bad or repeated inner index {i}")));
            }
        }
        if self.inner_indices.len() < 2 || self.inner_indices.len() >= self.dimension {
            return Err(Error::Nesting(
                "inner block needs at least two indices and must leave one outside".into(),
            ));
        }
        Ok(())
    }

    pub fn family(&self) -> ArchimedeanFamily {
        self.outer_family
    }

    pub fn is_inner(&self, i: usize) -> bool {
        self.inner_indices.contains(&i)
    }

    /// Indices outside the inner block, ascending.
    pub fn outer_indices(&self) -> Vec<usize> {
        (0..self.dimension).filter(|i| !self.is_inner(*i)).collect()
    }
}

/// C_outer(C_inner(u_I; θ₁), u_rest; θ₂).
pub fn nested_cdf(u: &[f64], spec: &NestedCopulaSpec) -> Result<f64> {
    spec.validate()?;
    if u.len() != spec.dimension {
        return Err(Error::DimensionMismatch {
            expected: spec.dimension,
            actual: u.len(),
        });
    }
    check_cube(u)?;
    Ok(nested_cdf_unchecked(u, spec))
}

fn nested_cdf_unchecked(u: &[f64], spec: &NestedCopulaSpec) -> f64 {
    let fam = spec.family();
    let inner: Vec<f64> = spec.inner_indices.iter().map(|&i| u[i]).collect();
    let mut outer = vec![flat_cdf(&inner, fam, spec.theta_inner)];
    outer.extend(spec.outer_indices().into_iter().map(|i| u[i]));
    flat_cdf(&outer, fam, spec.theta_outer)
}

/// Smallest and largest doubles strictly inside (0, 1).
const OPEN_LO: f64 = f64::MIN_POSITIVE;
const OPEN_HI: f64 = 1.0 - f64::EPSILON / 2.0;

/// ψ in the frailty parametrization, whose Laplace-transform variable is
/// the unscaled s (differs from the table generator only for Clayton).
fn psi_frailty(family: ArchimedeanFamily, theta: f64, ln_s: f64) -> f64 {
    let u = match family {
        ArchimedeanFamily::Clayton => (-ln1p_exp(ln_s) / theta).exp(),
        _ => family.psi_ln(ln_s, theta),
    };
    u.clamp(OPEN_LO, OPEN_HI)
}

fn ln_outer_frailty<R: Rng + ?Sized>(family: ArchimedeanFamily, theta: f64, rng: &mut R) -> f64 {
    match family {
        ArchimedeanFamily::Gumbel => frailty::ln_positive_stable(1.0 / theta, rng),
        ArchimedeanFamily::Clayton => frailty::ln_gamma_variate(1.0 / theta, rng),
        ArchimedeanFamily::Frank => frailty::logarithmic(theta, rng).ln(),
    }
}

/// Above this outer frailty the nested Frank inner frailty is drawn from
/// its tilted-stable limit instead of as an explicit sum.
pub const FRANK_SUM_LIMIT: f64 = 1000.0;

fn ln_inner_frailty<R: Rng + ?Sized>(spec: &NestedCopulaSpec, ln_v0: f64, rng: &mut R) -> f64 {
    let alpha = spec.theta_outer / spec.theta_inner;
    if alpha >= 1.0 {
        return ln_v0;
    }
    match spec.family() {
        ArchimedeanFamily::Gumbel => frailty::ln_tilted_stable(alpha, ln_v0, f64::NEG_INFINITY, rng),
        ArchimedeanFamily::Clayton => frailty::ln_tilted_stable(alpha, ln_v0, 0.0, rng),
        ArchimedeanFamily::Frank => {
            // keep each Sibuya term with probability c^Y, c = 1 − e^−θ₁
            let t1 = -(-(-spec.theta_inner).exp()).ln_1p();
            let v0 = ln_v0.exp();
            if v0 <= FRANK_SUM_LIMIT {
                frailty::tilted_sibuya_sum(alpha, v0.round() as u64, -t1, rng).ln()
            } else {
                frailty::ln_tilted_stable(alpha, ln_v0, t1.ln(), rng)
            }
        }
    }
}

/// A dependence structure over the trigger indicators.
#[derive(Debug, Clone, PartialEq)]
pub enum DependenceModel {
    Flat {
        family: ArchimedeanFamily,
        theta: f64,
        dim: usize,
    },
    Nested(NestedCopulaSpec),
}

impl DependenceModel {
    pub fn flat(family: ArchimedeanFamily, theta: f64, dim: usize) -> Result<Self> {
        family.validate(theta)?;
        if dim < 2 {
            return Err(Error::param("dim", "copula dimension must be at least 2"));
        }
        if family == ArchimedeanFamily::Frank && theta < 0.0 && dim > 2 {
            return Err(Error::param("theta", "Frank with θ < 0 is a copula only for m = 2"));
        }
        Ok(DependenceModel::Flat { family, theta, dim })
    }

    /// Independence copula in `dim` dimensions.
    pub fn independence(dim: usize) -> Self {
        DependenceModel::Flat {
            family: ArchimedeanFamily::Gumbel,
            theta: 1.0,
            dim,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            DependenceModel::Flat { dim, .. } => *dim,
            DependenceModel::Nested(s) => s.dimension,
        }
    }

    pub fn family(&self) -> ArchimedeanFamily {
        match self {
            DependenceModel::Flat { family, .. } => *family,
            DependenceModel::Nested(s) => s.family(),
        }
    }

    pub fn cdf(&self, u: &[f64]) -> Result<f64> {
        if u.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: u.len(),
            });
        }
        check_cube(u)?;
        Ok(self.cdf_unchecked(u))
    }

    pub(crate) fn cdf_unchecked(&self, u: &[f64]) -> f64 {
        match self {
            DependenceModel::Flat { family, theta, .. } => flat_cdf(u, *family, *theta),
            DependenceModel::Nested(s) => nested_cdf_unchecked(u, s),
        }
    }

    /// Fills `out` (length [`dim`](Self::dim)) with one draw.
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        match self {
            DependenceModel::Flat { family, theta, dim } => {
                debug_assert_eq!(out.len(), *dim);
                if *family == ArchimedeanFamily::Frank && *theta < 0.0 {
                    frank_conditional_pair(*theta, rng, out);
                    return;
                }
                let ln_v = ln_outer_frailty(*family, *theta, rng);
                for slot in out.iter_mut() {
                    *slot = psi_frailty(*family, *theta, exp1(rng).ln() - ln_v);
                }
            }
            DependenceModel::Nested(spec) => {
                let fam = spec.family();
                let ln_v0 = ln_outer_frailty(fam, spec.theta_outer, rng);
                let ln_v01 = ln_inner_frailty(spec, ln_v0, rng);
                for (i, slot) in out.iter_mut().enumerate() {
                    *slot = if spec.is_inner(i) {
                        psi_frailty(fam, spec.theta_inner, exp1(rng).ln() - ln_v01)
                    } else {
                        psi_frailty(fam, spec.theta_outer, exp1(rng).ln() - ln_v0)
                    };
                }
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<Vec<f64>> {
        (0..n)
            .map(|_| {
                let mut row = vec![0.0; self.dim()];
                self.sample_into(rng, &mut row);
                row
            })
            .collect()
    }

    /// Restriction to the coordinates in `subset`, in that order.
    ///
    /// A nested model stays nested when the subset keeps at least two inner
    /// coordinates and at least one outer one. Otherwise it collapses to a
    /// flat copula: with θ₁ when only inner coordinates remain, with θ₂ when
    /// at most one inner coordinate remains.
    pub fn marginalize(&self, subset: &[usize]) -> Result<DependenceModel> {
        let dim = self.dim();
        if subset.len() < 2 {
            return Err(Error::param("subset", "need at least two indicators"));
        }
        let mut seen = vec![false; dim];
        for &i in subset {
            if i >= dim || std::mem::replace(&mut seen[i], true) {
                return Err(Error::param("subset", format!("bad or repeated index {i}")));
            }
        }
        let k = subset.len();
        match self {
            DependenceModel::Flat { family, theta, .. } => Self::flat(*family, *theta, k),
            DependenceModel::Nested(spec) => {
                let inner_pos: Vec<usize> = subset
                    .iter()
                    .enumerate()
                    .filter(|(_, i)| spec.is_inner(**i))
                    .map(|(pos, _)| pos)
                    .collect();
                let fam = spec.family();
                if inner_pos.len() == k {
                    Self::flat(fam, spec.theta_inner, k)
                } else if inner_pos.len() >= 2 {
                    Ok(DependenceModel::Nested(NestedCopulaSpec::same_family(
                        fam,
                        spec.theta_inner,
                        spec.theta_outer,
                        inner_pos,
                        k,
                    )?))
                } else {
                    Self::flat(fam, spec.theta_outer, k)
                }
            }
        }
    }
}

impl std::fmt::Display for DependenceModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DependenceModel::Flat { family, theta, dim } => write!(f, "flat {family} theta={theta} dim={dim}"),
            DependenceModel::Nested(s) => write!(
                f,
                "nested {} theta_inner={} inner={:?} theta_outer={} dim={}",
                s.family(),
                s.theta_inner,
                s.inner_indices,
                s.theta_outer,
                s.dimension
            ),
        }
    }
}

/// Bivariate Frank by conditional inversion (valid for either sign of θ).
fn frank_conditional_pair<R: Rng + ?Sized>(theta: f64, rng: &mut R, out: &mut [f64]) {
    let u = open01(rng);
    let w = open01(rng);
    let a = (-theta * u).exp();
    let v = -(1.0 + w * (-theta).exp_m1() / (w + (1.0 - w) * a)).ln() / theta;
    out[0] = u;
    out[1] = v.clamp(OPEN_LO, OPEN_HI);
}

/// n i.i.d. draws from the flat m-dimensional copula.
pub fn sample_archimedean<R: Rng + ?Sized>(
    n: usize,
    dim: usize,
    family: ArchimedeanFamily,
    theta: f64,
    rng: &mut R,
) -> Result<Vec<Vec<f64>>> {
    Ok(DependenceModel::flat(family, theta, dim)?.sample(n, rng))
}

/// n i.i.d. draws from the nested copula.
pub fn sample_nested<R: Rng + ?Sized>(n: usize, spec: &NestedCopulaSpec, rng: &mut R) -> Result<Vec<Vec<f64>>> {
    spec.validate()?;
    Ok(DependenceModel::Nested(spec.clone()).sample(n, rng))
}
