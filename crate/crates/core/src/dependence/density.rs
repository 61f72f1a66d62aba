//! Copula log-densities. Flat copulas up to three dimensions and nested
//! copulas with a two-element inner block in three dimensions have closed
//! forms through the generator derivatives; other shapes fall back to a
//! finite-difference box volume of the distribution function.

use super::family::{log_add_exp, ArchimedeanFamily, Coord, Generator};
use super::nested::{DependenceModel, NestedCopulaSpec};

/// Log-density of the model at `u` (every coordinate strictly inside (0, 1)).
pub fn ln_density(model: &DependenceModel, u: &[f64]) -> f64 {
    let coords: Vec<Coord> = u.iter().map(|&v| Coord::new(v)).collect();
    Evaluator::new(model).ln_density(u, &coords)
}

/// Rows with the per-coordinate logarithms cached, for repeated likelihood
/// evaluation at different parameters.
#[derive(Debug, Clone)]
pub struct PreparedRows<'a> {
    rows: &'a [Vec<f64>],
    coords: Vec<Coord>,
    dim: usize,
}

impl<'a> PreparedRows<'a> {
    pub fn new(rows: &'a [Vec<f64>]) -> Self {
        let dim = rows.first().map_or(0, |r| r.len());
        let coords = rows.iter().flat_map(|r| r.iter().map(|&v| Coord::new(v))).collect();
        Self { rows, coords, dim }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Model-level constants shared by every row.
enum Evaluator<'m> {
    Independent,
    Flat(Generator),
    Nested3 {
        inner: Generator,
        outer: Generator,
        idx: [usize; 3],
    },
    Numeric(&'m DependenceModel),
}

impl<'m> Evaluator<'m> {
    fn new(model: &'m DependenceModel) -> Self {
        match model {
            DependenceModel::Flat { family, theta, .. }
                if *family == ArchimedeanFamily::Gumbel && *theta == 1.0 =>
            {
                Evaluator::Independent
            }
            DependenceModel::Flat { family, theta, dim } if *dim <= 3 && flat_analytic(*family, *theta) => {
                Evaluator::Flat(Generator::new(*family, *theta))
            }
            DependenceModel::Nested(spec) if spec.dimension == 3 => nested3(spec),
            _ => Evaluator::Numeric(model),
        }
    }

    fn ln_density(&self, u: &[f64], c: &[Coord]) -> f64 {
        match self {
            Evaluator::Independent => 0.0,
            Evaluator::Flat(g) => flat_ln_density(g, c),
            Evaluator::Nested3 { inner, outer, idx } => {
                nested3_ln_density(inner, outer, &c[idx[0]], &c[idx[1]], &c[idx[2]])
            }
            Evaluator::Numeric(model) => numeric_ln_density(model, u),
        }
    }
}

fn nested3(spec: &NestedCopulaSpec) -> Evaluator<'static> {
    let fam = spec.family();
    if spec.theta_outer == spec.theta_inner {
        return Evaluator::Flat(Generator::new(fam, spec.theta_inner));
    }
    Evaluator::Nested3 {
        inner: Generator::new(fam, spec.theta_inner),
        outer: Generator::new(fam, spec.theta_outer),
        idx: [spec.inner_indices[0], spec.inner_indices[1], spec.outer_indices()[0]],
    }
}

fn flat_analytic(family: ArchimedeanFamily, theta: f64) -> bool {
    family != ArchimedeanFamily::Frank || theta > 0.0
}

fn flat_ln_density(g: &Generator, c: &[Coord]) -> f64 {
    let mut s = 0.0;
    let mut ln_d1 = 0.0;
    for v in c {
        let (phi, d1) = g.phi_d1(v);
        s += phi;
        ln_d1 += d1;
    }
    g.psi_derivatives(s)[c.len()].ln + ln_d1
}

/// Three-dimensional nested density. With w = C₁(u₁, u₂) and
/// S₀ = φ₀(w) + φ₀(u₃):
///
/// c = φ₀'(u₃)·[ (ψ₀'''(S₀)φ₀'(w)² + ψ₀''(S₀)φ₀''(w))·∂₁C₁·∂₂C₁ + ψ₀''(S₀)φ₀'(w)·c₁ ]
fn nested3_ln_density(g1: &Generator, g0: &Generator, a: &Coord, b: &Coord, c: &Coord) -> f64 {
    let (pa, la) = g1.phi_d1(a);
    let (pb, lb) = g1.phi_d1(b);
    let d1 = g1.psi_derivatives(pa + pb);
    let w = Coord::from_ln(d1[0].ln);
    let ln_partials = d1[1].ln + la + d1[1].ln + lb;
    let ln_c1 = d1[2].ln + la + lb;
    let (pw, lw1, lw2) = g0.phi_d1_d2(&w);
    let (pc, lc) = g0.phi_d1(c);
    let d0 = g0.psi_derivatives(pw + pc);

    let pos1 = d0[3].ln + 2.0 * lw1 + lc + ln_partials;
    let neg = d0[2].ln + lw2 + lc + ln_partials;
    let pos2 = d0[2].ln + lw1 + lc + ln_c1;
    let pos = log_add_exp(pos1, pos2);
    let r = neg - pos;
    if r >= 0.0 {
        return f64::NEG_INFINITY;
    }
    pos + (-r.exp()).ln_1p()
}

/// Mixed finite difference of the distribution function over a small box.
fn numeric_ln_density(model: &DependenceModel, u: &[f64]) -> f64 {
    let m = u.len();
    let h: Vec<f64> = u.iter().map(|&v| 1e-3 * v.min(1.0 - v).max(1e-8)).collect();
    let mut vol = 0.0;
    let mut corner = vec![0.0; m];
    for mask in 0..(1u32 << m) {
        let mut sign = 1.0;
        for k in 0..m {
            if mask >> k & 1 == 1 {
                corner[k] = u[k] - h[k];
                sign = -sign;
            } else {
                corner[k] = u[k] + h[k];
            }
        }
        vol += sign * model.cdf_unchecked(&corner);
    }
    let cell: f64 = h.iter().map(|v| (2.0 * v).ln()).sum();
    if vol > 0.0 {
        vol.ln() - cell
    } else {
        f64::NEG_INFINITY
    }
}

/// Log-likelihood of a set of rows.
pub fn log_likelihood(model: &DependenceModel, rows: &[Vec<f64>]) -> f64 {
    log_likelihood_prepared(model, &PreparedRows::new(rows))
}

/// [`log_likelihood`] over rows prepared once for many evaluations.
pub fn log_likelihood_prepared(model: &DependenceModel, rows: &PreparedRows<'_>) -> f64 {
    let eval = Evaluator::new(model);
    let d = rows.dim;
    rows.rows
        .iter()
        .enumerate()
        .map(|(i, r)| eval.ln_density(r, &rows.coords[i * d..(i + 1) * d]))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ArchimedeanFamily::*;

    fn numeric(model: &DependenceModel, u: &[f64]) -> f64 {
        numeric_ln_density(model, u)
    }

    #[test]
    fn closed_forms_match_box_volumes() {
        let pts = [[0.4, 0.45, 0.5], [0.7, 0.75, 0.6], [0.3, 0.33, 0.38]];
        for (fam, t1, t0) in [(Gumbel, 3.0, 1.5), (Clayton, 4.0, 1.0), (Frank, 12.0, 4.0), (Frank, 40.0, 20.0)] {
            let nested = DependenceModel::Nested(
                NestedCopulaSpec::same_family(fam, t1, t0, vec![0, 1], 3).unwrap(),
            );
            let flat = DependenceModel::flat(fam, t0, 3).unwrap();
            let pair = DependenceModel::flat(fam, t1, 2).unwrap();
            for p in &pts {
                for model in [&nested, &flat] {
                    let (a, n) = (ln_density(model, p), numeric(model, p));
                    assert!((a - n).abs() < 1e-4, "{fam} {p:?} {a} {n}");
                }
                let (a, n) = (ln_density(&pair, &p[..2]), numeric(&pair, &p[..2]));
                assert!((a - n).abs() < 1e-4, "{fam} pair {a} {n}");
            }
        }
    }

    #[test]
    fn independence_density_is_one() {
        let m = DependenceModel::independence(3);
        assert_eq!(ln_density(&m, &[0.3, 0.4, 0.5]), 0.0);
    }

    #[test]
    fn inner_block_position_is_respected() {
        let a = DependenceModel::Nested(NestedCopulaSpec::same_family(Gumbel, 3.0, 1.4, vec![0, 2], 3).unwrap());
        let b = DependenceModel::Nested(NestedCopulaSpec::same_family(Gumbel, 3.0, 1.4, vec![0, 1], 3).unwrap());
        let u = [0.3, 0.8, 0.35];
        assert!((ln_density(&a, &u) - ln_density(&b, &[0.3, 0.35, 0.8])).abs() < 1e-12);
    }

    #[test]
    fn large_frank_parameters_stay_finite() {
        let m = DependenceModel::Nested(NestedCopulaSpec::same_family(Frank, 176.34, 87.6, vec![0, 1], 3).unwrap());
        let v = ln_density(&m, &[0.5, 0.501, 0.49]);
        assert!(v.is_finite());
    }
}
