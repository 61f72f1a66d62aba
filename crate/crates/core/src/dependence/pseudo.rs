//! Pseudo-observations and rank correlation matrices.

use crate::error::{Error, Result};
use crate::marginals::SplicedMarginal;
use crate::stats;

/// Clamp applied to parametric pseudo-observations.
pub const PSEUDO_EPS: f64 = 1e-10;

/// Rows of values strictly inside (0, 1); one column per indicator.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoObservations {
    rows: Vec<Vec<f64>>,
}

impl PseudoObservations {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        for r in &rows {
            if r.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: r.len(),
                });
            }
            if let Some(bad) = r.iter().find(|v| !(**v > 0.0 && **v < 1.0)) {
                return Err(Error::domain(format!("pseudo-observation {bad} outside (0, 1)")));
            }
        }
        Ok(Self { rows })
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[j]).collect()
    }
}

fn check_rectangular(data: &[Vec<f64>], dim: usize) -> Result<()> {
    match data.iter().find(|r| r.len() != dim) {
        Some(r) => Err(Error::DimensionMismatch {
            expected: dim,
            actual: r.len(),
        }),
        None => Ok(()),
    }
}

/// ũᵢⱼ = Fⱼ(xᵢⱼ) through the fitted marginals, clamped to
/// [`PSEUDO_EPS`], 1 − [`PSEUDO_EPS`].
pub fn pseudo_observations(data: &[Vec<f64>], marginals: &[SplicedMarginal]) -> Result<PseudoObservations> {
    check_rectangular(data, marginals.len())?;
    let rows = data
        .iter()
        .map(|r| {
            r.iter()
                .zip(marginals)
                .map(|(&x, m)| Ok(m.cdf(x)?.clamp(PSEUDO_EPS, 1.0 - PSEUDO_EPS)))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    PseudoObservations::new(rows)
}

/// Rank-based pseudo-observations: average ranks scaled by 1/(n + 1).
pub fn rank_pseudo_observations(data: &[Vec<f64>]) -> Result<PseudoObservations> {
    let dim = data.first().map_or(0, Vec::len);
    check_rectangular(data, dim)?;
    let n = data.len();
    let mut rows = vec![vec![0.0; dim]; n];
    for j in 0..dim {
        let col: Vec<f64> = data.iter().map(|r| r[j]).collect();
        for (i, r) in stats::average_ranks(&col).into_iter().enumerate() {
            rows[i][j] = r / (n as f64 + 1.0);
        }
    }
    PseudoObservations::new(rows)
}

fn pairwise<F>(data: &[Vec<f64>], f: F) -> Result<Vec<Vec<f64>>>
where
    F: Fn(&[f64], &[f64]) -> Result<f64>,
{
    let dim = data.first().map_or(0, Vec::len);
    check_rectangular(data, dim)?;
    if data.len() < 3 {
        return Err(Error::InsufficientData {
            required: 3,
            actual: data.len(),
        });
    }
    let cols: Vec<Vec<f64>> = (0..dim).map(|j| data.iter().map(|r| r[j]).collect()).collect();
    let mut out = vec![vec![1.0; dim]; dim];
    for i in 0..dim {
        for j in 0..i {
            let v = f(&cols[i], &cols[j])?;
            out[i][j] = v;
            out[j][i] = v;
        }
    }
    Ok(out)
}

/// Pairwise Spearman correlations (average ranks for ties).
pub fn spearman_matrix(data: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    pairwise(data, stats::spearman)
}

/// Pairwise Kendall tau-b.
pub fn kendall_matrix(data: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    pairwise(data, |a, b| {
        if stats::is_constant(a) || stats::is_constant(b) {
            return Err(Error::Degenerate("constant column in rank correlation".into()));
        }
        Ok(stats::kendall_tau(a, b))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::marginals::{BetaParams, GpdParams, ThresholdSpec};
    use crate::rng::{open01, StreamSeed};

    fn marginal() -> SplicedMarginal {
        SplicedMarginal::new(
            BetaParams::new(0.582, 1.137).unwrap(),
            GpdParams::new(0.492, 23.538).unwrap(),
            ThresholdSpec::new(15.0, 70, 245, 1.011).unwrap(),
        )
    }

    #[test]
    fn median_maps_to_one_half() {
        let m = marginal();
        let med = m.quantile(0.5).unwrap();
        let p = pseudo_observations(&[vec![med, med]], &[m, m]).unwrap();
        assert!((p.rows()[0][0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn round_trip_and_monotone() {
        let m = marginal();
        let xs: Vec<f64> = (0..200).map(|i| 1.02 + i as f64 * 1.7).collect();
        let rows: Vec<Vec<f64>> = xs.iter().map(|&x| vec![x]).collect();
        let p = pseudo_observations(&rows, &[m]).unwrap();
        let col = p.column(0);
        assert!(col.windows(2).all(|w| w[0] <= w[1]));
        for (x, u) in xs.iter().zip(&col) {
            assert!((m.quantile(*u).unwrap() - x).abs() <= 1e-8 * x);
        }
        assert!(pseudo_observations(&[vec![1.0, 2.0]], &[m]).is_err());
    }

    #[test]
    fn rank_pseudo_observations_average_ties() {
        let p = rank_pseudo_observations(&[vec![1.0], vec![3.0], vec![3.0]]).unwrap();
        assert_eq!(p.column(0), vec![0.25, 0.625, 0.625]);
    }

    #[test]
    fn spearman_matrix_basics() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, (i * i) as f64, -(i as f64)]).collect();
        let s = spearman_matrix(&rows).unwrap();
        assert!((s[0][1] - 1.0).abs() < 1e-15 && (s[0][2] + 1.0).abs() < 1e-15);
        assert_eq!(s[1][0], s[0][1]);

        let mut rng = StreamSeed::new(3).substream(0, 0);
        let ind: Vec<Vec<f64>> = (0..10_000).map(|_| vec![open01(&mut rng), open01(&mut rng)]).collect();
        assert!(spearman_matrix(&ind).unwrap()[0][1].abs() < 0.03);

        let constant: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, 1.0]).collect();
        assert!(spearman_matrix(&constant).is_err());
    }
}
