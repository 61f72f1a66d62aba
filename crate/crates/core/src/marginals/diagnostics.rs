//! Threshold-selection diagnostics: mean-excess curve and GP parameter
//! stability across a grid of thresholds.

use super::gpd::fit_gpd;

/// Rows with fewer exceedances than this are flagged and left empty.
pub const MIN_EXCEEDANCES: usize = 5;

const Z95: f64 = 1.959_963_984_540_054;

/// Empirical mean excess e_n(u); `None` when nothing exceeds `u`.
pub fn mean_excess(data: &[f64], u: f64) -> Option<f64> {
    let (sum, k) = data
        .iter()
        .filter(|&&x| x > u)
        .fold((0.0, 0usize), |(s, k), &x| (s + (x - u), k + 1));
    (k > 0).then(|| sum / k as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeanExcessPoint {
    pub threshold: f64,
    pub n_exceed: usize,
    /// `None` when the row is flagged.
    pub mean_excess: Option<f64>,
    /// Normal-approximation 95% band.
    pub band: Option<(f64, f64)>,
}

impl MeanExcessPoint {
    pub fn flagged(&self) -> bool {
        self.mean_excess.is_none()
    }
}

pub fn mean_excess_curve(data: &[f64], thresholds: &[f64]) -> Vec<MeanExcessPoint> {
    thresholds
        .iter()
        .map(|&u| {
            let ex: Vec<f64> = data.iter().filter(|&&x| x > u).map(|&x| x - u).collect();
            let k = ex.len();
            if k < MIN_EXCEEDANCES {
                return MeanExcessPoint {
                    threshold: u,
                    n_exceed: k,
                    mean_excess: None,
                    band: None,
                };
            }
            let mean = crate::stats::mean(&ex);
            let half = Z95 * (crate::stats::variance(&ex) / k as f64).sqrt();
            MeanExcessPoint {
                threshold: u,
                n_exceed: k,
                mean_excess: Some(mean),
                band: Some((mean - half, mean + half)),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityRow {
    pub threshold: f64,
    pub n_exceed: usize,
    pub shape: Option<f64>,
    pub shape_ci: Option<(f64, f64)>,
    pub scale: Option<f64>,
    pub scale_ci: Option<(f64, f64)>,
    /// Why the estimates are missing, if they are.
    pub note: Option<String>,
}

/// GP refit at every threshold in the grid. Failed fits keep their row with
/// missing estimates.
pub fn parameter_stability(data: &[f64], thresholds: &[f64]) -> Vec<StabilityRow> {
    thresholds
        .iter()
        .map(|&u| {
            let ex: Vec<f64> = data.iter().filter(|&&x| x > u).map(|&x| x - u).collect();
            let mut row = StabilityRow {
                threshold: u,
                n_exceed: ex.len(),
                shape: None,
                shape_ci: None,
                scale: None,
                scale_ci: None,
                note: None,
            };
            if ex.len() < MIN_EXCEEDANCES {
                row.note = Some(format!("only {} exceedances", ex.len()));
                return row;
            }
            match fit_gpd(&ex) {
                Ok(p) => {
                    row.shape = Some(p.shape);
                    row.scale = Some(p.scale);
                    if let Some((se_xi, se_s)) = p.std_errors {
                        row.shape_ci = Some((p.shape - Z95 * se_xi, p.shape + Z95 * se_xi));
                        row.scale_ci = Some((p.scale - Z95 * se_s, p.scale + Z95 * se_s));
                    }
                }
                Err(e) => row.note = Some(e.to_string()),
            }
            row
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::marginals::gpd::{gpd_quantile, GpdParams};
    use crate::rng::{open01, StreamSeed};

    #[test]
    fn mean_excess_small_example() {
        assert_eq!(mean_excess(&[1.0, 2.0, 3.0], 1.5), Some(1.0));
        assert_eq!(mean_excess(&[1.0, 2.0, 3.0], 3.0), None);
    }

    #[test]
    fn flags_thresholds_above_the_sample() {
        let data: Vec<f64> = (1..=100).map(f64::from).collect();
        let c = mean_excess_curve(&data, &[50.0, 97.0, 200.0]);
        assert!(!c[0].flagged());
        assert!(c[1].flagged() && c[2].flagged());
        let s = parameter_stability(&data, &[200.0]);
        assert_eq!(s.len(), 1);
        assert!(s[0].shape.is_none() && s[0].note.is_some());
    }

    #[test]
    fn exponential_mean_excess_is_flat() {
        let mut rng = StreamSeed::new(8).substream(0, 0);
        let rate = 0.5;
        let data: Vec<f64> = (0..50_000).map(|_| -open01(&mut rng).ln() / rate).collect();
        // the points share one tail, so test each against ~3 standard errors
        for p in mean_excess_curve(&data, &[0.5, 1.0, 2.0, 4.0]) {
            let (lo, hi) = p.band.unwrap();
            assert!((p.mean_excess.unwrap() - 1.0 / rate).abs() <= 0.77 * (hi - lo), "{p:?}");
        }
    }

    #[test]
    fn gpd_mean_excess_slope() {
        // e(u) = (σ + ξu)/(1 − ξ), slope ξ/(1 − ξ)
        let p = GpdParams::new(0.25, 2.0).unwrap();
        let mut rng = StreamSeed::new(13).substream(0, 0);
        let data: Vec<f64> = (0..200_000).map(|_| gpd_quantile(open01(&mut rng), &p).unwrap()).collect();
        let grid: Vec<f64> = (0..10).map(|i| i as f64 * 0.5).collect();
        let c = mean_excess_curve(&data, &grid);
        let ys: Vec<f64> = c.iter().map(|p| p.mean_excess.unwrap()).collect();
        let mx = crate::stats::mean(&grid);
        let my = crate::stats::mean(&ys);
        let slope = grid.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
            / grid.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
        assert!((slope - 0.25 / 0.75).abs() < 0.03, "slope {slope}");
    }
}
