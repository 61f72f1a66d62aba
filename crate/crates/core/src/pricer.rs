//! Monte Carlo valuation of the bond and its sensitivity sweeps.
//!
//! The price at purchase year t is
//!
//! P_t = Σ_{s=t+1}^{T} E[C_{t,s}]·p̄(t, s) + E[F_{t,T}]·p̄(t, T),
//!
//! a product of expectations: the disaster expectations and the expected
//! discount factors p̄(t, s) = E[p(t, s; r(t))] are estimated from
//! independent streams and multiplied afterwards. Each replication owns its
//! substreams (event counts, events per year, rate path), so estimates do
//! not depend on how replications are scheduled, and scenarios priced
//! together share every draw (common random numbers).

use crate::dependence::DependenceModel;
use crate::error::{Error, Result};
use crate::frequency::{poisson_inverse, validate_lambdas};
use crate::marginals::SplicedMarginal;
use crate::par::{map_indexed, ordered_sum, Execution};
use crate::rates::{discount_factor, simulate_path_into, CirParams, LANE_RATES};
use crate::rng::{open01, StreamSeed};
use crate::trigger::{
    event_scores, BondTerms, RetentionAccumulator, RetentionFunctional, TriggerLevels, YearlyRetention,
};

/// Smallest replication count accepted by [`price`].
pub const MIN_REPS: usize = 100;
/// Substream lane for the per-year count uniforms.
pub const LANE_COUNTS: u64 = 0xC0_u64 << 32;
/// Lane of the events of year k is `LANE_EVENTS + k`.
pub const LANE_EVENTS: u64 = 0xE7_u64 << 32;

/// Which cashflows a bond bought in year t > 0 carries.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum PurchaseConvention {
    /// The issue-date bond changes hands at t: retention in years 1..=t has
    /// already reduced the principal, and the buyer receives the coupons of
    /// years t+1..=T and the redemption.
    #[default]
    Seasoned,
    /// A bond issued at t: the running product starts at year t+1.
    Fresh,
}

impl PurchaseConvention {
    pub fn name(&self) -> &'static str {
        match self {
            PurchaseConvention::Seasoned => "seasoned",
            PurchaseConvention::Fresh => "fresh",
        }
    }

    /// Last year whose events precede the first retention that matters.
    fn first_year(&self, terms: &BondTerms) -> u32 {
        match self {
            PurchaseConvention::Seasoned => 0,
            PurchaseConvention::Fresh => terms.purchase_year,
        }
    }
}

impl std::fmt::Display for PurchaseConvention {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for PurchaseConvention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "seasoned" => Ok(PurchaseConvention::Seasoned),
            "fresh" => Ok(PurchaseConvention::Fresh),
            other => Err(Error::param("convention", format!("unknown purchase convention `{other}`"))),
        }
    }
}

/// Everything a pricing run needs.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelBundle {
    pub marginals: Vec<SplicedMarginal>,
    pub dependence: DependenceModel,
    /// Poisson means of years 1, 2, ... counted from issue; at least T of them.
    pub intensities: Vec<f64>,
    pub cir: CirParams,
    pub trigger: TriggerLevels,
    pub functional: RetentionFunctional,
    pub terms: BondTerms,
    pub convention: PurchaseConvention,
    /// Euler steps per year for the short rate up to the purchase year.
    pub steps_per_year: usize,
}

impl ModelBundle {
    pub fn dim(&self) -> usize {
        self.marginals.len()
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.dim();
        if m == 0 {
            return Err(Error::param("marginals", "need at least one indicator"));
        }
        for (what, d) in [("dependence", self.dependence.dim()), ("trigger", self.trigger.dim())] {
            if d != m {
                return Err(Error::param(
                    what,
                    format!("covers {d} indicators but there are {m} marginals"),
                ));
            }
        }
        if let Some(i) = self.marginals.iter().position(|mg| !(mg.spec.data_min > 0.0)) {
            return Err(Error::param(
                format!("marginals[{i}]"),
                "support must be positive for the trigger scores",
            ));
        }
        if self.steps_per_year == 0 {
            return Err(Error::param("sim.steps_per_year", "must be at least 1"));
        }
        self.scenario().validate(m)
    }

    /// The bundle's own trigger, intensities and terms.
    pub fn scenario(&self) -> Scenario {
        Scenario {
            trigger: self.trigger.clone(),
            intensities: self.intensities.clone(),
            terms: self.terms,
        }
    }

    /// The bundle restricted to the indicators in `subset`, with the
    /// dependence model marginalized onto them.
    pub fn restrict(&self, subset: &[usize]) -> Result<Self> {
        if subset.len() < 2 {
            return Err(Error::param("subset", "need at least two indicators"));
        }
        let marginals = subset
            .iter()
            .map(|&i| {
                self.marginals
                    .get(i)
                    .copied()
                    .ok_or_else(|| Error::param("subset", format!("index {i} out of range")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            marginals,
            dependence: self.dependence.marginalize(subset)?,
            trigger: self.trigger.restrict(subset)?,
            ..self.clone()
        })
    }
}

/// The parts of a bundle that vary between scenarios priced on shared draws.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub trigger: TriggerLevels,
    pub intensities: Vec<f64>,
    pub terms: BondTerms,
}

impl Scenario {
    fn validate(&self, m: usize) -> Result<()> {
        if self.trigger.dim() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                actual: self.trigger.dim(),
            });
        }
        let years = self.terms.maturity as usize;
        if self.intensities.len() < years {
            return Err(Error::param(
                "intensities",
                format!("need one per year up to maturity {years}, got {}", self.intensities.len()),
            ));
        }
        validate_lambdas(&self.intensities[..years])
    }
}

/// Monte Carlo estimate of one price.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub ci95: (f64, f64),
    pub n_reps: usize,
    pub seed: u64,
    /// E[C_{t,s}] for s = t+1..=T.
    pub expected_coupons: Vec<f64>,
    pub expected_redemption: f64,
    /// p̄(t, s) for s = t+1..=T.
    pub discount_factors: Vec<f64>,
}

/// Difference of two prices estimated on common random numbers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriceDifference {
    pub estimate: f64,
    pub std_error: f64,
}

impl PriceDifference {
    /// Estimate divided by its standard error (infinite for an exact,
    /// non-zero difference).
    pub fn z_score(&self) -> f64 {
        if self.std_error > 0.0 {
            self.estimate / self.std_error
        } else if self.estimate == 0.0 {
            0.0
        } else {
            self.estimate.signum() * f64::INFINITY
        }
    }
}

/// Prices of several scenarios on shared draws.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioPrices {
    pub estimates: Vec<PriceEstimate>,
    /// Per-replication influence values of each estimate.
    influence: Vec<Vec<f64>>,
}

impl ScenarioPrices {
    /// Price of scenario `b` minus price of scenario `a`.
    pub fn difference(&self, a: usize, b: usize) -> PriceDifference {
        let n = self.influence[a].len() as f64;
        let ss: f64 = self.influence[a]
            .iter()
            .zip(&self.influence[b])
            .map(|(x, y)| (y - x) * (y - x))
            .sum();
        PriceDifference {
            estimate: self.estimates[b].mean - self.estimates[a].mean,
            std_error: (ss / (n * (n - 1.0))).sqrt(),
        }
    }
}

/// Prices the bundle as configured.
pub fn price(bundle: &ModelBundle, n_reps: usize, seed: u64, exec: Execution) -> Result<PriceEstimate> {
    let mut out = price_scenarios(bundle, &[bundle.scenario()], n_reps, seed, exec)?;
    Ok(out.estimates.swap_remove(0))
}

/// Prices every scenario on the same replications. Marginals, dependence,
/// rates, retention functional and convention come from `bundle`.
pub fn price_scenarios(
    bundle: &ModelBundle,
    scenarios: &[Scenario],
    n_reps: usize,
    seed: u64,
    exec: Execution,
) -> Result<ScenarioPrices> {
    bundle.validate()?;
    if n_reps < MIN_REPS {
        return Err(Error::InsufficientData {
            required: MIN_REPS,
            actual: n_reps,
        });
    }
    if scenarios.is_empty() {
        return Err(Error::param("scenarios", "nothing to price"));
    }
    for s in scenarios {
        s.validate(bundle.dim())?;
    }
    let plan = Plan::new(bundle, scenarios);
    let stream = StreamSeed::new(seed);
    let draws = map_indexed(n_reps, exec, |i| plan.replicate(stream, i as u64));
    let draws = draws.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(plan.aggregate(&draws, seed))
}

/// Offsets of one scenario's values inside a replication record: coupon
/// factors, redemption factor, then discount factors.
#[derive(Debug, Clone, Copy)]
struct Layout {
    start: usize,
    years: usize,
}

impl Layout {
    fn coupons(&self) -> std::ops::Range<usize> {
        self.start..self.start + self.years
    }

    fn redemption(&self) -> usize {
        self.start + self.years
    }

    fn discounts(&self) -> std::ops::Range<usize> {
        let d = self.redemption() + 1;
        d..d + self.years
    }

    fn end(&self) -> usize {
        self.start + 2 * self.years + 1
    }
}

struct Plan<'a> {
    bundle: &'a ModelBundle,
    scenarios: &'a [Scenario],
    layouts: Vec<Layout>,
    horizon: usize,
    /// Latest purchase year, which bounds the simulated rate path.
    last_purchase: u32,
    width: usize,
}

impl<'a> Plan<'a> {
    fn new(bundle: &'a ModelBundle, scenarios: &'a [Scenario]) -> Self {
        let mut layouts = Vec::with_capacity(scenarios.len());
        let mut start = 0;
        for s in scenarios {
            let l = Layout {
                start,
                years: s.terms.remaining_years(),
            };
            start = l.end();
            layouts.push(l);
        }
        Self {
            bundle,
            scenarios,
            layouts,
            horizon: scenarios.iter().map(|s| s.terms.maturity as usize).max().unwrap_or(0),
            last_purchase: scenarios.iter().map(|s| s.terms.purchase_year).max().unwrap_or(0),
            width: start,
        }
    }

    /// Whether scenario `s`'s cashflows depend on the events of `year`.
    fn uses_year(&self, s: &Scenario, year: u32) -> bool {
        year > self.bundle.convention.first_year(&s.terms) && year <= s.terms.maturity
    }

    fn replicate(&self, seed: StreamSeed, rep: u64) -> Result<Vec<f64>> {
        let b = self.bundle;
        let m = b.dim();
        let n_sc = self.scenarios.len();
        let mut record = vec![0.0; self.width];

        let mut count_rng = seed.substream(LANE_COUNTS, rep);
        let count_u: Vec<f64> = (0..self.horizon).map(|_| open01(&mut count_rng)).collect();

        let mut carried = vec![1.0; n_sc];
        let mut counts = vec![0u64; n_sc];
        let mut acc: Vec<RetentionAccumulator> = vec![RetentionAccumulator::new(b.functional); n_sc];
        let mut u = vec![0.0; m];
        let mut x = vec![0.0; m];
        for year in 1..=self.horizon as u32 {
            let cu = count_u[year as usize - 1];
            let mut most = 0;
            for (k, s) in self.scenarios.iter().enumerate() {
                counts[k] = if self.uses_year(s, year) {
                    poisson_inverse(s.intensities[year as usize - 1], cu)
                } else {
                    0
                };
                most = most.max(counts[k]);
                acc[k] = RetentionAccumulator::new(b.functional);
            }
            let mut event_rng = seed.substream(LANE_EVENTS + year as u64, rep);
            for j in 0..most {
                b.dependence.sample_into(&mut event_rng, &mut u);
                for ((xi, &ui), mg) in x.iter_mut().zip(&u).zip(&b.marginals) {
                    *xi = mg.sample_at(ui);
                }
                for (k, s) in self.scenarios.iter().enumerate() {
                    if j < counts[k] {
                        acc[k].push(&event_scores(&x, &s.trigger)?);
                    }
                }
            }
            for (k, s) in self.scenarios.iter().enumerate() {
                if !self.uses_year(s, year) {
                    continue;
                }
                let y: YearlyRetention = acc[k].finish();
                if year > s.terms.purchase_year {
                    let l = self.layouts[k];
                    record[l.start + (year - s.terms.purchase_year - 1) as usize] = y.alpha * carried[k];
                }
                carried[k] *= y.principal_factor();
            }
        }
        for (k, l) in self.layouts.iter().enumerate() {
            record[l.redemption()] = carried[k];
        }

        let rates = self.short_rates(seed, rep);
        for (s, l) in self.scenarios.iter().zip(&self.layouts) {
            let t = s.terms.purchase_year;
            let r_t = rates[t as usize];
            for (i, slot) in record[l.discounts()].iter_mut().enumerate() {
                *slot = discount_factor(t as f64, (t as usize + i + 1) as f64, r_t, &b.cir)?;
            }
        }
        Ok(record)
    }

    /// r(0), r(1), ..., r(last purchase year) for one replication.
    fn short_rates(&self, seed: StreamSeed, rep: u64) -> Vec<f64> {
        let cir = &self.bundle.cir;
        let years = self.last_purchase as usize;
        if years == 0 || cir.vol == 0.0 {
            return (0..=years)
                .map(|t| if t == 0 { cir.r0 } else { cir.mean_rate(t as f64) })
                .collect();
        }
        let spy = self.bundle.steps_per_year;
        let mut path = vec![0.0; years * spy + 1];
        let mut rng = seed.substream(LANE_RATES, rep);
        simulate_path_into(cir, 1.0 / spy as f64, &mut rng, &mut path);
        (0..=years).map(|t| path[t * spy]).collect()
    }

    fn aggregate(&self, draws: &[Vec<f64>], seed: u64) -> ScenarioPrices {
        let n = draws.len();
        let nf = n as f64;
        // shifted by the first draw, so identical draws average exactly
        let mean_at = |j: usize| {
            let first = draws[0][j];
            let shifted: Vec<f64> = draws.iter().map(|d| d[j] - first).collect();
            first + ordered_sum(&shifted) / nf
        };
        let mut estimates = Vec::with_capacity(self.scenarios.len());
        let mut influence = Vec::with_capacity(self.scenarios.len());
        for (s, l) in self.scenarios.iter().zip(&self.layouts) {
            let c0 = s.terms.base_coupon();
            let face = s.terms.face;
            let xbar: Vec<f64> = l.coupons().map(mean_at).collect();
            let rbar = mean_at(l.redemption());
            let ybar: Vec<f64> = l.discounts().map(mean_at).collect();
            let y_last = *ybar.last().expect("at least one year to maturity");
            let mut mean = 0.0;
            for (xs, ys) in xbar.iter().zip(&ybar) {
                mean += c0 * xs * ys;
            }
            mean += face * rbar * y_last;

            // linearization of the product of means around (x̄, r̄, ȳ)
            let infl: Vec<f64> = draws
                .iter()
                .map(|d| {
                    let mut v = 0.0;
                    for (i, (xs, ys)) in xbar.iter().zip(&ybar).enumerate() {
                        let (xi, yi) = (d[l.start + i], d[l.discounts().start + i]);
                        v += c0 * (ys * (xi - xs) + xs * (yi - ys));
                    }
                    let (ri, yi) = (d[l.redemption()], d[l.discounts().end - 1]);
                    v + face * (y_last * (ri - rbar) + rbar * (yi - y_last))
                })
                .collect();
            let ss: f64 = infl.iter().map(|v| v * v).sum();
            let std_error = (ss / (nf * (nf - 1.0))).sqrt();
            estimates.push(PriceEstimate {
                mean,
                std_error,
                ci95: (mean - 1.96 * std_error, mean + 1.96 * std_error),
                n_reps: n,
                seed,
                expected_coupons: xbar.iter().map(|v| c0 * v).collect(),
                expected_redemption: face * rbar,
                discount_factors: ybar,
            });
            influence.push(infl);
        }
        ScenarioPrices { estimates, influence }
    }
}

/// Price of every (T, t) pair with t < T for the given maturities
/// on shared draws.
#[derive(Debug, Clone, PartialEq)]
pub struct MaturityTable {
    /// (maturity T, purchase year t) per cell, in the order priced.
    pub cells: Vec<(u32, u32)>,
    pub prices: ScenarioPrices,
}

impl MaturityTable {
    pub fn index(&self, maturity: u32, purchase_year: u32) -> Option<usize> {
        self.cells.iter().position(|&c| c == (maturity, purchase_year))
    }

    pub fn get(&self, maturity: u32, purchase_year: u32) -> Option<&PriceEstimate> {
        self.index(maturity, purchase_year).map(|i| &self.prices.estimates[i])
    }
}

pub fn maturity_table(
    bundle: &ModelBundle,
    maturities: &[u32],
    n_reps: usize,
    seed: u64,
    exec: Execution,
) -> Result<MaturityTable> {
    let mut cells = Vec::new();
    let mut scenarios = Vec::new();
    for &big_t in maturities {
        for t in 0..big_t {
            let terms = BondTerms::new(bundle.terms.face, bundle.terms.coupon_rate, t, big_t)?;
            cells.push((big_t, t));
            scenarios.push(Scenario {
                terms,
                ..bundle.scenario()
            });
        }
    }
    let prices = price_scenarios(bundle, &scenarios, n_reps, seed, exec)?;
    Ok(MaturityTable { cells, prices })
}

/// Prices along a one-parameter grid, with consecutive differences.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub parameter: &'static str,
    pub values: Vec<f64>,
    pub prices: ScenarioPrices,
}

impl SweepTable {
    /// Price at grid point k+1 minus price at grid point k, for each k.
    pub fn steps(&self) -> Vec<PriceDifference> {
        (1..self.values.len()).map(|k| self.prices.difference(k - 1, k)).collect()
    }
}

/// Attachment levels at the sample `q`-quantiles of the catalog columns,
/// for each `q` in the grid.
pub fn sweep_trigger_quantile(
    bundle: &ModelBundle,
    catalog_columns: &[Vec<f64>],
    q_grid: &[f64],
    n_reps: usize,
    seed: u64,
    exec: Execution,
) -> Result<SweepTable> {
    let scenarios = q_grid
        .iter()
        .map(|&q| {
            Ok(Scenario {
                trigger: TriggerLevels::from_sample_quantiles(catalog_columns, q)?,
                ..bundle.scenario()
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepTable {
        parameter: "trigger_quantile",
        values: q_grid.to_vec(),
        prices: price_scenarios(bundle, &scenarios, n_reps, seed, exec)?,
    })
}

/// The same Poisson mean Λ in every year, for each Λ in the grid.
pub fn sweep_intensity(
    bundle: &ModelBundle,
    lambda_grid: &[f64],
    n_reps: usize,
    seed: u64,
    exec: Execution,
) -> Result<SweepTable> {
    let years = bundle.terms.maturity as usize;
    let scenarios: Vec<Scenario> = lambda_grid
        .iter()
        .map(|&l| Scenario {
            intensities: vec![l; years],
            ..bundle.scenario()
        })
        .collect();
    Ok(SweepTable {
        parameter: "intensity",
        values: lambda_grid.to_vec(),
        prices: price_scenarios(bundle, &scenarios, n_reps, seed, exec)?,
    })
}

/// Price of the bond triggered by a subset of the indicators.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsetPrice {
    pub subset: Vec<usize>,
    /// The marginalized dependence model used for the subset.
    pub dependence: DependenceModel,
    pub estimate: PriceEstimate,
}

/// Prices each subset with the marginals, attachment levels and
/// marginalized dependence of its indicators. Every subset is priced from
/// the same seed.
pub fn sweep_indicator_subsets(
    bundle: &ModelBundle,
    subsets: &[Vec<usize>],
    n_reps: usize,
    seed: u64,
    exec: Execution,
) -> Result<Vec<SubsetPrice>> {
    subsets
        .iter()
        .map(|subset| {
            let restricted = bundle.restrict(subset)?;
            Ok(SubsetPrice {
                subset: subset.clone(),
                estimate: price(&restricted, n_reps, seed, exec)?,
                dependence: restricted.dependence,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dependence::{ArchimedeanFamily, NestedCopulaSpec};
    use crate::marginals::{BetaParams, GpdParams, ThresholdSpec};
    use crate::rates::expected_discount_factor;

    fn marginal(min: f64, threshold: f64, xi: f64, sigma: f64) -> SplicedMarginal {
        SplicedMarginal::new(
            BetaParams::new(1.2, 1.5).unwrap(),
            GpdParams::new(xi, sigma).unwrap(),
            ThresholdSpec::new(threshold, 25, 245, min).unwrap(),
        )
    }

    fn bundle() -> ModelBundle {
        let marginals = vec![
            marginal(1.0, 60.0, 0.3, 40.0),
            marginal(0.5, 30.0, 0.2, 20.0),
            marginal(2.0, 100.0, 0.35, 70.0),
        ];
        // attachment near the 90% quantile of each marginal
        let trigger = TriggerLevels::new(marginals.iter().map(|m| m.quantile(0.9).unwrap()).collect()).unwrap();
        ModelBundle {
            marginals,
            dependence: DependenceModel::Nested(
                NestedCopulaSpec::same_family(ArchimedeanFamily::Frank, 12.0, 5.0, vec![0, 1], 3).unwrap(),
            ),
            intensities: vec![8.0, 8.0, 8.0],
            cir: CirParams::new(0.2, 0.05, 0.05, 0.02962).unwrap(),
            trigger,
            functional: RetentionFunctional::Average,
            terms: BondTerms::new(100.0, 0.035, 0, 1).unwrap(),
            convention: PurchaseConvention::Seasoned,
            steps_per_year: 52,
        }
    }

    fn untriggered_value(b: &ModelBundle, p: impl Fn(f64, f64) -> f64) -> f64 {
        let t = b.terms.purchase_year;
        let c0 = b.terms.base_coupon();
        let mut v = 0.0;
        for s in t + 1..=b.terms.maturity {
            v += c0 * 1.0 * p(t as f64, s as f64);
        }
        v + b.terms.face * 1.0 * p(t as f64, b.terms.maturity as f64)
    }

    #[test]
    fn untriggered_bond_is_exact_without_rate_volatility() {
        let mut b = bundle();
        b.trigger = TriggerLevels::never(3);
        b.cir = CirParams::new(0.2, 0.05, 0.0, 0.02962).unwrap();
        for (t, big_t) in [(0, 1), (0, 3), (1, 3), (2, 3)] {
            b.terms = BondTerms::new(100.0, 0.035, t, big_t).unwrap();
            let est = price(&b, 200, 1, Execution::Sequential).unwrap();
            let exact = untriggered_value(&b, |t, s| discount_factor(t, s, b.cir.mean_rate(t), &b.cir).unwrap());
            assert_eq!(est.mean, exact, "t={t} T={big_t}");
            assert_eq!(est.std_error, 0.0);
        }
    }

    #[test]
    fn untriggered_bond_matches_expected_discounts() {
        let mut b = bundle();
        b.trigger = TriggerLevels::never(3);
        b.steps_per_year = 252;
        for (t, big_t) in [(1, 2), (1, 3), (2, 3)] {
            b.terms = BondTerms::new(100.0, 0.035, t, big_t).unwrap();
            let est = price(&b, 20_000, 7, Execution::Parallel).unwrap();
            let exact = untriggered_value(&b, |t, s| expected_discount_factor(t, s, &b.cir).unwrap());
            assert!(est.std_error > 0.0);
            assert!((est.mean - exact).abs() < 3.0 * est.std_error, "t={t}: {} vs {exact} ± {}", est.mean, est.std_error);
        }
    }

    #[test]
    fn zero_intensity_is_the_untriggered_value() {
        let b = bundle();
        let table = sweep_intensity(&b, &[0.0, 5.0], 200, 3, Execution::Sequential).unwrap();
        let exact = untriggered_value(&b, |t, s| discount_factor(t, s, b.cir.r0, &b.cir).unwrap());
        assert_eq!(table.prices.estimates[0].mean, exact);
        assert!(table.prices.estimates[1].mean < exact);
    }

    #[test]
    fn prices_are_bounded_and_positive() {
        let mut b = bundle();
        b.intensities = vec![60.0; 3];
        for big_t in 1..=3 {
            b.terms = BondTerms::new(100.0, 0.035, 0, big_t).unwrap();
            let est = price(&b, 300, 11, Execution::Sequential).unwrap();
            assert!(est.mean > 0.0 && est.mean <= 3.5 * big_t as f64 + 100.0);
            assert!(est.ci95.0 <= est.mean && est.mean <= est.ci95.1);
        }
    }

    #[test]
    fn deterministic_across_execution_modes_and_thread_counts() {
        let mut b = bundle();
        b.terms = BondTerms::new(100.0, 0.035, 1, 3).unwrap();
        let base = price(&b, 400, 5, Execution::Sequential).unwrap();
        for threads in [1, 4, 8] {
            let p = crate::par::with_workers(Some(threads), || price(&b, 400, 5, Execution::Parallel).unwrap());
            assert_eq!(p, base, "{threads} threads");
        }
        assert_ne!(price(&b, 400, 6, Execution::Sequential).unwrap().mean, base.mean);
    }

    #[test]
    fn coupon_rate_raises_price_on_common_numbers() {
        let mut b = bundle();
        b.terms = BondTerms::new(100.0, 0.03, 0, 3).unwrap();
        let lo = price(&b, 300, 2, Execution::Sequential).unwrap();
        b.terms = BondTerms::new(100.0, 0.035, 0, 3).unwrap();
        let hi = price(&b, 300, 2, Execution::Sequential).unwrap();
        assert!(hi.mean > lo.mean);
        assert_eq!(hi.expected_redemption, lo.expected_redemption);
    }

    #[test]
    fn standard_error_halves_with_four_times_the_replications() {
        let b = bundle();
        let ratios: Vec<f64> = (0..10)
            .map(|seed| {
                let a = price(&b, 1000, seed, Execution::Parallel).unwrap();
                let c = price(&b, 4000, seed + 100, Execution::Parallel).unwrap();
                a.std_error / c.std_error
            })
            .collect();
        for r in &ratios {
            assert!((r - 2.0).abs() < 0.4, "{ratios:?}");
        }
    }

    #[test]
    fn higher_intensity_and_lower_trigger_reduce_price() {
        let b = bundle();
        let lam = sweep_intensity(&b, &[4.0, 8.0, 16.0], 4000, 9, Execution::Parallel).unwrap();
        for d in lam.steps() {
            assert!(d.estimate < 0.0 && d.z_score() < -2.0, "{d:?}");
        }
        let cols: Vec<Vec<f64>> = b
            .marginals
            .iter()
            .map(|m| (1..1000).map(|i| m.quantile(i as f64 / 1000.0).unwrap()).collect())
            .collect();
        let q = sweep_trigger_quantile(&b, &cols, &[0.5, 0.9], 4000, 9, Execution::Parallel).unwrap();
        assert!(q.steps()[0].z_score() > 2.0);
    }

    #[test]
    fn maturity_table_layout_and_orderings() {
        let b = bundle();
        let tab = maturity_table(&b, &[1, 2, 3], 4000, 4, Execution::Parallel).unwrap();
        assert_eq!(tab.cells, vec![(1, 0), (2, 0), (2, 1), (3, 0), (3, 1), (3, 2)]);
        let p = |big_t, t| tab.get(big_t, t).unwrap().mean;
        assert!(p(1, 0) > p(2, 0) && p(2, 0) > p(3, 0));
        assert!(p(3, 0) > p(3, 1) && p(3, 1) > p(3, 2));
        assert_eq!(tab.get(3, 1).unwrap().expected_coupons.len(), 2);
    }

    #[test]
    fn fresh_purchase_restarts_the_running_product() {
        let mut b = bundle();
        b.terms = BondTerms::new(100.0, 0.035, 2, 3).unwrap();
        b.intensities = vec![8.0, 8.0, 8.0];
        b.convention = PurchaseConvention::Fresh;
        let fresh = price(&b, 2000, 8, Execution::Parallel).unwrap();
        let mut one = b.clone();
        one.terms = BondTerms::new(100.0, 0.035, 0, 1).unwrap();
        one.convention = PurchaseConvention::Seasoned;
        let issue = price(&one, 2000, 8, Execution::Parallel).unwrap();
        // same one-year disaster law, so equal expected cashflows up to noise
        let gap = fresh.expected_redemption - issue.expected_redemption;
        assert!(gap.abs() < 1.5, "{gap}");
        b.convention = PurchaseConvention::Seasoned;
        let seasoned = price(&b, 2000, 8, Execution::Parallel).unwrap();
        assert!(seasoned.expected_redemption < fresh.expected_redemption);
    }

    #[test]
    fn subsets_marginalize_and_reproduce() {
        let b = bundle();
        let rows = sweep_indicator_subsets(
            &b,
            &[vec![0, 1, 2], vec![0, 1], vec![0, 2], vec![0, 1]],
            500,
            3,
            Execution::Sequential,
        )
        .unwrap();
        assert_eq!(rows[1].estimate, rows[3].estimate);
        assert!(matches!(rows[1].dependence, DependenceModel::Flat { theta, .. } if theta == 12.0));
        assert!(matches!(rows[2].dependence, DependenceModel::Flat { theta, .. } if theta == 5.0));
        assert!(sweep_indicator_subsets(&b, &[vec![1]], 500, 3, Execution::Sequential).is_err());
    }

    #[test]
    fn invalid_bundles_are_rejected() {
        let b = bundle();
        assert!(price(&b, 99, 1, Execution::Sequential).is_err());
        let mut bad = b.clone();
        bad.intensities = vec![8.0];
        bad.terms = BondTerms::new(100.0, 0.035, 0, 2).unwrap();
        assert!(price(&bad, 100, 1, Execution::Sequential).is_err());
        let mut bad = b.clone();
        bad.trigger = TriggerLevels::never(2);
        assert!(price(&bad, 100, 1, Execution::Sequential).is_err());
        let mut bad = b;
        bad.intensities = vec![-1.0];
        assert!(price(&bad, 100, 1, Execution::Sequential).is_err());
    }
}
