//! Event severity scores, yearly retention indices and the bond cashflows
//! they drive.
//!
//! For an event with indicator vector x and attachment levels u, write
//! rᵢ = (xᵢ − uᵢ)₊ / xᵢ for the exceedance ratio of indicator i. The scores
//! are products over single indicators, pairs and triples:
//!
//! s = ∏ᵢ (1 − rᵢ),  s* = ∏_{i<j} (1 − rᵢrⱼ),  s** = ∏_{i<j<k} (1 − rᵢrⱼrₖ)
//!
//! A year's events are reduced to (α, β, γ) by a retention functional.
//! Coupons shrink with α and with the running product of β (halved in any
//! year with γ < 1); the redemption shrinks with that running product.

use crate::error::{Error, Result};
use crate::stats;

/// Attachment levels, one per indicator. `+∞` is allowed and means the
/// indicator never triggers.
#[derive(Debug, Clone, PartialEq)]
pub struct TriggerLevels {
    u: Vec<f64>,
}

impl TriggerLevels {
    pub fn new(u: Vec<f64>) -> Result<Self> {
        if u.is_empty() {
            return Err(Error::param("trigger", "need at least one attachment level"));
        }
        if let Some((i, v)) = u.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
            return Err(Error::param(
                format!("trigger.u[{i}]"),
                format!("attachment levels must be positive, got {v}"),
            ));
        }
        Ok(Self { u })
    }

    /// Levels that no finite event ever exceeds.
    pub fn never(m: usize) -> Self {
        Self {
            u: vec![f64::INFINITY; m],
        }
    }

    /// Per-indicator sample `q`-quantiles (type 7) of the catalog columns.
    pub fn from_sample_quantiles(columns: &[Vec<f64>], q: f64) -> Result<Self> {
        if !(q > 0.0 && q < 1.0) {
            return Err(Error::param("trigger.quantile", format!("must lie in (0, 1), got {q}")));
        }
        if let Some(i) = columns.iter().position(|c| c.is_empty()) {
            return Err(Error::InsufficientData {
                required: 1,
                actual: columns[i].len(),
            });
        }
        Self::new(columns.iter().map(|c| stats::quantile(c, q)).collect())
    }

    pub fn levels(&self) -> &[f64] {
        &self.u
    }

    pub fn dim(&self) -> usize {
        self.u.len()
    }

    /// Levels for the indicators in `subset`, in that order.
    pub fn restrict(&self, subset: &[usize]) -> Result<Self> {
        let u = subset
            .iter()
            .map(|&i| {
                self.u
                    .get(i)
                    .copied()
                    .ok_or_else(|| Error::param("subset", format!("index {i} out of range")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(u)
    }
}

/// Scores of one event. For m ≤ 3 and positive indicators,
/// 0 < s ≤ s* ≤ s** ≤ 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventScores {
    pub s: f64,
    pub s_star: f64,
    pub s_dstar: f64,
}

impl EventScores {
    pub const UNTRIGGERED: EventScores = EventScores {
        s: 1.0,
        s_star: 1.0,
        s_dstar: 1.0,
    };
}

/// Largest indicator count handled without allocation in [`event_scores`].
const STACK_DIM: usize = 8;

/// Scores of the event `x` against `levels`.
///
/// The pair and triple products run over all index combinations, so the
/// cost is O(m³). The ordering s ≤ s* ≤ s** is guaranteed for m ≤ 3 only;
/// with four or more indicators near-certain exceedances can push s* below s.
pub fn event_scores(x: &[f64], levels: &TriggerLevels) -> Result<EventScores> {
    let m = levels.dim();
    if x.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            actual: x.len(),
        });
    }
    if let Some((i, v)) = x.iter().enumerate().find(|(_, v)| !(**v > 0.0) || !v.is_finite()) {
        return Err(Error::domain(format!(
            "indicator {i} must be positive and finite, got {v}"
        )));
    }
    if m <= STACK_DIM {
        let mut r = [0.0; STACK_DIM];
        fill_ratios(x, &levels.u, &mut r[..m]);
        Ok(scores_from_ratios(&r[..m]))
    } else {
        let mut r = vec![0.0; m];
        fill_ratios(x, &levels.u, &mut r);
        Ok(scores_from_ratios(&r))
    }
}

fn fill_ratios(x: &[f64], u: &[f64], r: &mut [f64]) {
    for ((ri, &xi), &ui) in r.iter_mut().zip(x).zip(u) {
        *ri = if xi > ui { (xi - ui) / xi } else { 0.0 };
    }
}

/// Scores from exceedance ratios in [0, 1).
pub(crate) fn scores_from_ratios(r: &[f64]) -> EventScores {
    let m = r.len();
    let mut s = 1.0;
    let mut s_star = 1.0;
    let mut s_dstar = 1.0;
    for i in 0..m {
        if r[i] == 0.0 {
            continue;
        }
        s *= 1.0 - r[i];
        for j in i + 1..m {
            let rij = r[i] * r[j];
            if rij == 0.0 {
                continue;
            }
            s_star *= 1.0 - rij;
            for &rk in &r[j + 1..] {
                s_dstar *= 1.0 - rij * rk;
            }
        }
    }
    EventScores { s, s_star, s_dstar }
}

/// How a year's event scores are reduced to one retention index.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub enum RetentionFunctional {
    /// Mean over the year's events.
    #[default]
    Average,
    /// Largest score of the year.
    Maximum,
}

impl RetentionFunctional {
    pub fn name(&self) -> &'static str {
        match self {
            RetentionFunctional::Average => "average",
            RetentionFunctional::Maximum => "maximum",
        }
    }

    /// The functional applied to `values`; an empty list gives 1.
    pub fn apply(&self, values: &[f64]) -> f64 {
        if values.is_empty() {
            return 1.0;
        }
        match self {
            RetentionFunctional::Average => values.iter().sum::<f64>() / values.len() as f64,
            RetentionFunctional::Maximum => values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

impl std::fmt::Display for RetentionFunctional {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for RetentionFunctional {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "average" | "mean" => Ok(RetentionFunctional::Average),
            "maximum" | "max" => Ok(RetentionFunctional::Maximum),
            other => Err(Error::param("retention", format!("unknown functional `{other}`"))),
        }
    }
}

/// Retention indices of one year, each in (0, 1].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct YearlyRetention {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl YearlyRetention {
    pub const FULL: YearlyRetention = YearlyRetention {
        alpha: 1.0,
        beta: 1.0,
        gamma: 1.0,
    };

    /// β, halved when γ < 1: the factor the principal carries out of this year.
    pub fn principal_factor(&self) -> f64 {
        if self.gamma < 1.0 {
            0.5 * self.beta
        } else {
            self.beta
        }
    }
}

/// Streaming form of [`yearly_retention`], for simulation loops that
/// should not collect a year's scores.
#[derive(Debug, Clone, Copy)]
pub struct RetentionAccumulator {
    functional: RetentionFunctional,
    n: usize,
    acc: [f64; 3],
}

impl RetentionAccumulator {
    pub fn new(functional: RetentionFunctional) -> Self {
        let init = match functional {
            RetentionFunctional::Average => 0.0,
            RetentionFunctional::Maximum => f64::NEG_INFINITY,
        };
        Self {
            functional,
            n: 0,
            acc: [init; 3],
        }
    }

    pub fn push(&mut self, e: &EventScores) {
        self.n += 1;
        let v = [e.s, e.s_star, e.s_dstar];
        match self.functional {
            RetentionFunctional::Average => {
                for (a, x) in self.acc.iter_mut().zip(v) {
                    *a += x;
                }
            }
            RetentionFunctional::Maximum => {
                for (a, x) in self.acc.iter_mut().zip(v) {
                    *a = a.max(x);
                }
            }
        }
    }

    pub fn finish(&self) -> YearlyRetention {
        if self.n == 0 {
            return YearlyRetention::FULL;
        }
        let [a, b, c] = match self.functional {
            RetentionFunctional::Average => self.acc.map(|v| v / self.n as f64),
            RetentionFunctional::Maximum => self.acc,
        };
        YearlyRetention {
            alpha: a,
            beta: b,
            gamma: c,
        }
    }
}

/// (α, β, γ) for one year's events. A year without events retains fully.
pub fn yearly_retention(scores: &[EventScores], functional: RetentionFunctional) -> YearlyRetention {
    let mut acc = RetentionAccumulator::new(functional);
    for e in scores {
        acc.push(e);
    }
    acc.finish()
}

/// Face value F, coupon rate R, purchase year t and maturity T.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BondTerms {
    pub face: f64,
    pub coupon_rate: f64,
    pub purchase_year: u32,
    pub maturity: u32,
}

impl BondTerms {
    pub fn new(face: f64, coupon_rate: f64, purchase_year: u32, maturity: u32) -> Result<Self> {
        if !(face > 0.0 && face.is_finite()) {
            return Err(Error::param("bond.face", format!("must be positive, got {face}")));
        }
        if !(coupon_rate > 0.0 && coupon_rate < 1.0) {
            return Err(Error::param(
                "bond.coupon_rate",
                format!("must lie in (0, 1), got {coupon_rate}"),
            ));
        }
        if purchase_year >= maturity {
            return Err(Error::param(
                "bond.purchase_year",
                format!("must be before the maturity {maturity}, got {purchase_year}"),
            ));
        }
        Ok(Self {
            face,
            coupon_rate,
            purchase_year,
            maturity,
        })
    }

    /// C₀ = F·R.
    pub fn base_coupon(&self) -> f64 {
        self.face * self.coupon_rate
    }

    /// T − t.
    pub fn remaining_years(&self) -> usize {
        (self.maturity - self.purchase_year) as usize
    }

    pub fn with_purchase_year(&self, t: u32) -> Result<Self> {
        Self::new(self.face, self.coupon_rate, t, self.maturity)
    }

    pub fn with_maturity(&self, maturity: u32) -> Result<Self> {
        Self::new(self.face, self.coupon_rate, self.purchase_year, maturity)
    }
}

/// Coupons for years t+1..=T and the redemption paid at T.
#[derive(Debug, Clone, PartialEq)]
pub struct CashflowSchedule {
    pub purchase_year: u32,
    pub coupons: Vec<f64>,
    pub redemption: f64,
}

impl CashflowSchedule {
    /// Coupon paid in `year`, if the schedule covers it.
    pub fn coupon(&self, year: u32) -> Option<f64> {
        let k = year.checked_sub(self.purchase_year + 1)? as usize;
        self.coupons.get(k).copied()
    }

    pub fn maturity(&self) -> u32 {
        self.purchase_year + self.coupons.len() as u32
    }
}

/// Cashflows of a bond bought at t given the retentions of years t+1..=T.
///
/// The coupon of year s is α_s·C₀ times the principal factors of the years
/// strictly between t and s; the redemption carries the factors of all
/// years t+1..=T.
pub fn cashflows(retentions: &[YearlyRetention], terms: &BondTerms) -> Result<CashflowSchedule> {
    let n = terms.remaining_years();
    if retentions.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: retentions.len(),
        });
    }
    let c0 = terms.base_coupon();
    let mut carried = 1.0;
    let mut coupons = Vec::with_capacity(n);
    for y in retentions {
        coupons.push(y.alpha * carried * c0);
        carried *= y.principal_factor();
    }
    Ok(CashflowSchedule {
        purchase_year: terms.purchase_year,
        coupons,
        redemption: carried * terms.face,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn levels(u: &[f64]) -> TriggerLevels {
        TriggerLevels::new(u.to_vec()).unwrap()
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn no_exceedance_scores_one() {
        let e = event_scores(&[1.0, 2.0, 3.0], &levels(&[1.0, 5.0, 3.0])).unwrap();
        assert_eq!(e, EventScores::UNTRIGGERED);
    }

    #[test]
    fn single_and_double_exceedances() {
        let u = levels(&[2.0, 3.0, 5.0]);
        let e = event_scores(&[4.0, 3.0, 5.0], &u).unwrap();
        assert_eq!((e.s, e.s_star, e.s_dstar), (0.5, 1.0, 1.0));
        let e = event_scores(&[4.0, 6.0, 5.0], &u).unwrap();
        assert_eq!((e.s, e.s_star, e.s_dstar), (0.25, 0.75, 1.0));
    }

    #[test]
    fn triple_exceedance_by_hand() {
        // ratios 1/2, 2/3, 3/4
        let e = event_scores(&[2.0, 3.0, 4.0], &levels(&[1.0, 1.0, 1.0])).unwrap();
        assert!(close(e.s, 0.5 / 3.0 / 4.0));
        assert!(close(e.s_star, (1.0 - 1.0 / 3.0) * (1.0 - 3.0 / 8.0) * (1.0 - 0.5)));
        assert!(close(e.s_dstar, 0.75));
    }

    #[test]
    fn two_indicators_never_reach_the_triple_score() {
        let e = event_scores(&[10.0, 10.0], &levels(&[1.0, 1.0])).unwrap();
        assert_eq!(e.s_dstar, 1.0);
        assert!(close(e.s_star, 1.0 - 0.81));
    }

    #[test]
    fn infinite_levels_never_trigger() {
        let e = event_scores(&[1e300, 5.0, 7.0], &TriggerLevels::never(3)).unwrap();
        assert_eq!(e, EventScores::UNTRIGGERED);
    }

    #[test]
    fn bad_inputs_are_rejected() {
        let u = levels(&[1.0, 1.0]);
        assert!(event_scores(&[0.0, 1.0], &u).is_err());
        assert!(event_scores(&[-1.0, 1.0], &u).is_err());
        assert!(event_scores(&[f64::NAN, 1.0], &u).is_err());
        assert!(event_scores(&[1.0], &u).is_err());
        assert!(TriggerLevels::new(vec![1.0, 0.0]).is_err());
        assert!(TriggerLevels::new(vec![]).is_err());
        assert!(TriggerLevels::from_sample_quantiles(&[vec![1.0, 2.0]], 1.0).is_err());
    }

    #[test]
    fn wide_events_use_the_heap_path() {
        let x = vec![2.0; STACK_DIM + 2];
        let e = event_scores(&x, &levels(&[1.0; STACK_DIM + 2])).unwrap();
        let m = (STACK_DIM + 2) as i32;
        assert!(close(e.s, 0.5f64.powi(m)));
    }

    #[test]
    fn sample_quantile_levels() {
        let cols = vec![(1..=11).map(f64::from).collect::<Vec<_>>(), vec![5.0; 4]];
        let t = TriggerLevels::from_sample_quantiles(&cols, 0.9).unwrap();
        assert_eq!(t.levels(), &[10.0, 5.0]);
        assert_eq!(t.restrict(&[1]).unwrap().levels(), &[5.0]);
        assert!(t.restrict(&[2]).is_err());
    }

    #[test]
    fn retention_functionals() {
        let e = EventScores {
            s: 0.5,
            s_star: 0.75,
            s_dstar: 1.0,
        };
        for f in [RetentionFunctional::Average, RetentionFunctional::Maximum] {
            let y = yearly_retention(&[e], f);
            assert_eq!((y.alpha, y.beta, y.gamma), (0.5, 0.75, 1.0));
            assert_eq!(yearly_retention(&[], f), YearlyRetention::FULL);
        }
        let two = [0.4, 0.8].map(|s| EventScores { s, ..EventScores::UNTRIGGERED });
        assert!(close(yearly_retention(&two, RetentionFunctional::Average).alpha, 0.6));
        assert_eq!(yearly_retention(&two, RetentionFunctional::Maximum).alpha, 0.8);
        assert_eq!(RetentionFunctional::default(), RetentionFunctional::Average);
        assert_eq!("MAX".parse::<RetentionFunctional>().unwrap(), RetentionFunctional::Maximum);
        assert!("median".parse::<RetentionFunctional>().is_err());
    }

    #[test]
    fn untriggered_cashflows() {
        let terms = BondTerms::new(100.0, 0.035, 0, 3).unwrap();
        let cf = cashflows(&[YearlyRetention::FULL; 3], &terms).unwrap();
        assert!(cf.coupons.iter().all(|&c| close(c, 3.5)));
        assert_eq!(cf.redemption, 100.0);
        assert_eq!(cf.maturity(), 3);
    }

    #[test]
    fn first_year_trigger_reduces_later_flows() {
        let terms = BondTerms::new(100.0, 0.035, 1, 3).unwrap();
        let y1 = YearlyRetention {
            alpha: 0.5,
            beta: 0.8,
            gamma: 1.0,
        };
        let cf = cashflows(&[y1, YearlyRetention::FULL], &terms).unwrap();
        assert!(close(cf.coupons[0], 1.75) && close(cf.coupons[1], 2.8));
        assert!(close(cf.redemption, 80.0));
        assert_eq!(cf.coupon(2), Some(cf.coupons[0]));
        assert_eq!(cf.coupon(1), None);
        assert!(cashflows(&[y1], &terms).is_err());
    }

    #[test]
    fn triple_trigger_halves_subsequent_flows() {
        let terms = BondTerms::new(100.0, 0.035, 0, 3).unwrap();
        let y = |gamma| YearlyRetention {
            alpha: 0.5,
            beta: 0.8,
            gamma,
        };
        let a = cashflows(&[y(1.0), YearlyRetention::FULL, YearlyRetention::FULL], &terms).unwrap();
        let b = cashflows(&[y(0.9), YearlyRetention::FULL, YearlyRetention::FULL], &terms).unwrap();
        assert_eq!(a.coupons[0], b.coupons[0]);
        for k in 1..3 {
            assert!(close(b.coupons[k], 0.5 * a.coupons[k]));
        }
        assert!(close(b.redemption, 0.5 * a.redemption));
    }

    #[test]
    fn bond_terms_validation() {
        assert!(BondTerms::new(0.0, 0.035, 0, 1).is_err());
        assert!(BondTerms::new(100.0, 1.0, 0, 1).is_err());
        assert!(BondTerms::new(100.0, 0.035, 1, 1).is_err());
        let t = BondTerms::new(100.0, 0.035, 0, 3).unwrap();
        assert_eq!(t.with_purchase_year(2).unwrap().remaining_years(), 1);
        assert!(t.with_maturity(0).is_err());
    }

    fn event(m: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (
            prop::collection::vec(1e-3..1e3f64, m),
            prop::collection::vec(1e-3..1e3f64, m),
        )
    }

    fn scores() -> impl Strategy<Value = EventScores> {
        (2usize..=3)
            .prop_flat_map(event)
            .prop_map(|(x, u)| event_scores(&x, &levels(&u)).unwrap())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(2000))]

        #[test]
        fn score_chain_holds((x, u) in (2usize..=3).prop_flat_map(event)) {
            let e = event_scores(&x, &levels(&u)).unwrap();
            prop_assert!(0.0 < e.s && e.s <= e.s_star && e.s_star <= e.s_dstar && e.s_dstar <= 1.0, "{e:?}");
        }

        #[test]
        fn scores_fall_in_x_and_rise_in_u(
            (x, u) in (2usize..=3).prop_flat_map(event),
            i in 0usize..3,
            bump in 1.0..3.0f64,
        ) {
            let i = i % x.len();
            let base = event_scores(&x, &levels(&u)).unwrap();
            let mut xb = x.clone();
            xb[i] *= bump;
            let hi_x = event_scores(&xb, &levels(&u)).unwrap();
            prop_assert!(hi_x.s <= base.s && hi_x.s_star <= base.s_star && hi_x.s_dstar <= base.s_dstar);
            let mut ub = u.clone();
            ub[i] *= bump;
            let hi_u = event_scores(&x, &levels(&ub)).unwrap();
            prop_assert!(hi_u.s >= base.s && hi_u.s_star >= base.s_star && hi_u.s_dstar >= base.s_dstar);
        }

        #[test]
        fn retention_is_ordered_and_monotone(
            evs in prop::collection::vec(scores(), 0..12),
            lift in 0.0..1.0f64,
            avg in any::<bool>(),
        ) {
            let f = if avg { RetentionFunctional::Average } else { RetentionFunctional::Maximum };
            let y = yearly_retention(&evs, f);
            prop_assert!(0.0 < y.alpha && y.alpha <= y.beta && y.beta <= y.gamma && y.gamma <= 1.0);
            let raised: Vec<EventScores> = evs.iter().map(|e| EventScores {
                s: e.s + lift * (1.0 - e.s),
                s_star: e.s_star + lift * (1.0 - e.s_star),
                s_dstar: e.s_dstar + lift * (1.0 - e.s_dstar),
            }).collect();
            let z = yearly_retention(&raised, f);
            prop_assert!(z.alpha >= y.alpha && z.beta >= y.beta && z.gamma >= y.gamma);
        }

        #[test]
        fn cashflows_scale_with_face_and_rate(
            years in prop::collection::vec(prop::collection::vec(scores(), 0..5), 1..4),
            k in 0.1..10.0f64,
        ) {
            let ys: Vec<YearlyRetention> = years.iter().map(|e| yearly_retention(e, RetentionFunctional::Average)).collect();
            let n = ys.len() as u32;
            let base = BondTerms::new(100.0, 0.035, 0, n).unwrap();
            let a = cashflows(&ys, &base).unwrap();
            let b = cashflows(&ys, &BondTerms::new(100.0 * k, 0.035, 0, n).unwrap()).unwrap();
            let c = cashflows(&ys, &BondTerms::new(100.0, 0.035 * k / 10.0, 0, n).unwrap()).unwrap();
            prop_assert!(a.redemption > 0.0 && a.redemption <= 100.0);
            prop_assert!((b.redemption - k * a.redemption).abs() <= 1e-12 * b.redemption);
            for s in 0..a.coupons.len() {
                prop_assert!(a.coupons[s] > 0.0 && a.coupons[s] <= 3.5 + 1e-12);
                prop_assert!((b.coupons[s] - k * a.coupons[s]).abs() <= 1e-12 * b.coupons[s]);
                prop_assert!((c.coupons[s] - k / 10.0 * a.coupons[s]).abs() <= 1e-12 * a.coupons[s]);
            }
        }

        #[test]
        fn raising_levels_never_reduces_cashflows(
            years in prop::collection::vec(prop::collection::vec(event(3), 0..4), 1..4),
            i in 0usize..3,
            bump in 1.0..4.0f64,
            u in prop::collection::vec(1e-3..1e3f64, 3),
        ) {
            let mut ub = u.clone();
            ub[i] *= bump;
            let run = |lv: &TriggerLevels| {
                let ys: Vec<YearlyRetention> = years.iter().map(|evs| {
                    let sc: Vec<EventScores> = evs.iter().map(|(x, _)| event_scores(x, lv).unwrap()).collect();
                    yearly_retention(&sc, RetentionFunctional::Average)
                }).collect();
                cashflows(&ys, &BondTerms::new(100.0, 0.035, 0, ys.len() as u32).unwrap()).unwrap()
            };
            let lo = run(&levels(&u));
            let hi = run(&levels(&ub));
            prop_assert!(hi.redemption >= lo.redemption);
            for (a, b) in lo.coupons.iter().zip(&hi.coupons) {
                prop_assert!(b >= a);
            }
        }
    }
}
