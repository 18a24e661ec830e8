//! Scenario configuration: one JSON document describing rates, populations,
//! distributions, demand, rating and horizon of a simulated pool.
//!
//! Rates are given annualized and converted to per-period rates with the
//! compound root `(1 + annual)^(1/periods_per_year) - 1`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::credit::{DefaultPopulation, RatingModel};
use crate::demand::DemandCurve;
use crate::error::{Error, Result};
use crate::pricing::{OfferPolicy, RateSet};

pub fn per_period(annual: f64, periods_per_year: u32) -> f64 {
    (1.0 + annual).powf(1.0 / f64::from(periods_per_year)) - 1.0
}

pub fn annualize(per_period: f64, periods_per_year: u32) -> f64 {
    (1.0 + per_period).powi(periods_per_year as i32) - 1.0
}

/// Real-valued parameter distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum RealDist {
    Fixed(f64),
    Uniform { low: f64, high: f64 },
}

impl RealDist {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            RealDist::Fixed(v) => v,
            RealDist::Uniform { low, high } => {
                if high > low {
                    rng.random_range(low..high)
                } else {
                    low
                }
            }
        }
    }

    fn bounds(&self) -> (f64, f64) {
        match *self {
            RealDist::Fixed(v) => (v, v),
            RealDist::Uniform { low, high } => (low, high),
        }
    }

    fn check(&self, field: &str, min: f64, max: f64, issues: &mut Vec<String>) {
        let (lo, hi) = self.bounds();
        if !(lo.is_finite() && hi.is_finite()) || lo > hi {
            issues.push(format!("{field}: bounds must be finite with low <= high"));
        } else if lo < min || hi > max {
            issues.push(format!("{field}: values must lie in [{min}, {max}]"));
        }
    }
}

/// Integer parameter distribution (inclusive bounds).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum CountDist {
    Fixed(u32),
    Uniform { low: u32, high: u32 },
}

impl CountDist {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        match *self {
            CountDist::Fixed(v) => v,
            CountDist::Uniform { low, high } => {
                if high > low {
                    rng.random_range(low..=high)
                } else {
                    low
                }
            }
        }
    }

    fn min(&self) -> u32 {
        match *self {
            CountDist::Fixed(v) => v,
            CountDist::Uniform { low, .. } => low,
        }
    }

    fn ordered(&self) -> bool {
        match *self {
            CountDist::Fixed(_) => true,
            CountDist::Uniform { low, high } => low <= high,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemandConfig {
    pub phi: f64,
    /// Annualized reference spread `s0`.
    pub reference_spread: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GuarantorConfig {
    /// Probability that a borrower-platform interaction involves a guarantor.
    pub frequency: f64,
    pub collateral: RealDist,
    /// Annualized extra spread asked by guarantors.
    pub extra_spread: RealDist,
    #[serde(default)]
    pub rating: RatingModel,
    /// Use the guaranteed offer whenever one exists, bypassing the
    /// improvement threshold.
    #[serde(default)]
    pub force: bool,
}

impl Default for GuarantorConfig {
    fn default() -> Self {
        Self {
            frequency: 0.0,
            collateral: RealDist::Fixed(0.5),
            extra_spread: RealDist::Fixed(0.02),
            rating: RatingModel::identity(),
            force: false,
        }
    }
}

/// How the borrower population evolves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum PopulationMode {
    /// Fixed head count; borrowers whose loan ends are replaced by new ones.
    Constant { size: u32 },
    /// Fixed head count; borrowers whose loan is repaid ask again with a new
    /// schedule, defaulted borrowers are replaced.
    Recurring { size: u32 },
    /// New borrowers arrive every period, ask once, and leave when their loan
    /// ends or when they go without one.
    Arrivals { per_period: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BorrowerConfig {
    pub population: PopulationMode,
    pub schedule_total: RealDist,
    pub installments: CountDist,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ArrivalProcess {
    #[default]
    None,
    Fixed { count: u32 },
    Poisson { rate: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InvestorConfig {
    pub seed_amount: f64,
    #[serde(default = "yes")]
    pub seed_permanent: bool,
    #[serde(default)]
    pub arrivals: ArrivalProcess,
    #[serde(default = "first_period")]
    pub start_period: u32,
    #[serde(default = "unit_amount")]
    pub amount: RealDist,
    /// Annualized return an investor requires.
    #[serde(default = "zero_dist")]
    pub expected_return: RealDist,
    #[serde(default = "twelve")]
    pub eval_window: u32,
    #[serde(default = "zero_dist")]
    pub profit_withdraw_rate: RealDist,
    #[serde(default = "zero_dist")]
    pub loss_withdraw_rate: RealDist,
    #[serde(default = "zero_count")]
    pub min_holding: CountDist,
    #[serde(default = "yes")]
    pub enter_blind: bool,
}

fn yes() -> bool {
    true
}
fn first_period() -> u32 {
    1
}
fn twelve() -> u32 {
    12
}
fn eighteen() -> u32 {
    18
}
fn unit_amount() -> RealDist {
    RealDist::Fixed(10.0)
}
fn zero_dist() -> RealDist {
    RealDist::Fixed(0.0)
}
fn zero_count() -> CountDist {
    CountDist::Fixed(0)
}
fn default_threshold() -> f64 {
    OfferPolicy::default().improvement_threshold
}
fn default_refusal_cap() -> f64 {
    OfferPolicy::default().refusal_cap
}

impl InvestorConfig {
    pub fn seed_only(seed_amount: f64) -> Self {
        Self {
            seed_amount,
            seed_permanent: true,
            arrivals: ArrivalProcess::None,
            start_period: 1,
            amount: unit_amount(),
            expected_return: zero_dist(),
            eval_window: 12,
            profit_withdraw_rate: zero_dist(),
            loss_withdraw_rate: zero_dist(),
            min_holding: zero_count(),
            enter_blind: true,
        }
    }
}

/// Order in which idle borrowers are served within a period.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RequestOrder {
    #[default]
    ById,
    Shuffled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub horizon: u32,
    #[serde(default = "twelve")]
    pub periods_per_year: u32,
    /// Annualized risk-free base rate.
    pub base_rate: f64,
    /// Annualized platform spread.
    pub spread: f64,
    /// Borrower acceptance curve; absent means every offer is accepted.
    #[serde(default)]
    pub demand: Option<DemandConfig>,
    pub default_population: DefaultPopulation,
    #[serde(default)]
    pub rating: RatingModel,
    #[serde(default)]
    pub guarantors: GuarantorConfig,
    pub borrowers: BorrowerConfig,
    pub investors: InvestorConfig,
    #[serde(default = "default_threshold")]
    pub improvement_threshold: f64,
    #[serde(default = "default_refusal_cap")]
    pub refusal_cap: f64,
    /// Trailing window (periods) for the annualized return metric.
    #[serde(default = "eighteen")]
    pub metric_window: u32,
    #[serde(default)]
    pub request_order: RequestOrder,
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> std::result::Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn period_rate(&self) -> f64 {
        per_period(self.base_rate, self.periods_per_year)
    }

    pub fn period_spread(&self) -> f64 {
        per_period(self.spread, self.periods_per_year)
    }

    pub fn rates(&self) -> RateSet {
        RateSet {
            rate: self.period_rate(),
            spread: self.period_spread(),
        }
    }

    pub fn demand_curve(&self) -> Option<DemandCurve> {
        self.demand.map(|d| DemandCurve {
            phi: d.phi,
            reference_spread: per_period(d.reference_spread, self.periods_per_year),
        })
    }

    pub fn offer_policy(&self) -> OfferPolicy {
        OfferPolicy {
            improvement_threshold: self.improvement_threshold,
            refusal_cap: self.refusal_cap,
        }
    }

    pub fn with_spread(&self, annual_spread: f64) -> Self {
        Self {
            spread: annual_spread,
            ..self.clone()
        }
    }

    /// Check every field and report all problems at once.
    pub fn validate(&self) -> Result<()> {
        let mut issues = Vec::new();
        if self.periods_per_year < 1 {
            issues.push("periods_per_year: must be at least 1".to_string());
        }
        for (field, v) in [("base_rate", self.base_rate), ("spread", self.spread)] {
            if !(v.is_finite() && v >= 0.0) {
                issues.push(format!("{field}: must be a non-negative annual rate"));
            }
        }
        if let Some(d) = self.demand {
            if !(d.phi.is_finite() && d.phi < 0.0) {
                issues.push(format!("demand.phi: must be negative (got {})", d.phi));
            }
            if !(d.reference_spread.is_finite() && d.reference_spread >= 0.0) {
                issues.push("demand.reference_spread: must be non-negative".to_string());
            }
        }
        if let Err(e) = self.default_population.validate() {
            issues.push(format!("default_population: {e}"));
        }
        if let Err(e) = self.rating.validate() {
            issues.push(format!("rating: {e}"));
        }
        let g = &self.guarantors;
        if !(0.0..=1.0).contains(&g.frequency) {
            issues.push("guarantors.frequency: must lie in [0, 1]".to_string());
        }
        g.collateral.check("guarantors.collateral", 0.0, f64::MAX, &mut issues);
        g.extra_spread.check("guarantors.extra_spread", 0.0, f64::MAX, &mut issues);
        if let Err(e) = g.rating.validate() {
            issues.push(format!("guarantors.rating: {e}"));
        }
        let b = &self.borrowers;
        b.schedule_total
            .check("borrowers.schedule_total", f64::MIN_POSITIVE, f64::MAX, &mut issues);
        if b.installments.min() < 1 || !b.installments.ordered() {
            issues.push("borrowers.installments: must be at least 1 with low <= high".to_string());
        }
        let inv = &self.investors;
        if !(inv.seed_amount.is_finite() && inv.seed_amount >= 0.0) {
            issues.push("investors.seed_amount: must be non-negative".to_string());
        }
        if let ArrivalProcess::Poisson { rate } = inv.arrivals {
            if !(rate.is_finite() && rate >= 0.0) {
                issues.push("investors.arrivals.poisson.rate: must be non-negative".to_string());
            }
        }
        inv.amount
            .check("investors.amount", f64::MIN_POSITIVE, f64::MAX, &mut issues);
        inv.expected_return
            .check("investors.expected_return", -1.0, f64::MAX, &mut issues);
        inv.profit_withdraw_rate
            .check("investors.profit_withdraw_rate", 0.0, 1.0, &mut issues);
        inv.loss_withdraw_rate
            .check("investors.loss_withdraw_rate", 0.0, 1.0, &mut issues);
        if inv.eval_window < 1 {
            issues.push("investors.eval_window: must be at least 1".to_string());
        }
        if !inv.min_holding.ordered() {
            issues.push("investors.min_holding: low must not exceed high".to_string());
        }
        if !(self.improvement_threshold.is_finite() && self.improvement_threshold >= 0.0) {
            issues.push("improvement_threshold: must be non-negative".to_string());
        }
        if !(0.0..=1.0).contains(&self.refusal_cap) {
            issues.push("refusal_cap: must lie in [0, 1]".to_string());
        }
        if self.metric_window < 1 {
            issues.push("metric_window: must be at least 1".to_string());
        }
        if issues.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(issues))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ScenarioConfig {
        ScenarioConfig {
            horizon: 36,
            periods_per_year: 12,
            base_rate: 0.1,
            spread: 0.1,
            demand: Some(DemandConfig {
                phi: -20.0,
                reference_spread: 0.3,
            }),
            default_population: DefaultPopulation::Beta { a: 2.0, b: 200.0 },
            rating: RatingModel::identity(),
            guarantors: GuarantorConfig::default(),
            borrowers: BorrowerConfig {
                population: PopulationMode::Constant { size: 100 },
                schedule_total: RealDist::Uniform { low: 0.5, high: 1.5 },
                installments: CountDist::Uniform { low: 1, high: 6 },
            },
            investors: InvestorConfig::seed_only(100.0),
            improvement_threshold: 0.1,
            refusal_cap: 0.5,
            metric_window: 18,
            request_order: RequestOrder::ById,
        }
    }

    #[test]
    fn rate_conversion_round_trips() {
        let r = per_period(0.1, 12);
        assert!((r - 0.00797414).abs() < 1e-8);
        assert!((annualize(r, 12) - 0.1).abs() < 1e-12);
    }

    #[test]
    fn json_round_trip() {
        let cfg = sample();
        let back = ScenarioConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(cfg, back);
        back.validate().unwrap();
    }

    #[test]
    fn unknown_keys_rejected() {
        let mut v: serde_json::Value = serde_json::from_str(&sample().to_json()).unwrap();
        v["horizn"] = serde_json::json!(12);
        assert!(ScenarioConfig::from_json(&v.to_string()).is_err());
        let mut v: serde_json::Value = serde_json::from_str(&sample().to_json()).unwrap();
        v["investors"]["seed_amout"] = serde_json::json!(1.0);
        assert!(ScenarioConfig::from_json(&v.to_string()).is_err());
    }

    #[test]
    fn validation_lists_every_offending_field() {
        let mut cfg = sample();
        cfg.periods_per_year = 0;
        cfg.demand = Some(DemandConfig {
            phi: 2.0,
            reference_spread: 0.1,
        });
        cfg.guarantors.frequency = 1.5;
        let Err(Error::InvalidConfig(issues)) = cfg.validate() else {
            panic!("expected config error");
        };
        assert_eq!(issues.len(), 3, "{issues:?}");
        assert!(issues.iter().any(|i| i.starts_with("periods_per_year")));
        assert!(issues.iter().any(|i| i.starts_with("demand.phi")));
        assert!(issues.iter().any(|i| i.starts_with("guarantors.frequency")));
    }
}
