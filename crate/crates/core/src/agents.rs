//! Borrowers, guarantors and investors: population generation and the
//! decision rules each agent class follows.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::{per_period, PopulationMode, ScenarioConfig};
use crate::credit::{sample_true_default_prob, RatingModel};
use crate::error::Result;
use crate::pricing::{GuarantorTerms, ReceivableSchedule};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BorrowerSpec {
    pub id: u64,
    pub p_true: f64,
    pub schedule_total: f64,
    pub n_installments: u32,
    pub has_guarantor: bool,
    /// Index of the contract currently being repaid, if any.
    pub active_loan: Option<usize>,
}

impl BorrowerSpec {
    pub fn schedule(&self) -> Result<ReceivableSchedule> {
        ReceivableSchedule::equal(self.schedule_total, self.n_installments)
    }

    pub fn is_idle(&self) -> bool {
        self.active_loan.is_none()
    }

    /// Fresh request terms for a returning borrower; `p_true` is kept.
    pub fn renew<R: Rng + ?Sized>(&mut self, config: &ScenarioConfig, rng: &mut R) {
        self.schedule_total = config.borrowers.schedule_total.sample(rng);
        self.n_installments = config.borrowers.installments.sample(rng);
        self.has_guarantor = rng.random_bool(config.guarantors.frequency);
        self.active_loan = None;
    }
}

pub fn draw_borrower<R: Rng + ?Sized>(config: &ScenarioConfig, id: u64, rng: &mut R) -> Result<BorrowerSpec> {
    let p_true = sample_true_default_prob(&config.default_population, rng)?;
    let mut borrower = BorrowerSpec {
        id,
        p_true,
        schedule_total: 0.0,
        n_installments: 1,
        has_guarantor: false,
        active_loan: None,
    };
    borrower.renew(config, rng);
    Ok(borrower)
}

/// New borrowers entering at this period.
///
/// In the fixed-size modes the population is topped back up to its size
/// (`present` is the head count after terminated borrowers left); in
/// arrival mode the configured number arrives regardless.
pub fn spawn_borrowers<R: Rng + ?Sized>(
    config: &ScenarioConfig,
    present: usize,
    next_id: &mut u64,
    rng: &mut R,
) -> Result<Vec<BorrowerSpec>> {
    let count = match config.borrowers.population {
        PopulationMode::Constant { size } | PopulationMode::Recurring { size } => {
            (size as usize).saturating_sub(present)
        }
        PopulationMode::Arrivals { per_period } => per_period as usize,
    };
    (0..count)
        .map(|_| {
            let id = *next_id;
            *next_id += 1;
            draw_borrower(config, id, rng)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GuarantorSpec {
    pub id: u64,
    pub collateral: f64,
    /// Per-period extra spread.
    pub extra_spread: f64,
    pub rating: RatingModel,
}

pub fn draw_guarantor<R: Rng + ?Sized>(config: &ScenarioConfig, id: u64, rng: &mut R) -> GuarantorSpec {
    let g = &config.guarantors;
    GuarantorSpec {
        id,
        collateral: g.collateral.sample(rng),
        extra_spread: per_period(g.extra_spread.sample(rng), config.periods_per_year),
        rating: g.rating,
    }
}

/// Guarantor's terms for backing `borrower`: its own estimate `p_g` and the
/// gain that leaves it indifferent at that estimate. `None` when the
/// guarantor sees certain default and declines.
pub fn guarantor_offer<R: Rng + ?Sized>(
    guarantor: &GuarantorSpec,
    borrower: &BorrowerSpec,
    rate: f64,
    n: u32,
    rng: &mut R,
) -> Result<Option<GuarantorTerms>> {
    let p_g = guarantor.rating.estimate(borrower.p_true, rng)?;
    if p_g >= 1.0 {
        return Ok(None);
    }
    GuarantorTerms::quote(guarantor.collateral, p_g, guarantor.extra_spread, rate, n).map(Some)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvestorSpec {
    pub id: u64,
    pub amount: f64,
    /// Annualized return required to invest.
    pub expected_return: f64,
    pub eval_window: u32,
    pub profit_withdraw_rate: f64,
    pub loss_withdraw_rate: f64,
    pub min_holding: u32,
    pub enter_blind: bool,
    pub is_seed: bool,
    /// Never withdraws.
    pub permanent: bool,
}

pub fn draw_investor<R: Rng + ?Sized>(config: &ScenarioConfig, id: u64, rng: &mut R) -> InvestorSpec {
    let inv = &config.investors;
    InvestorSpec {
        id,
        amount: inv.amount.sample(rng),
        expected_return: inv.expected_return.sample(rng),
        eval_window: inv.eval_window,
        profit_withdraw_rate: inv.profit_withdraw_rate.sample(rng),
        loss_withdraw_rate: inv.loss_withdraw_rate.sample(rng),
        min_holding: inv.min_holding.sample(rng),
        enter_blind: inv.enter_blind,
        is_seed: false,
        permanent: false,
    }
}

pub fn seed_investor<R: Rng + ?Sized>(config: &ScenarioConfig, id: u64, rng: &mut R) -> InvestorSpec {
    InvestorSpec {
        amount: config.investors.seed_amount,
        is_seed: true,
        permanent: config.investors.seed_permanent,
        ..draw_investor(config, id, rng)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InvestorAction {
    Invest,
    Hold,
    Withdraw,
}

/// What an investor does this period.
///
/// `holding_age` is `None` before the investor has entered. `trailing_return`
/// is the fund's annualized return over the investor's window, `None` while
/// history is shorter than the window.
pub fn investor_decision<R: Rng + ?Sized>(
    inv: &InvestorSpec,
    holding_age: Option<u32>,
    trailing_return: Option<f64>,
    rng: &mut R,
) -> InvestorAction {
    let meets_target = trailing_return.map(|r| r >= inv.expected_return);
    match holding_age {
        None => {
            if meets_target.unwrap_or(inv.enter_blind) {
                InvestorAction::Invest
            } else {
                InvestorAction::Hold
            }
        }
        Some(age) => {
            if inv.permanent || age < inv.min_holding {
                return InvestorAction::Hold;
            }
            let rate = if meets_target == Some(true) {
                inv.profit_withdraw_rate
            } else {
                inv.loss_withdraw_rate
            };
            if rng.random::<f64>() < rate {
                InvestorAction::Withdraw
            } else {
                InvestorAction::Hold
            }
        }
    }
}
