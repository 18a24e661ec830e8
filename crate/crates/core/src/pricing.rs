//! Closed-form anticipation pricing.
//!
//! An anticipation is the cash the pool advances today for a stream of future
//! installments. Each installment `R_i` due at period `i` is weighted by the
//! probability that the borrower is still paying at `i`, `(1 - p)^i`, and
//! discounted at the base rate plus the platform spread. When a guarantor
//! stakes collateral, the pool additionally expects to keep the (accrued)
//! collateral on default and owes the guarantor's asked gain on survival.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// One receivable: the amount due at a (1-based) period index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Installment {
    pub period: u32,
    pub amount: f64,
}

/// Installments a borrower offers for anticipation.
///
/// Period indices are strictly increasing and start at 1 or later; gaps are
/// allowed and discounting always uses the stated index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReceivableSchedule {
    installments: Vec<Installment>,
}

impl ReceivableSchedule {
    pub fn new(installments: Vec<Installment>) -> Result<Self> {
        if installments.is_empty() {
            return Err(invalid("receivable schedule is empty"));
        }
        let mut prev = 0u32;
        for inst in &installments {
            if inst.period <= prev {
                return Err(invalid(format!(
                    "installment periods must be strictly increasing from 1 (got {} after {})",
                    inst.period, prev
                )));
            }
            if !(inst.amount.is_finite() && inst.amount > 0.0) {
                return Err(invalid(format!(
                    "installment amount must be positive and finite (got {})",
                    inst.amount
                )));
            }
            prev = inst.period;
        }
        Ok(Self { installments })
    }

    /// `n` equal installments at periods `1..=n` summing to `total`.
    pub fn equal(total: f64, n: u32) -> Result<Self> {
        if n == 0 {
            return Err(invalid("number of installments must be at least 1"));
        }
        let amount = total / f64::from(n);
        Self::new(
            (1..=n)
                .map(|period| Installment { period, amount })
                .collect(),
        )
    }

    pub fn installments(&self) -> &[Installment] {
        &self.installments
    }

    pub fn len(&self) -> usize {
        self.installments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.installments.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.installments.iter().map(|i| i.amount).sum()
    }

    /// Period index of the final installment (the contract horizon `N`).
    pub fn last_period(&self) -> u32 {
        self.installments.last().map_or(0, |i| i.period)
    }
}

/// Per-period base rate and platform spread, as decimals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateSet {
    pub rate: f64,
    pub spread: f64,
}

impl RateSet {
    pub fn new(rate: f64, spread: f64) -> Result<Self> {
        let rates = Self { rate, spread };
        rates.validate()?;
        Ok(rates)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.rate.is_finite() || !self.spread.is_finite() {
            return Err(invalid("rates must be finite"));
        }
        if self.rate < 0.0 || self.spread < 0.0 {
            return Err(invalid("base rate and spread must be non-negative"));
        }
        Ok(())
    }

    /// `1 + r + s`, the per-period discount base.
    pub fn discount_base(&self) -> f64 {
        1.0 + self.rate + self.spread
    }
}

/// What a guarantor brings to a contract.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GuarantorTerms {
    pub collateral: f64,
    /// Guarantor's own default estimate.
    pub p_g: f64,
    /// Per-period extra spread the guarantor asks for.
    pub extra_spread: f64,
    /// Gain paid to the guarantor when the last installment arrives.
    pub gain: f64,
}

impl GuarantorTerms {
    /// Terms with the gain set by the guarantor's indifference condition.
    pub fn quote(collateral: f64, p_g: f64, extra_spread: f64, rate: f64, n: u32) -> Result<Self> {
        if !(collateral.is_finite() && collateral >= 0.0) {
            return Err(invalid("collateral must be non-negative and finite"));
        }
        let gain = guarantor_gain(collateral, p_g, extra_spread, rate, n)?;
        Ok(Self {
            collateral,
            p_g,
            extra_spread,
            gain,
        })
    }
}

fn check_probability(p: f64, what: &str) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(invalid(format!("{what} must lie in [0, 1] (got {p})")));
    }
    Ok(())
}

/// Anticipation offer without guarantor:
/// `A = sum_i (1-p)^i R_i / (1+r+s)^i`.
pub fn anticipation(schedule: &ReceivableSchedule, p: f64, rates: &RateSet) -> Result<f64> {
    if schedule.is_empty() {
        return Err(invalid("receivable schedule is empty"));
    }
    check_probability(p, "default probability")?;
    rates.validate()?;
    let growth = (1.0 - p) / rates.discount_base();
    Ok(schedule
        .installments()
        .iter()
        .map(|inst| growth.powi(inst.period as i32) * inst.amount)
        .sum())
}

/// Gain that makes a guarantor indifferent between staking and earning its
/// target spread: `G_s = V_c (1+r+s_g)^N / (1-p_g)^N - V_c (1+r)^N`.
pub fn guarantor_gain(collateral: f64, p_g: f64, extra_spread: f64, rate: f64, n: u32) -> Result<f64> {
    if !(0.0..1.0).contains(&p_g) {
        return Err(invalid(format!(
            "guarantor default estimate must lie in [0, 1) (got {p_g})"
        )));
    }
    if n == 0 {
        return Err(invalid("guarantee horizon must be at least one period"));
    }
    if !rate.is_finite() || !extra_spread.is_finite() || 1.0 + rate + extra_spread <= 0.0 {
        return Err(invalid("guarantor rates must be finite with 1 + r + s_g > 0"));
    }
    let n = n as i32;
    let target = collateral * ((1.0 + rate + extra_spread) / (1.0 - p_g)).powi(n);
    Ok(target - collateral * (1.0 + rate).powi(n))
}

/// Anticipation offer when a guarantor is involved.
///
/// Each installment period contributes the survival-weighted installment (less
/// the gain on the final one) plus the accrued collateral the pool keeps if
/// the default happens exactly at that period.
pub fn anticipation_with_guarantor(
    schedule: &ReceivableSchedule,
    p: f64,
    rates: &RateSet,
    terms: &GuarantorTerms,
) -> Result<f64> {
    if schedule.is_empty() {
        return Err(invalid("receivable schedule is empty"));
    }
    check_probability(p, "default probability")?;
    rates.validate()?;
    let last = schedule.last_period();
    let base = rates.discount_base();
    let value = schedule
        .installments()
        .iter()
        .map(|inst| {
            let i = inst.period as i32;
            let due = if inst.period == last {
                inst.amount - terms.gain
            } else {
                inst.amount
            };
            let survive = (1.0 - p).powi(i) * due;
            let retained = (1.0 - p).powi(i - 1) * p * terms.collateral * (1.0 + rates.rate).powi(i);
            (survive + retained) / base.powi(i)
        })
        .sum();
    Ok(value)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OfferChoice {
    Plain,
    Guaranteed,
    None,
}

/// Choose between the plain and guaranteed quotes. The guaranteed quote wins
/// when it beats the plain one by at least `threshold` (inclusive).
pub fn select_offer(a_plain: f64, a_guaranteed: Option<f64>, threshold: f64) -> Result<OfferChoice> {
    if !(threshold.is_finite() && threshold >= 0.0) {
        return Err(invalid(format!(
            "improvement threshold must be non-negative (got {threshold})"
        )));
    }
    let choice = match a_guaranteed {
        Some(g) if g >= (1.0 + threshold) * a_plain => OfferChoice::Guaranteed,
        _ => OfferChoice::Plain,
    };
    let value = match choice {
        OfferChoice::Guaranteed => a_guaranteed.unwrap_or(0.0),
        _ => a_plain,
    };
    if value > 0.0 {
        Ok(choice)
    } else {
        Ok(OfferChoice::None)
    }
}

/// Platform-side offer policy: improvement threshold plus a refusal cap on
/// the estimated default probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OfferPolicy {
    pub improvement_threshold: f64,
    pub refusal_cap: f64,
}

impl Default for OfferPolicy {
    fn default() -> Self {
        Self {
            improvement_threshold: 0.10,
            refusal_cap: 0.5,
        }
    }
}

impl OfferPolicy {
    pub fn select(&self, p_est: f64, a_plain: f64, a_guaranteed: Option<f64>) -> Result<OfferChoice> {
        if p_est > self.refusal_cap {
            return Ok(OfferChoice::None);
        }
        select_offer(a_plain, a_guaranteed, self.improvement_threshold)
    }
}
