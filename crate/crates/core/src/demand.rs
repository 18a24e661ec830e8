//! Borrower price sensitivity.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::pricing::{anticipation, RateSet, ReceivableSchedule};

/// Logistic acceptance curve `f(A) = 1 / (1 + exp(phi (A - A0) / A0))`,
/// anchored at the offer `A0` priced with the reference spread.
///
/// `phi` must be negative so that larger anticipations (smaller discounts)
/// are more likely to be accepted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DemandCurve {
    pub phi: f64,
    /// Per-period reference spread `s0`.
    pub reference_spread: f64,
}

impl DemandCurve {
    pub fn new(phi: f64, reference_spread: f64) -> Result<Self> {
        let curve = Self { phi, reference_spread };
        curve.validate()?;
        Ok(curve)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.phi.is_finite() && self.phi < 0.0) {
            return Err(invalid(format!("demand steepness phi must be negative (got {})", self.phi)));
        }
        if !(self.reference_spread.is_finite() && self.reference_spread >= 0.0) {
            return Err(invalid("reference spread must be non-negative"));
        }
        Ok(())
    }

    pub fn reference_anticipation(&self, schedule: &ReceivableSchedule, p: f64, rate: f64) -> Result<f64> {
        reference_anticipation(schedule, p, rate, self)
    }

    pub fn acceptance_probability(&self, offer: f64, reference: f64) -> Result<f64> {
        acceptance_probability(self, offer, reference)
    }
}

pub fn reference_anticipation(schedule: &ReceivableSchedule, p: f64, rate: f64, curve: &DemandCurve) -> Result<f64> {
    anticipation(schedule, p, &RateSet::new(rate, curve.reference_spread)?)
}

pub fn acceptance_probability(curve: &DemandCurve, offer: f64, reference: f64) -> Result<f64> {
    if !(reference.is_finite() && reference > 0.0) {
        return Err(invalid(format!("reference anticipation must be positive (got {reference})")));
    }
    let z = curve.phi * (offer - reference) / reference;
    Ok(1.0 / (1.0 + z.exp()))
}
