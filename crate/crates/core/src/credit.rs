//! Default probabilities: how borrowers' true risk is drawn, how the rating
//! engine estimates it, and how a payment path is realized.
//!
//! Defaults follow a geometric process: at every period a still-paying
//! borrower stops for good with probability `p`.

use rand::Rng;
use rand_distr::{Beta, Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Probability of still paying at period `i`: `(1-p)^i`.
pub fn survival_prob(p: f64, i: u32) -> Result<f64> {
    check(p, i)?;
    Ok((1.0 - p).powi(i as i32))
}

/// Probability that the first missed payment is at period `i`: `(1-p)^(i-1) p`.
pub fn default_pmf(p: f64, i: u32) -> Result<f64> {
    check(p, i)?;
    Ok((1.0 - p).powi(i as i32 - 1) * p)
}

fn check(p: f64, i: u32) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(invalid(format!("probability must lie in [0, 1] (got {p})")));
    }
    if i < 1 {
        return Err(invalid("period index must be at least 1"));
    }
    Ok(())
}

/// Where borrowers' true default probabilities come from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DefaultPopulation {
    Beta { a: f64, b: f64 },
    Fixed { p: f64 },
}

impl DefaultPopulation {
    pub fn validate(&self) -> Result<()> {
        match *self {
            DefaultPopulation::Beta { a, b } => {
                if !(a.is_finite() && b.is_finite() && a > 0.0 && b > 0.0) {
                    return Err(invalid(format!("beta shapes must be positive (got a={a}, b={b})")));
                }
            }
            DefaultPopulation::Fixed { p } => {
                if !(0.0..=1.0).contains(&p) {
                    return Err(invalid(format!("fixed default probability must lie in [0, 1] (got {p})")));
                }
            }
        }
        Ok(())
    }

    pub fn mean(&self) -> f64 {
        match *self {
            DefaultPopulation::Beta { a, b } => a / (a + b),
            DefaultPopulation::Fixed { p } => p,
        }
    }
}

pub fn sample_true_default_prob<R: Rng + ?Sized>(pop: &DefaultPopulation, rng: &mut R) -> Result<f64> {
    pop.validate()?;
    match *pop {
        DefaultPopulation::Beta { a, b } => {
            let beta = Beta::new(a, b).map_err(|e| invalid(e.to_string()))?;
            Ok(beta.sample(rng))
        }
        DefaultPopulation::Fixed { p } => Ok(p),
    }
}

/// Linear rating engine `p = a p_T + b + eps`, `eps ~ N(0, noise_sd)`,
/// clamped to `[0, p_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatingModel {
    #[serde(default = "one")]
    pub slope: f64,
    #[serde(default)]
    pub intercept: f64,
    #[serde(default)]
    pub noise_sd: f64,
    #[serde(default = "default_p_max")]
    pub p_max: f64,
}

fn one() -> f64 {
    1.0
}

fn default_p_max() -> f64 {
    0.99
}

impl Default for RatingModel {
    fn default() -> Self {
        Self::identity()
    }
}

impl RatingModel {
    pub fn identity() -> Self {
        Self {
            slope: 1.0,
            intercept: 0.0,
            noise_sd: 0.0,
            p_max: default_p_max(),
        }
    }

    pub fn biased(slope: f64, intercept: f64) -> Self {
        Self {
            slope,
            intercept,
            ..Self::identity()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.slope.is_finite() || !self.intercept.is_finite() {
            return Err(invalid("rating slope and intercept must be finite"));
        }
        if !(self.noise_sd.is_finite() && self.noise_sd >= 0.0) {
            return Err(invalid("rating noise standard deviation must be non-negative"));
        }
        if !(self.p_max > 0.0 && self.p_max < 1.0) {
            return Err(invalid(format!("rating p_max must lie in (0, 1) (got {})", self.p_max)));
        }
        Ok(())
    }

    /// Estimated default probability. No random draw is consumed when the
    /// model is noiseless.
    pub fn estimate<R: Rng + ?Sized>(&self, p_true: f64, rng: &mut R) -> Result<f64> {
        self.validate()?;
        if !(0.0..=1.0).contains(&p_true) {
            return Err(invalid(format!("true default probability must lie in [0, 1] (got {p_true})")));
        }
        let noise = if self.noise_sd > 0.0 {
            Normal::new(0.0, self.noise_sd)
                .map_err(|e| invalid(e.to_string()))?
                .sample(rng)
        } else {
            0.0
        };
        Ok((self.slope * p_true + self.intercept + noise).clamp(0.0, self.p_max))
    }
}

pub fn estimate_default_prob<R: Rng + ?Sized>(model: &RatingModel, p_true: f64, rng: &mut R) -> Result<f64> {
    model.estimate(p_true, rng)
}

/// Realized payment path of one contract. Installments due at periods
/// `>= default_period` are never paid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PaymentOutcome {
    pub default_period: Option<u32>,
}

impl PaymentOutcome {
    pub fn fully_paid() -> Self {
        Self { default_period: None }
    }

    pub fn honors(&self, period: u32) -> bool {
        self.default_period.is_none_or(|d| period < d)
    }
}

/// Draw the first default period over `n` periods by inverting the geometric
/// CDF with a single uniform, so every contract consumes exactly one draw.
pub fn sample_payment_outcome<R: Rng + ?Sized>(p_true: f64, n: u32, rng: &mut R) -> PaymentOutcome {
    let u: f64 = rng.random();
    if p_true <= 0.0 || n == 0 {
        return PaymentOutcome::fully_paid();
    }
    if p_true >= 1.0 {
        return PaymentOutcome { default_period: Some(1) };
    }
    // P(D <= k) = 1 - (1-p)^k; find the smallest k with u < 1 - (1-p)^k.
    let q = 1.0 - p_true;
    let mut survive = 1.0;
    for k in 1..=n {
        survive *= q;
        if u < 1.0 - survive {
            return PaymentOutcome { default_period: Some(k) };
        }
    }
    PaymentOutcome::fully_paid()
}
