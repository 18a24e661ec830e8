//! Agent-based simulation of a lending platform that buys borrowers'
//! receivables at a risk-adjusted discount, funded by a quota-based
//! liquidity pool.
//!
//! The crate is organized bottom-up: [`pricing`] and [`credit`] hold the
//! closed-form valuation and default model, [`demand`] the borrower response,
//! [`agents`] and [`ledger`] the participants and accounts, [`engine`] the
//! scheduler, and [`metrics`], [`optimizer`] and [`bundle`] the analysis and
//! output layers. [`validation`] packages the reference scenarios used to
//! check a build end to end.

pub mod agents;
pub mod bundle;
pub mod config;
pub mod credit;
pub mod demand;
pub mod engine;
pub mod error;
pub mod ledger;
pub mod metrics;
pub mod optimizer;
pub mod pricing;
pub mod validation;

pub use config::{per_period, annualize, ScenarioConfig};
pub use credit::{DefaultPopulation, PaymentOutcome, RatingModel};
pub use demand::DemandCurve;
pub use engine::{derive_run_seed, run, run_batch, run_batch_serial, PeriodRecord, RunResult};
pub use error::{Error, Result};
pub use ledger::{LoanContract, PoolLedger, TxKind};
pub use metrics::{BoxStats, SeriesStats};
pub use optimizer::{select_best, sweep_spread, Objective, SweepResult};
pub use pricing::{
    anticipation, anticipation_with_guarantor, guarantor_gain, GuarantorTerms, OfferChoice, RateSet,
    ReceivableSchedule,
};
