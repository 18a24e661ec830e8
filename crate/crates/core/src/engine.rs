//! Discrete-time scheduler and Monte Carlo orchestration.
//!
//! Each period runs five phases in a fixed order: idle-cash accrual,
//! collections, investor flows, borrower requests, recording. Every run owns
//! one random stream per agent class, all derived from the run seed, so
//! changing one population (say, adding investors) leaves the draws of the
//! others untouched.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agents::{
    draw_guarantor, draw_investor, guarantor_offer, investor_decision, seed_investor, spawn_borrowers, BorrowerSpec,
    InvestorAction, InvestorSpec,
};
use crate::config::{ArrivalProcess, PopulationMode, RequestOrder, ScenarioConfig};
use crate::credit::sample_payment_outcome;
use crate::demand::{acceptance_probability, DemandCurve};
use crate::error::{invalid, Result};
use crate::ledger::{ContractState, LoanContract, PoolLedger, Transaction, TxKind};
use crate::metrics::trailing_return_at;
use crate::pricing::{anticipation, anticipation_with_guarantor, OfferChoice, OfferPolicy, RateSet};

/// Seed of run `run_index` in a batch started from `base_seed`.
pub fn derive_run_seed(base_seed: u64, run_index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
    rng.set_stream(run_index);
    rng.next_u64()
}

struct Streams {
    population: ChaCha8Rng,
    rating: ChaCha8Rng,
    guarantor: ChaCha8Rng,
    acceptance: ChaCha8Rng,
    payment: ChaCha8Rng,
    investor: ChaCha8Rng,
    order: ChaCha8Rng,
}

impl Streams {
    fn new(seed: u64) -> Self {
        let fork = |k: u64| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k);
            rng
        };
        Self {
            population: fork(0),
            rating: fork(1),
            guarantor: fork(2),
            acceptance: fork(3),
            payment: fork(4),
            investor: fork(5),
            order: fork(6),
        }
    }
}

/// Cash moved in one period, by transaction type.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TxVolumes {
    pub deposit: f64,
    pub withdrawal: f64,
    pub anticipation: f64,
    pub installment: f64,
    pub collateral_in: f64,
    pub collateral_settlement: f64,
    pub guarantor_gain_out: f64,
    /// Interest credited to idle cash.
    pub interest: f64,
}

impl TxVolumes {
    pub fn add(&mut self, kind: TxKind, amount: f64) {
        let slot = match kind {
            TxKind::Deposit => &mut self.deposit,
            TxKind::Withdrawal => &mut self.withdrawal,
            TxKind::Anticipation => &mut self.anticipation,
            TxKind::Installment => &mut self.installment,
            TxKind::CollateralIn => &mut self.collateral_in,
            TxKind::CollateralSettlement => &mut self.collateral_settlement,
            TxKind::GuarantorGainOut => &mut self.guarantor_gain_out,
        };
        *slot += amount;
    }

    pub fn get(&self, kind: TxKind) -> f64 {
        match kind {
            TxKind::Deposit => self.deposit,
            TxKind::Withdrawal => self.withdrawal,
            TxKind::Anticipation => self.anticipation,
            TxKind::Installment => self.installment,
            TxKind::CollateralIn => self.collateral_in,
            TxKind::CollateralSettlement => self.collateral_settlement,
            TxKind::GuarantorGainOut => self.guarantor_gain_out,
        }
    }

    /// Net cash change implied by these flows.
    pub fn net_cash(&self) -> f64 {
        TxKind::ALL.iter().map(|&k| k.sign() * self.get(k)).sum::<f64>() + self.interest
    }
}

/// State of the fund at the end of one period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodRecord {
    pub period: u32,
    pub cash: f64,
    pub collateral_held: f64,
    pub loan_book_value: f64,
    pub total_assets: f64,
    pub quota_value: f64,
    /// `None` at t = 0.
    pub quota_return: Option<f64>,
    /// Annualized over the scenario's metric window; `None` until enough history.
    pub trailing_return: Option<f64>,
    pub investors: usize,
    pub borrowers: usize,
    pub volumes: TxVolumes,
    pub originated_volume: f64,
    pub originations: usize,
    pub defaults: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub seed: u64,
    pub periods_per_year: u32,
    /// One record per period, t = 0 through the horizon.
    pub records: Vec<PeriodRecord>,
    pub transactions: Vec<Transaction>,
}

impl RunResult {
    pub fn series(&self, field: impl Fn(&PeriodRecord) -> f64) -> Vec<f64> {
        self.records.iter().map(field).collect()
    }

    pub fn quota_values(&self) -> Vec<f64> {
        self.series(|r| r.quota_value)
    }

    pub fn total_assets(&self) -> Vec<f64> {
        self.series(|r| r.total_assets)
    }

    pub fn loan_book(&self) -> Vec<f64> {
        self.series(|r| r.loan_book_value)
    }

    /// One-period quota returns for t = 1..=horizon.
    pub fn returns(&self) -> Vec<f64> {
        self.records.iter().filter_map(|r| r.quota_return).collect()
    }

    pub fn last(&self) -> &PeriodRecord {
        self.records.last().expect("a run always records t = 0")
    }
}

struct Holder {
    spec: InvestorSpec,
    entered_at: u32,
    exiting: bool,
}

struct Simulation<'a> {
    config: &'a ScenarioConfig,
    rates: RateSet,
    policy: OfferPolicy,
    demand: Option<DemandCurve>,
    ledger: PoolLedger,
    borrowers: BTreeMap<u64, BorrowerSpec>,
    holders: Vec<Holder>,
    next_borrower: u64,
    next_investor: u64,
    next_guarantor: u64,
    rng: Streams,
    quota_history: Vec<f64>,
    records: Vec<PeriodRecord>,
    log_cursor: usize,
}

#[derive(Default)]
struct Originations {
    volume: f64,
    count: usize,
}

impl<'a> Simulation<'a> {
    fn new(config: &'a ScenarioConfig, seed: u64) -> Result<Self> {
        let mut sim = Self {
            config,
            rates: config.rates(),
            policy: config.offer_policy(),
            demand: config.demand_curve(),
            ledger: PoolLedger::new(),
            borrowers: BTreeMap::new(),
            holders: Vec::new(),
            next_borrower: 0,
            next_investor: 0,
            next_guarantor: 0,
            rng: Streams::new(seed),
            quota_history: Vec::new(),
            records: Vec::new(),
            log_cursor: 0,
        };
        if config.investors.seed_amount > 0.0 {
            let spec = seed_investor(config, sim.take_investor_id(), &mut sim.rng.investor);
            sim.ledger.deposit(spec.id, spec.amount, 0)?;
            sim.holders.push(Holder {
                spec,
                entered_at: 0,
                exiting: false,
            });
        }
        sim.record(0, 0, Originations::default());
        Ok(sim)
    }

    fn take_investor_id(&mut self) -> u64 {
        self.next_investor += 1;
        self.next_investor - 1
    }

    fn step(&mut self, t: u32) -> Result<()> {
        self.ledger.accrue(self.rates.rate, t);
        let flows = self.ledger.process_period(t);
        self.investor_phase(t)?;
        let originated = self.borrower_phase(t, &flows.terminated)?;
        self.record(t, flows.defaults, originated);
        Ok(())
    }

    /// Annualized trailing return over `window` periods, ending at the last
    /// recorded period.
    fn trailing(&self, window: u32) -> Option<f64> {
        trailing_return_at(&self.quota_history, window, self.config.periods_per_year)
    }

    fn investor_phase(&mut self, t: u32) -> Result<()> {
        let mut holders = std::mem::take(&mut self.holders);
        for h in holders.iter_mut() {
            if !h.exiting {
                let age = t - h.entered_at;
                let trailing = self.trailing(h.spec.eval_window);
                if investor_decision(&h.spec, Some(age), trailing, &mut self.rng.investor) == InvestorAction::Withdraw {
                    h.exiting = true;
                }
            }
            if h.exiting && self.ledger.holding(h.spec.id) > 0.0 {
                self.ledger.withdraw(h.spec.id, t)?;
            }
        }
        holders.retain(|h| !(h.exiting && self.ledger.holding(h.spec.id) <= 0.0));
        self.holders = holders;

        let inv = &self.config.investors;
        if t < inv.start_period {
            return Ok(());
        }
        let arrivals = match inv.arrivals {
            ArrivalProcess::None => 0,
            ArrivalProcess::Fixed { count } => count as u64,
            ArrivalProcess::Poisson { rate } if rate > 0.0 => {
                let dist = Poisson::new(rate).map_err(|e| invalid(format!("arrival rate: {e}")))?;
                dist.sample(&mut self.rng.investor) as u64
            }
            ArrivalProcess::Poisson { .. } => 0,
        };
        for _ in 0..arrivals {
            let id = self.take_investor_id();
            let spec = draw_investor(self.config, id, &mut self.rng.investor);
            let trailing = self.trailing(spec.eval_window);
            // Arrivals who find the fund unattractive leave for good.
            if investor_decision(&spec, None, trailing, &mut self.rng.investor) == InvestorAction::Invest {
                self.ledger.deposit(id, spec.amount, t)?;
                self.holders.push(Holder {
                    spec,
                    entered_at: t,
                    exiting: false,
                });
            }
        }
        Ok(())
    }

    fn borrower_phase(&mut self, t: u32, terminated: &[(u64, ContractState)]) -> Result<Originations> {
        let mode = self.config.borrowers.population;
        for &(id, state) in terminated {
            match (mode, state) {
                (PopulationMode::Recurring { .. }, ContractState::Paid) => {
                    if let Some(b) = self.borrowers.get_mut(&id) {
                        b.renew(self.config, &mut self.rng.population);
                    }
                }
                _ => {
                    self.borrowers.remove(&id);
                }
            }
        }
        let fresh = spawn_borrowers(self.config, self.borrowers.len(), &mut self.next_borrower, &mut self.rng.population)?;
        self.borrowers.extend(fresh.into_iter().map(|b| (b.id, b)));

        let mut queue: Vec<u64> = self.borrowers.values().filter(|b| b.is_idle()).map(|b| b.id).collect();
        if self.config.request_order == RequestOrder::Shuffled {
            queue.shuffle(&mut self.rng.order);
        }
        let mut originated = Originations::default();
        for id in queue {
            match self.serve(id, t)? {
                Some(amount) => {
                    originated.volume += amount;
                    originated.count += 1;
                }
                // Recurring borrowers ask again next period; others are
                // replaced (fixed size) or leave (arrivals).
                None if !matches!(mode, PopulationMode::Recurring { .. }) => {
                    self.borrowers.remove(&id);
                }
                None => {}
            }
        }
        Ok(originated)
    }

    /// Handle one anticipation request. Returns the amount advanced when a
    /// loan is originated.
    ///
    /// The acceptance and payment draws happen for every request, funded or
    /// not, so that runs differing only in pricing see the same randomness.
    fn serve(&mut self, id: u64, t: u32) -> Result<Option<f64>> {
        let borrower = self.borrowers[&id].clone();
        let p_est = self.config.rating.estimate(borrower.p_true, &mut self.rng.rating)?;
        let schedule = borrower.schedule()?;
        let n = schedule.last_period();
        let a_plain = anticipation(&schedule, p_est, &self.rates)?;

        let terms = if borrower.has_guarantor {
            let guarantor = draw_guarantor(self.config, self.next_guarantor, &mut self.rng.guarantor);
            self.next_guarantor += 1;
            guarantor_offer(&guarantor, &borrower, self.rates.rate, n, &mut self.rng.guarantor)?
        } else {
            None
        };
        let a_guaranteed = match &terms {
            Some(g) => Some(anticipation_with_guarantor(&schedule, p_est, &self.rates, g)?),
            None => None,
        };

        let u: f64 = self.rng.acceptance.random();
        let outcome = sample_payment_outcome(borrower.p_true, n, &mut self.rng.payment);

        let mut choice = self.policy.select(p_est, a_plain, a_guaranteed)?;
        if self.config.guarantors.force && choice != OfferChoice::None && a_guaranteed.is_some_and(|a| a > 0.0) {
            choice = OfferChoice::Guaranteed;
        }
        let (offer, terms) = match choice {
            OfferChoice::Plain => (a_plain, None),
            OfferChoice::Guaranteed => (a_guaranteed.expect("guaranteed offer exists"), terms),
            OfferChoice::None => return Ok(None),
        };
        if let Some(curve) = &self.demand {
            let reference = curve.reference_anticipation(&schedule, p_est, self.rates.rate)?;
            if u >= acceptance_probability(curve, offer, reference)? {
                return Ok(None);
            }
        }
        let contract = LoanContract::new(id, schedule, offer, p_est, self.rates, terms, t, outcome);
        match self.ledger.originate(contract) {
            Some(index) => {
                if let Some(b) = self.borrowers.get_mut(&id) {
                    b.active_loan = Some(index);
                }
                Ok(Some(offer))
            }
            None => Ok(None),
        }
    }

    fn record(&mut self, t: u32, defaults: usize, originated: Originations) {
        let v = self.ledger.valuation(t);
        let mut volumes = TxVolumes::default();
        for tx in &self.ledger.log()[self.log_cursor..] {
            volumes.add(tx.kind, tx.amount);
        }
        self.log_cursor = self.ledger.log().len();
        if let Some(&(p, earned)) = self.ledger.interest().last() {
            if p == t {
                volumes.interest = earned;
            }
        }
        let quota_return = self
            .quota_history
            .last()
            .filter(|&&prev| prev > 0.0)
            .map(|prev| v.quota_value / prev - 1.0);
        self.quota_history.push(v.quota_value);
        let trailing_return = self.trailing(self.config.metric_window);
        let investors = self.ledger.holdings().values().filter(|&&q| q > 0.0).count();
        self.records.push(PeriodRecord {
            period: t,
            cash: v.cash,
            collateral_held: v.collateral_held,
            loan_book_value: v.loan_book_value,
            total_assets: v.total_assets,
            quota_value: v.quota_value,
            quota_return,
            trailing_return,
            investors,
            borrowers: self.borrowers.len(),
            volumes,
            originated_volume: originated.volume,
            originations: originated.count,
            defaults,
        });
    }

    fn finish(self, seed: u64) -> RunResult {
        RunResult {
            seed,
            periods_per_year: self.config.periods_per_year,
            records: self.records,
            transactions: self.ledger.log().to_vec(),
        }
    }
}

/// Simulate one scenario over its horizon.
pub fn run(config: &ScenarioConfig, seed: u64) -> Result<RunResult> {
    config.validate()?;
    run_validated(config, seed)
}

fn run_validated(config: &ScenarioConfig, seed: u64) -> Result<RunResult> {
    let mut sim = Simulation::new(config, seed)?;
    for t in 1..=config.horizon {
        sim.step(t)?;
    }
    Ok(sim.finish(seed))
}

/// Run `n_runs` independent replications; run `i` uses
/// `derive_run_seed(base_seed, i)`. Runs execute on the rayon pool and are
/// returned in index order.
pub fn run_batch(config: &ScenarioConfig, n_runs: u32, base_seed: u64) -> Result<Vec<RunResult>> {
    batch(config, n_runs, base_seed, true)
}

/// Same as [`run_batch`] on the calling thread only.
pub fn run_batch_serial(config: &ScenarioConfig, n_runs: u32, base_seed: u64) -> Result<Vec<RunResult>> {
    batch(config, n_runs, base_seed, false)
}

fn batch(config: &ScenarioConfig, n_runs: u32, base_seed: u64, parallel: bool) -> Result<Vec<RunResult>> {
    if n_runs < 1 {
        return Err(invalid("n_runs must be at least 1"));
    }
    config.validate()?;
    let one = |i: u32| run_validated(config, derive_run_seed(base_seed, u64::from(i)));
    if parallel {
        (0..n_runs).into_par_iter().map(one).collect()
    } else {
        (0..n_runs).map(one).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::*;
    use crate::credit::{DefaultPopulation, RatingModel};

    fn base(horizon: u32) -> ScenarioConfig {
        ScenarioConfig {
            horizon,
            periods_per_year: 12,
            base_rate: 0.1,
            spread: 0.1,
            demand: None,
            default_population: DefaultPopulation::Beta { a: 2.0, b: 200.0 },
            rating: RatingModel::identity(),
            guarantors: GuarantorConfig::default(),
            borrowers: BorrowerConfig {
                population: PopulationMode::Constant { size: 0 },
                schedule_total: RealDist::Fixed(1.0),
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
    fn idle_pool_only_accrues() {
        let cfg = base(36);
        let res = run(&cfg, 7).unwrap();
        assert_eq!(res.records.len(), 37);
        let r = cfg.period_rate();
        for w in res.records.windows(2) {
            assert!((w[1].cash - w[0].cash * (1.0 + r)).abs() < 1e-9 * w[1].cash);
        }
        let terminal = res.last().quota_value;
        assert!((terminal / (1.0 + r).powi(36) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_horizon_keeps_initial_state() {
        let res = run(&base(0), 1).unwrap();
        assert_eq!(res.records.len(), 1);
        assert_eq!(res.records[0].total_assets, 100.0);
        assert_eq!(res.records[0].quota_return, None);
    }

    #[test]
    fn batch_matches_single_runs_and_is_order_independent() {
        let mut cfg = base(12);
        cfg.borrowers.population = PopulationMode::Constant { size: 50 };
        let batch = run_batch(&cfg, 4, 99).unwrap();
        assert_eq!(batch, run_batch_serial(&cfg, 4, 99).unwrap());
        for (i, r) in batch.iter().enumerate() {
            assert_eq!(r, &run(&cfg, derive_run_seed(99, i as u64)).unwrap());
        }
        assert_eq!(run_batch(&cfg, 1, 99).unwrap()[0], batch[0]);
        assert!(run_batch(&cfg, 0, 99).is_err());
    }

    #[test]
    fn invalid_config_is_rejected() {
        let mut cfg = base(5);
        cfg.periods_per_year = 0;
        assert!(run(&cfg, 1).is_err());
    }

    #[test]
    fn cash_changes_replay_from_flows() {
        let mut cfg = base(24);
        cfg.borrowers.population = PopulationMode::Recurring { size: 80 };
        cfg.guarantors.frequency = 0.5;
        cfg.guarantors.force = true;
        cfg.demand = Some(DemandConfig {
            phi: -20.0,
            reference_spread: 0.3,
        });
        cfg.investors.arrivals = ArrivalProcess::Poisson { rate: 1.0 };
        cfg.investors.loss_withdraw_rate = RealDist::Fixed(0.3);
        cfg.investors.min_holding = CountDist::Uniform { low: 1, high: 4 };
        let res = run(&cfg, 3).unwrap();
        for w in res.records.windows(2) {
            let delta = w[1].cash - w[0].cash;
            assert!((delta - w[1].volumes.net_cash()).abs() < 1e-9 * w[1].cash.max(1.0));
            assert!(w[1].cash >= 0.0);
        }
        assert!(res.records.iter().any(|r| r.volumes.collateral_in > 0.0));
    }
}
