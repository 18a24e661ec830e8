//! Grid search over the platform spread.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::ScenarioConfig;
use crate::engine::{derive_run_seed, run, RunResult};
use crate::error::{invalid, Error, Result};
use crate::metrics::{mean_and_se, BoxStats};

/// Loan-fund volume functional maximized by the sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// Loan book value averaged over periods 1..=horizon.
    #[default]
    Mean,
    /// Loan book value at the horizon.
    Terminal,
    /// Total amount advanced over the run.
    Cumulative,
}

impl Objective {
    pub fn evaluate(self, run: &RunResult) -> f64 {
        let records = &run.records;
        match self {
            Objective::Mean => {
                let tail = if records.len() > 1 { &records[1..] } else { &records[..] };
                tail.iter().map(|r| r.loan_book_value).sum::<f64>() / tail.len() as f64
            }
            Objective::Terminal => run.last().loan_book_value,
            Objective::Cumulative => records.iter().map(|r| r.originated_volume).sum(),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Objective::Mean => "mean",
            Objective::Terminal => "terminal",
            Objective::Cumulative => "cumulative",
        }
    }
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Objective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(Objective::Mean),
            "terminal" => Ok(Objective::Terminal),
            "cumulative" => Ok(Objective::Cumulative),
            other => Err(invalid(format!("unknown objective {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    /// Annualized spread.
    pub spread: f64,
    /// One objective value per run, in run order.
    pub samples: Vec<f64>,
    pub mean: f64,
    pub std_error: f64,
    pub summary: BoxStats,
    /// Mean relative to the lowest-mean candidate.
    pub relative_volume: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub objective: Objective,
    pub runs: u32,
    pub base_seed: u64,
    /// Candidates in the order the spreads were given.
    pub candidates: Vec<Candidate>,
}

/// Evaluate every spread on the same derived run seeds (common random
/// numbers), so differences between candidates come from pricing alone.
pub fn sweep_spread(
    config: &ScenarioConfig,
    spreads: &[f64],
    n_runs: u32,
    base_seed: u64,
    objective: Objective,
) -> Result<SweepResult> {
    if spreads.is_empty() {
        return Err(invalid("spread list is empty"));
    }
    if n_runs < 1 {
        return Err(invalid("n_runs must be at least 1"));
    }
    for (i, s) in spreads.iter().enumerate() {
        if spreads[..i].contains(s) {
            return Err(invalid(format!("spread {s} listed twice")));
        }
    }
    let configs: Vec<ScenarioConfig> = spreads.iter().map(|&s| config.with_spread(s)).collect();
    for c in &configs {
        c.validate()?;
    }
    let grid: Vec<(usize, u32)> = (0..configs.len()).flat_map(|c| (0..n_runs).map(move |i| (c, i))).collect();
    let values: Vec<f64> = grid
        .par_iter()
        .map(|&(c, i)| run(&configs[c], derive_run_seed(base_seed, u64::from(i))).map(|r| objective.evaluate(&r)))
        .collect::<Result<_>>()?;

    let mut candidates: Vec<Candidate> = values
        .chunks(n_runs as usize)
        .zip(spreads)
        .map(|(samples, &spread)| {
            let (mean, std_error) = mean_and_se(samples);
            Ok(Candidate {
                spread,
                samples: samples.to_vec(),
                mean,
                std_error,
                summary: BoxStats::from_sample(samples)?,
                relative_volume: 1.0,
            })
        })
        .collect::<Result<_>>()?;
    let floor = candidates.iter().map(|c| c.mean).fold(f64::INFINITY, f64::min);
    for c in &mut candidates {
        c.relative_volume = if c.mean == floor {
            1.0
        } else if floor > 0.0 {
            c.mean / floor
        } else {
            f64::INFINITY
        };
    }
    Ok(SweepResult {
        objective,
        runs: n_runs,
        base_seed,
        candidates,
    })
}

/// Spread with the highest mean objective; any candidate within one
/// standard error of that mean counts as tied, and ties go to the lowest
/// spread.
pub fn select_best(result: &SweepResult) -> f64 {
    let best = result
        .candidates
        .iter()
        .max_by(|a, b| a.mean.total_cmp(&b.mean).then(b.spread.total_cmp(&a.spread)))
        .expect("sweep has at least one candidate");
    result
        .candidates
        .iter()
        .filter(|c| c.mean >= best.mean - best.std_error)
        .map(|c| c.spread)
        .fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn candidate(spread: f64, samples: &[f64]) -> Candidate {
        let (mean, std_error) = mean_and_se(samples);
        Candidate {
            spread,
            samples: samples.to_vec(),
            mean,
            std_error,
            summary: BoxStats::from_sample(samples).unwrap(),
            relative_volume: 1.0,
        }
    }

    fn sweep(c: Vec<Candidate>) -> SweepResult {
        SweepResult {
            objective: Objective::Mean,
            runs: 1,
            base_seed: 0,
            candidates: c,
        }
    }

    #[test]
    fn picks_highest_mean() {
        let r = sweep(vec![candidate(0.1, &[10.0]), candidate(0.2, &[20.0]), candidate(0.3, &[15.0])]);
        assert_eq!(select_best(&r), 0.2);
        assert_eq!(select_best(&sweep(vec![candidate(0.4, &[3.0])])), 0.4);
    }

    #[test]
    fn ties_go_to_lower_spread() {
        let r = sweep(vec![candidate(0.3, &[5.0]), candidate(0.1, &[5.0])]);
        assert_eq!(select_best(&r), 0.1);
        // 0.2 has the higher mean, but 0.1 is within its standard error.
        let r = sweep(vec![
            candidate(0.1, &[9.0, 10.0, 11.0]),
            candidate(0.2, &[8.0, 10.5, 13.0]),
        ]);
        assert!(r.candidates[1].mean - r.candidates[0].mean < r.candidates[1].std_error);
        assert_eq!(select_best(&r), 0.1);
    }

    #[test]
    fn objective_names_round_trip() {
        for o in [Objective::Mean, Objective::Terminal, Objective::Cumulative] {
            assert_eq!(o.as_str().parse::<Objective>().unwrap(), o);
        }
        assert!("median".parse::<Objective>().is_err());
    }
}
