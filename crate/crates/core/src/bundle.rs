//! Plot-ready output files and the manifest that reproduces them.
//!
//! A simulation bundle is four files: `manifest.json`, `series.csv`,
//! `transactions.csv` and `summary.json`. A sweep bundle is `manifest.json`,
//! `samples.csv` and `best.json`. Everything is a pure function of the
//! manifest, so regenerating from it yields identical bytes.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{annualize, ScenarioConfig};
use crate::engine::{run_batch, run_batch_serial, PeriodRecord, RunResult};
use crate::error::{invalid, Result};
use crate::ledger::TxKind;
use crate::metrics::{ensemble_stats, mean_and_se, SeriesStats};
use crate::optimizer::{select_best, Objective, SweepResult};

pub const TOOL: &str = "poolsim";

/// Column order of `series.csv`.
pub const SERIES_COLUMNS: [&str; 23] = [
    "run",
    "period",
    "cash",
    "collateral_held",
    "loan_book_value",
    "total_assets",
    "quota_value",
    "quota_return",
    "trailing_return",
    "investors",
    "borrowers",
    "originated_volume",
    "originations",
    "defaults",
    "deposit",
    "withdrawal",
    "anticipation",
    "installment",
    "collateral_in",
    "collateral_settlement",
    "guarantor_gain_out",
    "interest",
    "seed",
];

pub fn config_digest(config: &ScenarioConfig) -> String {
    hex::encode(Sha256::digest(config.to_json().as_bytes()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub config_sha256: String,
    pub seed: u64,
    pub runs: u32,
    /// Present for sweeps only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
    pub config: ScenarioConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub spreads: Vec<f64>,
    pub objective: Objective,
}

impl Manifest {
    pub fn new(config: &ScenarioConfig, seed: u64, runs: u32, sweep: Option<SweepSpec>) -> Self {
        Self {
            tool: TOOL.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config_sha256: config_digest(config),
            seed,
            runs,
            sweep,
            config: config.clone(),
        }
    }

    /// Check the embedded digest against the embedded config.
    pub fn verify(&self) -> Result<()> {
        if config_digest(&self.config) != self.config_sha256 {
            return Err(invalid("manifest digest does not match its config"));
        }
        Ok(())
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn csv_text(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| invalid(format!("csv output: {e}"));
    w.write_record(header).map_err(err)?;
    for row in rows {
        w.write_record(&row).map_err(err)?;
    }
    let bytes = w.into_inner().map_err(|e| invalid(format!("csv output: {e}")))?;
    String::from_utf8(bytes).map_err(|e| invalid(format!("csv output: {e}")))
}

/// One row per period per run; absent values are empty cells.
pub fn series_csv(results: &[RunResult]) -> Result<String> {
    let rows = results.iter().enumerate().flat_map(|(i, run)| {
        run.records.iter().map(move |r| {
            let v = &r.volumes;
            vec![
                i.to_string(),
                r.period.to_string(),
                r.cash.to_string(),
                r.collateral_held.to_string(),
                r.loan_book_value.to_string(),
                r.total_assets.to_string(),
                r.quota_value.to_string(),
                fmt_opt(r.quota_return),
                fmt_opt(r.trailing_return),
                r.investors.to_string(),
                r.borrowers.to_string(),
                r.originated_volume.to_string(),
                r.originations.to_string(),
                r.defaults.to_string(),
                v.deposit.to_string(),
                v.withdrawal.to_string(),
                v.anticipation.to_string(),
                v.installment.to_string(),
                v.collateral_in.to_string(),
                v.collateral_settlement.to_string(),
                v.guarantor_gain_out.to_string(),
                v.interest.to_string(),
                run.seed.to_string(),
            ]
        })
    });
    csv_text(&SERIES_COLUMNS, rows)
}

pub fn transactions_csv(results: &[RunResult]) -> Result<String> {
    let rows = results.iter().enumerate().flat_map(|(i, run)| {
        run.transactions
            .iter()
            .map(move |t| vec![i.to_string(), t.period.to_string(), t.kind.to_string(), t.amount.to_string()])
    });
    csv_text(&["run", "period", "type", "amount"], rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    /// Period of the first entry in `stats`.
    pub first_period: u32,
    pub stats: SeriesStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub runs: u32,
    pub horizon: u32,
    pub periods_per_year: u32,
    /// Annualized `r + s`.
    pub target_return: f64,
    /// Mean one-period quota return over all runs and periods.
    pub mean_period_return: Option<f64>,
    pub mean_period_return_se: Option<f64>,
    pub mean_annualized_return: Option<f64>,
    pub metrics: BTreeMap<String, MetricSummary>,
}

type Field = Box<dyn Fn(&PeriodRecord) -> Option<f64>>;

fn metric(results: &[RunResult], first: usize, f: impl Fn(&PeriodRecord) -> Option<f64>) -> Result<Option<MetricSummary>> {
    let ensemble: Vec<Vec<f64>> = results
        .iter()
        .map(|r| r.records[first.min(r.records.len())..].iter().map(&f).collect::<Option<Vec<f64>>>())
        .collect::<Option<_>>()
        .unwrap_or_default();
    if ensemble.is_empty() || ensemble[0].is_empty() {
        return Ok(None);
    }
    Ok(Some(MetricSummary {
        first_period: first as u32,
        stats: ensemble_stats(&ensemble)?,
    }))
}

pub fn summarize(config: &ScenarioConfig, results: &[RunResult]) -> Result<Summary> {
    let ppy = config.periods_per_year;
    let mut metrics = BTreeMap::new();
    let window = config.metric_window as usize;
    let candidates: [(&str, usize, Field); 9] = [
        ("cash", 0, Box::new(|r| Some(r.cash))),
        ("loan_book_value", 0, Box::new(|r| Some(r.loan_book_value))),
        ("total_assets", 0, Box::new(|r| Some(r.total_assets))),
        ("quota_value", 0, Box::new(|r| Some(r.quota_value))),
        ("quota_return", 1, Box::new(|r| r.quota_return)),
        ("trailing_return", window, Box::new(|r| r.trailing_return)),
        ("investors", 0, Box::new(|r| Some(r.investors as f64))),
        ("borrowers", 0, Box::new(|r| Some(r.borrowers as f64))),
        ("originated_volume", 0, Box::new(|r| Some(r.originated_volume))),
    ];
    for (name, first, f) in candidates {
        if let Some(m) = metric(results, first, f)? {
            metrics.insert(name.to_string(), m);
        }
    }
    let returns: Vec<f64> = results.iter().flat_map(|r| r.returns()).collect();
    let (mean, se) = if returns.is_empty() {
        (None, None)
    } else {
        let (m, s) = mean_and_se(&returns);
        (Some(m), Some(s))
    };
    Ok(Summary {
        runs: results.len() as u32,
        horizon: config.horizon,
        periods_per_year: ppy,
        target_return: annualize(config.period_rate() + config.period_spread(), ppy),
        mean_period_return: mean,
        mean_period_return_se: se,
        mean_annualized_return: mean.map(|m| annualize(m, ppy)),
        metrics,
    })
}

fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("plain data serializes");
    s.push('\n');
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationBundle {
    pub manifest: Manifest,
    pub results: Vec<RunResult>,
    pub series_csv: String,
    pub transactions_csv: String,
    pub summary_json: String,
}

impl SimulationBundle {
    pub fn build(config: &ScenarioConfig, seed: u64, runs: u32, parallel: bool) -> Result<Self> {
        let manifest = Manifest::new(config, seed, runs, None);
        Self::from_manifest(&manifest, parallel)
    }

    pub fn from_manifest(manifest: &Manifest, parallel: bool) -> Result<Self> {
        manifest.verify()?;
        let config = &manifest.config;
        let results = if parallel {
            run_batch(config, manifest.runs, manifest.seed)?
        } else {
            run_batch_serial(config, manifest.runs, manifest.seed)?
        };
        Ok(Self {
            series_csv: series_csv(&results)?,
            transactions_csv: transactions_csv(&results)?,
            summary_json: json(&summarize(config, &results)?),
            manifest: manifest.clone(),
            results,
        })
    }

    pub fn files(&self) -> Vec<(&'static str, String)> {
        vec![
            ("manifest.json", json(&self.manifest)),
            ("series.csv", self.series_csv.clone()),
            ("transactions.csv", self.transactions_csv.clone()),
            ("summary.json", self.summary_json.clone()),
        ]
    }

    pub fn write_to(&self, dir: &Path) -> io::Result<()> {
        write_files(dir, self.files())
    }
}

#[derive(Debug, Clone, Serialize)]
struct BestReport<'a> {
    objective: Objective,
    best_spread: f64,
    candidates: Vec<CandidateRow<'a>>,
}

#[derive(Debug, Clone, Serialize)]
struct CandidateRow<'a> {
    spread: f64,
    mean: f64,
    std_error: f64,
    relative_volume: f64,
    summary: &'a crate::metrics::BoxStats,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepBundle {
    pub manifest: Manifest,
    pub result: SweepResult,
    pub best_spread: f64,
    pub samples_csv: String,
    pub best_json: String,
}

impl SweepBundle {
    pub fn build(config: &ScenarioConfig, spreads: &[f64], runs: u32, seed: u64, objective: Objective) -> Result<Self> {
        let sweep = SweepSpec {
            spreads: spreads.to_vec(),
            objective,
        };
        Self::from_manifest(&Manifest::new(config, seed, runs, Some(sweep)))
    }

    pub fn from_manifest(manifest: &Manifest) -> Result<Self> {
        manifest.verify()?;
        let spec = manifest
            .sweep
            .as_ref()
            .ok_or_else(|| invalid("manifest does not describe a sweep"))?;
        let result = crate::optimizer::sweep_spread(
            &manifest.config,
            &spec.spreads,
            manifest.runs,
            manifest.seed,
            spec.objective,
        )?;
        let best_spread = select_best(&result);
        let rows = result.candidates.iter().flat_map(|c| {
            c.samples
                .iter()
                .enumerate()
                .map(move |(i, v)| vec![c.spread.to_string(), i.to_string(), v.to_string()])
        });
        let samples_csv = csv_text(&["spread", "run", "objective"], rows)?;
        let best_json = json(&BestReport {
            objective: result.objective,
            best_spread,
            candidates: result
                .candidates
                .iter()
                .map(|c| CandidateRow {
                    spread: c.spread,
                    mean: c.mean,
                    std_error: c.std_error,
                    relative_volume: c.relative_volume,
                    summary: &c.summary,
                })
                .collect(),
        });
        Ok(Self {
            manifest: manifest.clone(),
            result,
            best_spread,
            samples_csv,
            best_json,
        })
    }

    pub fn files(&self) -> Vec<(&'static str, String)> {
        vec![
            ("manifest.json", json(&self.manifest)),
            ("samples.csv", self.samples_csv.clone()),
            ("best.json", self.best_json.clone()),
        ]
    }

    pub fn write_to(&self, dir: &Path) -> io::Result<()> {
        write_files(dir, self.files())
    }
}

fn write_files(dir: &Path, files: Vec<(&'static str, String)>) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    for (name, body) in files {
        fs::write(dir.join(name), body)?;
    }
    Ok(())
}

/// Labels used in `transactions.csv`.
pub fn transaction_types() -> Vec<&'static str> {
    TxKind::ALL.iter().map(|k| k.as_str()).collect()
}
