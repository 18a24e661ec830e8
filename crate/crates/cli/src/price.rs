use std::fs;
use std::io::Write;
use std::path::PathBuf;

use anyhow::{anyhow, bail, Context};
use clap::Args;
use poolsim_core::{anticipation, anticipation_with_guarantor, GuarantorTerms, RateSet, ReceivableSchedule};

use crate::Failure;

/// A single value or an inclusive `start:stop:step` range.
#[derive(Clone, Debug)]
pub struct Values(Vec<f64>);

fn parse_values(text: &str) -> Result<Values, String> {
    let nums: Vec<f64> = text
        .split(':')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<Result<_, _>>()?;
    match nums[..] {
        [v] => Ok(Values(vec![v])),
        [start, stop, step] => {
            if step.is_nan() || step <= 0.0 || stop < start {
                return Err("range needs start <= stop and a positive step".into());
            }
            let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
            if count > 100_000 {
                return Err("range has more than 100000 points".into());
            }
            Ok(Values((0..count).map(|i| start + i as f64 * step).collect()))
        }
        _ => Err("expected a number or start:stop:step".into()),
    }
}

#[derive(Args)]
pub struct PriceArgs {
    /// Sum of the receivables.
    #[arg(long, value_parser = parse_values)]
    total: Values,
    /// Number of equal monthly installments.
    #[arg(long = "n", value_parser = parse_values)]
    n: Values,
    /// Platform's per-period default probability.
    #[arg(long, value_parser = parse_values)]
    p: Values,
    /// Per-period base rate.
    #[arg(long, value_parser = parse_values, default_value = "0")]
    r: Values,
    /// Per-period platform spread.
    #[arg(long, value_parser = parse_values, default_value = "0")]
    s: Values,
    /// Guarantor collateral.
    #[arg(long, value_parser = parse_values)]
    vc: Option<Values>,
    /// Guarantor's per-period default estimate.
    #[arg(long, value_parser = parse_values)]
    pg: Option<Values>,
    /// Guarantor's per-period extra spread.
    #[arg(long, value_parser = parse_values)]
    sg: Option<Values>,
    /// Write CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

const HEADER: &str = "total,n,p,r,s,vc,pg,sg,gain,a,a_g";

fn cartesian(axes: &[&[f64]]) -> Vec<Vec<f64>> {
    axes.iter().fold(vec![Vec::new()], |acc, axis| {
        acc.into_iter()
            .flat_map(|prefix| {
                axis.iter().map(move |&v| {
                    let mut row = prefix.clone();
                    row.push(v);
                    row
                })
            })
            .collect()
    })
}

fn quote_rows(args: &PriceArgs) -> anyhow::Result<Vec<String>> {
    let guarantor = match (&args.vc, &args.pg, &args.sg) {
        (Some(vc), Some(pg), Some(sg)) => Some((vc.0.as_slice(), pg.0.as_slice(), sg.0.as_slice())),
        (None, None, None) => None,
        _ => bail!("--vc, --pg and --sg must be given together"),
    };
    let none = [f64::NAN];
    let (vc, pg, sg) = guarantor.unwrap_or((&none, &none, &none));
    let grid = cartesian(&[&args.total.0, &args.n.0, &args.p.0, &args.r.0, &args.s.0, vc, pg, sg]);
    let mut rows = Vec::with_capacity(grid.len());
    for g in grid {
        let [total, n, p, r, s, vc, pg, sg] = g[..] else { unreachable!() };
        if n.fract() != 0.0 || n < 1.0 {
            bail!("--n must be a positive integer (got {n})");
        }
        let n = n as u32;
        let schedule = ReceivableSchedule::equal(total, n)?;
        let rates = RateSet::new(r, s)?;
        let a = anticipation(&schedule, p, &rates)?;
        let row = if guarantor.is_some() {
            let terms = GuarantorTerms::quote(vc, pg, sg, r, n)?;
            let a_g = anticipation_with_guarantor(&schedule, p, &rates, &terms)?;
            format!("{total},{n},{p},{r},{s},{vc},{pg},{sg},{},{a},{a_g}", terms.gain)
        } else {
            format!("{total},{n},{p},{r},{s},,,,,{a},")
        };
        rows.push(row);
    }
    Ok(rows)
}

pub fn run(args: PriceArgs) -> Result<(), Failure> {
    let rows = quote_rows(&args).map_err(Failure::Usage)?;
    let mut text = String::from(HEADER);
    text.push('\n');
    for row in rows {
        text.push_str(&row);
        text.push('\n');
    }
    match &args.out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display()))?,
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| anyhow!("writing stdout: {e}"))?,
    }
    Ok(())
}
