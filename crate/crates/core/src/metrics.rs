//! Return series, allocation diagnostics and ensemble summaries.

use serde::{Deserialize, Serialize};

use crate::engine::RunResult;
use crate::error::{invalid, Result};

/// `quota[t] / quota[t-1] - 1` for t = 1..n.
pub fn one_period_return(quota: &[f64]) -> Result<Vec<f64>> {
    if quota.len() < 2 {
        return Err(invalid("return series needs at least two values"));
    }
    if let Some(bad) = quota.iter().find(|&&q| !(q.is_finite() && q > 0.0)) {
        return Err(invalid(format!("quota values must be positive (got {bad})")));
    }
    Ok(quota.windows(2).map(|w| w[1] / w[0] - 1.0).collect())
}

/// Annualized growth over the last `window` periods of `quota`, or `None`
/// when the history is too short.
pub fn trailing_return_at(quota: &[f64], window: u32, periods_per_year: u32) -> Option<f64> {
    let w = window as usize;
    if w == 0 || quota.len() <= w {
        return None;
    }
    let end = quota[quota.len() - 1];
    let start = quota[quota.len() - 1 - w];
    if start <= 0.0 {
        return None;
    }
    Some((end / start).powf(f64::from(periods_per_year) / f64::from(window)) - 1.0)
}

/// Trailing annualized return at every period; entries before `window` are
/// `None`. A window longer than the series yields an all-`None` series.
pub fn trailing_annualized_return(quota: &[f64], window: u32, periods_per_year: u32) -> Result<Vec<Option<f64>>> {
    if window < 1 {
        return Err(invalid("trailing window must be at least 1"));
    }
    Ok((1..=quota.len())
        .map(|end| trailing_return_at(&quota[..end], window, periods_per_year))
        .collect())
}

/// Share of total assets held as loans, per period.
pub fn allocation_ratio(run: &RunResult) -> Vec<f64> {
    run.records
        .iter()
        .map(|r| {
            if r.total_assets > 0.0 {
                (r.loan_book_value / r.total_assets).clamp(0.0, 1.0)
            } else {
                0.0
            }
        })
        .collect()
}

/// Five-number summary plus mean of one sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxStats {
    pub mean: f64,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

fn median_sorted(v: &[f64]) -> f64 {
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

impl BoxStats {
    /// Quartiles are medians of the lower and upper halves, excluding the
    /// middle element for odd sizes. A single value gives all-equal stats.
    pub fn from_sample(sample: &[f64]) -> Result<Self> {
        if sample.is_empty() {
            return Err(invalid("cannot summarize an empty sample"));
        }
        if sample.iter().any(|x| x.is_nan()) {
            return Err(invalid("sample contains NaN"));
        }
        let mut v = sample.to_vec();
        v.sort_by(f64::total_cmp);
        let n = v.len();
        let (q1, q3) = if n == 1 {
            (v[0], v[0])
        } else {
            (median_sorted(&v[..n / 2]), median_sorted(&v[n.div_ceil(2)..]))
        };
        Ok(Self {
            mean: v.iter().sum::<f64>() / n as f64,
            min: v[0],
            q1,
            median: median_sorted(&v),
            q3,
            max: v[n - 1],
        })
    }

    pub fn iqr(&self) -> f64 {
        self.q3 - self.q1
    }
}

/// Per-period order statistics and mean across an ensemble.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SeriesStats {
    pub mean: Vec<f64>,
    pub min: Vec<f64>,
    pub q1: Vec<f64>,
    pub median: Vec<f64>,
    pub q3: Vec<f64>,
    pub max: Vec<f64>,
}

impl SeriesStats {
    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }

    pub fn at(&self, t: usize) -> BoxStats {
        BoxStats {
            mean: self.mean[t],
            min: self.min[t],
            q1: self.q1[t],
            median: self.median[t],
            q3: self.q3[t],
            max: self.max[t],
        }
    }
}

pub fn ensemble_stats(ensemble: &[Vec<f64>]) -> Result<SeriesStats> {
    let first = ensemble.first().ok_or_else(|| invalid("ensemble is empty"))?;
    let len = first.len();
    if ensemble.iter().any(|s| s.len() != len) {
        return Err(invalid("ensemble series differ in length"));
    }
    let mut out = SeriesStats::default();
    let mut column = Vec::with_capacity(ensemble.len());
    for t in 0..len {
        column.clear();
        column.extend(ensemble.iter().map(|s| s[t]));
        let b = BoxStats::from_sample(&column)?;
        out.mean.push(b.mean);
        out.min.push(b.min);
        out.q1.push(b.q1);
        out.median.push(b.median);
        out.q3.push(b.q3);
        out.max.push(b.max);
    }
    Ok(out)
}

/// Sample mean and standard error of the mean (zero for a single value).
pub fn mean_and_se(sample: &[f64]) -> (f64, f64) {
    let n = sample.len() as f64;
    if sample.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = sample.iter().sum::<f64>() / n;
    if sample.len() < 2 {
        return (mean, 0.0);
    }
    let var = sample.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn one_period_examples() {
        assert_eq!(one_period_return(&[2.0, 2.0, 2.0]).unwrap(), vec![0.0, 0.0]);
        let geo: Vec<f64> = (0..10).map(|i| 1.05f64.powi(i)).collect();
        for r in one_period_return(&geo).unwrap() {
            assert!((r - 0.05).abs() < 1e-12);
        }
        assert!(one_period_return(&[1.0, 0.0]).is_err());
        assert!(one_period_return(&[1.0]).is_err());
    }

    #[test]
    fn trailing_examples() {
        let x = 0.01f64;
        let q: Vec<f64> = (0..30).map(|i| (1.0 + x).powi(i)).collect();
        let tr = trailing_annualized_return(&q, 18, 12).unwrap();
        assert!(tr[..18].iter().all(Option::is_none));
        let expected = (1.0 + x).powi(12) - 1.0;
        for v in tr[18..].iter() {
            assert!((v.unwrap() - expected).abs() < 1e-12);
        }
        let single = trailing_annualized_return(&q, 29, 12).unwrap();
        assert_eq!(single.iter().filter(|v| v.is_some()).count(), 1);
        assert!(trailing_annualized_return(&q, 40, 12).unwrap().iter().all(Option::is_none));
        assert!(trailing_annualized_return(&q, 0, 12).is_err());
    }

    #[test]
    fn box_examples() {
        let b = BoxStats::from_sample(&[5.0, 1.0, 4.0, 2.0, 3.0]).unwrap();
        assert_eq!((b.min, b.median, b.max), (1.0, 3.0, 5.0));
        assert_eq!((b.q1, b.q3), (1.5, 4.5));
        let s = ensemble_stats(&[vec![1.0, 2.0, 3.0]]).unwrap();
        assert_eq!(s.min, vec![1.0, 2.0, 3.0]);
        assert_eq!(s.q3, vec![1.0, 2.0, 3.0]);
        assert!(ensemble_stats(&[vec![1.0], vec![1.0, 2.0]]).is_err());
        assert!(ensemble_stats(&[]).is_err());
    }

    #[test]
    fn standard_error() {
        let (m, se) = mean_and_se(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((se - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn stats_are_ordered(sample in proptest::collection::vec(-1e6f64..1e6, 1..60)) {
            let b = BoxStats::from_sample(&sample).unwrap();
            prop_assert!(b.min <= b.q1 && b.q1 <= b.median && b.median <= b.q3 && b.q3 <= b.max);
            prop_assert!(b.min <= b.mean && b.mean <= b.max);
        }

        #[test]
        fn annualization_is_window_independent(x in -0.02f64..0.05, w in 1u32..24) {
            let q: Vec<f64> = (0..30).map(|i| (1.0 + x).powi(i)).collect();
            let expected = (1.0 + x).powi(12) - 1.0;
            for v in trailing_annualized_return(&q, w, 12).unwrap().into_iter().flatten() {
                prop_assert!((v - expected).abs() < 1e-9);
            }
        }
    }
}
