//! Summary statistics, Pearson correlations and significance stars.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use super::ols::{ols, Covariance};
use crate::error::{Error, Result};
use crate::period::{Frequency, Ordinal};
use crate::quantile::{quantile_sorted, sorted_copy};

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample (n-1) standard deviation; exactly zero when all values are equal.
pub fn sample_sd(xs: &[f64]) -> f64 {
    if xs.len() < 2 || xs.iter().all(|x| *x == xs[0]) {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0)).sqrt()
}

/// Pearson correlation; absent with fewer than two points or zero variance.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len().min(y.len());
    if n < 2 {
        return None;
    }
    let (mx, my) = (mean(&x[..n]), mean(&y[..n]));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let (dx, dy) = (x[i] - mx, y[i] - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryStats {
    pub n: usize,
    pub mean: f64,
    /// Newey-West standard error of the mean.
    pub se: f64,
    pub t: Option<f64>,
    pub sd: f64,
    pub min: f64,
    pub p05: f64,
    pub p25: f64,
    pub p50: f64,
    pub p75: f64,
    pub p95: f64,
    pub max: f64,
    /// Annualized `mean / sd * sqrt(periods per year)`; absent when SD is 0.
    pub sharpe: Option<f64>,
}

pub fn summary_stats(values: &[f64], frequency: Frequency, nw_lags: Option<usize>) -> Result<SummaryStats> {
    let n = values.len();
    if n < 2 {
        return Err(Error::InsufficientObservations {
            n_obs: n,
            n_regressors: 1,
        });
    }
    let sorted = sorted_copy(values);
    let m = mean(values);
    let sd = sample_sd(values);
    let (se, t) = if sd == 0.0 {
        (0.0, None)
    } else {
        let x = DMatrix::from_element(n, 1, 1.0);
        let r = ols(values, &x, &["mean".to_owned()], Covariance::NeweyWest(nw_lags))?;
        (r.se[0], r.t[0])
    };
    let q = |num| quantile_sorted(&sorted, num, 100);
    Ok(SummaryStats {
        n,
        mean: m,
        se,
        t,
        sd,
        min: sorted[0],
        p05: q(5),
        p25: q(25),
        p50: q(50),
        p75: q(75),
        p95: q(95),
        max: sorted[n - 1],
        sharpe: sharpe_ratio(m, sd, frequency),
    })
}

pub fn sharpe_ratio(mean: f64, sd: f64, frequency: Frequency) -> Option<f64> {
    (sd > 0.0).then(|| mean / sd * frequency.periods_per_year().sqrt())
}

/// Significance thresholds; a p-value below the k-th smallest level earns
/// `levels.len() - k` stars.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StarLevels(Vec<f64>);

impl StarLevels {
    pub fn new(mut levels: Vec<f64>) -> Result<Self> {
        if levels.iter().any(|l| !(*l > 0.0 && *l < 1.0)) {
            return Err(Error::Invalid("star levels must lie in (0, 1)".into()));
        }
        levels.sort_by(f64::total_cmp);
        Ok(Self(levels))
    }

    /// 10/5/1 percent, used for regression tables.
    pub fn regression() -> Self {
        Self(vec![0.01, 0.05, 0.10])
    }

    /// 0.1/1/10 percent, used for correlation tables.
    pub fn correlation() -> Self {
        Self(vec![0.001, 0.01, 0.10])
    }

    pub fn levels(&self) -> &[f64] {
        &self.0
    }

    pub fn stars(&self, p: f64) -> &'static str {
        const STARS: [&str; 4] = ["", "*", "**", "***"];
        let k = self.0.iter().filter(|l| p < **l).count();
        STARS[k.min(3)]
    }
}

/// Two-sided normal p-value of a t statistic.
pub fn normal_p_value(t: f64) -> f64 {
    let n = Normal::new(0.0, 1.0).expect("standard normal");
    2.0 * (1.0 - n.cdf(t.abs()))
}

/// Two-sided p-value of `rho` under the `t = rho sqrt((n-2)/(1-rho^2))` test.
pub fn correlation_p_value(rho: f64, n: usize) -> f64 {
    if n < 3 {
        return 1.0;
    }
    if rho.abs() >= 1.0 {
        return 0.0;
    }
    let df = (n - 2) as f64;
    let t = rho * (df / (1.0 - rho * rho)).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
    2.0 * (1.0 - dist.cdf(t.abs()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationCell {
    pub rho: f64,
    pub n: usize,
    pub p_value: f64,
    pub stars: &'static str,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationMatrix {
    pub names: Vec<String>,
    /// Lower triangle including the diagonal: `cells[i][j]` for `j <= i`.
    pub cells: Vec<Vec<Option<CorrelationCell>>>,
}

/// Pairwise-complete Pearson correlations; pairs with fewer than three common
/// periods or zero variance are absent.
pub fn correlation_matrix(
    series: &[(String, BTreeMap<Ordinal, f64>)],
    levels: &StarLevels,
) -> CorrelationMatrix {
    let cells = series
        .iter()
        .enumerate()
        .map(|(i, (_, a))| {
            series[..=i]
                .iter()
                .map(|(_, b)| {
                    let (x, y): (Vec<f64>, Vec<f64>) = a
                        .iter()
                        .filter_map(|(p, v)| b.get(p).map(|w| (*v, *w)))
                        .unzip();
                    if x.len() < 3 {
                        return None;
                    }
                    let rho = pearson(&x, &y)?;
                    let p_value = correlation_p_value(rho, x.len());
                    Some(CorrelationCell {
                        rho,
                        n: x.len(),
                        p_value,
                        stars: levels.stars(p_value),
                    })
                })
                .collect()
        })
        .collect();
    CorrelationMatrix {
        names: series.iter().map(|s| s.0.clone()).collect(),
        cells,
    }
}
