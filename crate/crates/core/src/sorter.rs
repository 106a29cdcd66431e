//! Quantile portfolio sorts: breakpoints, bucket returns, long-short legs and
//! conditional double sorts.
//!
//! A signal stamped `t` is formed at the end of `t - 1`. Its portfolios earn
//! the compounded return over `horizon` periods starting at `t + holding_lag`;
//! value weights and exchange tags are read at `t - 1`.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::links::CustomerAggregate;
use crate::panel::{Exchange, FirmId, ReturnPanel};
use crate::period::{Ordinal, Timeline};
use crate::quantile::{quantile_sorted, sorted_copy};
use crate::signals::SignalPanel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BreakpointUniverse {
    FullSample,
    NyseOnly,
    PooledAllPeriods,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BreakpointSpec {
    n_buckets: usize,
    universe: BreakpointUniverse,
    per_period: bool,
}

impl BreakpointSpec {
    pub fn new(n_buckets: usize, universe: BreakpointUniverse, per_period: bool) -> Result<Self> {
        if ![2, 3, 5, 10].contains(&n_buckets) {
            return Err(Error::Invalid(format!(
                "bucket count {n_buckets} not in {{2, 3, 5, 10}}"
            )));
        }
        if universe == BreakpointUniverse::PooledAllPeriods && per_period {
            return Err(Error::Invalid(
                "pooled breakpoints cannot be recomputed per period".into(),
            ));
        }
        Ok(Self {
            n_buckets,
            universe,
            per_period,
        })
    }

    /// Whole-sample breakpoints, the default for customer-momentum sorts.
    pub fn pooled(n_buckets: usize) -> Result<Self> {
        Self::new(n_buckets, BreakpointUniverse::PooledAllPeriods, false)
    }

    pub fn per_period(n_buckets: usize) -> Result<Self> {
        Self::new(n_buckets, BreakpointUniverse::FullSample, true)
    }

    pub fn n_buckets(&self) -> usize {
        self.n_buckets
    }

    pub fn universe(&self) -> BreakpointUniverse {
        self.universe
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum Weighting {
    #[default]
    #[serde(rename = "ew")]
    Equal,
    #[serde(rename = "vw")]
    Value,
}

impl Weighting {
    pub fn as_str(self) -> &'static str {
        match self {
            Weighting::Equal => "ew",
            Weighting::Value => "vw",
        }
    }
}

impl fmt::Display for Weighting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Weighting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ew" | "equal" => Ok(Weighting::Equal),
            "vw" | "value" => Ok(Weighting::Value),
            other => Err(Error::Invalid(format!("unknown weighting `{other}`"))),
        }
    }
}

/// Thresholds at the `i/n` quantiles (`i = 1..n-1`) of `values`.
pub fn compute_breakpoints(values: &[f64], n_buckets: usize) -> Result<Vec<f64>> {
    let sorted = sorted_copy(values);
    let distinct = 1 + sorted.windows(2).filter(|w| w[0] != w[1]).count();
    if sorted.is_empty() || distinct < n_buckets {
        return Err(Error::DegenerateBreakpoints(format!(
            "{distinct} distinct values for {n_buckets} buckets"
        )));
    }
    Ok(thresholds_of_sorted(&sorted, n_buckets))
}

fn thresholds_of_sorted(sorted: &[f64], n_buckets: usize) -> Vec<f64> {
    (1..n_buckets)
        .map(|i| quantile_sorted(sorted, i, n_buckets))
        .collect()
}

/// 1-based bucket: one plus the number of thresholds strictly below `v`, so a
/// value equal to a threshold falls in the lower bucket.
pub fn assign_bucket(thresholds: &[f64], v: f64) -> usize {
    1 + thresholds.partition_point(|t| *t < v)
}

/// Market-equity weights normalized to sum to one.
pub fn value_weights(me: &[f64]) -> Vec<f64> {
    let total: f64 = me.iter().sum();
    me.iter().map(|m| m / total).collect()
}

/// Firm-stamp pairs allowed into a sort.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FirmPeriodMask(HashSet<(FirmId, Ordinal)>);

impl FirmPeriodMask {
    pub fn contains(&self, firm: FirmId, stamp: Ordinal) -> bool {
        self.0.contains(&(firm, stamp))
    }

    pub fn insert(&mut self, firm: FirmId, stamp: Ordinal) {
        self.0.insert((firm, stamp));
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Supplier-stamps whose relative customer size at formation is at most
/// `max_rel_size`. An aggregate at period `p` admits the sort stamped `p + 1`.
pub fn restrict_by_ratio(aggregates: &[CustomerAggregate], max_rel_size: f64) -> FirmPeriodMask {
    let mut mask = FirmPeriodMask::default();
    for a in aggregates {
        if a.rel_size.is_some_and(|r| r <= max_rel_size) {
            mask.insert(a.supplier, a.period + 1);
        }
    }
    mask
}

#[derive(Debug, Clone, Copy)]
pub struct SortOptions<'a> {
    pub spec: BreakpointSpec,
    pub weighting: Weighting,
    pub holding_lag: u32,
    /// Number of periods compounded into each bucket return (at least 1).
    pub horizon: u32,
    pub mask: Option<&'a FirmPeriodMask>,
}

impl<'a> SortOptions<'a> {
    pub fn new(spec: BreakpointSpec, weighting: Weighting) -> Self {
        Self {
            spec,
            weighting,
            holding_lag: 0,
            horizon: 1,
            mask: None,
        }
    }

    pub fn with_mask(mut self, mask: &'a FirmPeriodMask) -> Self {
        self.mask = Some(mask);
        self
    }

    pub fn with_horizon(mut self, horizon: u32) -> Self {
        self.horizon = horizon;
        self
    }
}

/// One period of a portfolio series, labeled by the first return period.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PortfolioPeriod {
    pub period: Ordinal,
    pub returns: Vec<f64>,
    pub counts: Vec<usize>,
    pub long_short: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PortfolioSeries {
    pub signal_name: String,
    pub weighting: Weighting,
    pub n_buckets: usize,
    #[serde(skip)]
    pub timeline: Timeline,
    pub periods: Vec<PortfolioPeriod>,
}

impl PortfolioSeries {
    pub fn long_short(&self) -> Vec<(Ordinal, f64)> {
        self.periods.iter().map(|p| (p.period, p.long_short)).collect()
    }

    /// Returns of 1-based bucket `b`.
    pub fn bucket(&self, b: usize) -> Vec<(Ordinal, f64)> {
        self.periods
            .iter()
            .map(|p| (p.period, p.returns[b - 1]))
            .collect()
    }

    pub fn between(&self, from: Ordinal, to: Ordinal) -> PortfolioSeries {
        PortfolioSeries {
            periods: self
                .periods
                .iter()
                .filter(|p| p.period >= from && p.period <= to)
                .cloned()
                .collect(),
            ..self.clone()
        }
    }

    /// Appends rows to a `portfolios.csv` writer; `LS` rows carry the
    /// long-short leg with the summed extreme-bucket counts.
    pub fn write_rows<W: Write>(&self, w: &mut csv::Writer<W>) -> Result<()> {
        let err = |e| Error::csv("portfolios.csv", e);
        for p in &self.periods {
            let date = self.timeline.label(p.period);
            for (i, (r, c)) in p.returns.iter().zip(&p.counts).enumerate() {
                w.write_record([
                    date.as_str(),
                    &(i + 1).to_string(),
                    &r.to_string(),
                    &c.to_string(),
                    self.weighting.as_str(),
                    &self.signal_name,
                ])
                .map_err(err)?;
            }
            let ls_count = p.counts[0] + p.counts[self.n_buckets - 1];
            w.write_record([
                date.as_str(),
                "LS",
                &p.long_short.to_string(),
                &ls_count.to_string(),
                self.weighting.as_str(),
                &self.signal_name,
            ])
            .map_err(err)?;
        }
        Ok(())
    }
}

pub const PORTFOLIO_HEADER: [&str; 6] = ["date", "bucket", "ret", "count", "weighting", "signal_name"];

struct Candidate {
    signal: f64,
    ret: f64,
    weight_me: Option<f64>,
    nyse: bool,
}

fn candidates(
    panel: &ReturnPanel,
    signals: &SignalPanel,
    name: &str,
    stamp: Ordinal,
    opts: &SortOptions,
) -> Vec<Candidate> {
    let start = stamp + opts.holding_lag as Ordinal;
    let end = start + opts.horizon as Ordinal - 1;
    signals
        .cross_section(name, stamp)
        .iter()
        .filter(|(f, _)| opts.mask.is_none_or(|m| m.contains(*f, stamp)))
        .filter_map(|&(firm, signal)| {
            let ret = if opts.horizon == 1 {
                panel.get(firm, start)?.ret
            } else {
                panel.compound(firm, start, end)?
            };
            let formation = panel.get(firm, stamp - 1);
            let weight_me = formation.and_then(|o| o.me).filter(|m| *m > 0.0);
            let exchange = formation
                .and_then(|o| o.exchange)
                .or_else(|| panel.get(firm, stamp).and_then(|o| o.exchange));
            Some(Candidate {
                signal,
                ret,
                weight_me,
                nyse: exchange == Some(Exchange::Nyse),
            })
        })
        .collect()
}

fn breakpoint_values<'c>(cands: &'c [Candidate], universe: BreakpointUniverse) -> impl Iterator<Item = f64> + 'c {
    cands
        .iter()
        .filter(move |c| universe != BreakpointUniverse::NyseOnly || c.nyse)
        .map(|c| c.signal)
}

fn bucket_period(
    period: Ordinal,
    cands: &[Candidate],
    thresholds: &[f64],
    n: usize,
    weighting: Weighting,
) -> Option<PortfolioPeriod> {
    if cands.len() < n {
        return None;
    }
    let mut members: Vec<Vec<&Candidate>> = vec![Vec::new(); n];
    for c in cands {
        if weighting == Weighting::Value && c.weight_me.is_none() {
            continue;
        }
        members[assign_bucket(thresholds, c.signal) - 1].push(c);
    }
    let mut returns = Vec::with_capacity(n);
    let mut counts = Vec::with_capacity(n);
    for m in &members {
        if m.is_empty() {
            return None;
        }
        let r = match weighting {
            Weighting::Equal => m.iter().map(|c| c.ret).sum::<f64>() / m.len() as f64,
            Weighting::Value => {
                let me: Vec<f64> = m.iter().map(|c| c.weight_me.unwrap()).collect();
                value_weights(&me)
                    .iter()
                    .zip(m)
                    .map(|(w, c)| w * c.ret)
                    .sum()
            }
        };
        returns.push(r);
        counts.push(m.len());
    }
    Some(PortfolioPeriod {
        period,
        long_short: returns[n - 1] - returns[0],
        returns,
        counts,
    })
}

/// Quantile portfolios on `signal_name`. Periods where any bucket is empty,
/// or per-period breakpoints are degenerate, are omitted.
pub fn form_portfolios(
    panel: &ReturnPanel,
    signals: &SignalPanel,
    signal_name: &str,
    opts: SortOptions,
) -> Result<PortfolioSeries> {
    if opts.horizon == 0 {
        return Err(Error::Invalid("holding horizon must be at least 1".into()));
    }
    let n = opts.spec.n_buckets;
    let stamps = signals.periods(signal_name);
    let cross_sections: Vec<(Ordinal, Vec<Candidate>)> = stamps
        .par_iter()
        .map(|&t| (t, candidates(panel, signals, signal_name, t, &opts)))
        .collect();

    let pooled = if opts.spec.per_period {
        None
    } else {
        let all: Vec<f64> = cross_sections
            .iter()
            .flat_map(|(_, c)| breakpoint_values(c, opts.spec.universe))
            .collect();
        Some(compute_breakpoints(&all, n).map_err(|e| match e {
            Error::DegenerateBreakpoints(m) => {
                Error::DegenerateBreakpoints(format!("{signal_name}: {m}"))
            }
            other => other,
        })?)
    };

    let periods: Vec<PortfolioPeriod> = cross_sections
        .par_iter()
        .filter_map(|(t, cands)| {
            let period = t + opts.holding_lag as Ordinal;
            let owned;
            let thresholds = match &pooled {
                Some(th) => th,
                None => {
                    let vals: Vec<f64> = breakpoint_values(cands, opts.spec.universe).collect();
                    owned = compute_breakpoints(&vals, n).ok()?;
                    &owned
                }
            };
            bucket_period(period, cands, thresholds, n, opts.weighting)
        })
        .collect();

    Ok(PortfolioSeries {
        signal_name: signal_name.to_owned(),
        weighting: opts.weighting,
        n_buckets: n,
        timeline: panel.timeline().clone(),
        periods,
    })
}

/// Output of a conditional double sort.
#[derive(Debug, Clone)]
pub struct DoubleSort {
    pub outer_signal: String,
    pub inner_signal: String,
    /// Inner-sort series within each outer bucket, lowest outer bucket first.
    pub by_outer: Vec<PortfolioSeries>,
}

impl DoubleSort {
    /// Long-short of the lowest outer bucket minus that of the highest, on
    /// periods where both exist.
    pub fn low_minus_high(&self) -> Vec<(Ordinal, f64)> {
        let (Some(lo), Some(hi)) = (self.by_outer.first(), self.by_outer.last()) else {
            return Vec::new();
        };
        let hi: BTreeMap<Ordinal, f64> = hi.long_short().into_iter().collect();
        lo.long_short()
            .into_iter()
            .filter_map(|(p, v)| hi.get(&p).map(|h| (p, v - h)))
            .collect()
    }
}

/// Outer buckets are formed each stamp from per-period quantiles of the
/// outer signal (ties to the lower bucket, no distinctness requirement); the
/// inner sort then runs within each outer bucket with `inner` options.
pub fn conditional_double_sort(
    panel: &ReturnPanel,
    signals: &SignalPanel,
    outer_signal: &str,
    n_outer: usize,
    inner_signal: &str,
    inner: SortOptions,
) -> Result<DoubleSort> {
    if n_outer < 2 {
        return Err(Error::Invalid("double sort needs at least two outer buckets".into()));
    }
    let mut masks = vec![FirmPeriodMask::default(); n_outer];
    for t in signals.periods(inner_signal) {
        let joint: Vec<(FirmId, f64)> = signals
            .cross_section(outer_signal, t)
            .iter()
            .filter(|(f, _)| signals.get(inner_signal, *f, t).is_some())
            .filter(|(f, _)| inner.mask.is_none_or(|m| m.contains(*f, t)))
            .copied()
            .collect();
        if joint.is_empty() {
            continue;
        }
        let sorted = sorted_copy(&joint.iter().map(|e| e.1).collect::<Vec<_>>());
        let thresholds = thresholds_of_sorted(&sorted, n_outer);
        for (f, v) in joint {
            masks[assign_bucket(&thresholds, v) - 1].insert(f, t);
        }
    }
    let by_outer = masks
        .iter()
        .map(|m| {
            if m.is_empty() {
                return Ok(PortfolioSeries {
                    signal_name: inner_signal.to_owned(),
                    weighting: inner.weighting,
                    n_buckets: inner.spec.n_buckets,
                    timeline: panel.timeline().clone(),
                    periods: Vec::new(),
                });
            }
            form_portfolios(panel, signals, inner_signal, SortOptions { mask: Some(m), ..inner })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DoubleSort {
        outer_signal: outer_signal.to_owned(),
        inner_signal: inner_signal.to_owned(),
        by_outer,
    })
}
