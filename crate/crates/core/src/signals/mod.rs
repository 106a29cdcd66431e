//! Firm-level sorting characteristics.
//!
//! Timing convention: a signal stored at period `t` uses only information
//! dated strictly before `t`, and is meant to sort firms on their return at
//! `t`. Window signals (`mom-j-k`, `cmom-j-k`) are defined directly that way.
//! Point-in-time quantities (SUE, CAR3, NAV, log ME, ...) are first computed as
//! *states* known at the end of a period and then shifted forward one period
//! with [`SignalPanel::lagged`].

mod attention;
mod build;
mod earnings;

pub use attention::{compute_nav, nav_states, NavStates, NAV_BASELINE_END, NAV_BASELINE_START};
pub use build::{
    aggregate_states, customer_momentum_signal, momentum_signal, standard_characteristics,
};
pub use earnings::{
    compute_car3, compute_sue, earnings_states, yoy_changes, EarningsDiagnostics,
};

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::panel::{FirmId, PeriodValue, ReturnPanel};
use crate::period::{Ordinal, Timeline};
use crate::quantile::quantile_sorted_f64;

pub const SUE: &str = "sue";
pub const CAR3: &str = "car3";
pub const NAV: &str = "nav";
pub const LOG_ME: &str = "log_me";
pub const LOG_BM: &str = "log_bm";
pub const OP: &str = "op";
pub const REL_SIZE: &str = "rel_size";
pub const CUST_SUE: &str = "cust_sue";
pub const CUST_CAR3: &str = "cust_car3";

pub fn mom_name(w: LagWindow) -> String {
    format!("mom-{w}")
}

pub fn cmom_name(w: LagWindow) -> String {
    format!("cmom-{w}")
}

/// Why a signal value is absent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Absent {
    MissingData,
    DegenerateDispersion,
    InsufficientAnnouncements,
    OutsideCalendar,
    InsufficientBaseline,
    NonPositive,
}

impl fmt::Display for Absent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Absent::MissingData => "missing data",
            Absent::DegenerateDispersion => "degenerate dispersion",
            Absent::InsufficientAnnouncements => "insufficient announcements",
            Absent::OutsideCalendar => "outside calendar",
            Absent::InsufficientBaseline => "insufficient baseline",
            Absent::NonPositive => "non-positive input",
        })
    }
}

pub type SignalValue = std::result::Result<f64, Absent>;

/// Return window `j-k`: periods `t-j` through `t-k` inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LagWindow {
    start: u32,
    end: u32,
}

impl LagWindow {
    pub fn new(start: u32, end: u32) -> Result<Self> {
        if end < 1 || start < end {
            return Err(Error::Invalid(format!(
                "lag window {start}-{end} must satisfy j >= k >= 1"
            )));
        }
        Ok(Self { start, end })
    }

    pub fn start(self) -> u32 {
        self.start
    }

    pub fn end(self) -> u32 {
        self.end
    }

    #[allow(clippy::len_without_is_empty)]
    pub fn len(self) -> u32 {
        self.start - self.end + 1
    }
}

impl fmt::Display for LagWindow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.start, self.end)
    }
}

impl FromStr for LagWindow {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (j, k) = s
            .trim()
            .split_once('-')
            .ok_or_else(|| Error::Invalid(format!("lag window `{s}` is not of the form j-k")))?;
        let parse = |x: &str| {
            x.trim()
                .parse::<u32>()
                .map_err(|_| Error::Invalid(format!("lag window `{s}` is not of the form j-k")))
        };
        LagWindow::new(parse(j)?, parse(k)?)
    }
}

impl Serialize for LagWindow {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

/// Compounded return `prod(1 + r_s) - 1` over `s` in `[t-j, t-k]`.
///
/// `series` must be ordered by period with unique periods. Any missing period
/// inside the window makes the result absent.
pub fn window_return<T: PeriodValue>(series: &[T], t: Ordinal, w: LagWindow) -> Option<f64> {
    let first = t - w.start as Ordinal;
    let last = t - w.end as Ordinal;
    let i = series.binary_search_by_key(&first, PeriodValue::period).ok()?;
    let window = series.get(i..i + w.len() as usize)?;
    if window.last()?.period() != last {
        return None;
    }
    Some(window.iter().fold(0.0, |acc, x| acc + x.value() + acc * x.value()))
}

/// Firm × period × name signal values for one panel's firm universe.
///
/// Values are finite; each (firm, period, name) holds at most one value.
#[derive(Debug, Clone)]
pub struct SignalPanel {
    timeline: Timeline,
    firms: Arc<[String]>,
    values: BTreeMap<String, BTreeMap<Ordinal, Vec<(FirmId, f64)>>>,
}

impl SignalPanel {
    pub fn new(panel: &ReturnPanel) -> Self {
        Self::with_universe(panel.timeline().clone(), panel.firms().clone())
    }

    pub fn with_universe(timeline: Timeline, firms: Arc<[String]>) -> Self {
        Self {
            timeline,
            firms,
            values: BTreeMap::new(),
        }
    }

    pub fn timeline(&self) -> &Timeline {
        &self.timeline
    }

    pub fn firms(&self) -> &Arc<[String]> {
        &self.firms
    }

    /// Inserts or replaces a value. Non-finite values are rejected.
    pub fn insert(&mut self, name: &str, firm: FirmId, period: Ordinal, value: f64) -> Result<()> {
        if !value.is_finite() {
            return Err(Error::Invalid(format!(
                "non-finite value for signal {name}, firm {}",
                self.firms.get(firm.index()).map(String::as_str).unwrap_or("?")
            )));
        }
        let xs = self
            .values
            .entry(name.to_owned())
            .or_default()
            .entry(period)
            .or_default();
        match xs.binary_search_by_key(&firm, |e| e.0) {
            Ok(i) => xs[i].1 = value,
            Err(i) => xs.insert(i, (firm, value)),
        }
        Ok(())
    }

    pub fn get(&self, name: &str, firm: FirmId, period: Ordinal) -> Option<f64> {
        let xs = self.values.get(name)?.get(&period)?;
        xs.binary_search_by_key(&firm, |e| e.0)
            .ok()
            .map(|i| xs[i].1)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.values.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.values.keys().map(String::as_str)
    }

    /// Firm-ordered cross-section of one signal at one period.
    pub fn cross_section(&self, name: &str, period: Ordinal) -> &[(FirmId, f64)] {
        self.values
            .get(name)
            .and_then(|m| m.get(&period))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// Periods at which `name` has at least one value.
    pub fn periods(&self, name: &str) -> Vec<Ordinal> {
        self.values
            .get(name)
            .map(|m| m.keys().copied().collect())
            .unwrap_or_default()
    }

    /// All values of one signal, across periods.
    pub fn values_of(&self, name: &str) -> Vec<f64> {
        self.values
            .get(name)
            .map(|m| m.values().flatten().map(|e| e.1).collect())
            .unwrap_or_default()
    }

    pub fn len(&self) -> usize {
        self.values
            .values()
            .flat_map(|m| m.values())
            .map(Vec::len)
            .sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Merges `other` into `self`; both must share firm universe and calendar.
    pub fn extend(&mut self, other: SignalPanel) -> Result<()> {
        if self.firms != other.firms || self.timeline != other.timeline {
            return Err(Error::Invalid(
                "cannot merge signal panels over different universes".into(),
            ));
        }
        for (name, periods) in other.values {
            let target = self.values.entry(name).or_default();
            for (period, xs) in periods {
                target.insert(period, xs);
            }
        }
        Ok(())
    }

    /// Copy with every period shifted forward by `offset` ordinals, turning
    /// end-of-period states into next-period sorting signals.
    pub fn lagged(&self, offset: Ordinal) -> SignalPanel {
        let values = self
            .values
            .iter()
            .map(|(name, periods)| {
                let shifted = periods
                    .iter()
                    .map(|(p, xs)| (p + offset, xs.clone()))
                    .collect();
                (name.clone(), shifted)
            })
            .collect();
        SignalPanel {
            timeline: self.timeline.clone(),
            firms: self.firms.clone(),
            values,
        }
    }

    /// Copy containing only the named signals.
    pub fn select(&self, names: &[&str]) -> SignalPanel {
        SignalPanel {
            timeline: self.timeline.clone(),
            firms: self.firms.clone(),
            values: self
                .values
                .iter()
                .filter(|(n, _)| names.contains(&n.as_str()))
                .map(|(n, v)| (n.clone(), v.clone()))
                .collect(),
        }
    }

    /// Clips `name` cross-sectionally at the `p` and `1 - p` quantiles.
    pub fn winsorize(&mut self, name: &str, p: f64) -> Result<()> {
        if !(0.0..0.5).contains(&p) {
            return Err(Error::Invalid(format!("winsor level {p} outside [0, 0.5)")));
        }
        if let Some(periods) = self.values.get_mut(name) {
            for xs in periods.values_mut() {
                let mut sorted: Vec<f64> = xs.iter().map(|e| e.1).collect();
                sorted.sort_by(f64::total_cmp);
                let lo = quantile_sorted_f64(&sorted, p);
                let hi = quantile_sorted_f64(&sorted, 1.0 - p);
                for e in xs.iter_mut() {
                    e.1 = e.1.clamp(lo, hi);
                }
            }
        }
        Ok(())
    }

    /// Emits `signals.csv` ordered by (firm_id, period, signal_name).
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut rows: Vec<(FirmId, Ordinal, &str, f64)> = Vec::with_capacity(self.len());
        for (name, periods) in &self.values {
            for (p, xs) in periods {
                rows.extend(xs.iter().map(|(f, v)| (*f, *p, name.as_str(), *v)));
            }
        }
        rows.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(b.2)));
        let mut w = csv::Writer::from_writer(out);
        let err = |e| Error::csv("signals.csv", e);
        w.write_record(["firm_id", "date", "signal_name", "value"])
            .map_err(err)?;
        for (f, p, name, v) in rows {
            w.write_record([
                self.firms[f.index()].as_str(),
                &self.timeline.label(p),
                name,
                &v.to_string(),
            ])
            .map_err(err)?;
        }
        w.flush().map_err(|e| Error::io("signals.csv", e))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn series(rets: &[f64]) -> Vec<(Ordinal, f64)> {
        rets.iter().enumerate().map(|(i, r)| (i as Ordinal, *r)).collect()
    }

    #[test]
    fn lag_window_validation_and_parsing() {
        assert!(LagWindow::new(1, 1).is_ok());
        assert!(LagWindow::new(1, 2).is_err());
        assert!(LagWindow::new(3, 0).is_err());
        let w: LagWindow = "12-2".parse().unwrap();
        assert_eq!((w.start(), w.end(), w.len()), (12, 2, 11));
        assert_eq!(w.to_string(), "12-2");
        assert!("12".parse::<LagWindow>().is_err());
    }

    #[test]
    fn single_period_window() {
        let s = series(&[0.5, 0.03, 0.9]);
        assert_eq!(window_return(&s, 2, LagWindow::new(1, 1).unwrap()), Some(0.03));
    }

    #[test]
    fn two_period_window_compounds() {
        let s = series(&[0.10, 0.10, 0.0]);
        let r = window_return(&s, 2, LagWindow::new(2, 1).unwrap()).unwrap();
        assert!((r - 0.21).abs() < 1e-15);
    }

    #[test]
    fn twelve_two_uses_eleven_returns_and_skips_last_month() {
        // returns 0.01 in months 0..=10, a huge month 11, predicted month 12
        let mut rets = vec![0.01; 11];
        rets.push(5.0);
        let s = series(&rets);
        let r = window_return(&s, 12, LagWindow::new(12, 2).unwrap()).unwrap();
        assert!((r - (1.01f64.powi(11) - 1.0)).abs() < 1e-14);
    }

    #[test]
    fn gap_in_window_is_absent() {
        let s = vec![(0, 0.1), (2, 0.1)];
        assert_eq!(window_return(&s, 3, LagWindow::new(3, 1).unwrap()), None);
        assert_eq!(window_return(&s, 1, LagWindow::new(1, 1).unwrap()), Some(0.1));
        assert_eq!(window_return(&s, 10, LagWindow::new(1, 1).unwrap()), None);
    }

    proptest! {
        #[test]
        fn split_windows_compound_to_the_union(
            rets in prop::collection::vec(-0.5f64..0.5, 30),
            t in 20i32..30, k in 1u32..5, mid in 1u32..10, extra in 1u32..8,
        ) {
            let s = series(&rets);
            let m = k + mid;            // first window j..m, second m-1..k
            let j = m + extra - 1;
            prop_assume!(j as i32 <= t);
            let whole = window_return(&s, t, LagWindow::new(j, k).unwrap()).unwrap();
            let a = window_return(&s, t, LagWindow::new(j, m).unwrap()).unwrap();
            let b = window_return(&s, t, LagWindow::new(m - 1, k).unwrap()).unwrap();
            prop_assert!(((1.0 + a) * (1.0 + b) - 1.0 - whole).abs() < 1e-12);
        }
    }

    #[test]
    fn lagged_shifts_and_winsor_clips() {
        let panel = ReturnPanel::from_records(
            Timeline::Monthly,
            (0..5)
                .map(|i| crate::panel::ReturnRecord {
                    firm: format!("F{i}"),
                    period: 0,
                    ret: 0.0,
                    me: None,
                    volume: None,
                    exchange: None,
                })
                .collect(),
        )
        .unwrap();
        let mut s = SignalPanel::new(&panel);
        for i in 0..5 {
            s.insert("x", FirmId(i), 0, f64::from(i)).unwrap();
        }
        assert!(s.insert("x", FirmId(0), 0, f64::NAN).is_err());
        let l = s.lagged(1);
        assert_eq!(l.get("x", FirmId(3), 1), Some(3.0));
        assert_eq!(l.get("x", FirmId(3), 0), None);
        s.winsorize("x", 0.25).unwrap();
        assert_eq!(s.get("x", FirmId(0), 0), Some(1.0));
        assert_eq!(s.get("x", FirmId(4), 0), Some(3.0));
        assert_eq!(s.get("x", FirmId(2), 0), Some(2.0));
    }
}
