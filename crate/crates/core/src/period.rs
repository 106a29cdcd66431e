//! Period arithmetic for monthly and trading-day panels.
//!
//! Every panel addresses time through an integer ordinal. Monthly ordinals are
//! `year * 12 + (month - 1)`, so ordinal arithmetic is calendar-month
//! arithmetic. Daily ordinals index into an explicit [`TradingCalendar`] and
//! therefore only ever enumerate trading days.

use std::fmt;
use std::sync::Arc;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Integer position of a period within its timeline.
pub type Ordinal = i32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Frequency {
    Monthly,
    Daily,
}

impl Frequency {
    /// Periods per year, used to annualize Sharpe ratios.
    pub fn periods_per_year(self) -> f64 {
        match self {
            Frequency::Monthly => 12.0,
            Frequency::Daily => 252.0,
        }
    }
}

impl fmt::Display for Frequency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Frequency::Monthly => f.write_str("monthly"),
            Frequency::Daily => f.write_str("daily"),
        }
    }
}

impl std::str::FromStr for Frequency {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "monthly" | "m" => Ok(Frequency::Monthly),
            "daily" | "d" => Ok(Frequency::Daily),
            other => Err(Error::Invalid(format!("unknown frequency `{other}`"))),
        }
    }
}

/// A calendar month, stored as `year * 12 + (month - 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Month(pub i32);

impl Month {
    pub fn new(year: i32, month: u32) -> Option<Self> {
        (1..=12)
            .contains(&month)
            .then(|| Month(year * 12 + month as i32 - 1))
    }

    pub fn from_date(date: NaiveDate) -> Self {
        Month(date.year() * 12 + date.month0() as i32)
    }

    pub fn year(self) -> i32 {
        self.0.div_euclid(12)
    }

    pub fn month(self) -> u32 {
        self.0.rem_euclid(12) as u32 + 1
    }

    pub fn plus(self, months: i32) -> Self {
        Month(self.0 + months)
    }

    pub fn first_day(self) -> NaiveDate {
        NaiveDate::from_ymd_opt(self.year(), self.month(), 1).expect("valid month")
    }

    /// Accepts `YYYY-MM`, `YYYY-MM-DD` and `YYYYMMDD`.
    pub fn parse(s: &str) -> Option<Self> {
        let s = s.trim();
        if let Some(date) = parse_date(s) {
            return Some(Month::from_date(date));
        }
        let (y, m) = s.split_once('-')?;
        if y.len() != 4 || m.len() != 2 {
            return None;
        }
        Month::new(y.parse().ok()?, m.parse().ok()?)
    }
}

impl fmt::Display for Month {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year(), self.month())
    }
}

/// Parses `YYYY-MM-DD` or `YYYYMMDD`.
pub fn parse_date(s: &str) -> Option<NaiveDate> {
    let s = s.trim();
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .or_else(|_| NaiveDate::parse_from_str(s, "%Y%m%d"))
        .ok()
}

/// Ordered list of trading days. Ordinal `i` is the `i`-th trading day.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TradingCalendar {
    dates: Vec<NaiveDate>,
}

impl TradingCalendar {
    pub fn new(dates: Vec<NaiveDate>) -> Result<Self> {
        if let Some(w) = dates.windows(2).find(|w| w[0] >= w[1]) {
            return Err(Error::Invalid(format!(
                "trading calendar must be strictly increasing ({} then {})",
                w[0], w[1]
            )));
        }
        Ok(Self { dates })
    }

    /// Monday-to-Friday calendar between two dates inclusive.
    pub fn weekdays(from: NaiveDate, to: NaiveDate) -> Self {
        let dates = from
            .iter_days()
            .take_while(|d| *d <= to)
            .filter(|d| d.weekday().num_days_from_monday() < 5)
            .collect();
        Self { dates }
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn ordinal_of(&self, date: NaiveDate) -> Option<Ordinal> {
        self.dates.binary_search(&date).ok().map(|i| i as Ordinal)
    }

    pub fn date_of(&self, ordinal: Ordinal) -> Option<NaiveDate> {
        usize::try_from(ordinal)
            .ok()
            .and_then(|i| self.dates.get(i).copied())
    }

    /// First trading day on or after `date`; `None` past the calendar's end.
    pub fn roll_forward(&self, date: NaiveDate) -> Option<Ordinal> {
        let i = self.dates.partition_point(|d| *d < date);
        (i < self.dates.len()).then_some(i as Ordinal)
    }
}

/// Maps ordinals to calendar labels and months for one panel frequency.
#[derive(Debug, Clone)]
pub enum Timeline {
    Monthly,
    Daily(Arc<TradingCalendar>),
}

impl PartialEq for Timeline {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Timeline::Monthly, Timeline::Monthly) => true,
            (Timeline::Daily(a), Timeline::Daily(b)) => Arc::ptr_eq(a, b) || a == b,
            _ => false,
        }
    }
}

impl Timeline {
    pub fn frequency(&self) -> Frequency {
        match self {
            Timeline::Monthly => Frequency::Monthly,
            Timeline::Daily(_) => Frequency::Daily,
        }
    }

    pub fn calendar(&self) -> Option<&Arc<TradingCalendar>> {
        match self {
            Timeline::Monthly => None,
            Timeline::Daily(c) => Some(c),
        }
    }

    /// Resolves a date string to an ordinal. Daily timelines require an exact
    /// trading day.
    pub fn parse(&self, s: &str) -> Option<Ordinal> {
        match self {
            Timeline::Monthly => Month::parse(s).map(|m| m.0),
            Timeline::Daily(cal) => parse_date(s).and_then(|d| cal.ordinal_of(d)),
        }
    }

    pub fn label(&self, ordinal: Ordinal) -> String {
        match self {
            Timeline::Monthly => Month(ordinal).to_string(),
            Timeline::Daily(cal) => cal
                .date_of(ordinal)
                .map(|d| d.format("%Y-%m-%d").to_string())
                .unwrap_or_else(|| format!("#{ordinal}")),
        }
    }

    pub fn month_of(&self, ordinal: Ordinal) -> Option<Month> {
        match self {
            Timeline::Monthly => Some(Month(ordinal)),
            Timeline::Daily(cal) => cal.date_of(ordinal).map(Month::from_date),
        }
    }

    pub fn index(&self, ordinal: Ordinal) -> PeriodIndex {
        PeriodIndex {
            frequency: self.frequency(),
            ordinal,
            label: self.label(ordinal),
        }
    }
}

/// A resolved period: ordinal plus its calendar label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PeriodIndex {
    pub frequency: Frequency,
    pub ordinal: Ordinal,
    pub label: String,
}
