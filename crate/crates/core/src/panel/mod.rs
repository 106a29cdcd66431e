//! Panel storage: firm × period observations, link tables, announcements and
//! market series, plus subsetting and sample-coverage diagnostics.

mod ingest;

pub use ingest::{
    ingest_returns, read_announcements, read_calendar, read_characteristics, read_links,
    read_market, read_returns, write_returns, DuplicatePolicy, IngestOptions, IngestReport,
    LinksFile, Rejection, SchemaMap,
};

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::ops::Range;
use std::sync::Arc;

use chrono::NaiveDate;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::period::{Frequency, Month, Ordinal, Timeline};

/// Index of a firm in its panel's sorted firm table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct FirmId(pub u32);

impl FirmId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Exchange {
    Nyse,
    Other,
}

impl Exchange {
    pub fn parse(s: &str) -> Option<Self> {
        match s.trim() {
            "" => None,
            t if t.eq_ignore_ascii_case("nyse") || t == "1" || t.eq_ignore_ascii_case("n") => {
                Some(Exchange::Nyse)
            }
            _ => Some(Exchange::Other),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Exchange::Nyse => "NYSE",
            Exchange::Other => "Other",
        }
    }
}

/// One input row prior to interning.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnRecord {
    pub firm: String,
    pub period: Ordinal,
    pub ret: f64,
    pub me: Option<f64>,
    pub volume: Option<f64>,
    pub exchange: Option<Exchange>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub firm: FirmId,
    pub period: Ordinal,
    pub ret: f64,
    pub me: Option<f64>,
    pub volume: Option<f64>,
    pub exchange: Option<Exchange>,
}

/// Anything addressable by period with a single numeric value.
pub trait PeriodValue {
    fn period(&self) -> Ordinal;
    fn value(&self) -> f64;
}

impl PeriodValue for Observation {
    fn period(&self) -> Ordinal {
        self.period
    }
    fn value(&self) -> f64 {
        self.ret
    }
}

impl PeriodValue for (Ordinal, f64) {
    fn period(&self) -> Ordinal {
        self.0
    }
    fn value(&self) -> f64 {
        self.1
    }
}

/// Immutable firm × period return panel with a single frequency.
#[derive(Debug, Clone)]
pub struct ReturnPanel {
    timeline: Timeline,
    firms: Arc<[String]>,
    rows: Vec<Observation>,
    firm_ranges: Vec<Range<usize>>,
    by_period: BTreeMap<Ordinal, Vec<usize>>,
}

impl ReturnPanel {
    /// Builds a panel, enforcing the (firm, period) uniqueness and `ret > -1`
    /// invariants.
    pub fn from_records(timeline: Timeline, mut records: Vec<ReturnRecord>) -> Result<Self> {
        for r in &records {
            if !(r.ret > -1.0) || !r.ret.is_finite() {
                return Err(Error::Invalid(format!(
                    "return {} for firm {} is not above -100%",
                    r.ret, r.firm
                )));
            }
        }
        records.sort_by(|a, b| a.firm.cmp(&b.firm).then(a.period.cmp(&b.period)));
        if let Some(w) = records
            .windows(2)
            .find(|w| w[0].firm == w[1].firm && w[0].period == w[1].period)
        {
            return Err(Error::DuplicateObservation {
                path: "<records>".into(),
                firm: w[0].firm.clone(),
                period: timeline.label(w[0].period),
            });
        }
        let mut firms: Vec<String> = Vec::new();
        let mut rows = Vec::with_capacity(records.len());
        for r in records {
            if firms.last() != Some(&r.firm) {
                firms.push(r.firm.clone());
            }
            rows.push(Observation {
                firm: FirmId(firms.len() as u32 - 1),
                period: r.period,
                ret: r.ret,
                me: r.me,
                volume: r.volume,
                exchange: r.exchange,
            });
        }
        Ok(Self::assemble(timeline, firms.into(), rows))
    }

    fn assemble(timeline: Timeline, firms: Arc<[String]>, rows: Vec<Observation>) -> Self {
        let mut firm_ranges = vec![0..0; firms.len()];
        let mut by_period: BTreeMap<Ordinal, Vec<usize>> = BTreeMap::new();
        let mut start = 0;
        for i in 0..rows.len() {
            if i + 1 == rows.len() || rows[i + 1].firm != rows[i].firm {
                firm_ranges[rows[i].firm.index()] = start..i + 1;
                start = i + 1;
            }
            by_period.entry(rows[i].period).or_default().push(i);
        }
        Self {
            timeline,
            firms,
            rows,
            firm_ranges,
            by_period,
        }
    }

    pub fn timeline(&self) -> &Timeline {
        &self.timeline
    }

    pub fn frequency(&self) -> Frequency {
        self.timeline.frequency()
    }

    pub fn firms(&self) -> &Arc<[String]> {
        &self.firms
    }

    pub fn firm_name(&self, firm: FirmId) -> &str {
        &self.firms[firm.index()]
    }

    pub fn firm_id(&self, name: &str) -> Option<FirmId> {
        self.firms
            .binary_search_by(|f| f.as_str().cmp(name))
            .ok()
            .map(|i| FirmId(i as u32))
    }

    pub fn firm_ids(&self) -> impl Iterator<Item = FirmId> {
        (0..self.firms.len() as u32).map(FirmId)
    }

    pub fn rows(&self) -> &[Observation] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Observations of one firm, ordered by period.
    pub fn firm_rows(&self, firm: FirmId) -> &[Observation] {
        self.firm_ranges
            .get(firm.index())
            .map(|r| &self.rows[r.clone()])
            .unwrap_or(&[])
    }

    pub fn get(&self, firm: FirmId, period: Ordinal) -> Option<&Observation> {
        let rows = self.firm_rows(firm);
        rows.binary_search_by_key(&period, |o| o.period)
            .ok()
            .map(|i| &rows[i])
    }

    /// Sorted distinct periods present in the panel.
    pub fn periods(&self) -> impl Iterator<Item = Ordinal> + '_ {
        self.by_period.keys().copied()
    }

    pub fn cross_section(&self, period: Ordinal) -> impl Iterator<Item = &Observation> {
        self.by_period
            .get(&period)
            .into_iter()
            .flat_map(move |idx| idx.iter().map(move |&i| &self.rows[i]))
    }

    /// Compounded return of `firm` over the inclusive ordinal range; absent if
    /// any period is missing.
    pub fn compound(&self, firm: FirmId, from: Ordinal, to: Ordinal) -> Option<f64> {
        let rows = self.firm_rows(firm);
        let start = rows.binary_search_by_key(&from, |o| o.period).ok()?;
        let len = (to - from + 1) as usize;
        let window = rows.get(start..start + len)?;
        if window.last()?.period != to {
            return None;
        }
        Some(window.iter().fold(1.0, |acc, o| acc * (1.0 + o.ret)) - 1.0)
    }

    /// Returns the subset of rows satisfying `keep`, sharing the firm table.
    pub fn retain(&self, mut keep: impl FnMut(&Observation) -> bool) -> ReturnPanel {
        let rows = self.rows.iter().copied().filter(|o| keep(o)).collect();
        Self::assemble(self.timeline.clone(), self.firms.clone(), rows)
    }

    pub fn to_records(&self) -> Vec<ReturnRecord> {
        self.rows
            .iter()
            .map(|o| ReturnRecord {
                firm: self.firm_name(o.firm).to_owned(),
                period: o.period,
                ret: o.ret,
                me: o.me,
                volume: o.volume,
                exchange: o.exchange,
            })
            .collect()
    }
}

/// Rows with `from <= period <= to`. The input panel is left untouched.
pub fn filter_panel(panel: &ReturnPanel, from: Ordinal, to: Ordinal) -> Result<ReturnPanel> {
    if from > to {
        return Err(Error::Invalid(format!(
            "filter range is reversed: {} > {}",
            panel.timeline().label(from),
            panel.timeline().label(to)
        )));
    }
    Ok(panel.retain(|o| o.period >= from && o.period <= to))
}

/// Supplier→customer edge with an inclusive window of validity in months.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct Link {
    pub supplier: String,
    pub customer: String,
    #[serde(serialize_with = "ser_month")]
    pub effective_from: Month,
    #[serde(serialize_with = "ser_month")]
    pub effective_to: Month,
}

fn ser_month<S: serde::Serializer>(m: &Month, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&m.to_string())
}

impl Link {
    pub fn is_active(&self, month: Month) -> bool {
        self.effective_from <= month && month <= self.effective_to
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OverlapPolicy {
    #[default]
    Reject,
    Merge,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinkTable {
    links: Vec<Link>,
}

impl LinkTable {
    pub fn new(mut links: Vec<Link>, overlaps: OverlapPolicy) -> Result<Self> {
        for l in &links {
            if l.effective_from > l.effective_to {
                return Err(Error::Invalid(format!(
                    "link {}->{} has effective_from {} after effective_to {}",
                    l.supplier, l.customer, l.effective_from, l.effective_to
                )));
            }
            if l.supplier == l.customer {
                return Err(Error::Invalid(format!("self-link for firm {}", l.supplier)));
            }
        }
        links.sort();
        let mut out: Vec<Link> = Vec::with_capacity(links.len());
        for l in links {
            match out.last_mut() {
                Some(prev)
                    if prev.supplier == l.supplier
                        && prev.customer == l.customer
                        && l.effective_from <= prev.effective_to =>
                {
                    match overlaps {
                        OverlapPolicy::Reject => {
                            return Err(Error::Invalid(format!(
                                "overlapping windows for link {}->{} ({}..{} and {}..{})",
                                l.supplier,
                                l.customer,
                                prev.effective_from,
                                prev.effective_to,
                                l.effective_from,
                                l.effective_to
                            )))
                        }
                        OverlapPolicy::Merge => {
                            prev.effective_to = prev.effective_to.max(l.effective_to);
                        }
                    }
                }
                _ => out.push(l),
            }
        }
        Ok(Self { links: out })
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn len(&self) -> usize {
        self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    pub fn suppliers(&self) -> BTreeSet<&str> {
        self.links.iter().map(|l| l.supplier.as_str()).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Announcement {
    pub firm: String,
    pub date: NaiveDate,
    pub eps: f64,
}

/// Earnings announcements grouped by firm and ordered by date.
#[derive(Debug, Clone, Default)]
pub struct AnnouncementTable {
    rows: Vec<Announcement>,
    by_firm: BTreeMap<String, Range<usize>>,
}

impl AnnouncementTable {
    pub fn new(mut rows: Vec<Announcement>) -> Result<Self> {
        rows.sort_by(|a, b| a.firm.cmp(&b.firm).then(a.date.cmp(&b.date)));
        if let Some(w) = rows
            .windows(2)
            .find(|w| w[0].firm == w[1].firm && w[0].date == w[1].date)
        {
            return Err(Error::Invalid(format!(
                "duplicate announcement for firm {} on {}",
                w[0].firm, w[0].date
            )));
        }
        let mut by_firm = BTreeMap::new();
        let mut start = 0;
        for i in 0..rows.len() {
            if i + 1 == rows.len() || rows[i + 1].firm != rows[i].firm {
                by_firm.insert(rows[i].firm.clone(), start..i + 1);
                start = i + 1;
            }
        }
        Ok(Self { rows, by_firm })
    }

    pub fn rows(&self) -> &[Announcement] {
        &self.rows
    }

    pub fn firm(&self, firm: &str) -> &[Announcement] {
        self.by_firm
            .get(firm)
            .map(|r| &self.rows[r.clone()])
            .unwrap_or(&[])
    }

    pub fn firms(&self) -> impl Iterator<Item = &str> {
        self.by_firm.keys().map(String::as_str)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarketPoint {
    pub market_return: f64,
    pub risk_free: f64,
}

#[derive(Debug, Clone)]
pub struct MarketSeries {
    timeline: Timeline,
    points: BTreeMap<Ordinal, MarketPoint>,
}

impl MarketSeries {
    pub fn new(timeline: Timeline, points: BTreeMap<Ordinal, MarketPoint>) -> Self {
        Self { timeline, points }
    }

    pub fn timeline(&self) -> &Timeline {
        &self.timeline
    }

    pub fn get(&self, period: Ordinal) -> Option<MarketPoint> {
        self.points.get(&period).copied()
    }

    pub fn points(&self) -> &BTreeMap<Ordinal, MarketPoint> {
        &self.points
    }

    /// Checks the series covers every period of `panel`.
    pub fn covers(&self, panel: &ReturnPanel) -> Result<()> {
        match panel.periods().find(|p| !self.points.contains_key(p)) {
            None => Ok(()),
            Some(p) => Err(Error::Invalid(format!(
                "market series has no value for {}",
                panel.timeline().label(p)
            ))),
        }
    }
}

/// Firm-level accounting characteristics (book-to-market, operating
/// profitability) keyed by month.
#[derive(Debug, Clone, Default)]
pub struct CharacteristicTable {
    pub rows: BTreeMap<(String, Month), CharacteristicRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CharacteristicRow {
    pub book_to_market: Option<f64>,
    pub profitability: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageRow {
    pub year: i32,
    pub linked_firms: usize,
    pub universe_firms: usize,
    /// Equal-weighted fraction of firms; absent when the universe is empty.
    pub firm_fraction: Option<f64>,
    /// Fraction of June market equity; absent without June ME in the universe.
    pub me_fraction: Option<f64>,
}

/// Per-year counts of linked vs universe firms, with June-ME weighted share.
pub fn coverage_report(
    panel: &ReturnPanel,
    linked: &BTreeSet<String>,
    universe: &ReturnPanel,
) -> Result<Vec<CoverageRow>> {
    if panel.timeline() != universe.timeline() {
        return Err(Error::Invalid(
            "coverage requires panels on the same calendar".into(),
        ));
    }
    #[derive(Default)]
    struct YearAcc<'a> {
        firms: BTreeSet<&'a str>,
        june_me: BTreeMap<&'a str, f64>,
    }
    fn scan<'a>(
        p: &'a ReturnPanel,
        filter: impl Fn(&str) -> bool,
    ) -> BTreeMap<i32, YearAcc<'a>> {
        let mut out: BTreeMap<i32, YearAcc<'a>> = BTreeMap::new();
        for o in p.rows() {
            let name = p.firm_name(o.firm);
            if !filter(name) {
                continue;
            }
            let Some(month) = p.timeline().month_of(o.period) else {
                continue;
            };
            let acc = out.entry(month.year()).or_default();
            acc.firms.insert(name);
            if month.month() == 6 {
                if let Some(me) = o.me {
                    // rows are period-ordered per firm, so the last June value wins
                    acc.june_me.insert(name, me);
                }
            }
        }
        out
    }
    let linked_years = scan(panel, |f| linked.contains(f));
    let universe_years = scan(universe, |_| true);
    let years: BTreeSet<i32> = linked_years
        .keys()
        .chain(universe_years.keys())
        .copied()
        .collect();
    let empty = YearAcc::default();
    Ok(years
        .into_iter()
        .map(|year| {
            let l = linked_years.get(&year).unwrap_or(&empty);
            let u = universe_years.get(&year).unwrap_or(&empty);
            let u_me: f64 = u.june_me.values().sum();
            let l_me: f64 = l.june_me.values().sum();
            CoverageRow {
                year,
                linked_firms: l.firms.len(),
                universe_firms: u.firms.len(),
                firm_fraction: (!u.firms.is_empty())
                    .then(|| l.firms.len() as f64 / u.firms.len() as f64),
                me_fraction: (u_me > 0.0).then(|| l_me / u_me),
            }
        })
        .collect())
}

/// Distinct firms per period, handy for report footers.
pub fn firms_per_period(panel: &ReturnPanel) -> HashMap<Ordinal, usize> {
    panel
        .periods()
        .map(|p| (p, panel.cross_section(p).count()))
        .collect()
}
