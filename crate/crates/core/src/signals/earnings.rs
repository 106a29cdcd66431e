//! Earnings-surprise signals: SUE and the three-day announcement return.

use std::collections::BTreeMap;

use chrono::NaiveDate;

use super::{Absent, SignalPanel, SignalValue, CAR3, SUE};
use crate::error::Result;
use crate::panel::{Announcement, AnnouncementTable, FirmId, MarketSeries, ReturnPanel};
use crate::period::{Month, Ordinal};

/// Trailing window (days) within which at least `MIN_ANNOUNCEMENTS` are needed.
pub const SUE_WINDOW_DAYS: i64 = 730;
pub const MIN_ANNOUNCEMENTS: usize = 6;
/// Number of trailing year-over-year changes in the dispersion estimate.
pub const DISPERSION_CHANGES: usize = 8;
/// A quarter four announcements back counts as "same quarter last year" only
/// if it lies this many days earlier.
const YOY_GAP_DAYS: std::ops::RangeInclusive<i64> = 300..=430;
/// Months an earnings state stays attached to a firm.
const STATE_MONTHS: i32 = 3;

/// Year-over-year EPS change at each announcement: `eps[i] - eps[i-4]`,
/// absent for the first four announcements or when the gap is not about a year.
pub fn yoy_changes(anns: &[Announcement]) -> Vec<Option<f64>> {
    (0..anns.len())
        .map(|i| {
            let prev = anns.get(i.checked_sub(4)?)?;
            let gap = (anns[i].date - prev.date).num_days();
            YOY_GAP_DAYS
                .contains(&gap)
                .then(|| anns[i].eps - prev.eps)
        })
        .collect()
}

/// SUE at the `index`-th announcement of `firm`: the latest year-over-year
/// EPS change over the sample SD of the last eight changes.
pub fn compute_sue(table: &AnnouncementTable, firm: &str, index: usize) -> SignalValue {
    let anns = table.firm(firm);
    let changes = yoy_changes(anns);
    sue_from_changes(anns, &changes, index)
}

fn sue_from_changes(anns: &[Announcement], changes: &[Option<f64>], index: usize) -> SignalValue {
    let target = anns.get(index).ok_or(Absent::MissingData)?;
    let window_start = target.date - chrono::Days::new(SUE_WINDOW_DAYS as u64);
    let recent = anns[..=index]
        .iter()
        .rev()
        .take_while(|a| a.date > window_start)
        .count();
    if recent < MIN_ANNOUNCEMENTS {
        return Err(Absent::InsufficientAnnouncements);
    }
    let latest = changes[index].ok_or(Absent::MissingData)?;
    let lo = (index + 1).saturating_sub(DISPERSION_CHANGES);
    let trailing: Vec<f64> = changes[lo..=index].iter().flatten().copied().collect();
    if trailing.len() < 2 {
        return Err(Absent::MissingData);
    }
    let sd = sample_sd(&trailing);
    if sd == 0.0 || trailing.iter().all(|x| *x == trailing[0]) {
        return Err(Absent::DegenerateDispersion);
    }
    Ok(latest / sd)
}

pub(crate) fn sample_sd(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Three-day abnormal return around an announcement, as a simple sum of
/// firm minus market daily returns over trading days `d-1..=d+1`, where `d`
/// is the first trading day on or after the announcement date.
pub fn compute_car3(
    daily: &ReturnPanel,
    market: &MarketSeries,
    firm: &str,
    date: NaiveDate,
) -> SignalValue {
    let cal = daily.timeline().calendar().ok_or(Absent::OutsideCalendar)?;
    let day = cal.roll_forward(date).ok_or(Absent::OutsideCalendar)?;
    let firm = daily.firm_id(firm).ok_or(Absent::MissingData)?;
    car3_at(daily, market, firm, day)
}

pub(crate) fn car3_at(
    daily: &ReturnPanel,
    market: &MarketSeries,
    firm: FirmId,
    day: Ordinal,
) -> SignalValue {
    let (mut firm_sum, mut mkt_sum) = (0.0, 0.0);
    for d in day - 1..=day + 1 {
        firm_sum += daily.get(firm, d).ok_or(Absent::MissingData)?.ret;
        mkt_sum += market.get(d).ok_or(Absent::MissingData)?.market_return;
    }
    Ok(firm_sum - mkt_sum)
}

/// Counts of absent signal values by reason.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EarningsDiagnostics {
    pub sue_computed: usize,
    pub sue_absent: BTreeMap<Absent, usize>,
    pub car3_computed: usize,
    pub car3_absent: BTreeMap<Absent, usize>,
}

/// End-of-month SUE and CAR3 states on the monthly panel's firm universe.
///
/// A value is attached to the months `m..m+2`, where `m` is the month in which
/// it becomes known (announcement month for SUE, month of day `d+1` for CAR3);
/// a later announcement replaces it. Lag the result by one period before
/// sorting on it.
pub fn earnings_states(
    monthly: &ReturnPanel,
    announcements: &AnnouncementTable,
    daily: Option<(&ReturnPanel, &MarketSeries)>,
) -> Result<(SignalPanel, EarningsDiagnostics)> {
    let mut out = SignalPanel::new(monthly);
    let mut diag = EarningsDiagnostics::default();
    let Some((first, last)) = monthly.periods().next().zip(monthly.periods().last()) else {
        return Ok((out, diag));
    };

    for firm in monthly.firm_ids() {
        let name = monthly.firm_name(firm);
        let anns = announcements.firm(name);
        if anns.is_empty() {
            continue;
        }
        let changes = yoy_changes(anns);
        let mut sue_events = Vec::new();
        let mut car_events = Vec::new();
        for (i, a) in anns.iter().enumerate() {
            match sue_from_changes(anns, &changes, i) {
                Ok(v) => {
                    diag.sue_computed += 1;
                    sue_events.push((Month::from_date(a.date), v));
                }
                Err(why) => *diag.sue_absent.entry(why).or_default() += 1,
            }
            if let Some((panel, market)) = daily {
                let cal = panel.timeline().calendar().expect("daily panel");
                let known = cal
                    .roll_forward(a.date)
                    .and_then(|d| cal.date_of(d + 1).map(|x| (d, x)));
                let value = match (known, panel.firm_id(name)) {
                    (None, _) => Err(Absent::OutsideCalendar),
                    (Some(_), None) => Err(Absent::MissingData),
                    (Some((d, next)), Some(fid)) => {
                        car3_at(panel, market, fid, d).map(|v| (Month::from_date(next), v))
                    }
                };
                match value {
                    Ok(ev) => {
                        diag.car3_computed += 1;
                        car_events.push(ev);
                    }
                    Err(why) => *diag.car3_absent.entry(why).or_default() += 1,
                }
            }
        }
        attach_states(&mut out, SUE, firm, &sue_events, first, last)?;
        attach_states(&mut out, CAR3, firm, &car_events, first, last)?;
    }
    Ok((out, diag))
}

fn attach_states(
    out: &mut SignalPanel,
    name: &str,
    firm: FirmId,
    events: &[(Month, f64)],
    first: Ordinal,
    last: Ordinal,
) -> Result<()> {
    for (i, (known, v)) in events.iter().enumerate() {
        let stop = events
            .get(i + 1)
            .map(|(next, _)| next.0)
            .unwrap_or(i32::MAX)
            .min(known.0 + STATE_MONTHS);
        for m in known.0.max(first)..stop.min(last + 1) {
            out.insert(name, firm, m, *v)?;
        }
    }
    Ok(())
}
