//! Supplier attention to a customer link: normalized abnormal volume (NAV)
//! of the supplier on the customer's earnings announcement day.

use std::collections::{BTreeMap, BTreeSet};

use super::earnings::sample_sd;
use super::{Absent, SignalPanel, SignalValue, NAV};
use crate::error::Result;
use crate::panel::{AnnouncementTable, FirmId, LinkTable, ReturnPanel};
use crate::period::Ordinal;

/// Baseline window, in trading days relative to the event day.
pub const NAV_BASELINE_START: Ordinal = -60;
pub const NAV_BASELINE_END: Ordinal = -11;
const MIN_BASELINE_DAYS: usize = 30;
/// Trading days (about three months) a NAV value stays attached.
const ATTACH_DAYS: Ordinal = 63;

/// `(log(1+V_e) - mean) / sd` with mean and sample SD of `log(1+V)` over the
/// baseline days `[e-60, e-11]`.
pub fn compute_nav(daily: &ReturnPanel, supplier: FirmId, event_day: Ordinal) -> SignalValue {
    let event = daily
        .get(supplier, event_day)
        .and_then(|o| o.volume)
        .ok_or(Absent::InsufficientBaseline)?;
    let baseline: Vec<f64> = (event_day + NAV_BASELINE_START..=event_day + NAV_BASELINE_END)
        .filter_map(|d| daily.get(supplier, d).and_then(|o| o.volume))
        .map(f64::ln_1p)
        .collect();
    if baseline.len() < MIN_BASELINE_DAYS {
        return Err(Absent::InsufficientBaseline);
    }
    if baseline.iter().all(|x| *x == baseline[0]) {
        return Err(Absent::DegenerateDispersion);
    }
    let mean = baseline.iter().sum::<f64>() / baseline.len() as f64;
    Ok((event.ln_1p() - mean) / sample_sd(&baseline))
}

#[derive(Debug, Clone)]
pub struct NavStates {
    /// `nav` state on the daily panel; lag by one day before sorting.
    pub states: SignalPanel,
    pub computed: usize,
    pub absent: BTreeMap<Absent, usize>,
}

/// NAV for every announcement of a supplier's unique customer.
///
/// Only suppliers with exactly one active customer in the event month are
/// scored. A value stays attached for about three months of trading days or
/// until the supplier's next scored event.
pub fn nav_states(
    daily: &ReturnPanel,
    links: &LinkTable,
    announcements: &AnnouncementTable,
) -> Result<NavStates> {
    let timeline = daily.timeline();
    let cal = timeline.calendar().expect("NAV needs a daily panel");
    let mut by_supplier: BTreeMap<&str, Vec<_>> = BTreeMap::new();
    for l in links.links() {
        by_supplier.entry(&l.supplier).or_default().push(l);
    }

    let mut computed = 0;
    let mut absent: BTreeMap<Absent, usize> = BTreeMap::new();
    let mut events: BTreeMap<FirmId, BTreeMap<Ordinal, f64>> = BTreeMap::new();
    for (supplier, sup_links) in &by_supplier {
        let Some(sid) = daily.firm_id(supplier) else {
            continue;
        };
        let customers: BTreeSet<&str> = sup_links.iter().map(|l| l.customer.as_str()).collect();
        for customer in customers {
            for a in announcements.firm(customer) {
                let Some(day) = cal.roll_forward(a.date) else {
                    continue;
                };
                let month = timeline.month_of(day).expect("calendar day");
                let active: BTreeSet<&str> = sup_links
                    .iter()
                    .filter(|l| l.is_active(month))
                    .map(|l| l.customer.as_str())
                    .collect();
                if active.len() != 1 || !active.contains(customer) {
                    continue;
                }
                match compute_nav(daily, sid, day) {
                    Ok(v) => {
                        computed += 1;
                        events.entry(sid).or_default().insert(day, v);
                    }
                    Err(why) => *absent.entry(why).or_default() += 1,
                }
            }
        }
    }

    let last_day = cal.len() as Ordinal - 1;
    let mut states = SignalPanel::new(daily);
    for (sid, evs) in events {
        let evs: Vec<(Ordinal, f64)> = evs.into_iter().collect();
        for (i, (day, v)) in evs.iter().enumerate() {
            let stop = evs
                .get(i + 1)
                .map(|e| e.0)
                .unwrap_or(Ordinal::MAX)
                .min(day + ATTACH_DAYS)
                .min(last_day + 1);
            for d in *day..stop {
                states.insert(NAV, sid, d, *v)?;
            }
        }
    }
    Ok(NavStates {
        states,
        computed,
        absent,
    })
}
