//! Panel-wide signal builders.

use std::collections::BTreeMap;

use super::{
    cmom_name, mom_name, window_return, LagWindow, SignalPanel, CUST_CAR3, CUST_SUE, LOG_BM,
    LOG_ME, OP, REL_SIZE,
};
use crate::error::Result;
use crate::links::{customer_return_series, CustomerAggregate};
use crate::panel::{CharacteristicTable, ReturnPanel};
use crate::period::Month;

/// Months an accounting characteristic is carried forward.
const CHARACTERISTIC_FILL_MONTHS: i32 = 12;

/// `mom-j-k` for every firm-period of the panel.
pub fn momentum_signal(panel: &ReturnPanel, w: LagWindow) -> Result<SignalPanel> {
    let name = mom_name(w);
    let mut out = SignalPanel::new(panel);
    for firm in panel.firm_ids() {
        let rows = panel.firm_rows(firm);
        for o in rows {
            if let Some(v) = window_return(rows, o.period, w) {
                out.insert(&name, firm, o.period, v)?;
            }
        }
        // one period past the firm's last observation still has a full window
        if let Some(last) = rows.last() {
            if let Some(v) = window_return(rows, last.period + 1, w) {
                out.insert(&name, firm, last.period + 1, v)?;
            }
        }
    }
    Ok(out)
}

/// `cmom-j-k`: window return of the supplier's equal-weighted customer
/// portfolio, stamped at every supplier period.
pub fn customer_momentum_signal(
    panel: &ReturnPanel,
    aggregates: &[CustomerAggregate],
    w: LagWindow,
) -> Result<SignalPanel> {
    let name = cmom_name(w);
    let mut out = SignalPanel::new(panel);
    for (supplier, series) in customer_return_series(aggregates) {
        for o in panel.firm_rows(supplier) {
            if let Some(v) = window_return(&series, o.period, w) {
                out.insert(&name, supplier, o.period, v)?;
            }
        }
    }
    Ok(out)
}

/// End-of-period states from customer aggregates: `rel_size`, `cust_sue`,
/// `cust_car3`. Lag by one period before sorting.
pub fn aggregate_states(panel: &ReturnPanel, aggregates: &[CustomerAggregate]) -> Result<SignalPanel> {
    let mut out = SignalPanel::new(panel);
    for a in aggregates {
        if let Some(v) = a.rel_size {
            out.insert(REL_SIZE, a.supplier, a.period, v)?;
        }
        if let Some(v) = a.mean_cust_sue {
            out.insert(CUST_SUE, a.supplier, a.period, v)?;
        }
        if let Some(v) = a.mean_cust_car3 {
            out.insert(CUST_CAR3, a.supplier, a.period, v)?;
        }
    }
    Ok(out)
}

/// Report month, book-to-market and operating profitability.
type Reported = (Month, Option<f64>, Option<f64>);

/// End-of-period `log_me`, `log_bm` and `op` states. Accounting values are
/// carried forward up to twelve months from their report month; non-positive
/// ME or B/M leave the log absent.
pub fn standard_characteristics(
    panel: &ReturnPanel,
    accounting: Option<&CharacteristicTable>,
) -> Result<SignalPanel> {
    let mut out = SignalPanel::new(panel);
    let mut by_firm: BTreeMap<&str, Vec<Reported>> = BTreeMap::new();
    if let Some(t) = accounting {
        for ((firm, month), row) in &t.rows {
            by_firm
                .entry(firm)
                .or_default()
                .push((*month, row.book_to_market, row.profitability));
        }
    }
    for firm in panel.firm_ids() {
        let acct = by_firm.get(panel.firm_name(firm)).map(Vec::as_slice).unwrap_or(&[]);
        for o in panel.firm_rows(firm) {
            if let Some(me) = o.me.filter(|m| *m > 0.0) {
                out.insert(LOG_ME, firm, o.period, me.ln())?;
            }
            let Some(month) = panel.timeline().month_of(o.period) else {
                continue;
            };
            let i = acct.partition_point(|r| r.0 <= month);
            let Some(&(reported, bm, op)) = i.checked_sub(1).map(|i| &acct[i]) else {
                continue;
            };
            if month.0 - reported.0 >= CHARACTERISTIC_FILL_MONTHS {
                continue;
            }
            if let Some(bm) = bm.filter(|b| *b > 0.0) {
                out.insert(LOG_BM, firm, o.period, bm.ln())?;
            }
            if let Some(op) = op {
                out.insert(OP, firm, o.period, op)?;
            }
        }
    }
    Ok(out)
}
