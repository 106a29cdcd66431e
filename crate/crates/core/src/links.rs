//! Fiscal-year link lagging and per-supplier customer-portfolio aggregates.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::econometrics::pearson;
use crate::error::{Error, Result};
use crate::panel::{FirmId, Link, LinkTable, OverlapPolicy, ReturnPanel};
use crate::period::{Month, Ordinal};
use crate::signals::{SignalPanel, CAR3, SUE};

/// A link as reported, before the reporting lag is applied.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct RawLink {
    pub supplier: String,
    pub customer: String,
    pub fy_end: Month,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LagConfig {
    pub lag_months: u32,
    /// Months a link stays effective when no later report supersedes it.
    pub expiry_months: u32,
}

impl Default for LagConfig {
    fn default() -> Self {
        Self {
            lag_months: 6,
            expiry_months: 12,
        }
    }
}

/// Turns reported links into effective windows.
///
/// A link reported for fiscal year-end `F` becomes effective in month
/// `F + lag + 1` and lasts `expiry_months`, cut short the month before the
/// supplier's next report becomes effective.
pub fn lag_links(raw: &[RawLink], cfg: LagConfig) -> Result<LinkTable> {
    if cfg.expiry_months == 0 {
        return Err(Error::Invalid("link expiry must be at least one month".into()));
    }
    let mut report_starts: BTreeMap<&str, BTreeSet<Month>> = BTreeMap::new();
    for r in raw {
        report_starts
            .entry(&r.supplier)
            .or_default()
            .insert(r.fy_end.plus(cfg.lag_months as i32 + 1));
    }
    let mut seen = BTreeSet::new();
    let mut links = Vec::with_capacity(raw.len());
    for r in raw {
        let from = r.fy_end.plus(cfg.lag_months as i32 + 1);
        if !seen.insert((&r.supplier, &r.customer, from)) {
            continue;
        }
        let mut to = from.plus(cfg.expiry_months as i32 - 1);
        if let Some(next) = report_starts[r.supplier.as_str()]
            .range(from.plus(1)..)
            .next()
        {
            to = to.min(next.plus(-1));
        }
        links.push(Link {
            supplier: r.supplier.clone(),
            customer: r.customer.clone(),
            effective_from: from,
            effective_to: to,
        });
    }
    LinkTable::new(links, OverlapPolicy::Reject)
}

/// Customer-portfolio summary for one supplier in one period.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CustomerAggregate {
    pub supplier: FirmId,
    pub period: Ordinal,
    pub cust_ret_ew: f64,
    pub n_customers: usize,
    pub mean_cust_sue: Option<f64>,
    pub mean_cust_car3: Option<f64>,
    pub rel_size: Option<f64>,
}

/// One aggregate per (supplier, period) with at least one active customer
/// that has a return that period. Output is ordered by (supplier, period).
///
/// On daily panels a link is active on every trading day of its months.
/// SUE/CAR3 means read the `sue` and `car3` signals of customers at the same
/// period when `signals` is given.
pub fn customer_aggregates(
    panel: &ReturnPanel,
    links: &LinkTable,
    signals: Option<&SignalPanel>,
) -> Vec<CustomerAggregate> {
    let timeline = panel.timeline();
    let mut groups: BTreeMap<(FirmId, Ordinal), Vec<FirmId>> = BTreeMap::new();
    for link in links.links() {
        let (Some(s), Some(c)) = (panel.firm_id(&link.supplier), panel.firm_id(&link.customer))
        else {
            continue;
        };
        let rows = panel.firm_rows(c);
        let month = |p: Ordinal| timeline.month_of(p).expect("panel period on timeline");
        let start = rows.partition_point(|o| month(o.period) < link.effective_from);
        for o in &rows[start..] {
            if month(o.period) > link.effective_to {
                break;
            }
            groups.entry((s, o.period)).or_default().push(c);
        }
    }

    groups
        .into_iter()
        .map(|((supplier, period), mut customers)| {
            customers.sort_unstable();
            customers.dedup();
            aggregate_one(panel, signals, supplier, period, &customers)
        })
        .collect()
}

fn aggregate_one(
    panel: &ReturnPanel,
    signals: Option<&SignalPanel>,
    supplier: FirmId,
    period: Ordinal,
    customers: &[FirmId],
) -> CustomerAggregate {
    let obs: Vec<_> = customers
        .iter()
        .map(|c| panel.get(*c, period).expect("grouped customers have a return"))
        .collect();
    let n = obs.len();
    let cust_ret_ew = obs.iter().map(|o| o.ret).sum::<f64>() / n as f64;

    let signal_mean = |name: &str| {
        let s = signals?;
        let vals: Vec<f64> = customers
            .iter()
            .filter_map(|c| s.get(name, *c, period))
            .collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    };

    let rel_size = (|| {
        let supplier_me = panel.get(supplier, period)?.me.filter(|m| *m > 0.0)?;
        let mut total = 0.0;
        for o in &obs {
            total += o.me?;
        }
        let ratio = total / n as f64 / supplier_me;
        (ratio > 0.0 && ratio.is_finite()).then_some(ratio)
    })();

    CustomerAggregate {
        supplier,
        period,
        cust_ret_ew,
        n_customers: n,
        mean_cust_sue: signal_mean(SUE),
        mean_cust_car3: signal_mean(CAR3),
        rel_size,
    }
}

/// Pearson correlation of supplier return with same-period customer-portfolio
/// return, pooled over all supplier-periods. Absent with fewer than two pairs
/// or zero variance.
pub fn contemporaneous_link_correlation(
    panel: &ReturnPanel,
    aggregates: &[CustomerAggregate],
) -> Option<f64> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = aggregates
        .iter()
        .filter_map(|a| panel.get(a.supplier, a.period).map(|o| (o.ret, a.cust_ret_ew)))
        .unzip();
    pearson(&xs, &ys)
}

/// Benchmark correlation over `n_pairs` randomly drawn distinct firm pairs,
/// pooling same-period returns of each pair.
pub fn random_pair_correlation(panel: &ReturnPanel, n_pairs: usize, seed: u64) -> Option<f64> {
    let n_firms = panel.firms().len();
    if n_firms < 2 {
        return None;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for _ in 0..n_pairs {
        let a = rng.random_range(0..n_firms);
        let mut b = rng.random_range(0..n_firms - 1);
        if b >= a {
            b += 1;
        }
        let (a, b) = (FirmId(a as u32), FirmId(b as u32));
        for o in panel.firm_rows(a) {
            if let Some(q) = panel.get(b, o.period) {
                xs.push(o.ret);
                ys.push(q.ret);
            }
        }
    }
    pearson(&xs, &ys)
}

/// Per-supplier ordered `(period, cust_ret_ew)` series.
pub fn customer_return_series(
    aggregates: &[CustomerAggregate],
) -> BTreeMap<FirmId, Vec<(Ordinal, f64)>> {
    let mut out: BTreeMap<FirmId, Vec<(Ordinal, f64)>> = BTreeMap::new();
    for a in aggregates {
        out.entry(a.supplier).or_default().push((a.period, a.cust_ret_ew));
    }
    out
}

/// Emits `aggregates.csv`.
pub fn write_aggregates<W: Write>(
    panel: &ReturnPanel,
    aggregates: &[CustomerAggregate],
    out: W,
) -> Result<()> {
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let err = |e| Error::csv("aggregates.csv", e);
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "supplier_id",
        "date",
        "cust_ret_ew",
        "n_customers",
        "mean_cust_sue",
        "mean_cust_car3",
        "rel_size",
    ])
    .map_err(err)?;
    for a in aggregates {
        w.write_record([
            panel.firm_name(a.supplier),
            &panel.timeline().label(a.period),
            &a.cust_ret_ew.to_string(),
            &a.n_customers.to_string(),
            &opt(a.mean_cust_sue),
            &opt(a.mean_cust_car3),
            &opt(a.rel_size),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| Error::io("aggregates.csv", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel::ReturnRecord;
    use crate::period::Timeline;
    use rand::Rng;

    fn m(s: &str) -> Month {
        Month::parse(s).unwrap()
    }

    fn raw(s: &str, c: &str, fy: &str) -> RawLink {
        RawLink {
            supplier: s.into(),
            customer: c.into(),
            fy_end: m(fy),
        }
    }

    fn rec(firm: &str, period: Ordinal, ret: f64, me: Option<f64>) -> ReturnRecord {
        ReturnRecord {
            firm: firm.into(),
            period,
            ret,
            me,
            volume: None,
            exchange: None,
        }
    }

    #[test]
    fn six_month_lag_from_december_year_end() {
        let t = lag_links(&[raw("S", "C", "1990-12")], LagConfig::default()).unwrap();
        let l = &t.links()[0];
        assert_eq!(l.effective_from, m("1991-07"));
        assert_eq!(l.effective_to, m("1992-06"));
    }

    #[test]
    fn zero_lag_starts_the_following_month() {
        let cfg = LagConfig {
            lag_months: 0,
            expiry_months: 12,
        };
        let t = lag_links(&[raw("S", "C", "1990-12")], cfg).unwrap();
        assert_eq!(t.links()[0].effective_from, m("1991-01"));
    }

    #[test]
    fn later_report_truncates_earlier_link() {
        // Reports for FY 1990-12 and a fiscal-year change to 1991-09:
        // first window 1991-07..1992-06 would overlap the second starting 1992-04.
        let rows = [
            raw("S", "C", "1990-12"),
            raw("S", "C", "1991-09"),
            raw("S", "D", "1991-09"),
        ];
        let t = lag_links(&rows, LagConfig::default()).unwrap();
        let got: Vec<(String, String, String)> = t
            .links()
            .iter()
            .map(|l| (l.customer.clone(), l.effective_from.to_string(), l.effective_to.to_string()))
            .collect();
        assert_eq!(
            got,
            vec![
                ("C".into(), "1991-07".into(), "1992-03".into()),
                ("C".into(), "1992-04".into(), "1993-03".into()),
                ("D".into(), "1992-04".into(), "1993-03".into()),
            ]
        );
    }

    #[test]
    fn dropped_customer_expires_with_the_next_report() {
        // C is not named in the 1991 report; its 1990 link ends when the 1991 one starts.
        let rows = [raw("S", "C", "1990-12"), raw("S", "D", "1991-12")];
        let t = lag_links(&rows, LagConfig::default()).unwrap();
        assert_eq!(t.links()[0].effective_to, m("1992-06"));
        let cfg = LagConfig {
            lag_months: 6,
            expiry_months: 24,
        };
        let t = lag_links(&rows, cfg).unwrap();
        assert_eq!(t.links()[0].effective_to, m("1992-06"));
    }

    fn links(rows: &[(&str, &str, &str, &str)]) -> LinkTable {
        LinkTable::new(
            rows.iter()
                .map(|(s, c, f, t)| Link {
                    supplier: (*s).into(),
                    customer: (*c).into(),
                    effective_from: m(f),
                    effective_to: m(t),
                })
                .collect(),
            OverlapPolicy::Reject,
        )
        .unwrap()
    }

    #[test]
    fn single_and_two_customer_means() {
        let p = m("2000-01").0;
        let panel = ReturnPanel::from_records(
            Timeline::Monthly,
            vec![
                rec("S", p, 0.0, Some(10.0)),
                rec("C1", p, 0.10, Some(20.0)),
                rec("C2", p, -0.02, Some(40.0)),
                rec("T", p, 0.0, Some(1.0)),
            ],
        )
        .unwrap();
        let table = links(&[
            ("S", "C1", "2000-01", "2000-12"),
            ("S", "C2", "2000-01", "2000-12"),
            ("T", "C1", "1999-01", "2000-01"),
        ]);
        let aggs = customer_aggregates(&panel, &table, None);
        assert_eq!(aggs.len(), 2);
        let s = &aggs[0];
        assert_eq!(panel.firm_name(s.supplier), "S");
        assert_eq!(s.n_customers, 2);
        assert!((s.cust_ret_ew - 0.04).abs() < 1e-15);
        assert_eq!(s.rel_size, Some(3.0));
        let t = &aggs[1];
        assert_eq!(t.cust_ret_ew, 0.10);
        assert_eq!(t.n_customers, 1);
        assert_eq!(t.rel_size, Some(20.0));
    }

    #[test]
    fn rel_size_needs_every_customer_me() {
        let panel = ReturnPanel::from_records(
            Timeline::Monthly,
            vec![rec("S", 0, 0.0, Some(1.0)), rec("C1", 0, 0.1, None), rec("C2", 0, 0.1, Some(2.0))],
        )
        .unwrap();
        let table = links(&[("S", "C1", "0000-01", "0000-01"), ("S", "C2", "0000-01", "0000-01")]);
        let a = customer_aggregates(&panel, &table, None);
        assert_eq!(a[0].rel_size, None);
    }

    #[test]
    fn nested_loop_oracle_on_random_panel() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let base = m("2001-01").0;
        let names: Vec<String> = (0..50).map(|i| format!("F{i:02}")).collect();
        let mut recs = Vec::new();
        for name in &names {
            for t in 0..24 {
                if rng.random_bool(0.9) {
                    let me = rng.random_bool(0.9).then(|| rng.random_range(1.0..100.0));
                    recs.push(rec(name, base + t, rng.random_range(-0.2..0.2), me));
                }
            }
        }
        let panel = ReturnPanel::from_records(Timeline::Monthly, recs).unwrap();
        let mut raw_links = Vec::new();
        for _ in 0..80 {
            let s = rng.random_range(0..50);
            let c = rng.random_range(0..50);
            if s != c {
                let f = base + rng.random_range(-6..20);
                raw_links.push(Link {
                    supplier: names[s].clone(),
                    customer: names[c].clone(),
                    effective_from: Month(f),
                    effective_to: Month(f + rng.random_range(0..12)),
                });
            }
        }
        let table = LinkTable::new(raw_links, OverlapPolicy::Merge).unwrap();
        let got = customer_aggregates(&panel, &table, None);

        let mut expected = Vec::new();
        for s in 0..50 {
            for t in base..base + 24 {
                let mut rets = Vec::new();
                let mut mes = Vec::new();
                for c in 0..50 {
                    let active = table.links().iter().any(|l| {
                        l.supplier == names[s] && l.customer == names[c] && l.is_active(Month(t))
                    });
                    if !active {
                        continue;
                    }
                    if let Some(o) = panel.get(panel.firm_id(&names[c]).unwrap(), t) {
                        rets.push(o.ret);
                        mes.push(o.me);
                    }
                }
                if rets.is_empty() {
                    continue;
                }
                let sid = panel.firm_id(&names[s]).unwrap();
                let mean = rets.iter().sum::<f64>() / rets.len() as f64;
                let sup_me = panel.get(sid, t).and_then(|o| o.me);
                let rel = match (sup_me, mes.iter().copied().collect::<Option<Vec<f64>>>()) {
                    (Some(sm), Some(ms)) => Some(ms.iter().sum::<f64>() / ms.len() as f64 / sm),
                    _ => None,
                };
                expected.push((sid, t, mean, rets.len(), rel));
            }
        }
        assert_eq!(got.len(), expected.len());
        for (a, e) in got.iter().zip(&expected) {
            assert_eq!((a.supplier, a.period, a.n_customers), (e.0, e.1, e.3));
            assert!((a.cust_ret_ew - e.2).abs() < 1e-15);
            match (a.rel_size, e.4) {
                (Some(x), Some(y)) => assert!((x - y).abs() <= 1e-12 * y),
                (x, y) => assert_eq!(x, y),
            }
        }
    }

    #[test]
    fn perfect_and_null_correlation() {
        let mut recs = Vec::new();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for t in 0..10_000 {
            let r = rng.random_range(-0.1..0.1);
            recs.push(rec("C", t, r, None));
            recs.push(rec("S", t, r, None));
            recs.push(rec("X", t, rng.random_range(-0.1..0.1), None));
        }
        let panel = ReturnPanel::from_records(Timeline::Monthly, recs).unwrap();
        let table = links(&[("S", "C", "0000-01", "0833-12")]);
        let aggs = customer_aggregates(&panel, &table, None);
        let rho = contemporaneous_link_correlation(&panel, &aggs).unwrap();
        assert!((rho - 1.0).abs() < 1e-12);

        let table = links(&[("X", "C", "0000-01", "0833-12")]);
        let aggs = customer_aggregates(&panel, &table, None);
        assert_eq!(aggs.len(), 10_000);
        let rho = contemporaneous_link_correlation(&panel, &aggs).unwrap();
        assert!(rho.abs() < 0.05, "{rho}");
    }
}
