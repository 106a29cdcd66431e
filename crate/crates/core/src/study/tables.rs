//! One builder per study command. Each returns a [`Report`] whose tables
//! mirror the usual asset-pricing layout: a coefficient row followed by a
//! bracketed t-statistic row.

use std::collections::BTreeMap;

use super::config::{Settings, StudyConfig};
use super::data::{one_one, twelve_two, Prepared, CAR3F, CMOM, SUEF};
use crate::econometrics::{
    alpha_regression, correlation_matrix, fama_macbeth, normal_p_value, spanning_test,
    summary_stats, Covariance, FmReport, SummaryStats, ALPHA, INTERCEPT,
};
use crate::error::{Error, Result};
use crate::factors::{growth_of_dollar, CMA, HML, MKT_RF, RMW, SMB, UMD};
use crate::panel::{coverage_report, ReturnPanel};
use crate::period::{Frequency, Month, Ordinal, Timeline};
use crate::report::{Cell, Report, Table};
use crate::signals::{
    cmom_name, mom_name, SignalPanel, CAR3, CUST_CAR3, CUST_SUE, LOG_BM, LOG_ME, NAV, OP,
    REL_SIZE, SUE,
};
use crate::sorter::{
    conditional_double_sort, form_portfolios, restrict_by_ratio, BreakpointSpec, PortfolioSeries,
    SortOptions, Weighting,
};

pub struct Ctx<'a> {
    pub cfg: &'a StudyConfig,
    pub s: &'a Settings,
    pub p: &'a Prepared,
}

type Series = BTreeMap<Ordinal, f64>;

impl Ctx<'_> {
    fn nw(&self) -> Covariance {
        Covariance::NeweyWest(self.cfg.nw_lags)
    }

    fn stars(&self, t: Option<f64>) -> &'static str {
        t.map_or("", |t| self.s.regression_stars.stars(normal_p_value(t)))
    }

    fn monthly(&self) -> &ReturnPanel {
        &self.p.data.monthly
    }

    fn report(&self, command: &str) -> Report {
        Report::new(command, &self.s.config_hash)
    }

    /// Mean and Newey-West t of a series; the t is absent below two points
    /// or with zero dispersion.
    fn mean_t(&self, v: &[f64], freq: Frequency) -> (Option<f64>, Option<f64>) {
        match v.len() {
            0 => (None, None),
            1 => (Some(v[0]), None),
            _ => summary_stats(v, freq, self.cfg.nw_lags)
                .map(|st| (Some(st.mean), st.t))
                .unwrap_or((None, None)),
        }
    }

    fn mean_cells(&self, v: &[f64], freq: Frequency) -> (Cell, Cell) {
        let (m, t) = self.mean_t(v, freq);
        (Cell::pct_stars(m, self.stars(t)), Cell::t(t))
    }

    /// Bucket means (net of the risk-free rate when one is available) and the
    /// raw long-short mean, with t-statistics.
    fn bucket_rows(&self, series: &PortfolioSeries) -> (Vec<Cell>, Vec<Cell>) {
        let rf = self.p.data.risk_free();
        let freq = series.timeline.frequency();
        let mut means = Vec::new();
        let mut ts = Vec::new();
        for b in 1..=series.n_buckets {
            let v: Vec<f64> = series
                .bucket(b)
                .into_iter()
                .filter_map(|(p, r)| {
                    if rf.is_empty() || freq == Frequency::Daily {
                        Some(r)
                    } else {
                        rf.get(&p).map(|f| r - f)
                    }
                })
                .collect();
            let (m, t) = self.mean_cells(&v, freq);
            means.push(m);
            ts.push(t);
        }
        let ls: Vec<f64> = series.long_short().into_iter().map(|x| x.1).collect();
        let (m, t) = self.mean_cells(&ls, freq);
        means.push(m);
        ts.push(t);
        (means, ts)
    }

    /// Bucket rows under `label`, or a note when no period had every bucket filled.
    fn push_sort(&self, t: &mut Table, label: impl Into<String>, series: &PortfolioSeries) {
        let label = label.into();
        if series.periods.is_empty() {
            t.note(format!("{label}: no period with every bucket filled"));
            return;
        }
        let (m, ts) = self.bucket_rows(series);
        t.push(label, m);
        t.push("", ts);
    }

    fn sort(&self, signal: &str, spec: BreakpointSpec, w: Weighting) -> Result<PortfolioSeries> {
        form_portfolios(self.monthly(), &self.p.signals, signal, SortOptions::new(spec, w))
    }
}

fn bucket_columns(n: usize) -> Vec<String> {
    (1..=n)
        .map(|b| if n == 10 { format!("D{b}") } else { format!("Q{b}") })
        .chain(std::iter::once("L/S".to_owned()))
        .collect()
}

fn to_map(v: Vec<(Ordinal, f64)>) -> Series {
    v.into_iter().collect()
}

/// Records a skipped optional table instead of failing the command.
fn skip(table: &mut Table, what: &str, e: &Error) {
    table.note(format!("{what} skipped: {e}"));
}

pub fn coverage(c: &Ctx) -> Result<Report> {
    let mut r = c.report("coverage");
    let panel = c.monthly();
    let rows = coverage_report(panel, &c.p.data.linked_firms(), panel)?;
    let mut t = Table::new(
        "coverage",
        "Linked-firm coverage by year",
        vec!["linked firms".into(), "all firms".into(), "% of firms".into(), "% of June ME".into()],
    );
    for row in rows {
        t.push(
            row.year.to_string(),
            vec![
                Cell::count(row.linked_firms),
                Cell::count(row.universe_firms),
                Cell::pct(row.firm_fraction),
                Cell::pct(row.me_fraction),
            ],
        );
    }
    let mut notes = Table::new("diagnostics", "Ingest and signal diagnostics", vec!["rows read".into(), "accepted".into(), "rejected".into()]);
    for rep in &c.p.data.ingest {
        let name = std::path::Path::new(&rep.source)
            .file_name()
            .map_or(rep.source.clone(), |n| n.to_string_lossy().into_owned());
        notes.push(
            name,
            vec![Cell::count(rep.rows_read), Cell::count(rep.accepted), Cell::count(rep.rejected.len())],
        );
    }
    for n in &c.p.notes {
        notes.note(n.clone());
    }
    r.push(t);
    r.push(notes);
    Ok(r)
}

fn subperiods(c: &Ctx) -> Vec<(Month, Month)> {
    if !c.s.subperiods.is_empty() {
        return c.s.subperiods.clone();
    }
    let periods: Vec<Ordinal> = c.monthly().periods().collect();
    match (periods.first(), periods.last()) {
        (Some(&a), Some(&b)) if b > a => {
            let mid = a + (b - a) / 2;
            vec![(Month(a), Month(mid)), (Month(mid + 1), Month(b))]
        }
        _ => Vec::new(),
    }
}

pub fn sort(c: &Ctx) -> Result<Report> {
    let mut r = c.report("sort");
    let n = c.s.sort_spec.n_buckets();
    let cmom11 = cmom_name(one_one());
    for &w in &c.s.weightings {
        let mut t = Table::new(
            format!("lags_{w}"),
            format!("Customer momentum {} portfolios by lag window ({})", if n == 10 { "decile" } else { "quintile" }, w.as_str().to_uppercase()),
            bucket_columns(n),
        );
        for lag in &c.s.lags {
            let series = c.sort(&cmom_name(*lag), c.s.sort_spec, w)?;
            c.push_sort(&mut t, format!("cmom {lag}"), &series);
        }
        r.push(t);

        let mut t = Table::new(format!("quintiles_{w}"), format!("Customer momentum 1-1 quintiles ({})", w.as_str().to_uppercase()), bucket_columns(5));
        match c.sort(&cmom11, c.s.quintile_spec, w) {
            Ok(series) => {
                c.push_sort(&mut t, "cmom 1-1", &series);
            }
            Err(e) => skip(&mut t, "quintile sort", &e),
        }
        r.push(t);

        let base = c.sort(&cmom11, c.s.sort_spec, w)?;
        let mut t = Table::new(format!("subperiods_{w}"), format!("Customer momentum 1-1 by subperiod ({})", w.as_str().to_uppercase()), bucket_columns(n));
        for (a, b) in subperiods(c) {
            c.push_sort(&mut t, format!("{a} to {b}"), &base.between(a.0, b.0));
        }
        r.push(t);

        let mask = restrict_by_ratio(&c.p.aggregates, c.cfg.rel_size_cap);
        let mut t = Table::new(
            format!("small_customers_{w}"),
            format!("Customer momentum 1-1 quintiles, relative customer size at most {} ({})", c.cfg.rel_size_cap, w.as_str().to_uppercase()),
            bucket_columns(5),
        );
        // The restricted universe is a small slice of suppliers, so quintiles.
        match form_portfolios(c.monthly(), &c.p.signals, &cmom11, SortOptions::new(c.s.quintile_spec, w).with_mask(&mask)) {
            Ok(series) => {
                c.push_sort(&mut t, "cmom 1-1", &series);
            }
            Err(e) => skip(&mut t, "restricted sort", &e),
        }
        r.push(t);

        let mut t = Table::new(format!("customer_news_{w}"), format!("Sorts on customer earnings news ({})", w.as_str().to_uppercase()), bucket_columns(n));
        for sig in [CUST_SUE, CUST_CAR3] {
            if !c.p.signals.contains(sig) {
                t.note(format!("{sig} unavailable"));
                continue;
            }
            match c.sort(sig, c.s.sort_spec, w) {
                Ok(series) => {
                    c.push_sort(&mut t, sig, &series);
                }
                Err(e) => skip(&mut t, sig, &e),
            }
        }
        r.push(t);
    }

    let mut t = Table::new(
        "daily_horizons",
        "Daily customer momentum long-short by holding horizon (EW)",
        c.cfg.daily_horizons.iter().map(|h| format!("{h}d")).collect(),
    );
    match (&c.p.data.daily, &c.p.daily_signals) {
        (Some(d), Some(ds)) => {
            for lag in &c.s.daily_lags {
                let mut means = Vec::new();
                let mut ts = Vec::new();
                for h in &c.cfg.daily_horizons {
                    let opts = SortOptions::new(c.s.sort_spec, Weighting::Equal).with_horizon(*h);
                    match form_portfolios(&d.panel, ds, &cmom_name(*lag), opts) {
                        Ok(series) => {
                            let ls: Vec<f64> = series.long_short().into_iter().map(|x| x.1).collect();
                            let (m, t) = c.mean_cells(&ls, Frequency::Daily);
                            means.push(m);
                            ts.push(t);
                        }
                        Err(e) => {
                            means.push(Cell::Empty);
                            ts.push(Cell::Empty);
                            t.note(format!("cmom {lag} at {h}d: {e}"));
                        }
                    }
                }
                t.push(format!("cmom {lag}"), means);
                t.push("", ts);
            }
        }
        _ => t.note("no daily data"),
    }
    r.push(t);
    Ok(r)
}

pub fn alpha(c: &Ctx) -> Result<Report> {
    let mut r = c.report("alpha");
    let n = c.s.sort_spec.n_buckets();
    let cmom11 = cmom_name(one_one());
    for &w in &c.s.weightings {
        let series = c.sort(&cmom11, c.s.sort_spec, w)?;
        let mut t = Table::new(
            format!("cmom_{w}"),
            format!("Customer momentum 1-1 alphas, monthly % ({})", w.as_str().to_uppercase()),
            bucket_columns(n),
        );
        for model in &c.s.models {
            let mut coefs = Vec::new();
            let mut ts = Vec::new();
            for b in 1..=n + 1 {
                let (asset, excess) = if b <= n {
                    (to_map(series.bucket(b)), true)
                } else {
                    (to_map(series.long_short()), false)
                };
                let reg = alpha_regression(&asset, excess, *model, &c.p.factors, c.nw())?;
                let i = reg.index_of(ALPHA).expect("intercept");
                coefs.push(Cell::pct_stars(Some(reg.coef[i]), c.stars(reg.t[i])));
                ts.push(Cell::t(reg.t[i]));
            }
            t.push(model.label(), coefs);
            t.push("", ts);
        }
        r.push(t);

        let mut t = Table::new(
            format!("customer_news_{w}"),
            format!("Long-short alphas of customer earnings-news sorts, monthly % ({})", w.as_str().to_uppercase()),
            vec![CUST_SUE.into(), CUST_CAR3.into()],
        );
        let mut legs: Vec<Option<Series>> = Vec::new();
        for sig in [CUST_SUE, CUST_CAR3] {
            let leg = if c.p.signals.contains(sig) {
                match c.sort(sig, c.s.sort_spec, w) {
                    Ok(s) => Some(to_map(s.long_short())),
                    Err(e) => {
                        skip(&mut t, sig, &e);
                        None
                    }
                }
            } else {
                t.note(format!("{sig} unavailable"));
                None
            };
            legs.push(leg);
        }
        if legs.iter().any(Option::is_some) {
            for model in &c.s.models {
                let mut coefs = Vec::new();
                let mut ts = Vec::new();
                for leg in &legs {
                    match leg {
                        Some(l) => {
                            let reg = alpha_regression(l, false, *model, &c.p.factors, c.nw())?;
                            let i = reg.index_of(ALPHA).expect("intercept");
                            coefs.push(Cell::pct_stars(Some(reg.coef[i]), c.stars(reg.t[i])));
                            ts.push(Cell::t(reg.t[i]));
                        }
                        None => {
                            coefs.push(Cell::Empty);
                            ts.push(Cell::Empty);
                        }
                    }
                }
                t.push(model.label(), coefs);
                t.push("", ts);
            }
        }
        r.push(t);
    }
    Ok(r)
}

/// Factors in report order: constructed first, then the published set.
fn factor_names(c: &Ctx) -> Vec<String> {
    let mut names: Vec<String> = [CMOM, UMD, SUEF, CAR3F, MKT_RF, SMB, HML, RMW, CMA]
        .iter()
        .filter(|n| c.p.factors.contains(n))
        .map(|n| n.to_string())
        .collect();
    for n in c.p.factors.names() {
        if n != crate::factors::RF && !names.iter().any(|m| m == n) {
            names.push(n.to_owned());
        }
    }
    names
}

pub fn factors(c: &Ctx) -> Result<Report> {
    let mut r = c.report("factors");
    if !c.p.built.iter().any(|n| n == CMOM) {
        return Err(Error::NoValidPeriods("CMOM factor could not be built".into()));
    }
    let names = factor_names(c);
    let mut t = Table::new("returns", "Monthly factor returns, %", names.clone());
    let periods: std::collections::BTreeSet<Ordinal> = names
        .iter()
        .flat_map(|n| c.p.factors.get(n).into_iter().flat_map(|s| s.keys().copied()))
        .collect();
    for p in periods {
        t.push(
            Timeline::Monthly.label(p),
            names
                .iter()
                .map(|n| Cell::pct(c.p.factors.get(n).and_then(|s| s.get(&p)).copied()))
                .collect(),
        );
    }
    t.note(format!("built from signals: {}", c.p.built.join(", ")));
    r.push(t);
    Ok(r)
}

pub fn spanning(c: &Ctx) -> Result<Report> {
    let mut r = c.report("spanning");
    let sets: [(&str, &[&str]); 5] = [
        ("FF3", &[MKT_RF, SMB, HML]),
        ("FF3+UMD", &[MKT_RF, SMB, HML, UMD]),
        ("FF5", &[MKT_RF, SMB, HML, RMW, CMA]),
        ("FF5+UMD", &[MKT_RF, SMB, HML, RMW, CMA, UMD]),
        ("FF5+UMD+earnings", &[MKT_RF, SMB, HML, RMW, CMA, UMD, SUEF, CAR3F]),
    ];
    let targets: Vec<&str> = [CMOM, UMD, SUEF, CAR3F]
        .into_iter()
        .filter(|n| c.p.factors.contains(n))
        .collect();
    if !targets.contains(&CMOM) {
        return Err(Error::NoValidPeriods("CMOM factor could not be built".into()));
    }
    for target in targets {
        let y = c.p.factors.get(target).expect("filtered");
        let mut specs: Vec<(&str, Vec<&str>)> = Vec::new();
        for (label, set) in sets {
            let rhs: Vec<&str> = set.iter().copied().filter(|f| *f != target).collect();
            let missing = c.p.factors.missing(&rhs);
            if !missing.is_empty() {
                if label == "FF3" {
                    return Err(Error::MissingFactors(missing.into_iter().map(str::to_owned).collect()));
                }
                continue;
            }
            if specs.iter().any(|(_, r)| *r == rhs) {
                continue;
            }
            specs.push((label, rhs));
        }
        let mut columns: Vec<String> = vec![ALPHA.into()];
        for (_, rhs) in &specs {
            for f in rhs {
                if !columns.iter().any(|c| c == f) {
                    columns.push(f.to_string());
                }
            }
        }
        let n_coef = columns.len();
        columns.push("adj. R²".into());
        columns.push("N".into());
        let mut t = Table::new(
            target.to_ascii_lowercase(),
            format!("Spanning regressions of {target} (alpha in monthly %)"),
            columns.clone(),
        );
        for (label, rhs) in &specs {
            let series: Vec<(&str, &Series)> = rhs
                .iter()
                .map(|f| (*f, c.p.factors.get(f).expect("checked")))
                .collect();
            let reg = spanning_test(y, &series, c.nw())?;
            let mut coefs = vec![Cell::Empty; n_coef + 2];
            let mut ts = vec![Cell::Empty; n_coef + 2];
            for (j, name) in columns[..n_coef].iter().enumerate() {
                if let Some(i) = reg.index_of(name) {
                    let st = c.stars(reg.t[i]);
                    coefs[j] = if j == 0 {
                        Cell::pct_stars(Some(reg.coef[i]), st)
                    } else {
                        Cell::num_stars(Some(reg.coef[i]), 2, st)
                    };
                    ts[j] = Cell::t(reg.t[i]);
                }
            }
            coefs[n_coef] = Cell::num(Some(reg.adj_r2), 2);
            coefs[n_coef + 1] = Cell::count(reg.n_obs);
            t.push(*label, coefs);
            t.push("", ts);
        }
        r.push(t);
    }
    Ok(r)
}

fn fm_table(c: &Ctx, id: &str, title: &str, specs: &[Vec<String>], common_sample: bool) -> Result<Table> {
    let available: Vec<Vec<String>> = specs
        .iter()
        .filter(|s| s.iter().all(|n| n.split('*').all(|p| c.p.signals.contains(p.trim()))))
        .cloned()
        .collect();
    let mut names: Vec<String> = vec![INTERCEPT.into()];
    for s in &available {
        for n in s {
            if !names.contains(n) {
                names.push(n.clone());
            }
        }
    }
    let sample: Vec<String> = if common_sample {
        names[1..].iter().filter(|n| !n.contains('*')).cloned().collect()
    } else {
        Vec::new()
    };
    let columns: Vec<String> = (1..=available.len()).map(|i| format!("({i})")).collect();
    let mut t = Table::new(id, title, columns);
    let mut reports: Vec<FmReport> = Vec::new();
    for spec in &available {
        reports.push(fama_macbeth(c.monthly(), &c.p.signals, spec, &sample, c.s.fm_se)?);
    }
    for n in &names {
        let mut coefs = Vec::new();
        let mut ts = Vec::new();
        for rep in &reports {
            match rep.index_of(n) {
                Some(i) => {
                    coefs.push(Cell::num_stars(Some(rep.mean[i]), 3, c.stars(rep.t[i])));
                    ts.push(Cell::t(rep.t[i]));
                }
                None => {
                    coefs.push(Cell::Empty);
                    ts.push(Cell::Empty);
                }
            }
        }
        t.push(n.clone(), coefs);
        t.push("", ts);
    }
    t.push("mean adj. R²", reports.iter().map(|r| Cell::num(Some(r.mean_adj_r2), 3)).collect());
    t.push("pooled R²", reports.iter().map(|r| Cell::num(r.pooled_r2, 3)).collect());
    t.push("periods", reports.iter().map(|r| Cell::count(r.n_periods)).collect());
    t.push("observations", reports.iter().map(|r| Cell::count(r.n_obs)).collect());
    if let Some(r) = reports.first() {
        t.note(format!("slope standard errors: {}", r.se_kind));
    }
    if available.len() < specs.len() {
        t.note(format!("{} specification(s) skipped for missing signals", specs.len() - available.len()));
    }
    Ok(t)
}

pub fn fm(c: &Ctx) -> Result<Report> {
    let mut r = c.report("fm");
    let cm = cmom_name(one_one());
    let m11 = mom_name(one_one());
    let m122 = mom_name(twelve_two());
    let v = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect::<Vec<_>>();
    let specs = vec![
        v(&[&cm]),
        v(&[&cm, &m11]),
        v(&[&cm, &m122]),
        v(&[&cm, &m11, &m122, LOG_ME, LOG_BM]),
        v(&[&cm, &m11, &m122, LOG_ME, LOG_BM, OP]),
        v(&[&cm, &m11, &m122, LOG_ME, LOG_BM, OP, SUE, CAR3]),
    ];
    r.push(fm_table(c, "characteristics", "Fama-MacBeth regressions of returns on characteristics", &specs, true)?);
    let inter = format!("{cm}*{REL_SIZE}");
    let specs = vec![
        v(&[&cm, REL_SIZE, &inter]),
        v(&[&cm, REL_SIZE, &inter, LOG_ME, &m122]),
    ];
    r.push(fm_table(c, "relative_size", "Fama-MacBeth regressions with the customer-momentum × relative-size interaction", &specs, false)?);
    Ok(r)
}

fn double_sort_rows(c: &Ctx, panel: &ReturnPanel, signals: &SignalPanel, outer: &str, inner: &str, opts: SortOptions, freq: Frequency) -> Result<(Vec<Cell>, Vec<Cell>)> {
    let ds = conditional_double_sort(panel, signals, outer, 5, inner, opts)?;
    let mut means = Vec::new();
    let mut ts = Vec::new();
    for s in &ds.by_outer {
        let ls: Vec<f64> = s.long_short().into_iter().map(|x| x.1).collect();
        let (m, t) = c.mean_cells(&ls, freq);
        means.push(m);
        ts.push(t);
    }
    let d: Vec<f64> = ds.low_minus_high().into_iter().map(|x| x.1).collect();
    let (m, t) = c.mean_cells(&d, freq);
    means.push(m);
    ts.push(t);
    Ok((means, ts))
}

/// Quintile inner sort with breakpoints recomputed inside every outer bucket.
fn inner_spec() -> BreakpointSpec {
    BreakpointSpec::per_period(5).expect("valid spec")
}

pub fn doublesort(c: &Ctx) -> Result<Report> {
    let mut r = c.report("doublesort");
    let cm = cmom_name(one_one());
    let cols: Vec<String> = (1..=5).map(|q| format!("Q{q}")).chain(["Q1-Q5".to_owned()]).collect();
    for (outer, id, title) in [
        (REL_SIZE, "relative_size", "Customer momentum 1-1 long-short within relative customer size quintiles"),
        (LOG_ME, "size", "Customer momentum 1-1 long-short within supplier size quintiles"),
    ] {
        let mut t = Table::new(id, title, cols.clone());
        for &w in &c.s.weightings {
            match double_sort_rows(c, c.monthly(), &c.p.signals, outer, &cm, SortOptions::new(inner_spec(), w), Frequency::Monthly) {
                Ok((m, ts)) => {
                    t.push(w.as_str().to_uppercase(), m);
                    t.push("", ts);
                }
                Err(e) => skip(&mut t, w.as_str(), &e),
            }
        }
        r.push(t);
    }

    let mut t = Table::new(
        "attention_daily",
        "Daily customer momentum: low-NAV minus high-NAV long-short by horizon (EW)",
        c.cfg.daily_horizons.iter().map(|h| format!("{h}d")).collect(),
    );
    match (&c.p.data.daily, &c.p.daily_signals) {
        (Some(d), Some(ds)) if ds.contains(NAV) => {
            for lag in &c.s.daily_lags {
                let mut means = Vec::new();
                let mut ts = Vec::new();
                for h in &c.cfg.daily_horizons {
                    let opts = SortOptions::new(inner_spec(), Weighting::Equal).with_horizon(*h);
                    match conditional_double_sort(&d.panel, ds, NAV, 5, &cmom_name(*lag), opts) {
                        Ok(res) => {
                            let v: Vec<f64> = res.low_minus_high().into_iter().map(|x| x.1).collect();
                            let (m, tt) = c.mean_cells(&v, Frequency::Daily);
                            means.push(m);
                            ts.push(tt);
                        }
                        Err(e) => {
                            means.push(Cell::Empty);
                            ts.push(Cell::Empty);
                            t.note(format!("cmom {lag} at {h}d: {e}"));
                        }
                    }
                }
                t.push(format!("cmom {lag}"), means);
                t.push("", ts);
            }
        }
        _ => t.note("no daily data or no NAV events"),
    }
    r.push(t);
    Ok(r)
}

fn summary_row(st: &SummaryStats, as_percent: bool) -> Vec<Cell> {
    let v = |x: f64| if as_percent { Cell::pct(Some(x)) } else { Cell::num(Some(x), 3) };
    vec![
        v(st.mean),
        v(st.se),
        Cell::t(st.t),
        v(st.sd),
        v(st.min),
        v(st.p05),
        v(st.p25),
        v(st.p50),
        v(st.p75),
        v(st.p95),
        v(st.max),
        if as_percent { Cell::num(st.sharpe, 2) } else { Cell::Empty },
        Cell::count(st.n),
    ]
}

fn summary_columns() -> Vec<String> {
    ["mean", "SE", "t", "SD", "min", "p5", "p25", "p50", "p75", "p95", "max", "Sharpe", "N"]
        .iter()
        .map(|s| s.to_string())
        .collect()
}

pub fn summary(c: &Ctx) -> Result<Report> {
    let mut r = c.report("summary");
    let mut t = Table::new("long_short", "Customer momentum long-short portfolios, monthly %", summary_columns());
    for &w in &c.s.weightings {
        for lag in &c.s.lags {
            let series = c.sort(&cmom_name(*lag), c.s.sort_spec, w)?;
            let v: Vec<f64> = series.long_short().into_iter().map(|x| x.1).collect();
            match summary_stats(&v, Frequency::Monthly, c.cfg.nw_lags) {
                Ok(st) => t.push(format!("{} cmom {lag}", w.as_str().to_uppercase()), summary_row(&st, true)),
                Err(e) => skip(&mut t, &format!("{w} cmom {lag}"), &e),
            }
        }
    }
    r.push(t);

    let mut t = Table::new("factors", "Factor returns, monthly %", summary_columns());
    for n in factor_names(c) {
        let v: Vec<f64> = c.p.factors.get(&n).map(|s| s.values().copied().collect()).unwrap_or_default();
        match summary_stats(&v, Frequency::Monthly, c.cfg.nw_lags) {
            Ok(st) => t.push(n, summary_row(&st, true)),
            Err(e) => skip(&mut t, &n, &e),
        }
    }
    r.push(t);

    let mut t = Table::new("characteristics", "Firm-month signal distribution", summary_columns());
    for n in [cmom_name(one_one()).as_str(), REL_SIZE, LOG_ME, LOG_BM, OP, SUE, CAR3, CUST_SUE, CUST_CAR3] {
        if !c.p.signals.contains(n) {
            continue;
        }
        match summary_stats(&c.p.signals.values_of(n), Frequency::Monthly, Some(0)) {
            Ok(st) => t.push(n, summary_row(&st, false)),
            Err(e) => skip(&mut t, n, &e),
        }
    }
    t.note("pooled over firm-months; SE and t treat observations as independent");
    r.push(t);
    Ok(r)
}

pub fn corr(c: &Ctx) -> Result<Report> {
    let mut r = c.report("corr");
    let names = factor_names(c);
    let series: Vec<(String, Series)> = names
        .iter()
        .map(|n| (n.clone(), c.p.factors.get(n).cloned().unwrap_or_default()))
        .collect();
    let m = correlation_matrix(&series, &c.s.correlation_stars);
    let mut t = Table::new("factors", "Factor correlations", names.clone());
    for (i, row) in m.cells.iter().enumerate() {
        let mut cells = vec![Cell::Empty; names.len()];
        for (j, cell) in row.iter().enumerate() {
            if let Some(x) = cell {
                cells[j] = Cell::num_stars(Some(x.rho), 2, x.stars);
            }
        }
        t.push(names[i].clone(), cells);
    }
    t.note(format!("stars at p < {:?}", c.s.correlation_stars.levels()));
    r.push(t);
    Ok(r)
}

pub fn growth(c: &Ctx) -> Result<Report> {
    let mut r = c.report("growth");
    let (Some(cmom), Some(umd)) = (c.p.factors.get(CMOM), c.p.factors.get(UMD)) else {
        return Err(Error::MissingFactors(
            [CMOM, UMD].iter().filter(|n| !c.p.factors.contains(n)).map(|s| s.to_string()).collect(),
        ));
    };
    let common: Vec<Ordinal> = cmom.keys().filter(|p| umd.contains_key(p)).copied().collect();
    let pick = |s: &Series| common.iter().map(|p| (*p, s[p])).collect::<Vec<_>>();
    let umd_v: Vec<f64> = common.iter().map(|p| umd[p]).collect();
    let umd_sd = crate::econometrics::sample_sd(&umd_v);
    let g_cmom = growth_of_dollar(&pick(cmom), (umd_sd > 0.0).then_some(umd_sd));
    let g_umd = growth_of_dollar(&pick(umd), None);
    let mut t = Table::new("factors", "Growth of $1: CMOM (scaled to UMD volatility) and UMD", vec![CMOM.into(), UMD.into()]);
    let a: Series = g_cmom.points.iter().copied().collect();
    let b: Series = g_umd.points.iter().copied().collect();
    for p in &common {
        t.push(Timeline::Monthly.label(*p), vec![Cell::num(a.get(p).copied(), 4), Cell::num(b.get(p).copied(), 4)]);
    }
    t.note(format!("CMOM returns scaled by {:.4}", g_cmom.scale));
    if g_cmom.truncated || g_umd.truncated {
        t.note("a series lost all value and is cut at that month");
    }
    r.push(t);

    let cm = cmom_name(one_one());
    let mut legs = Vec::new();
    for &w in &c.s.weightings {
        let s = c.sort(&cm, c.s.sort_spec, w)?;
        legs.push((w, growth_of_dollar(&s.long_short(), None)));
    }
    let mut t = Table::new(
        "long_short",
        "Growth of $1 in the customer momentum 1-1 long-short portfolio",
        legs.iter().map(|(w, _)| w.as_str().to_uppercase()).collect(),
    );
    let maps: Vec<Series> = legs.iter().map(|(_, g)| g.points.iter().copied().collect()).collect();
    let periods: std::collections::BTreeSet<Ordinal> = maps.iter().flat_map(|m| m.keys().copied()).collect();
    for p in periods {
        t.push(Timeline::Monthly.label(p), maps.iter().map(|m| Cell::num(m.get(&p).copied(), 4)).collect());
    }
    r.push(t);
    Ok(r)
}
