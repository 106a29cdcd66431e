//! Loading a data directory and deriving every signal and factor a study
//! command may need.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::sync::Arc;

use super::config::{Settings, StudyConfig};
use crate::error::{Error, Result};
use crate::factors::{build_factor, FactorSet, MKT_RF, RF, UMD};
use crate::links::{customer_aggregates, lag_links, CustomerAggregate, LagConfig};
use crate::panel::{
    filter_panel, ingest_returns, read_announcements, read_calendar, read_characteristics,
    read_links, read_market, AnnouncementTable, CharacteristicTable, IngestOptions, IngestReport,
    LinkTable, LinksFile, MarketSeries, OverlapPolicy, ReturnPanel,
};
use crate::period::{Month, Ordinal, Timeline};
use crate::signals::{
    aggregate_states, customer_momentum_signal, earnings_states, momentum_signal, nav_states,
    standard_characteristics, LagWindow, SignalPanel, CAR3, SUE,
};
use crate::synth::{
    ANNOUNCEMENTS_FILE, CALENDAR_FILE, CHARACTERISTICS_FILE, FACTORS_FILE, LINKS_FILE,
    MARKET_DAILY_FILE, MARKET_FILE, RETURNS_DAILY_FILE, RETURNS_FILE,
};

pub const CMOM: &str = "CMOM";
pub const SUEF: &str = "SUEF";
pub const CAR3F: &str = "CAR3F";

#[derive(Debug, Clone)]
pub struct DailyData {
    pub panel: ReturnPanel,
    pub market: MarketSeries,
}

/// Inputs as read from the data directory, restricted to the date range.
#[derive(Debug, Clone)]
pub struct StudyData {
    pub monthly: ReturnPanel,
    pub links: LinkTable,
    pub announcements: Option<AnnouncementTable>,
    pub market: Option<MarketSeries>,
    /// Published factors, plus MKT-RF and RF derived from the market file
    /// when the factor file lacks them.
    pub factors: FactorSet,
    pub characteristics: Option<CharacteristicTable>,
    pub daily: Option<DailyData>,
    pub ingest: Vec<IngestReport>,
}

fn optional(dir: &Path, name: &str) -> Option<std::path::PathBuf> {
    let p = dir.join(name);
    p.is_file().then_some(p)
}

fn in_range(month: Month, s: &Settings) -> bool {
    s.from.is_none_or(|f| month >= f) && s.to.is_none_or(|t| month <= t)
}

impl StudyData {
    pub fn load(cfg: &StudyConfig, s: &Settings) -> Result<Self> {
        let dir = &cfg.data_dir;
        if !dir.is_dir() {
            return Err(Error::Config(format!("data directory {} does not exist", dir.display())));
        }
        let mut ingest = Vec::new();
        let (monthly, rep) = ingest_returns(&dir.join(RETURNS_FILE), Timeline::Monthly, &IngestOptions::default())?;
        ingest.push(rep);
        let (lo, hi) = match (monthly.periods().next(), monthly.periods().last()) {
            (Some(a), Some(b)) => (a, b),
            _ => return Err(Error::Invalid(format!("{} has no usable rows", RETURNS_FILE))),
        };
        let monthly = filter_panel(
            &monthly,
            s.from.map_or(lo, |m| m.0.max(lo)),
            s.to.map_or(hi, |m| m.0.min(hi)),
        )?;
        if monthly.is_empty() {
            return Err(Error::Invalid("no return observations inside the date range".into()));
        }

        let (links, rep) = read_links(&dir.join(LINKS_FILE), OverlapPolicy::Reject)?;
        ingest.push(rep);
        let links = match links {
            LinksFile::Raw(raw) => lag_links(
                &raw,
                LagConfig {
                    lag_months: cfg.link_lag_months,
                    expiry_months: cfg.link_expiry_months,
                },
            )?,
            LinksFile::Effective(t) => t,
        };

        let announcements = match optional(dir, ANNOUNCEMENTS_FILE) {
            Some(p) => {
                let (a, rep) = read_announcements(&p)?;
                ingest.push(rep);
                Some(a)
            }
            None => None,
        };
        let market = optional(dir, MARKET_FILE)
            .map(|p| read_market(&p, Timeline::Monthly))
            .transpose()?;
        let mut factors = match optional(dir, FACTORS_FILE) {
            Some(p) => FactorSet::read_csv(&p, Timeline::Monthly)?,
            None => FactorSet::new(Timeline::Monthly),
        };
        if let Some(m) = &market {
            if !factors.contains(MKT_RF) {
                factors.insert(
                    MKT_RF,
                    m.points().iter().map(|(p, x)| (*p, x.market_return - x.risk_free)).collect(),
                );
            }
            if !factors.contains(RF) {
                factors.insert(RF, m.points().iter().map(|(p, x)| (*p, x.risk_free)).collect());
            }
        }
        let characteristics = optional(dir, CHARACTERISTICS_FILE)
            .map(|p| read_characteristics(&p))
            .transpose()?;

        let daily = match (
            optional(dir, CALENDAR_FILE),
            optional(dir, RETURNS_DAILY_FILE),
            optional(dir, MARKET_DAILY_FILE),
        ) {
            (Some(c), Some(r), Some(m)) => {
                let timeline = Timeline::Daily(Arc::new(read_calendar(&c)?));
                let (panel, rep) = ingest_returns(&r, timeline.clone(), &IngestOptions::default())?;
                ingest.push(rep);
                let panel = panel.retain(|o| {
                    timeline.month_of(o.period).is_some_and(|m| in_range(m, s))
                });
                let market = read_market(&m, timeline)?;
                (!panel.is_empty()).then_some(DailyData { panel, market })
            }
            _ => None,
        };

        Ok(Self {
            monthly,
            links,
            announcements,
            market,
            factors,
            characteristics,
            daily,
            ingest,
        })
    }

    /// Firms appearing on either side of any link.
    pub fn linked_firms(&self) -> BTreeSet<String> {
        self.links
            .links()
            .iter()
            .flat_map(|l| [l.supplier.clone(), l.customer.clone()])
            .collect()
    }

    /// Risk-free rate by month, from the factor file or the market file.
    pub fn risk_free(&self) -> BTreeMap<Ordinal, f64> {
        self.factors.get(RF).cloned().unwrap_or_default()
    }
}

/// Data plus all derived signals and factors.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub data: StudyData,
    pub aggregates: Vec<CustomerAggregate>,
    /// Monthly sort signals, stamped at the return they predict.
    pub signals: SignalPanel,
    /// Published factors plus the ones built here.
    pub factors: FactorSet,
    /// Names of factors built from signals, in construction order.
    pub built: Vec<String>,
    pub daily_signals: Option<SignalPanel>,
    pub notes: Vec<String>,
}

fn with_defaults(windows: &[LagWindow], extra: &[LagWindow]) -> Vec<LagWindow> {
    let mut out = windows.to_vec();
    for w in extra {
        if !out.contains(w) {
            out.push(*w);
        }
    }
    out
}

pub fn one_one() -> LagWindow {
    LagWindow::new(1, 1).expect("valid window")
}

pub fn twelve_two() -> LagWindow {
    LagWindow::new(12, 2).expect("valid window")
}

impl Prepared {
    pub fn new(data: StudyData, s: &Settings, winsorize: Option<f64>) -> Result<Self> {
        let monthly = &data.monthly;
        let mut notes = Vec::new();

        let earnings = match &data.announcements {
            Some(a) => {
                let daily = data.daily.as_ref().map(|d| (&d.panel, &d.market));
                let (states, diag) = earnings_states(monthly, a, daily)?;
                notes.push(format!(
                    "earnings: {} SUE computed, {} absent; {} CAR3 computed, {} absent",
                    diag.sue_computed,
                    diag.sue_absent.values().sum::<usize>(),
                    diag.car3_computed,
                    diag.car3_absent.values().sum::<usize>()
                ));
                Some(states)
            }
            None => {
                notes.push("no announcements file: SUE, CAR3 and their factors are skipped".into());
                None
            }
        };
        let aggregates = customer_aggregates(monthly, &data.links, earnings.as_ref());

        let mut signals = SignalPanel::new(monthly);
        for w in with_defaults(&s.lags, &[one_one(), twelve_two()]) {
            signals.extend(momentum_signal(monthly, w)?)?;
        }
        for w in with_defaults(&s.lags, &[one_one()]) {
            signals.extend(customer_momentum_signal(monthly, &aggregates, w)?)?;
        }
        if let Some(e) = &earnings {
            signals.extend(e.lagged(1))?;
        }
        signals.extend(aggregate_states(monthly, &aggregates)?.lagged(1))?;
        signals.extend(standard_characteristics(monthly, data.characteristics.as_ref())?.lagged(1))?;
        if let Some(p) = winsorize {
            let names: Vec<String> = signals.names().map(str::to_owned).collect();
            for n in names {
                signals.winsorize(&n, p)?;
            }
        }

        let mut factors = data.factors.clone();
        let mut built = Vec::new();
        let mut specs = vec![(crate::signals::cmom_name(one_one()), CMOM)];
        if !factors.contains(UMD) {
            specs.push((crate::signals::mom_name(twelve_two()), UMD));
        }
        specs.push((SUE.to_owned(), SUEF));
        specs.push((CAR3.to_owned(), CAR3F));
        for (signal, name) in specs {
            if !signals.contains(&signal) {
                continue;
            }
            match build_factor(monthly, &signals, &signal, name) {
                Ok(f) if !f.values.is_empty() => {
                    if !f.absent_periods.is_empty() {
                        notes.push(format!(
                            "{name}: {} periods without a full 2x3 grid",
                            f.absent_periods.len()
                        ));
                    }
                    factors.insert(name, f.values);
                    built.push(name.to_owned());
                }
                Ok(_) => notes.push(format!("{name}: no period with a full 2x3 grid")),
                Err(e) => notes.push(format!("{name}: {e}")),
            }
        }

        let daily_signals = match &data.daily {
            Some(d) => {
                let daily_aggs = customer_aggregates(&d.panel, &data.links, None);
                let mut ds = SignalPanel::new(&d.panel);
                for w in &s.daily_lags {
                    ds.extend(customer_momentum_signal(&d.panel, &daily_aggs, *w)?)?;
                }
                if let Some(a) = &data.announcements {
                    let nav = nav_states(&d.panel, &data.links, a)?;
                    notes.push(format!(
                        "nav: {} computed, {} absent",
                        nav.computed,
                        nav.absent.values().sum::<usize>()
                    ));
                    ds.extend(nav.states.lagged(1))?;
                }
                Some(ds)
            }
            None => None,
        };

        Ok(Self {
            data,
            aggregates,
            signals,
            factors,
            built,
            daily_signals,
            notes,
        })
    }
}
