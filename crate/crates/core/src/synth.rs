//! Seeded synthetic markets with planted customer-momentum, lead-lag and
//! attention effects.
//!
//! All randomness comes from one ChaCha8 stream seeded by `seed`, consumed
//! in a fixed order, so a (seed, config) pair always yields the same files.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use chrono::{Days, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::factors::{FactorSet, CMA, HML, MKT_RF, RF, RMW, SMB};
use crate::links::{lag_links, LagConfig, RawLink};
use crate::panel::write_returns;
use crate::panel::{
    Announcement, AnnouncementTable, CharacteristicRow, CharacteristicTable, Exchange, LinkTable,
    MarketPoint, MarketSeries, ReturnPanel, ReturnRecord,
};
use crate::period::{Month, Ordinal, Timeline, TradingCalendar};

pub const RETURNS_FILE: &str = "returns.csv";
pub const RETURNS_DAILY_FILE: &str = "returns_daily.csv";
pub const CALENDAR_FILE: &str = "calendar.csv";
pub const LINKS_FILE: &str = "links.csv";
pub const ANNOUNCEMENTS_FILE: &str = "announcements.csv";
pub const MARKET_FILE: &str = "market.csv";
pub const MARKET_DAILY_FILE: &str = "market_daily.csv";
pub const CHARACTERISTICS_FILE: &str = "characteristics.csv";
pub const FACTORS_FILE: &str = "factors.csv";
pub const TRUTH_FILE: &str = "truth.json";

/// Redraws allowed per firm-period when a draw would wipe out the firm.
const MAX_REDRAWS: usize = 100;
/// Supplier log-ME centre, in $ millions.
const SUPPLIER_LOG_ME: f64 = 6.2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DgpConfig {
    pub n_firms: usize,
    pub n_periods: usize,
    pub start_year: i32,
    /// Share of firms that act only as customers.
    pub customer_fraction: f64,
    /// Probabilities of a supplier having 1, 2, ... customers.
    pub customers_per_supplier: Vec<f64>,
    /// Annual probability that a given customer is replaced.
    pub link_churn: f64,
    /// Slope of supplier return on the lagged customer-portfolio return.
    pub beta_cmom: f64,
    /// Extra slope per unit of log relative customer size.
    pub beta_leadlag: f64,
    /// Same-period loading on the customer portfolio.
    pub link_comovement: f64,
    pub low_attention_fraction: f64,
    /// Extra months before low-attention suppliers react to customer news.
    pub attention_delay: u32,
    pub beta_mkt: f64,
    pub noise_sd: f64,
    pub customer_noise_sd: f64,
    pub market_mean: f64,
    pub market_sd: f64,
    pub risk_free: f64,
    /// Mean log gap between customer and supplier ME.
    pub log_size_gap: f64,
    pub log_size_sd: f64,
    pub nyse_fraction: f64,
    /// Announcement falls this many days (inclusive range) after quarter end.
    pub announcement_lag_days: (u32, u32),
    pub eps_shock_sd: f64,
    /// Daily log-return jump per unit of standardized earnings shock.
    pub earnings_jump: f64,
    pub daily: bool,
    pub daily_noise_sd: f64,
    /// Proportional volume spike of high-attention suppliers on customer
    /// announcement days.
    pub volume_spike: f64,
    pub seed: u64,
}

impl Default for DgpConfig {
    fn default() -> Self {
        Self {
            n_firms: 100,
            n_periods: 120,
            start_year: 2000,
            customer_fraction: 0.3,
            customers_per_supplier: vec![0.5, 0.3, 0.2],
            link_churn: 0.2,
            beta_cmom: 0.04,
            beta_leadlag: 0.0,
            link_comovement: 0.2,
            low_attention_fraction: 0.5,
            attention_delay: 0,
            beta_mkt: 1.0,
            noise_sd: 0.08,
            customer_noise_sd: 0.08,
            market_mean: 0.007,
            market_sd: 0.045,
            risk_free: 0.003,
            log_size_gap: 15f64.ln(),
            log_size_sd: 1.0,
            nyse_fraction: 0.4,
            announcement_lag_days: (20, 50),
            eps_shock_sd: 0.1,
            earnings_jump: 0.02,
            daily: false,
            daily_noise_sd: 0.01,
            volume_spike: 2.0,
            seed: 1,
        }
    }
}

impl DgpConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("synth: {m}")));
        if !(4..=9999).contains(&self.n_firms) {
            return bad("n_firms must lie in 4..=9999");
        }
        if self.n_periods < 2 {
            return bad("n_periods must be at least 2");
        }
        for (name, p) in [
            ("customer_fraction", self.customer_fraction),
            ("link_churn", self.link_churn),
            ("low_attention_fraction", self.low_attention_fraction),
            ("nyse_fraction", self.nyse_fraction),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(&format!("{name} must lie in [0, 1]"));
            }
        }
        for (name, sd) in [
            ("noise_sd", self.noise_sd),
            ("customer_noise_sd", self.customer_noise_sd),
            ("market_sd", self.market_sd),
            ("log_size_sd", self.log_size_sd),
            ("eps_shock_sd", self.eps_shock_sd),
            ("daily_noise_sd", self.daily_noise_sd),
        ] {
            if !(sd >= 0.0 && sd.is_finite()) {
                return bad(&format!("{name} must be a finite non-negative number"));
            }
        }
        let n_cust = self.n_customers();
        if n_cust == 0 || n_cust >= self.n_firms {
            return bad("customer_fraction leaves no customers or no suppliers");
        }
        let probs = &self.customers_per_supplier;
        if probs.is_empty()
            || probs.iter().any(|p| !(0.0..=1.0).contains(p))
            || (probs.iter().sum::<f64>() - 1.0).abs() > 1e-9
        {
            return bad("customers_per_supplier must be probabilities summing to 1");
        }
        if probs.len() > n_cust {
            return bad("customers_per_supplier allows more customers than exist");
        }
        let (lo, hi) = self.announcement_lag_days;
        if lo > hi || hi > 80 {
            return bad("announcement_lag_days must be an ordered range within 80 days");
        }
        if self.volume_spike < 0.0 || self.risk_free <= -1.0 {
            return bad("volume_spike must be non-negative and risk_free above -1");
        }
        Ok(())
    }

    fn n_customers(&self) -> usize {
        (self.n_firms as f64 * self.customer_fraction).round() as usize
    }

    /// Rough population gap between the linked-pair and random-pair return
    /// correlations implied by the same-period loading, ignoring ME drift.
    fn link_correlation_margin(&self) -> f64 {
        let k_mean: f64 = self
            .customers_per_supplier
            .iter()
            .enumerate()
            .map(|(i, p)| (i + 1) as f64 * p)
            .sum();
        let sm = (self.beta_mkt * self.market_sd).powi(2);
        let var_port = sm + self.customer_noise_sd.powi(2) / k_mean;
        let sens = self.beta_cmom + self.beta_leadlag * self.log_size_gap;
        let g = self.link_comovement;
        let var_s = sm + g * g * var_port + 2.0 * g * sm + sens * sens * var_port + self.noise_sd.powi(2);
        let corr_link = (sm + g * var_port) / (var_s * var_port).sqrt();
        let var_c = sm + self.customer_noise_sd.powi(2);
        let corr_random = sm / (var_s * var_c).sqrt();
        corr_link - corr_random
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroundTruth {
    pub generator: &'static str,
    pub engine_version: &'static str,
    pub config: DgpConfig,
    pub customers: Vec<String>,
    pub suppliers: Vec<String>,
    pub low_attention_suppliers: Vec<String>,
    /// Firm-periods whose first idiosyncratic draw was rejected.
    pub redraws: usize,
    pub link_correlation_margin: f64,
}

/// A generated market plus the ground truth that produced it.
#[derive(Debug, Clone)]
pub struct SynthMarket {
    pub monthly: ReturnPanel,
    pub daily: Option<ReturnPanel>,
    pub raw_links: Vec<RawLink>,
    pub links: LinkTable,
    pub announcements: AnnouncementTable,
    pub market: MarketSeries,
    pub market_daily: Option<MarketSeries>,
    pub characteristics: CharacteristicTable,
    pub factors: FactorSet,
    pub truth: GroundTruth,
}

struct Draws {
    rng: ChaCha8Rng,
}

impl Draws {
    fn normal(&mut self, mean: f64, sd: f64) -> f64 {
        if sd == 0.0 {
            return mean;
        }
        Normal::new(mean, sd).expect("validated sd").sample(&mut self.rng)
    }

    fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    fn index(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n)
    }

    fn categorical(&mut self, probs: &[f64]) -> usize {
        let u = self.uniform();
        let mut acc = 0.0;
        for (i, p) in probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return i;
            }
        }
        probs.len() - 1
    }
}

fn firm_name(i: usize) -> String {
    format!("F{:04}", i + 1)
}

fn month_last_day(m: Month) -> NaiveDate {
    m.plus(1).first_day() - Days::new(1)
}

/// Draws a return from `base + noise`, redrawing the noise while the result
/// would be at or below -100%.
fn bounded_return(d: &mut Draws, base: f64, sd: f64, redraws: &mut usize) -> Result<f64> {
    for attempt in 0..MAX_REDRAWS {
        let r = base + d.normal(0.0, sd);
        if r > -1.0 {
            if attempt > 0 {
                *redraws += 1;
            }
            return Ok(r);
        }
    }
    Err(Error::Generation(format!(
        "no return above -100% after {MAX_REDRAWS} draws (mean {base})"
    )))
}

struct EpsEvent {
    firm: usize,
    date: NaiveDate,
    eps: f64,
    /// Shock over the firm's shock SD.
    z: f64,
}

pub fn generate(cfg: &DgpConfig) -> Result<SynthMarket> {
    cfg.validate()?;
    let mut d = Draws {
        rng: ChaCha8Rng::seed_from_u64(cfg.seed),
    };
    let n = cfg.n_firms;
    let t_len = cfg.n_periods;
    let n_cust = cfg.n_customers();
    let start = Month::new(cfg.start_year, 1).expect("January");
    let end = start.plus(t_len as i32 - 1);
    let names: Vec<String> = (0..n).map(firm_name).collect();
    let is_customer = |f: usize| f < n_cust;

    // market
    let mkt: Vec<f64> = (0..t_len)
        .map(|_| d.normal(cfg.market_mean, cfg.market_sd).max(-0.9))
        .collect();
    let rf = cfg.risk_free;

    // firm attributes
    let mut log_me0 = Vec::with_capacity(n);
    let mut exchange = Vec::with_capacity(n);
    let mut low_attention = vec![false; n];
    for f in 0..n {
        let centre = if is_customer(f) {
            SUPPLIER_LOG_ME + cfg.log_size_gap
        } else {
            SUPPLIER_LOG_ME
        };
        log_me0.push(d.normal(centre, cfg.log_size_sd));
        exchange.push(if d.uniform() < cfg.nyse_fraction {
            Exchange::Nyse
        } else {
            Exchange::Other
        });
        if !is_customer(f) {
            low_attention[f] = d.uniform() < cfg.low_attention_fraction;
        }
    }

    // annual December-year-end link reports; the first report becomes
    // effective before the sample starts
    let mut raw_links = Vec::new();
    let first_fy = cfg.start_year - 2;
    let last_fy = end.year();
    for s in n_cust..n {
        let k = d.categorical(&cfg.customers_per_supplier) + 1;
        let mut set: Vec<usize> = Vec::with_capacity(k);
        while set.len() < k {
            let c = d.index(n_cust);
            if !set.contains(&c) {
                set.push(c);
            }
        }
        for fy in first_fy..=last_fy {
            if fy > first_fy {
                for slot in 0..set.len() {
                    if d.uniform() < cfg.link_churn {
                        loop {
                            let c = d.index(n_cust);
                            if !set.contains(&c) {
                                set[slot] = c;
                                break;
                            }
                            if set.len() == n_cust {
                                break;
                            }
                        }
                    }
                }
            }
            let mut sorted = set.clone();
            sorted.sort_unstable();
            for c in sorted {
                raw_links.push(RawLink {
                    supplier: names[s].clone(),
                    customer: names[c].clone(),
                    fy_end: Month::new(fy, 12).expect("December"),
                });
            }
        }
    }
    let links = lag_links(&raw_links, LagConfig::default())?;

    // active customers of each supplier in each sample month
    let mut active: Vec<Vec<Vec<usize>>> = vec![vec![Vec::new(); t_len]; n];
    for l in links.links() {
        let s: usize = names.binary_search(&l.supplier).expect("generated name");
        let c: usize = names.binary_search(&l.customer).expect("generated name");
        for (t, slot) in active[s].iter_mut().enumerate() {
            if l.is_active(start.plus(t as i32)) {
                slot.push(c);
            }
        }
    }

    let mut redraws = 0;
    let mut ret = vec![vec![0.0; t_len]; n];
    let mut me = vec![vec![0.0; t_len]; n];

    // customers: market model
    for c in 0..n_cust {
        let mut level = log_me0[c].exp();
        for t in 0..t_len {
            let base = rf + cfg.beta_mkt * (mkt[t] - rf);
            let r = bounded_return(&mut d, base, cfg.customer_noise_sd, &mut redraws)?;
            level *= 1.0 + r;
            ret[c][t] = r;
            me[c][t] = level;
        }
    }

    let cust_port = |s: usize, t: usize, ret: &[Vec<f64>]| -> Option<f64> {
        let cs = &active[s][t];
        (!cs.is_empty()).then(|| cs.iter().map(|c| ret[*c][t]).sum::<f64>() / cs.len() as f64)
    };

    // suppliers: market + same-period customer comovement + lagged customer
    // news, the latter scaled by relative size and delayed by inattention
    for s in n_cust..n {
        let mut level = log_me0[s].exp();
        let delay = if low_attention[s] {
            cfg.attention_delay as usize
        } else {
            0
        };
        for t in 0..t_len {
            let mut base = rf + cfg.beta_mkt * (mkt[t] - rf);
            if let Some(p) = cust_port(s, t, &ret) {
                base += cfg.link_comovement * p;
            }
            if t > delay {
                let news = cust_port(s, t - 1 - delay, &ret);
                let cs = &active[s][t - 1];
                let rel = (!cs.is_empty()).then(|| {
                    cs.iter().map(|c| me[*c][t - 1]).sum::<f64>() / cs.len() as f64 / me[s][t - 1]
                });
                if let (Some(news), Some(rel)) = (news, rel) {
                    base += (cfg.beta_cmom + cfg.beta_leadlag * rel.ln()) * news;
                }
            }
            let r = bounded_return(&mut d, base, cfg.noise_sd, &mut redraws)?;
            level *= 1.0 + r;
            ret[s][t] = r;
            me[s][t] = level;
        }
    }

    // quarterly EPS: seasonal random walk with drift, announced 20-50 days
    // after quarter end
    let mut events: Vec<EpsEvent> = Vec::new();
    let first_q = Month::new(cfg.start_year - 2, 3).expect("March");
    let end_day = month_last_day(end);
    let (lag_lo, lag_hi) = cfg.announcement_lag_days;
    for f in 0..n {
        let scale = d.normal(1.0, 0.2).abs().max(0.2);
        let sd = cfg.eps_shock_sd * scale;
        let mut eps: Vec<f64> = (0..4).map(|_| d.normal(scale, 0.3 * scale)).collect();
        let mut q = 0;
        loop {
            let quarter_end = month_last_day(first_q.plus(3 * q));
            let lag = lag_lo + d.rng.random_range(0..=lag_hi - lag_lo);
            let shock = d.normal(0.0, sd);
            let date = quarter_end + Days::new(lag as u64);
            if date > end_day {
                break;
            }
            let value = if q < 4 {
                eps[q as usize]
            } else {
                let v = eps[q as usize - 4] + 0.01 * scale + shock;
                eps.push(v);
                v
            };
            events.push(EpsEvent {
                firm: f,
                date,
                eps: value,
                z: if q < 4 || sd == 0.0 { 0.0 } else { shock / sd },
            });
            q += 1;
        }
    }

    // accounting characteristics, reported each June
    let mut characteristics = CharacteristicTable::default();
    for f in 0..n {
        for year in cfg.start_year..=end.year() {
            let bm = d.normal(-0.4, 0.6).exp();
            let op = d.normal(0.1, 0.08);
            characteristics.rows.insert(
                (names[f].clone(), Month::new(year, 6).expect("June")),
                CharacteristicRow {
                    book_to_market: Some(bm),
                    profitability: Some(op),
                },
            );
        }
    }

    // published factor returns: market from the simulation, the rest noise
    let mut factors = FactorSet::new(Timeline::Monthly);
    let mut add_factor = |name: &str, values: BTreeMap<Ordinal, f64>| factors.insert(name, values);
    add_factor(MKT_RF, (0..t_len).map(|t| (start.0 + t as i32, mkt[t] - rf)).collect());
    add_factor(RF, (0..t_len).map(|t| (start.0 + t as i32, rf)).collect());
    for name in [SMB, HML, RMW, CMA] {
        let v = (0..t_len)
            .map(|t| (start.0 + t as i32, d.normal(0.002, 0.03)))
            .collect();
        add_factor(name, v);
    }

    let market = MarketSeries::new(
        Timeline::Monthly,
        (0..t_len)
            .map(|t| {
                (
                    start.0 + t as i32,
                    MarketPoint {
                        market_return: mkt[t],
                        risk_free: rf,
                    },
                )
            })
            .collect(),
    );

    // daily split and volumes
    let mut monthly_volume = vec![vec![0.0; t_len]; n];
    let base_volume: Vec<f64> = (0..n)
        .map(|f| 1e6 * (log_me0[f] - SUPPLIER_LOG_ME).exp().sqrt())
        .collect();
    let (daily, market_daily) = if cfg.daily {
        let cal = Arc::new(TradingCalendar::weekdays(start.first_day(), end_day));
        let timeline = Timeline::Daily(cal.clone());
        let days_in: Vec<std::ops::Range<usize>> = (0..t_len)
            .map(|t| {
                let m = start.plus(t as i32);
                let lo = cal.roll_forward(m.first_day()).expect("month has weekdays") as usize;
                let hi = cal
                    .roll_forward(m.plus(1).first_day())
                    .map(|o| o as usize)
                    .unwrap_or(cal.len());
                lo..hi
            })
            .collect();

        let mut jumps: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        let mut spikes: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for e in &events {
            let Some(day) = cal.roll_forward(e.date) else {
                continue;
            };
            let day = day as usize;
            *jumps.entry((e.firm, day)).or_default() += cfg.earnings_jump * e.z;
            if !is_customer(e.firm) {
                continue;
            }
            let t = Month::from_date(cal.dates()[day]).0 - start.0;
            let Ok(t) = usize::try_from(t) else { continue };
            for s in n_cust..n {
                if !low_attention[s] && active[s][t].contains(&e.firm) {
                    *spikes.entry((s, day)).or_default() += cfg.volume_spike;
                }
            }
        }

        let mut records = Vec::with_capacity(n * cal.len());
        let split = |monthly: f64, range: &std::ops::Range<usize>, key: Option<usize>, d: &mut Draws| {
            let mut x: Vec<f64> = range
                .clone()
                .map(|day| {
                    let jump = key.and_then(|f| jumps.get(&(f, day))).copied().unwrap_or(0.0);
                    d.normal(0.0, cfg.daily_noise_sd) + jump
                })
                .collect();
            let adjust = ((1.0 + monthly).ln() - x.iter().sum::<f64>()) / x.len() as f64;
            for v in &mut x {
                *v = (*v + adjust).exp_m1();
            }
            x
        };
        let mut market_points = BTreeMap::new();
        for (t, range) in days_in.iter().enumerate() {
            let rets = split(mkt[t], range, None, &mut d);
            let rf_day = (1.0 + rf).powf(1.0 / range.len() as f64) - 1.0;
            for (day, r) in range.clone().zip(rets) {
                market_points.insert(
                    day as Ordinal,
                    MarketPoint {
                        market_return: r,
                        risk_free: rf_day,
                    },
                );
            }
        }
        for f in 0..n {
            let mut level = log_me0[f].exp();
            for (t, range) in days_in.iter().enumerate() {
                let rets = split(ret[f][t], range, Some(f), &mut d);
                for (day, r) in range.clone().zip(rets) {
                    level *= 1.0 + r;
                    let spike = spikes.get(&(f, day)).copied().unwrap_or(0.0);
                    let vol = base_volume[f] * d.normal(0.0, 0.25).exp() * (1.0 + spike);
                    monthly_volume[f][t] += vol;
                    records.push(ReturnRecord {
                        firm: names[f].clone(),
                        period: day as Ordinal,
                        ret: r,
                        me: Some(level),
                        volume: Some(vol),
                        exchange: Some(exchange[f]),
                    });
                }
            }
        }
        (
            Some(ReturnPanel::from_records(timeline.clone(), records)?),
            Some(MarketSeries::new(timeline, market_points)),
        )
    } else {
        for f in 0..n {
            for t in 0..t_len {
                monthly_volume[f][t] = 21.0 * base_volume[f] * d.normal(0.0, 0.1).exp();
            }
        }
        (None, None)
    };

    let mut records = Vec::with_capacity(n * t_len);
    for f in 0..n {
        for t in 0..t_len {
            records.push(ReturnRecord {
                firm: names[f].clone(),
                period: start.0 + t as i32,
                ret: ret[f][t],
                me: Some(me[f][t]),
                volume: Some(monthly_volume[f][t]),
                exchange: Some(exchange[f]),
            });
        }
    }
    let monthly = ReturnPanel::from_records(Timeline::Monthly, records)?;

    let announcements = AnnouncementTable::new(
        events
            .iter()
            .map(|e| Announcement {
                firm: names[e.firm].clone(),
                date: e.date,
                eps: e.eps,
            })
            .collect(),
    )?;

    let truth = GroundTruth {
        generator: "ChaCha8 (rand_chacha), seeded from config.seed",
        engine_version: crate::VERSION,
        config: cfg.clone(),
        customers: names[..n_cust].to_vec(),
        suppliers: names[n_cust..].to_vec(),
        low_attention_suppliers: (n_cust..n)
            .filter(|s| low_attention[*s])
            .map(|s| names[s].clone())
            .collect(),
        redraws,
        link_correlation_margin: cfg.link_correlation_margin(),
    };

    Ok(SynthMarket {
        monthly,
        daily,
        raw_links,
        links,
        announcements,
        market,
        market_daily,
        characteristics,
        factors,
        truth,
    })
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    File::create(&path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn write_market<W: Write>(m: &MarketSeries, out: W, name: &str) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let err = |e| Error::csv(name, e);
    w.write_record(["date", "mkt_ret", "rf"]).map_err(err)?;
    for (p, pt) in m.points() {
        w.write_record([
            m.timeline().label(*p),
            pt.market_return.to_string(),
            pt.risk_free.to_string(),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| Error::io(name, e))
}

impl SynthMarket {
    /// Writes every CSV plus `truth.json` into `dir`, creating it if needed.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_returns(&self.monthly, create(dir, RETURNS_FILE)?)?;
        write_market(&self.market, create(dir, MARKET_FILE)?, MARKET_FILE)?;
        self.factors.write_csv(create(dir, FACTORS_FILE)?)?;

        let mut w = csv::Writer::from_writer(create(dir, LINKS_FILE)?);
        let err = |e| Error::csv(LINKS_FILE, e);
        w.write_record(["supplier_id", "customer_id", "fy_end_date"]).map_err(err)?;
        for l in &self.raw_links {
            let fy = month_last_day(l.fy_end);
            w.write_record([&l.supplier, &l.customer, &fy.format("%Y-%m-%d").to_string()])
                .map_err(err)?;
        }
        w.flush().map_err(|e| Error::io(LINKS_FILE, e))?;

        let mut w = csv::Writer::from_writer(create(dir, ANNOUNCEMENTS_FILE)?);
        let err = |e| Error::csv(ANNOUNCEMENTS_FILE, e);
        w.write_record(["firm_id", "rdq_date", "eps"]).map_err(err)?;
        for a in self.announcements.rows() {
            w.write_record([&a.firm, &a.date.format("%Y-%m-%d").to_string(), &a.eps.to_string()])
                .map_err(err)?;
        }
        w.flush().map_err(|e| Error::io(ANNOUNCEMENTS_FILE, e))?;

        let mut w = csv::Writer::from_writer(create(dir, CHARACTERISTICS_FILE)?);
        let err = |e| Error::csv(CHARACTERISTICS_FILE, e);
        w.write_record(["firm_id", "date", "bm", "op"]).map_err(err)?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for ((firm, month), row) in &self.characteristics.rows {
            w.write_record([
                firm.clone(),
                month.to_string(),
                opt(row.book_to_market),
                opt(row.profitability),
            ])
            .map_err(err)?;
        }
        w.flush().map_err(|e| Error::io(CHARACTERISTICS_FILE, e))?;

        if let (Some(daily), Some(market_daily)) = (&self.daily, &self.market_daily) {
            write_returns(daily, create(dir, RETURNS_DAILY_FILE)?)?;
            write_market(market_daily, create(dir, MARKET_DAILY_FILE)?, MARKET_DAILY_FILE)?;
            let mut w = csv::Writer::from_writer(create(dir, CALENDAR_FILE)?);
            let err = |e| Error::csv(CALENDAR_FILE, e);
            w.write_record(["date"]).map_err(err)?;
            let cal = daily.timeline().calendar().expect("daily timeline");
            for day in cal.dates() {
                w.write_record([day.format("%Y-%m-%d").to_string()]).map_err(err)?;
            }
            w.flush().map_err(|e| Error::io(CALENDAR_FILE, e))?;
        }

        let mut out = create(dir, TRUTH_FILE)?;
        serde_json::to_writer_pretty(&mut out, &self.truth)
            .map_err(|e| Error::Invalid(format!("truth.json: {e}")))?;
        writeln!(out).map_err(|e| Error::io(dir.join(TRUTH_FILE), e))?;
        out.flush().map_err(|e| Error::io(dir.join(TRUTH_FILE), e))
    }
}
