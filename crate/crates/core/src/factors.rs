//! 2×3 size-by-signal factors and cumulative growth series.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::panel::{Exchange, ReturnPanel};
use crate::period::{Ordinal, Timeline};
use crate::quantile::{quantile_sorted, sorted_copy};
use crate::signals::SignalPanel;

pub const MKT_RF: &str = "MKT-RF";
pub const SMB: &str = "SMB";
pub const HML: &str = "HML";
pub const RMW: &str = "RMW";
pub const CMA: &str = "CMA";
pub const UMD: &str = "UMD";
pub const RF: &str = "RF";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FactorMeta {
    pub signal: String,
    pub breakpoints: &'static str,
    pub size_split: &'static str,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FactorSeries {
    pub name: String,
    pub values: BTreeMap<Ordinal, f64>,
    pub meta: Option<FactorMeta>,
    /// Periods with a signal cross-section but an empty cell.
    pub absent_periods: Vec<Ordinal>,
}

impl FactorSeries {
    pub fn points(&self) -> Vec<(Ordinal, f64)> {
        self.values.iter().map(|(p, v)| (*p, *v)).collect()
    }
}

/// Named factor return series on one timeline.
#[derive(Debug, Clone)]
pub struct FactorSet {
    timeline: Timeline,
    series: BTreeMap<String, BTreeMap<Ordinal, f64>>,
}

impl FactorSet {
    pub fn new(timeline: Timeline) -> Self {
        Self {
            timeline,
            series: BTreeMap::new(),
        }
    }

    pub fn timeline(&self) -> &Timeline {
        &self.timeline
    }

    pub fn insert(&mut self, name: &str, values: BTreeMap<Ordinal, f64>) {
        self.series.insert(name.to_owned(), values);
    }

    pub fn get(&self, name: &str) -> Option<&BTreeMap<Ordinal, f64>> {
        self.series.get(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.series.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.series.keys().map(String::as_str)
    }

    /// Names from `required` that the set lacks.
    pub fn missing<'a>(&self, required: &[&'a str]) -> Vec<&'a str> {
        required.iter().copied().filter(|n| !self.contains(n)).collect()
    }

    /// Reads long-format `date,name,ret` factor files.
    pub fn read_csv(path: &Path, timeline: Timeline) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| Error::csv(path.display().to_string(), e))?;
        let headers = rdr.headers().map_err(|e| Error::csv(path.display().to_string(), e))?.clone();
        let col = |name: &str| {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::MissingColumn {
                    path: path.display().to_string(),
                    column: name.to_owned(),
                })
        };
        let (di, ni, ri) = (col("date")?, col("name")?, col("ret")?);
        let mut set = FactorSet::new(timeline);
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::csv(path.display().to_string(), e))?;
            let bad = |what: &str| {
                Error::Invalid(format!("{}: line {}: {what}", path.display(), line + 2))
            };
            let period = set
                .timeline
                .parse(&rec[di])
                .ok_or_else(|| bad("unparseable date"))?;
            let ret: f64 = rec[ri].parse().map_err(|_| bad("unparseable return"))?;
            if !ret.is_finite() {
                return Err(bad("non-finite return"));
            }
            set.series
                .entry(rec[ni].to_owned())
                .or_default()
                .insert(period, ret);
        }
        Ok(set)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let err = |e| Error::csv("factors.csv", e);
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["date", "name", "ret"]).map_err(err)?;
        let mut rows: Vec<(Ordinal, &str, f64)> = self
            .series
            .iter()
            .flat_map(|(n, s)| s.iter().map(move |(p, v)| (*p, n.as_str(), *v)))
            .collect();
        rows.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(b.1)));
        for (p, n, v) in rows {
            w.write_record([self.timeline.label(p).as_str(), n, &v.to_string()])
                .map_err(err)?;
        }
        w.flush().map_err(|e| Error::io("factors.csv", e))?;
        Ok(())
    }
}

#[derive(Clone, Copy)]
struct Member {
    signal: f64,
    me: f64,
    ret: f64,
    nyse: bool,
}

/// Returns of the six cells, ordered small-low, small-mid, small-high,
/// big-low, big-mid, big-high; `None` if NYSE breakpoints are unavailable.
fn cell_returns(members: &[Member]) -> Option<[Option<f64>; 6]> {
    let nyse_me = sorted_copy(&members.iter().filter(|m| m.nyse).map(|m| m.me).collect::<Vec<_>>());
    let nyse_sig = sorted_copy(&members.iter().filter(|m| m.nyse).map(|m| m.signal).collect::<Vec<_>>());
    if nyse_me.is_empty() {
        return None;
    }
    let median = quantile_sorted(&nyse_me, 1, 2);
    let lo = quantile_sorted(&nyse_sig, 3, 10);
    let hi = quantile_sorted(&nyse_sig, 7, 10);
    let mut num = [0.0; 6];
    let mut den = [0.0; 6];
    let mut n = [0usize; 6];
    for m in members {
        let size = if m.me <= median { 0 } else { 3 };
        // symmetric boundaries keep cell membership mirrored under negation
        let sig = if m.signal < lo {
            0
        } else if m.signal > hi {
            2
        } else {
            1
        };
        num[size + sig] += m.me * m.ret;
        den[size + sig] += m.me;
        n[size + sig] += 1;
    }
    let mut out = [None; 6];
    for i in 0..6 {
        if n[i] > 0 {
            out[i] = Some(num[i] / den[i]);
        }
    }
    Some(out)
}

fn cells_to_factor(cells: &[Option<f64>; 6]) -> Option<f64> {
    let [sl, sm, sh, bl, bm, bh] = *cells;
    sm?;
    bm?;
    Some(0.5 * (sh? + bh?) - 0.5 * (sl? + bl?))
}

/// French-style 2×3 factor on the signal stamped at each period.
///
/// Firms need the signal, a return at the stamp and positive ME at formation.
/// Size splits at the NYSE median ME; the signal at NYSE 30th/70th
/// percentiles; non-NYSE firms are excluded only from breakpoints. Returns are
/// value weighted within cells and the factor is
/// `(SH + BH)/2 - (SL + BL)/2`. Periods with an empty cell are absent.
pub fn build_factor(
    panel: &ReturnPanel,
    signals: &SignalPanel,
    signal_name: &str,
    factor_name: &str,
) -> Result<FactorSeries> {
    let stamps = signals.periods(signal_name);
    // outer None: no eligible firms at all; inner None: some cell empty
    let results: Vec<(Ordinal, Option<Option<f64>>)> = stamps
        .par_iter()
        .map(|&t| {
            let members: Vec<Member> = signals
                .cross_section(signal_name, t)
                .iter()
                .filter_map(|&(firm, signal)| {
                    let ret = panel.get(firm, t)?.ret;
                    let formation = panel.get(firm, t - 1)?;
                    let me = formation.me.filter(|m| *m > 0.0)?;
                    let exch = formation
                        .exchange
                        .or_else(|| panel.get(firm, t).and_then(|o| o.exchange));
                    Some(Member {
                        signal,
                        me,
                        ret,
                        nyse: exch == Some(Exchange::Nyse),
                    })
                })
                .collect();
            let value = (!members.is_empty())
                .then(|| cell_returns(&members).and_then(|c| cells_to_factor(&c)));
            (t, value)
        })
        .collect();
    let mut values = BTreeMap::new();
    let mut absent_periods = Vec::new();
    for (t, v) in results {
        match v {
            None => {}
            Some(Some(x)) => {
                values.insert(t, x);
            }
            Some(None) => absent_periods.push(t),
        }
    }
    Ok(FactorSeries {
        name: factor_name.to_owned(),
        values,
        meta: Some(FactorMeta {
            signal: signal_name.to_owned(),
            breakpoints: "nyse 30/70",
            size_split: "nyse median",
        }),
        absent_periods,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthSeries {
    pub points: Vec<(Ordinal, f64)>,
    /// Multiplier applied to returns before compounding.
    pub scale: f64,
    /// Set when the cumulative value reached zero or below and the series
    /// was cut at that point.
    pub truncated: bool,
}

/// Cumulative `prod(1 + r)`, optionally after rescaling returns so their
/// sample SD equals `scale_to_sd`.
pub fn growth_of_dollar(returns: &[(Ordinal, f64)], scale_to_sd: Option<f64>) -> GrowthSeries {
    let scale = match scale_to_sd {
        Some(target) if returns.len() >= 2 => {
            let v: Vec<f64> = returns.iter().map(|r| r.1).collect();
            let sd = crate::econometrics::sample_sd(&v);
            if sd > 0.0 {
                target / sd
            } else {
                1.0
            }
        }
        _ => 1.0,
    };
    let mut value = 1.0;
    let mut points = Vec::with_capacity(returns.len());
    let mut truncated = false;
    for (p, r) in returns {
        value *= 1.0 + scale * r;
        if value <= 0.0 {
            truncated = true;
            break;
        }
        points.push((*p, value));
    }
    GrowthSeries {
        points,
        scale,
        truncated,
    }
}
