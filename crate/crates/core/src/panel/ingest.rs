//! CSV ingestion and emission for the panel input files.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::Serialize;

use super::{
    Announcement, AnnouncementTable, CharacteristicRow, CharacteristicTable, Exchange, Link,
    LinkTable, MarketPoint, MarketSeries, OverlapPolicy, ReturnPanel, ReturnRecord,
};
use crate::error::{Error, Result};
use crate::links::RawLink;
use crate::period::{parse_date, Month, Timeline, TradingCalendar};

/// Column names for `returns.csv`. `firm_id`, `date` and `ret` are required;
/// the others may be missing entirely.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SchemaMap {
    pub firm_id: String,
    pub date: String,
    pub ret: String,
    pub me: String,
    pub vol: String,
    pub exch: String,
}

impl Default for SchemaMap {
    fn default() -> Self {
        Self {
            firm_id: "firm_id".into(),
            date: "date".into(),
            ret: "ret".into(),
            me: "me".into(),
            vol: "vol".into(),
            exch: "exch".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DuplicatePolicy {
    #[default]
    Fatal,
    Last,
}

#[derive(Debug, Clone, Default)]
pub struct IngestOptions {
    pub schema: SchemaMap,
    pub duplicates: DuplicatePolicy,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Rejection {
    /// 1-based line number in the source file (header is line 1).
    pub line: u64,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct IngestReport {
    pub source: String,
    pub rows_read: usize,
    pub accepted: usize,
    pub rejected: Vec<Rejection>,
}

impl IngestReport {
    fn new(source: &str) -> Self {
        Self {
            source: source.to_owned(),
            ..Self::default()
        }
    }

    fn reject(&mut self, line: u64, reason: impl Into<String>) {
        self.rejected.push(Rejection {
            line,
            reason: reason.into(),
        });
    }

    pub fn reason_counts(&self) -> BTreeMap<&str, usize> {
        let mut out = BTreeMap::new();
        for r in &self.rejected {
            *out.entry(r.reason.as_str()).or_insert(0) += 1;
        }
        out
    }
}

fn open(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(reader(file))
}

fn reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .comment(Some(b'#'))
        .from_reader(r)
}

struct Columns {
    source: String,
    index: HashMap<String, usize>,
}

impl Columns {
    fn new<R: Read>(rdr: &mut csv::Reader<R>, source: &str) -> Result<Self> {
        let headers = rdr.headers().map_err(|e| Error::csv(source, e))?;
        let index = headers
            .iter()
            .enumerate()
            .map(|(i, h)| (h.trim_start_matches('\u{feff}').to_owned(), i))
            .collect();
        Ok(Self {
            source: source.to_owned(),
            index,
        })
    }

    fn required(&self, name: &str) -> Result<usize> {
        self.index
            .get(name)
            .copied()
            .ok_or_else(|| Error::MissingColumn {
                path: self.source.clone(),
                column: name.to_owned(),
            })
    }

    fn optional(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    fn has(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }
}

fn field(rec: &csv::StringRecord, idx: Option<usize>) -> &str {
    idx.and_then(|i| rec.get(i)).unwrap_or("")
}

fn line_of(rec: &csv::StringRecord) -> u64 {
    rec.position().map(|p| p.line()).unwrap_or(0)
}

/// Parses an optional non-negative decimal; blank means absent.
fn parse_nonneg(s: &str, what: &str) -> std::result::Result<Option<f64>, String> {
    if s.is_empty() || s.eq_ignore_ascii_case("na") || s.eq_ignore_ascii_case("nan") {
        return Ok(None);
    }
    let v: f64 = s.parse().map_err(|_| format!("unparseable {what}"))?;
    if !v.is_finite() {
        return Err(format!("non-finite {what}"));
    }
    if v < 0.0 {
        return Err(format!("negative {what}"));
    }
    Ok(Some(v))
}

/// Reads a returns file from disk. See [`read_returns`].
pub fn ingest_returns(
    path: &Path,
    timeline: Timeline,
    opts: &IngestOptions,
) -> Result<(ReturnPanel, IngestReport)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_returns(file, &path.display().to_string(), timeline, opts)
}

/// Validates and loads a returns CSV. Rows that violate an invariant are
/// skipped and recorded; a missing required column or (under the default
/// policy) a duplicate (firm, period) is fatal.
pub fn read_returns<R: Read>(
    input: R,
    source: &str,
    timeline: Timeline,
    opts: &IngestOptions,
) -> Result<(ReturnPanel, IngestReport)> {
    let mut rdr = reader(input);
    let cols = Columns::new(&mut rdr, source)?;
    let s = &opts.schema;
    let (i_firm, i_date, i_ret) = (
        cols.required(&s.firm_id)?,
        cols.required(&s.date)?,
        cols.required(&s.ret)?,
    );
    let (i_me, i_vol, i_exch) = (
        cols.optional(&s.me),
        cols.optional(&s.vol),
        cols.optional(&s.exch),
    );
    let mut report = IngestReport::new(source);
    let mut records: Vec<ReturnRecord> = Vec::new();
    let mut seen: HashMap<(String, i32), usize> = HashMap::new();
    for row in rdr.records() {
        let rec = row.map_err(|e| Error::csv(source, e))?;
        report.rows_read += 1;
        let line = line_of(&rec);
        let firm = field(&rec, Some(i_firm));
        if firm.is_empty() {
            report.reject(line, "missing firm id");
            continue;
        }
        let date = field(&rec, Some(i_date));
        let Some(period) = timeline.parse(date) else {
            let reason = match (&timeline, parse_date(date)) {
                (Timeline::Daily(_), Some(_)) => "date not a trading day",
                _ => "unparseable date",
            };
            report.reject(line, reason);
            continue;
        };
        let ret: f64 = match field(&rec, Some(i_ret)).parse() {
            Ok(v) => v,
            Err(_) => {
                report.reject(line, "unparseable return");
                continue;
            }
        };
        if !ret.is_finite() {
            report.reject(line, "non-finite return");
            continue;
        }
        if ret <= -1.0 {
            report.reject(line, "return ≤ −100%");
            continue;
        }
        let me = match parse_nonneg(field(&rec, i_me), "market equity") {
            Ok(v) => v,
            Err(reason) => {
                report.reject(line, reason);
                continue;
            }
        };
        let volume = match parse_nonneg(field(&rec, i_vol), "volume") {
            Ok(v) => v,
            Err(reason) => {
                report.reject(line, reason);
                continue;
            }
        };
        let record = ReturnRecord {
            firm: firm.to_owned(),
            period,
            ret,
            me,
            volume,
            exchange: Exchange::parse(field(&rec, i_exch)),
        };
        match seen.get(&(record.firm.clone(), period)) {
            Some(&idx) => match opts.duplicates {
                DuplicatePolicy::Fatal => {
                    return Err(Error::DuplicateObservation {
                        path: source.to_owned(),
                        firm: record.firm,
                        period: timeline.label(period),
                    })
                }
                DuplicatePolicy::Last => records[idx] = record,
            },
            None => {
                seen.insert((record.firm.clone(), period), records.len());
                records.push(record);
            }
        }
    }
    report.accepted = records.len();
    let panel = ReturnPanel::from_records(timeline, records)?;
    Ok((panel, report))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Emits `returns.csv`. Decimals use the shortest round-trip representation,
/// so re-ingesting reproduces every value bit-for-bit.
pub fn write_returns<W: Write>(panel: &ReturnPanel, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let err = |e| Error::csv("returns.csv", e);
    w.write_record(["firm_id", "date", "ret", "me", "vol", "exch"])
        .map_err(err)?;
    for o in panel.rows() {
        w.write_record([
            panel.firm_name(o.firm).to_owned(),
            panel.timeline().label(o.period),
            o.ret.to_string(),
            fmt_opt(o.me),
            fmt_opt(o.volume),
            o.exchange.map(|e| e.as_str().to_owned()).unwrap_or_default(),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| Error::io("returns.csv", e))?;
    Ok(())
}

/// Either pre-lag (fiscal-year-end) or post-lag (effective window) links.
#[derive(Debug, Clone)]
pub enum LinksFile {
    Raw(Vec<RawLink>),
    Effective(LinkTable),
}

/// Reads `links.csv`; the header decides between the two forms.
pub fn read_links(path: &Path, overlaps: OverlapPolicy) -> Result<(LinksFile, IngestReport)> {
    let source = path.display().to_string();
    let mut rdr = open(path)?;
    let cols = Columns::new(&mut rdr, &source)?;
    let i_sup = cols.required("supplier_id")?;
    let i_cus = cols.required("customer_id")?;
    let mut report = IngestReport::new(&source);
    if cols.has("fy_end_date") {
        let i_fy = cols.required("fy_end_date")?;
        let mut raw = Vec::new();
        for row in rdr.records() {
            let rec = row.map_err(|e| Error::csv(&source, e))?;
            report.rows_read += 1;
            let line = line_of(&rec);
            let (s, c) = (field(&rec, Some(i_sup)), field(&rec, Some(i_cus)));
            if s.is_empty() || c.is_empty() {
                report.reject(line, "missing firm id");
                continue;
            }
            if s == c {
                report.reject(line, "supplier equals customer");
                continue;
            }
            let Some(fy_end) = Month::parse(field(&rec, Some(i_fy))) else {
                report.reject(line, "unparseable fiscal year-end date");
                continue;
            };
            raw.push(RawLink {
                supplier: s.to_owned(),
                customer: c.to_owned(),
                fy_end,
            });
        }
        report.accepted = raw.len();
        Ok((LinksFile::Raw(raw), report))
    } else {
        let i_from = cols.required("effective_from")?;
        let i_to = cols.required("effective_to")?;
        let mut links = Vec::new();
        for row in rdr.records() {
            let rec = row.map_err(|e| Error::csv(&source, e))?;
            report.rows_read += 1;
            let line = line_of(&rec);
            let (s, c) = (field(&rec, Some(i_sup)), field(&rec, Some(i_cus)));
            if s.is_empty() || c.is_empty() {
                report.reject(line, "missing firm id");
                continue;
            }
            if s == c {
                report.reject(line, "supplier equals customer");
                continue;
            }
            let (Some(from), Some(to)) = (
                Month::parse(field(&rec, Some(i_from))),
                Month::parse(field(&rec, Some(i_to))),
            ) else {
                report.reject(line, "unparseable effective date");
                continue;
            };
            if from > to {
                report.reject(line, "effective_from after effective_to");
                continue;
            }
            links.push(Link {
                supplier: s.to_owned(),
                customer: c.to_owned(),
                effective_from: from,
                effective_to: to,
            });
        }
        report.accepted = links.len();
        Ok((LinksFile::Effective(LinkTable::new(links, overlaps)?), report))
    }
}

pub fn read_announcements(path: &Path) -> Result<(AnnouncementTable, IngestReport)> {
    let source = path.display().to_string();
    let mut rdr = open(path)?;
    let cols = Columns::new(&mut rdr, &source)?;
    let (i_firm, i_date, i_eps) = (
        cols.required("firm_id")?,
        cols.required("rdq_date")?,
        cols.required("eps")?,
    );
    let mut report = IngestReport::new(&source);
    let mut rows = Vec::new();
    for row in rdr.records() {
        let rec = row.map_err(|e| Error::csv(&source, e))?;
        report.rows_read += 1;
        let line = line_of(&rec);
        let firm = field(&rec, Some(i_firm));
        let Some(date) = parse_date(field(&rec, Some(i_date))) else {
            report.reject(line, "unparseable announcement date");
            continue;
        };
        let Ok(eps) = field(&rec, Some(i_eps)).parse::<f64>() else {
            report.reject(line, "unparseable eps");
            continue;
        };
        if firm.is_empty() || !eps.is_finite() {
            report.reject(line, "missing firm id or non-finite eps");
            continue;
        }
        rows.push(Announcement {
            firm: firm.to_owned(),
            date,
            eps,
        });
    }
    report.accepted = rows.len();
    Ok((AnnouncementTable::new(rows)?, report))
}

pub fn read_market(path: &Path, timeline: Timeline) -> Result<MarketSeries> {
    let source = path.display().to_string();
    let mut rdr = open(path)?;
    let cols = Columns::new(&mut rdr, &source)?;
    let (i_date, i_mkt, i_rf) = (
        cols.required("date")?,
        cols.required("mkt_ret")?,
        cols.required("rf")?,
    );
    let mut points = BTreeMap::new();
    for row in rdr.records() {
        let rec = row.map_err(|e| Error::csv(&source, e))?;
        let date = field(&rec, Some(i_date));
        let period = timeline.parse(date).ok_or_else(|| {
            Error::Invalid(format!("{source}: unresolvable market date `{date}`"))
        })?;
        let num = |i: usize, what: &str| -> Result<f64> {
            field(&rec, Some(i))
                .parse()
                .map_err(|_| Error::Invalid(format!("{source}: unparseable {what} on {date}")))
        };
        points.insert(
            period,
            MarketPoint {
                market_return: num(i_mkt, "mkt_ret")?,
                risk_free: num(i_rf, "rf")?,
            },
        );
    }
    Ok(MarketSeries::new(timeline, points))
}

pub fn read_calendar(path: &Path) -> Result<TradingCalendar> {
    let source = path.display().to_string();
    let mut rdr = open(path)?;
    let cols = Columns::new(&mut rdr, &source)?;
    let i_date = cols.required("date")?;
    let mut dates = Vec::new();
    for row in rdr.records() {
        let rec = row.map_err(|e| Error::csv(&source, e))?;
        let s = field(&rec, Some(i_date));
        dates.push(
            parse_date(s)
                .ok_or_else(|| Error::Invalid(format!("{source}: unparseable date `{s}`")))?,
        );
    }
    TradingCalendar::new(dates)
}

/// Reads `characteristics.csv` (firm_id, date, bm, op); blanks are absent.
pub fn read_characteristics(path: &Path) -> Result<CharacteristicTable> {
    let source = path.display().to_string();
    let mut rdr = open(path)?;
    let cols = Columns::new(&mut rdr, &source)?;
    let (i_firm, i_date) = (cols.required("firm_id")?, cols.required("date")?);
    let (i_bm, i_op) = (cols.optional("bm"), cols.optional("op"));
    let mut table = CharacteristicTable::default();
    for row in rdr.records() {
        let rec = row.map_err(|e| Error::csv(&source, e))?;
        let Some(month) = Month::parse(field(&rec, Some(i_date))) else {
            continue;
        };
        let num = |i| field(&rec, i).parse::<f64>().ok().filter(|v| v.is_finite());
        table.rows.insert(
            (field(&rec, Some(i_firm)).to_owned(), month),
            CharacteristicRow {
                book_to_market: num(i_bm),
                profitability: num(i_op),
            },
        );
    }
    Ok(table)
}
