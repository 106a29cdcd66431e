//! Study commands: load a data directory, run one table family, write the
//! reports. Shared by the `cmom` binary and the C interface.

mod config;
mod data;
mod tables;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::Serialize;

pub use config::{Overrides, Settings, StudyConfig, DEFAULT_LAG_GRID};
pub use data::{DailyData, Prepared, StudyData, CAR3F, CMOM, SUEF};

use crate::error::{Error, Result};
use crate::report::{Cell, Report, Table};
use crate::synth::generate;
use tables::Ctx;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Coverage,
    Sort,
    Alpha,
    Factors,
    Spanning,
    Fm,
    Doublesort,
    Summary,
    Corr,
    Growth,
    Synth,
    All,
}

impl Command {
    pub const ANALYSES: [Command; 10] = [
        Command::Coverage,
        Command::Sort,
        Command::Alpha,
        Command::Factors,
        Command::Spanning,
        Command::Fm,
        Command::Doublesort,
        Command::Summary,
        Command::Corr,
        Command::Growth,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Command::Coverage => "coverage",
            Command::Sort => "sort",
            Command::Alpha => "alpha",
            Command::Factors => "factors",
            Command::Spanning => "spanning",
            Command::Fm => "fm",
            Command::Doublesort => "doublesort",
            Command::Summary => "summary",
            Command::Corr => "corr",
            Command::Growth => "growth",
            Command::Synth => "synth",
            Command::All => "all",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Command {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Command::ANALYSES
            .into_iter()
            .chain([Command::Synth, Command::All])
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown command `{s}`")))
    }
}

/// Process exit status for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) => 2,
        Error::MissingColumn { .. } | Error::Csv { .. } | Error::DuplicateObservation { .. } => 3,
        Error::MissingFactors(_) => 4,
        Error::DegenerateBreakpoints(_) => 5,
        Error::Io { .. } => 6,
        _ => 1,
    }
}

/// Machine-readable error line written to stderr by the binary.
pub fn error_json(e: &Error) -> String {
    serde_json::json!({
        "error": e.kind(),
        "exit_code": exit_code(e),
        "message": e.to_string(),
    })
    .to_string()
}

/// What a successful run produced.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub reports: Vec<Report>,
    pub files: Vec<PathBuf>,
}

fn run_analysis(cmd: Command, ctx: &Ctx) -> Result<Report> {
    match cmd {
        Command::Coverage => tables::coverage(ctx),
        Command::Sort => tables::sort(ctx),
        Command::Alpha => tables::alpha(ctx),
        Command::Factors => tables::factors(ctx),
        Command::Spanning => tables::spanning(ctx),
        Command::Fm => tables::fm(ctx),
        Command::Doublesort => tables::doublesort(ctx),
        Command::Summary => tables::summary(ctx),
        Command::Corr => tables::corr(ctx),
        Command::Growth => tables::growth(ctx),
        Command::Synth | Command::All => unreachable!("not a single analysis"),
    }
}

fn synth_report(cfg: &StudyConfig, s: &Settings) -> Result<Report> {
    let dgp = cfg.synth_config();
    let market = generate(&dgp)?;
    market.write_dir(&cfg.data_dir)?;
    let mut r = Report::new("synth", &s.config_hash);
    let mut t = Table::new("truth", "Planted parameters", vec!["value".into()]);
    let value = serde_json::to_value(&market.truth.config).expect("config serializes");
    if let serde_json::Value::Object(map) = value {
        for (k, v) in map {
            t.push(k, vec![Cell::text(v.to_string())]);
        }
    }
    t.push("suppliers", vec![Cell::count(market.truth.suppliers.len())]);
    t.push("customers", vec![Cell::count(market.truth.customers.len())]);
    t.push("low-attention suppliers", vec![Cell::count(market.truth.low_attention_suppliers.len())]);
    t.push("redraws", vec![Cell::count(market.truth.redraws)]);
    r.push(t);
    Ok(r)
}

fn run_inner(cfg: &StudyConfig, cmd: Command) -> Result<RunOutcome> {
    let s = cfg.resolve()?;
    let mut reports = Vec::new();
    if cmd == Command::Synth {
        reports.push(synth_report(cfg, &s)?);
    } else {
        let data = StudyData::load(cfg, &s)?;
        let prepared = Prepared::new(data, &s, cfg.winsorize)?;
        let ctx = Ctx {
            cfg,
            s: &s,
            p: &prepared,
        };
        let cmds: Vec<Command> = if cmd == Command::All {
            Command::ANALYSES.to_vec()
        } else {
            vec![cmd]
        };
        for c in cmds {
            reports.push(run_analysis(c, &ctx)?);
        }
    }
    let mut files = Vec::new();
    for r in &reports {
        files.extend(r.write(&cfg.out_dir, &s.formats)?);
    }
    Ok(RunOutcome { reports, files })
}

/// Runs one command under `cfg`, on a dedicated pool when `threads` is set.
/// Results do not depend on the thread count.
pub fn run_study(cfg: &StudyConfig, cmd: Command) -> Result<RunOutcome> {
    match cfg.threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
            pool.install(|| run_inner(cfg, cmd))
        }
        None => run_inner(cfg, cmd),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn command_names_round_trip() {
        for c in Command::ANALYSES.into_iter().chain([Command::Synth, Command::All]) {
            assert_eq!(c.as_str().parse::<Command>().unwrap(), c);
        }
        assert!(matches!("tables".parse::<Command>(), Err(Error::Config(_))));
    }

    #[test]
    fn exit_codes_are_distinct_per_family() {
        let codes = [
            exit_code(&Error::Config("x".into())),
            exit_code(&Error::MissingColumn { path: "p".into(), column: "ret".into() }),
            exit_code(&Error::MissingFactors(vec!["UMD".into()])),
            exit_code(&Error::DegenerateBreakpoints("x".into())),
            exit_code(&Error::Io { path: "p".into(), source: std::io::Error::other("x") }),
            exit_code(&Error::Invalid("x".into())),
        ];
        let unique: std::collections::BTreeSet<_> = codes.iter().collect();
        assert_eq!(unique.len(), codes.len());
        assert!(codes.iter().all(|c| *c != 0));
        let j: serde_json::Value = serde_json::from_str(&error_json(&Error::MissingFactors(vec!["UMD".into()]))).unwrap();
        assert_eq!(j["exit_code"], 4);
        assert_eq!(j["error"], "missing_factors");
    }
}
