//! Study configuration: TOML file, command-line overrides and validation.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::econometrics::{FactorModel, FmStandardErrors, StarLevels};
use crate::error::{Error, Result};
use crate::period::Month;
use crate::report::Format;
use crate::signals::LagWindow;
use crate::sorter::{BreakpointSpec, BreakpointUniverse, Weighting};
use crate::synth::DgpConfig;

pub const DEFAULT_LAG_GRID: [&str; 8] = ["1-1", "2-1", "3-1", "7-1", "12-1", "2-2", "7-2", "12-2"];

/// Everything a study run needs. Precedence is defaults < file < flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudyConfig {
    pub data_dir: PathBuf,
    pub out_dir: PathBuf,
    /// First month (`YYYY-MM`) of the sample; unbounded when absent.
    pub from: Option<String>,
    pub to: Option<String>,
    /// `ew` or `vw`; both when absent.
    pub weights: Option<String>,
    pub buckets: usize,
    pub lags: Vec<String>,
    /// `pooled`, `per_period` or `nyse`.
    pub breakpoints: String,
    pub models: Vec<String>,
    pub nw_lags: Option<usize>,
    /// `classic` or `nw`.
    pub fm_standard_errors: String,
    pub regression_stars: Vec<f64>,
    pub correlation_stars: Vec<f64>,
    pub link_lag_months: u32,
    pub link_expiry_months: u32,
    /// Explicit `[from, to]` month pairs; the sample is halved when empty.
    pub subperiods: Vec<[String; 2]>,
    /// Upper relative-size bound of the small-customer subsample.
    pub rel_size_cap: f64,
    pub daily_lags: Vec<String>,
    pub daily_horizons: Vec<u32>,
    /// Two-sided per-period winsorization of every signal, e.g. 0.01; off when absent.
    pub winsorize: Option<f64>,
    /// Overrides `synth.seed`.
    pub seed: Option<u64>,
    /// Worker threads; does not affect results and is left out of the hash.
    pub threads: Option<usize>,
    /// One output format; all three when absent.
    pub format: Option<String>,
    pub synth: DgpConfig,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            data_dir: PathBuf::from("data"),
            out_dir: PathBuf::from("out"),
            from: None,
            to: None,
            weights: None,
            buckets: 10,
            lags: DEFAULT_LAG_GRID.iter().map(|s| s.to_string()).collect(),
            breakpoints: "pooled".into(),
            models: FactorModel::ALL.iter().map(|m| m.label().to_owned()).collect(),
            nw_lags: None,
            fm_standard_errors: "classic".into(),
            regression_stars: StarLevels::regression().levels().to_vec(),
            correlation_stars: StarLevels::correlation().levels().to_vec(),
            link_lag_months: 6,
            link_expiry_months: 12,
            subperiods: Vec::new(),
            rel_size_cap: 2.0,
            daily_lags: ["1-1", "5-1", "10-1", "20-1"].iter().map(|s| s.to_string()).collect(),
            daily_horizons: vec![1, 5, 10, 15, 20, 30],
            winsorize: None,
            seed: None,
            threads: None,
            format: None,
            synth: DgpConfig {
                daily: true,
                beta_leadlag: 0.01,
                attention_delay: 1,
                // Keeps enough small-customer links for the restricted sort.
                log_size_gap: 4f64.ln(),
                ..DgpConfig::default()
            },
        }
    }
}

/// Command-line values that override the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub data_dir: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub from: Option<String>,
    pub to: Option<String>,
    pub weights: Option<String>,
    pub buckets: Option<usize>,
    pub lags: Vec<String>,
    pub nw_lags: Option<usize>,
    pub seed: Option<u64>,
    pub format: Option<String>,
    pub threads: Option<usize>,
}

impl StudyConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("config: {}", e.message())))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(v) = &o.data_dir {
            self.data_dir = v.clone();
        }
        if let Some(v) = &o.out_dir {
            self.out_dir = v.clone();
        }
        if o.from.is_some() {
            self.from = o.from.clone();
        }
        if o.to.is_some() {
            self.to = o.to.clone();
        }
        if o.weights.is_some() {
            self.weights = o.weights.clone();
        }
        if let Some(v) = o.buckets {
            self.buckets = v;
        }
        if !o.lags.is_empty() {
            self.lags = o.lags.clone();
        }
        if o.nw_lags.is_some() {
            self.nw_lags = o.nw_lags;
        }
        if o.seed.is_some() {
            self.seed = o.seed;
        }
        if o.format.is_some() {
            self.format = o.format.clone();
        }
        if o.threads.is_some() {
            self.threads = o.threads;
        }
    }

    /// SHA-256 over the analysis settings, in field order. Paths, output
    /// format and thread count are excluded: they change where results go,
    /// not what they are.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.data_dir = PathBuf::new();
        c.out_dir = PathBuf::new();
        c.threads = None;
        c.format = None;
        let json = serde_json::to_vec(&c).expect("config serializes");
        let digest = Sha256::digest(&json);
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    pub fn synth_config(&self) -> DgpConfig {
        let mut s = self.synth.clone();
        if let Some(seed) = self.seed {
            s.seed = seed;
        }
        s
    }

    pub fn resolve(&self) -> Result<Settings> {
        let cfg_err = |m: String| Error::Config(m);
        let month = |s: &Option<String>, what: &str| -> Result<Option<Month>> {
            s.as_deref()
                .map(|v| {
                    Month::parse(v).ok_or_else(|| cfg_err(format!("{what}: `{v}` is not a YYYY-MM month")))
                })
                .transpose()
        };
        let from = month(&self.from, "from")?;
        let to = month(&self.to, "to")?;
        if let (Some(f), Some(t)) = (from, to) {
            if f > t {
                return Err(cfg_err(format!("date range is reversed: {f} > {t}")));
            }
        }
        let weightings = match &self.weights {
            None => vec![Weighting::Equal, Weighting::Value],
            Some(w) => vec![w.parse().map_err(|e: Error| cfg_err(e.to_string()))?],
        };
        if ![5, 10].contains(&self.buckets) {
            return Err(cfg_err(format!("buckets must be 5 or 10, got {}", self.buckets)));
        }
        let windows = |v: &[String], what: &str| -> Result<Vec<LagWindow>> {
            if v.is_empty() {
                return Err(cfg_err(format!("{what} must not be empty")));
            }
            v.iter()
                .map(|s| s.parse().map_err(|e: Error| cfg_err(format!("{what}: {e}"))))
                .collect()
        };
        let lags = windows(&self.lags, "lags")?;
        let daily_lags = windows(&self.daily_lags, "daily_lags")?;
        let spec = |n: usize| -> Result<BreakpointSpec> {
            match self.breakpoints.as_str() {
                "pooled" => BreakpointSpec::pooled(n),
                "per_period" => BreakpointSpec::per_period(n),
                "nyse" => BreakpointSpec::new(n, BreakpointUniverse::NyseOnly, true),
                other => Err(cfg_err(format!(
                    "breakpoints must be pooled, per_period or nyse, got `{other}`"
                ))),
            }
        };
        let sort_spec = spec(self.buckets)?;
        let quintile_spec = spec(5)?;
        let models = self
            .models
            .iter()
            .map(|m| m.parse().map_err(|e: Error| cfg_err(e.to_string())))
            .collect::<Result<Vec<FactorModel>>>()?;
        if models.is_empty() {
            return Err(cfg_err("models must not be empty".into()));
        }
        let fm_se = match self.fm_standard_errors.as_str() {
            "classic" => FmStandardErrors::Classic,
            "nw" => FmStandardErrors::NeweyWest(self.nw_lags),
            other => return Err(cfg_err(format!("fm_standard_errors must be classic or nw, got `{other}`"))),
        };
        let regression_stars = StarLevels::new(self.regression_stars.clone())
            .map_err(|e| cfg_err(format!("regression_stars: {e}")))?;
        let correlation_stars = StarLevels::new(self.correlation_stars.clone())
            .map_err(|e| cfg_err(format!("correlation_stars: {e}")))?;
        let subperiods = self
            .subperiods
            .iter()
            .map(|[a, b]| {
                let (Some(a), Some(b)) = (Month::parse(a), Month::parse(b)) else {
                    return Err(cfg_err(format!("subperiod `{a}`..`{b}` is not a pair of months")));
                };
                if a > b {
                    return Err(cfg_err(format!("subperiod {a}..{b} is reversed")));
                }
                Ok((a, b))
            })
            .collect::<Result<Vec<_>>>()?;
        if !(self.rel_size_cap > 0.0) {
            return Err(cfg_err("rel_size_cap must be positive".into()));
        }
        if self.daily_horizons.is_empty() || self.daily_horizons.contains(&0) {
            return Err(cfg_err("daily_horizons must be non-empty and positive".into()));
        }
        if let Some(p) = self.winsorize {
            if !(0.0..0.5).contains(&p) {
                return Err(cfg_err("winsorize must lie in [0, 0.5)".into()));
            }
        }
        if self.link_expiry_months == 0 {
            return Err(cfg_err("link_expiry_months must be at least 1".into()));
        }
        if self.threads == Some(0) {
            return Err(cfg_err("threads must be at least 1".into()));
        }
        let formats = match &self.format {
            None => Format::ALL.to_vec(),
            Some(f) => vec![f.parse()?],
        };
        self.synth_config().validate()?;
        Ok(Settings {
            from,
            to,
            weightings,
            sort_spec,
            quintile_spec,
            lags,
            daily_lags,
            models,
            fm_se,
            regression_stars,
            correlation_stars,
            subperiods,
            formats,
            config_hash: self.hash(),
        })
    }
}

/// Parsed and validated view of a [`StudyConfig`].
#[derive(Debug, Clone)]
pub struct Settings {
    pub from: Option<Month>,
    pub to: Option<Month>,
    pub weightings: Vec<Weighting>,
    pub sort_spec: BreakpointSpec,
    pub quintile_spec: BreakpointSpec,
    pub lags: Vec<LagWindow>,
    pub daily_lags: Vec<LagWindow>,
    pub models: Vec<FactorModel>,
    pub fm_se: FmStandardErrors,
    pub regression_stars: StarLevels,
    pub correlation_stars: StarLevels,
    pub subperiods: Vec<(Month, Month)>,
    pub formats: Vec<Format>,
    pub config_hash: String,
}
