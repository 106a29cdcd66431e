//! Time-series factor regressions: Jensen alphas and spanning tests.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ols::{design_with_intercept, ols, Covariance, RegressionReport};
use crate::error::{Error, Result};
use crate::factors::{FactorSet, CMA, HML, MKT_RF, RF, RMW, SMB, UMD};
use crate::period::Ordinal;

pub const ALPHA: &str = "alpha";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FactorModel {
    #[serde(rename = "CAPM")]
    Capm,
    #[serde(rename = "CAPM+UMD")]
    CapmUmd,
    #[serde(rename = "FF3")]
    Ff3,
    #[serde(rename = "FF3+UMD")]
    Ff3Umd,
    #[serde(rename = "FF5")]
    Ff5,
    #[serde(rename = "FF5+UMD")]
    Ff5Umd,
}

impl FactorModel {
    pub const ALL: [FactorModel; 6] = [
        FactorModel::Capm,
        FactorModel::CapmUmd,
        FactorModel::Ff3,
        FactorModel::Ff3Umd,
        FactorModel::Ff5,
        FactorModel::Ff5Umd,
    ];

    pub fn factors(self) -> &'static [&'static str] {
        match self {
            FactorModel::Capm => &[MKT_RF],
            FactorModel::CapmUmd => &[MKT_RF, UMD],
            FactorModel::Ff3 => &[MKT_RF, SMB, HML],
            FactorModel::Ff3Umd => &[MKT_RF, SMB, HML, UMD],
            FactorModel::Ff5 => &[MKT_RF, SMB, HML, RMW, CMA],
            FactorModel::Ff5Umd => &[MKT_RF, SMB, HML, RMW, CMA, UMD],
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            FactorModel::Capm => "CAPM",
            FactorModel::CapmUmd => "CAPM+UMD",
            FactorModel::Ff3 => "FF3",
            FactorModel::Ff3Umd => "FF3+UMD",
            FactorModel::Ff5 => "FF5",
            FactorModel::Ff5Umd => "FF5+UMD",
        }
    }
}

impl fmt::Display for FactorModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for FactorModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_uppercase().replace(' ', "");
        FactorModel::ALL
            .into_iter()
            .find(|m| m.label() == key)
            .ok_or_else(|| Error::Invalid(format!("unknown factor model `{s}`")))
    }
}

/// Regresses `y` on named series with an intercept called `alpha`, using the
/// periods where all series are present.
pub fn time_series_regression(
    y: &BTreeMap<Ordinal, f64>,
    rhs: &[(&str, &BTreeMap<Ordinal, f64>)],
    cov: Covariance,
) -> Result<RegressionReport> {
    let periods: Vec<Ordinal> = y
        .keys()
        .copied()
        .filter(|p| rhs.iter().all(|(_, s)| s.contains_key(p)))
        .collect();
    let yv: Vec<f64> = periods.iter().map(|p| y[p]).collect();
    let cols: Vec<(&str, Vec<f64>)> = rhs
        .iter()
        .map(|(n, s)| (*n, periods.iter().map(|p| s[p]).collect()))
        .collect();
    let (x, names) = if cols.is_empty() {
        (nalgebra::DMatrix::from_element(periods.len(), 1, 1.0), vec![ALPHA.to_owned()])
    } else {
        design_with_intercept(ALPHA, &cols)
    };
    ols(&yv, &x, &names, cov)
}

/// Jensen alpha of `asset` under `model`. With `subtract_rf` the asset is
/// first converted to excess returns; long-short legs should pass `false`.
pub fn alpha_regression(
    asset: &BTreeMap<Ordinal, f64>,
    subtract_rf: bool,
    model: FactorModel,
    factors: &FactorSet,
    cov: Covariance,
) -> Result<RegressionReport> {
    let mut required: Vec<&str> = model.factors().to_vec();
    if subtract_rf {
        required.push(RF);
    }
    let missing = factors.missing(&required);
    if !missing.is_empty() {
        return Err(Error::MissingFactors(
            missing.into_iter().map(str::to_owned).collect(),
        ));
    }
    let y: BTreeMap<Ordinal, f64> = if subtract_rf {
        let rf = factors.get(RF).expect("checked above");
        asset
            .iter()
            .filter_map(|(p, r)| rf.get(p).map(|f| (*p, r - f)))
            .collect()
    } else {
        asset.clone()
    };
    let rhs: Vec<(&str, &BTreeMap<Ordinal, f64>)> = model
        .factors()
        .iter()
        .map(|n| (*n, factors.get(n).expect("checked above")))
        .collect();
    time_series_regression(&y, &rhs, cov)
}

/// Regression of a target factor on a set of other factors.
pub fn spanning_test(
    target: &BTreeMap<Ordinal, f64>,
    rhs: &[(&str, &BTreeMap<Ordinal, f64>)],
    cov: Covariance,
) -> Result<RegressionReport> {
    time_series_regression(target, rhs, cov)
}
