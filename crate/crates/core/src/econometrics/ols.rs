//! Least squares with plain or Newey-West covariance.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};

/// Relative size of a QR diagonal entry below which a column is treated as a
/// linear combination of the preceding ones.
const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Covariance {
    Plain,
    /// Bartlett-kernel HAC; `None` picks `floor(4 (T/100)^(2/9))`.
    NeweyWest(Option<usize>),
}

/// Covariance estimator actually used, with the lag resolved.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CovarianceTag {
    Ols,
    NeweyWest { lags: usize },
}

impl fmt::Display for CovarianceTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CovarianceTag::Ols => f.write_str("OLS"),
            CovarianceTag::NeweyWest { lags } => write!(f, "NW(lags={lags})"),
        }
    }
}

impl Serialize for CovarianceTag {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

pub fn default_nw_lags(n_obs: usize) -> usize {
    (4.0 * (n_obs as f64 / 100.0).powf(2.0 / 9.0)).floor() as usize
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegressionReport {
    pub names: Vec<String>,
    pub coef: Vec<f64>,
    pub se: Vec<f64>,
    /// `coef / se`, absent where the standard error is zero.
    pub t: Vec<Option<f64>>,
    pub r2: f64,
    pub adj_r2: f64,
    pub n_obs: usize,
    pub covariance: CovarianceTag,
    pub resid_sd: f64,
}

impl RegressionReport {
    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn coef_of(&self, name: &str) -> Option<f64> {
        self.index_of(name).map(|i| self.coef[i])
    }

    pub fn t_of(&self, name: &str) -> Option<f64> {
        self.index_of(name).and_then(|i| self.t[i])
    }
}

/// Intermediate fit shared by every covariance estimator.
struct Fit {
    beta: DVector<f64>,
    xtx_inv: DMatrix<f64>,
    resid: DVector<f64>,
}

fn fit(y: &DVector<f64>, x: &DMatrix<f64>, names: &[String]) -> Result<Fit> {
    let (t, k) = x.shape();
    if t <= k {
        return Err(Error::InsufficientObservations {
            n_obs: t,
            n_regressors: k,
        });
    }
    let qr = x.clone().qr();
    let r = qr.r();
    let scale = (0..k).map(|j| r[(j, j)].abs()).fold(0.0, f64::max);
    let collinear: Vec<String> = (0..k)
        .filter(|&j| !(r[(j, j)].abs() > RANK_TOLERANCE * scale.max(f64::MIN_POSITIVE)))
        .map(|j| names[j].clone())
        .collect();
    if !collinear.is_empty() {
        return Err(Error::RankDeficient(collinear));
    }
    let qty = qr.q().transpose() * y;
    let beta = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::RankDeficient(names.to_vec()))?;
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(k, k))
        .ok_or_else(|| Error::RankDeficient(names.to_vec()))?;
    let xtx_inv = &r_inv * r_inv.transpose();
    let resid = y - x * &beta;
    Ok(Fit {
        beta,
        xtx_inv,
        resid,
    })
}

/// Bartlett-weighted HAC "meat" `sum_l w_l (G_l + G_l')` with
/// `G_l = sum_t u_t u_{t-l} x_t x_{t-l}'`, sandwiched by `(X'X)^-1`.
fn sandwich(x: &DMatrix<f64>, resid: &DVector<f64>, xtx_inv: &DMatrix<f64>, lags: usize) -> DMatrix<f64> {
    let (t, k) = x.shape();
    let mut z = x.clone();
    for (i, mut row) in z.row_iter_mut().enumerate() {
        row *= resid[i];
    }
    let mut meat = z.transpose() * &z;
    for l in 1..=lags.min(t.saturating_sub(1)) {
        let w = 1.0 - l as f64 / (lags as f64 + 1.0);
        let lead = z.rows(l, t - l);
        let lag = z.rows(0, t - l);
        let g = lead.transpose() * lag;
        meat += (&g + g.transpose()) * w;
    }
    debug_assert_eq!(meat.shape(), (k, k));
    xtx_inv * meat * xtx_inv
}

/// Heteroskedasticity-robust (HC0) covariance of OLS coefficients.
pub fn hc0_covariance(y: &[f64], x: &DMatrix<f64>, names: &[String]) -> Result<DMatrix<f64>> {
    let yv = DVector::from_column_slice(y);
    let f = fit(&yv, x, names)?;
    Ok(sandwich(x, &f.resid, &f.xtx_inv, 0))
}

/// OLS of `y` on the columns of `x` (include an intercept column yourself).
pub fn ols(y: &[f64], x: &DMatrix<f64>, names: &[String], cov: Covariance) -> Result<RegressionReport> {
    let (t, k) = x.shape();
    if y.len() != t || names.len() != k {
        return Err(Error::Invalid(format!(
            "regression shape mismatch: {} observations, {}x{} design, {} names",
            y.len(),
            t,
            k,
            names.len()
        )));
    }
    if let Some(bad) = y.iter().chain(x.iter()).find(|v| !v.is_finite()) {
        return Err(Error::Invalid(format!("non-finite regression input {bad}")));
    }
    let yv = DVector::from_column_slice(y);
    let f = fit(&yv, x, names)?;
    let ssr = f.resid.norm_squared();
    let dof = (t - k) as f64;
    let (vcov, tag) = match cov {
        Covariance::Plain => (&f.xtx_inv * (ssr / dof), CovarianceTag::Ols),
        Covariance::NeweyWest(lags) => {
            let lags = lags.unwrap_or_else(|| default_nw_lags(t));
            (
                sandwich(x, &f.resid, &f.xtx_inv, lags),
                CovarianceTag::NeweyWest { lags },
            )
        }
    };
    let mean_y = y.iter().sum::<f64>() / t as f64;
    let sst: f64 = y.iter().map(|v| (v - mean_y).powi(2)).sum();
    let r2 = if sst > 0.0 { 1.0 - ssr / sst } else { 1.0 };
    let adj_r2 = 1.0 - (1.0 - r2) * (t as f64 - 1.0) / dof;
    let coef: Vec<f64> = f.beta.iter().copied().collect();
    let se: Vec<f64> = (0..k).map(|i| vcov[(i, i)].max(0.0).sqrt()).collect();
    let tstat = coef
        .iter()
        .zip(&se)
        .map(|(c, s)| (*s > 0.0).then(|| c / s))
        .collect();
    Ok(RegressionReport {
        names: names.to_vec(),
        coef,
        se,
        t: tstat,
        r2,
        adj_r2,
        n_obs: t,
        covariance: tag,
        resid_sd: (ssr / dof).sqrt(),
    })
}

/// Design matrix with a leading intercept column named `intercept_name`.
pub fn design_with_intercept(intercept_name: &str, columns: &[(&str, Vec<f64>)]) -> (DMatrix<f64>, Vec<String>) {
    let t = columns.first().map_or(0, |c| c.1.len());
    let k = columns.len() + 1;
    let x = DMatrix::from_fn(t, k, |i, j| if j == 0 { 1.0 } else { columns[j - 1].1[i] });
    let names = std::iter::once(intercept_name.to_owned())
        .chain(columns.iter().map(|c| c.0.to_owned()))
        .collect();
    (x, names)
}
