//! Fama-MacBeth two-pass regressions of returns on signals.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use super::ols::{ols, Covariance, CovarianceTag};
use super::stats::{mean, sample_sd};
use crate::error::{Error, Result};
use crate::panel::{FirmId, ReturnPanel};
use crate::period::Ordinal;
use crate::signals::SignalPanel;

pub const INTERCEPT: &str = "intercept";

/// Second-pass standard errors of the slope series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
pub enum FmStandardErrors {
    /// `sd(slopes) / sqrt(N)`.
    #[default]
    Classic,
    NeweyWest(Option<usize>),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FmReport {
    pub names: Vec<String>,
    pub mean: Vec<f64>,
    /// Absent with a single included period.
    pub se: Vec<Option<f64>>,
    pub t: Vec<Option<f64>>,
    pub mean_adj_r2: f64,
    /// R² of one OLS over the stacked complete-case sample.
    pub pooled_r2: Option<f64>,
    pub n_periods: usize,
    pub n_obs: usize,
    pub skipped_periods: usize,
    pub se_kind: String,
}

impl FmReport {
    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }
}

/// A regressor: a signal name, or a raw product `a*b` of two signals.
fn regressor_value(signals: &SignalPanel, name: &str, firm: FirmId, t: Ordinal) -> Option<f64> {
    match name.split_once('*') {
        Some((a, b)) => Some(signals.get(a.trim(), firm, t)? * signals.get(b.trim(), firm, t)?),
        None => signals.get(name, firm, t),
    }
}

/// A period, its cross-section and the fitted slopes with adjusted R².
type PeriodFit = (Ordinal, CrossSection, Option<(Vec<f64>, f64)>);

struct CrossSection {
    y: Vec<f64>,
    x: DMatrix<f64>,
}

fn cross_section(
    panel: &ReturnPanel,
    signals: &SignalPanel,
    regressors: &[String],
    sample: &[String],
    t: Ordinal,
) -> CrossSection {
    let mut y = Vec::new();
    let mut rows: Vec<f64> = Vec::new();
    'firms: for o in panel.cross_section(t) {
        for s in sample {
            if regressor_value(signals, s, o.firm, t).is_none() {
                continue 'firms;
            }
        }
        let mut row = Vec::with_capacity(regressors.len());
        for r in regressors {
            match regressor_value(signals, r, o.firm, t) {
                Some(v) => row.push(v),
                None => continue 'firms,
            }
        }
        y.push(o.ret);
        rows.push(1.0);
        rows.extend(row);
    }
    let k = regressors.len() + 1;
    CrossSection {
        x: DMatrix::from_row_slice(y.len(), k, &rows),
        y,
    }
}

/// Per-period cross-sectional OLS of the return at `t` on signals stamped
/// `t`, averaged over periods. `sample` names extra signals that must also be
/// present, which lets several specifications share one complete-case sample.
pub fn fama_macbeth(
    panel: &ReturnPanel,
    signals: &SignalPanel,
    regressors: &[String],
    sample: &[String],
    se_kind: FmStandardErrors,
) -> Result<FmReport> {
    if regressors.is_empty() {
        return Err(Error::Invalid("Fama-MacBeth needs at least one regressor".into()));
    }
    let names: Vec<String> = std::iter::once(INTERCEPT.to_owned())
        .chain(regressors.iter().cloned())
        .collect();
    let k = names.len();
    let periods: Vec<Ordinal> = panel.periods().collect();
    let fits: Vec<PeriodFit> = periods
        .par_iter()
        .map(|&t| {
            let cs = cross_section(panel, signals, regressors, sample, t);
            let fit = (cs.y.len() > k)
                .then(|| ols(&cs.y, &cs.x, &names, Covariance::Plain).ok())
                .flatten()
                .map(|r| (r.coef, r.adj_r2));
            (t, cs, fit)
        })
        .collect();

    let mut slopes: Vec<Vec<f64>> = vec![Vec::new(); k];
    let mut adj = Vec::new();
    let mut skipped = 0;
    let (mut pooled_y, mut pooled_x) = (Vec::new(), Vec::new());
    for (_, cs, fit) in &fits {
        match fit {
            Some((coef, a)) => {
                for (j, c) in coef.iter().enumerate() {
                    slopes[j].push(*c);
                }
                adj.push(*a);
                pooled_y.extend_from_slice(&cs.y);
                for i in 0..cs.y.len() {
                    pooled_x.extend(cs.x.row(i).iter());
                }
            }
            None if !cs.y.is_empty() => skipped += 1,
            None => {}
        }
    }
    let n_periods = adj.len();
    if n_periods == 0 {
        return Err(Error::NoValidPeriods(format!(
            "no cross-section with more than {k} complete observations for {}",
            regressors.join(", ")
        )));
    }

    let mut means = Vec::with_capacity(k);
    let mut ses = Vec::with_capacity(k);
    let mut ts = Vec::with_capacity(k);
    let tag;
    match se_kind {
        FmStandardErrors::Classic => {
            tag = "classic".to_owned();
            for s in &slopes {
                let m = if s.iter().all(|v| *v == s[0]) { s[0] } else { mean(s) };
                let se = (n_periods > 1).then(|| sample_sd(s) / (n_periods as f64).sqrt());
                means.push(m);
                ts.push(se.filter(|e| *e > 0.0).map(|e| m / e));
                ses.push(se);
            }
        }
        FmStandardErrors::NeweyWest(lags) => {
            let mut resolved = CovarianceTag::Ols;
            for s in &slopes {
                let m = if s.iter().all(|v| *v == s[0]) { s[0] } else { mean(s) };
                let se = if n_periods < 2 {
                    None
                } else if sample_sd(s) == 0.0 {
                    Some(0.0)
                } else {
                    let one = DMatrix::from_element(n_periods, 1, 1.0);
                    let r = ols(s, &one, &["mean".to_owned()], Covariance::NeweyWest(lags))?;
                    resolved = r.covariance;
                    Some(r.se[0])
                };
                means.push(m);
                ts.push(se.filter(|e| *e > 0.0).map(|e| m / e));
                ses.push(se);
            }
            tag = resolved.to_string();
        }
    }

    let n_obs = pooled_y.len();
    let pooled_r2 = ols(
        &pooled_y,
        &DMatrix::from_row_slice(n_obs, k, &pooled_x),
        &names,
        Covariance::Plain,
    )
    .ok()
    .map(|r| r.r2);

    Ok(FmReport {
        names,
        mean: means,
        se: ses,
        t: ts,
        mean_adj_r2: mean(&adj),
        pooled_r2,
        n_periods,
        n_obs,
        skipped_periods: skipped,
        se_kind: tag,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel::ReturnRecord;
    use crate::period::Timeline;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn world(n_firms: usize, n_periods: i32, identical: bool, seed: u64) -> (ReturnPanel, SignalPanel) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let xs: Vec<f64> = (0..n_firms).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut recs = Vec::new();
        let mut sig = Vec::new();
        for t in 0..n_periods {
            for f in 0..n_firms {
                let x = if identical { xs[f] } else { rng.random_range(-1.0..1.0) };
                let e = if identical { xs[(f + 1) % n_firms] * 0.1 } else { rng.random_range(-0.1..0.1) };
                recs.push(ReturnRecord {
                    firm: format!("F{f:03}"),
                    period: t,
                    ret: 0.01 + 0.04 * x + e,
                    me: None,
                    volume: None,
                    exchange: None,
                });
                sig.push((f, t, x));
            }
        }
        let panel = ReturnPanel::from_records(Timeline::Monthly, recs).unwrap();
        let mut s = SignalPanel::new(&panel);
        for (f, t, x) in sig {
            s.insert("x", FirmId(f as u32), t, x).unwrap();
            s.insert("z", FirmId(f as u32), t, (x * 3.0).sin()).unwrap();
        }
        (panel, s)
    }

    #[test]
    fn single_period_equals_ols() {
        let (p, s) = world(30, 1, false, 1);
        let r = fama_macbeth(&p, &s, &["x".into()], &[], FmStandardErrors::Classic).unwrap();
        assert_eq!(r.n_periods, 1);
        assert_eq!(r.se, vec![None, None]);
        let cs = cross_section(&p, &s, &["x".into()], &[], 0);
        let o = ols(&cs.y, &cs.x, &["i".into(), "x".into()], Covariance::Plain).unwrap();
        assert_eq!(r.mean[1], o.coef[1]);
    }

    #[test]
    fn identical_cross_sections_have_zero_se() {
        let (p, s) = world(25, 12, true, 2);
        for kind in [FmStandardErrors::Classic, FmStandardErrors::NeweyWest(None)] {
            let r = fama_macbeth(&p, &s, &["x".into(), "z".into()], &[], kind).unwrap();
            assert!(r.se.iter().all(|e| *e == Some(0.0)), "{:?}", r.se);
            assert!(r.t.iter().all(Option::is_none));
        }
    }

    #[test]
    fn planted_slope_is_recovered() {
        let (p, s) = world(200, 120, false, 3);
        let r = fama_macbeth(&p, &s, &["x".into()], &[], FmStandardErrors::Classic).unwrap();
        let se = r.se[1].unwrap();
        assert!((r.mean[1] - 0.04).abs() < 2.0 * se, "{} ± {se}", r.mean[1]);
        assert_eq!(r.n_obs, 200 * 120);
    }

    #[test]
    fn interaction_and_common_sample() {
        let (p, mut s) = world(40, 6, false, 4);
        // drop "w" for half the firms; the common sample then excludes them from the "x" spec too
        for f in 0..20 {
            for t in 0..6 {
                s.insert("w", FirmId(f), t, 1.0 + f as f64).unwrap();
            }
        }
        let narrow = fama_macbeth(&p, &s, &["x".into()], &["w".into()], FmStandardErrors::Classic).unwrap();
        assert_eq!(narrow.n_obs, 120);
        let inter = fama_macbeth(&p, &s, &["x".into(), "w".into(), "x*w".into()], &[], FmStandardErrors::Classic).unwrap();
        assert_eq!(inter.n_obs, 120);
        assert_eq!(inter.names[3], "x*w");
    }

    #[test]
    fn no_valid_periods_is_an_error() {
        let (p, s) = world(2, 3, false, 5);
        assert!(matches!(
            fama_macbeth(&p, &s, &["x".into(), "z".into()], &[], FmStandardErrors::Classic),
            Err(Error::NoValidPeriods(_))
        ));
    }
}
