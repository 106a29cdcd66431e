//! OLS with Newey-West covariance, factor regressions, Fama-MacBeth,
//! summary statistics and correlations.

mod fm;
mod ols;
mod stats;
mod timeseries;

pub use fm::{fama_macbeth, FmReport, FmStandardErrors, INTERCEPT};
pub use ols::{
    default_nw_lags, design_with_intercept, hc0_covariance, ols, Covariance, CovarianceTag,
    RegressionReport,
};
pub use stats::{
    correlation_matrix, correlation_p_value, mean, normal_p_value, pearson, sample_sd,
    sharpe_ratio, summary_stats, CorrelationCell, CorrelationMatrix, StarLevels, SummaryStats,
};
pub use timeseries::{alpha_regression, spanning_test, time_series_regression, FactorModel, ALPHA};
