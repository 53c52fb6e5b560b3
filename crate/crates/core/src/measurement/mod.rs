//! Statistical analysis of field measurements: outage estimation from RSSI
//! traces, Gudmundson shadowing fits, decorrelation and normality tests, and
//! Good/Bad fading run lengths.

mod gudmundson;
mod hypothesis;
mod pipeline;
mod synth;
mod trace;

pub use gudmundson::{
    decorrelation_distance, fit_gudmundson_mle, log_likelihood, shadowing_residuals, FitOptions,
    GudmundsonFit, LinkRecord, Theta,
};
pub use hypothesis::{
    correlation_critical_value, correlation_hypothesis_test, kolmogorov_cdf, ks_critical_value,
    ks_normality_test, ks_statistic, CorrelationTest, KsTest,
};
pub use pipeline::{
    estimate_from_traces, EstimateOptions, EstimateReport, LinkMeta, LinkSummary, SeparationTest,
};
pub use synth::{synthesize_link_records, synthesize_rssi_trace};
pub use trace::{good_bad_run_analysis, outage_from_trace, RssiTrace, RunLengthStats};
