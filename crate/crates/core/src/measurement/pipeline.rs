//! End-to-end analysis of a set of recorded links.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::gudmundson::{
    decorrelation_distance, fit_gudmundson_mle, shadowing_residuals, FitOptions, GudmundsonFit,
    LinkRecord,
};
use super::hypothesis::{correlation_hypothesis_test, ks_normality_test, CorrelationTest, KsTest};
use super::trace::{good_bad_run_analysis, outage_from_trace, RssiTrace, RunLengthStats};
use crate::error::{domain, Result};

/// Where and how one trace was recorded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkMeta {
    pub realization_id: u32,
    pub distance_m: f64,
    pub tx_dbm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateOptions {
    pub r0_m: f64,
    /// Receiver threshold for per-link outage; skipped when absent.
    pub rcv_min_dbm: Option<f64>,
    pub alpha: f64,
    pub rho_cutoff: f64,
    pub run_offset_db: f64,
}

impl Default for EstimateOptions {
    fn default() -> Self {
        EstimateOptions { r0_m: 1.0, rcv_min_dbm: Some(-88.0), alpha: 0.05, rho_cutoff: 0.1, run_offset_db: 20.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkSummary {
    #[serde(flatten)]
    pub meta: LinkMeta,
    pub packets: usize,
    pub mean_rx_dbm: f64,
    pub outage: Option<f64>,
    pub runs: RunLengthStats,
}

/// Correlation test between shadowing of links whose receivers are
/// `separation_m` apart, pooled over realizations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparationTest {
    pub separation_m: f64,
    pub test: CorrelationTest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub fit: GudmundsonFit,
    pub decorrelation_m: f64,
    pub correlation_tests: Vec<SeparationTest>,
    pub ks: KsTest,
    pub links: Vec<LinkSummary>,
}

/// Fits the shadowing model to the fading-averaged power of every trace,
/// then tests the residuals for decorrelation and normality.
pub fn estimate_from_traces(
    links: &[(LinkMeta, RssiTrace)],
    opts: &EstimateOptions,
) -> Result<EstimateReport> {
    if links.is_empty() {
        return Err(domain("no traces to analyse"));
    }
    let mut summaries = Vec::with_capacity(links.len());
    let mut records = Vec::with_capacity(links.len());
    for (meta, trace) in links {
        trace.validate()?;
        let mean_rx_dbm = trace.mean_power_dbm();
        records.push(LinkRecord {
            realization_id: meta.realization_id,
            distance_m: meta.distance_m,
            mean_rx_dbm,
            tx_dbm: meta.tx_dbm,
        });
        summaries.push(LinkSummary {
            meta: meta.clone(),
            packets: trace.samples_dbm.len(),
            mean_rx_dbm,
            outage: opts.rcv_min_dbm.map(|th| outage_from_trace(trace, th)).transpose()?,
            runs: good_bad_run_analysis(trace, opts.run_offset_db)?,
        });
    }
    let fit = fit_gudmundson_mle(&records, opts.r0_m, &FitOptions::default())?;
    let decorrelation_m = decorrelation_distance(fit.decorr_d_m, opts.rho_cutoff)?;
    let residuals = shadowing_residuals(&records, opts.r0_m, &fit.theta());

    let mut by_realization: BTreeMap<u32, Vec<(f64, f64)>> = BTreeMap::new();
    for (rec, nu) in records.iter().zip(&residuals) {
        by_realization.entry(rec.realization_id).or_default().push((rec.distance_m, *nu));
    }
    // separations keyed in millimetres so equal spacings pool together
    let mut pairs: BTreeMap<i64, Vec<(f64, f64)>> = BTreeMap::new();
    for links in by_realization.values() {
        for (i, a) in links.iter().enumerate() {
            for b in &links[i + 1..] {
                let key = ((a.0 - b.0).abs() * 1000.0).round() as i64;
                if key > 0 {
                    pairs.entry(key).or_default().push((a.1, b.1));
                }
            }
        }
    }
    let correlation_tests = pairs
        .into_iter()
        .filter(|(_, v)| v.len() >= 3)
        .filter_map(|(key, v)| {
            correlation_hypothesis_test(&v, opts.alpha)
                .ok()
                .map(|test| SeparationTest { separation_m: key as f64 / 1000.0, test })
        })
        .collect();
    let ks = ks_normality_test(&residuals, fit.sigma_db, opts.alpha)?;
    Ok(EstimateReport { fit, decorrelation_m, correlation_tests, ks, links: summaries })
}
