//! Deployed-network bookkeeping: hops, totals and the network cost.

use serde::{Deserialize, Serialize};

use crate::channel::PolicyConfig;
use crate::error::{domain, Result};
use crate::units::dbm_to_mw;

/// One deployed link; `from` transmits to `to`, which is nearer the sink.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hop {
    pub from: usize,
    pub to: usize,
    pub length_steps: usize,
    pub tx_dbm: f64,
    pub p_out: f64,
}

impl Hop {
    /// `gamma_mw + xi_o * p_out`; the relay cost is charged separately.
    pub fn link_cost_mw(&self, cfg: &PolicyConfig) -> f64 {
        dbm_to_mw(self.tx_dbm) + cfg.xi_o_mw * self.p_out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Totals {
    pub total_power_mw: f64,
    pub sum_outage: f64,
    pub relays: usize,
    pub total_cost_mw: f64,
}

impl Totals {
    /// Network cost `sum Gamma_i + xi_o sum P_out + xi_r N`. The source node
    /// is not a relay and is never charged `xi_r`.
    pub fn from_hops(hops: &[Hop], relays: usize, cfg: &PolicyConfig) -> Self {
        let total_power_mw: f64 = hops.iter().map(|h| dbm_to_mw(h.tx_dbm)).sum();
        let sum_outage: f64 = hops.iter().map(|h| h.p_out).sum();
        Totals {
            total_power_mw,
            sum_outage,
            relays,
            total_cost_mw: total_power_mw + cfg.xi_o_mw * sum_outage + cfg.xi_r_mw * relays as f64,
        }
    }
}

/// Outcome of deploying one policy between a sink and a source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeploymentResult {
    pub policy: String,
    pub sink: usize,
    pub source: usize,
    pub relay_locations: Vec<usize>,
    /// Hops ordered from the sink outwards.
    pub hops: Vec<Hop>,
    /// Location pairs evaluated; all power levels at one pair count once.
    pub measurements: usize,
    pub totals: Totals,
}

impl DeploymentResult {
    pub fn new(
        policy: impl Into<String>,
        sink: usize,
        source: usize,
        hops: Vec<Hop>,
        measurements: usize,
        cfg: &PolicyConfig,
    ) -> Self {
        let relay_locations: Vec<usize> =
            hops.iter().map(|h| h.from).filter(|&loc| loc != source).collect();
        let totals = Totals::from_hops(&hops, relay_locations.len(), cfg);
        DeploymentResult {
            policy: policy.into(),
            sink,
            source,
            relay_locations,
            hops,
            measurements,
            totals,
        }
    }

    /// Checks hop chaining, relay ordering and that totals match the hops.
    pub fn validate(&self, cfg: &PolicyConfig) -> Result<()> {
        let mut at = self.sink;
        for h in &self.hops {
            if h.to != at || h.from <= h.to || h.length_steps != h.from - h.to {
                return Err(domain(format!("hop {} -> {} does not chain from {at}", h.from, h.to)));
            }
            at = h.from;
        }
        if at != self.source {
            return Err(domain("hops do not reach the source"));
        }
        if self.relay_locations.windows(2).any(|w| w[0] >= w[1]) {
            return Err(domain("relay locations are not strictly increasing"));
        }
        let expect = Totals::from_hops(&self.hops, self.relay_locations.len(), cfg);
        if expect != self.totals {
            return Err(domain("totals disagree with hops"));
        }
        Ok(())
    }
}
