//! Relay placement policies and their offline solvers.
//!
//! Two families share this module. Exploration policies measure all `B`
//! candidate locations ahead of the last relay before committing
//! (`OptExploreLim`, `HeuExploreLim`, `OptExploreLimLearning`); pure
//! as-you-go policies decide at every step (`OptAsYouGo`, `HeuAsYouGo`).
//! `OptExploreAll` is the shortest-path baseline over a fully measured trail.

mod as_you_go;
mod explore;
mod explore_all;
mod solver;

use serde::{Deserialize, Serialize};

pub use as_you_go::{
    calibrate_heu_as_you_go, heu_as_you_go_step, opt_as_you_go_decide, AsYouGoAction, HeuAction,
    HeuCalibration, HeuState, PowerMix,
};
pub use explore::{heu_explore_lim_decide, learning_update, opt_explore_lim_decide, LearningState};
pub use explore_all::{last_segment_patch, opt_explore_all, PatchChoice};
pub use solver::{
    solve_cth, solve_cth_quadrature, solve_lambda_star, AsYouGoThresholds, LambdaSolution,
    SolverSettings,
};

use crate::channel::PolicyConfig;
use crate::error::{domain, Result};
use crate::units::dbm_to_mw;

/// Outages measured from the `B` locations ahead of the last relay,
/// `outage[r - 1][k]` at power level `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExploreMeasurements {
    outage: Vec<Vec<f64>>,
}

impl ExploreMeasurements {
    pub fn new(outage: Vec<Vec<f64>>, cfg: &PolicyConfig) -> Result<Self> {
        if outage.len() != cfg.horizon_b {
            return Err(domain(format!(
                "incomplete measurements: have {} of {} locations",
                outage.len(),
                cfg.horizon_b
            )));
        }
        for (i, row) in outage.iter().enumerate() {
            check_row(row, cfg).map_err(|e| domain(format!("location {}: {e}", i + 1)))?;
        }
        Ok(Self { outage })
    }

    pub fn at(&self, r: usize) -> &[f64] {
        &self.outage[r - 1]
    }

    pub fn horizon(&self) -> usize {
        self.outage.len()
    }
}

pub(crate) fn check_row(row: &[f64], cfg: &PolicyConfig) -> Result<()> {
    if row.len() != cfg.power_set_dbm.len() {
        return Err(domain(format!(
            "expected {} power levels, got {}",
            cfg.power_set_dbm.len(),
            row.len()
        )));
    }
    if row.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(domain("outage outside [0, 1]"));
    }
    Ok(())
}

/// One evaluated `(u, gamma)` candidate and its objective value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub u: usize,
    pub tx_dbm: f64,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacementDecision {
    /// Steps from the previous node.
    pub place_at: usize,
    pub tx_dbm: f64,
    pub p_out: f64,
    /// `gamma_mw + xi_o p_out`, without the relay cost.
    pub link_cost_mw: f64,
    pub rationale: Vec<Candidate>,
}

/// Cheapest power for one link: `argmin_gamma (gamma_mw + xi_o p_out)`,
/// ties towards the lower power. Returns `(index, cost)`.
pub fn best_power(row: &[f64], cfg: &PolicyConfig) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (k, (&dbm, &p)) in cfg.power_set_dbm.iter().zip(row).enumerate() {
        let c = dbm_to_mw(dbm) + cfg.xi_o_mw * p;
        if c < best.1 {
            best = (k, c);
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    OptExploreLim,
    HeuExploreLim,
    OptExploreLimLearning,
    OptAsYouGo,
    HeuAsYouGo,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 5] = [
        PolicyKind::OptExploreLim,
        PolicyKind::HeuExploreLim,
        PolicyKind::OptExploreLimLearning,
        PolicyKind::OptAsYouGo,
        PolicyKind::HeuAsYouGo,
    ];

    pub fn abbreviation(self) -> &'static str {
        match self {
            PolicyKind::OptExploreLim => "OEL",
            PolicyKind::HeuExploreLim => "HEL",
            PolicyKind::OptExploreLimLearning => "OELL",
            PolicyKind::OptAsYouGo => "OAYG",
            PolicyKind::HeuAsYouGo => "HAYG",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::OptExploreLim => "opt_explore_lim",
            PolicyKind::HeuExploreLim => "heu_explore_lim",
            PolicyKind::OptExploreLimLearning => "opt_explore_lim_learning",
            PolicyKind::OptAsYouGo => "opt_as_you_go",
            PolicyKind::HeuAsYouGo => "heu_as_you_go",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        let s = s.trim();
        Self::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s) || k.abbreviation().eq_ignore_ascii_case(s))
    }

    pub fn explores(self) -> bool {
        matches!(
            self,
            PolicyKind::OptExploreLim | PolicyKind::HeuExploreLim | PolicyKind::OptExploreLimLearning
        )
    }
}

impl std::fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// A policy with everything it needs to make decisions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Policy {
    OptExploreLim { lambda: f64 },
    HeuExploreLim,
    OptExploreLimLearning { lambda0: f64 },
    OptAsYouGo { thresholds: AsYouGoThresholds },
    /// `seed` drives the per-relay draw from the power mix.
    HeuAsYouGo { calibration: HeuCalibration, seed: u64 },
}

impl Policy {
    pub fn kind(&self) -> PolicyKind {
        match self {
            Policy::OptExploreLim { .. } => PolicyKind::OptExploreLim,
            Policy::HeuExploreLim => PolicyKind::HeuExploreLim,
            Policy::OptExploreLimLearning { .. } => PolicyKind::OptExploreLimLearning,
            Policy::OptAsYouGo { .. } => PolicyKind::OptAsYouGo,
            Policy::HeuAsYouGo { .. } => PolicyKind::HeuAsYouGo,
        }
    }
}
