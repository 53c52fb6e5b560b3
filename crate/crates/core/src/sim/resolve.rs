//! Turning a policy kind into a ready-to-run policy for one configuration.

use serde::{Deserialize, Serialize};

use super::monte_carlo::monte_carlo_evaluate;
use crate::channel::{ChannelParams, PolicyConfig};
use crate::error::{domain, Result};
use crate::policy::{
    calibrate_heu_as_you_go, solve_cth, solve_lambda_star, HeuCalibration, Policy, PolicyKind,
    SolverSettings,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ResolveOptions {
    pub solver: SolverSettings,
    /// Initial estimate for the learning policy.
    pub lambda0: Option<f64>,
    /// Use this calibration instead of deriving one from the optimal policy.
    pub heu_calibration: Option<HeuCalibration>,
    pub calibration_horizon: usize,
    pub calibration_reps: usize,
    pub seed: u64,
}

impl Default for ResolveOptions {
    fn default() -> Self {
        ResolveOptions {
            solver: SolverSettings::default(),
            lambda0: None,
            heu_calibration: None,
            calibration_horizon: 10_000,
            calibration_reps: 20,
            seed: 0,
        }
    }
}

pub fn resolve_policy(
    kind: PolicyKind,
    p: &ChannelParams,
    cfg: &PolicyConfig,
    opts: &ResolveOptions,
) -> Result<Policy> {
    Ok(resolve_policies(&[kind], p, cfg, opts)?.remove(0))
}

/// Resolves several kinds at once, solving for the optimal cost per step at
/// most once.
pub fn resolve_policies(
    kinds: &[PolicyKind],
    p: &ChannelParams,
    cfg: &PolicyConfig,
    opts: &ResolveOptions,
) -> Result<Vec<Policy>> {
    let mut lambda_star: Option<f64> = None;
    let lambda = |lambda_star: &mut Option<f64>| -> Result<f64> {
        if let Some(l) = *lambda_star {
            return Ok(l);
        }
        let l = solve_lambda_star(p, cfg, &opts.solver)?.lambda;
        *lambda_star = Some(l);
        Ok(l)
    };
    kinds
        .iter()
        .map(|&kind| {
            Ok(match kind {
                PolicyKind::OptExploreLim => Policy::OptExploreLim { lambda: lambda(&mut lambda_star)? },
                PolicyKind::HeuExploreLim => Policy::HeuExploreLim,
                PolicyKind::OptExploreLimLearning => Policy::OptExploreLimLearning {
                    lambda0: opts
                        .lambda0
                        .ok_or_else(|| domain("the learning policy needs an initial lambda0"))?,
                },
                PolicyKind::OptAsYouGo => {
                    Policy::OptAsYouGo { thresholds: solve_cth(p, cfg, &opts.solver)? }
                }
                PolicyKind::HeuAsYouGo => {
                    let calibration = match &opts.heu_calibration {
                        Some(c) => c.clone(),
                        None => {
                            let opt = Policy::OptExploreLim { lambda: lambda(&mut lambda_star)? };
                            let m = monte_carlo_evaluate(
                                &opt,
                                p,
                                cfg,
                                opts.calibration_horizon,
                                opts.calibration_reps,
                                opts.seed,
                            )?;
                            calibrate_heu_as_you_go(m.mean_power_per_link_mw, m.mean_outage_per_link, cfg)?
                        }
                    };
                    Policy::HeuAsYouGo { calibration, seed: opts.seed }
                }
            })
        })
        .collect()
}
