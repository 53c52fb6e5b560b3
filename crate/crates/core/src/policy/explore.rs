//! Exploration-based decisions: measure all `B` candidates, then commit.

use serde::{Deserialize, Serialize};

use super::{Candidate, ExploreMeasurements, PlacementDecision};
use crate::channel::PolicyConfig;
use crate::error::{domain, Result};
use crate::units::dbm_to_mw;

/// Exhaustive argmin over all `(u, gamma)` candidates of `score(u, link_cost)`.
/// Scanning `u` downwards and `gamma` upwards with a strict comparison keeps
/// the first of any tie, i.e. the larger `u` and then the smaller `gamma`.
fn argmin_candidates(
    m: &ExploreMeasurements,
    cfg: &PolicyConfig,
    score: impl Fn(usize, f64) -> f64,
) -> Result<PlacementDecision> {
    if m.horizon() != cfg.horizon_b {
        return Err(domain("measurement horizon does not match the policy horizon"));
    }
    let mut rationale = Vec::with_capacity(cfg.horizon_b * cfg.power_set_dbm.len());
    let mut best: Option<(usize, usize, f64, f64)> = None;
    for u in (1..=cfg.horizon_b).rev() {
        for (k, &dbm) in cfg.power_set_dbm.iter().enumerate() {
            let p = m.at(u)[k];
            let link = dbm_to_mw(dbm) + cfg.xi_o_mw * p;
            let objective = score(u, link);
            rationale.push(Candidate { u, tx_dbm: dbm, objective });
            if best.is_none_or(|b| objective < b.3) {
                best = Some((u, k, link, objective));
            }
        }
    }
    let (u, k, link, _) = best.ok_or_else(|| domain("empty candidate set"))?;
    Ok(PlacementDecision {
        place_at: u,
        tx_dbm: cfg.power_set_dbm[k],
        p_out: m.at(u)[k],
        link_cost_mw: link,
        rationale,
    })
}

/// `argmin (gamma + xi_o P_out + xi_r - lambda u)` over the explored window.
pub fn opt_explore_lim_decide(
    m: &ExploreMeasurements,
    lambda: f64,
    cfg: &PolicyConfig,
) -> Result<PlacementDecision> {
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(domain("lambda must be finite and nonnegative"));
    }
    argmin_candidates(m, cfg, |u, link| link + cfg.xi_r_mw - lambda * u as f64)
}

/// `argmin (gamma + xi_o P_out + xi_r) / u` over the explored window.
pub fn heu_explore_lim_decide(
    m: &ExploreMeasurements,
    cfg: &PolicyConfig,
) -> Result<PlacementDecision> {
    argmin_candidates(m, cfg, |u, link| (link + cfg.xi_r_mw) / u as f64)
}

/// Running cost-per-step estimate used in place of the optimal `lambda`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearningState {
    pub lambda_k: f64,
    pub cum_cost_mw: f64,
    pub cum_steps: usize,
    pub k: usize,
}

impl LearningState {
    pub fn new(lambda0: f64) -> Self {
        LearningState { lambda_k: lambda0, cum_cost_mw: 0.0, cum_steps: 0, k: 0 }
    }
}

pub fn learning_update(
    s: &LearningState,
    placed: &PlacementDecision,
    cfg: &PolicyConfig,
) -> LearningState {
    let cum_cost_mw = s.cum_cost_mw + placed.link_cost_mw + cfg.xi_r_mw;
    let cum_steps = s.cum_steps + placed.place_at;
    LearningState {
        lambda_k: cum_cost_mw / cum_steps as f64,
        cum_cost_mw,
        cum_steps,
        k: s.k + 1,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(b: usize, s: Vec<f64>, xi_o: f64, xi_r: f64) -> PolicyConfig {
        PolicyConfig { step_m: 10.0, horizon_b: b, power_set_dbm: s, xi_o_mw: xi_o, xi_r_mw: xi_r }
    }

    #[test]
    fn two_candidate_examples() {
        let c = cfg(2, vec![0.0], 10.0, 1.0);
        let m = ExploreMeasurements::new(vec![vec![0.01], vec![0.05]], &c).unwrap();
        let d = opt_explore_lim_decide(&m, 0.5, &c).unwrap();
        assert_eq!((d.place_at, d.tx_dbm), (2, 0.0));
        assert!((d.link_cost_mw - 1.5).abs() < 1e-12);
        let h = heu_explore_lim_decide(&m, &c).unwrap();
        assert_eq!(h.place_at, 2);
        let obj: Vec<f64> = h.rationale.iter().map(|c| c.objective).collect();
        assert!((obj[0] - 1.25).abs() < 1e-12 && (obj[1] - 2.1).abs() < 1e-12);
    }

    #[test]
    fn ties_prefer_larger_u_then_lower_power() {
        let c = cfg(3, vec![-10.0, 0.0], 0.0, 0.0);
        let m = ExploreMeasurements::new(vec![vec![0.0, 0.0]; 3], &c).unwrap();
        let d = opt_explore_lim_decide(&m, 0.0, &c).unwrap();
        assert_eq!((d.place_at, d.tx_dbm), (3, -10.0));
        let h = heu_explore_lim_decide(&m, &c).unwrap();
        assert_eq!((h.place_at, h.tx_dbm), (3, -10.0));
    }

    #[test]
    fn incomplete_matrix_is_rejected() {
        let c = cfg(3, vec![0.0], 1.0, 1.0);
        assert!(ExploreMeasurements::new(vec![vec![0.1]; 2], &c).is_err());
        assert!(ExploreMeasurements::new(vec![vec![0.1], vec![], vec![0.1]], &c).is_err());
        assert!(ExploreMeasurements::new(vec![vec![1.5]; 3], &c).is_err());
    }

    #[test]
    fn learning_arithmetic() {
        let c = cfg(5, vec![0.0], 10.0, 1.0);
        let d = |u, link| PlacementDecision {
            place_at: u,
            tx_dbm: 0.0,
            p_out: 0.0,
            link_cost_mw: link,
            rationale: vec![],
        };
        let s1 = learning_update(&LearningState::new(0.5), &d(2, 1.1), &c);
        assert!((s1.lambda_k - 1.05).abs() < 1e-12);
        let s2 = learning_update(&s1, &d(3, 0.9), &c);
        assert!((s2.lambda_k - 0.8).abs() < 1e-12);
        assert_eq!((s2.k, s2.cum_steps), (2, 5));
    }
}
