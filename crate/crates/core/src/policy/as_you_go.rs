//! Pure as-you-go decisions, taken one step at a time.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{best_power, check_row, AsYouGoThresholds};
use crate::channel::PolicyConfig;
use crate::error::{domain, Result};
use crate::units::dbm_to_mw;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum AsYouGoAction {
    Continue,
    Place { tx_dbm: f64, p_out: f64, link_cost_mw: f64 },
}

fn check_step(r: usize, meas_r: &[f64], cfg: &PolicyConfig) -> Result<()> {
    if r == 0 || r > cfg.horizon_b {
        return Err(domain(format!("step {r} outside 1..={}", cfg.horizon_b)));
    }
    check_row(meas_r, cfg)
}

/// Threshold rule: place at `r` iff the cheapest link cost is within
/// `c_th(r)`. Placement is forced at `B` and at the source.
pub fn opt_as_you_go_decide(
    r: usize,
    meas_r: &[f64],
    th: &AsYouGoThresholds,
    cfg: &PolicyConfig,
    at_source: bool,
) -> Result<AsYouGoAction> {
    check_step(r, meas_r, cfg)?;
    let (k, q) = best_power(meas_r, cfg);
    let place = r == cfg.horizon_b
        || at_source
        || q <= th.threshold(r).ok_or_else(|| domain(format!("no threshold for step {r}")))?;
    Ok(if place {
        AsYouGoAction::Place { tx_dbm: cfg.power_set_dbm[k], p_out: meas_r[k], link_cost_mw: q }
    } else {
        AsYouGoAction::Continue
    })
}

/// Last step from the previous relay at which the target outage was met.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct HeuState {
    pub last_ok: Option<(usize, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum HeuAction {
    Continue,
    PlaceHere { tx_dbm: f64, p_out: f64 },
    /// Step back one location and place there.
    PlaceAtPrevious { steps: usize, tx_dbm: f64, p_out: f64 },
}

/// Fixed-power rule: keep walking while the target outage is met and place
/// at the last location where it was.
pub fn heu_as_you_go_step(
    state: &HeuState,
    r: usize,
    meas_r: &[f64],
    fixed_tx: f64,
    target_outage: f64,
    cfg: &PolicyConfig,
    at_source: bool,
) -> Result<(HeuState, HeuAction)> {
    check_step(r, meas_r, cfg)?;
    let k = cfg
        .power_index(fixed_tx)
        .ok_or_else(|| domain(format!("{fixed_tx} dBm is not in the power set")))?;
    let p_out = meas_r[k];
    if p_out <= target_outage {
        let next = HeuState { last_ok: Some((r, p_out)) };
        if r == cfg.horizon_b || at_source {
            return Ok((next, HeuAction::PlaceHere { tx_dbm: fixed_tx, p_out }));
        }
        return Ok((next, HeuAction::Continue));
    }
    if r == 1 {
        return Ok((HeuState::default(), HeuAction::PlaceHere { tx_dbm: fixed_tx, p_out }));
    }
    let (steps, prev_out) = state
        .last_ok
        .filter(|&(s, _)| s + 1 == r)
        .ok_or_else(|| domain(format!("outage violated at step {r} without a met target at {}", r - 1)))?;
    Ok((
        HeuState::default(),
        HeuAction::PlaceAtPrevious { steps, tx_dbm: fixed_tx, p_out: prev_out },
    ))
}

/// Distribution over at most two adjacent power levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerMix {
    pub levels_dbm: Vec<f64>,
    pub weights: Vec<f64>,
}

impl PowerMix {
    pub fn mean_mw(&self) -> f64 {
        self.levels_dbm.iter().zip(&self.weights).map(|(&l, &w)| w * dbm_to_mw(l)).sum()
    }

    /// One draw; always consumes exactly one uniform so that replays stay
    /// aligned whatever the mix.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (&l, &w) in self.levels_dbm.iter().zip(&self.weights) {
            acc += w;
            if u < acc {
                return l;
            }
        }
        *self.levels_dbm.last().expect("nonempty mix")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeuCalibration {
    pub power_mix: PowerMix,
    pub target_outage: f64,
    /// Set when the requested mean power lay outside the power set.
    #[serde(default)]
    pub clamped: bool,
}

/// Power mix whose mean equals `mean_power_mw`, and target outage equal to
/// `mean_outage`, both taken from the optimal exploring policy. A mean
/// outside the power set is clamped to the nearest level and flagged.
pub fn calibrate_heu_as_you_go(
    mean_power_mw: f64,
    mean_outage: f64,
    cfg: &PolicyConfig,
) -> Result<HeuCalibration> {
    cfg.validate()?;
    if !mean_power_mw.is_finite() || !(0.0..=1.0).contains(&mean_outage) {
        return Err(domain("calibration statistics out of range"));
    }
    let mut levels: Vec<f64> = cfg.power_set_dbm.clone();
    levels.sort_by(f64::total_cmp);
    let mw: Vec<f64> = levels.iter().map(|&l| dbm_to_mw(l)).collect();
    let single = |l: f64, clamped| HeuCalibration {
        power_mix: PowerMix { levels_dbm: vec![l], weights: vec![1.0] },
        target_outage: mean_outage,
        clamped,
    };
    let rel_tol = 1e-12;
    if mean_power_mw <= mw[0] * (1.0 + rel_tol) {
        let clamped = mean_power_mw < mw[0] * (1.0 - rel_tol);
        return Ok(single(levels[0], clamped));
    }
    let top = mw.len() - 1;
    if mean_power_mw >= mw[top] * (1.0 - rel_tol) {
        let clamped = mean_power_mw > mw[top] * (1.0 + rel_tol);
        return Ok(single(levels[top], clamped));
    }
    if let Some(i) = mw.iter().position(|&m| (m - mean_power_mw).abs() <= rel_tol * m) {
        return Ok(single(levels[i], false));
    }
    let i = mw.partition_point(|&m| m < mean_power_mw) - 1;
    let alpha = (mw[i + 1] - mean_power_mw) / (mw[i + 1] - mw[i]);
    Ok(HeuCalibration {
        power_mix: PowerMix {
            levels_dbm: vec![levels[i], levels[i + 1]],
            weights: vec![alpha, 1.0 - alpha],
        },
        target_outage: mean_outage,
        clamped: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> PolicyConfig {
        PolicyConfig {
            step_m: 10.0,
            horizon_b: 5,
            power_set_dbm: vec![-25.0, -15.0, -10.0, -5.0, 0.0],
            xi_o_mw: 10.0,
            xi_r_mw: 0.1,
        }
    }

    #[test]
    fn mix_from_table_mean_power() {
        let c = calibrate_heu_as_you_go(0.3542, 0.02, &cfg()).unwrap();
        assert_eq!(c.power_mix.levels_dbm, vec![-5.0, 0.0]);
        assert!((c.power_mix.weights[0] - 0.944).abs() < 5e-4);
        assert!((c.power_mix.mean_mw() - 0.3542).abs() < 1e-12);
    }

    #[test]
    fn mix_degenerate_midpoint_and_clamp() {
        let c = calibrate_heu_as_you_go(dbm_to_mw(-10.0), 0.0, &cfg()).unwrap();
        assert_eq!(c.power_mix.levels_dbm, vec![-10.0]);
        let mid = 0.5 * (dbm_to_mw(-10.0) + dbm_to_mw(-5.0));
        let c = calibrate_heu_as_you_go(mid, 0.0, &cfg()).unwrap();
        assert!((c.power_mix.weights[0] - 0.5).abs() < 1e-12);
        let c = calibrate_heu_as_you_go(5.0, 0.0, &cfg()).unwrap();
        assert!(c.clamped);
        assert_eq!(c.power_mix.levels_dbm, vec![0.0]);
    }

    #[test]
    fn heuristic_rule_trace() {
        let c = cfg();
        let row = |p: f64| vec![p; 5];
        let s0 = HeuState::default();
        let (s1, a1) = heu_as_you_go_step(&s0, 1, &row(0.01), -5.0, 0.05, &c, false).unwrap();
        assert_eq!(a1, HeuAction::Continue);
        let (s2, a2) = heu_as_you_go_step(&s1, 2, &row(0.03), -5.0, 0.05, &c, false).unwrap();
        assert_eq!(a2, HeuAction::Continue);
        let (_, a3) = heu_as_you_go_step(&s2, 3, &row(0.08), -5.0, 0.05, &c, false).unwrap();
        assert_eq!(a3, HeuAction::PlaceAtPrevious { steps: 2, tx_dbm: -5.0, p_out: 0.03 });
        let (_, a) = heu_as_you_go_step(&s0, 1, &row(0.2), -5.0, 0.05, &c, false).unwrap();
        assert_eq!(a, HeuAction::PlaceHere { tx_dbm: -5.0, p_out: 0.2 });
        let (_, a) = heu_as_you_go_step(&s2, 5, &row(0.0), -5.0, 0.05, &c, false).unwrap();
        assert!(matches!(a, HeuAction::PlaceHere { .. }));
        assert!(heu_as_you_go_step(&s0, 3, &row(0.2), -5.0, 0.05, &c, false).is_err());
    }

    #[test]
    fn threshold_rule() {
        let c = PolicyConfig { power_set_dbm: vec![-10.0], xi_o_mw: 6.0, ..cfg() };
        let th = AsYouGoThresholds { c_th: vec![0.9; 4], lambda: 0.3 };
        // q = 0.1 + 6 * 0.1 = 0.7
        let a = opt_as_you_go_decide(2, &[0.1], &th, &c, false).unwrap();
        assert!(matches!(a, AsYouGoAction::Place { .. }));
        let a = opt_as_you_go_decide(2, &[0.5], &th, &c, false).unwrap();
        assert_eq!(a, AsYouGoAction::Continue);
        let a = opt_as_you_go_decide(5, &[1.0], &th, &c, false).unwrap();
        assert!(matches!(a, AsYouGoAction::Place { .. }));
        assert!(opt_as_you_go_decide(6, &[0.1], &th, &c, false).is_err());
    }
}
