//! Propagation, shadowing, fading and outage model for a single link.
//!
//! Received power follows a log-distance path loss with log-normal shadowing:
//! `P = tx + ref_gain - 10 eta log10(r / r0) + nu` (all in dB). Fading acts per
//! packet on top of that mean; a link is in outage when the faded power drops
//! below the receiver threshold.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{domain, Result};
use crate::units::dbm_to_mw;

/// Per-packet fading distribution. Every kind has unit mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FadingModel {
    /// No fading: the received power always equals its mean.
    Deterministic,
    /// Rayleigh amplitude fading, i.e. exponentially distributed power.
    #[default]
    UnitMeanExponential,
}

impl FadingModel {
    /// Probability that a unit-mean fade pushes power below the threshold,
    /// given the mean margin above threshold in dB.
    pub fn outage_at_margin(self, margin_db: f64) -> f64 {
        match self {
            FadingModel::Deterministic => {
                if margin_db > 0.0 {
                    0.0
                } else {
                    1.0
                }
            }
            FadingModel::UnitMeanExponential => {
                if margin_db == f64::NEG_INFINITY {
                    return 1.0;
                }
                let ratio = 10f64.powf(-margin_db / 10.0);
                -(-ratio).exp_m1()
            }
        }
    }

    /// Smallest margin (dB) that keeps outage strictly below `target`;
    /// `None` if no finite margin achieves it.
    pub fn margin_for_outage_below(self, target: f64) -> Option<f64> {
        if target <= 0.0 {
            return None;
        }
        match self {
            FadingModel::Deterministic => Some(0.0),
            FadingModel::UnitMeanExponential => {
                if target >= 1.0 {
                    return Some(f64::NEG_INFINITY);
                }
                Some(-10.0 * (-(-target).ln_1p()).log10())
            }
        }
    }
}

/// Propagation model parameters. `ref_gain_db` is the channel gain at `r0_m`
/// for a 0 dBm transmitter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    pub eta: f64,
    pub sigma_db: f64,
    pub decorr_d_m: f64,
    pub ref_gain_db: f64,
    pub r0_m: f64,
    pub rcv_min_dbm: f64,
    #[serde(default)]
    pub fading: FadingModel,
}

impl ChannelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0) {
            return Err(domain(format!("eta must be positive, got {}", self.eta)));
        }
        if !(self.sigma_db >= 0.0) {
            return Err(domain(format!("sigma_db must be >= 0, got {}", self.sigma_db)));
        }
        if !(self.decorr_d_m > 0.0) {
            return Err(domain(format!("decorr_d_m must be positive, got {}", self.decorr_d_m)));
        }
        if !(self.r0_m > 0.0) {
            return Err(domain(format!("r0_m must be positive, got {}", self.r0_m)));
        }
        if !self.ref_gain_db.is_finite() || !self.rcv_min_dbm.is_finite() {
            return Err(domain("ref_gain_db and rcv_min_dbm must be finite"));
        }
        Ok(())
    }

    /// Mean margin above threshold (dB) ignoring shadowing.
    pub fn mean_margin_db(&self, tx_dbm: f64, r_m: f64) -> Result<f64> {
        Ok(mean_rx_power_dbm(self, tx_dbm, r_m, 0.0)? - self.rcv_min_dbm)
    }
}

/// Deployment economics and geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyConfig {
    /// Step length between candidate locations (m).
    pub step_m: f64,
    /// Maximum link length in steps.
    pub horizon_b: usize,
    /// Available transmit powers (dBm), strictly increasing.
    pub power_set_dbm: Vec<f64>,
    /// Cost multiplier for outage (mW).
    pub xi_o_mw: f64,
    /// Cost per relay (mW).
    pub xi_r_mw: f64,
}

impl PolicyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_m > 0.0) {
            return Err(domain(format!("step_m must be positive, got {}", self.step_m)));
        }
        if self.horizon_b == 0 {
            return Err(domain("horizon_b must be at least 1"));
        }
        if self.power_set_dbm.is_empty() {
            return Err(domain("power set must be nonempty"));
        }
        if self.power_set_dbm.iter().any(|p| !p.is_finite()) {
            return Err(domain("power levels must be finite"));
        }
        if self.power_set_dbm.windows(2).any(|w| w[0] >= w[1]) {
            return Err(domain("power set must be strictly increasing"));
        }
        if !(self.xi_o_mw >= 0.0) || !(self.xi_r_mw >= 0.0) {
            return Err(domain("xi_o and xi_r must be nonnegative"));
        }
        Ok(())
    }

    pub fn power_set_mw(&self) -> Vec<f64> {
        self.power_set_dbm.iter().map(|&p| dbm_to_mw(p)).collect()
    }

    pub fn max_power_dbm(&self) -> f64 {
        *self.power_set_dbm.last().expect("validated nonempty power set")
    }

    pub fn min_power_dbm(&self) -> f64 {
        self.power_set_dbm[0]
    }

    /// Index of a power level, matched to within 1e-9 dB.
    pub fn power_index(&self, dbm: f64) -> Option<usize> {
        self.power_set_dbm.iter().position(|&p| (p - dbm).abs() < 1e-9)
    }
}

/// One shadowing realization in dB.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShadowingSample {
    pub nu_db: f64,
}

impl ShadowingSample {
    /// Linear shadowing gain `w = 10^(nu/10)`.
    pub fn gain(&self) -> f64 {
        10f64.powf(self.nu_db / 10.0)
    }
}

/// Mean (fading-averaged) received power in dBm.
pub fn mean_rx_power_dbm(p: &ChannelParams, tx_dbm: f64, r_m: f64, nu_db: f64) -> Result<f64> {
    if !(r_m > 0.0) {
        return Err(domain(format!("link distance must be positive, got {r_m}")));
    }
    Ok(tx_dbm + p.ref_gain_db - 10.0 * p.eta * (r_m / p.r0_m).log10() + nu_db)
}

/// Probability that fading pushes the received power below `rcv_min_dbm`
/// for a link with the given shadowing realization.
pub fn outage_probability(p: &ChannelParams, tx_dbm: f64, r_m: f64, nu_db: f64) -> Result<f64> {
    let margin = mean_rx_power_dbm(p, tx_dbm, r_m, nu_db)? - p.rcv_min_dbm;
    Ok(p.fading.outage_at_margin(margin))
}

/// Outages of one link at every power level, sharing one shadowing draw.
pub fn outage_by_power(
    p: &ChannelParams,
    power_set_dbm: &[f64],
    r_m: f64,
    nu_db: f64,
) -> Result<Vec<f64>> {
    power_set_dbm
        .iter()
        .map(|&tx| outage_probability(p, tx, r_m, nu_db))
        .collect()
}

/// `n` i.i.d. shadowing draws `N(0, sigma^2)` in dB.
pub fn sample_shadowing<R: Rng + ?Sized>(
    p: &ChannelParams,
    rng: &mut R,
    n: usize,
) -> Vec<ShadowingSample> {
    (0..n)
        .map(|_| {
            let z: f64 = rng.sample(StandardNormal);
            ShadowingSample { nu_db: p.sigma_db * z }
        })
        .collect()
}

/// Probability over shadowing that a link of `r_m` metres at `tx_dbm`
/// has outage strictly below `good_outage`.
pub fn good_link_probability(p: &ChannelParams, tx_dbm: f64, r_m: f64, good_outage: f64) -> Result<f64> {
    let Some(required) = p.fading.margin_for_outage_below(good_outage) else {
        return Ok(0.0);
    };
    let mean_margin = p.mean_margin_db(tx_dbm, r_m)?;
    if required == f64::NEG_INFINITY {
        return Ok(1.0);
    }
    // good  <=>  mean_margin + nu > required
    let gap = required - mean_margin;
    if p.sigma_db == 0.0 {
        return Ok(if gap < 0.0 { 1.0 } else { 0.0 });
    }
    let normal = Normal::new(0.0, p.sigma_db).expect("sigma validated positive");
    Ok(normal.sf(gap))
}

const EXPLORATION_LIMIT_CAP: usize = 100_000;

/// Largest `B >= 1` such that a link of `B` steps at the highest power is
/// good (outage below `good_outage`) with probability above `find_prob`.
pub fn choose_exploration_limit(
    p: &ChannelParams,
    cfg: &PolicyConfig,
    good_outage: f64,
    find_prob: f64,
) -> Result<usize> {
    p.validate()?;
    cfg.validate()?;
    let tx = cfg.max_power_dbm();
    let mut best = 1;
    for b in 1..=EXPLORATION_LIMIT_CAP {
        let prob = good_link_probability(p, tx, b as f64 * cfg.step_m, good_outage)?;
        if prob > find_prob {
            best = b;
        } else {
            break;
        }
    }
    Ok(best)
}

/// Reference gain (dB) placed at the midpoint of the interval of gains for
/// which [`choose_exploration_limit`] yields `target_b`.
pub fn calibrate_ref_gain_db(
    p: &ChannelParams,
    cfg: &PolicyConfig,
    target_b: usize,
    good_outage: f64,
    find_prob: f64,
) -> Result<f64> {
    if target_b == 0 {
        return Err(domain("target_b must be at least 1"));
    }
    let limit_at = |gain: f64| -> Result<usize> {
        let q = ChannelParams { ref_gain_db: gain, ..p.clone() };
        choose_exploration_limit(&q, cfg, good_outage, find_prob)
    };
    // smallest gain with limit >= b, by bisection on a nondecreasing step function
    let threshold_for = |b: usize| -> Result<f64> {
        let (mut lo, mut hi) = (-300.0, 300.0);
        if limit_at(hi)? < b {
            return Err(domain(format!("no reference gain reaches B = {b}")));
        }
        if limit_at(lo)? >= b {
            return Ok(lo);
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if limit_at(mid)? >= b {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(hi)
    };
    let lower = threshold_for(target_b)?;
    let upper = threshold_for(target_b + 1)?;
    if target_b == 1 {
        // every gain below `upper` gives B = 1; stay 10 dB inside the interval
        return Ok(upper - 10.0);
    }
    Ok(0.5 * (lower + upper))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn example_params() -> ChannelParams {
        ChannelParams {
            eta: 4.7,
            sigma_db: 7.7,
            decorr_d_m: 2.6,
            ref_gain_db: 10.0,
            r0_m: 1.0,
            rcv_min_dbm: -88.0,
            fading: FadingModel::UnitMeanExponential,
        }
    }

    #[test]
    fn mean_power_examples() {
        let p = example_params();
        let v = mean_rx_power_dbm(&p, 0.0, 55.0, 0.0).unwrap();
        assert!((v - (-71.797)).abs() < 5e-3, "{v}");
        assert!((v - (-71.80)).abs() < 5e-3);
        let shadowed = mean_rx_power_dbm(&p, 0.0, 55.0, 7.7).unwrap();
        assert!((shadowed - (-64.10)).abs() < 5e-3);
        assert_eq!(mean_rx_power_dbm(&p, 0.0, p.r0_m, 0.0).unwrap(), p.ref_gain_db);
    }

    #[test]
    fn nonpositive_distance_is_rejected() {
        let p = example_params();
        assert!(mean_rx_power_dbm(&p, 0.0, 0.0, 0.0).is_err());
        assert!(outage_probability(&p, 0.0, -3.0, 0.0).is_err());
    }

    #[test]
    fn outage_examples() {
        let mut p = example_params();
        p.fading = FadingModel::Deterministic;
        // margin +1 dB
        p.rcv_min_dbm = mean_rx_power_dbm(&p, 0.0, 55.0, 0.0).unwrap() - 1.0;
        assert_eq!(outage_probability(&p, 0.0, 55.0, 0.0).unwrap(), 0.0);

        let p = example_params();
        let out = outage_probability(&p, 0.0, 55.0, 0.0).unwrap();
        assert!((out - 0.0237).abs() < 5e-4, "{out}");
        assert_eq!(FadingModel::UnitMeanExponential.outage_at_margin(f64::NEG_INFINITY), 1.0);
        assert!(outage_probability(&p, 0.0, 55.0, -1e4).unwrap() > 1.0 - 1e-12);
    }

    #[test]
    fn shadowing_examples() {
        let mut p = example_params();
        p.sigma_db = 0.0;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let z = sample_shadowing(&p, &mut rng, 3);
        assert!(z.iter().all(|s| s.nu_db == 0.0));

        let p = example_params();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let xs: Vec<f64> = sample_shadowing(&p, &mut rng, 100_000).iter().map(|s| s.nu_db).collect();
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!(mean.abs() < 0.08, "{mean}");
        assert!((sd - 7.7).abs() < 0.06, "{sd}");

        let a = sample_shadowing(&p, &mut ChaCha8Rng::seed_from_u64(9), 50);
        let b = sample_shadowing(&p, &mut ChaCha8Rng::seed_from_u64(9), 50);
        assert_eq!(a, b);
    }

    #[test]
    fn exploration_limit_deterministic() {
        // margin positive up to 300 m and negative beyond
        let mut p = example_params();
        p.sigma_db = 0.0;
        p.fading = FadingModel::Deterministic;
        p.rcv_min_dbm = mean_rx_power_dbm(&p, 0.0, 325.0, 0.0).unwrap();
        let cfg = PolicyConfig {
            step_m: 50.0,
            horizon_b: 1,
            power_set_dbm: vec![-5.0, 0.0],
            xi_o_mw: 10.0,
            xi_r_mw: 1.0,
        };
        assert_eq!(choose_exploration_limit(&p, &cfg, 0.03, 0.20).unwrap(), 6);
    }

    #[test]
    fn exploration_limit_floor() {
        let p = example_params();
        let cfg = PolicyConfig {
            step_m: 11.0,
            horizon_b: 5,
            power_set_dbm: vec![-25.0, -15.0, -10.0, -5.0, 0.0],
            xi_o_mw: 10.0,
            xi_r_mw: 0.01,
        };
        assert_eq!(choose_exploration_limit(&p, &cfg, 0.03, 1.0).unwrap(), 1);
    }

    #[test]
    fn calibrated_gain_reproduces_target() {
        let p = example_params();
        let cfg = PolicyConfig {
            step_m: 11.0,
            horizon_b: 5,
            power_set_dbm: vec![-25.0, -15.0, -10.0, -5.0, 0.0],
            xi_o_mw: 10.0,
            xi_r_mw: 0.01,
        };
        let g = calibrate_ref_gain_db(&p, &cfg, 5, 0.03, 0.20).unwrap();
        let q = ChannelParams { ref_gain_db: g, ..p };
        assert_eq!(choose_exploration_limit(&q, &cfg, 0.03, 0.20).unwrap(), 5);
        // interval endpoints computed by hand from the normal tail: (2.50, 6.22]
        assert!(g > 2.5 && g < 6.22, "{g}");
    }
}
