//! Monte Carlo evaluation of policies over the channel model.
//!
//! Each replication walks from location 0 to a fixed horizon with fresh
//! per-link shadowing. Per-link metrics pool the hops of all replications;
//! the final partial segment of each walk is dropped from those but still
//! counts in the per-step cost denominator.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::resolve::{resolve_policies, ResolveOptions};
use super::walk::{deploy, WalkEnd};
use crate::channel::{ChannelParams, PolicyConfig};
use crate::error::{domain, Result};
use crate::links::ModelLinks;
use crate::numerics::derive_seed;
use crate::policy::{Policy, PolicyKind};
use crate::units::dbm_to_mw;

const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub policy: String,
    pub horizon_steps: usize,
    pub reps: usize,
    pub hops: usize,
    pub mean_cost_per_step: f64,
    pub cost_per_step_std_error: f64,
    pub cost_per_step_half_width: f64,
    pub mean_power_per_link_mw: f64,
    pub power_half_width: f64,
    pub mean_outage_per_link: f64,
    pub outage_half_width: f64,
    pub mean_placement_distance_steps: f64,
    pub distance_half_width: f64,
}

/// Running sums over hops.
#[derive(Debug, Clone, Copy, Default)]
struct Sums {
    n: f64,
    cost: f64,
    cost2: f64,
    len: f64,
    len2: f64,
    cost_len: f64,
    power: f64,
    power2: f64,
    outage: f64,
    outage2: f64,
}

impl Sums {
    fn add(&mut self, cost: f64, len: f64, power: f64, outage: f64) {
        self.n += 1.0;
        self.cost += cost;
        self.cost2 += cost * cost;
        self.len += len;
        self.len2 += len * len;
        self.cost_len += cost * len;
        self.power += power;
        self.power2 += power * power;
        self.outage += outage;
        self.outage2 += outage * outage;
    }

    fn merge(mut self, o: &Sums) -> Sums {
        self.n += o.n;
        self.cost += o.cost;
        self.cost2 += o.cost2;
        self.len += o.len;
        self.len2 += o.len2;
        self.cost_len += o.cost_len;
        self.power += o.power;
        self.power2 += o.power2;
        self.outage += o.outage;
        self.outage2 += o.outage2;
        self
    }
}

fn mean_and_half_width(sum: f64, sum2: f64, n: f64) -> (f64, f64) {
    if n == 0.0 {
        return (0.0, 0.0);
    }
    let mean = sum / n;
    if n < 2.0 {
        return (mean, 0.0);
    }
    let var = ((sum2 - sum * mean) / (n - 1.0)).max(0.0);
    (mean, Z95 * (var / n).sqrt())
}

/// Mean metrics of `policy` over `reps` independent walks of
/// `horizon_steps` steps each. Bit-identical for a given seed.
pub fn monte_carlo_evaluate(
    policy: &Policy,
    p: &ChannelParams,
    cfg: &PolicyConfig,
    horizon_steps: usize,
    reps: usize,
    seed: u64,
) -> Result<RunMetrics> {
    p.validate()?;
    cfg.validate()?;
    if horizon_steps < 10 * cfg.horizon_b {
        return Err(domain(format!("horizon must be at least 10 B = {}", 10 * cfg.horizon_b)));
    }
    if reps == 0 {
        return Err(domain("at least one replication is required"));
    }
    let per_rep: Vec<Sums> = (0..reps as u64)
        .into_par_iter()
        .map(|rep| -> Result<Sums> {
            let rep_seed = derive_seed(seed, rep);
            let mut links = ModelLinks::new(p, cfg, rep_seed);
            let mut power_rng = ChaCha8Rng::seed_from_u64(derive_seed(rep_seed, 1));
            let out = deploy(policy, &mut links, 0, WalkEnd::Horizon(horizon_steps), cfg, &mut power_rng)?;
            let mut s = Sums::default();
            for h in &out.hops {
                let power = dbm_to_mw(h.tx_dbm);
                let cost = power + cfg.xi_o_mw * h.p_out + cfg.xi_r_mw;
                s.add(cost, h.length_steps as f64, power, h.p_out);
            }
            Ok(s)
        })
        .collect::<Result<Vec<_>>>()?;
    let s = per_rep.iter().fold(Sums::default(), Sums::merge);

    let steps = (reps * horizon_steps) as f64;
    let mean_cost_per_step = s.cost / steps;
    // ratio estimator: Var(sum c / sum l) ~ Var(c - R l) / (n lbar^2)
    let cost_per_step_std_error = if s.n >= 2.0 && s.len > 0.0 {
        let r = s.cost / s.len;
        let lbar = s.len / s.n;
        let resid2 = s.cost2 - 2.0 * r * s.cost_len + r * r * s.len2;
        let var = (resid2 / (s.n - 1.0)).max(0.0);
        (var / s.n).sqrt() / lbar
    } else {
        0.0
    };
    let (mean_power_per_link_mw, power_half_width) = mean_and_half_width(s.power, s.power2, s.n);
    let (mean_outage_per_link, outage_half_width) = mean_and_half_width(s.outage, s.outage2, s.n);
    let (mean_placement_distance_steps, distance_half_width) =
        mean_and_half_width(s.len, s.len2, s.n);
    Ok(RunMetrics {
        policy: policy.kind().name().to_string(),
        horizon_steps,
        reps,
        hops: s.n as usize,
        mean_cost_per_step,
        cost_per_step_std_error,
        cost_per_step_half_width: Z95 * cost_per_step_std_error,
        mean_power_per_link_mw,
        power_half_width,
        mean_outage_per_link,
        outage_half_width,
        mean_placement_distance_steps,
        distance_half_width,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    XiR,
    XiO,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::XiR => "xi_r",
            SweepParam::XiO => "xi_o",
        }
    }

    fn apply(self, cfg: &PolicyConfig, v: f64) -> PolicyConfig {
        let mut c = cfg.clone();
        match self {
            SweepParam::XiR => c.xi_r_mw = v,
            SweepParam::XiO => c.xi_o_mw = v,
        }
        c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub param: SweepParam,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub param: SweepParam,
    pub value: f64,
    pub policy: PolicyKind,
    /// Solved cost per step for policies that have one.
    pub solved_lambda: Option<f64>,
    pub metrics: RunMetrics,
}

/// Metrics for every `(grid value, policy)` pair. Every grid point uses the
/// same seed, so neighbouring points share their random numbers.
pub fn sweep(
    kinds: &[PolicyKind],
    p: &ChannelParams,
    cfg: &PolicyConfig,
    grid: &SweepGrid,
    horizon_steps: usize,
    reps: usize,
    seed: u64,
    opts: &ResolveOptions,
) -> Result<Vec<SweepRow>> {
    if grid.values.is_empty() {
        return Err(domain("sweep grid is empty"));
    }
    if kinds.is_empty() {
        return Err(domain("no policies to sweep"));
    }
    let mut rows = Vec::new();
    for &v in &grid.values {
        let c = grid.param.apply(cfg, v);
        let policies = resolve_policies(kinds, p, &c, opts)?;
        for policy in &policies {
            let metrics = monte_carlo_evaluate(policy, p, &c, horizon_steps, reps, seed)?;
            let solved_lambda = match policy {
                Policy::OptExploreLim { lambda } => Some(*lambda),
                Policy::OptAsYouGo { thresholds } => Some(thresholds.lambda),
                _ => None,
            };
            rows.push(SweepRow { param: grid.param, value: v, policy: policy.kind(), solved_lambda, metrics });
        }
    }
    Ok(rows)
}
