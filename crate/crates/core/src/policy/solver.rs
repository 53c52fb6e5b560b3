//! Offline solvers for the optimal average cost per step.
//!
//! Both solvers evaluate expectations over per-link shadowing with a fixed
//! sample drawn once (common random numbers), so the empirical objective is
//! an exactly monotone function of `lambda` and bisection has a well-defined
//! root. Samples may be drawn in shards with derived seeds; shard results
//! are always reduced in shard order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use rand::Rng;

use crate::channel::{ChannelParams, PolicyConfig};
use crate::error::{domain, Error, Result};
use crate::numerics::{derive_seed, NormalQuadrature};
use crate::units::dbm_to_mw;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverSettings {
    /// Shadowing samples per candidate distance.
    pub samples: usize,
    /// Required `|g(lambda)|` at the returned root (mW/step).
    pub precision: f64,
    pub max_iterations: usize,
    pub seed: u64,
    pub shards: usize,
    /// Fail if the Monte Carlo standard error of `lambda` exceeds this.
    pub max_std_error: Option<f64>,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            samples: 100_000,
            precision: 1e-9,
            max_iterations: 200,
            seed: 0,
            shards: 1,
            max_std_error: None,
        }
    }
}

impl SolverSettings {
    fn validate(&self) -> Result<()> {
        if self.samples == 0 {
            return Err(domain("solver needs at least one sample"));
        }
        if !(self.precision > 0.0) {
            return Err(domain("solver precision must be positive"));
        }
        if self.shards == 0 {
            return Err(domain("shard count must be at least 1"));
        }
        Ok(())
    }

    fn shard_ranges(&self) -> Vec<std::ops::Range<usize>> {
        let shards = self.shards.min(self.samples);
        let base = self.samples / shards;
        let extra = self.samples % shards;
        let mut start = 0;
        (0..shards)
            .map(|i| {
                let len = base + usize::from(i < extra);
                let r = start..start + len;
                start += len;
                r
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaSolution {
    pub lambda: f64,
    /// `g(lambda)` at the returned root.
    pub residual: f64,
    /// Monte Carlo standard error of `lambda`.
    pub std_error: f64,
    /// Mean optimal placement distance at the root.
    pub mean_u: f64,
    pub iterations: usize,
}

/// Thresholds for the pure as-you-go optimal policy: at `r < B` steps place
/// iff the best immediate link cost is at most `c_th[r - 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsYouGoThresholds {
    pub c_th: Vec<f64>,
    pub lambda: f64,
}

impl AsYouGoThresholds {
    pub fn threshold(&self, r: usize) -> Option<f64> {
        r.checked_sub(1).and_then(|i| self.c_th.get(i)).copied()
    }
}

/// `q(r, nu) = min_gamma (gamma_mw + xi_o P_out)` for a link of `r` steps.
struct LinkCostTable {
    margins: Vec<Vec<f64>>,
    powers_mw: Vec<f64>,
}

impl LinkCostTable {
    fn new(p: &ChannelParams, cfg: &PolicyConfig) -> Result<Self> {
        p.validate()?;
        cfg.validate()?;
        let margins = (1..=cfg.horizon_b)
            .map(|r| {
                cfg.power_set_dbm
                    .iter()
                    .map(|&tx| p.mean_margin_db(tx, r as f64 * cfg.step_m))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { margins, powers_mw: cfg.power_set_mw() })
    }

    fn q(&self, p: &ChannelParams, xi_o: f64, r: usize, nu: f64) -> f64 {
        self.margins[r - 1]
            .iter()
            .zip(&self.powers_mw)
            .map(|(&m, &mw)| mw + xi_o * p.fading.outage_at_margin(m + nu))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Draws `samples x B` standard normals, shard by shard, row-major.
fn draw_normals(settings: &SolverSettings, b: usize) -> Vec<f64> {
    settings
        .shard_ranges()
        .into_par_iter()
        .enumerate()
        .map(|(i, range)| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(settings.seed, i as u64));
            (0..range.len() * b).map(|_| rng.sample::<f64, _>(StandardNormal)).collect::<Vec<_>>()
        })
        .collect::<Vec<_>>()
        .concat()
}

fn upper_bound(cfg: &PolicyConfig) -> f64 {
    dbm_to_mw(cfg.max_power_dbm()) + cfg.xi_o_mw + cfg.xi_r_mw
}

/// Bisection for the root of a nonincreasing `g` on `[0, hi]`, stopping at
/// the first midpoint with `|g| <= precision`.
fn bisect(
    mut g: impl FnMut(f64) -> f64,
    hi: f64,
    precision: f64,
    max_iterations: usize,
) -> Result<(f64, f64, usize)> {
    let g0 = g(0.0);
    if g0 <= precision {
        return Ok((0.0, g0, 0));
    }
    let (mut lo, mut hi) = (0.0, hi);
    let mut closest = (f64::NAN, f64::INFINITY);
    for it in 1..=max_iterations {
        let mid = 0.5 * (lo + hi);
        let v = g(mid);
        if v.abs() < closest.1.abs() {
            closest = (mid, v);
        }
        if v.abs() <= precision {
            return Ok((mid, v, it));
        }
        if v > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::Solver(format!(
        "no root within precision {precision} after {max_iterations} iterations; \
         best lambda {} with |g| = {:.3e}",
        closest.0,
        closest.1.abs()
    )))
}

/// Link plus relay cost for every sample and distance, row-major.
fn explore_costs(p: &ChannelParams, cfg: &PolicyConfig, settings: &SolverSettings) -> Result<Vec<f64>> {
    let table = LinkCostTable::new(p, cfg)?;
    let b = cfg.horizon_b;
    let normals = draw_normals(settings, b);
    Ok(normals
        .par_chunks(b)
        .flat_map_iter(|row| {
            let table = &table;
            row.iter().enumerate().map(move |(i, z)| {
                table.q(p, cfg.xi_o_mw, i + 1, p.sigma_db * z) + cfg.xi_r_mw
            })
        })
        .collect())
}

/// Smallest `cost(u) - lambda u` over one sample, ties to the larger `u`.
fn best_at(row: &[f64], lambda: f64) -> (f64, usize) {
    let mut best = (f64::INFINITY, 0);
    for u in (1..=row.len()).rev() {
        let v = row[u - 1] - lambda * u as f64;
        if v < best.0 {
            best = (v, u);
        }
    }
    best
}

/// Sample mean of `min_u (cost(u) - lambda u)`, summed shard by shard so the
/// result does not depend on the thread count.
fn explore_objective(costs: &[f64], b: usize, ranges: &[std::ops::Range<usize>], samples: usize, lambda: f64) -> f64 {
    let sums: Vec<f64> = ranges
        .par_iter()
        .map(|r| costs[r.start * b..r.end * b].chunks(b).map(|row| best_at(row, lambda).0).sum())
        .collect();
    sums.iter().sum::<f64>() / samples as f64
}

/// Optimal average cost per step for the limited-exploration policy: the
/// root of `g(lambda) = E[min_{u, gamma} (gamma + xi_o P_out + xi_r - lambda u)]`
/// with independent shadowing on each of the `B` candidate links.
pub fn solve_lambda_star(
    p: &ChannelParams,
    cfg: &PolicyConfig,
    settings: &SolverSettings,
) -> Result<LambdaSolution> {
    settings.validate()?;
    let b = cfg.horizon_b;
    let costs = explore_costs(p, cfg, settings)?;
    let ranges = settings.shard_ranges();
    let g = |lambda: f64| explore_objective(&costs, b, &ranges, settings.samples, lambda);
    let (lambda, residual, iterations) =
        bisect(g, upper_bound(cfg), settings.precision, settings.max_iterations)?;

    let n = settings.samples as f64;
    let (mut s1, mut s2, mut su) = (0.0, 0.0, 0.0);
    for row in costs.chunks(b) {
        let (v, u) = best_at(row, lambda);
        s1 += v;
        s2 += v * v;
        su += u as f64;
    }
    let var = if settings.samples > 1 { ((s2 - s1 * s1 / n) / (n - 1.0)).max(0.0) } else { 0.0 };
    let mean_u = su / n;
    let std_error = (var / n).sqrt() / mean_u;
    if let Some(limit) = settings.max_std_error {
        if std_error > limit {
            return Err(Error::Solver(format!(
                "lambda = {lambda:.6} has standard error {std_error:.3e} above the requested \
                 {limit:.3e} with {} samples",
                settings.samples
            )));
        }
    }
    Ok(LambdaSolution { lambda, residual, std_error, mean_u, iterations })
}

/// Weighted sample of `q(r) + xi_r`, sorted, with prefix sums so that
/// `E[min(a, c)]` costs one binary search.
struct SortedAtoms {
    values: Vec<f64>,
    cum_weighted: Vec<f64>,
    cum_weight: Vec<f64>,
}

impl SortedAtoms {
    fn new(mut atoms: Vec<(f64, f64)>) -> Self {
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut cum_weighted = Vec::with_capacity(atoms.len() + 1);
        let mut cum_weight = Vec::with_capacity(atoms.len() + 1);
        let (mut sw, mut s) = (0.0, 0.0);
        cum_weighted.push(0.0);
        cum_weight.push(0.0);
        for &(v, w) in &atoms {
            s += w * v;
            sw += w;
            cum_weighted.push(s);
            cum_weight.push(sw);
        }
        Self { values: atoms.into_iter().map(|a| a.0).collect(), cum_weighted, cum_weight }
    }

    fn mean(&self) -> f64 {
        *self.cum_weighted.last().unwrap_or(&0.0)
    }

    fn mean_min(&self, c: f64) -> f64 {
        let k = self.values.partition_point(|&v| v < c);
        let total = *self.cum_weight.last().unwrap_or(&0.0);
        self.cum_weighted[k] + c * (total - self.cum_weight[k])
    }
}

/// `h(r)` for `r = 1..=B` at a candidate `lambda`.
fn relative_values(atoms: &[SortedAtoms], lambda: f64) -> Vec<f64> {
    let b = atoms.len();
    let mut h = vec![0.0; b];
    h[b - 1] = atoms[b - 1].mean() - lambda;
    for r in (0..b - 1).rev() {
        h[r] = atoms[r].mean_min(h[r + 1]) - lambda;
    }
    h
}

fn thresholds_from_atoms(
    atoms: Vec<SortedAtoms>,
    cfg: &PolicyConfig,
    precision: f64,
    max_iterations: usize,
) -> Result<AsYouGoThresholds> {
    let (lambda, _, _) = bisect(
        |l| relative_values(&atoms, l)[0],
        upper_bound(cfg),
        precision,
        max_iterations,
    )?;
    let h = relative_values(&atoms, lambda);
    let c_th: Vec<f64> = h[1..].iter().map(|v| v - cfg.xi_r_mw).collect();
    if c_th.iter().any(|c| !c.is_finite()) {
        return Err(Error::Solver("non-finite threshold".into()));
    }
    Ok(AsYouGoThresholds { c_th, lambda })
}

fn require_b_at_least_2(cfg: &PolicyConfig) -> Result<()> {
    if cfg.horizon_b < 2 {
        return Err(domain("as-you-go thresholds need B >= 2"));
    }
    Ok(())
}

/// Optimal average cost per step and place/continue thresholds for the pure
/// as-you-go policy, by the backward renewal recursion
/// `h(B) = E[q(B)] + xi_r - lambda`,
/// `h(r) = E[min(q(r) + xi_r, h(r + 1))] - lambda`,
/// with `lambda` the root of `h(1) = 0` and `c_th(r) = h(r + 1) - xi_r`.
pub fn solve_cth(
    p: &ChannelParams,
    cfg: &PolicyConfig,
    settings: &SolverSettings,
) -> Result<AsYouGoThresholds> {
    settings.validate()?;
    require_b_at_least_2(cfg)?;
    let table = LinkCostTable::new(p, cfg)?;
    let b = cfg.horizon_b;
    let normals = draw_normals(settings, b);
    let w = 1.0 / settings.samples as f64;
    let atoms: Vec<SortedAtoms> = (1..=b)
        .into_par_iter()
        .map(|r| {
            let a = normals
                .iter()
                .skip(r - 1)
                .step_by(b)
                .map(|z| (table.q(p, cfg.xi_o_mw, r, p.sigma_db * z) + cfg.xi_r_mw, w))
                .collect();
            SortedAtoms::new(a)
        })
        .collect();
    thresholds_from_atoms(atoms, cfg, settings.precision, settings.max_iterations)
}

/// As [`solve_cth`] with Gauss-Hermite quadrature over each link's
/// shadowing instead of Monte Carlo samples.
pub fn solve_cth_quadrature(
    p: &ChannelParams,
    cfg: &PolicyConfig,
    nodes: usize,
    precision: f64,
) -> Result<AsYouGoThresholds> {
    if nodes == 0 {
        return Err(domain("quadrature needs at least one node"));
    }
    if !(precision > 0.0) {
        return Err(domain("solver precision must be positive"));
    }
    require_b_at_least_2(cfg)?;
    let table = LinkCostTable::new(p, cfg)?;
    let quad = NormalQuadrature::new(nodes, p.sigma_db);
    let atoms: Vec<SortedAtoms> = (1..=cfg.horizon_b)
        .map(|r| {
            let a = quad
                .points
                .iter()
                .zip(&quad.weights)
                .map(|(&nu, &w)| (table.q(p, cfg.xi_o_mw, r, nu) + cfg.xi_r_mw, w))
                .collect();
            SortedAtoms::new(a)
        })
        .collect();
    thresholds_from_atoms(atoms, cfg, precision, 200)
}
