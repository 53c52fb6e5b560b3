//! Maximum likelihood fit of log-distance path loss with Gudmundson-correlated
//! shadowing, `Cov(nu_i, nu_j) = sigma² exp(-|r_i - r_j| / D)`.
//!
//! For a fixed `D` the likelihood is Gaussian-linear in `(phi0, eta)` and the
//! variance profiles out in closed form, so the search is one-dimensional in
//! `D` (log-spaced grid, then golden-section refinement of every local peak).

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

const D_MIN: f64 = 0.1;
const D_MAX: f64 = 50.0;
const GRID_POINTS: usize = 48;

/// Fading-averaged received power on one link of one network realization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkRecord {
    pub realization_id: u32,
    pub distance_m: f64,
    pub mean_rx_dbm: f64,
    pub tx_dbm: f64,
}

/// Parameter vector `[phi0, eta, D, sigma]` (sigma in dB, not squared).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Theta {
    pub phi0_dbm: f64,
    pub eta: f64,
    pub decorr_d_m: f64,
    pub sigma_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GudmundsonFit {
    pub phi0_dbm: f64,
    pub eta: f64,
    pub decorr_d_m: f64,
    pub sigma_db: f64,
    pub loglik: f64,
    /// Separation beyond which shadowing correlation is below 0.1.
    pub decorr_at_rho_m: f64,
    pub realizations: usize,
    pub links: usize,
}

impl GudmundsonFit {
    pub fn theta(&self) -> Theta {
        Theta {
            phi0_dbm: self.phi0_dbm,
            eta: self.eta,
            decorr_d_m: self.decorr_d_m,
            sigma_db: self.sigma_db,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct FitOptions {
    /// Starting point whose likelihood the fit must not fall below.
    pub start: Option<Theta>,
}

/// Realizations sharing one receiver geometry, reduced to sufficient statistics.
struct Group {
    distances: Vec<f64>,
    design: DMatrix<f64>,
    count: f64,
    sum_y: DVector<f64>,
    second_moment: DMatrix<f64>,
}

struct Prepared {
    groups: Vec<Group>,
    links: usize,
    realizations: usize,
}

fn prepare(records: &[LinkRecord], r0_m: f64) -> Result<Prepared> {
    if !(r0_m > 0.0) {
        return Err(domain("r0_m must be positive"));
    }
    let mut by_realization: BTreeMap<u32, Vec<&LinkRecord>> = BTreeMap::new();
    for rec in records {
        if !(rec.distance_m > 0.0) {
            return Err(domain(format!("link distance must be positive, got {}", rec.distance_m)));
        }
        if !rec.mean_rx_dbm.is_finite() {
            return Err(domain("mean received power must be finite"));
        }
        by_realization.entry(rec.realization_id).or_default().push(rec);
    }
    if by_realization.len() < 2 {
        return Err(Error::Estimation(format!(
            "need at least 2 realizations, got {}",
            by_realization.len()
        )));
    }
    // group realizations with identical (sorted) receiver distances
    let mut groups: BTreeMap<Vec<u64>, Group> = BTreeMap::new();
    for links in by_realization.values() {
        let mut links = links.clone();
        links.sort_by(|a, b| a.distance_m.total_cmp(&b.distance_m));
        let key: Vec<u64> = links.iter().map(|l| l.distance_m.to_bits()).collect();
        let m = links.len();
        // received power normalized to a 0 dBm transmitter
        let y = DVector::from_iterator(m, links.iter().map(|l| l.mean_rx_dbm - l.tx_dbm));
        let g = groups.entry(key).or_insert_with(|| {
            let distances: Vec<f64> = links.iter().map(|l| l.distance_m).collect();
            let design = DMatrix::from_fn(m, 2, |i, j| {
                if j == 0 { 1.0 } else { -10.0 * (distances[i] / r0_m).log10() }
            });
            Group {
                distances,
                design,
                count: 0.0,
                sum_y: DVector::zeros(m),
                second_moment: DMatrix::zeros(m, m),
            }
        });
        g.count += 1.0;
        g.sum_y += &y;
        g.second_moment += &y * y.transpose();
    }
    Ok(Prepared {
        groups: groups.into_values().collect(),
        links: records.len(),
        realizations: by_realization.len(),
    })
}

fn correlation(distances: &[f64], d: f64) -> DMatrix<f64> {
    let m = distances.len();
    DMatrix::from_fn(m, m, |i, j| (-(distances[i] - distances[j]).abs() / d).exp())
}

/// Per-group pieces of the Gaussian likelihood for a given `D`.
struct Whitened {
    log_det: f64,
    inv: DMatrix<f64>,
}

fn whiten(distances: &[f64], d: f64) -> Option<Whitened> {
    let chol = correlation(distances, d).cholesky()?;
    let log_det = 2.0 * chol.l().diagonal().iter().map(|x| x.ln()).sum::<f64>();
    Some(Whitened { log_det, inv: chol.inverse() })
}

struct Profile {
    phi0: f64,
    eta: f64,
    sse: f64,
    log_det_sum: f64,
}

fn profile_at(prep: &Prepared, d: f64) -> Option<Profile> {
    let mut a = DMatrix::<f64>::zeros(2, 2);
    let mut b = DVector::<f64>::zeros(2);
    let mut w = Vec::with_capacity(prep.groups.len());
    let mut log_det_sum = 0.0;
    for g in &prep.groups {
        let wh = whiten(&g.distances, d)?;
        let xt_ri = g.design.transpose() * &wh.inv;
        a += &xt_ri * &g.design * g.count;
        b += &xt_ri * &g.sum_y;
        log_det_sum += g.count * wh.log_det;
        w.push(wh);
    }
    let beta = a.clone().lu().solve(&b)?;
    // sum_k (y_k - X b)' R^-1 (y_k - X b)
    let mut sse = 0.0;
    for (g, wh) in prep.groups.iter().zip(&w) {
        let xb = &g.design * &beta;
        let quad_yy = (&wh.inv * &g.second_moment).trace();
        let cross = (xb.transpose() * &wh.inv * &g.sum_y)[(0, 0)];
        let quad_bb = (xb.transpose() * &wh.inv * &xb)[(0, 0)];
        sse += quad_yy - 2.0 * cross + g.count * quad_bb;
    }
    Some(Profile { phi0: beta[0], eta: beta[1], sse: sse.max(0.0), log_det_sum })
}

fn profile_loglik(prep: &Prepared, p: &Profile) -> f64 {
    let n = prep.links as f64;
    let s2 = p.sse / n;
    -0.5 * n * (2.0 * std::f64::consts::PI * s2).ln() - 0.5 * p.log_det_sum - 0.5 * n
}

fn loglik_theta(prep: &Prepared, theta: &Theta) -> f64 {
    if !(theta.sigma_db > 0.0) || !(theta.decorr_d_m > 0.0) {
        return f64::NEG_INFINITY;
    }
    let s2 = theta.sigma_db * theta.sigma_db;
    let beta = DVector::from_vec(vec![theta.phi0_dbm, theta.eta]);
    let mut ll = 0.0;
    for g in &prep.groups {
        let Some(wh) = whiten(&g.distances, theta.decorr_d_m) else {
            return f64::NEG_INFINITY;
        };
        let m = g.distances.len() as f64;
        let xb = &g.design * &beta;
        let quad = (&wh.inv * &g.second_moment).trace()
            - 2.0 * (xb.transpose() * &wh.inv * &g.sum_y)[(0, 0)]
            + g.count * (xb.transpose() * &wh.inv * &xb)[(0, 0)];
        ll += -0.5 * g.count * (m * (2.0 * std::f64::consts::PI * s2).ln() + wh.log_det) - 0.5 * quad / s2;
    }
    ll
}

/// Joint Gaussian log-likelihood of the records under `theta`.
pub fn log_likelihood(records: &[LinkRecord], r0_m: f64, theta: &Theta) -> Result<f64> {
    let prep = prepare(records, r0_m)?;
    Ok(loglik_theta(&prep, theta))
}

fn golden_max(f: &impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..200 {
        if (hi - lo).abs() < 1e-10 {
            break;
        }
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        }
    }
    if f1 >= f2 { (x1, f1) } else { (x2, f2) }
}

/// Fits `theta = [phi0, eta, D, sigma]` by maximum likelihood.
///
/// Records are grouped by `realization_id`; every realization is one
/// transmitter with receivers on a line, so `|r_i - r_j|` is the receiver
/// separation. `D` is searched in `[0.1, 50]` m.
pub fn fit_gudmundson_mle(records: &[LinkRecord], r0_m: f64, opts: &FitOptions) -> Result<GudmundsonFit> {
    let prep = prepare(records, r0_m)?;
    let build = |d: f64, prof: &Profile, loglik: f64, sigma: f64| GudmundsonFit {
        phi0_dbm: prof.phi0,
        eta: prof.eta,
        decorr_d_m: d,
        sigma_db: sigma,
        loglik,
        decorr_at_rho_m: d * 10f64.ln(),
        realizations: prep.realizations,
        links: prep.links,
    };

    // search in u = ln D
    let eval = |u: f64| -> f64 {
        match profile_at(&prep, u.exp()) {
            Some(p) => profile_loglik(&prep, &p),
            None => f64::NEG_INFINITY,
        }
    };
    let (u_min, u_max) = (D_MIN.ln(), D_MAX.ln());
    let grid: Vec<f64> = (0..GRID_POINTS)
        .map(|i| u_min + (u_max - u_min) * i as f64 / (GRID_POINTS - 1) as f64)
        .collect();

    // exact fit: residuals vanish, sigma -> 0 and the likelihood is unbounded
    let probe_d = opts.start.map(|s| s.decorr_d_m).unwrap_or(1.0).clamp(D_MIN, D_MAX);
    let probe = profile_at(&prep, probe_d)
        .ok_or_else(|| Error::Estimation("design is not identifiable (all links equally long?)".into()))?;
    let scale: f64 = prep.groups.iter().map(|g| g.second_moment.trace()).sum::<f64>();
    if probe.sse <= 1e-12 * scale.max(1.0) {
        return Ok(build(probe_d, &probe, f64::INFINITY, 0.0));
    }

    let values: Vec<f64> = grid.iter().map(|&u| eval(u)).collect();
    if values.iter().all(|v| !v.is_finite()) {
        return Err(Error::Estimation("likelihood is not finite anywhere on the D grid".into()));
    }
    let mut candidates: Vec<(f64, f64)> = Vec::new();
    for i in 0..grid.len() {
        let left = if i == 0 { f64::NEG_INFINITY } else { values[i - 1] };
        let right = if i + 1 == grid.len() { f64::NEG_INFINITY } else { values[i + 1] };
        if values[i].is_finite() && values[i] >= left && values[i] >= right {
            let lo = grid[i.saturating_sub(1)];
            let hi = grid[(i + 1).min(grid.len() - 1)];
            candidates.push(golden_max(&eval, lo, hi));
            candidates.push((grid[i], values[i]));
        }
    }
    if let Some(start) = opts.start {
        let u = start.decorr_d_m.clamp(D_MIN, D_MAX).ln();
        candidates.push((u, eval(u)));
    }
    // highest loglik, then smallest D
    let (u_best, _) = candidates
        .into_iter()
        .filter(|c| c.1.is_finite())
        .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.total_cmp(&a.0)))
        .ok_or_else(|| Error::Estimation("no finite likelihood among start points".into()))?;
    let d = u_best.exp();
    let prof = profile_at(&prep, d).ok_or_else(|| Error::Estimation("correlation matrix not positive definite at the optimum".into()))?;
    let loglik = profile_loglik(&prep, &prof);
    let sigma = (prof.sse / prep.links as f64).sqrt();
    let fit = build(d, &prof, loglik, sigma);

    if let Some(start) = opts.start {
        let start_ll = loglik_theta(&prep, &start);
        if start_ll > fit.loglik + 1e-6 * fit.loglik.abs().max(1.0) {
            return Err(Error::Estimation(format!(
                "optimizer ended below the starting point (start {start_ll}, fit {})",
                fit.loglik
            )));
        }
    }
    Ok(fit)
}

/// Shadowing residuals `nu_i = phi_i - phi0 + 10 eta log10(r_i / r0)` per record.
pub fn shadowing_residuals(records: &[LinkRecord], r0_m: f64, theta: &Theta) -> Vec<f64> {
    records
        .iter()
        .map(|r| {
            (r.mean_rx_dbm - r.tx_dbm) - theta.phi0_dbm + 10.0 * theta.eta * (r.distance_m / r0_m).log10()
        })
        .collect()
}

/// Separation at which the exponential correlation falls to `rho_cutoff`.
pub fn decorrelation_distance(decorr_d_m: f64, rho_cutoff: f64) -> Result<f64> {
    if !(rho_cutoff > 0.0 && rho_cutoff < 1.0) {
        return Err(domain(format!("correlation cutoff must lie in (0, 1), got {rho_cutoff}")));
    }
    if !(decorr_d_m > 0.0) {
        return Err(domain("D must be positive"));
    }
    Ok(decorr_d_m * (1.0 / rho_cutoff).ln())
}
