//! Synthetic measurement data drawn from the shadowing and fading models.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use super::gudmundson::{LinkRecord, Theta};
use super::trace::RssiTrace;
use crate::error::{domain, Error, Result};

/// Link records for `realizations` independent networks, each with one
/// transmitter and receivers at `distances_m` along a line. Shadowing within
/// a realization has covariance `sigma² exp(-|r_i - r_j| / D)`.
pub fn synthesize_link_records<R: Rng + ?Sized>(
    theta: &Theta,
    distances_m: &[f64],
    realizations: usize,
    tx_dbm: f64,
    r0_m: f64,
    rng: &mut R,
) -> Result<Vec<LinkRecord>> {
    if distances_m.is_empty() || distances_m.iter().any(|&d| !(d > 0.0)) {
        return Err(domain("distances must be positive"));
    }
    if !(theta.decorr_d_m > 0.0) || !(theta.sigma_db >= 0.0) {
        return Err(domain("need D > 0 and sigma >= 0"));
    }
    let n = distances_m.len();
    let corr = DMatrix::from_fn(n, n, |i, j| {
        (-(distances_m[i] - distances_m[j]).abs() / theta.decorr_d_m).exp()
    });
    let chol = corr
        .cholesky()
        .ok_or_else(|| Error::Estimation("receiver positions give a singular correlation".into()))?;
    let l = chol.l();
    let mut out = Vec::with_capacity(n * realizations);
    for k in 0..realizations {
        let z = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let nu = &l * z * theta.sigma_db;
        for (i, &r) in distances_m.iter().enumerate() {
            out.push(LinkRecord {
                realization_id: k as u32,
                distance_m: r,
                mean_rx_dbm: tx_dbm + theta.phi0_dbm - 10.0 * theta.eta * (r / r0_m).log10() + nu[i],
                tx_dbm,
            });
        }
    }
    Ok(out)
}

/// Per-packet RSSI with unit-mean exponential power fading around
/// `mean_rx_dbm`. Successive packets follow a first-order Gauss-Markov
/// complex gain with lag-one amplitude correlation `rho` (0 gives
/// independent packets); the marginal power stays exponential either way.
pub fn synthesize_rssi_trace<R: Rng + ?Sized>(
    mean_rx_dbm: f64,
    packets: usize,
    inter_packet_ms: f64,
    rho: f64,
    rng: &mut R,
) -> Result<RssiTrace> {
    if !(0.0..1.0).contains(&rho) {
        return Err(domain("fading correlation must lie in [0, 1)"));
    }
    let innov = (1.0 - rho * rho).sqrt();
    let draw = |rng: &mut R| -> (f64, f64) {
        let a: f64 = rng.sample(StandardNormal);
        let b: f64 = rng.sample(StandardNormal);
        (a * std::f64::consts::FRAC_1_SQRT_2, b * std::f64::consts::FRAC_1_SQRT_2)
    };
    let mut h = draw(rng);
    let mut samples = Vec::with_capacity(packets);
    for i in 0..packets {
        if i > 0 {
            let w = draw(rng);
            h = (rho * h.0 + innov * w.0, rho * h.1 + innov * w.1);
        }
        let power = (h.0 * h.0 + h.1 * h.1).max(f64::MIN_POSITIVE);
        samples.push(mean_rx_dbm + 10.0 * power.log10());
    }
    RssiTrace::new(samples, inter_packet_ms)
}
