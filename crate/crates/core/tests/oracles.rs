mod common;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use relaytrail_core::channel::{FadingModel, PolicyConfig};
use relaytrail_core::measurement::{
    fit_gudmundson_mle, ks_critical_value, ks_statistic, log_likelihood, outage_from_trace,
    synthesize_link_records, synthesize_rssi_trace, FitOptions, Theta,
};
use relaytrail_core::policy::{best_power, last_segment_patch};
use relaytrail_core::trail::VirtualTrail;
use relaytrail_core::units::dbm_to_mw;

fn cfg(xi_r: f64) -> PolicyConfig {
    PolicyConfig {
        step_m: 11.0,
        horizon_b: 5,
        power_set_dbm: vec![-25.0, -15.0, -10.0, -5.0, 0.0],
        xi_o_mw: 10.0,
        xi_r_mw: xi_r,
    }
}

/// Link cost by exhaustive search over powers, lowest power on ties.
fn link_cost(row: &[f64], cfg: &PolicyConfig) -> f64 {
    let mut best = f64::INFINITY;
    for (dbm, p) in cfg.power_set_dbm.iter().zip(row) {
        best = best.min(dbm_to_mw(*dbm) + cfg.xi_o_mw * p);
    }
    best
}

fn random_segment(rng: &mut ChaCha8Rng, last: usize, target: usize, coarse: bool) -> VirtualTrail {
    let mut trail = VirtualTrail::new(11.0, target, cfg(0.0).power_set_dbm).unwrap();
    for to in last..target {
        for from in to + 1..=target {
            // coarse values produce exact cost ties between paths
            let mut row: Vec<f64> = (0..5)
                .map(|_| if coarse { rng.random_range(0..3) as f64 * 0.5 } else { rng.random::<f64>() })
                .collect();
            row.sort_by(|a, b| b.total_cmp(a));
            trail.insert(from, to, row).unwrap();
        }
    }
    trail
}

#[test]
fn patch_matches_exhaustive_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for case in 0..2_000 {
        let coarse = case % 2 == 0;
        let last = rng.random_range(1..5);
        let m = rng.random_range(1..=5);
        let target = last + m;
        let cfg = cfg([0.0, 0.01, 0.3, 2.0][case % 4]);
        let trail = random_segment(&mut rng, last, target, coarse);

        // direct first, then intermediates far to near; keep the first minimum
        let mut paths = vec![(None, link_cost(trail.outage(target, last).unwrap(), &cfg))];
        for j in (last + 1..target).rev() {
            let c = link_cost(trail.outage(j, last).unwrap(), &cfg)
                + cfg.xi_r_mw
                + link_cost(trail.outage(target, j).unwrap(), &cfg);
            paths.push((Some(j), c));
        }
        let min = paths.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
        let expected = paths.iter().find(|p| p.1 == min).unwrap();

        let got = last_segment_patch(&mut &trail, last, target, &cfg).unwrap();
        assert_eq!(got.intermediate, expected.0, "case {case}");
        assert_eq!(got.cost_mw, expected.1, "case {case}");
        assert_eq!(got.measurements, 2 * (m - 1) + 1);
        assert_eq!(got.candidates.len(), m);
        let hop_sum: f64 = got.hops.iter().map(|h| h.link_cost_mw(&cfg)).sum::<f64>()
            + cfg.xi_r_mw * (got.hops.len() - 1) as f64;
        assert!((hop_sum - got.cost_mw).abs() < 1e-12);
    }
}

#[test]
fn best_power_matches_exhaustive_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let cfg = cfg(0.01);
    for _ in 0..5_000 {
        let row: Vec<f64> = (0..5).map(|_| rng.random_range(0..4) as f64 * 0.01).collect();
        let (k, c) = best_power(&row, &cfg);
        let costs: Vec<f64> = cfg.power_set_dbm.iter().zip(&row).map(|(d, p)| dbm_to_mw(*d) + cfg.xi_o_mw * p).collect();
        let min = costs.iter().copied().fold(f64::INFINITY, f64::min);
        assert_eq!(c, min);
        assert_eq!(k, costs.iter().position(|&x| x == min).unwrap());
    }
}

#[test]
fn mle_never_scores_below_the_truth() {
    let truth = Theta { phi0_dbm: 4.34, eta: 4.7, decorr_d_m: 2.6, sigma_db: 7.7 };
    let distances: Vec<f64> = (0..9).map(|i| 50.0 + 3.0 * i as f64).collect();
    for seed in 0..10 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let records = synthesize_link_records(&truth, &distances, 25, 0.0, 1.0, &mut rng).unwrap();
        let fit = fit_gudmundson_mle(&records, 1.0, &FitOptions::default()).unwrap();
        let at_truth = log_likelihood(&records, 1.0, &truth).unwrap();
        let at_fit = log_likelihood(&records, 1.0, &fit.theta()).unwrap();
        assert!((at_fit - fit.loglik).abs() < 1e-6 * at_fit.abs(), "seed {seed}");
        assert!(fit.loglik >= at_truth - 1e-9, "seed {seed}: {} < {at_truth}", fit.loglik);
    }
}

/// Exact `P(D_n < d)` by the Marsaglia, Tsang and Wang matrix method.
fn ks_exact_cdf(n: usize, d: f64) -> f64 {
    let nd = n as f64 * d;
    let k = nd.floor() as usize + 1;
    let m = 2 * k - 1;
    let h = k as f64 - nd;
    let mut mat = vec![vec![0.0; m]; m];
    for i in 0..m {
        for j in 0..m {
            if i + 1 >= j {
                mat[i][j] = 1.0;
            }
        }
    }
    for i in 0..m {
        mat[i][0] -= h.powi(i as i32 + 1);
        mat[m - 1][i] -= h.powi((m - i) as i32);
    }
    if 2.0 * h - 1.0 > 0.0 {
        mat[m - 1][0] += (2.0 * h - 1.0).powi(m as i32);
    }
    for i in 0..m {
        for j in 0..m {
            if i + 1 > j {
                let f: f64 = (1..=(i + 1 - j)).map(|x| x as f64).product();
                mat[i][j] /= f;
            }
        }
    }
    let mul = |a: &Vec<Vec<f64>>, b: &Vec<Vec<f64>>| -> Vec<Vec<f64>> {
        (0..m).map(|i| (0..m).map(|j| (0..m).map(|l| a[i][l] * b[l][j]).sum()).collect()).collect()
    };
    let mut acc = mat.clone();
    for _ in 1..n {
        acc = mul(&acc, &mat);
    }
    let scale: f64 = (1..=n).map(|i| i as f64 / n as f64).product();
    acc[k - 1][k - 1] * scale
}

#[test]
fn ks_critical_value_matches_exact_distribution() {
    // the exact oracle itself against a tabulated quantile: D_25 at 0.05 is 0.26404
    assert!((1.0 - ks_exact_cdf(25, 0.26404) - 0.05).abs() < 2e-4);
    for (n, alpha) in [(25, 0.05), (25, 0.10), (10, 0.05), (50, 0.01)] {
        let c = ks_critical_value(n, alpha).unwrap();
        let size = 1.0 - ks_exact_cdf(n, c);
        assert!((size - alpha).abs() < 0.1 * alpha, "n {n} alpha {alpha}: exact size {size}");
    }
}

#[test]
fn ks_size_by_simulation() {
    let n = 25;
    let c = ks_critical_value(n, 0.05).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let trials = 20_000;
    let rejects = (0..trials)
        .filter(|_| {
            let xs: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            ks_statistic(&xs, |x| x.clamp(0.0, 1.0)) > c
        })
        .count();
    let rate = rejects as f64 / trials as f64;
    let se = (0.05 * 0.95 / trials as f64).sqrt();
    assert!((rate - 0.05).abs() < 4.0 * se, "{rate}");
}

#[test]
fn trace_outage_at_sixteen_db_margin() {
    let expected = FadingModel::UnitMeanExponential.outage_at_margin(16.2);
    assert!((expected - 0.0237).abs() < 5e-4);
    let threshold = -88.0;
    for rho in [0.0, 0.9] {
        let mut pooled = 0.0;
        for seed in 0..40 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let t = synthesize_rssi_trace(threshold + 16.2, 2_000, 50.0, rho, &mut rng).unwrap();
            let p = outage_from_trace(&t, threshold).unwrap();
            assert!((p - expected).abs() <= 0.011, "rho {rho} seed {seed}: {p}");
            pooled += p / 40.0;
        }
        assert!((pooled - expected).abs() < 0.003, "rho {rho}: {pooled}");
    }
}
