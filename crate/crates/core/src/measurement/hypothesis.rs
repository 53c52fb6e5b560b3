use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use crate::error::{domain, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationTest {
    pub n: usize,
    pub rho_hat: f64,
    pub t_stat: f64,
    pub rho_critical: f64,
    pub reject: bool,
}

/// `|rho|` at the two-sided rejection boundary of the t-test with `n` pairs.
pub fn correlation_critical_value(n: usize, alpha: f64) -> Result<f64> {
    if n < 3 {
        return Err(domain("correlation test needs at least 3 pairs"));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(domain("alpha must lie in (0, 1)"));
    }
    let dof = (n - 2) as f64;
    let t = StudentsT::new(0.0, 1.0, dof).expect("positive dof").inverse_cdf(1.0 - alpha / 2.0);
    Ok(t / (dof + t * t).sqrt())
}

/// Two-sided test of zero correlation between paired shadowing values.
pub fn correlation_hypothesis_test(pairs: &[(f64, f64)], alpha: f64) -> Result<CorrelationTest> {
    let n = pairs.len();
    let rho_critical = correlation_critical_value(n, alpha)?;
    let nf = n as f64;
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / nf;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for &(x, y) in pairs {
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
        sxy += (x - mx) * (y - my);
    }
    if !(sxx > 0.0 && syy > 0.0) {
        return Err(Error::Domain("degenerate variance in correlation test".into()));
    }
    let rho = (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0);
    let t_stat = if rho.abs() >= 1.0 {
        f64::INFINITY.copysign(rho)
    } else {
        rho * (nf - 2.0).sqrt() / (1.0 - rho * rho).sqrt()
    };
    Ok(CorrelationTest { n, rho_hat: rho, t_stat, rho_critical, reject: rho.abs() > rho_critical })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KsTest {
    pub n: usize,
    pub d_stat: f64,
    pub d_critical: f64,
    pub reject: bool,
}

/// Limiting Kolmogorov distribution `P(sqrt(n) D_n <= x)`.
pub fn kolmogorov_cdf(x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x < 1.0 {
        // theta-function form converges fast for small x
        let c = std::f64::consts::PI * std::f64::consts::PI / (8.0 * x * x);
        let s: f64 = (0..50).map(|k| (-((2 * k + 1) as f64).powi(2) * c).exp()).sum();
        return (2.0 * std::f64::consts::PI).sqrt() / x * s;
    }
    let mut s = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * x * x).exp();
        s += if k % 2 == 1 { term } else { -term };
        if term < 1e-18 {
            break;
        }
    }
    1.0 - 2.0 * s
}

/// Critical value of the one-sample KS statistic: the asymptotic quantile
/// with Stephens' finite-`n` scaling `sqrt(n) + 0.12 + 0.11 / sqrt(n)`.
pub fn ks_critical_value(n: usize, alpha: f64) -> Result<f64> {
    if n == 0 {
        return Err(domain("KS test needs samples"));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(domain("alpha must lie in (0, 1)"));
    }
    let target = 1.0 - alpha;
    let (mut lo, mut hi) = (0.0, 10.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if kolmogorov_cdf(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let c = 0.5 * (lo + hi);
    let rn = (n as f64).sqrt();
    Ok(c / (rn + 0.12 + 0.11 / rn))
}

/// Sup-distance between the empirical CDF and `cdf`.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            let above = (i + 1) as f64 / n - f;
            let below = f - i as f64 / n;
            above.max(below)
        })
        .fold(0.0, f64::max)
}

/// One-sample KS test of `samples` against `N(0, sigma_db²)`.
pub fn ks_normality_test(samples: &[f64], sigma_db: f64, alpha: f64) -> Result<KsTest> {
    if samples.len() < 5 {
        return Err(domain("KS normality test needs at least 5 samples"));
    }
    if !(sigma_db > 0.0) {
        return Err(domain("hypothesized sigma must be positive"));
    }
    let normal = Normal::new(0.0, sigma_db).expect("sigma checked");
    let d_stat = ks_statistic(samples, |x| normal.cdf(x));
    let d_critical = ks_critical_value(samples.len(), alpha)?;
    Ok(KsTest { n: samples.len(), d_stat, d_critical, reject: d_stat > d_critical })
}
