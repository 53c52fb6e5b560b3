use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Per-packet RSSI values recorded on one link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RssiTrace {
    pub samples_dbm: Vec<f64>,
    pub inter_packet_ms: f64,
}

impl RssiTrace {
    pub fn new(samples_dbm: Vec<f64>, inter_packet_ms: f64) -> Result<Self> {
        let t = Self { samples_dbm, inter_packet_ms };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples_dbm.is_empty() {
            return Err(domain("RSSI trace is empty"));
        }
        if !(self.inter_packet_ms > 0.0) {
            return Err(domain("inter-packet interval must be positive"));
        }
        Ok(())
    }

    /// Arithmetic mean of the per-packet RSSI in dBm.
    pub fn mean_dbm(&self) -> f64 {
        self.samples_dbm.iter().sum::<f64>() / self.samples_dbm.len() as f64
    }

    /// Fading-averaged received power: linear mean, reported in dBm.
    pub fn mean_power_dbm(&self) -> f64 {
        let mw = self.samples_dbm.iter().map(|&x| 10f64.powf(x / 10.0)).sum::<f64>()
            / self.samples_dbm.len() as f64;
        10.0 * mw.log10()
    }
}

/// Fraction of packets whose RSSI is strictly below `rcv_min_dbm`.
pub fn outage_from_trace(t: &RssiTrace, rcv_min_dbm: f64) -> Result<f64> {
    if t.samples_dbm.is_empty() {
        return Err(domain("cannot estimate outage from an empty trace"));
    }
    let below = t.samples_dbm.iter().filter(|&&x| x < rcv_min_dbm).count();
    Ok(below as f64 / t.samples_dbm.len() as f64)
}

/// Mean sojourn of the two-state Good/Bad fading abstraction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunLengthStats {
    pub mean_good_run_packets: f64,
    pub mean_bad_run_packets: f64,
    pub mean_good_run_ms: f64,
    pub mean_bad_run_ms: f64,
    pub good_runs: usize,
    pub bad_runs: usize,
    /// The trace never entered the Bad state; Bad means are reported as 0.
    pub no_bad_state: bool,
    /// The trace never entered the Good state; Good means are reported as 0.
    pub no_good_state: bool,
}

/// Classifies packets as Bad when RSSI is more than `offset_db` below the
/// trace mean and reports mean run lengths. Runs cut by the trace ends count.
pub fn good_bad_run_analysis(t: &RssiTrace, offset_db: f64) -> Result<RunLengthStats> {
    t.validate()?;
    let threshold = t.mean_dbm() - offset_db;
    let mut good = Vec::new();
    let mut bad = Vec::new();
    let mut current_bad = t.samples_dbm[0] < threshold;
    let mut len = 0usize;
    for &x in &t.samples_dbm {
        let is_bad = x < threshold;
        if is_bad == current_bad {
            len += 1;
        } else {
            if current_bad { bad.push(len) } else { good.push(len) }
            current_bad = is_bad;
            len = 1;
        }
    }
    if current_bad { bad.push(len) } else { good.push(len) }

    let mean = |runs: &[usize]| {
        if runs.is_empty() {
            0.0
        } else {
            runs.iter().sum::<usize>() as f64 / runs.len() as f64
        }
    };
    let g = mean(&good);
    let b = mean(&bad);
    Ok(RunLengthStats {
        mean_good_run_packets: g,
        mean_bad_run_packets: b,
        mean_good_run_ms: g * t.inter_packet_ms,
        mean_bad_run_ms: b * t.inter_packet_ms,
        good_runs: good.len(),
        bad_runs: bad.len(),
        no_bad_state: bad.is_empty(),
        no_good_state: good.is_empty(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn outage_counts_strictly_below() {
        let t = RssiTrace::new(vec![-80.0, -90.0, -85.0, -95.0], 50.0).unwrap();
        assert_eq!(outage_from_trace(&t, -88.0).unwrap(), 0.5);
        let t = RssiTrace::new(vec![-88.0, -70.0], 50.0).unwrap();
        assert_eq!(outage_from_trace(&t, -88.0).unwrap(), 0.0);
    }

    #[test]
    fn empty_trace_is_an_error() {
        let t = RssiTrace { samples_dbm: vec![], inter_packet_ms: 50.0 };
        assert!(outage_from_trace(&t, -88.0).is_err());
        assert!(RssiTrace::new(vec![], 50.0).is_err());
    }

    #[test]
    fn alternating_trace_has_unit_runs() {
        let samples: Vec<f64> = (0..100).map(|i| if i % 2 == 0 { -60.0 } else { -120.0 }).collect();
        // mean -90, threshold -95 with offset 5
        let t = RssiTrace::new(samples, 50.0).unwrap();
        let s = good_bad_run_analysis(&t, 5.0).unwrap();
        assert_eq!(s.mean_good_run_packets, 1.0);
        assert_eq!(s.mean_bad_run_packets, 1.0);
        assert_eq!(s.mean_bad_run_ms, 50.0);
    }

    #[test]
    fn all_good_trace_flags_missing_bad_state() {
        let t = RssiTrace::new(vec![-70.0; 40], 50.0).unwrap();
        let s = good_bad_run_analysis(&t, 20.0).unwrap();
        assert_eq!(s.mean_good_run_packets, 40.0);
        assert_eq!(s.mean_bad_run_packets, 0.0);
        assert!(s.no_bad_state);
        assert_eq!(s.good_runs, 1);
    }

    #[test]
    fn boundary_runs_are_counted() {
        let t = RssiTrace::new(vec![-120.0, -60.0, -60.0, -60.0, -120.0, -120.0], 10.0).unwrap();
        let s = good_bad_run_analysis(&t, 10.0).unwrap();
        assert_eq!(s.bad_runs, 2);
        assert_eq!(s.mean_bad_run_packets, 1.5);
        assert_eq!(s.mean_good_run_packets, 3.0);
    }
}
