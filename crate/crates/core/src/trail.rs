//! Complete pairwise link-outage data over a discretized trail.
//!
//! Locations are numbered `1..=locations`. A link is stored directionally as
//! `(from, to)` where `from` is the transmitter; walks always query the
//! farther node transmitting towards the node nearer the sink, and fall back
//! to the reverse direction when only that one was recorded.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::channel::{outage_by_power, ChannelParams, PolicyConfig};
use crate::error::{domain, Error, Result};

pub const TRAIL_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct VirtualTrail {
    pub step_m: f64,
    pub locations: usize,
    pub power_levels_dbm: Vec<f64>,
    links: BTreeMap<(usize, usize), Vec<f64>>,
}

impl VirtualTrail {
    pub fn new(step_m: f64, locations: usize, power_levels_dbm: Vec<f64>) -> Result<Self> {
        if !(step_m > 0.0) {
            return Err(domain("step_m must be positive"));
        }
        if locations < 2 {
            return Err(domain("a trail needs at least two locations"));
        }
        if power_levels_dbm.is_empty() || power_levels_dbm.windows(2).any(|w| w[0] >= w[1]) {
            return Err(domain("power levels must be nonempty and strictly increasing"));
        }
        Ok(Self { step_m, locations, power_levels_dbm, links: BTreeMap::new() })
    }

    pub fn insert(&mut self, from: usize, to: usize, outage: Vec<f64>) -> Result<()> {
        if from == to || from == 0 || to == 0 || from > self.locations || to > self.locations {
            return Err(domain(format!("invalid link {from} -> {to}")));
        }
        if outage.len() != self.power_levels_dbm.len() {
            return Err(domain(format!(
                "link {from} -> {to}: expected {} outage values, got {}",
                self.power_levels_dbm.len(),
                outage.len()
            )));
        }
        if outage.iter().any(|o| !(0.0..=1.0).contains(o)) {
            return Err(domain(format!("link {from} -> {to}: outage outside [0, 1]")));
        }
        self.links.insert((from, to), outage);
        Ok(())
    }

    /// Per-power outages for `from` transmitting to `to`.
    pub fn outage(&self, from: usize, to: usize) -> Option<&[f64]> {
        self.links
            .get(&(from, to))
            .or_else(|| self.links.get(&(to, from)))
            .map(Vec::as_slice)
    }

    pub fn require(&self, from: usize, to: usize) -> Result<&[f64]> {
        self.outage(from, to).ok_or(Error::MissingPair { from, to })
    }

    /// Number of stored directional links.
    pub fn stored_links(&self) -> usize {
        self.links.len()
    }

    pub fn links(&self) -> impl Iterator<Item = (&(usize, usize), &Vec<f64>)> {
        self.links.iter()
    }

    pub fn to_file(&self) -> TrailFile {
        TrailFile {
            schema_version: TRAIL_SCHEMA_VERSION,
            step_m: self.step_m,
            locations: self.locations,
            power_levels_dbm: self.power_levels_dbm.clone(),
            links: self
                .links
                .iter()
                .map(|(&(from, to), out)| TrailLink {
                    from,
                    to,
                    outage_by_dbm: self
                        .power_levels_dbm
                        .iter()
                        .zip(out)
                        .map(|(&p, &o)| (dbm_key(p), o))
                        .collect(),
                })
                .collect(),
        }
    }

    pub fn from_file(file: &TrailFile) -> Result<Self> {
        if file.schema_version != TRAIL_SCHEMA_VERSION {
            return Err(domain(format!("unsupported trail schema_version {}", file.schema_version)));
        }
        let mut trail = Self::new(file.step_m, file.locations, file.power_levels_dbm.clone())?;
        for link in &file.links {
            let out = outages_from_keyed(&trail.power_levels_dbm, &link.outage_by_dbm)?;
            trail.insert(link.from, link.to, out)?;
        }
        Ok(trail)
    }
}

/// On-disk trail representation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrailFile {
    pub schema_version: u32,
    pub step_m: f64,
    pub locations: usize,
    pub power_levels_dbm: Vec<f64>,
    pub links: Vec<TrailLink>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrailLink {
    pub from: usize,
    pub to: usize,
    pub outage_by_dbm: BTreeMap<String, f64>,
}

/// Map key for a power level: integral levels print without a fraction.
pub fn dbm_key(dbm: f64) -> String {
    if dbm.fract() == 0.0 && dbm.abs() < 1e15 {
        format!("{}", dbm as i64)
    } else {
        format!("{dbm}")
    }
}

/// Align a `{"-25": x, ...}` map with an ordered power set.
pub fn outages_from_keyed(levels: &[f64], keyed: &BTreeMap<String, f64>) -> Result<Vec<f64>> {
    let mut out = vec![f64::NAN; levels.len()];
    for (key, &value) in keyed {
        let dbm: f64 = key
            .trim()
            .parse()
            .map_err(|_| domain(format!("power key {key:?} is not a number")))?;
        let idx = levels
            .iter()
            .position(|&l| (l - dbm).abs() < 1e-9)
            .ok_or_else(|| domain(format!("unknown power level {key} dBm")))?;
        if !(0.0..=1.0).contains(&value) {
            return Err(domain(format!("outage {value} at {key} dBm is outside [0, 1]")));
        }
        out[idx] = value;
    }
    if let Some(i) = out.iter().position(|v| v.is_nan()) {
        return Err(domain(format!("missing outage for {} dBm", dbm_key(levels[i]))));
    }
    Ok(out)
}

/// Synthetic trail: one shadowing draw per unordered pair within `B` steps,
/// shared across power levels.
pub fn synthesize_virtual_trail<R: Rng + ?Sized>(
    p: &ChannelParams,
    cfg: &PolicyConfig,
    rng: &mut R,
    num_locations: usize,
) -> Result<VirtualTrail> {
    p.validate()?;
    cfg.validate()?;
    if num_locations < 2 {
        return Err(domain("num_locations must be at least 2"));
    }
    let decorrelation = p.decorr_d_m * 10f64.ln();
    if cfg.step_m < decorrelation {
        return Err(domain(format!(
            "step {} m is shorter than the shadowing decorrelation distance {:.2} m",
            cfg.step_m, decorrelation
        )));
    }
    let mut trail = VirtualTrail::new(cfg.step_m, num_locations, cfg.power_set_dbm.clone())?;
    for near in 1..=num_locations {
        for far in near + 1..=(near + cfg.horizon_b).min(num_locations) {
            let z: f64 = rng.sample(StandardNormal);
            let r = (far - near) as f64 * cfg.step_m;
            let out = outage_by_power(p, &cfg.power_set_dbm, r, p.sigma_db * z)?;
            trail.insert(far, near, out)?;
        }
    }
    Ok(trail)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::FadingModel;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn setup() -> (ChannelParams, PolicyConfig) {
        (
            ChannelParams {
                eta: 4.7,
                sigma_db: 7.7,
                decorr_d_m: 2.6,
                ref_gain_db: 4.36,
                r0_m: 1.0,
                rcv_min_dbm: -88.0,
                fading: FadingModel::UnitMeanExponential,
            },
            PolicyConfig {
                step_m: 11.0,
                horizon_b: 5,
                power_set_dbm: vec![-25.0, -15.0, -10.0, -5.0, 0.0],
                xi_o_mw: 10.0,
                xi_r_mw: 0.01,
            },
        )
    }

    #[test]
    fn eleven_location_pair_count() {
        let (p, cfg) = setup();
        let t = synthesize_virtual_trail(&p, &cfg, &mut ChaCha8Rng::seed_from_u64(3), 11).unwrap();
        assert_eq!(t.stored_links(), 40);
    }

    #[test]
    fn noiseless_trail_has_no_outage() {
        let (mut p, cfg) = setup();
        p.sigma_db = 0.0;
        p.fading = FadingModel::Deterministic;
        p.ref_gain_db = 60.0;
        let t = synthesize_virtual_trail(&p, &cfg, &mut ChaCha8Rng::seed_from_u64(0), 11).unwrap();
        assert!(t.links().all(|(_, o)| o.iter().all(|&x| x == 0.0)));
    }

    #[test]
    fn same_seed_same_trail_and_monotone_in_power() {
        let (p, cfg) = setup();
        let a = synthesize_virtual_trail(&p, &cfg, &mut ChaCha8Rng::seed_from_u64(5), 11).unwrap();
        let b = synthesize_virtual_trail(&p, &cfg, &mut ChaCha8Rng::seed_from_u64(5), 11).unwrap();
        assert_eq!(a, b);
        for (_, out) in a.links() {
            assert!(out.windows(2).all(|w| w[1] <= w[0]));
        }
    }

    #[test]
    fn short_steps_are_rejected() {
        let (p, mut cfg) = setup();
        cfg.step_m = 5.0;
        assert!(synthesize_virtual_trail(&p, &cfg, &mut ChaCha8Rng::seed_from_u64(0), 4).is_err());
    }

    #[test]
    fn reverse_lookup_and_file_round_trip() {
        let (p, cfg) = setup();
        let t = synthesize_virtual_trail(&p, &cfg, &mut ChaCha8Rng::seed_from_u64(1), 6).unwrap();
        assert_eq!(t.outage(2, 1), t.outage(1, 2));
        assert!(t.outage(6, 1).is_some());
        assert!(matches!(t.require(1, 6), Ok(_)));
        let back = VirtualTrail::from_file(&t.to_file()).unwrap();
        assert_eq!(back, t);
        assert_eq!(dbm_key(-25.0), "-25");
        assert_eq!(dbm_key(-2.5), "-2.5");
    }
}
