//! Sources of per-link outage measurements for walks and sessions.

use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use rand::Rng;

use crate::channel::{outage_by_power, ChannelParams, PolicyConfig};
use crate::error::Result;
use crate::trail::VirtualTrail;

/// Anything that can report the per-power outages of a link, with `from`
/// the transmitter (farther from the sink).
pub trait LinkSource {
    fn outages(&mut self, from: usize, to: usize) -> Result<Vec<f64>>;

    /// Hint that no link ending below `loc` will be queried again.
    fn release_below(&mut self, _loc: usize) {}
}

impl LinkSource for &VirtualTrail {
    fn outages(&mut self, from: usize, to: usize) -> Result<Vec<f64>> {
        self.require(from, to).map(<[f64]>::to_vec)
    }
}

/// Links drawn lazily from the channel model. Each pair gets one shadowing
/// draw the first time it is queried and keeps it afterwards.
pub struct ModelLinks<'a> {
    p: &'a ChannelParams,
    cfg: &'a PolicyConfig,
    rng: ChaCha8Rng,
    cache: HashMap<(usize, usize), Vec<f64>>,
}

impl<'a> ModelLinks<'a> {
    pub fn new(p: &'a ChannelParams, cfg: &'a PolicyConfig, seed: u64) -> Self {
        Self { p, cfg, rng: ChaCha8Rng::seed_from_u64(seed), cache: HashMap::new() }
    }
}

impl LinkSource for ModelLinks<'_> {
    fn outages(&mut self, from: usize, to: usize) -> Result<Vec<f64>> {
        let key = (from.max(to), from.min(to));
        if let Some(v) = self.cache.get(&key) {
            return Ok(v.clone());
        }
        let nu = self.p.sigma_db * self.rng.sample::<f64, _>(StandardNormal);
        let r_m = (key.0 - key.1) as f64 * self.cfg.step_m;
        let v = outage_by_power(self.p, &self.cfg.power_set_dbm, r_m, nu)?;
        self.cache.insert(key, v.clone());
        Ok(v)
    }

    fn release_below(&mut self, loc: usize) {
        self.cache.retain(|&(_, to), _| to >= loc);
    }
}
