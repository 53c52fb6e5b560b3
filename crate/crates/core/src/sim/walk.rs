//! A single deployment walk from the sink outwards.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::channel::PolicyConfig;
use crate::deployment::{DeploymentResult, Hop};
use crate::error::{domain, Result};
use crate::links::LinkSource;
use crate::policy::{
    heu_as_you_go_step, heu_explore_lim_decide, last_segment_patch, learning_update,
    opt_as_you_go_decide, opt_explore_lim_decide, AsYouGoAction, ExploreMeasurements, HeuAction,
    HeuState, LearningState, PlacementDecision, Policy,
};
use crate::trail::VirtualTrail;

/// Where a walk stops.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WalkEnd {
    /// Reach the source at this location and connect it.
    Source(usize),
    /// Stop before any hop would end beyond this location; the partial
    /// segment is dropped.
    Horizon(usize),
    /// Stop after this many relays.
    Relays(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct WalkOutcome {
    pub hops: Vec<Hop>,
    pub measurements: usize,
    pub learning: Option<LearningState>,
}

struct Walker {
    end: WalkEnd,
    hops: Vec<Hop>,
    measurements: usize,
}

impl Walker {
    fn source(&self) -> Option<usize> {
        match self.end {
            WalkEnd::Source(s) => Some(s),
            _ => None,
        }
    }

    fn beyond_horizon(&self, loc: usize) -> bool {
        matches!(self.end, WalkEnd::Horizon(h) if loc > h)
    }

    fn done(&self) -> bool {
        matches!(self.end, WalkEnd::Relays(n) if self.hops.len() >= n)
    }

    fn place(&mut self, from: usize, to: usize, tx_dbm: f64, p_out: f64) {
        self.hops.push(Hop { from, to, length_steps: from - to, tx_dbm, p_out });
    }
}

/// Runs `policy` from `sink` until `end`. `power_rng` feeds the power-mix
/// draws of the fixed-power heuristic, one draw per relay.
pub fn deploy(
    policy: &Policy,
    links: &mut dyn LinkSource,
    sink: usize,
    end: WalkEnd,
    cfg: &PolicyConfig,
    power_rng: &mut ChaCha8Rng,
) -> Result<WalkOutcome> {
    cfg.validate()?;
    if let WalkEnd::Source(s) = end {
        if s <= sink {
            return Err(domain("source must lie beyond the sink"));
        }
    }
    let mut w = Walker { end, hops: Vec::new(), measurements: 0 };
    let learning = match policy {
        Policy::OptExploreLim { .. } | Policy::HeuExploreLim | Policy::OptExploreLimLearning { .. } => {
            explore_walk(policy, links, sink, cfg, &mut w)?
        }
        Policy::OptAsYouGo { .. } | Policy::HeuAsYouGo { .. } => {
            as_you_go_walk(policy, links, sink, cfg, &mut w, power_rng)?;
            None
        }
    };
    Ok(WalkOutcome { hops: w.hops, measurements: w.measurements, learning })
}

fn explore_walk(
    policy: &Policy,
    links: &mut dyn LinkSource,
    sink: usize,
    cfg: &PolicyConfig,
    w: &mut Walker,
) -> Result<Option<LearningState>> {
    let b = cfg.horizon_b;
    let mut learning = match policy {
        Policy::OptExploreLimLearning { lambda0 } => Some(LearningState::new(*lambda0)),
        _ => None,
    };
    let mut last = sink;
    while !w.done() {
        if let Some(s) = w.source() {
            if s - last <= b {
                let patch = last_segment_patch(links, last, s, cfg)?;
                w.measurements += patch.measurements;
                w.hops.extend(patch.hops);
                break;
            }
        }
        let rows = (1..=b).map(|r| links.outages(last + r, last)).collect::<Result<Vec<_>>>()?;
        w.measurements += b;
        let m = ExploreMeasurements::new(rows, cfg)?;
        let d: PlacementDecision = match (policy, &learning) {
            (Policy::OptExploreLim { lambda }, _) => opt_explore_lim_decide(&m, *lambda, cfg)?,
            (Policy::OptExploreLimLearning { .. }, Some(s)) => {
                opt_explore_lim_decide(&m, s.lambda_k, cfg)?
            }
            _ => heu_explore_lim_decide(&m, cfg)?,
        };
        let at = last + d.place_at;
        if w.beyond_horizon(at) {
            break;
        }
        w.place(at, last, d.tx_dbm, d.p_out);
        if let Some(s) = learning.as_mut() {
            *s = learning_update(s, &d, cfg);
        }
        last = at;
        links.release_below(last);
    }
    Ok(learning)
}

fn as_you_go_walk(
    policy: &Policy,
    links: &mut dyn LinkSource,
    sink: usize,
    cfg: &PolicyConfig,
    w: &mut Walker,
    power_rng: &mut ChaCha8Rng,
) -> Result<()> {
    let mut last = sink;
    let mut frontier = sink;
    let mut r = 1;
    let mut heu = HeuState::default();
    let mut tx = match policy {
        Policy::HeuAsYouGo { calibration, .. } => calibration.power_mix.sample(power_rng),
        _ => f64::NAN,
    };
    while !w.done() {
        let loc = last + r;
        if w.beyond_horizon(loc) {
            break;
        }
        // revisiting a location after a backtrack is not a new measurement
        if loc > frontier {
            w.measurements += 1;
            frontier = loc;
        }
        let row = links.outages(loc, last)?;
        let at_source = w.source() == Some(loc);
        let placed_at = match policy {
            Policy::OptAsYouGo { thresholds } => {
                match opt_as_you_go_decide(r, &row, thresholds, cfg, at_source)? {
                    AsYouGoAction::Continue => None,
                    AsYouGoAction::Place { tx_dbm, p_out, .. } => {
                        w.place(loc, last, tx_dbm, p_out);
                        Some(loc)
                    }
                }
            }
            Policy::HeuAsYouGo { calibration, .. } => {
                let (next, action) = heu_as_you_go_step(
                    &heu,
                    r,
                    &row,
                    tx,
                    calibration.target_outage,
                    cfg,
                    at_source,
                )?;
                heu = next;
                match action {
                    HeuAction::Continue => None,
                    HeuAction::PlaceHere { tx_dbm, p_out } => {
                        w.place(loc, last, tx_dbm, p_out);
                        Some(loc)
                    }
                    HeuAction::PlaceAtPrevious { steps, tx_dbm, p_out } => {
                        w.place(last + steps, last, tx_dbm, p_out);
                        Some(last + steps)
                    }
                }
            }
            _ => unreachable!("exploring policies use explore_walk"),
        };
        match placed_at {
            None => r += 1,
            Some(at) => {
                if w.source() == Some(at) {
                    break;
                }
                last = at;
                r = 1;
                heu = HeuState::default();
                if let Policy::HeuAsYouGo { calibration, .. } = policy {
                    tx = calibration.power_mix.sample(power_rng);
                }
                links.release_below(last);
            }
        }
    }
    Ok(())
}

/// Replays `policy` over a recorded trail from `sink` to `source`.
pub fn run_virtual_walk(
    policy: &Policy,
    trail: &VirtualTrail,
    sink: usize,
    source: usize,
    cfg: &PolicyConfig,
) -> Result<DeploymentResult> {
    if sink == 0 || source > trail.locations {
        return Err(domain(format!("locations must lie in 1..={}", trail.locations)));
    }
    if trail.power_levels_dbm != cfg.power_set_dbm {
        return Err(domain("trail power levels differ from the policy power set"));
    }
    let seed = match policy {
        Policy::HeuAsYouGo { seed, .. } => *seed,
        _ => 0,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let out = deploy(policy, &mut &*trail, sink, WalkEnd::Source(source), cfg, &mut rng)?;
    Ok(DeploymentResult::new(
        policy.kind().name(),
        sink,
        source,
        out.hops,
        out.measurements,
        cfg,
    ))
}
