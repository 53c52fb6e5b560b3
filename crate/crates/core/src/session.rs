//! Live deployment assistant: one state machine per trail, fed by the
//! operator's measurements and confirmations.
//!
//! Positions are location indices counted in steps from the start of the
//! trail; the sink sits at `sink` and measurements are addressed relative to
//! the last placed node. Every transition either applies completely or
//! leaves the session untouched, and the accepted events form a log that
//! replays to the same state.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::PolicyConfig;
use crate::deployment::{DeploymentResult, Hop, Totals};
use crate::error::{Error, Result};
use crate::links::LinkSource;
use crate::policy::{
    heu_as_you_go_step, heu_explore_lim_decide, last_segment_patch, learning_update,
    opt_as_you_go_decide, opt_explore_lim_decide, AsYouGoAction, Candidate, ExploreMeasurements,
    HeuAction, HeuState, LearningState, PlacementDecision, Policy, PolicyKind,
};
use crate::trail::{dbm_key, outages_from_keyed, VirtualTrail};
use crate::units::dbm_to_mw;

fn default_sink() -> usize {
    1
}

/// Everything needed to start (or replay) a session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSpec {
    pub cfg: PolicyConfig,
    pub policy: Policy,
    #[serde(default = "default_sink")]
    pub sink: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SessionEvent {
    /// Outages of the link from location `last + r` to `peer` (default: the
    /// last placed node).
    SubmitMeasurement {
        r: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        peer: Option<usize>,
        outage_by_dbm: BTreeMap<String, f64>,
    },
    RequestDecision,
    ConfirmPlacement {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        confirmed_position: Option<usize>,
    },
    /// The source lies `r` steps beyond the last placed node.
    SourceReached { r: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "phase", rename_all = "snake_case")]
pub enum Phase {
    AwaitingMeasurement { r: usize },
    ReadyToDecide,
    AwaitingPlacementConfirm,
    Finished,
}

impl Phase {
    pub fn name(&self) -> &'static str {
        match self {
            Phase::AwaitingMeasurement { .. } => "awaiting_measurement",
            Phase::ReadyToDecide => "ready_to_decide",
            Phase::AwaitingPlacementConfirm => "awaiting_placement_confirm",
            Phase::Finished => "finished",
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SessionError {
    #[error("{message}")]
    OutOfOrder { message: String, expected_phase: String },
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Internal(String),
}

impl SessionError {
    pub fn code(&self) -> &'static str {
        match self {
            SessionError::OutOfOrder { .. } => "out_of_order",
            SessionError::Validation(_) => "validation",
            SessionError::Internal(_) => "internal",
        }
    }

    pub fn expected_phase(&self) -> Option<&str> {
        match self {
            SessionError::OutOfOrder { expected_phase, .. } => Some(expected_phase),
            _ => None,
        }
    }
}

impl From<Error> for SessionError {
    fn from(e: Error) -> Self {
        match e {
            Error::Domain(_) | Error::MissingPair { .. } | Error::Incomplete { .. } => {
                SessionError::Validation(e.to_string())
            }
            other => SessionError::Internal(other.to_string()),
        }
    }
}

fn validation(msg: impl Into<String>) -> SessionError {
    SessionError::Validation(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionAction {
    Place,
    Continue,
    PlacePrevious,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub action: DecisionAction,
    /// Steps from the last placed node to the proposed node.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub u: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub position: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma_dbm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_out: Option<f64>,
    /// Place/continue threshold or target outage the decision was held to.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    pub rationale: Vec<Candidate>,
    /// Hops that confirming the decision will add.
    pub hops: Vec<Hop>,
}

impl Decision {
    fn cont(rationale: Vec<Candidate>, threshold: Option<f64>) -> Self {
        Decision {
            action: DecisionAction::Continue,
            u: None,
            position: None,
            gamma_dbm: None,
            p_out: None,
            threshold,
            rationale,
            hops: Vec::new(),
        }
    }

    fn place(
        action: DecisionAction,
        last: usize,
        hops: Vec<Hop>,
        rationale: Vec<Candidate>,
        threshold: Option<f64>,
    ) -> Self {
        let first = &hops[0];
        Decision {
            action,
            u: Some(first.from - last),
            position: Some(first.from),
            gamma_dbm: Some(first.tx_dbm),
            p_out: Some(first.p_out),
            threshold,
            rationale,
            hops,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Response {
    Measurement { accepted: bool, awaiting: usize },
    Decision(Decision),
    Placed(SessionView),
    Source { source: usize, awaiting: usize, phase: Phase },
}

/// Public snapshot of a session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub id: String,
    pub policy: PolicyKind,
    #[serde(flatten)]
    pub phase: Phase,
    pub awaiting: usize,
    /// Pairs `(from, to)` still to be measured in the current segment.
    pub expected: Vec<(usize, usize)>,
    pub sink: usize,
    pub horizon_b: usize,
    pub last_position: usize,
    pub source: Option<usize>,
    pub placed: Vec<Hop>,
    pub lambda_k: Option<f64>,
    pub heu_tx_dbm: Option<f64>,
    pub measurements: usize,
    pub totals: Totals,
}

#[derive(Debug, Clone)]
struct Proposal {
    hops: Vec<Hop>,
    decision: Option<PlacementDecision>,
}

struct PendingLinks<'a>(&'a BTreeMap<(usize, usize), Vec<f64>>);

impl LinkSource for PendingLinks<'_> {
    fn outages(&mut self, from: usize, to: usize) -> Result<Vec<f64>> {
        self.0.get(&(from, to)).cloned().ok_or(Error::MissingPair { from, to })
    }
}

#[derive(Debug, Clone)]
pub struct AssistSession {
    id: String,
    spec: SessionSpec,
    last: usize,
    step: usize,
    frontier: usize,
    measurements: usize,
    pending: BTreeMap<(usize, usize), Vec<f64>>,
    hops: Vec<Hop>,
    source: Option<usize>,
    learning: Option<LearningState>,
    heu: HeuState,
    heu_tx: Option<f64>,
    power_rng: ChaCha8Rng,
    proposal: Option<Proposal>,
    phase: Phase,
    events: Vec<SessionEvent>,
}

impl AssistSession {
    pub fn new(id: impl Into<String>, spec: SessionSpec) -> Result<Self, SessionError> {
        spec.cfg.validate()?;
        if spec.sink == 0 {
            return Err(validation("sink position must be at least 1"));
        }
        let (learning, seed) = match &spec.policy {
            Policy::OptExploreLimLearning { lambda0 } => {
                if !(lambda0.is_finite() && *lambda0 >= 0.0) {
                    return Err(validation("lambda0 must be finite and nonnegative"));
                }
                (Some(LearningState::new(*lambda0)), 0)
            }
            Policy::OptAsYouGo { thresholds } => {
                if thresholds.c_th.len() + 1 != spec.cfg.horizon_b {
                    return Err(validation("threshold table does not match B"));
                }
                (None, 0)
            }
            Policy::HeuAsYouGo { calibration, seed } => {
                let mix = &calibration.power_mix;
                if mix.levels_dbm.is_empty()
                    || mix.levels_dbm.len() != mix.weights.len()
                    || mix.levels_dbm.iter().any(|&l| spec.cfg.power_index(l).is_none())
                {
                    return Err(validation("power mix must use levels of the power set"));
                }
                (None, *seed)
            }
            _ => (None, 0),
        };
        let mut power_rng = ChaCha8Rng::seed_from_u64(seed);
        let heu_tx = match &spec.policy {
            Policy::HeuAsYouGo { calibration, .. } => {
                Some(calibration.power_mix.sample(&mut power_rng))
            }
            _ => None,
        };
        let mut s = AssistSession {
            id: id.into(),
            last: spec.sink,
            step: 1,
            frontier: spec.sink,
            measurements: 0,
            pending: BTreeMap::new(),
            hops: Vec::new(),
            source: None,
            learning,
            heu: HeuState::default(),
            heu_tx,
            power_rng,
            proposal: None,
            phase: Phase::AwaitingMeasurement { r: 1 },
            events: Vec::new(),
            spec,
        };
        s.refresh_phase();
        Ok(s)
    }

    /// Rebuilds a session from its spec and accepted event log.
    pub fn replay(
        id: impl Into<String>,
        spec: SessionSpec,
        events: &[SessionEvent],
    ) -> Result<Self, SessionError> {
        let mut s = Self::new(id, spec)?;
        for e in events {
            s.apply(e.clone())?;
        }
        Ok(s)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn spec(&self) -> &SessionSpec {
        &self.spec
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn events(&self) -> &[SessionEvent] {
        &self.events
    }

    fn cfg(&self) -> &PolicyConfig {
        &self.spec.cfg
    }

    fn explores(&self) -> bool {
        self.spec.policy.kind().explores()
    }

    /// Applies one event atomically and records it in the log.
    pub fn apply(&mut self, event: SessionEvent) -> Result<Response, SessionError> {
        let mut next = self.clone();
        let response = next.transition(&event)?;
        next.events.push(event);
        *self = next;
        Ok(response)
    }

    fn transition(&mut self, event: &SessionEvent) -> Result<Response, SessionError> {
        match event {
            SessionEvent::SubmitMeasurement { r, peer, outage_by_dbm } => {
                self.submit(*r, *peer, outage_by_dbm)
            }
            SessionEvent::RequestDecision => self.decide(),
            SessionEvent::ConfirmPlacement { confirmed_position } => self.confirm(*confirmed_position),
            SessionEvent::SourceReached { r } => self.source_reached(*r),
        }
    }

    fn out_of_order(&self, message: impl Into<String>) -> SessionError {
        SessionError::OutOfOrder { message: message.into(), expected_phase: self.phase.name().into() }
    }

    /// Pairs the current exploration segment needs, in measurement order.
    fn required_pairs(&self) -> Vec<(usize, usize)> {
        let last = self.last;
        match self.source {
            Some(s) if s - last <= self.cfg().horizon_b => {
                let mut v = vec![(s, last)];
                for j in (last + 1..s).rev() {
                    v.push((j, last));
                    v.push((s, j));
                }
                v.sort_by_key(|&(from, to)| (from, std::cmp::Reverse(to)));
                v
            }
            _ => (1..=self.cfg().horizon_b).map(|r| (last + r, last)).collect(),
        }
    }

    fn missing_pairs(&self) -> Vec<(usize, usize)> {
        if !self.explores() {
            return match self.phase {
                Phase::AwaitingMeasurement { r } => vec![(self.last + r, self.last)],
                _ => Vec::new(),
            };
        }
        self.required_pairs().into_iter().filter(|p| !self.pending.contains_key(p)).collect()
    }

    fn patching(&self) -> bool {
        matches!(self.source, Some(s) if s - self.last <= self.cfg().horizon_b)
    }

    fn refresh_phase(&mut self) {
        if !self.explores() {
            return;
        }
        let missing = self.missing_pairs();
        self.phase = match missing.first() {
            None => Phase::ReadyToDecide,
            Some(&(from, _)) => Phase::AwaitingMeasurement { r: from - self.last },
        };
    }

    fn submit(
        &mut self,
        r: usize,
        peer: Option<usize>,
        keyed: &BTreeMap<String, f64>,
    ) -> Result<Response, SessionError> {
        match self.phase {
            Phase::AwaitingMeasurement { .. } => {}
            Phase::ReadyToDecide if self.explores() => {}
            _ => return Err(self.out_of_order("no measurement expected now")),
        }
        if r == 0 {
            return Err(validation("r must be at least 1"));
        }
        let row = outages_from_keyed(&self.cfg().power_set_dbm, keyed)?;
        let from = self.last + r;
        let to = peer.unwrap_or(self.last);
        if let Some(s) = self.source {
            if from > s {
                return Err(validation(format!("location {from} lies beyond the source at {s}")));
            }
        }
        if self.explores() {
            if !self.required_pairs().contains(&(from, to)) {
                return Err(validation(format!(
                    "link {from} -> {to} is not part of the current segment"
                )));
            }
            if self.pending.insert((from, to), row).is_none() {
                self.measurements += 1;
            }
            self.refresh_phase();
        } else {
            let Phase::AwaitingMeasurement { r: expected } = self.phase else {
                unreachable!("checked above")
            };
            if r != expected || to != self.last {
                return Err(validation(format!(
                    "expected the link from step {expected} to the last node at {}",
                    self.last
                )));
            }
            if from > self.frontier {
                self.measurements += 1;
                self.frontier = from;
            }
            self.pending.insert((from, to), row);
            self.phase = Phase::ReadyToDecide;
        }
        Ok(Response::Measurement { accepted: true, awaiting: self.missing_pairs().len() })
    }

    fn decide(&mut self) -> Result<Response, SessionError> {
        match self.phase {
            Phase::ReadyToDecide => {}
            Phase::AwaitingMeasurement { .. } => {
                let n = self.missing_pairs().len();
                return Err(self.out_of_order(format!("awaiting {n} more")));
            }
            _ => return Err(self.out_of_order("no decision pending")),
        }
        let cfg = self.spec.cfg.clone();
        let last = self.last;
        let decision = if self.explores() {
            if self.patching() {
                let s = self.source.expect("patching implies a source");
                let patch = last_segment_patch(&mut PendingLinks(&self.pending), last, s, &cfg)?;
                self.proposal = Some(Proposal { hops: patch.hops.clone(), decision: None });
                Decision::place(DecisionAction::Place, last, patch.hops, patch.candidates, None)
            } else {
                let rows = (1..=cfg.horizon_b)
                    .map(|r| self.pending[&(last + r, last)].clone())
                    .collect();
                let m = ExploreMeasurements::new(rows, &cfg)?;
                let d = match (&self.spec.policy, &self.learning) {
                    (Policy::OptExploreLim { lambda }, _) => opt_explore_lim_decide(&m, *lambda, &cfg)?,
                    (Policy::OptExploreLimLearning { .. }, Some(s)) => {
                        opt_explore_lim_decide(&m, s.lambda_k, &cfg)?
                    }
                    _ => heu_explore_lim_decide(&m, &cfg)?,
                };
                let hop = Hop {
                    from: last + d.place_at,
                    to: last,
                    length_steps: d.place_at,
                    tx_dbm: d.tx_dbm,
                    p_out: d.p_out,
                };
                let rationale = d.rationale.clone();
                self.proposal = Some(Proposal { hops: vec![hop.clone()], decision: Some(d) });
                Decision::place(DecisionAction::Place, last, vec![hop], rationale, None)
            }
        } else {
            let r = self.step;
            let loc = last + r;
            let row = self.pending[&(loc, last)].clone();
            let at_source = self.source == Some(loc);
            let hop = |from: usize, tx_dbm: f64, p_out: f64| Hop {
                from,
                to: last,
                length_steps: from - last,
                tx_dbm,
                p_out,
            };
            match &self.spec.policy {
                Policy::OptAsYouGo { thresholds } => {
                    let rationale = cfg
                        .power_set_dbm
                        .iter()
                        .zip(&row)
                        .map(|(&tx, &p)| Candidate { u: r, tx_dbm: tx, objective: dbm_to_mw(tx) + cfg.xi_o_mw * p })
                        .collect();
                    let threshold = thresholds.threshold(r);
                    match opt_as_you_go_decide(r, &row, thresholds, &cfg, at_source)? {
                        AsYouGoAction::Continue => {
                            self.advance_step();
                            Decision::cont(rationale, threshold)
                        }
                        AsYouGoAction::Place { tx_dbm, p_out, .. } => {
                            let h = hop(loc, tx_dbm, p_out);
                            self.proposal = Some(Proposal { hops: vec![h.clone()], decision: None });
                            Decision::place(DecisionAction::Place, last, vec![h], rationale, threshold)
                        }
                    }
                }
                Policy::HeuAsYouGo { calibration, .. } => {
                    let tx = self.heu_tx.expect("heuristic session has a power draw");
                    let k = cfg.power_index(tx).expect("validated at creation");
                    let rationale = vec![Candidate { u: r, tx_dbm: tx, objective: row[k] }];
                    let threshold = Some(calibration.target_outage);
                    let (next, action) = heu_as_you_go_step(
                        &self.heu,
                        r,
                        &row,
                        tx,
                        calibration.target_outage,
                        &cfg,
                        at_source,
                    )?;
                    self.heu = next;
                    match action {
                        HeuAction::Continue => {
                            self.advance_step();
                            Decision::cont(rationale, threshold)
                        }
                        HeuAction::PlaceHere { tx_dbm, p_out } => {
                            let h = hop(loc, tx_dbm, p_out);
                            self.proposal = Some(Proposal { hops: vec![h.clone()], decision: None });
                            Decision::place(DecisionAction::Place, last, vec![h], rationale, threshold)
                        }
                        HeuAction::PlaceAtPrevious { steps, tx_dbm, p_out } => {
                            let h = hop(last + steps, tx_dbm, p_out);
                            self.proposal = Some(Proposal { hops: vec![h.clone()], decision: None });
                            Decision::place(DecisionAction::PlacePrevious, last, vec![h], rationale, threshold)
                        }
                    }
                }
                _ => unreachable!("exploring policies handled above"),
            }
        };
        if decision.action != DecisionAction::Continue {
            self.phase = Phase::AwaitingPlacementConfirm;
        }
        Ok(Response::Decision(decision))
    }

    fn advance_step(&mut self) {
        self.step += 1;
        self.phase = Phase::AwaitingMeasurement { r: self.step };
    }

    fn confirm(&mut self, confirmed: Option<usize>) -> Result<Response, SessionError> {
        if self.phase != Phase::AwaitingPlacementConfirm {
            return Err(self.out_of_order("no placement to confirm"));
        }
        let proposal = self.proposal.take().expect("confirm phase has a proposal");
        let proposed = proposal.hops[0].from;
        if let Some(pos) = confirmed {
            if pos != proposed {
                return Err(validation(format!("placement proposed at {proposed}, not {pos}")));
            }
        }
        if let (Some(s), Some(d)) = (self.learning.as_mut(), proposal.decision.as_ref()) {
            *s = learning_update(s, d, &self.spec.cfg);
        }
        self.last = proposal.hops.last().expect("nonempty proposal").from;
        self.hops.extend(proposal.hops);
        self.pending.clear();
        if self.source == Some(self.last) {
            self.phase = Phase::Finished;
        } else {
            self.step = 1;
            self.heu = HeuState::default();
            if let Policy::HeuAsYouGo { calibration, .. } = &self.spec.policy {
                self.heu_tx = Some(calibration.power_mix.sample(&mut self.power_rng));
            }
            self.phase = Phase::AwaitingMeasurement { r: 1 };
            self.refresh_phase();
        }
        Ok(Response::Placed(self.view()))
    }

    fn source_reached(&mut self, r: usize) -> Result<Response, SessionError> {
        if matches!(self.phase, Phase::AwaitingPlacementConfirm | Phase::Finished) {
            return Err(self.out_of_order("cannot mark the source now"));
        }
        if r == 0 {
            return Err(validation("the source must lie beyond the last placed node"));
        }
        let s = self.last + r;
        if let Some(existing) = self.source {
            if existing != s {
                return Err(validation(format!("source already marked at {existing}")));
            }
        }
        if self.explores() {
            if let Some(&(from, _)) = self.pending.keys().find(|&&(from, _)| from > s) {
                return Err(validation(format!("location {from} was measured beyond the source")));
            }
        } else if s < self.last + self.step {
            return Err(validation(format!(
                "the walk is already at step {} beyond the source",
                self.step
            )));
        }
        self.source = Some(s);
        self.refresh_phase();
        Ok(Response::Source { source: s, awaiting: self.missing_pairs().len(), phase: self.phase })
    }

    pub fn lambda_k(&self) -> Option<f64> {
        match &self.spec.policy {
            Policy::OptExploreLim { lambda } => Some(*lambda),
            Policy::OptExploreLimLearning { .. } => self.learning.as_ref().map(|s| s.lambda_k),
            Policy::OptAsYouGo { thresholds } => Some(thresholds.lambda),
            _ => None,
        }
    }

    pub fn view(&self) -> SessionView {
        let relays = self.hops.iter().filter(|h| Some(h.from) != self.source).count();
        SessionView {
            id: self.id.clone(),
            policy: self.spec.policy.kind(),
            phase: self.phase,
            awaiting: self.missing_pairs().len(),
            expected: self.missing_pairs(),
            sink: self.spec.sink,
            horizon_b: self.cfg().horizon_b,
            last_position: self.last,
            source: self.source,
            placed: self.hops.clone(),
            lambda_k: self.lambda_k(),
            heu_tx_dbm: self.heu_tx,
            measurements: self.measurements,
            totals: Totals::from_hops(&self.hops, relays, self.cfg()),
        }
    }

    /// The network deployed so far.
    pub fn network(&self) -> DeploymentResult {
        let mut r = DeploymentResult::new(
            self.spec.policy.kind().name(),
            self.spec.sink,
            self.source.unwrap_or(0),
            self.hops.clone(),
            self.measurements,
            self.cfg(),
        );
        if self.source.is_none() {
            r.source = self.last;
        }
        r
    }
}

/// Anything that accepts session events: a local [`AssistSession`] or a
/// remote one behind the HTTP API.
pub trait SessionClient {
    fn send(&mut self, event: SessionEvent) -> Result<Response, SessionError>;
    fn state(&mut self) -> Result<SessionView, SessionError>;
}

impl SessionClient for AssistSession {
    fn send(&mut self, event: SessionEvent) -> Result<Response, SessionError> {
        self.apply(event)
    }

    fn state(&mut self) -> Result<SessionView, SessionError> {
        Ok(self.view())
    }
}

/// Plays the operator on a recorded trail: walks from the session's sink to
/// `source`, measuring whatever the session asks for, marking the source
/// once it is within reach and confirming every placement.
pub fn walk_recorded_trail(
    client: &mut dyn SessionClient,
    trail: &VirtualTrail,
    source: usize,
) -> Result<(), SessionError> {
    let levels = trail.power_levels_dbm.clone();
    let keyed = |from: usize, to: usize| -> Result<BTreeMap<String, f64>, SessionError> {
        let row = trail.require(from, to)?;
        Ok(levels.iter().zip(row).map(|(&l, &q)| (dbm_key(l), q)).collect())
    };
    loop {
        let view = client.state()?;
        let last = view.last_position;
        if last >= source && view.phase != Phase::Finished {
            return Err(SessionError::Internal(format!("walk passed the source at {source}")));
        }
        match view.phase {
            Phase::Finished => return Ok(()),
            Phase::AwaitingPlacementConfirm => {
                client.send(SessionEvent::ConfirmPlacement { confirmed_position: None })?;
            }
            Phase::ReadyToDecide => {
                client.send(SessionEvent::RequestDecision)?;
            }
            Phase::AwaitingMeasurement { r } => {
                let explores = view.policy.explores();
                if view.source.is_none() {
                    let within = if explores { source - last <= view.horizon_b } else { last + r == source };
                    if within {
                        client.send(SessionEvent::SourceReached { r: source - last })?;
                        continue;
                    }
                }
                for (from, to) in view.expected {
                    let peer = (to != last).then_some(to);
                    client.send(SessionEvent::SubmitMeasurement {
                        r: from - last,
                        peer,
                        outage_by_dbm: keyed(from, to)?,
                    })?;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::AsYouGoThresholds;

    fn cfg() -> PolicyConfig {
        PolicyConfig {
            step_m: 10.0,
            horizon_b: 5,
            power_set_dbm: vec![-10.0, 0.0],
            xi_o_mw: 6.0,
            xi_r_mw: 0.5,
        }
    }

    fn keyed(a: f64, b: f64) -> BTreeMap<String, f64> {
        BTreeMap::from([("-10".to_string(), a), ("0".to_string(), b)])
    }

    fn submit(r: usize, a: f64) -> SessionEvent {
        SessionEvent::SubmitMeasurement { r, peer: None, outage_by_dbm: keyed(a, a) }
    }

    #[test]
    fn exploration_waits_for_all_candidates() {
        let spec = SessionSpec { cfg: cfg(), policy: Policy::OptExploreLim { lambda: 0.2 }, sink: 1 };
        let mut s = AssistSession::new("a", spec).unwrap();
        for r in 1..=3 {
            s.apply(submit(r, 0.1)).unwrap();
        }
        let err = s.apply(SessionEvent::RequestDecision).unwrap_err();
        assert_eq!(err.to_string(), "awaiting 2 more");
        assert_eq!(err.expected_phase(), Some("awaiting_measurement"));
        assert_eq!(s.events().len(), 3);
        for r in 4..=5 {
            s.apply(submit(r, 0.1)).unwrap();
        }
        let Response::Decision(d) = s.apply(SessionEvent::RequestDecision).unwrap() else {
            panic!("expected a decision")
        };
        assert_eq!((d.action, d.u), (DecisionAction::Place, Some(5)));
        s.apply(SessionEvent::ConfirmPlacement { confirmed_position: Some(6) }).unwrap();
        assert_eq!(s.view().last_position, 6);
        assert_eq!(s.phase(), Phase::AwaitingMeasurement { r: 1 });
    }

    #[test]
    fn as_you_go_places_on_threshold() {
        let th = AsYouGoThresholds { c_th: vec![0.9; 4], lambda: 0.3 };
        let spec = SessionSpec { cfg: cfg(), policy: Policy::OptAsYouGo { thresholds: th }, sink: 1 };
        let mut s = AssistSession::new("b", spec).unwrap();
        // q = min(0.1 + 6 * 0.1, 1 + 6 * 0.1) = 0.7 <= 0.9
        s.apply(submit(1, 0.1)).unwrap();
        let Response::Decision(d) = s.apply(SessionEvent::RequestDecision).unwrap() else {
            panic!("expected a decision")
        };
        assert_eq!((d.action, d.position), (DecisionAction::Place, Some(2)));
        assert!(s.apply(submit(2, 0.1)).is_err());
    }

    #[test]
    fn rejected_events_leave_no_trace() {
        let spec = SessionSpec { cfg: cfg(), policy: Policy::HeuExploreLim, sink: 1 };
        let mut s = AssistSession::new("c", spec).unwrap();
        let bad = SessionEvent::SubmitMeasurement { r: 1, peer: None, outage_by_dbm: keyed(1.2, 0.0) };
        assert_eq!(s.apply(bad).unwrap_err().code(), "validation");
        let unknown = SessionEvent::SubmitMeasurement {
            r: 1,
            peer: None,
            outage_by_dbm: BTreeMap::from([("3".to_string(), 0.1)]),
        };
        assert!(s.apply(unknown).is_err());
        assert!(s.apply(SessionEvent::ConfirmPlacement { confirmed_position: None }).is_err());
        assert!(s.events().is_empty());
        assert_eq!(s.view().measurements, 0);
    }
}
