//! Shortest-path baseline over a fully measured trail, and the final
//! segment rule shared by the exploring policies.

use petgraph::algo::{astar, dijkstra};
use petgraph::graph::{DiGraph, NodeIndex};

use super::{best_power, Candidate};
use crate::channel::PolicyConfig;
use crate::deployment::{DeploymentResult, Hop};
use crate::error::{domain, Error, Result};
use crate::links::LinkSource;
use crate::trail::VirtualTrail;

fn hop(from: usize, to: usize, row: &[f64], cfg: &PolicyConfig) -> (Hop, f64) {
    let (k, cost) = best_power(row, cfg);
    (
        Hop { from, to, length_steps: from - to, tx_dbm: cfg.power_set_dbm[k], p_out: row[k] },
        cost,
    )
}

/// Minimum-cost relay chain from `source` down to `sink` when every link
/// within `B` steps is known. Each edge costs its cheapest link cost plus
/// `xi_r`; the source itself is not charged.
pub fn opt_explore_all(
    trail: &VirtualTrail,
    sink: usize,
    source: usize,
    cfg: &PolicyConfig,
) -> Result<DeploymentResult> {
    if sink == 0 || sink >= source || source > trail.locations {
        return Err(domain(format!("need 1 <= sink < source <= {}", trail.locations)));
    }
    let b = cfg.horizon_b;
    let node = |loc: usize| NodeIndex::new(loc - sink);
    let mut graph: DiGraph<usize, Hop> = DiGraph::new();
    for loc in sink..=source {
        graph.add_node(loc);
    }
    for j in sink + 1..=source {
        for i in (j.saturating_sub(b).max(sink)..j).rev() {
            if let Some(row) = trail.outage(j, i) {
                graph.add_edge(node(j), node(i), hop(j, i, row, cfg).0);
            }
        }
    }
    let weight = |h: &Hop| h.link_cost_mw(cfg) + cfg.xi_r_mw;
    let Some((_, path)) = astar(&graph, node(source), |n| n == node(sink), |e| weight(e.weight()), |_| 0.0)
    else {
        let reached = dijkstra(&graph, node(source), None, |e| weight(e.weight()));
        let stuck_at = reached.keys().map(|&n| graph[n]).min().unwrap_or(source);
        return Err(Error::Disconnected { stuck_at, horizon_b: b });
    };
    let hops: Vec<Hop> = path
        .windows(2)
        .rev()
        .map(|w| graph[graph.find_edge(w[0], w[1]).expect("path follows graph edges")].clone())
        .collect();
    let pairs = (sink..=source)
        .map(|j| (j - sink).min(b))
        .sum::<usize>();
    Ok(DeploymentResult::new("opt_explore_all", sink, source, hops, pairs, cfg))
}

/// Result of the final-segment rule: a direct hop or one intermediate relay.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchChoice {
    pub intermediate: Option<usize>,
    /// Hops ordered from `last` outwards.
    pub hops: Vec<Hop>,
    /// Link costs plus `xi_r` for an intermediate relay.
    pub cost_mw: f64,
    pub measurements: usize,
    /// Every evaluated path, keyed by the length of its first hop.
    pub candidates: Vec<Candidate>,
}

/// Cheapest way to reach `target` from the last relay `last` using at most
/// one more relay in between. Every location pair in the segment is
/// measured once: `2 (m - 1) + 1` pairs for `m` remaining steps.
pub fn last_segment_patch(
    links: &mut dyn LinkSource,
    last: usize,
    target: usize,
    cfg: &PolicyConfig,
) -> Result<PatchChoice> {
    if target <= last {
        return Err(domain("patch target must lie beyond the last relay"));
    }
    let m = target - last;
    if m > cfg.horizon_b {
        return Err(domain(format!("remaining {m} steps exceed B = {}", cfg.horizon_b)));
    }
    let mut required = vec![(target, last)];
    for j in (last + 1..target).rev() {
        required.push((j, last));
        required.push((target, j));
    }
    let mut rows = Vec::with_capacity(required.len());
    let mut missing = Vec::new();
    for &(from, to) in &required {
        match links.outages(from, to) {
            Ok(row) => {
                if row.len() != cfg.power_set_dbm.len() {
                    return Err(domain(format!("link {from} -> {to} has the wrong number of levels")));
                }
                rows.push(row);
            }
            Err(Error::MissingPair { from, to }) => missing.push((from, to)),
            Err(e) => return Err(e),
        }
    }
    if !missing.is_empty() {
        return Err(Error::Incomplete { missing });
    }
    let (direct, direct_cost) = hop(target, last, &rows[0], cfg);
    let mut candidates =
        vec![Candidate { u: m, tx_dbm: direct.tx_dbm, objective: direct_cost }];
    let mut best = (None, vec![direct], direct_cost);
    for (n, j) in (last + 1..target).rev().enumerate() {
        let (first, c1) = hop(j, last, &rows[1 + 2 * n], cfg);
        let (second, c2) = hop(target, j, &rows[2 + 2 * n], cfg);
        let cost = c1 + cfg.xi_r_mw + c2;
        candidates.push(Candidate { u: j - last, tx_dbm: first.tx_dbm, objective: cost });
        if cost < best.2 {
            best = (Some(j), vec![first, second], cost);
        }
    }
    Ok(PatchChoice {
        intermediate: best.0,
        hops: best.1,
        cost_mw: best.2,
        measurements: required.len(),
        candidates,
    })
}
