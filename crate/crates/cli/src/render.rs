//! Plain-text tables and plot-ready CSV for command results.

use std::fmt::Write;

use relaytrail_core::measurement::EstimateReport;
use relaytrail_core::policy::PolicyKind;
use relaytrail_core::store::StoredRun;
use serde_json::Value;

use crate::{CliError, CliResult, SimulateOutput, SolveOutput, SynthOutput, VirtualWalkOutput};

pub fn solve_text(s: &SolveOutput) -> String {
    let mut t = String::new();
    if let Some(b) = s.exploration_limit {
        writeln!(t, "exploration limit B = {b}").unwrap();
    }
    let l = &s.lambda_star;
    writeln!(t, "lambda_star = {:.6}", l.lambda).unwrap();
    writeln!(t, "  std error {:.2e}, residual {:.2e}, {} bisection steps", l.std_error, l.residual, l.iterations).unwrap();
    if let Some(th) = &s.thresholds {
        writeln!(t, "as-you-go lambda = {:.6}", th.lambda).unwrap();
        writeln!(t, "{:>3}  {:>12}", "r", "c_th(r)").unwrap();
        for (i, c) in th.c_th.iter().enumerate() {
            writeln!(t, "{:>3}  {:>12.6}", i + 1, c).unwrap();
        }
    }
    t
}

pub fn metrics_text(s: &SimulateOutput) -> String {
    let mut t = format!("{} steps x {} reps, seed {}\n", s.horizon_steps, s.reps, s.seed);
    writeln!(
        t,
        "{:>6} {:>10}  {:<5} {:>10} {:>21} {:>19} {:>19} {:>15}",
        "param", "value", "algo", "lambda", "cost/step (95% CI)", "power/link (mW)", "outage/link", "distance"
    )
    .unwrap();
    for r in &s.rows {
        let m = &r.metrics;
        let lambda = r.solved_lambda.map_or("-".to_string(), |l| format!("{l:.6}"));
        writeln!(
            t,
            "{:>6} {:>10.4}  {:<5} {:>10} {:>10.6} ± {:<8.6} {:>8.4} ± {:<8.4} {:>8.5} ± {:<8.5} {:>6.3} ± {:<6.3}",
            r.param.name(),
            r.value,
            r.policy.abbreviation(),
            lambda,
            m.mean_cost_per_step,
            m.cost_per_step_half_width,
            m.mean_power_per_link_mw,
            m.power_half_width,
            m.mean_outage_per_link,
            m.outage_half_width,
            m.mean_placement_distance_steps,
            m.distance_half_width
        )
        .unwrap();
    }
    t
}

fn abbreviation(policy: &str) -> &str {
    match PolicyKind::parse(policy) {
        Some(k) => k.abbreviation(),
        None if policy == "opt_explore_all" => "OEA",
        None => policy,
    }
}

/// One row per policy, in the column order of a deployment comparison table.
pub fn walk_text(s: &VirtualWalkOutput) -> String {
    let mut t = format!("sink {} -> source {}\n", s.sink, s.source);
    writeln!(
        t,
        "{:<6} {:<24} {:>12} {:>16} {:>12} {:>11}",
        "Algo", "Relay locations", "Measurements", "Total power (mW)", "Sum outage", "Total cost"
    )
    .unwrap();
    for r in &s.results {
        let locs = r.relay_locations.iter().map(usize::to_string).collect::<Vec<_>>().join(",");
        writeln!(
            t,
            "{:<6} {:<24} {:>12} {:>16.4} {:>12.4} {:>11.4}",
            abbreviation(&r.policy),
            if locs.is_empty() { "-".into() } else { locs },
            r.measurements,
            r.totals.total_power_mw,
            r.totals.sum_outage,
            r.totals.total_cost_mw
        )
        .unwrap();
    }
    t
}

pub fn estimate_text(r: &EstimateReport) -> String {
    let f = &r.fit;
    let mut t = format!("{} links over {} realizations\n", f.links, f.realizations);
    writeln!(t, "phi0 = {:.3} dBm, eta = {:.4}, D = {:.4} m, sigma = {:.4} dB", f.phi0_dbm, f.eta, f.decorr_d_m, f.sigma_db).unwrap();
    writeln!(t, "log-likelihood {:.4}; shadowing decorrelated beyond {:.3} m", f.loglik, r.decorrelation_m).unwrap();
    writeln!(t, "{:>10} {:>5} {:>9} {:>9}  verdict", "separation", "n", "rho_hat", "critical").unwrap();
    for s in &r.correlation_tests {
        let c = &s.test;
        let verdict = if c.reject { "correlated" } else { "independent" };
        writeln!(t, "{:>10.2} {:>5} {:>9.4} {:>9.4}  {verdict}", s.separation_m, c.n, c.rho_hat, c.rho_critical).unwrap();
    }
    let ks = &r.ks;
    let verdict = if ks.reject { "reject normality" } else { "consistent with normal" };
    writeln!(t, "KS: D = {:.4}, critical {:.4} (n = {}): {verdict}", ks.d_stat, ks.d_critical, ks.n).unwrap();
    t
}

pub fn stored_text(run: &StoredRun) -> CliResult<String> {
    let head = format!("run {} ({}, seed {})\n", run.id, run.kind, run.seed.map_or("-".into(), |s| s.to_string()));
    let body = match run.kind.as_str() {
        "solve" => solve_text(&serde_json::from_value(run.result.clone())?),
        "simulate" => metrics_text(&serde_json::from_value(run.result.clone())?),
        "virtualwalk" | "session" => match serde_json::from_value::<VirtualWalkOutput>(run.result.clone()) {
            Ok(w) => walk_text(&w),
            Err(_) => {
                let r = serde_json::from_value(run.result.clone())?;
                walk_text(&VirtualWalkOutput { sink: 0, source: 0, results: vec![r] })
            }
        },
        "estimate" => estimate_text(&serde_json::from_value(run.result.clone())?),
        "synth" => {
            let s: SynthOutput = serde_json::from_value(run.result.clone())?;
            format!("{} written to {}\n", s.what, s.path.display())
        }
        other => return Err(CliError::usage(format!("cannot render results of kind {other:?}"))),
    };
    Ok(head + &body)
}

/// CSV files (name, contents) suited to plotting a result.
pub fn plot_data(kind: &str, result: &Value) -> CliResult<Vec<(String, String)>> {
    let mut files = Vec::new();
    match kind {
        "solve" => {
            let s: SolveOutput = serde_json::from_value(result.clone())?;
            if let Some(th) = s.thresholds {
                let mut csv = String::from("r,c_th\n");
                for (i, c) in th.c_th.iter().enumerate() {
                    writeln!(csv, "{},{}", i + 1, c).unwrap();
                }
                files.push(("thresholds.csv".into(), csv));
            }
        }
        "simulate" => {
            let s: SimulateOutput = serde_json::from_value(result.clone())?;
            let mut csv = String::from(
                "param,value,policy,solved_lambda,cost_per_step,cost_half_width,power_mw,power_half_width,outage,outage_half_width,distance_steps,distance_half_width\n",
            );
            for r in &s.rows {
                let m = &r.metrics;
                writeln!(
                    csv,
                    "{},{},{},{},{},{},{},{},{},{},{},{}",
                    r.param.name(),
                    r.value,
                    r.policy.abbreviation(),
                    r.solved_lambda.map_or(String::new(), |l| l.to_string()),
                    m.mean_cost_per_step,
                    m.cost_per_step_half_width,
                    m.mean_power_per_link_mw,
                    m.power_half_width,
                    m.mean_outage_per_link,
                    m.outage_half_width,
                    m.mean_placement_distance_steps,
                    m.distance_half_width
                )
                .unwrap();
            }
            files.push(("metrics.csv".into(), csv));
        }
        "virtualwalk" => {
            let s: VirtualWalkOutput = serde_json::from_value(result.clone())?;
            let mut csv = String::from("policy,from,to,length_steps,tx_dbm,p_out\n");
            for r in &s.results {
                for h in &r.hops {
                    writeln!(csv, "{},{},{},{},{},{}", abbreviation(&r.policy), h.from, h.to, h.length_steps, h.tx_dbm, h.p_out).unwrap();
                }
            }
            files.push(("hops.csv".into(), csv));
        }
        "estimate" => {
            let r: EstimateReport = serde_json::from_value(result.clone())?;
            let mut csv = String::from("separation_m,n,rho_hat,rho_critical,reject\n");
            for s in &r.correlation_tests {
                let c = &s.test;
                writeln!(csv, "{},{},{},{},{}", s.separation_m, c.n, c.rho_hat, c.rho_critical, c.reject).unwrap();
            }
            files.push(("correlation.csv".into(), csv));
        }
        _ => {}
    }
    Ok(files)
}
