//! The `relaytrail` command line: solving policies, simulating them,
//! replaying recorded trails, analysing measurement traces and running the
//! deployment assistant service.

pub mod render;

use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use relaytrail_core::channel::choose_exploration_limit;
use relaytrail_core::deployment::DeploymentResult;
use relaytrail_core::formats::{read_json, read_trace_bundle, write_atomic_text, write_json, write_trace_bundle, ConfigFile};
use relaytrail_core::measurement::{
    estimate_from_traces, synthesize_link_records, synthesize_rssi_trace, EstimateOptions, EstimateReport,
    LinkMeta, Theta,
};
use relaytrail_core::policy::{
    opt_explore_all, solve_cth, solve_cth_quadrature, solve_lambda_star, AsYouGoThresholds, LambdaSolution,
    PolicyKind,
};
use relaytrail_core::sim::{resolve_policies, run_virtual_walk, sweep, SweepGrid, SweepParam, SweepRow};
use relaytrail_core::store::{ResultStore, StoredRun};
use relaytrail_core::trail::{synthesize_virtual_trail, TrailFile, VirtualTrail};
use relaytrail_service::AppState;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

/// Configuration used when `--config` is not given.
pub const DEFAULT_CONFIG: &str = include_str!("../../../data/calibrated.json");
/// The packaged 11-location trail used by `virtualwalk` by default.
pub const DEFAULT_TRAIL: &str = include_str!("../../../data/reference_trail.json");

#[derive(Debug, Parser)]
#[command(name = "relaytrail", version, about = "As-you-go relay deployment along a trail")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// Seed for every random draw (default 0).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// JSON configuration file (default: the packaged calibrated setting).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Directory for result files.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Do not record the run in the result store.
    #[arg(long, global = true)]
    pub no_store: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve for the optimal cost per step and the as-you-go thresholds.
    Solve(SolveArgs),
    /// Monte Carlo evaluation of policies, optionally over a parameter sweep.
    Simulate(SimulateArgs),
    /// Replay policies over a recorded trail.
    Virtualwalk(VirtualWalkArgs),
    /// Fit the shadowing model to a trace bundle and test its assumptions.
    Estimate(EstimateArgs),
    /// Generate synthetic trails or trace bundles.
    Synth(SynthArgs),
    /// Run the deployment assistant.
    Assist(AssistArgs),
    /// Render stored results as tables and plot-ready CSV.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Args)]
pub struct SolveArgs {
    /// Solve the thresholds by Gauss-Hermite quadrature with this many nodes
    /// instead of Monte Carlo.
    #[arg(long)]
    pub quadrature: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// Comma-separated policies (names or abbreviations); default all five.
    #[arg(long, value_delimiter = ',')]
    pub policies: Vec<String>,
    #[arg(long)]
    pub horizon: Option<usize>,
    #[arg(long)]
    pub reps: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct VirtualWalkArgs {
    /// Trail file (default: the packaged 11-location trail).
    #[arg(long)]
    pub trail: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub sink: usize,
    /// Source location (default: the last location of the trail).
    #[arg(long)]
    pub source: Option<usize>,
    /// Comma-separated policies, `opt_explore_all`/`OEA` included; default all six.
    #[arg(long, value_delimiter = ',')]
    pub policies: Vec<String>,
}

#[derive(Debug, Clone, Args)]
pub struct EstimateArgs {
    /// Directory holding `manifest.json` and the per-link CSV files.
    #[arg(long)]
    pub traces: PathBuf,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.1)]
    pub rho_cutoff: f64,
    #[arg(long)]
    pub r0: Option<f64>,
    /// Outage threshold (default: the configured receiver threshold).
    #[arg(long)]
    pub rcv_min_dbm: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[command(subcommand)]
    pub what: SynthWhat,
}

#[derive(Debug, Clone, Subcommand)]
pub enum SynthWhat {
    /// A virtual trail with one shadowing draw per location pair.
    Trail {
        #[arg(long, default_value_t = 11)]
        locations: usize,
    },
    /// A bundle of RSSI traces from correlated shadowing and fading.
    Traces {
        #[arg(long, default_value_t = 25)]
        realizations: usize,
        /// Receiver distances (m) along a line from the transmitter.
        #[arg(long, value_delimiter = ',', default_value = "50,53,56,59,62,65,68,71,74")]
        distances: Vec<f64>,
        #[arg(long, default_value_t = 2000)]
        packets: usize,
        #[arg(long, default_value_t = 50.0)]
        inter_packet_ms: f64,
        /// Lag-one amplitude correlation of successive packets.
        #[arg(long, default_value_t = 0.9)]
        rho: f64,
        #[arg(long, default_value_t = 0.0)]
        tx_dbm: f64,
    },
}

#[derive(Debug, Clone, Args)]
pub struct AssistArgs {
    /// Start the HTTP session service.
    #[arg(long)]
    pub serve: bool,
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub addr: SocketAddr,
    /// Static UI bundle served next to the API.
    #[arg(long)]
    pub ui_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ReportArgs {
    /// Stored run to render; lists the store when omitted.
    #[arg(long)]
    pub id: Option<String>,
    /// Render the most recent stored run.
    #[arg(long, conflicts_with = "id")]
    pub latest: bool,
}

/// A failed command. Printed to stderr as `{"error": {"code", "message"}}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CliError {
    pub code: String,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError { code: "usage".into(), message: message.into() }
    }

    pub fn exit_code(&self) -> u8 {
        match self.code.as_str() {
            "usage" | "schema" => 2,
            _ => 1,
        }
    }

    pub fn to_json(&self) -> String {
        json!({ "error": self }).to_string()
    }
}

impl From<relaytrail_core::Error> for CliError {
    fn from(e: relaytrail_core::Error) -> Self {
        use relaytrail_core::Error as E;
        let code = match &e {
            E::Domain(_) => "domain",
            E::MissingPair { .. } => "missing_pair",
            E::Incomplete { .. } => "incomplete",
            E::Disconnected { .. } => "disconnected",
            E::Solver(_) => "solver",
            E::Estimation(_) => "estimation",
            E::Io(_) => "io",
            E::Json(_) | E::Csv(_) => "schema",
        };
        CliError { code: code.into(), message: e.to_string() }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError { code: "schema".into(), message: e.to_string() }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError { code: "io".into(), message: e.to_string() }
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// What a command produced: text for the terminal and the structured result.
#[derive(Debug, Clone)]
pub struct CommandOutput {
    pub kind: &'static str,
    pub text: String,
    pub result: Value,
    pub files: Vec<PathBuf>,
    pub run_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveOutput {
    pub exploration_limit: Option<usize>,
    pub lambda_star: LambdaSolution,
    /// Absent when `B = 1`, where there is nothing to decide.
    pub thresholds: Option<AsYouGoThresholds>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateOutput {
    pub horizon_steps: usize,
    pub reps: usize,
    pub seed: u64,
    pub rows: Vec<SweepRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VirtualWalkOutput {
    pub sink: usize,
    pub source: usize,
    pub results: Vec<DeploymentResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthOutput {
    pub what: String,
    pub path: PathBuf,
    pub items: usize,
}

pub fn load_config(path: Option<&Path>) -> CliResult<ConfigFile> {
    let cfg: ConfigFile = match path {
        Some(p) => read_json(p).map_err(|e| CliError::from(e).with_context(&p.display().to_string()))?,
        None => serde_json::from_str(DEFAULT_CONFIG)?,
    };
    cfg.validate().map_err(|e| CliError { code: "schema".into(), message: e.to_string() })?;
    Ok(cfg)
}

impl CliError {
    fn with_context(mut self, what: &str) -> Self {
        self.message = format!("{what}: {}", self.message);
        self
    }
}

fn parse_kinds(names: &[String]) -> CliResult<Vec<PolicyKind>> {
    if names.is_empty() {
        return Ok(PolicyKind::ALL.to_vec());
    }
    names
        .iter()
        .map(|n| PolicyKind::parse(n).ok_or_else(|| CliError::usage(format!("unknown policy {n:?}"))))
        .collect()
}

fn is_explore_all(name: &str) -> bool {
    let n = name.trim();
    n.eq_ignore_ascii_case("oea") || n.eq_ignore_ascii_case("opt_explore_all")
}

/// Runs one command. Results are written under `--out` and recorded in the
/// store unless `--no-store` is given.
pub fn run(cli: &Cli) -> CliResult<CommandOutput> {
    let g = &cli.global;
    let seed = g.seed.unwrap_or(0);
    let mut out = match &cli.command {
        Command::Solve(a) => solve(g, a)?,
        Command::Simulate(a) => simulate(g, a, seed)?,
        Command::Virtualwalk(a) => virtual_walk(g, a, seed)?,
        Command::Estimate(a) => estimate(g, a)?,
        Command::Synth(a) => return synth(g, a, seed),
        Command::Assist(a) => return assist(a),
        Command::Report(a) => return report(g, a),
    };
    if let Some(dir) = &g.out {
        let path = dir.join(format!("{}.json", out.kind));
        write_json(&path, &out.result)?;
        out.files.push(path);
        for (name, body) in render::plot_data(out.kind, &out.result)? {
            let path = dir.join(name);
            write_atomic_text(&path, &body)?;
            out.files.push(path);
        }
    }
    if !g.no_store {
        let store = ResultStore::from_env()?;
        let key = json!({ "command": out.kind, "args": format!("{:?}", cli.command), "config": load_config(g.config.as_deref())? });
        let run = store.put(out.kind, &key, Some(seed), &out.result)?;
        out.text.push_str(&format!("run id: {}\n", run.id));
        out.run_id = Some(run.id);
    }
    Ok(out)
}

fn output(kind: &'static str, text: String, result: &impl Serialize) -> CliResult<CommandOutput> {
    Ok(CommandOutput { kind, text, result: serde_json::to_value(result)?, files: Vec::new(), run_id: None })
}

pub fn solve(g: &GlobalArgs, a: &SolveArgs) -> CliResult<CommandOutput> {
    let file = load_config(g.config.as_deref())?;
    let mut settings = file.solver.clone();
    settings.seed = g.seed.unwrap_or(settings.seed);
    let exploration_limit = match &file.exploration {
        Some(rule) => Some(choose_exploration_limit(&file.channel, &file.policy, rule.good_outage, rule.find_prob)?),
        None => None,
    };
    let lambda_star = solve_lambda_star(&file.channel, &file.policy, &settings)?;
    let thresholds = if file.policy.horizon_b < 2 {
        None
    } else if let Some(nodes) = a.quadrature {
        Some(solve_cth_quadrature(&file.channel, &file.policy, nodes, settings.precision)?)
    } else {
        Some(solve_cth(&file.channel, &file.policy, &settings)?)
    };
    let result = SolveOutput { exploration_limit, lambda_star, thresholds };
    output("solve", render::solve_text(&result), &result)
}

pub fn simulate(g: &GlobalArgs, a: &SimulateArgs, seed: u64) -> CliResult<CommandOutput> {
    let file = load_config(g.config.as_deref())?;
    let kinds = parse_kinds(&a.policies)?;
    let sim = file.simulation.as_ref();
    let horizon = a.horizon.or(sim.map(|s| s.horizon_steps)).unwrap_or(10_000);
    let reps = a.reps.or(sim.map(|s| s.reps)).unwrap_or(20);
    let grid = sim
        .and_then(|s| s.sweep.clone())
        .unwrap_or(SweepGrid { param: SweepParam::XiR, values: vec![file.policy.xi_r_mw] });
    let mut opts = file.resolve_options(g.seed);
    opts.calibration_horizon = horizon;
    opts.calibration_reps = reps;
    let rows = sweep(&kinds, &file.channel, &file.policy, &grid, horizon, reps, seed, &opts)?;
    let result = SimulateOutput { horizon_steps: horizon, reps, seed, rows };
    output("simulate", render::metrics_text(&result), &result)
}

pub fn load_trail(path: Option<&Path>) -> CliResult<VirtualTrail> {
    let file: TrailFile = match path {
        Some(p) => read_json(p).map_err(|e| CliError::from(e).with_context(&p.display().to_string()))?,
        None => serde_json::from_str(DEFAULT_TRAIL)?,
    };
    VirtualTrail::from_file(&file).map_err(|e| CliError { code: "schema".into(), message: e.to_string() })
}

pub fn virtual_walk(g: &GlobalArgs, a: &VirtualWalkArgs, seed: u64) -> CliResult<CommandOutput> {
    let file = load_config(g.config.as_deref())?;
    let trail = load_trail(a.trail.as_deref())?;
    let source = a.source.unwrap_or(trail.locations);
    let (kinds, want_all) = if a.policies.is_empty() {
        (PolicyKind::ALL.to_vec(), true)
    } else {
        let names: Vec<String> = a.policies.iter().filter(|p| !is_explore_all(p)).cloned().collect();
        let kinds = if names.is_empty() { Vec::new() } else { parse_kinds(&names)? };
        (kinds, names.len() < a.policies.len())
    };
    let mut opts = file.resolve_options(g.seed);
    opts.seed = seed;
    if kinds.contains(&PolicyKind::OptExploreLimLearning) && opts.lambda0.is_none() {
        return Err(CliError::usage("the learning policy needs learning.lambda0 in the config"));
    }
    let policies = resolve_policies(&kinds, &file.channel, &file.policy, &opts)?;
    let mut results = policies
        .iter()
        .map(|p| run_virtual_walk(p, &trail, a.sink, source, &file.policy))
        .collect::<Result<Vec<_>, _>>()?;
    if want_all {
        results.push(opt_explore_all(&trail, a.sink, source, &file.policy)?);
    }
    let result = VirtualWalkOutput { sink: a.sink, source, results };
    output("virtualwalk", render::walk_text(&result), &result)
}

pub fn estimate(g: &GlobalArgs, a: &EstimateArgs) -> CliResult<CommandOutput> {
    let links = read_trace_bundle(&a.traces)?;
    let file = g.config.as_deref().map(|p| load_config(Some(p))).transpose()?;
    let opts = EstimateOptions {
        r0_m: a.r0.or(file.as_ref().map(|f| f.channel.r0_m)).unwrap_or(1.0),
        rcv_min_dbm: a.rcv_min_dbm.or(file.as_ref().map(|f| f.channel.rcv_min_dbm)).or(Some(-88.0)),
        alpha: a.alpha,
        rho_cutoff: a.rho_cutoff,
        ..EstimateOptions::default()
    };
    let report: EstimateReport = estimate_from_traces(&links, &opts)?;
    output("estimate", render::estimate_text(&report), &report)
}

pub fn synth(g: &GlobalArgs, a: &SynthArgs, seed: u64) -> CliResult<CommandOutput> {
    let file = load_config(g.config.as_deref())?;
    let dir = g.out.clone().unwrap_or_else(|| PathBuf::from("."));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let result = match &a.what {
        SynthWhat::Trail { locations } => {
            let trail = synthesize_virtual_trail(&file.channel, &file.policy, &mut rng, *locations)?;
            let path = dir.join("trail.json");
            write_json(&path, &trail.to_file())?;
            SynthOutput { what: "trail".into(), path, items: trail.stored_links() }
        }
        SynthWhat::Traces { realizations, distances, packets, inter_packet_ms, rho, tx_dbm } => {
            let p = &file.channel;
            let theta = Theta { phi0_dbm: p.ref_gain_db, eta: p.eta, decorr_d_m: p.decorr_d_m, sigma_db: p.sigma_db };
            let records = synthesize_link_records(&theta, distances, *realizations, *tx_dbm, p.r0_m, &mut rng)?;
            let links = records
                .iter()
                .map(|rec| {
                    let trace = synthesize_rssi_trace(rec.mean_rx_dbm, *packets, *inter_packet_ms, *rho, &mut rng)?;
                    let meta = LinkMeta { realization_id: rec.realization_id, distance_m: rec.distance_m, tx_dbm: rec.tx_dbm };
                    Ok((meta, trace))
                })
                .collect::<relaytrail_core::Result<Vec<_>>>()?;
            let path = write_trace_bundle(&dir, &links)?;
            SynthOutput { what: "traces".into(), path, items: links.len() }
        }
    };
    let text = format!("wrote {} ({} {})\n", result.path.display(), result.items, if result.what == "trail" { "links" } else { "traces" });
    let mut out = output("synth", text, &result)?;
    out.files.push(result.path);
    Ok(out)
}

pub fn assist(a: &AssistArgs) -> CliResult<CommandOutput> {
    if !a.serve {
        return Err(CliError::usage("assist needs --serve"));
    }
    let store = ResultStore::from_env()?;
    let rt = tokio::runtime::Runtime::new()?;
    eprintln!("serving the deployment assistant on http://{}", a.addr);
    rt.block_on(relaytrail_service::serve(a.addr, AppState::new(Some(store)), a.ui_dir.clone()))?;
    output("assist", String::new(), &Value::Null)
}

pub fn report(g: &GlobalArgs, a: &ReportArgs) -> CliResult<CommandOutput> {
    let store = ResultStore::from_env()?;
    let index = store.list()?;
    let id = match (&a.id, a.latest) {
        (Some(id), _) => id.clone(),
        (None, true) => index.last().ok_or_else(|| CliError::usage("the result store is empty"))?.id.clone(),
        (None, false) => {
            let mut text = format!("{:<64}  {:<12}  {}\n", "id", "kind", "seed");
            for e in &index {
                let seed = e.seed.map_or("-".to_string(), |s| s.to_string());
                text.push_str(&format!("{:<64}  {:<12}  {}\n", e.id, e.kind, seed));
            }
            return output("report", text, &index);
        }
    };
    let run: StoredRun = store.get(&id)?;
    let text = render::stored_text(&run)?;
    let mut out = output("report", text, &run)?;
    if let Some(dir) = &g.out {
        for (name, body) in render::plot_data(&run.kind, &run.result)? {
            let path = dir.join(name);
            write_atomic_text(&path, &body)?;
            out.files.push(path);
        }
    }
    Ok(out)
}
