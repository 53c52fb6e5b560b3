//! File formats: canonical JSON, the run configuration and trace bundles.
//!
//! Canonical JSON has object keys in sorted order and every non-integral
//! number rounded to six significant digits, so writing, parsing and
//! writing again yields identical bytes.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::channel::{ChannelParams, PolicyConfig};
use crate::error::{domain, Result};
use crate::measurement::{LinkMeta, RssiTrace};
use crate::policy::{HeuCalibration, SolverSettings};
use crate::sim::{ResolveOptions, SweepGrid};

pub const CONFIG_SCHEMA_VERSION: u32 = 1;
pub const TRACE_SCHEMA_VERSION: u32 = 1;

/// `x` rounded to six significant digits.
pub fn round_sig6(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.5e}").parse().expect("formatted float parses")
}

fn canonicalize(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = round_sig6(n.as_f64().expect("f64 number"));
            serde_json::Number::from_f64(x).map(Value::Number).unwrap_or(Value::Null)
        }
        Value::Array(a) => Value::Array(a.into_iter().map(canonicalize).collect()),
        // serde_json's map keeps keys sorted
        Value::Object(o) => Value::Object(o.into_iter().map(|(k, v)| (k, canonicalize(v))).collect()),
        other => other,
    }
}

pub fn canonical_value<T: Serialize + ?Sized>(value: &T) -> Result<Value> {
    Ok(canonicalize(serde_json::to_value(value)?))
}

/// Pretty-printed canonical JSON with a trailing newline.
pub fn canonical_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(&canonical_value(value)?)?;
    s.push('\n');
    Ok(s)
}

/// Writes canonical JSON through a temporary file and a rename.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    write_atomic(path, canonical_json(value)?.as_bytes())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

/// Writes text through a temporary file and a rename.
pub fn write_atomic_text(path: &Path, text: &str) -> Result<()> {
    write_atomic(path, text.as_bytes())
}

pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path.file_name().ok_or_else(|| domain("output path has no file name"))?;
    let tmp = dir.join(format!(".{}.{}.tmp", name.to_string_lossy(), std::process::id()));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn schema_v1() -> u32 {
    1
}

/// Parameters of the rule that picks the exploration limit `B`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplorationRule {
    pub good_outage: f64,
    pub find_prob: f64,
}

impl Default for ExplorationRule {
    fn default() -> Self {
        ExplorationRule { good_outage: 0.03, find_prob: 0.20 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSettings {
    pub horizon_steps: usize,
    pub reps: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepGrid>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearningSettings {
    pub lambda0: f64,
}

/// Everything a command needs to know about the channel and the deployment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default = "schema_v1")]
    pub schema_version: u32,
    pub channel: ChannelParams,
    pub policy: PolicyConfig,
    #[serde(default)]
    pub solver: SolverSettings,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exploration: Option<ExplorationRule>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimulationSettings>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub learning: Option<LearningSettings>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub heu_as_you_go: Option<HeuCalibration>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let cfg: ConfigFile = read_json(path)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != CONFIG_SCHEMA_VERSION {
            return Err(domain(format!("unsupported config schema {}", self.schema_version)));
        }
        self.channel.validate()?;
        self.policy.validate()
    }

    /// Resolution settings for policies; `seed` overrides the solver seed.
    pub fn resolve_options(&self, seed: Option<u64>) -> ResolveOptions {
        let mut solver = self.solver.clone();
        if let Some(s) = seed {
            solver.seed = s;
        }
        let sim = self.simulation.as_ref();
        ResolveOptions {
            seed: solver.seed,
            solver,
            lambda0: self.learning.as_ref().map(|l| l.lambda0),
            heu_calibration: self.heu_as_you_go.clone(),
            calibration_horizon: sim.map_or(10_000, |s| s.horizon_steps),
            calibration_reps: sim.map_or(20, |s| s.reps),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceLinkEntry {
    pub file: String,
    #[serde(flatten)]
    pub meta: LinkMeta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceManifest {
    pub schema_version: u32,
    pub inter_packet_ms: f64,
    pub links: Vec<TraceLinkEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct TraceRow {
    packet_index: usize,
    rssi_dbm: f64,
}

pub const MANIFEST_FILE: &str = "manifest.json";

/// Writes one CSV per link plus `manifest.json` into `dir`.
pub fn write_trace_bundle(dir: &Path, links: &[(LinkMeta, RssiTrace)]) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let inter_packet_ms = links.first().map_or(1.0, |l| l.1.inter_packet_ms);
    if links.iter().any(|l| l.1.inter_packet_ms != inter_packet_ms) {
        return Err(domain("all traces in a bundle must share one packet interval"));
    }
    let mut entries = Vec::with_capacity(links.len());
    for (i, (meta, trace)) in links.iter().enumerate() {
        let file = format!("link_{:04}_r{}_{}m.csv", i, meta.realization_id, round_sig6(meta.distance_m));
        let mut w = csv::Writer::from_writer(Vec::new());
        for (k, &x) in trace.samples_dbm.iter().enumerate() {
            w.serialize(TraceRow { packet_index: k, rssi_dbm: round_sig6(x) })?;
        }
        let bytes = w.into_inner().map_err(|e| domain(e.to_string()))?;
        write_atomic(&dir.join(&file), &bytes)?;
        entries.push(TraceLinkEntry { file, meta: meta.clone() });
    }
    let manifest = TraceManifest { schema_version: TRACE_SCHEMA_VERSION, inter_packet_ms, links: entries };
    let path = dir.join(MANIFEST_FILE);
    write_json(&path, &manifest)?;
    Ok(path)
}

pub fn read_trace_bundle(dir: &Path) -> Result<Vec<(LinkMeta, RssiTrace)>> {
    let manifest: TraceManifest = read_json(&dir.join(MANIFEST_FILE))?;
    if manifest.schema_version != TRACE_SCHEMA_VERSION {
        return Err(domain(format!("unsupported trace schema {}", manifest.schema_version)));
    }
    manifest
        .links
        .into_iter()
        .map(|entry| {
            let mut r = csv::Reader::from_path(dir.join(&entry.file))?;
            let mut samples = Vec::new();
            for (k, row) in r.deserialize::<TraceRow>().enumerate() {
                let row = row?;
                if row.packet_index != k {
                    return Err(domain(format!("{}: packet {k} out of order", entry.file)));
                }
                samples.push(row.rssi_dbm);
            }
            Ok((entry.meta, RssiTrace::new(samples, manifest.inter_packet_ms)?))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding_is_idempotent() {
        for x in [4.340136196530737, -88.0, 1e-9 / 3.0, 123456789.0, 0.1 + 0.2] {
            let r = round_sig6(x);
            assert_eq!(round_sig6(r), r);
        }
        assert_eq!(round_sig6(4.340136196530737), 4.34014);
    }

    #[test]
    fn canonical_json_round_trips() {
        let v = serde_json::json!({"b": 1.23456789, "a": [1, 2.5, {"z": -0.000123456789}]});
        let s1 = canonical_json(&v).unwrap();
        let back: Value = serde_json::from_str(&s1).unwrap();
        assert_eq!(canonical_json(&back).unwrap(), s1);
        assert!(s1.find("\"a\"").unwrap() < s1.find("\"b\"").unwrap());
        assert!(s1.contains("1.23457"));
    }
}
