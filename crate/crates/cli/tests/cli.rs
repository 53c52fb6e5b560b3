use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn relaytrail(store: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_relaytrail"))
        .args(args)
        .env("RELAYTRAIL_DATA_DIR", store)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn solve_prints_closed_form_lambda() {
    let store = tempfile::tempdir().unwrap();
    let out = tempfile::tempdir().unwrap();
    let cfg = data("degenerate.json");
    let o = relaytrail(
        store.path(),
        &["solve", "--config", cfg.to_str().unwrap(), "--out", out.path().to_str().unwrap()],
    );
    let text = stdout(&o);
    assert!(text.contains("lambda_star = 0.020632"), "{text}");
    assert!(text.contains("run id: "));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.path().join("solve.json")).unwrap()).unwrap();
    let lambda = json["lambda_star"]["lambda"].as_f64().unwrap();
    assert!((lambda - 0.020632456).abs() < 1e-6, "{lambda}");
    assert!(out.path().join("thresholds.csv").exists());
}

#[test]
fn virtualwalk_reports_six_algorithms() {
    let store = tempfile::tempdir().unwrap();
    let text = stdout(&relaytrail(store.path(), &["virtualwalk", "--no-store"]));
    for abbr in ["OEL", "HEL", "OELL", "OAYG", "HAYG", "OEA"] {
        assert!(text.lines().any(|l| l.split_whitespace().next() == Some(abbr)), "{abbr} missing:\n{text}");
    }
    assert!(!text.contains("run id"));
    assert!(std::fs::read_dir(store.path()).map_or(true, |mut d| d.next().is_none()));
}

#[test]
fn synthesized_traces_can_be_estimated() {
    let store = tempfile::tempdir().unwrap();
    let traces = tempfile::tempdir().unwrap();
    let fit = tempfile::tempdir().unwrap();
    stdout(&relaytrail(
        store.path(),
        &["synth", "traces", "--realizations", "6", "--packets", "200", "--out", traces.path().to_str().unwrap()],
    ));
    assert!(traces.path().join("manifest.json").exists());
    let text = stdout(&relaytrail(
        store.path(),
        &["estimate", "--traces", traces.path().to_str().unwrap(), "--out", fit.path().to_str().unwrap()],
    ));
    assert!(text.contains("eta"), "{text}");
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(fit.path().join("estimate.json")).unwrap()).unwrap();
    let eta = json["fit"]["eta"].as_f64().unwrap();
    assert!(eta.is_finite() && eta > 0.0, "{eta}");
}

#[test]
fn bad_usage_is_a_json_error_with_exit_two() {
    let store = tempfile::tempdir().unwrap();
    let o = relaytrail(store.path(), &["solve", "--bogus"]);
    assert_eq!(o.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(&o.stderr).unwrap();
    assert!(err["error"]["code"].is_string());
    assert!(err["error"]["message"].is_string());

    let o = relaytrail(store.path(), &["virtualwalk", "--policies", "nope"]);
    assert_eq!(o.status.code(), Some(2));

    let o = relaytrail(store.path(), &["solve", "--config", "/nonexistent/config.json"]);
    assert_ne!(o.status.code(), Some(0));
    let err: serde_json::Value = serde_json::from_slice(&o.stderr).unwrap();
    assert!(err["error"]["message"].as_str().unwrap().contains("config.json"));
}

#[test]
fn report_lists_and_recalls_runs() {
    let store = tempfile::tempdir().unwrap();
    let cfg = data("degenerate.json");
    let solved = stdout(&relaytrail(store.path(), &["solve", "--config", cfg.to_str().unwrap()]));
    let id = solved.lines().find_map(|l| l.strip_prefix("run id: ")).unwrap().trim().to_string();

    let list = stdout(&relaytrail(store.path(), &["report"]));
    assert!(list.contains(&id), "{list}");
    let latest = stdout(&relaytrail(store.path(), &["report", "--latest"]));
    let by_id = stdout(&relaytrail(store.path(), &["report", "--id", &id]));
    assert_eq!(latest, by_id);
    assert!(by_id.contains("lambda_star = 0.02063"), "{by_id}");

    // same command and seed give the same id
    let again = stdout(&relaytrail(store.path(), &["solve", "--config", cfg.to_str().unwrap()]));
    assert!(again.contains(&id));
}
