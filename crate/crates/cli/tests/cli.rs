use std::path::Path;
use std::process::{Command, Output};

fn gaugeks(args: &[&str], ledger_dir: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_gaugeks"));
    cmd.args(args).env_remove("GAUGEKS_LEDGER_DIR");
    if let Some(d) = ledger_dir {
        cmd.env("GAUGEKS_LEDGER_DIR", d);
    }
    cmd.output().unwrap()
}

const SPEC: &str = r#"{
  "functions": {
    "id": "poly{ [0,1]: t }",
    "one": "poly{ [0,1]: 1 }"
  },
  "sets": { "C": "cantor{hull:[0,1], ratio:1/3}" },
  "tasks": [
    { "name": "half", "kind": "integrate", "f": "id", "g": "id" },
    { "name": "cantor", "kind": "harnack", "f": "id", "g": "one", "t": "C", "terms": 5 },
    { "name": "check", "kind": "verify", "suite": "cousin", "trials": 20, "seed": 3 }
  ]
}"#;

fn lines(out: &Output) -> Vec<serde_json::Value> {
    String::from_utf8_lossy(&out.stdout).lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

#[test]
fn run_writes_one_record_per_task() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("demo.json");
    std::fs::write(&spec, SPEC).unwrap();
    let out = gaugeks(&["run", "--spec", spec.to_str().unwrap()], None);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let recs = lines(&out);
    assert_eq!(recs.len(), 3);
    assert_eq!(recs[0]["value"], "1/2");
    assert_eq!(recs[1]["residual"], "32/243");
    assert_eq!(recs[1]["details"]["tail_bound"], "32/243");
    assert_eq!(recs[2]["status"], "pass");
    assert!(recs.iter().all(|r| r.get("wall_ms").is_none()));

    let ledgers = dir.path().join("ledgers");
    let out = gaugeks(&["run", "--spec", spec.to_str().unwrap(), "--timing"], Some(&ledgers));
    assert!(out.status.success() && out.stdout.is_empty());
    let text = std::fs::read_to_string(ledgers.join("demo.jsonl")).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert!(text.lines().all(|l| l.contains("\"wall_ms\":")));
}

#[test]
fn single_tasks_and_harnack_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("demo.json");
    std::fs::write(&spec, SPEC).unwrap();
    let s = spec.to_str().unwrap();
    let one = lines(&gaugeks(&["integrate", "--spec", s, "--task", "half"], None));
    assert_eq!(one.len(), 1);
    assert_eq!(one[0]["task"], "half");
    let h = lines(&gaugeks(&["harnack", "--spec", s, "--terms", "10", "--tol", "1e-9"], None));
    assert_eq!(h.len(), 1);
    assert_eq!(h[0]["residual"], "1024/59049");
    let missing = gaugeks(&["integrate", "--spec", s, "--task", "nope"], None);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn failing_checks_set_the_exit_status() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("bad.json");
    std::fs::write(
        &spec,
        r#"{
  "gauges": { "d": "gauge{ base: [0,1]:1/64 }" },
  "sequences": { "ids": "seq{ n in 1..: poly{ [0,1]: t } }" },
  "tasks": [
    { "name": "wrong", "kind": "sequence-check", "f": "ids", "g": "ids", "gauge": "d",
      "eta": 0.1, "n_max": 4, "trials": 20, "seed": 1, "expect": "violation" }
  ]
}"#,
    )
    .unwrap();
    let out = gaugeks(&["run", "--spec", spec.to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(lines(&out)[0]["status"], "fail");
}

#[test]
fn parse_errors_point_into_the_document() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("broken.json");
    std::fs::write(&spec, "{\n  \"sets\": { \"E\": \"[1,0]\" }\n}").unwrap();
    let out = gaugeks(&["run", "--spec", spec.to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("broken.json:2:"), "{err}");
}

#[test]
fn verify_emits_trials_then_a_summary() {
    let out = gaugeks(&["verify", "--suite", "prop_int_interval", "--trials", "100", "--seed", "4"], None);
    assert!(out.status.success());
    let recs = lines(&out);
    assert_eq!(recs.len(), 101);
    assert!(recs[..100].iter().all(|r| r["residual"] == "0/1" && r["status"] == "pass"));
    assert_eq!(recs[100]["kind"], "verify-summary");
    assert_eq!(gaugeks(&["verify", "--suite", "bogus"], None).status.code(), Some(2));
}

#[test]
fn decompose_prints_the_minimal_form() {
    let out = gaugeks(&["decompose", "--set", "[0,1) {1} (2,3] [5/2,4)"], None);
    assert!(out.status.success());
    let v = &lines(&out)[0];
    assert_eq!(v["components"], serde_json::json!(["[0,1]", "(2,4)"]));
    assert_eq!(v["count"], 2);
}
