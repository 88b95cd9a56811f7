use std::path::PathBuf;

use molga::molgraph::parse_smiles;
use molga::oracle::{BridgeOracle, BridgeSpec, ObjectiveSpec, OracleError, OracleHandle, TaskSpec};

fn fixture() -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures/echo_bridge.py")
        .display()
        .to_string()
}

fn spec(extra: &[&str]) -> BridgeSpec {
    let mut command = vec!["python3".to_string(), fixture()];
    command.extend(extra.iter().map(|s| s.to_string()));
    BridgeSpec {
        command,
        name: "echo".into(),
        timeout_secs: 5.0,
        restarts: 1,
    }
}

#[test]
fn echo_scores_zero() {
    let oracle = BridgeOracle::spawn(spec(&[])).unwrap();
    for s in ["C", "CCO", "c1ccccc1"] {
        assert_eq!(oracle.score_smiles(s).unwrap(), 0.0);
    }
}

#[test]
fn scores_follow_requests() {
    let oracle = BridgeOracle::spawn(spec(&["--length"])).unwrap();
    assert_eq!(oracle.score_smiles("CCO").unwrap(), 0.03);
    assert_eq!(oracle.score_smiles("CCCCC").unwrap(), 0.05);
}

#[test]
fn error_reply_is_a_scoring_error_and_loop_continues() {
    let oracle = BridgeOracle::spawn(spec(&["--length"])).unwrap();
    assert!(matches!(oracle.score_smiles("ERR"), Err(OracleError::Scoring { .. })));
    assert_eq!(oracle.score_smiles("CC").unwrap(), 0.02);
}

#[test]
fn handshake_mismatch_and_refusal() {
    let mut wrong = spec(&["--name", "qed"]);
    wrong.restarts = 0;
    assert!(matches!(BridgeOracle::spawn(wrong), Err(OracleError::Bridge { .. })));
    assert!(matches!(BridgeOracle::spawn(spec(&["--refuse"])), Err(OracleError::Bridge { .. })));
}

#[test]
fn crashed_child_is_restarted() {
    let oracle = BridgeOracle::spawn(spec(&["--length", "--crash-after", "1"])).unwrap();
    assert_eq!(oracle.score_smiles("C").unwrap(), 0.01);
    // the child exited after answering; the next call restarts it
    assert_eq!(oracle.score_smiles("CC").unwrap(), 0.02);
}

#[test]
fn silent_child_times_out() {
    let mut s = spec(&["--hang-on", "CCC"]);
    s.timeout_secs = 0.5;
    s.restarts = 0;
    let oracle = BridgeOracle::spawn(s).unwrap();
    let t = std::time::Instant::now();
    assert!(matches!(oracle.score_smiles("CCC"), Err(OracleError::Bridge { .. })));
    assert!(t.elapsed().as_secs_f64() < 3.0);
}

#[test]
fn bridge_objective_through_handle() {
    let mut params = toml::Table::new();
    params.insert(
        "command".into(),
        toml::Value::Array(vec!["python3".into(), fixture().into(), "--length".into()]),
    );
    params.insert("name".into(), "echo".into());
    let task = TaskSpec::single(ObjectiveSpec::new("len", "bridge", params));
    let handle = OracleHandle::from_task(&task, 3).unwrap();
    let ev = handle.evaluate(&parse_smiles("OCC").unwrap()).unwrap();
    assert_eq!(ev.smiles, "CCO");
    assert_eq!(ev.scores.raw, vec![0.03]);
    assert_eq!(handle.ledger().used, 1);
}
