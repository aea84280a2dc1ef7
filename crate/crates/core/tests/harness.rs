use std::time::{Duration, Instant};

use urchin_sim::gait::Phase;
use urchin_sim::harness::{builtin, builtin_names, load_scenario, read_csv, run, run_batch, write_csv, Scenario};
use urchin_sim::Error;

#[test]
fn resting_robot_stays_put() {
    let s = Scenario::from_json(r#"{"name": "rest", "duration_s": 3.0}"#).unwrap();
    let log = run(&s).unwrap();
    let first = &log.rows[0];
    for row in &log.rows {
        for k in 0..3 {
            assert!((row.position[k] - first.position[k]).abs() < 0.002, "t={} drifted", row.t_s);
        }
        assert_eq!(row.phase, Phase::Rest);
    }
}

#[test]
fn config1_script_moves_along_plus_x() {
    let s = Scenario::from_json(
        r#"{
            "name": "push-x",
            "duration_s": 6.0,
            "script": [
                {"t_s": 0.0, "command": {"cmd": "level"}},
                {"t_s": 2.0, "command": {"cmd": "move", "dir": [1, 1], "config": 1}}
            ]
        }"#,
    )
    .unwrap();
    let log = run(&s).unwrap();
    let last = log.rows.last().unwrap();
    assert!(last.position[0] > 0.020, "x = {}", last.position[0]);
    assert!(log.failure.is_none());
}

#[test]
fn csv_is_byte_identical_across_runs_and_files() {
    let s = builtin("config2-roll").unwrap();
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    write_csv(&run(&s).unwrap(), &a).unwrap();
    write_csv(&run(&s).unwrap(), &b).unwrap();
    let (ta, tb) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(ta, tb);
    assert_eq!(read_csv(&a).unwrap(), run(&s).unwrap());
}

#[test]
fn every_shipped_scenario_runs_quickly() {
    let root = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios");
    let mut scenarios = Vec::new();
    for entry in std::fs::read_dir(&root).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "json") {
            scenarios.push(load_scenario(&path).unwrap());
        }
    }
    assert_eq!(scenarios.len(), builtin_names().count());
    let start = Instant::now();
    for (s, log) in scenarios.iter().zip(run_batch(&scenarios)) {
        let log = log.unwrap();
        assert!(log.failure.is_none(), "{} diverged", s.name());
        let expected = (s.spec.duration_s * s.spec.log_hz).round() as usize + 1;
        assert_eq!(log.rows.len(), expected, "{}", s.name());
    }
    assert!(start.elapsed() < Duration::from_secs(60));
}

#[test]
fn load_errors_name_the_path_and_field() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, r#"{"name": "x", "duration_s": 1.0, "body": {"mass_kg": -1}}"#).unwrap();
    let msg = load_scenario(&path).unwrap_err().to_string();
    assert!(msg.contains("bad.json") && msg.contains("mass_kg"), "{msg}");
    assert!(matches!(load_scenario(dir.path().join("missing.json")), Err(Error::Io { .. }) | Err(Error::Parse(_))));
}
