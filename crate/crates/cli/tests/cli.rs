use std::fs;
use std::process::Command;

fn crowdff() -> Command {
    Command::new(env!("CARGO_BIN_EXE_crowdff"))
}

#[test]
fn presets_are_written_as_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = crowdff().args(["presets", "--out"]).arg(dir.path()).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let names: Vec<String> = fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    assert_eq!(names.len(), 25);
    assert!(names.contains(&"accuracy-sim1.json".to_string()));
    assert!(names.contains(&"fog-demo.json".to_string()));
}

#[test]
fn simulate_a_preset_file_with_check() {
    let presets = tempfile::tempdir().unwrap();
    let out_dir = tempfile::tempdir().unwrap();
    crowdff().args(["presets", "--out"]).arg(presets.path()).output().unwrap();
    let out = crowdff()
        .arg("simulate")
        .arg(presets.path().join("accuracy-sim2.json"))
        .args(["--mode", "compare", "--repeats", "2", "--seed", "7", "--check", "--out"])
        .arg(out_dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = fs::read_to_string(out_dir.path().join("summary.csv")).unwrap();
    let mut lines = summary.lines();
    assert!(lines.next().unwrap().starts_with("sim_id,repeat,time_s"));
    assert_eq!(lines.count(), 2);
    assert!(out_dir.path().join("jumps_r1.csv").exists());
    assert!(out_dir.path().join("paths").is_dir());
}

#[test]
fn simulate_by_preset_name_in_fog_mode() {
    let out_dir = tempfile::tempdir().unwrap();
    let out = crowdff()
        .args(["simulate", "fog-demo", "--mode", "fog", "--repeats", "1", "--out"])
        .arg(out_dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let events = fs::read_to_string(out_dir.path().join("fog_events_r0.csv")).unwrap();
    assert!(events.contains("suspend"));
}

#[test]
fn invalid_scenario_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{ \"world\": { \"width\": -3 ").unwrap();
    let out = crowdff().arg("simulate").arg(&bad).arg("--out").arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line"));
}

#[test]
fn missing_scenario_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = crowdff()
        .args(["simulate", "no-such-scenario.json", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn zero_repeats_is_rejected() {
    let out = crowdff().args(["simulate", "accuracy-sim1", "--repeats", "0"]).output().unwrap();
    assert!(!out.status.success());
}
