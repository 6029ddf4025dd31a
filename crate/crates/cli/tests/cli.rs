use std::process::{Command, Output};

fn mlo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mlo")).args(args).output().unwrap()
}

fn code(args: &[&str]) -> i32 {
    mlo(args).status.code().unwrap()
}

fn write_scenario(dir: &tempfile::TempDir, text: &str) -> String {
    let p = dir.path().join("s.toml");
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

const TWO_STAS: &str = r#"
name = "tiny"
[[channels]]
band = "5"
bandwidth_mhz = 80
mcs = 6
[[aps]]
id = "a"
radios = RADIOS
[[stas]]
id = "x"
radios = 1
snr_db = { a = 25.0 }
[[stas]]
id = "y"
radios = 1
snr_db = { a = 20.0 }
"#;

#[test]
fn help_succeeds() {
    assert_eq!(code(&["--help"]), 0);
    assert_eq!(code(&["run", "--help"]), 0);
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(code(&["run", "--solver", "simplex"]), 1);
    assert_eq!(code(&["frobnicate"]), 1);
    assert_eq!(code(&["run", "--mcs-schedule", "nine"]), 1);
}

#[test]
fn bad_scenarios_exit_with_one() {
    assert_eq!(code(&["run", "--scenario", "missing/scenario.toml"]), 1);
    let dir = tempfile::tempdir().unwrap();
    let p = write_scenario(&dir, "name = \"x\"\nbogus = 1\n");
    let out = mlo(&["run", "--scenario", &p]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bogus"));
}

#[test]
fn infeasible_pairing_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_scenario(&dir, &TWO_STAS.replace("RADIOS", "1"));
    assert_eq!(code(&["run", "--scenario", &p, "--iterations", "2"]), 2);
    let p = write_scenario(&dir, &TWO_STAS.replace("RADIOS", "2"));
    assert_eq!(code(&["run", "--scenario", &p, "--iterations", "2"]), 0);
}

#[test]
fn run_writes_json_to_stdout() {
    let out = mlo(&["run", "--iterations", "3", "--format", "json"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 3);
}

#[test]
fn timings_fill_the_wall_time_column() {
    let out = mlo(&["run", "--iterations", "2", "--timings"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let last = text.lines().nth(1).unwrap().rsplit(',').next().unwrap();
    assert!(last.parse::<f64>().is_ok(), "wall time {last:?}");
}

#[test]
fn failed_dcf_check_exits_with_one() {
    assert_eq!(code(&["validate-dcf", "--slots", "2000", "--n", "5", "--per", "0", "--tolerance", "0"]), 1);
}

#[test]
fn oracles_and_tu_audit_pass() {
    assert_eq!(code(&["check-tu", "--max-aps", "3", "--max-stas", "4"]), 0);
    assert_eq!(code(&["oracle", "--kind", "lp", "--instances", "100"]), 0);
    assert_eq!(code(&["oracle", "--rounds", "1", "--max-stas", "4"]), 0);
}

#[test]
fn sweep_emits_one_row_per_algorithm_and_point() {
    let out = mlo(&["sweep", "--snr", "10,20", "--rounds", "1", "--iterations", "4", "--window", "2"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 1 + 2 * 4);
    assert!(text.starts_with("algorithm,snr_db,mcs,rounds,"));
}

#[test]
fn unwritable_output_path_exits_with_one() {
    let out = mlo(&["run", "--iterations", "1", "--out", "/nonexistent_dir/out.csv"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/nonexistent_dir/out.csv"));
}
