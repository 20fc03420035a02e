use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_autonomize"))
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("autonomize-cli-{name}-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("exp.toml");
    std::fs::write(&path, body).unwrap();
    path
}

const CONSISTENCY: &str = r#"
experiment = "consistency"
[numerics]
n_s = 32
omegas = [0.1]
[physics]
t_final = 0.3
times = 3
[output]
record_timing = false
[assertions]
min_fidelity = 0.999999
"#;

#[test]
fn passing_run_exits_zero_and_writes_outputs() {
    let dir = scratch("pass");
    let cfg = write_config(&dir, CONSISTENCY);
    let out = bin().arg("run").arg(&cfg).arg("--out-dir").arg(&dir).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.join("consistency.csv")).unwrap();
    assert!(csv.starts_with("t,omega,observable,value,exact,abs_err,fidelity,pred_one_minus_fid,succ_prob,wall_ms\n"));
    assert!(dir.join("consistency.json").exists());
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn failed_assertion_exits_one() {
    let dir = scratch("fail");
    let body = CONSISTENCY.replace("min_fidelity = 0.999999", "max_abs_err = -1.0");
    let cfg = write_config(&dir, &body);
    let out = bin().arg("run").arg(&cfg).arg("--out-dir").arg(&dir).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL max_abs_err"));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn bad_config_reports_field_path() {
    let dir = scratch("bad");
    let cfg = write_config(&dir, "experiment = \"consistency\"\n[numerics]\nomegas = []\n");
    let out = bin().arg("check").arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("numerics.omegas"));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn omega_override_replaces_sweep() {
    let dir = scratch("omega");
    let cfg = write_config(&dir, CONSISTENCY);
    let out = bin()
        .args(["run", cfg.to_str().unwrap(), "--omega", "0.15", "--method", "dense", "--out-dir"])
        .arg(&dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.join("consistency.csv")).unwrap();
    assert!(csv.lines().skip(1).all(|l| l.split(',').nth(1) == Some("0.15")));
    std::fs::remove_dir_all(&dir).unwrap();
}
