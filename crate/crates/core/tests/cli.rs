use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn dualscale(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dualscale"))
        .current_dir(dir)
        .env_remove("DUALSCALE_OUT")
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn verify_passes_with_the_transform() {
    let dir = TempDir::new().unwrap();
    let o = dualscale(dir.path(), &["--out", "o", "verify", "--t-final", "5"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join("o/verify.json").is_file());
    assert!(dir.path().join("o/verify.svg").is_file());
}

#[test]
fn verify_without_the_transform_fails_the_check() {
    let dir = TempDir::new().unwrap();
    let o = dualscale(dir.path(), &["--out", "o", "verify", "--transform", "off", "--t-final", "5"]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("check failed"));
}

#[test]
fn vehicle_load_verify_uses_default_cells() {
    let dir = TempDir::new().unwrap();
    let o = dualscale(dir.path(), &["--out", "o", "verify", "--plant", "driver-load", "--t-final", "5"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn invalid_arguments_exit_with_one() {
    let dir = TempDir::new().unwrap();
    for args in [
        &["--out", "o", "verify", "--cell", "abc"][..],
        &["--out", "o", "verify", "--cell", "1,2,3,4,5"],
        &["--out", "o", "compare", "--grid", "0"],
        &["--out", "o", "simulate"],
        &["--out", "o", "train", "--plant", "driver-load"],
    ] {
        let o = dualscale(dir.path(), args);
        assert_eq!(code(&o), 1, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"));
    }
}

#[test]
fn unknown_config_keys_exit_with_one() {
    let dir = TempDir::new().unwrap();
    std::fs::write(dir.path().join("bad.toml"), "[verify]\ntolerance = 1.0\n").unwrap();
    let o = dualscale(dir.path(), &["--config", "bad.toml", "verify"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn output_directory_precedence() {
    let dir = TempDir::new().unwrap();
    std::fs::write(dir.path().join("run.toml"), "out = \"from_config\"\n[verify]\nt_final = 3.0\n").unwrap();
    let run = |env: Option<&str>, extra: &[&str]| {
        let mut c = Command::new(env!("CARGO_BIN_EXE_dualscale"));
        c.current_dir(dir.path()).env_remove("DUALSCALE_OUT");
        if let Some(v) = env {
            c.env("DUALSCALE_OUT", v);
        }
        let o = c.args(["--config", "run.toml"]).args(extra).arg("verify").output().unwrap();
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    };
    run(None, &[]);
    assert!(dir.path().join("from_config/verify.json").is_file());
    run(Some("from_env"), &[]);
    assert!(dir.path().join("from_env/verify.json").is_file());
    run(Some("from_env_2"), &["--out", "from_flag"]);
    assert!(dir.path().join("from_flag/verify.json").is_file());
    assert!(!dir.path().join("from_env_2").exists());
}

#[test]
fn scripted_simulation_writes_a_trajectory() {
    let dir = TempDir::new().unwrap();
    let o = dualscale(
        dir.path(),
        &["--out", "o", "simulate", "--controller", "scripted", "--m", "2", "--transform", "on", "--t-final", "2"],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(dir.path().join("o/trajectory.csv")).unwrap();
    assert!(text.lines().count() > 40);
    assert!(dir.path().join("o/simulate_summary.json").is_file());
}

#[test]
fn small_homogenize_run_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let args = ["--seed", "4", "homogenize", "--population", "16", "--generations", "2"];
    for out in ["a", "b"] {
        let mut full = vec!["--out", out];
        full.extend_from_slice(&args);
        let o = dualscale(dir.path(), &full);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    let read = |p: &str| std::fs::read(dir.path().join(p)).unwrap();
    assert_eq!(read("a/history.csv"), read("b/history.csv"));
    assert_eq!(read("a/transform.json"), read("b/transform.json"));
    let report = json(&dir.path().join("a/homogenize_report.json"));
    assert!(report.is_object());
}
