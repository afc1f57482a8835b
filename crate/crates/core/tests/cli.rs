//! The binary's exit codes and output layout.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const SMALL: &str = r#"
engine = "diffusion"

[grid]
n = 64
length = 20.0
boundary = "periodic"

[params]
temperature = 0.5
friction = 1.0
entropy_form = "boltzmann"

[params.toggles]
tf = false
weizsacker = true
hartree = false
dirac = false
entropy = true

[initial]
kind = "gaussian"
center = 10.0
sigma2 = 1.0

[schedule]
t_end = 0.2
cadence = 0.05
"#;

fn ddft(args: &[&str], env_out: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_ddft"));
    cmd.args(args).env_remove("DDFT_OUT_DIR");
    if let Some(dir) = env_out {
        cmd.env("DDFT_OUT_DIR", dir);
    }
    cmd.output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn run_succeeds_and_writes_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "run.toml", SMALL);
    let out = tmp.path().join("out");
    let o = ddft(&["run", s(&cfg), "--out-dir", s(&out), "--quiet", "--snapshot-every", "0.1"], None);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    // The end state goes to final.txt, so t = 0.1 is the only snapshot.
    for f in ["series.csv", "run.toml", "final.txt", "snapshot_0000.txt"] {
        assert!(out.join(f).exists(), "{f} missing");
    }
    assert!(!out.join("snapshot_0001.txt").exists());
    let series = std::fs::read_to_string(out.join("series.csv")).unwrap();
    assert_eq!(series.lines().count(), 1 + 5);
    assert!(series.starts_with("t,mass,F_total,F_tf,F_w,F_h,F_d,F_u,minus_TS,S,sigma2,mu_spread,dt\n"));
}

#[test]
fn environment_overrides_config_but_not_the_flag() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "run.toml", SMALL);
    let env_dir = tmp.path().join("from_env");
    let o = ddft(&["run", s(&cfg), "--quiet"], Some(&env_dir));
    assert_eq!(code(&o), 0);
    assert!(env_dir.join("series.csv").exists());

    let flag_dir = tmp.path().join("from_flag");
    let other = tmp.path().join("unused");
    let o = ddft(&["run", s(&cfg), "--quiet", "--out-dir", s(&flag_dir)], Some(&other));
    assert_eq!(code(&o), 0);
    assert!(flag_dir.join("series.csv").exists());
    assert!(!other.exists());
}

#[test]
fn config_errors_exit_2_and_name_the_key() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = SMALL.replace("friction = 1.0", "friction = 1.0\nfriciton = 2.0");
    let cfg = write_config(tmp.path(), "bad.toml", &bad);
    let o = ddft(&["run", s(&cfg), "--out-dir", s(&tmp.path().join("o"))], None);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("friciton"));

    let bad = SMALL.replace("[params]\n", "[params]\nrho_bar = -1.0\n");
    let cfg = write_config(tmp.path(), "bad2.toml", &bad);
    let o = ddft(&["run", s(&cfg), "--out-dir", s(&tmp.path().join("o"))], None);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("params.rho_bar"));

    let o = ddft(&["run", s(&tmp.path().join("missing.toml"))], None);
    assert_eq!(code(&o), 2);
}

#[test]
fn numerical_abort_exits_3_with_a_failure_record() {
    let tmp = tempfile::tempdir().unwrap();
    let text = SMALL.replace("t_end = 0.2", "t_end = 10.0\nmode = \"steady_state\"\nmax_steps = 50");
    let cfg = write_config(tmp.path(), "abort.toml", &text);
    let out = tmp.path().join("out");
    let o = ddft(&["run", s(&cfg), "--out-dir", s(&out), "--quiet"], None);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    let record = std::fs::read_to_string(out.join("failure.toml")).unwrap();
    assert!(record.contains("NotConverged"), "{record}");
    assert!(out.join("failure_snapshot.txt").exists());
}

#[test]
fn zero_length_schedule_writes_one_observation() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "zero.toml", &SMALL.replace("t_end = 0.2", "t_end = 0.0"));
    let out = tmp.path().join("out");
    let o = ddft(&["run", s(&cfg), "--out-dir", s(&out), "--quiet"], None);
    assert_eq!(code(&o), 0);
    let series = std::fs::read_to_string(out.join("series.csv")).unwrap();
    assert_eq!(series.lines().count(), 2);
}

#[test]
fn resume_checks_the_config_hash() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "run.toml", SMALL);
    let out = tmp.path().join("out");
    assert_eq!(code(&ddft(&["run", s(&cfg), "--out-dir", s(&out), "--quiet"], None)), 0);
    let snap = out.join("final.txt");

    let o = ddft(&["resume", s(&snap), "--out-dir", s(&tmp.path().join("r1")), "--quiet"], None);
    assert_eq!(code(&o), 0);

    let other = write_config(tmp.path(), "other.toml", &SMALL.replace("friction = 1.0", "friction = 2.0"));
    let r2 = tmp.path().join("r2");
    let args = ["resume", s(&snap), "--config", s(&other), "--out-dir", s(&r2), "--quiet"];
    let o = ddft(&args, None);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("--force"));
    let mut forced = args.to_vec();
    forced.push("--force");
    assert_eq!(code(&ddft(&forced, None)), 0);
}

#[test]
fn sweep_runs_every_value_including_zero_temperature() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "run.toml", SMALL);
    let out = tmp.path().join("sweep");
    let o = ddft(
        &["sweep", s(&cfg), "--param", "params.temperature", "--values", "0,0.5,2", "--out-dir", s(&out), "--quiet"],
        None,
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let summary = std::fs::read_to_string(out.join("sweep_summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 4);
    assert!(summary.lines().skip(1).all(|l| l.contains(",ok,")), "{summary}");
    for v in ["0", "0.5", "2"] {
        assert!(out.join(format!("params.temperature={v}")).join("series.csv").exists());
    }
}

#[test]
fn empty_sweep_is_a_no_op() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "run.toml", SMALL);
    let out = tmp.path().join("sweep");
    let o = ddft(&["sweep", s(&cfg), "--param", "params.friction", "--values", "", "--out-dir", s(&out)], None);
    assert_eq!(code(&o), 0);
    assert!(!out.join("sweep_summary.csv").exists());
}

#[test]
fn failed_sweep_members_are_recorded() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "run.toml", SMALL);
    let out = tmp.path().join("sweep");
    let o = ddft(
        &["sweep", s(&cfg), "--param", "params.friction", "--values", "1,-1", "--out-dir", s(&out), "--quiet"],
        None,
    );
    assert_eq!(code(&o), 2);
    let summary = std::fs::read_to_string(out.join("sweep_summary.csv")).unwrap();
    assert!(summary.contains("1,ok,"));
    assert!(summary.contains("-1,\"failed:"));
}

#[test]
fn verify_subset_and_bad_ids() {
    let o = ddft(&["verify", "--only", "8,11", "--quiet"], None);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8_lossy(&o.stdout);
    assert_eq!(text.lines().filter(|l| l.contains("PASS")).count(), 2);
    assert_eq!(code(&ddft(&["verify", "--only", "12"], None)), 2);
}
