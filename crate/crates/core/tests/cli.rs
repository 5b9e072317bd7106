use std::fs;
use std::process::{Command, Output};

use duality_lab::report::CheckReport;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_duality-lab"));
    cmd.env_remove("DUALITY_LAB_SEED");
    cmd
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn algebra_subcommand_passes_on_bundled_suite() {
    let o = run(&["check-algebra"]);
    assert!(o.status.success(), "{}", stdout(&o));
    let out = stdout(&o);
    assert!(out.contains("PASS commutation"));
    assert!(!out.contains("mc_duality"));
}

#[test]
fn json_report_has_one_entry_per_descriptor() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("suite.conf");
    fs::write(
        &cfg,
        "[check] name=generator_duality family=SEP j=0.5 p=0.5 edges=0-1 totals=1,1\n\
         [check] name=detailed_balance family=IRW lambda=2 vertices=3 max_total=3\n",
    )
    .unwrap();
    let out = dir.path().join("r.json");
    let o = run(&["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--format", "json"]);
    assert!(o.status.success(), "{}", stdout(&o));
    let reports: Vec<CheckReport> = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(reports.len(), 2);
    assert_eq!(reports[0].check_name, "generator_duality");
    assert_eq!(reports[1].family, "IRW");
    assert!(reports.iter().all(|r| r.passed));
}

#[test]
fn csv_report_and_failing_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("suite.conf");
    fs::write(
        &cfg,
        "[check] name=generator_duality family=SIP k=0.5 kernel=SEP kernel.j=2 max_total=2\n\
         [check] name=commutation family=SEP j=1\n",
    )
    .unwrap();
    let out = dir.path().join("r.csv");
    let o = run(&["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--format", "csv"]);
    assert_eq!(o.status.code(), Some(1));
    let text = fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert!(stdout(&o).contains("FAIL generator_duality"));
}

#[test]
fn bad_config_exits_with_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("suite.conf");
    fs::write(&cfg, "[check] name=generator_duality p=1.5\n").unwrap();
    let o = run(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("out of range"));
    let o = run(&["run", "--config", dir.path().join("missing.conf").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn seed_flag_overrides_environment_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("mc.conf");
    fs::write(&cfg, "seed = 1\n[check] name=mc_duality family=IRW x0=2,0 y0=1,1 t=0.3 n_samples=2000\n").unwrap();
    let residual = |seed_env: Option<&str>, seed_flag: Option<&str>| {
        let path = dir.path().join("out.json");
        let mut cmd = bin();
        cmd.args(["mc-check", "--config", cfg.to_str().unwrap(), "--out", path.to_str().unwrap()]);
        if let Some(s) = seed_flag {
            cmd.args(["--seed", s]);
        }
        if let Some(s) = seed_env {
            cmd.env("DUALITY_LAB_SEED", s);
        }
        cmd.output().unwrap();
        let r: Vec<CheckReport> = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
        r[0].residual
    };
    let from_file = residual(None, None);
    assert_eq!(from_file, residual(None, None));
    assert_eq!(residual(Some("7"), None), residual(None, Some("7")));
    assert_eq!(residual(Some("123"), Some("7")), residual(None, Some("7")));
    assert_ne!(from_file, residual(None, Some("7")));
}
