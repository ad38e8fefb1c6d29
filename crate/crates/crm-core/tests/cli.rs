//! End-to-end tests of the `crmlab` binary: artifact layout, exit-code
//! contract, and byte-identical reruns.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn crmlab() -> Command {
    Command::new(env!("CARGO_BIN_EXE_crmlab"))
}

fn presets_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../presets")
        .canonicalize()
        .expect("presets directory")
}

fn run_ok(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned() + &String::from_utf8_lossy(&out.stderr)
}

#[test]
fn run_preset_writes_artifacts_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = crmlab()
        .args(["run"])
        .arg(presets_dir().join("fig5.toml"))
        .arg("--out-dir")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", run_ok(&out));
    assert!(dir.path().join("fig5.csv").exists());
    assert!(dir.path().join("fig5.certificates.json").exists());
    assert!(dir.path().join("fig5.states.svg").exists());
    assert!(dir.path().join("fig5.gains.svg").exists());
    let text = std::fs::read_to_string(dir.path().join("fig5.certificates.json")).unwrap();
    let value: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(value["all_pass"], true);
}

#[test]
fn rerun_is_byte_identical() {
    let dir1 = tempfile::tempdir().unwrap();
    let dir2 = tempfile::tempdir().unwrap();
    for dir in [&dir1, &dir2] {
        let out = crmlab()
            .args(["run"])
            .arg(presets_dir().join("fig3.toml"))
            .arg("--out-dir")
            .arg(dir.path())
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", run_ok(&out));
    }
    for name in ["fig3.csv", "fig3.certificates.json", "fig3.states.svg"] {
        assert_eq!(
            std::fs::read(dir1.path().join(name)).unwrap(),
            std::fs::read(dir2.path().join(name)).unwrap(),
            "{name} differs between reruns"
        );
    }
}

#[test]
fn other_family_presets_pass() {
    for preset in ["mimo-demo", "backstep-n2", "robot-2link", "fig7", "fig8"] {
        let dir = tempfile::tempdir().unwrap();
        let out = crmlab()
            .args(["run"])
            .arg(presets_dir().join(format!("{preset}.toml")))
            .arg("--out-dir")
            .arg(dir.path())
            .output()
            .unwrap();
        assert!(out.status.success(), "{preset}: {}", run_ok(&out));
        assert!(dir.path().join(format!("{preset}.csv")).exists());
    }
}

#[test]
fn invalid_config_exits_two_without_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("bad.toml");
    let base = std::fs::read_to_string(presets_dir().join("fig5.toml")).unwrap();
    std::fs::write(&cfg_path, base.replace("ell = -100.0", "ell = 7.0")).unwrap();
    let out_dir = dir.path().join("out");
    let out = crmlab()
        .args(["run"])
        .arg(&cfg_path)
        .arg("--out-dir")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "{}", run_ok(&out));
    assert!(run_ok(&out).contains("ell"));
    assert!(!out_dir.exists(), "no artifacts on validation failure");
}

#[test]
fn certificate_failure_exits_one() {
    // |ell| = 1000 decays far faster than the 0.01 record grid resolves,
    // so the trapezoid e-L2 quadrature overshoots its bound
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("coarse.toml");
    let base = std::fs::read_to_string(presets_dir().join("fig5.toml")).unwrap();
    let cfg = base
        .replace("ell = -100.0", "ell = -1000.0")
        .replace("record_dt = 0.001", "record_dt = 0.01")
        .replace("name = \"fig5\"", "name = \"coarse\"");
    std::fs::write(&cfg_path, cfg).unwrap();
    let out = crmlab()
        .args(["run"])
        .arg(&cfg_path)
        .arg("--out-dir")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1), "{}", run_ok(&out));
    // artifacts are still written so the failure can be inspected
    assert!(dir.path().join("coarse.certificates.json").exists());
}

#[test]
fn sweep_and_report_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let out = crmlab()
        .args(["sweep"])
        .arg(presets_dir().join("fig5.toml"))
        .args(["--axis", "ell", "--values", "-10,-100", "--out-dir"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", run_ok(&out));
    assert!(dir.path().join("fig5-sweep.json").exists());

    let run_out = crmlab()
        .args(["run"])
        .arg(presets_dir().join("fig5.toml"))
        .arg("--out-dir")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(run_out.status.success());

    let rep = crmlab().args(["report"]).arg(dir.path()).output().unwrap();
    assert!(rep.status.success(), "{}", run_ok(&rep));
    let text = run_ok(&rep);
    assert!(text.contains("fig5-sweep.json"));
    assert!(text.contains("fig5.certificates.json"));
    assert!(text.contains("all pass"));
}

#[test]
fn unknown_preset_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = crmlab()
        .args(["preset", "nope", "--dir"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "{}", run_ok(&out));
}

#[test]
fn preset_files_match_shipped_catalog() {
    let dir = tempfile::tempdir().unwrap();
    let out = crmlab()
        .args(["preset", "all", "--dir"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", run_ok(&out));
    for name in crm_core::scenario::preset_names() {
        let shipped = presets_dir().join(format!("{name}.toml"));
        let generated = dir.path().join(format!("{name}.toml"));
        assert_eq!(
            std::fs::read(&shipped).unwrap(),
            std::fs::read(&generated).unwrap(),
            "shipped preset {name} is out of date; regenerate with `crmlab preset all`"
        );
    }
}

#[test]
fn thread_cap_env_is_validated() {
    let dir = tempfile::tempdir().unwrap();
    let out = crmlab()
        .env("CRMLAB_THREADS", "zero")
        .args(["sweep"])
        .arg(presets_dir().join("fig5.toml"))
        .args(["--axis", "ell", "--values", "-10", "--out-dir"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "{}", run_ok(&out));

    let out = crmlab()
        .env("CRMLAB_THREADS", "1")
        .args(["sweep"])
        .arg(presets_dir().join("fig5.toml"))
        .args(["--axis", "ell", "--values", "-10,-100", "--out-dir"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", run_ok(&out));
}
