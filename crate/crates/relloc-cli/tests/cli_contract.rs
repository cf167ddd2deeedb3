//! Black-box checks of the command-line contract: exit codes, the error
//! object on stderr, config-file merging, and output shapes.

use std::process::{Command, Output};

fn relloc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_relloc"))
        .args(args)
        .output()
        .expect("binary should spawn")
}

fn stderr_error(out: &Output) -> serde_json::Value {
    let v: serde_json::Value =
        serde_json::from_slice(&out.stderr).expect("stderr should be a JSON error object");
    assert!(v["error"]["message"].as_str().is_some_and(|m| !m.is_empty()));
    v["error"]["kind"].clone()
}

#[test]
fn out_of_range_leakage_exits_with_code_2() {
    let out = relloc(&["poissonian-phase", "--eps", "1.5"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_error(&out), "domain");
    assert!(out.stdout.is_empty());
}

#[test]
fn unknown_config_key_exits_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "experiment = \"rubber-cavity\"\nwavelength = 3.0\n").unwrap();
    let out = relloc(&["rubber-cavity", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_error(&out), "config");
}

#[test]
fn config_for_a_different_experiment_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("other.toml");
    std::fs::write(&cfg, "experiment = \"scattering\"\n").unwrap();
    let out = relloc(&["rubber-cavity", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_error(&out), "config");
}

#[test]
fn too_small_truncation_exits_with_code_3() {
    let out = relloc(&["thermal-phase", "--cutoff", "5"]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(stderr_error(&out), "cutoff-overflow");
}

#[test]
fn csv_on_stdout_starts_with_comments_and_the_domain_column() {
    let out = relloc(&["fock-phase", "--grid", "64", "--records", "2:1"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("# experiment = fock-phase"));
    let header = text.lines().find(|l| !l.starts_with('#')).unwrap();
    assert!(header.starts_with("delta,"), "domain variable leads: {header}");
    let rows = text.lines().filter(|l| !l.starts_with('#')).count() - 1;
    assert_eq!(rows, 64);
    assert!(text.lines().any(|l| l.starts_with("# version = ")));
}

#[test]
fn config_file_supplies_defaults_and_flags_override_it() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        "experiment = \"rubber-cavity\"\nl = 3\nr = 9\ngrid = 101\nk = 2.0\n",
    )
    .unwrap();
    let path = cfg.to_str().unwrap();
    let base = relloc(&["rubber-cavity", "--config", path]);
    assert!(base.status.success());
    let text = String::from_utf8(base.stdout).unwrap();
    assert!(text.contains("# k = 2"), "file value was used");
    assert!(text.contains("# l = 3"));

    let overridden = relloc(&["rubber-cavity", "--config", path, "--k", "3.0"]);
    assert!(overridden.status.success());
    let text = String::from_utf8(overridden.stdout).unwrap();
    assert!(text.contains("# k = 3"), "flag overrides the file");
    assert!(text.contains("# l = 3"), "unrelated file values survive");
}

#[test]
fn json_format_mirrors_the_table_and_echoes_the_config() {
    let out = relloc(&["visibility-curves", "--format", "json", "--eps-steps", "5"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["experiment"], "visibility-curves");
    assert_eq!(v["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(v["domain"]["name"], "eps");
    assert_eq!(v["domain"]["values"].as_array().unwrap().len(), 5);
    let names: Vec<&str> = v["columns"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["name"].as_str().unwrap())
        .collect();
    assert_eq!(names, ["v_poissonian", "v_thermal"]);
    assert_eq!(v["config"]["eps_steps"], "5");
}

#[test]
fn every_experiment_runs_with_defaults() {
    for name in [
        "fock-phase",
        "poissonian-phase",
        "thermal-phase",
        "visibility-curves",
        "bec-likely-events",
        "rubber-cavity",
        "scattering",
    ] {
        let out = relloc(&[name, "--grid", "129"]);
        assert!(
            out.status.success(),
            "{name}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    // the heavier sampled experiments, scaled down
    let out = relloc(&["bec-fringes", "--atoms", "50", "--nbar", "40"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = relloc(&["thermal-scattering", "--grid", "129", "--events", "2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
