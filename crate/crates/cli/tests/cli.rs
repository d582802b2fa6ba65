use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command as Process;

use serde_json::Value;

use floquet_edge_cli::{execute, prepare, Command, ScenarioConfig, MANIFEST, SCHEMA};

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn example(name: &str) -> ScenarioConfig {
    let text = fs::read_to_string(configs_dir().join(name)).unwrap();
    prepare(ScenarioConfig::from_json(&text).unwrap(), None, None)
}

fn run_bin(command: &str, config: &Path, out: &Path) -> std::process::Output {
    Process::new(env!("CARGO_BIN_EXE_floquet-edge"))
        .args([command, "--config"])
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("scenario.json");
    fs::write(&path, text).unwrap();
    path
}

fn artifact<'a>(artifacts: &'a [floquet_edge_cli::Artifact], name: &str) -> &'a str {
    &artifacts.iter().find(|a| a.name == name).unwrap_or_else(|| panic!("missing {name}")).contents
}

#[test]
fn every_example_config_parses() {
    for entry in fs::read_dir(configs_dir()).unwrap() {
        let path = entry.unwrap().path();
        let text = fs::read_to_string(&path).unwrap();
        ScenarioConfig::from_json(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    }
}

#[test]
fn unknown_key_exits_with_schema_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"schema_version": 1, "geometry": {"type": "supercell", "cells": 1}, "colour": 3}"#);
    let out = run_bin("capmat", &cfg, &dir.path().join("out"));
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("colour"));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn conflicting_amplitudes_exit_with_schema_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"schema_version": 1, "geometry": {"type": "supercell", "cells": 1},
            "modulation": {"omega": 2.0, "epsilon": 0.1, "amplitudes": [0.1, 0.1, 0.1, 0.1, 0.1, 0.1], "phases": "supercell"}}"#,
    );
    assert_eq!(run_bin("capmat", &cfg, &dir.path().join("out")).status.code(), Some(2));
}

#[test]
fn wrong_schema_version_exits_with_schema_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"schema_version": 7, "geometry": {"type": "supercell", "cells": 1}}"#);
    assert_eq!(run_bin("spectrum", &cfg, &dir.path().join("out")).status.code(), Some(2));
}

#[test]
fn bands_requires_a_supercell() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs_dir().join("ssh-demo.json");
    assert_eq!(run_bin("bands", &cfg, &dir.path().join("out")).status.code(), Some(2));
}

#[test]
fn numerical_failure_exits_with_code_3() {
    // five resonators cannot carry a supercell edge pair
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"schema_version": 1,
            "geometry": {"type": "custom", "radius": 0.1, "centers": [[0,0,0],[1,0,0],[2,0,0],[3,0,0],[4,0,0]]},
            "modulation": {"omega": 2.0, "epsilon": 0.1, "phases": [0, 1, 2, 3, 4]}}"#,
    );
    let out = run_bin("edge-modes", &cfg, &dir.path().join("out"));
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn io_failures_exit_with_code_4() {
    let dir = tempfile::tempdir().unwrap();
    let missing = run_bin("capmat", &dir.path().join("absent.json"), &dir.path().join("out"));
    assert_eq!(missing.status.code(), Some(4));

    let blocker = dir.path().join("file");
    fs::write(&blocker, "").unwrap();
    let unwritable = run_bin("capmat", &configs_dir().join("edge-modes.json"), &blocker.join("out"));
    assert_eq!(unwritable.status.code(), Some(4));
}

#[test]
fn binary_writes_the_listed_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let out = run_bin("capmat", &configs_dir().join("edge-modes.json"), &out_dir);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let listed: Vec<PathBuf> = String::from_utf8(out.stdout).unwrap().lines().map(PathBuf::from).collect();
    assert_eq!(listed, vec![out_dir.join("capmat.csv"), out_dir.join("capmat.json"), out_dir.join(MANIFEST)]);
    let csv = fs::read_to_string(out_dir.join("capmat.csv")).unwrap();
    assert_eq!(csv.lines().filter(|l| !l.starts_with('#')).count(), 24);
}

#[test]
fn reruns_are_byte_identical() {
    let mut config = example("robustness.json");
    config.robustness.trials = 25;
    let a = execute(&config, Command::Robustness).unwrap();
    let b = execute(&config, Command::Robustness).unwrap();
    assert_eq!(a, b);

    config.seed += 1;
    let c = execute(&config, Command::Robustness).unwrap();
    assert_ne!(artifact(&a, "robustness.json"), artifact(&c, "robustness.json"));
}

#[test]
fn manifest_reproduces_the_run() {
    let config = example("edge-modes.json");
    let first = execute(&config, Command::Perturb).unwrap();
    let manifest = ScenarioConfig::from_json(artifact(&first, MANIFEST)).unwrap();
    let run = manifest.run.clone().unwrap();
    assert_eq!(run.command, "perturb");
    assert_eq!(run.artifacts, vec!["perturb.csv", "perturb.json"]);
    let again = execute(&prepare(manifest, None, None), Command::Perturb).unwrap();
    assert_eq!(first, again);
}

#[test]
fn resolved_config_is_a_fixed_point() {
    let config = example("ssh-demo.json");
    assert_eq!(config.resolved(), config);
    let text = serde_json::to_string(&config).unwrap();
    assert_eq!(ScenarioConfig::from_json(&text).unwrap(), config);
}

fn keys(value: &Value) -> Vec<String> {
    let mut k: Vec<String> = value.as_object().unwrap().keys().cloned().collect();
    k.sort();
    k
}

#[test]
fn schema_document_matches_the_config_type() {
    let schema: Value = serde_json::from_str(SCHEMA).unwrap();
    let mut config = example("edge-modes.json");
    config.run = Some(floquet_edge_cli::config::RunInfo {
        tool: "floquet-edge".into(),
        version: "0".into(),
        command: "capmat".into(),
        artifacts: vec![],
    });
    let value = serde_json::to_value(&config).unwrap();
    let props = &schema["properties"];
    assert_eq!(keys(props), keys(&value));
    for section in ["materials", "capacitance", "solver", "floquet", "perturb", "bands", "robustness", "ssh_demo", "run"] {
        assert_eq!(keys(&props[section]["properties"]), keys(&value[section]), "{section}");
    }
    let mut modulation = keys(&props["modulation"]["properties"]);
    modulation.retain(|k| k != "amplitudes");
    assert_eq!(modulation, keys(&value["modulation"]));
    let supercell = props["geometry"]["oneOf"]
        .as_array()
        .unwrap()
        .iter()
        .find(|v| v["properties"]["type"]["const"] == "supercell")
        .unwrap();
    assert_eq!(keys(&supercell["properties"]), keys(&value["geometry"]));
    assert_eq!(schema["properties"]["schema_version"]["const"], floquet_edge_cli::SCHEMA_VERSION);
}

#[test]
fn edge_modes_sit_on_opposite_edges() {
    let artifacts = execute(&example("edge-modes.json"), Command::EdgeModes).unwrap();
    let report: Value = serde_json::from_str(artifact(&artifacts, "edge-modes.json")).unwrap();
    let profiles = &report["numeric"]["profiles"];
    let side = |p: &Value| p["left_mass"].as_f64().unwrap() > p["right_mass"].as_f64().unwrap();
    assert_ne!(side(&profiles["w"]), side(&profiles["q"]));
    for mode in ["w", "q"] {
        let csv = artifact(&artifacts, &format!("edge-modes.{mode}.csv"));
        assert_eq!(csv.lines().nth(1).unwrap(), "index,re,im,abs,predicted_re,predicted_im,predicted_abs");
        assert_eq!(csv.lines().count(), 26);
    }
}

#[test]
fn ssh_demo_has_one_column_per_amplitude() {
    let config = example("ssh-demo.json");
    let artifacts = execute(&config, Command::SshDemo).unwrap();
    let csv = artifact(&artifacts, "ssh-demo.csv");
    let mut lines = csv.lines().filter(|l| !l.starts_with('#'));
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(header.len(), 1 + config.ssh_demo.epsilons.len());
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').skip(1).map(|x| x.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 41);
    // the static mode peaks in the middle of the chain
    let peak = (0..41).max_by(|&a, &b| rows[a][0].total_cmp(&rows[b][0])).unwrap();
    assert_eq!(peak, 20);
}

#[test]
fn floquet_envelope_is_optional() {
    let mut config = example("edge-modes.json");
    config.geometry = floquet_edge_cli::config::GeometrySpec::Supercell {
        cells: 1,
        radius: 0.1,
        gamma: Some(0.025),
    };
    config.floquet.time_samples = 16;
    let plain = execute(&config, Command::Floquet).unwrap();
    assert!(plain.iter().all(|a| a.name != "floquet.envelope.csv"));
    config.floquet.envelope_mode = Some(6);
    let with = execute(&config, Command::Floquet).unwrap();
    assert_eq!(artifact(&with, "floquet.envelope.csv").lines().count(), 2 + 17);
}
