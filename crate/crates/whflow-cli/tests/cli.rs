//! End-to-end checks of the command-line surface: verbs, exit codes,
//! overrides, and file outputs.

use std::path::PathBuf;
use std::process::{Command, Output};

fn whflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_whflow"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn temp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("whflow-cli-{tag}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

#[test]
fn info_lists_the_five_scenarios() {
    let out = whflow(&["info"]);
    assert!(out.status.success());
    let text = stdout(&out);
    for name in [
        "geodesic",
        "linear-vlasov",
        "nonlinear-vlasov",
        "schrodinger",
        "bridge",
    ] {
        assert!(text.contains(name), "info output missing {name}:\n{text}");
    }
}

#[test]
fn run_preset_writes_outputs_and_reports() {
    let dir = temp_dir("run");
    let out = whflow(&[
        "run",
        "geodesic",
        "--set",
        "time.t_final=0.05",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("\"hamiltonian_drift_rel\""));
    for file in ["summary.json", "diagnostics.csv", "rho_000000.csv"] {
        assert!(dir.join(file).is_file(), "missing {file}");
    }
    let diagnostics = std::fs::read_to_string(dir.join("diagnostics.csv")).unwrap();
    assert!(diagnostics.starts_with("t,hamiltonian,kinetic,potential,mass,min_rho,cg_iters\n"));
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn run_accepts_config_files() {
    let dir = temp_dir("config");
    std::fs::create_dir_all(&dir).unwrap();
    let config_path = dir.join("geodesic.json");
    let config_json = serde_json::to_string_pretty(&serde_json::json!({
        "name": "geodesic",
        "grid": {"dim": 1, "n": 32},
        "time": {"dt": 1e-3, "t_final": 0.01, "snapshot_stride": 10},
        "energy": [],
        "initial": {
            "density": {"preset": "cosine", "base": 1.0, "amplitude": 0.1, "mode": [1, 0]},
            "phi": {"preset": "zero"}
        },
        "integrator": {"method": "midpoint"},
        "oracle": {"kind": "none"}
    }))
    .unwrap();
    std::fs::write(&config_path, config_json).unwrap();
    let out = whflow(&["run", config_path.to_str().unwrap()]);
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn invalid_override_key_is_a_usage_error() {
    let out = whflow(&["run", "geodesic", "--set", "time.no_such=1"]);
    // Unknown field caught by strict deserialization.
    assert_eq!(out.status.code(), Some(2), "stderr: {}", stderr(&out));
}

#[test]
fn invalid_config_value_is_a_usage_error() {
    let out = whflow(&["run", "geodesic", "--set", "time.dt=0"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("time.dt"), "stderr: {}", stderr(&out));
}

#[test]
fn seed_rejected_without_particles_oracle() {
    let out = whflow(&["run", "geodesic", "--seed", "5"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("particles"));
}

#[test]
fn verify_passes_on_a_fresh_build() {
    let out = whflow(&["verify", "--quiet"]);
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("0 failed"), "{text}");
}

#[test]
fn sweep_prints_convergence_orders() {
    let out = whflow(&[
        "sweep",
        "geodesic",
        "--param",
        "time.dt",
        "--values",
        "4e-3,2e-3",
        "--set",
        "time.t_final=0.04",
    ]);
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("convergence orders"), "{text}");
    assert!(text.contains("hamiltonian_drift_rel"), "{text}");
}

#[test]
fn reruns_are_byte_identical_apart_from_wall_clock() {
    let mut summaries = Vec::new();
    for tag in ["a", "b"] {
        let dir = temp_dir(&format!("det-{tag}"));
        let out = whflow(&[
            "run",
            "linear-vlasov",
            "--set",
            "time.t_final=0.02",
            "--set",
            "oracle.n_particles=5000",
            "--out",
            dir.to_str().unwrap(),
            "--quiet",
        ]);
        assert!(out.status.success(), "stderr: {}", stderr(&out));
        let mut v: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.join("summary.json")).unwrap())
                .unwrap();
        v.as_object_mut().unwrap().remove("wall_clock_seconds");
        summaries.push(v.to_string());
        let _ = std::fs::remove_dir_all(&dir);
    }
    assert_eq!(summaries[0], summaries[1]);
}
