//! End-to-end checks of the command-line surface: manifest reproducibility,
//! snapshot analysis, and exit codes.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use evlab::cli::{self, RunConfig};
use evlab::propagators::Termination;

fn tmp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("evlab-it-{}-{tag}", std::process::id()));
    fs::remove_dir_all(&dir).ok();
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn small_config() -> RunConfig {
    serde_json::from_str(
        r#"{
            "grid": {"dim": 1, "n": 64},
            "system": "momentum",
            "params": {"mu": 0.1, "r": 1.0},
            "initial": {"seed": 11, "generator": {"type": "random_band", "k_min": 1, "k_max": 4, "amplitude_q": 0.2, "amplitude_m": 0.05}},
            "stepper": {"dt": 0.01, "t_end": 0.2, "output_stride": 5},
            "diagnostics": {"besov": [{"s": 0.5, "p": 2.0, "r": 1.0}]}
        }"#,
    )
    .unwrap()
}

fn dir_files(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    names
}

/// Every output directory can be reproduced byte-for-byte from its manifest.
#[test]
fn manifest_reproduces_run_exactly() {
    let cfg = small_config();
    let out_a = tmp_dir("run-a");
    let term = cli::cmd_simulate(&cfg, &out_a).unwrap();
    assert_eq!(term, Termination::Completed);

    let out_b = tmp_dir("run-b");
    cli::reproduce(&out_a.join("manifest.json"), &out_b).unwrap();

    let files_a = dir_files(&out_a);
    assert_eq!(files_a, dir_files(&out_b));
    assert!(files_a.iter().any(|f| f.starts_with("snap_")));
    assert!(files_a.contains(&"diagnostics.csv".to_string()));
    for name in files_a {
        let a = fs::read(out_a.join(&name)).unwrap();
        let b = fs::read(out_b.join(&name)).unwrap();
        assert_eq!(a, b, "{name} differs between original and reproduction");
    }
    fs::remove_dir_all(&out_a).ok();
    fs::remove_dir_all(&out_b).ok();
}

/// The besov driver reads a stored snapshot and produces recomputable reports.
#[test]
fn besov_reports_on_stored_snapshot() {
    let cfg = small_config();
    let out = tmp_dir("besov");
    cli::cmd_simulate(&cfg, &out).unwrap();
    let snap = out.join("snap_00000_q.evf1");
    let reports = cli::cmd_besov(&cfg, &snap, None).unwrap();
    assert_eq!(reports.len(), 1);
    let r = &reports[0];
    assert!(r.aggregate > 0.0);
    assert!((r.aggregate - r.recompute_aggregate()).abs() <= 1e-15 * r.aggregate);
    fs::remove_dir_all(&out).ok();
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_evlab");
    let dir = tmp_dir("bin");

    // Config error: constrained mode with a conflicting kappa.
    let bad = dir.join("bad.json");
    fs::write(
        &bad,
        r#"{
            "grid": {"dim": 1, "n": 64},
            "params": {"mu": 0.1, "r": 1.0, "kappa": 0.5},
            "initial": {"seed": 0, "generator": {"type": "large_gradient", "a": 0.5, "k": [1]}},
            "stepper": {"dt": 0.01, "t_end": 0.1}
        }"#,
    )
    .unwrap();
    let status = Command::new(bin)
        .args(["simulate", "--config"])
        .arg(&bad)
        .arg("--out")
        .arg(dir.join("o1"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2), "config error must exit 2");

    // Vacuum termination: a floor just below the initial minimum plus strong
    // momentum pushes the depth under within a few steps.
    let vac = dir.join("vac.json");
    fs::write(
        &vac,
        r#"{
            "grid": {"dim": 1, "n": 64},
            "params": {"mu": 0.1, "r": 1.0, "vacuum_floor": 0.9},
            "initial": {"seed": 0, "generator": {"type": "modes", "m_modes": [[{"k": [1], "amplitude": 0.8}]]}},
            "stepper": {"dt": 0.05, "t_end": 2.0}
        }"#,
    )
    .unwrap();
    let status = Command::new(bin)
        .args(["simulate", "--config"])
        .arg(&vac)
        .arg("--out")
        .arg(dir.join("o2"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(3), "vacuum truncation must exit 3");

    // A fast single check passes with exit 0.
    let status = Command::new(bin)
        .args(["verify", "--only", "potential"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0), "passing check must exit 0");

    // Unknown check name is a config error.
    let status = Command::new(bin)
        .args(["verify", "--only", "no_such_check"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2), "unknown check must exit 2");

    fs::remove_dir_all(&dir).ok();
}

/// Primitive-system simulation writes depth/velocity snapshots and a
/// well-formed diagnostics CSV with one pair of norm columns per spec.
#[test]
fn primitive_simulation_outputs() {
    let cfg: RunConfig = serde_json::from_str(
        r#"{
            "grid": {"dim": 1, "n": 64},
            "system": "primitive",
            "params": {"mu": 0.1, "r": 1.0},
            "initial": {"seed": 3, "generator": {"type": "large_gradient", "a": 0.4, "k": [1]}},
            "stepper": {"dt": 0.002, "t_end": 0.1, "output_stride": 10},
            "diagnostics": {"besov": [{"s": 0.5, "p": 2.0, "r": 1.0}, {"s": -0.5, "p": 2.0, "r": 1.0}]}
        }"#,
    )
    .unwrap();
    let out = tmp_dir("prim");
    let term = cli::cmd_simulate(&cfg, &out).unwrap();
    assert_eq!(term, Termination::Completed);
    assert!(out.join("snap_00000_h.evf1").exists());
    assert!(out.join("snap_00000_u0.evf1").exists());
    let csv = fs::read_to_string(out.join("diagnostics.csv")).unwrap();
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(
        header,
        vec![
            "t",
            "energy",
            "mass",
            "min_h",
            "cfl",
            "depth_B_s0.5_p2_r1",
            "momentum_B_s0.5_p2_r1",
            "depth_B_s-0.5_p2_r1",
            "momentum_B_s-0.5_p2_r1"
        ]
    );
    for line in lines {
        assert_eq!(line.split(',').count(), header.len(), "ragged row: {line}");
    }
    // Energy column is non-increasing for this dissipative run.
    let energies: Vec<f64> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert!(energies.windows(2).all(|w| w[1] <= w[0] + 1e-9));
    fs::remove_dir_all(&out).ok();
}

/// Seed override changes the data; same seed reproduces it.
#[test]
fn seed_override_through_driver() {
    let mut cfg = small_config();
    let out1 = tmp_dir("seed1");
    cli::cmd_simulate(&cfg, &out1).unwrap();
    cfg.initial.seed = 12;
    let out2 = tmp_dir("seed2");
    cli::cmd_simulate(&cfg, &out2).unwrap();
    let a = fs::read(out1.join("snap_00000_q.evf1")).unwrap();
    let b = fs::read(out2.join("snap_00000_q.evf1")).unwrap();
    assert_ne!(a, b, "different seeds must change the initial data");
    fs::remove_dir_all(&out1).ok();
    fs::remove_dir_all(&out2).ok();
}
