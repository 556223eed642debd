//! Behavior of the binary: exit codes, the w1 subcommand, and output
//! artifacts.

use std::process::Command;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_meanfield-lab")
}

#[test]
fn list_prints_every_scenario() {
    let out = Command::new(bin()).arg("list").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for name in [
        "dobrushin",
        "chaos",
        "hierarchy-identity",
        "nested-stability",
        "qn-convergence",
        "spohn-jacobian",
        "w1-selftest",
    ] {
        assert!(text.contains(name), "missing {name} in:\n{text}");
    }
}

#[test]
fn schema_violation_exits_with_code_two() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("bad.json");
    // Unknown key "tolerance" (should be "tolerances").
    std::fs::write(
        &config,
        r#"{
            "scenario": "w1-selftest",
            "kernel": {"variant": "zero", "params": {"dim": 1}},
            "seed": 1,
            "output": "out",
            "tolerance": {}
        }"#,
    )
    .unwrap();
    let out = Command::new(bin())
        .args(["run", config.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("tolerance"), "{err}");
}

#[test]
fn missing_config_file_exits_with_code_two() {
    let out = Command::new(bin())
        .args(["run", "/definitely/not/here.json"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn capacity_error_exits_with_code_three() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("chaos.json");
    std::fs::write(
        &config,
        format!(
            r#"{{
                "scenario": "chaos",
                "kernel": {{"variant": "linear", "params": {{"dim": 1, "c": -1.0}}}},
                "seed": 3,
                "n_list": [4],
                "t_list": [0.01],
                "pooled_target": 8,
                "reference_factor": 2,
                "subsample_cap": 3000,
                "output": {:?}
            }}"#,
            tmp.path().join("out").to_str().unwrap()
        ),
    )
    .unwrap();
    let out = Command::new(bin())
        .args(["run", config.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("capacity"));
}

#[test]
fn w1_subcommand_prints_distance_and_plan() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a.csv");
    let b = tmp.path().join("b.csv");
    std::fs::write(&a, "weight,z1\n0.5,0\n0.5,2\n").unwrap();
    std::fs::write(&b, "weight,z1\n0.5,1\n0.5,3\n").unwrap();
    let plan = tmp.path().join("plan.csv");
    let out = Command::new(bin())
        .args(["w1", a.to_str().unwrap(), b.to_str().unwrap(), "--plan"])
        .arg(&plan)
        .output()
        .unwrap();
    assert!(out.status.success());
    let distance: f64 = String::from_utf8(out.stdout)
        .unwrap()
        .trim()
        .parse()
        .unwrap();
    assert!((distance - 1.0).abs() < 1e-12);
    let plan_text = std::fs::read_to_string(&plan).unwrap();
    assert!(plan_text.starts_with("source_idx,target_idx,mass\n"));
    assert_eq!(plan_text.lines().count(), 3);
}

#[test]
fn run_produces_manifest_with_config_hash() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("out");
    let config = tmp.path().join("selftest.json");
    std::fs::write(
        &config,
        format!(
            r#"{{
                "scenario": "w1-selftest",
                "kernel": {{"variant": "zero", "params": {{"dim": 1}}}},
                "seed": 5,
                "samples": 10,
                "output": {:?}
            }}"#,
            out_dir.to_str().unwrap()
        ),
    )
    .unwrap();
    let out = Command::new(bin())
        .args(["run", config.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(out.status.success());
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["scenario"], "w1-selftest");
    assert_eq!(manifest["seed"], 5);
    assert_eq!(manifest["pass"], true);
    assert_eq!(manifest["config_sha256"].as_str().unwrap().len(), 64);
    assert!(manifest["versions"]["meanfield-lab"].is_string());
}

#[test]
fn dobrushin_with_zero_kernel_has_bound_equal_to_dist() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("out");
    let config = tmp.path().join("dob0.json");
    std::fs::write(
        &config,
        format!(
            r#"{{
                "scenario": "dobrushin",
                "kernel": {{"variant": "zero", "params": {{"dim": 1}}}},
                "seed": 4,
                "n_list": [32],
                "t_list": [0.5, 1.0],
                "output": {:?}
            }}"#,
            out_dir.to_str().unwrap()
        ),
    )
    .unwrap();
    let out = Command::new(bin())
        .args(["run", config.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let csv = std::fs::read_to_string(out_dir.join("dobrushin.csv")).unwrap();
    for line in csv.lines().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        // With L = 0 and the identity flow the bound column equals the
        // distance column.
        assert_eq!(fields[1], fields[2], "{line}");
        assert_eq!(fields[3], "true");
    }
}

#[test]
fn dobrushin_run_emits_trajectory_dump() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("out");
    let config = tmp.path().join("dob.json");
    std::fs::write(
        &config,
        format!(
            r#"{{
                "scenario": "dobrushin",
                "kernel": {{"variant": "harmonic_vlasov", "params": {{"spatial_dim": 1}}}},
                "seed": 8,
                "n_list": [16],
                "t_list": [0.1],
                "output": {:?}
            }}"#,
            out_dir.to_str().unwrap()
        ),
    )
    .unwrap();
    let out = Command::new(bin())
        .args(["run", config.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(out.status.success());
    let traj = std::fs::read_to_string(out_dir.join("trajectory.csv")).unwrap();
    assert!(traj.starts_with("t,particle_index,z_1,z_2\n"));
    // initial state and one checkpoint, 16 particles each.
    assert_eq!(traj.lines().count(), 1 + 2 * 16);
}
