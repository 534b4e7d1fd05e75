//! End-to-end checks of the binary: exit codes, emitted files, idempotence.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_convexcert"))
}

fn asset(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../assets").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).to_string()
}

#[test]
fn certify_relu_mlp_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "certify",
        "--graph",
        asset("graphs/mlp_relu.json").to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "--grid-points",
        "6",
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("certificate.json").exists());
    assert!(dir.path().join("margins.csv").exists());
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("certificate.json")).unwrap())
            .unwrap();
    assert_eq!(doc["variable"], "w1");
    assert_eq!(doc["points"].as_array().unwrap().len(), 6);
}

#[test]
fn certify_unscaled_sin2_reports_violation() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "certify",
        "--graph",
        asset("graphs/sin2.json").to_str().unwrap(),
        "--config",
        asset("configs/sin2_demo.json").to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "--grid-points",
        "16",
    ]);
    assert_eq!(code(&out), 1);
    assert!(stdout(&out).contains("margin violated at function node 'sin'"));
}

#[test]
fn certify_scaled_sin2_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "certify",
        "--graph",
        asset("graphs/sin2_scaled.json").to_str().unwrap(),
        "--config",
        asset("configs/sin2_demo.json").to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "--grid-points",
        "16",
    ]);
    assert_eq!(code(&out), 0, "stdout: {}", stdout(&out));
}

#[test]
fn certify_circle_exits_three_and_lists_branches() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "certify",
        "--graph",
        asset("graphs/circle_wsigwx.json").to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "--grid-points",
        "2",
    ]);
    assert_eq!(code(&out), 3);
    let text = stdout(&out);
    assert!(text.contains("meets at 'outer'"));
    assert!(text.contains("branch:"));
}

#[test]
fn certify_missing_graph_is_input_error() {
    let out = run(&["certify", "--graph", "/nonexistent/g.json"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn certify_malformed_graph_is_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"nodes": [{"id": "x", "kind": "mystery"}]}"#).unwrap();
    let out = run(&["certify", "--graph", bad.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown node kind"));
}

#[test]
fn scale_search_selects_the_known_factor() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "scale-search",
        "--graph",
        asset("graphs/sin2.json").to_str().unwrap(),
        "--config",
        asset("configs/sin2_demo.json").to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "--grid-points",
        "40",
        "--deltas",
        "1.0,0.5,0.3,0.1",
    ]);
    assert_eq!(code(&out), 0, "stdout: {}", stdout(&out));
    let plan: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("scale_plan.json")).unwrap())
            .unwrap();
    assert_eq!(plan["delta"], 0.3);
    assert_eq!(plan["certified"], true);
    let table = std::fs::read_to_string(dir.path().join("scale_table.csv")).unwrap();
    assert!(table.starts_with("delta,min_margin,certified"));
    assert_eq!(table.lines().count(), 5);
}

#[test]
fn scale_search_on_relu_takes_first_grid_entry() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "scale-search",
        "--graph",
        asset("graphs/mlp_relu.json").to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "--grid-points",
        "4",
    ]);
    assert_eq!(code(&out), 0);
    let plan: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("scale_plan.json")).unwrap())
            .unwrap();
    assert_eq!(plan["delta"], 1.0);
}

#[test]
fn scale_search_with_circles_flags_not_certified() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "scale-search",
        "--graph",
        asset("graphs/rnn_tanh.json").to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "--grid-points",
        "2",
    ]);
    assert_eq!(code(&out), 3);
    let text = stdout(&out);
    assert!(text.contains("NotCertified"));
    assert!(text.contains("residual-ratio"));
}

#[test]
fn gradcheck_passes_on_shipped_mlp() {
    let out = run(&[
        "gradcheck",
        "--graph",
        asset("graphs/mlp_sigmoid.json").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "stdout: {}", stdout(&out));
    let text = stdout(&out);
    assert!(text.contains("gradient check"));
    assert!(text.contains("hessian check"));
}

#[test]
fn gradcheck_linear_graph_is_nearly_exact() {
    // Square loss over a product graph: the analytic curvature and a
    // large-step probe agree to ten digits.
    let dir = tempfile::tempdir().unwrap();
    let g = dir.path().join("linear.json");
    std::fs::write(
        &g,
        r#"{"nodes": [
            {"id": "w", "kind": "parameter", "params": {"shape": [2, 3]}},
            {"id": "x", "kind": "input", "params": {"shape": [3, 2]}},
            {"id": "y", "kind": "matmul", "inputs": ["w", "x"]},
            {"id": "t", "kind": "input", "params": {"shape": [2, 2]}},
            {"id": "loss", "kind": "loss", "inputs": ["y", "t"], "params": {"loss": "square"}}
        ]}"#,
    )
    .unwrap();
    let out = run(&["gradcheck", "--graph", g.to_str().unwrap(), "--fd-step", "0.01"]);
    assert_eq!(code(&out), 0, "stdout: {}", stdout(&out));
    let text = stdout(&out);
    let rel: f64 = text
        .lines()
        .find(|l| l.contains("hessian check"))
        .and_then(|l| l.split_whitespace().find(|w| w.contains("e-") || w.contains("e+")))
        .and_then(|w| w.parse().ok())
        .expect("hessian line carries the error");
    assert!(rel <= 1e-10, "linear-model hessian error {rel}");
}

#[test]
fn demo_sin2_emits_csv_and_charts_with_expected_extremes() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "demo-sin2",
        "--out",
        dir.path().to_str().unwrap(),
        "--grid-points",
        "100",
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    for f in ["demo_sin2.csv", "demo_sin2_functions.svg", "demo_sin2_margins.svg", "demo_sin2_curvature.svg"] {
        assert!(dir.path().join(f).exists(), "{f} missing");
    }
    let csv = std::fs::read_to_string(dir.path().join("demo_sin2.csv")).unwrap();
    let rows: Vec<Vec<f64>> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 100);
    // Margin at x = -2, delta = 1 equals 2 - 2 tan^2(2); the closed-form
    // column agrees with the certifier's value.
    let first = &rows[0];
    assert!((first[0] - (-2.0)).abs() < 1e-12);
    let expected = 2.0 - 2.0 * (2.0f64).tan().powi(2);
    assert!((first[3] - expected).abs() < 1e-9, "margin col: {}", first[3]);
    assert!((first[5] - expected).abs() < 1e-9, "closed-form col: {}", first[5]);
    // Minimum second derivative at delta = 0.3 over the interval.
    let min_fpp = rows.iter().map(|r| r[7]).fold(f64::INFINITY, f64::min);
    assert!((min_fpp - 2.0 * 0.09 * (1.2f64).cos()).abs() < 1e-9);
    assert!(min_fpp > 0.0);
}

#[test]
fn variance_and_converge_write_result_trees_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "variance",
        "--out",
        dir.path().to_str().unwrap(),
        "--dataset",
        "moons",
        "--epochs",
        "6",
        "--seeds",
        "1,2",
        "--deltas",
        "1.0,0.5",
    ];
    let out = run(&args);
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let vdir = dir.path().join("variance");
    for f in ["runs.csv", "summary.csv", "cert_fraction.csv", "reference.csv", "accuracy_curves.svg", "manifest.json"] {
        assert!(vdir.join(f).exists(), "{f} missing");
    }
    let first_runs = std::fs::read_to_string(vdir.join("runs.csv")).unwrap();
    let first_summary = std::fs::read_to_string(vdir.join("summary.csv")).unwrap();

    // Byte-identical rerun, and the manifest reports the replay.
    let again = run(&args);
    assert_eq!(code(&again), 0);
    assert!(stdout(&again).contains("config hash matches"));
    assert_eq!(std::fs::read_to_string(vdir.join("runs.csv")).unwrap(), first_runs);
    assert_eq!(std::fs::read_to_string(vdir.join("summary.csv")).unwrap(), first_summary);

    let out = run(&[
        "converge",
        "--out",
        dir.path().to_str().unwrap(),
        "--epochs",
        "5",
        "--seeds",
        "3,4",
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let cdir = dir.path().join("converge");
    assert!(cdir.join("accuracy_curves.svg").exists());
    let svg = std::fs::read_to_string(cdir.join("accuracy_curves.svg")).unwrap();
    assert!(svg.contains("<polyline"));
    let runs = std::fs::read_to_string(cdir.join("runs.csv")).unwrap();
    assert_eq!(runs.lines().count(), 1 + 2 * 2 * 5);
}

#[test]
fn certify_with_dataset_batches_binds_features_and_labels() {
    let dir = tempfile::tempdir().unwrap();
    let g = dir.path().join("moons_mlp.json");
    std::fs::write(
        &g,
        r#"{"nodes": [
            {"id": "x", "kind": "input", "params": {"shape": [2, 4]}},
            {"id": "w1", "kind": "parameter", "params": {"shape": [8, 2]}},
            {"id": "z1", "kind": "matmul", "inputs": ["w1", "x"]},
            {"id": "a1", "kind": "func", "inputs": ["z1"], "params": {"func": "relu"}},
            {"id": "w2", "kind": "parameter", "params": {"shape": [2, 8]}},
            {"id": "z2", "kind": "matmul", "inputs": ["w2", "a1"]},
            {"id": "a2", "kind": "func", "inputs": ["z2"], "params": {"func": "relu"}},
            {"id": "label", "kind": "input", "params": {"shape": [2, 4]}},
            {"id": "loss", "kind": "loss", "inputs": ["a2", "label"], "params": {"loss": "square"}}
        ]}"#,
    )
    .unwrap();
    let out = run(&[
        "certify",
        "--graph",
        g.to_str().unwrap(),
        "--dataset",
        "moons",
        "--out",
        dir.path().to_str().unwrap(),
        "--grid-points",
        "5",
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("certificate.json")).unwrap())
            .unwrap();
    assert_eq!(doc["points"].as_array().unwrap().len(), 5);
}

#[test]
fn env_var_overrides_out_flag() {
    let dir = tempfile::tempdir().unwrap();
    let flag_dir = dir.path().join("flagged");
    let env_dir = dir.path().join("enved");
    let out = bin()
        .args([
            "demo-sin2",
            "--out",
            flag_dir.to_str().unwrap(),
            "--grid-points",
            "4",
        ])
        .env("CONVEXCERT_OUT", env_dir.to_str().unwrap())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(env_dir.join("demo_sin2.csv").exists());
    assert!(!flag_dir.exists());
}

#[test]
fn gradcheck_on_digits_csv_dataset_path_is_rejected_cleanly() {
    // A dataset path is not a graph; the loader names the problem.
    let out = run(&["gradcheck", "--graph", asset("configs/sin2_demo.json").to_str().unwrap()]);
    assert_eq!(code(&out), 2);
}
