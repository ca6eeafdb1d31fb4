//! End-to-end checks of the command grammar, exit codes, output formats and
//! the determinism contract (identical bytes across runs and thread counts).

mod support;

use nhb_core::models::{
    eval_lattice, write_grid_model, GridAxis, GridModel, LatticeVariant, Momentum,
};
use serde_json::Value;
use std::f64::consts::TAU;
use support::{load_schema, run_cli, validate};

fn parse_json(stdout: &str) -> Value {
    serde_json::from_str(stdout.lines().last().expect("output must not be empty"))
        .expect("last stdout line must be JSON")
}

#[test]
fn braid_reports_the_kz_half_twist() {
    let (code, out, err) = run_cli(&[
        "braid",
        "--model",
        "lattice-main:m=2",
        "--loop",
        "axis=z",
        "at=1.5707963267948966,1.5707963267948966",
    ]);
    assert_eq!(code, 0, "stderr: {err}");
    let v = parse_json(&out);
    validate(&load_schema("braid.schema.json"), &v).unwrap();
    assert_eq!(v["half_twists"], Value::from(1));
    assert_eq!(v["permutation"], serde_json::json!([2, 1]));
    assert_eq!(v["word"], serde_json::json!([1]));
}

#[test]
fn braid_output_is_byte_identical_across_runs_and_threads() {
    let args = [
        "braid",
        "--model",
        "lattice-supp:m=0.25",
        "--loop",
        "axis=x",
        "at=1.1,2.3",
        "--resolution",
        "257",
    ];
    let (c1, out1, _) = run_cli(&args);
    let (c2, out2, _) = run_cli(&args);
    let mut threaded = args.to_vec();
    threaded.extend(["--threads", "3"]);
    let (c3, out3, _) = run_cli(&threaded);
    assert_eq!((c1, c2, c3), (0, 0, 0));
    assert_eq!(out1, out2);
    assert_eq!(out1, out3);
}

#[test]
fn wilson_flow_writes_csv_and_report() {
    let dir = std::env::temp_dir();
    let path1 = dir.join("nhb-test-flow-1.csv");
    let path2 = dir.join("nhb-test-flow-2.csv");
    let base = [
        "wilson-flow",
        "--model",
        "lattice-supp:m=4",
        "--center",
        "0.9,2.2",
        "--radius",
        "0.15",
        "--loop-samples",
        "64",
        "--flow-samples",
        "48",
    ];
    let mut args1 = base.to_vec();
    args1.extend(["--out", path1.to_str().unwrap()]);
    let (code, out, err) = run_cli(&args1);
    assert_eq!(code, 0, "stderr: {err}");
    let report = parse_json(&out);
    validate(&load_schema("crossing-report.schema.json"), &report).unwrap();
    assert_eq!(report["nu"], Value::from(0));
    let csv = std::fs::read_to_string(&path1).unwrap();
    assert!(csv.starts_with("kz,phi1,phi2,mod1,mod2\n"));
    assert_eq!(csv.lines().count(), 49);

    // determinism across thread counts, byte for byte, file and stdout
    let mut args2 = base.to_vec();
    args2.extend(["--out", path2.to_str().unwrap(), "--threads", "4"]);
    let (code2, out2, _) = run_cli(&args2);
    assert_eq!(code2, 0);
    assert_eq!(out, out2);
    assert_eq!(csv, std::fs::read_to_string(&path2).unwrap());
    let _ = std::fs::remove_file(path1);
    let _ = std::fs::remove_file(path2);
}

#[test]
fn nodes_scan_classifies_the_lattice_weyl_points() {
    let (code, out, err) = run_cli(&["nodes", "--model", "lattice-main:m=2", "--coarse", "16"]);
    assert_eq!(code, 0, "stderr: {err}");
    let v = parse_json(&out);
    validate(&load_schema("nodes.schema.json"), &v).unwrap();
    let nodes = v.as_array().unwrap();
    assert_eq!(nodes.len(), 4);
    for node in nodes {
        assert_eq!(node["kind"], Value::from("weyl_point"));
        let chirality = node["chirality"].as_i64().unwrap();
        assert_eq!(chirality.abs(), 1);
    }
}

#[test]
fn nodes_near_the_exceptional_line_classify_as_crossings() {
    let (code, out, err) = run_cli(&[
        "nodes",
        "--model",
        "kp:alpha=1.5707963267948966",
        "--region",
        "-0.25,0.25,-0.25,0.25,-0.25,0.25",
        "--coarse",
        "9",
        "--probe-radius",
        "0.2",
    ]);
    assert_eq!(code, 0, "stderr: {err}");
    let v = parse_json(&out);
    validate(&load_schema("nodes.schema.json"), &v).unwrap();
    let nodes = v.as_array().unwrap();
    assert!(!nodes.is_empty());
    assert!(nodes.iter().all(|n| n["kind"] == "exceptional_crossing"));
}

#[test]
fn nodes_without_region_needs_a_periodic_model() {
    let (code, _, err) = run_cli(&["nodes", "--model", "kp:alpha=1.0"]);
    assert_eq!(code, 2);
    assert!(err.contains("--region"), "stderr: {err}");
}

#[test]
fn chern_reports_per_band_charges() {
    let (code, out, err) = run_cli(&[
        "chern",
        "--model",
        "lattice-supp:m=2",
        "--center",
        "0,0,0",
        "--radius",
        "0.3",
        "--n-theta",
        "101",
        "--n-phi",
        "101",
    ]);
    assert_eq!(code, 0, "stderr: {err}");
    let v = parse_json(&out);
    validate(&load_schema("chern.schema.json"), &v).unwrap();
    assert_eq!(v, serde_json::json!([-1, 1]));
}

#[test]
fn classify_prints_group_and_json() {
    let (code, out, err) = run_cli(&["classify", "--n", "2", "--sigma1", "(1 2)", "--sigma2", ""]);
    assert_eq!(code, 0, "stderr: {err}");
    let mut lines = out.lines();
    assert_eq!(lines.next(), Some("Z_2"));
    let v: Value = serde_json::from_str(lines.next().unwrap()).unwrap();
    validate(&load_schema("class-group.schema.json"), &v).unwrap();
    assert_eq!(v, serde_json::json!({"torsion": [2], "free_rank": 0}));

    let (code, out, _) = run_cli(&[
        "classify",
        "--n",
        "5",
        "--sigma1",
        "(1 2 3 4 5)",
        "--sigma2",
        "",
    ]);
    assert_eq!(code, 0);
    assert_eq!(out.lines().next(), Some("Z_5"));
}

#[test]
fn classify_rejects_bad_cycles() {
    let (code, _, err) = run_cli(&["classify", "--n", "2", "--sigma1", "(1 7)", "--sigma2", ""]);
    assert_eq!(code, 2);
    assert!(err.contains("cycle"), "stderr: {err}");
}

#[test]
fn kp_weyl_positions_match_the_locus() {
    let (code, out, err) = run_cli(&["kp-weyl", "--alpha", "1.5707963267948966"]);
    assert_eq!(code, 0, "stderr: {err}");
    let v = parse_json(&out);
    validate(&load_schema("kp-weyl.schema.json"), &v).unwrap();
    let points = v.as_array().unwrap();
    assert_eq!(points.len(), 2);
    let r = std::f64::consts::FRAC_1_SQRT_2;
    for (point, want_y) in points.iter().zip([-r, r]) {
        assert!(point[0].as_f64().unwrap().abs() < 1e-9);
        assert!((point[1].as_f64().unwrap() - want_y).abs() < 1e-9);
        assert_eq!(point[2].as_f64().unwrap(), 0.0);
    }

    // outside the existence window the list is empty
    let (code, out, _) = run_cli(&["kp-weyl", "--alpha", "0.5"]);
    assert_eq!(code, 0);
    assert_eq!(parse_json(&out), serde_json::json!([]));
}

fn write_grid_fixture(counts: [usize; 3]) -> std::path::PathBuf {
    let axes: Vec<GridAxis> = counts
        .iter()
        .map(|&nodes| GridAxis {
            nodes,
            start: 0.0,
            step: TAU / nodes as f64,
            periodic: true,
        })
        .collect();
    let mut data = Vec::with_capacity(counts.iter().product());
    for i in 0..counts[0] {
        for j in 0..counts[1] {
            for l in 0..counts[2] {
                data.push(eval_lattice(
                    &Momentum::k3(
                        axes[0].step * i as f64,
                        axes[1].step * j as f64,
                        axes[2].step * l as f64,
                    ),
                    2.0,
                    LatticeVariant::Main,
                ));
            }
        }
    }
    let grid = GridModel::new(2, axes, data).unwrap();
    let path = std::env::temp_dir().join(format!(
        "nhb-test-grid-{}x{}x{}.bin",
        counts[0], counts[1], counts[2]
    ));
    let file = std::fs::File::create(&path).unwrap();
    write_grid_model(&grid, std::io::BufWriter::new(file)).unwrap();
    path
}

#[test]
fn grid_braid_requires_aligned_loop_samples() {
    // odd z count keeps the lone Re-crossing at k_z = π between grid nodes
    let path = write_grid_fixture([8, 8, 15]);
    let model_arg = format!("grid:{}", path.display());

    // default 401 samples at off-node coordinates cannot align with the grid
    let (code, _, err) = run_cli(&[
        "braid",
        "--model",
        &model_arg,
        "--loop",
        "axis=z",
        "at=0.1,0.2",
    ]);
    assert_eq!(code, 2, "stderr: {err}");
    assert!(err.contains("grid node"), "stderr: {err}");

    // `at=` prefix is required; a bare coordinate token is a usage error
    let quarter = format!("{},{}", TAU / 4.0, TAU / 4.0);
    let (code, out, err) = run_cli(&[
        "braid",
        "--model",
        &model_arg,
        "--loop",
        "axis=z",
        &quarter,
        "--resolution",
        "15",
    ]);
    assert_eq!(code, 2, "stderr: {err} stdout: {out}");

    // node-aligned coordinates and a matching resolution succeed
    let at_arg = format!("at={quarter}");
    let (code, out, err) = run_cli(&[
        "braid",
        "--model",
        &model_arg,
        "--loop",
        "axis=z",
        &at_arg,
        "--resolution",
        "15",
    ]);
    assert_eq!(code, 0, "stderr: {err}");
    let v = parse_json(&out);
    assert_eq!(v["half_twists"], Value::from(1));
    let _ = std::fs::remove_file(path);
}

#[test]
fn missing_grid_file_is_an_io_error() {
    let (code, _, err) = run_cli(&[
        "braid",
        "--model",
        "grid:/nonexistent/grid.bin",
        "--loop",
        "axis=z",
        "at=0,0",
    ]);
    assert_eq!(code, 4);
    assert!(err.contains("cannot open"), "stderr: {err}");
}

#[test]
fn degenerate_loop_is_a_numerical_error() {
    // the k_z loop at the origin column passes through the node at k = 0
    let (code, _, err) = run_cli(&[
        "braid",
        "--model",
        "lattice-main:m=2",
        "--loop",
        "axis=z",
        "at=0,0",
    ]);
    assert_eq!(code, 3);
    assert!(err.contains("degenera"), "stderr: {err}");
}

#[test]
fn usage_errors_exit_two() {
    for args in [
        vec!["braid", "--model", "lattice-main:m=2"], // missing --loop
        vec![
            "braid",
            "--model",
            "lattice-main",
            "--loop",
            "axis=z",
            "at=0,0",
        ], // missing m
        vec![
            "braid",
            "--model",
            "lattice-main:m=2",
            "--loop",
            "axis=w",
            "at=0,0",
        ],
        vec![
            "wilson-flow",
            "--model",
            "lattice-main:m=2",
            "--center",
            "0",
            "--radius",
            "1",
            "--out",
            "/tmp/x.csv",
        ],
        vec![
            "chern",
            "--model",
            "lattice-main:m=2",
            "--center",
            "0,0,0",
            "--radius",
            "-1",
        ],
        vec!["no-such-command"],
    ] {
        let (code, _, err) = run_cli(&args);
        assert_eq!(code, 2, "args {args:?} gave stderr: {err}");
    }
    let (code, out, _) = run_cli(&["--help"]);
    assert_eq!(code, 0);
    assert!(out.contains("braid"));
}
