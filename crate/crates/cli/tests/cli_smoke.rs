//! Drives the compiled `subchain` binary end to end: verb plumbing, the
//! documented exit codes, rerun-from-manifest reproducibility, and file
//! round trips. Everything here runs at toy scale.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn subchain(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_subchain"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("no signal")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

const TINY_CONFIG: &str = r#"{
  "efield": {
    "synthetic": {
      "n_points": 201,
      "element_model": "patch_cosine",
      "ripple": true,
      "seed": 5,
      "arrays": [
        {"n_elements": 2, "boresight_deg": [90.0, 0.0]},
        {"n_elements": 2, "boresight_deg": [90.0, 180.0]}
      ]
    }
  },
  "design": {"k": 2, "phase_bits": 3, "n_restarts": 2, "seed": 42, "kmeans_max_iters": 6},
  "method": "bc-sc-max",
  "levels": [2, 1]
}"#;

fn write_tiny_config(dir: &Path) -> String {
    let path = dir.join("config.json");
    fs::write(&path, TINY_CONFIG).unwrap();
    path.display().to_string()
}

fn read_to_string(path: &Path) -> String {
    fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

#[test]
fn shipped_configs_parse_and_validate() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for name in ["phone_default.json", "quick.json"] {
        let cfg = subchain_cli::load_pipeline_config(&root.join(name))
            .unwrap_or_else(|e| panic!("{name}: {e}"));
        cfg.validate().unwrap_or_else(|e| panic!("{name}: {e}"));
    }
}

#[test]
fn design_then_rerun_from_manifest_is_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_tiny_config(tmp.path());
    let run1 = tmp.path().join("run1");
    let run2 = tmp.path().join("run2");

    let out = subchain(&[
        "design",
        "--config",
        &cfg,
        "--out",
        run1.to_str().unwrap(),
        "--emit-traces",
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));

    let manifest = run1.join("run_manifest.json");
    let out = subchain(&[
        "design",
        "--config",
        manifest.to_str().unwrap(),
        "--out",
        run2.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));

    let listed: serde_json::Value =
        serde_json::from_str(&read_to_string(&manifest)).unwrap();
    let names: Vec<String> = listed["outputs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap().to_string())
        .collect();
    assert!(names.contains(&"codebook_a0_l2.json".to_string()));
    assert!(names.contains(&"traces.jsonl".to_string()));
    for name in names.iter().chain([&"run_manifest.json".to_string()]) {
        let a = fs::read(run1.join(name)).unwrap();
        let b = fs::read(run2.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between the run and its manifest rerun");
    }
}

#[test]
fn exit_codes_follow_the_documented_taxonomy() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("out");

    // Missing config file: config error.
    let out = subchain(&[
        "design",
        "--config",
        "/nonexistent/config.json",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 2);

    // Invalid knob: config error, recorded in error.json.
    let bad = tmp.path().join("bad.json");
    fs::write(&bad, TINY_CONFIG.replace("\"k\": 2", "\"k\": 0")).unwrap();
    let out = subchain(&[
        "design",
        "--config",
        bad.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 2);
    let record: serde_json::Value =
        serde_json::from_str(&read_to_string(&out_dir.join("error.json"))).unwrap();
    assert_eq!(record["error"], "config");

    // Unreadable data file: data error, recorded in error.json.
    let files_cfg = tmp.path().join("files.json");
    fs::write(
        &files_cfg,
        r#"{
          "efield": {"files": {"paths": ["/nonexistent/efield.json"]}},
          "design": {"k": 2, "phase_bits": 3},
          "method": "sc-max",
          "levels": [2, 1]
        }"#,
    )
    .unwrap();
    let out = subchain(&[
        "design",
        "--config",
        files_cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 3, "stderr: {}", stderr(&out));
    let record: serde_json::Value =
        serde_json::from_str(&read_to_string(&out_dir.join("error.json"))).unwrap();
    assert_eq!(record["error"], "data");

    // compare needs two runs.
    let out = subchain(&["compare", "--runs", "somewhere", "--out", "cmp"]);
    assert_eq!(code(&out), 2);

    // validate needs at least one target.
    let out = subchain(&["validate"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn synth_and_validate_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_tiny_config(tmp.path());
    let data = tmp.path().join("data");

    let out = subchain(&["synth-efield", "--config", &cfg, "--out", data.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let efield = data.join("efield_a0.json");
    assert!(efield.exists());
    assert!(data.join("efield_a1.json").exists());

    let out = subchain(&["validate", "--efield", efield.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let summary = String::from_utf8_lossy(&out.stdout).into_owned();
    assert!(summary.contains("2 dual-pol elements"), "got: {summary}");
    assert!(summary.contains("201 directions"), "got: {summary}");

    // Truncated file: schema violation, data error.
    let text = read_to_string(&efield);
    fs::write(&efield, &text[..text.len() / 2]).unwrap();
    let out = subchain(&["validate", "--efield", efield.to_str().unwrap()]);
    assert_eq!(code(&out), 3);

    // CSV encoding writes the grid companion and validates too.
    let csv_dir = tmp.path().join("csv");
    let out = subchain(&[
        "synth-efield",
        "--config",
        &cfg,
        "--out",
        csv_dir.to_str().unwrap(),
        "--format",
        "csv",
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    assert!(csv_dir.join("efield_a0.csv").exists());
    assert!(csv_dir.join("efield_a0.grid.csv").exists());
    let out = subchain(&[
        "validate",
        "--efield",
        csv_dir.join("efield_a1.csv").to_str().unwrap(),
        "--format",
        "csv",
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
}

#[test]
fn compare_run_with_itself_has_zero_deltas() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_tiny_config(tmp.path());
    let run = tmp.path().join("run");
    let out = subchain(&["design", "--config", &cfg, "--out", run.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));

    let cmp = tmp.path().join("cmp");
    let run_str = run.display().to_string();
    let out = subchain(&[
        "compare",
        "--runs",
        &format!("{run_str},{run_str}"),
        "--out",
        cmp.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));

    let matching = read_to_string(&cmp.join("compare_matching.csv"));
    let mut rows = 0;
    for line in matching.lines().skip(1) {
        let cells: Vec<&str> = line.split(',').collect();
        assert_eq!(cells[6], "0", "matching delta row: {line}");
        assert_eq!(cells[7], "0", "repaired delta row: {line}");
        rows += 1;
    }
    assert_eq!(rows, 2 * 4, "two runs x four ordered level pairs");

    let cdf = read_to_string(&cmp.join("compare_cdf.csv"));
    for line in cdf.lines().skip(1) {
        let cells: Vec<&str> = line.split(',').collect();
        assert_eq!(cells[5], "0", "cdf delta row: {line}");
    }
}

#[test]
fn metrics_verb_reproduces_design_metric_files() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_tiny_config(tmp.path());
    let run = tmp.path().join("run");
    let redo = tmp.path().join("redo");
    let out = subchain(&["design", "--config", &cfg, "--out", run.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));

    let out = subchain(&[
        "metrics",
        "--config",
        &cfg,
        "--codebooks",
        run.to_str().unwrap(),
        "--out",
        redo.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    for name in ["matching.csv", "cdf_l2.csv", "cdf_l1.csv", "similarity_a0_l1.csv"] {
        assert_eq!(
            fs::read(run.join(name)).unwrap(),
            fs::read(redo.join(name)).unwrap(),
            "{name} differs between design and metrics"
        );
    }

    // The emitted codebooks validate against their schema.
    let out = subchain(&[
        "validate",
        "--codebook",
        run.join("codebook_a1_l1.json").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    let summary = String::from_utf8_lossy(&out.stdout).into_owned();
    assert!(summary.contains("K=2"), "got: {summary}");
}

#[test]
fn overrides_are_applied_and_recorded_in_the_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_tiny_config(tmp.path());
    let run = tmp.path().join("run");
    let out = subchain(&[
        "design",
        "--config",
        &cfg,
        "--out",
        run.to_str().unwrap(),
        "--seed",
        "999",
        "--levels",
        "2",
        "--method",
        "sim-max",
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));

    let manifest: serde_json::Value =
        serde_json::from_str(&read_to_string(&run.join("run_manifest.json"))).unwrap();
    assert_eq!(manifest["config"]["design"]["seed"], 999);
    assert_eq!(manifest["config"]["method"], "sim-max");
    assert_eq!(
        manifest["config"]["levels"],
        serde_json::json!([2])
    );
    // Single-level family: the matching matrix is the 1x1 identity rate.
    let matching = read_to_string(&run.join("matching.csv"));
    let lines: Vec<&str> = matching.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[1], "2,2,1,1");
    assert!(!run.join("codebook_a0_l1.json").exists());
}
