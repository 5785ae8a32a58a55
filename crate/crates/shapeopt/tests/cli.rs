use std::path::Path;
use std::process::{Command, Output};

use shapeopt::formats::{read_history, read_matrix_market};

fn shapeopt(args: &[&str], out_dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_shapeopt"))
        .args(args)
        .env("SHAPEOPT_OUTPUT_DIR", out_dir)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("run.toml");
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn bad_weight_is_a_usage_error_naming_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "preset = \"annulus-sqp\"\n[smoothing]\neps2 = -0.5\n");
    let out = shapeopt(&["run", &cfg], &dir.path().join("out"));
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("smoothing.eps2"), "{err}");
    assert!(!dir.path().join("out").exists());
}

#[test]
fn unknown_keys_and_levels_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[optimizer]\nalgorithm = \"sqp_mixed\"\nmax_iters = 3\n");
    let out = shapeopt(&["run", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("optimizer"));
    assert_eq!(shapeopt(&["verify", "everything"], dir.path()).status.code(), Some(2));
    assert_eq!(shapeopt(&["presets", "no-such-preset"], dir.path()).status.code(), Some(2));
}

#[test]
fn zero_iterations_write_the_initial_record() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "preset = \"annulus-sqp\"\n[optimizer]\nmax_iter = 0\n");
    let out_dir = dir.path().join("out");
    let out = shapeopt(&["run", &cfg], &out_dir);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = read_history(&std::fs::read_to_string(out_dir.join("history.csv")).unwrap()).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].iter, 0);
    assert_eq!(rows[0].step_norm, 0.0);
}

#[test]
fn naca_preset_writes_its_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "preset = \"naca-analogue-sobolev\"\n[optimizer]\nmax_iter = 5\n");
    let out_dir = dir.path().join("out");
    let out = shapeopt(&["run", &cfg], &out_dir);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["history.csv", "summary.json", "surface.csv"] {
        assert!(out_dir.join(f).is_file(), "{f}");
    }
    let summary: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out_dir.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["n_params"], 38);
    assert_eq!(summary["iterations"], 5);
    let surface = std::fs::read_to_string(out_dir.join("surface.csv")).unwrap();
    assert_eq!(surface.lines().count(), 81);
}

#[test]
fn oneshot_runs_record_piggyback_residuals_and_operators() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "preset = \"annulus-oneshot\"\n[optimizer]\nmax_iter = 3\ninner_steps = 4\n\
         [output]\ndump_volume = true\ndump_operators = true\n",
    );
    let out_dir = dir.path().join("out");
    let out = shapeopt(&["run", &cfg], &out_dir);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let trace = std::fs::read_to_string(out_dir.join("piggyback_residuals.csv")).unwrap();
    assert_eq!(trace.lines().count(), 1 + 4 * 4);
    assert!(out_dir.join("volume.csv").is_file());
    let b = read_matrix_market(&std::fs::read_to_string(out_dir.join("hybrid.mtx")).unwrap()).unwrap();
    assert_eq!(b.rows(), 12);
    assert_eq!(b.symmetry_defect(), 0.0);
}

#[test]
fn json_and_toml_configs_agree() {
    let dir = tempfile::tempdir().unwrap();
    let toml = write_config(dir.path(), "preset = \"annulus-sqp\"\n[optimizer]\nmax_iter = 4\n");
    let json = dir.path().join("run.json");
    std::fs::write(&json, r#"{"preset": "annulus-sqp", "optimizer": {"max_iter": 4}}"#).unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(shapeopt(&["run", &toml], &a).status.success());
    assert!(shapeopt(&["run", json.to_str().unwrap()], &b).status.success());
    assert_eq!(
        std::fs::read(a.join("history.csv")).unwrap(),
        std::fs::read(b.join("history.csv")).unwrap()
    );
}

#[test]
fn verify_levels_pass_and_write_a_report() {
    let dir = tempfile::tempdir().unwrap();
    for level in ["operators", "gradient", "hessian"] {
        let out_dir = dir.path().join(level);
        let out = shapeopt(&["verify", level, "--seed", "3", "--output-dir", out_dir.to_str().unwrap()], dir.path());
        assert!(out.status.success(), "{level}: {}", String::from_utf8_lossy(&out.stdout));
        let report = std::fs::read_to_string(out_dir.join("verify_report.txt")).unwrap();
        assert!(report.contains(level), "{report}");
        assert!(!report.contains("FAIL"), "{report}");
    }
}

#[test]
fn report_divides_by_the_baseline() {
    let dir = tempfile::tempdir().unwrap();
    let hist = dir.path().join("history.csv");
    std::fs::write(
        &hist,
        "iter,objective,E_max,C_min,grad_norm,step_norm,step_scale,time_s\n\
         0,2.0,0.0,,1.0,0.1,1.0,0.0\n\
         1,1.5,0.0,,1e-7,0.0,1.0,4.0\n",
    )
    .unwrap();
    let csv = dir.path().join("report.csv");
    let out = shapeopt(
        &["report", hist.to_str().unwrap(), "--baseline-time", "4", "--baseline-iters", "2", "--csv", csv.to_str().unwrap()],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let mut rd = csv::Reader::from_path(&csv).unwrap();
    let header = rd.headers().unwrap().clone();
    let row = rd.records().next().unwrap().unwrap();
    let get = |k: &str| row[header.iter().position(|h| h == k).unwrap()].to_string();
    assert_eq!(get("time_retardation").parse::<f64>().unwrap(), 1.0);
    assert_eq!(get("iterations"), "1");

    let missing = dir.path().join("nope.csv");
    let out = shapeopt(&["report", missing.to_str().unwrap(), "--baseline-time", "1", "--baseline-iters", "1"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let out = shapeopt(&["report", hist.to_str().unwrap(), "--baseline-time", "0", "--baseline-iters", "1"], dir.path());
    assert_ne!(out.status.code(), Some(0));
}
