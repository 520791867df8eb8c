use std::path::Path;
use std::process::{Command, Output};

fn jsp(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_jsp"))
        .arg("--output-dir")
        .arg(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

#[test]
fn usage_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(jsp(dir.path(), &["frobnicate"]).status.code(), Some(1));
    assert_eq!(jsp(dir.path(), &["simulate", "--n-max", "lots"]).status.code(), Some(1));
    assert_eq!(jsp(dir.path(), &["--format", "xml", "generate"]).status.code(), Some(1));
    assert_eq!(jsp(dir.path(), &["extract"]).status.code(), Some(1));
    assert_eq!(jsp(dir.path(), &["--help"]).status.code(), Some(0));
}

#[test]
fn data_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bogus = dir.path().join("bogus.mjsi");
    std::fs::write(&bogus, b"not a container").unwrap();
    let out = jsp(dir.path(), &["extract", "--input", bogus.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad magic"));

    let missing = dir.path().join("missing.json");
    assert_eq!(jsp(dir.path(), &["generate", "--state", missing.to_str().unwrap()]).status.code(), Some(2));

    let bad_state = dir.path().join("state.json");
    std::fs::write(&bad_state, r#"{"grid": {"n": 7, "center_nm": 820, "span_nm": 10},
        "jsa": {"type": "gaussian", "sigma_s": 1, "sigma_i": 1},
        "jsp": {"type": "polynomial", "coeffs": []}}"#)
    .unwrap();
    assert_eq!(jsp(dir.path(), &["generate", "--state", bad_state.to_str().unwrap()]).status.code(), Some(2));

    // Feeding an interferogram container to `reconstruct` is a kind mismatch.
    assert!(jsp(dir.path(), &["simulate", "--n-max", "50"]).status.success());
    let set = dir.path().join("interferograms.mjsi");
    assert_eq!(jsp(dir.path(), &["reconstruct", "--input", set.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn numerical_failures_exit_with_three() {
    let dir = tempfile::tempdir().unwrap();
    assert!(jsp(dir.path(), &["simulate", "--n-max", "50"]).status.success());
    let set = dir.path().join("interferograms.mjsi");
    // A window this wide overlaps DC: the carrier check fails.
    let out = jsp(dir.path(), &["extract", "--input", set.to_str().unwrap(), "--radius", "9"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn full_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let p = |name: &str| d.join(name).to_str().unwrap().to_string();

    assert!(jsp(d, &["generate"]).status.success());
    let out = jsp(d, &["--seed", "4", "--deterministic", "simulate", "--n-max", "5000"]);
    assert!(out.status.success());
    assert_eq!(stdout_json(&out)["max_count"], 5000);

    let out = jsp(d, &["extract", "--input", &p("interferograms.mjsi")]);
    assert!(out.status.success());
    assert_eq!(stdout_json(&out)["carrier_check"]["pass"], true);

    let out = jsp(d, &["reconstruct", "--input", &p("ac.mjsi"), "--truth", &p("truth.mjsi")]);
    assert!(out.status.success());
    let summary = stdout_json(&out);
    assert_eq!(summary["iterations"], 20);
    let rmse = summary["comparison"]["rmse"].as_f64().unwrap();
    assert!(rmse < 9e-3, "{rmse}");
    assert!(d.join("result.json").exists());

    let out = jsp(d, &["--format", "csv", "render", "--input", &p("result.mjsi")]);
    assert!(out.status.success());
    for f in ["result_e1_phase.png", "result_e1_amplitude.png", "result_e2_phase.png", "result_e1.csv", "result_history.csv"] {
        assert!(d.join(f).exists(), "{f} missing");
    }
    let out = jsp(d, &["render", "--input", &p("truth.mjsi"), "--image", "svg"]);
    assert!(out.status.success());
    assert!(d.join("truth_phase.svg").exists());
}

#[test]
fn csv_export_writes_one_file_per_pair() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(jsp(d, &["--format", "csv", "simulate", "--n-max", "20"]).status.success());
    let csvs = std::fs::read_dir(d)
        .unwrap()
        .filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().starts_with("interferograms_k"))
        .count();
    assert_eq!(csvs, 64);
    let text = std::fs::read_to_string(d.join("interferograms_k0_l0.csv")).unwrap();
    assert_eq!(text.lines().next(), Some("i,j,signal_nm,idler_nm,counts"));
    assert_eq!(text.lines().count(), 1 + 32 * 32);
}

#[test]
fn small_sweep_is_deterministic_across_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let spec = d.join("sweep.json");
    std::fs::write(&spec, r#"{"n_max_values": [20, 2000], "repeats": 3}"#).unwrap();
    let a = d.join("a");
    let b = d.join("b");
    let run = |out: &Path, workers: &str| {
        let o = jsp(out, &["--seed", "11", "--workers", workers, "sweep", "--spec", spec.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        stdout_json(&o)
    };
    let summary = run(&a, "1");
    run(&b, "3");
    let ra = std::fs::read(a.join("sweep_report.json")).unwrap();
    let rb = std::fs::read(b.join("sweep_report.json")).unwrap();
    assert_eq!(ra, rb);
    assert!(a.join("sweep_records.csv").exists() && a.join("rmse_vs_nmax.svg").exists());
    let cells = summary["cells"].as_array().unwrap();
    assert_eq!(cells.len(), 2);
    assert!(cells[0]["mean_rmse_rad"].as_f64().unwrap() > cells[1]["mean_rmse_rad"].as_f64().unwrap());
    let report: serde_json::Value = serde_json::from_slice(&ra).unwrap();
    assert_eq!(report["provenance"]["base_seed"], 11);
    assert_eq!(report["provenance"]["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn logo_writes_renders_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = jsp(d, &["logo", "--shears", "8x8"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = stdout_json(&out);
    assert!(summary["comparison"]["rmse"].as_f64().unwrap() < 0.2);
    for f in ["logo_phase.png", "logo_phase.svg", "logo_result.mjsi", "logo_truth.mjsi", "logo_summary.json"] {
        assert!(d.join(f).exists(), "{f} missing");
    }
    let missing = d.join("nope.png");
    assert_eq!(jsp(d, &["logo", "--image", missing.to_str().unwrap()]).status.code(), Some(2));
}
