use std::fs;

use ndarray::Array2;
use stibpalm::harness::io::{load_matrix, load_pgm, save_matrix, save_pgm, MatrixFormat};
use stibpalm::harness::report::METRICS_HEADER;
use stibpalm::harness::synthetic::planted_snmf;
use stibpalm::harness::{emit_report, run_experiment, summarize, ExperimentConfig, RunStatus};

#[test]
fn config_with_relative_matrix_path_runs_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let planted = planted_snmf(24, 18, 4, 0.25, 0.01, 9).unwrap();
    save_matrix(&dir.path().join("a.mtxb"), &planted.a, MatrixFormat::Bin).unwrap();
    let cfg_path = dir.path().join("exp.json");
    fs::write(
        &cfg_path,
        r#"{
            "problem": {"snmf": {"path": "a.mtxb", "rank": 4}},
            "algorithms": [{"preset": "PALM"}, {"preset": "SPRING", "safety_factor": 8}],
            "epochs": 3,
            "seeds": [0, 1],
            "batch_fraction": 0.25,
            "output_dir": "out"
        }"#,
    )
    .unwrap();
    let cfg = ExperimentConfig::load(&cfg_path, false).unwrap();
    let runs = run_experiment(&cfg).unwrap();
    assert_eq!(runs.len(), 4);
    assert!(runs.iter().all(|r| r.status == RunStatus::Completed), "{:?}", runs.iter().map(|r| &r.status).collect::<Vec<_>>());

    let files = emit_report(&runs, &cfg.output_dir, cfg.log_y).unwrap();
    assert!(files.metrics.starts_with(dir.path()));
    let csv = fs::read_to_string(&files.metrics).unwrap();
    assert_eq!(csv.lines().next().unwrap(), METRICS_HEADER.join(","));
    let rows: usize = runs.iter().map(|r| r.records.len()).sum();
    assert_eq!(csv.lines().count(), rows + 1);

    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(&files.summary).unwrap()).unwrap();
    let algs = summary["algorithms"].as_array().unwrap();
    assert_eq!(algs.len(), 2);
    assert_eq!(algs[0]["algorithm"], "PALM");
    assert_eq!(summarize(&runs).algorithms[1].runs, 2);
    for svg in [&files.plot_epoch, &files.plot_time] {
        assert!(fs::read_to_string(svg).unwrap().starts_with("<svg"));
    }
}

#[test]
fn strict_loading_rejects_unknown_keys() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    fs::write(
        &path,
        r#"{"problem": {"synthetic": {"rows": 10, "cols": 8, "rank": 2}},
            "algorithms": [{"preset": "PALM"}], "epochs": 1, "seeds": [0], "sede": 3}"#,
    )
    .unwrap();
    assert!(ExperimentConfig::load(&path, false).is_ok());
    let e = ExperimentConfig::load(&path, true).unwrap_err().to_string();
    assert!(e.contains("sede"), "{e}");
}

#[test]
fn csv_and_binary_files_agree() {
    let dir = tempfile::tempdir().unwrap();
    let m = Array2::from_shape_fn((5, 7), |(i, j)| (i as f64 - 2.5) * 0.1 + j as f64 / 3.0);
    let (c, b) = (dir.path().join("m.csv"), dir.path().join("m.bin"));
    save_matrix(&c, &m, MatrixFormat::Csv).unwrap();
    save_matrix(&b, &m, MatrixFormat::Bin).unwrap();
    assert_eq!(load_matrix(&c, MatrixFormat::Csv).unwrap(), m);
    assert_eq!(load_matrix(&b, MatrixFormat::Bin).unwrap(), m);
    assert_eq!(fs::metadata(&b).unwrap().len(), 12 + 8 * 35);
}

#[test]
fn pgm_round_trip_is_quantized() {
    let dir = tempfile::tempdir().unwrap();
    let img = Array2::from_shape_fn((6, 9), |(i, j)| ((i * 9 + j) % 11) as f64 / 10.0);
    let p = dir.path().join("img.pgm");
    save_pgm(&p, &img).unwrap();
    let back = load_pgm(&p).unwrap();
    assert_eq!(back.dim(), img.dim());
    assert!(back.iter().zip(&img).all(|(a, b)| (a - b).abs() <= 0.5 / 255.0 + 1e-12));
}
