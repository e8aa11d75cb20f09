//! End-to-end runs of the `dcmm` binary: exit codes, artifact layout,
//! and the simulate → fit → forecast → evaluate round trip.

use std::path::Path;
use std::process::Command;

fn dcmm(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_dcmm")).args(args).output().expect("binary runs")
}

fn write_json(path: &Path, value: &serde_json::Value) {
    std::fs::write(path, serde_json::to_string_pretty(value).unwrap()).unwrap();
}

#[test]
fn full_pipeline_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dir.path().join("sim.json");
    write_json(&sim, &serde_json::json!({"n_series": 3, "days": 40, "seed": 21}));
    let out = dcmm(&["simulate", "--config", sim.to_str().unwrap(), "--out-dir", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let data = dir.path().join("data.csv");

    // hold out the last 3 days so forecasts can be scored
    let full = std::fs::read_to_string(&data).unwrap();
    let train = dir.path().join("train.csv");
    let kept: Vec<&str> = full
        .lines()
        .filter(|l| {
            l.starts_with("series_id") || l.split(',').nth(1).map_or(false, |d| d < "2024-02-07")
        })
        .collect();
    std::fs::write(&train, kept.join("\n") + "\n").unwrap();

    let cfg = dir.path().join("config.json");
    write_json(
        &cfg,
        &serde_json::json!({"rho_grid": [1.0], "horizon": 3, "samples": 1000, "seed": 21}),
    );
    let fit_out = dir.path().join("fit");
    let out = dcmm(&[
        "fit", "--data", train.to_str().unwrap(), "--config", cfg.to_str().unwrap(),
        "--out-dir", fit_out.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(fit_out.join("checkpoint.json").exists());
    assert!(fit_out.join("timings.csv").exists());

    let fc_out = dir.path().join("fc");
    let out = dcmm(&[
        "forecast", "--checkpoint", fit_out.join("checkpoint.json").to_str().unwrap(),
        "--config", cfg.to_str().unwrap(), "--out-dir", fc_out.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(fc_out.join("samples.csv").exists());
    assert!(fc_out.join("summary.csv").exists());

    let ev_out = dir.path().join("ev");
    let out = dcmm(&[
        "evaluate", "--data", data.to_str().unwrap(), "--config", cfg.to_str().unwrap(),
        "--forecast", fc_out.join("samples.csv").to_str().unwrap(),
        "--out-dir", ev_out.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["metrics.csv", "coverage.csv", "pit.csv", "pit_tests.csv", "calibration.csv", "best_rho.csv"] {
        assert!(ev_out.join(f).exists(), "missing {f}");
    }
}

#[test]
fn input_problems_exit_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    // missing file
    let out = dcmm(&["fit", "--data", dir.path().join("nope.csv").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));

    // bad header
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "id,when,n\na,2024-01-01,1\n").unwrap();
    let out = dcmm(&["fit", "--data", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));

    // invalid configuration
    let data = dir.path().join("data.csv");
    std::fs::write(&data, "series_id,date,count\na,2024-01-01,1\na,2024-01-02,2\n").unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"horizon": 0}"#).unwrap();
    let out = dcmm(&["fit", "--data", data.to_str().unwrap(), "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));

    // forecast without the covariate future it needs
    let cov_data = dir.path().join("cov.csv");
    std::fs::write(
        &cov_data,
        "series_id,date,count,price\na,2024-01-01,1,1.0\na,2024-01-02,2,1.5\n",
    )
    .unwrap();
    let fit_out = dir.path().join("fit");
    let out = dcmm(&["fit", "--data", cov_data.to_str().unwrap(), "--out-dir", fit_out.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = dcmm(&[
        "forecast", "--checkpoint", fit_out.join("checkpoint.json").to_str().unwrap(),
        "--out-dir", dir.path().join("fc").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn corrupt_series_is_isolated_not_fatal() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.csv");
    std::fs::write(
        &data,
        "series_id,date,count\n\
         a,2024-01-01,1\na,2024-01-02,zzz\n\
         b,2024-01-01,2\nb,2024-01-02,3\n",
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out = dcmm(&["fit", "--data", data.to_str().unwrap(), "--out-dir", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest = std::fs::read_to_string(out_dir.join("failures.json")).unwrap();
    assert!(manifest.contains("\"a\""), "{manifest}");
    let ck = std::fs::read_to_string(out_dir.join("checkpoint.json")).unwrap();
    assert!(ck.contains("\"b\"") && !ck.contains("\"a\":"), "series a leaked into checkpoint");
}
