use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn csa(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_csa"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn stdout_json(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).unwrap()
}

/// Data rows of a CSV, after the hash comment and header.
fn csv_rows(text: &str) -> Vec<Vec<String>> {
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# config-hash sha256:"));
    lines.next().unwrap();
    lines
        .map(|l| l.split(',').map(String::from).collect())
        .collect()
}

const IRSA_THIRD: &str = r#"[{"type":"rep","n":2,"p":0.554016},{"type":"rep","n":3,"p":0.261312},
    {"type":"rep","n":6,"p":0.184672}]"#;

#[test]
fn threshold_of_reference_distributions() {
    let dir = tempfile::tempdir().unwrap();
    let third = write(dir.path(), "third.json", IRSA_THIRD);
    let v = stdout_json(&csa(&["threshold", "--config", &third]));
    assert!((v["G_star"].as_f64().unwrap() - 0.8792).abs() < 1e-3);
    assert!(v["probes"].as_array().unwrap().len() > 5);

    let single = write(
        dir.path(),
        "single.json",
        r#"{"entries":[{"type":"rep","n":2,"p":1.0}]}"#,
    );
    let v = stdout_json(&csa(&[
        "threshold",
        "--config",
        &single,
        "--tolerance",
        "1e-3",
    ]));
    assert!((v["G_star"].as_f64().unwrap() - 0.5).abs() < 1e-3);
    assert_eq!(v["tolerance"], 0.001);
}

#[test]
fn malformed_input_exits_with_config_status() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.json", "{not json");
    let out = csa(&["threshold", "--config", &bad]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad.json"));

    let missing = dir.path().join("absent.json");
    assert_eq!(
        csa(&["threshold", "--config", missing.to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );

    let inadmissible = write(
        dir.path(),
        "g.json",
        r#"[{"type":"explicit","G":"1000,0111","p":1}]"#,
    );
    assert_eq!(
        csa(&["stability", "--config", &inadmissible]).status.code(),
        Some(2)
    );
}

#[test]
fn bound_grid_and_row_errors() {
    let out = csa(&["bound", "--rates", "1/3,2/5,1/2,3/5,1.0"]);
    assert!(out.status.success());
    let rows = csv_rows(&String::from_utf8(out.stdout).unwrap());
    let expected = [0.9405, 0.8926, 0.7968, 0.6758, 0.0];
    for (row, e) in rows.iter().zip(expected) {
        assert!((row[1].parse::<f64>().unwrap() - e).abs() < 1e-4, "{row:?}");
    }

    let out = csa(&["bound", "--rates", "0.5,1.2"]);
    assert_ne!(out.status.code(), Some(0));
    let rows = csv_rows(&String::from_utf8(out.stdout).unwrap());
    assert_eq!(rows.len(), 2);
    assert!(rows[1][1].is_empty() && !rows[1][2].is_empty());
}

#[test]
fn stability_reports_bound_and_slope() {
    let dir = tempfile::tempdir().unwrap();
    let third = write(dir.path(), "third.json", IRSA_THIRD);
    let v = stdout_json(&csa(&["stability", "--config", &third, "--load", "0.5"]));
    assert!((v["stability_bound"].as_f64().unwrap() - 0.9025).abs() < 1e-4);
    let slope = v["derivative_at_zero"].as_f64().unwrap();
    assert!((slope - v["derivative_expected"].as_f64().unwrap()).abs() < 1e-5);

    let rep3 = write(dir.path(), "rep3.json", r#"[{"type":"rep","n":3,"p":1}]"#);
    assert!(stdout_json(&csa(&["stability", "--config", &rep3]))["stability_bound"].is_null());
}

#[test]
fn exit_chart_files_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let third = write(dir.path(), "third.json", IRSA_THIRD);
    let out_dir = dir.path().join("out");
    let out = csa(&[
        "exit-chart",
        "--config",
        &third,
        "--load",
        "0.8",
        "--samples",
        "51",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let rows = csv_rows(&fs::read_to_string(out_dir.join("exit_chart.csv")).unwrap());
    assert!(!rows.is_empty() && rows.len() <= 51);
    let summary: Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("exit_chart.json")).unwrap())
            .unwrap();
    assert!((summary["area_burst"].as_f64().unwrap() - 1.0 / 3.0).abs() < 1e-4);
    assert_eq!(summary["tunnel_open"], true);
    let meta: Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("exit-chart.meta.json")).unwrap())
            .unwrap();
    assert!(meta["unix_time"].as_u64().is_some());
}

#[test]
fn simulate_is_reproducible_across_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(
        dir.path(),
        "campaign.json",
        r#"{"M": 40, "distribution": [{"type":"rep","n":2,"p":0.5},{"type":"rep","n":3,"p":0.5}],
            "mode": "bernoulli", "N": 1000, "loads": [0.3, 0.7], "frames_per_point": 50,
            "decoder": "both", "seed": 11}"#,
    );
    let run = |workers: &str, name: &str| {
        let out_dir = dir.path().join(name);
        let out = csa(&[
            "simulate",
            "--config",
            &config,
            "--workers",
            workers,
            "--out",
            out_dir.to_str().unwrap(),
        ]);
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        (
            fs::read(out_dir.join("simulate.csv")).unwrap(),
            fs::read(out_dir.join("simulate.json")).unwrap(),
        )
    };
    let one = run("1", "a");
    let four = run("4", "b");
    assert_eq!(one, four);
    let rows = csv_rows(std::str::from_utf8(&one.0).unwrap());
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[0][0], "sic");
    assert_eq!(rows[1][0], "genie");

    let reseeded = dir.path().join("c");
    csa(&[
        "simulate",
        "--config",
        &config,
        "--seed",
        "12",
        "--out",
        reseeded.to_str().unwrap(),
    ]);
    assert_ne!(fs::read(reseeded.join("simulate.json")).unwrap(), one.1);
}

#[test]
fn optimize_writes_result_and_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let problem = write(
        dir.path(),
        "problem.json",
        r#"{"candidates":[{"type":"rep","n":2},{"type":"rep","n":3},{"type":"rep","n":4}],"rate":0.4,
            "hyperparameters":{"population":8,"generations":5}}"#,
    );
    let out_dir = dir.path().join("out");
    let out = csa(&[
        "optimize",
        "--config",
        &problem,
        "--seed",
        "2",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let result: Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("optimize.json")).unwrap()).unwrap();
    assert!((result["rate"].as_f64().unwrap() - 0.4).abs() < 1e-5);
    assert!(result["threshold"].as_f64().unwrap() > 0.7);
    let rows = csv_rows(&fs::read_to_string(out_dir.join("trajectory.csv")).unwrap());
    assert_eq!(rows.len(), 6);
}

#[test]
fn ensemble_dump() {
    let v = stdout_json(&csa(&["ensemble", "--n", "3", "--k", "2"]));
    assert_eq!(v["exact"], true);
    let info: Vec<f64> = v["expected_information"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_f64().unwrap())
        .collect();
    assert_eq!(info, vec![0.0, 3.0, 6.0, 2.0]);

    let v = stdout_json(&csa(&[
        "ensemble",
        "--n",
        "12",
        "--k",
        "2",
        "--samples",
        "2000",
        "--seed",
        "5",
    ]));
    assert_eq!(v["exact"], false);
    assert!(v["information_std_err"].is_array());

    let dir = tempfile::tempdir().unwrap();
    let request = write(dir.path(), "e.json", r#"{"n": 4, "k": 2}"#);
    let v = stdout_json(&csa(&["ensemble", "--config", &request]));
    assert!((v["expected_weight2"].as_f64().unwrap() - 4.0 / 3.0).abs() < 1e-5);
}
