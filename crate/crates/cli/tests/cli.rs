use std::process::{Command, Output};

use serde_json::Value;

fn lfqkd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lfqkd"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn json(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn rate_examples() {
    let v = json(&lfqkd(&[
        "rate",
        "--model",
        "single-photon",
        "--eta",
        "1",
        "--ed",
        "0",
    ]));
    assert_eq!(v["rate"].as_f64(), Some(1.0));

    let v = json(&lfqkd(&[
        "rate",
        "--model",
        "single-photon",
        "--eta",
        "0.5",
        "--ed",
        "0",
    ]));
    assert_eq!(v["rate"].as_f64(), Some(0.0));
    assert_eq!(v["operational_rate"].as_f64(), Some(0.0));

    let v = json(&lfqkd(&[
        "rate",
        "--model",
        "coherent-memory",
        "--eta-m",
        "1",
        "--ed",
        "0",
    ]));
    assert!((v["rate"].as_f64().unwrap() - 0.608_048_249_966_929_6).abs() < 1e-12);
}

#[test]
fn raw_and_operational_rates_differ_below_floor() {
    let v = json(&lfqkd(&[
        "rate",
        "--model",
        "single-photon",
        "--eta",
        "0.4",
        "--ed",
        "0.05",
    ]));
    assert!(v["rate"].as_f64().unwrap() < 0.0);
    assert_eq!(v["operational_rate"].as_f64(), Some(0.0));
}

#[test]
fn threshold_csv_ends_at_full_transmission() {
    let out = lfqkd(&["threshold", "--model", "single-photon"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("model,eta,e_d_max"));
    let last = text.lines().last().unwrap();
    let fields: Vec<&str> = last.split(',').collect();
    assert_eq!(fields[0], "single-photon");
    assert_eq!(fields[1], "1.000000000");
    let ed: f64 = fields[2].parse().unwrap();
    assert!((ed - 0.110).abs() < 1e-3);
}

#[test]
fn threshold_all_emits_four_curves() {
    let out = lfqkd(&["threshold", "--step", "0.05"]);
    let text = stdout(&out);
    for tag in [
        "single-photon,",
        "coherent,",
        "coherent-memory,",
        "memory-basis-independent,",
    ] {
        assert!(text.lines().any(|l| l.starts_with(tag)), "missing {tag}");
    }
}

#[test]
fn empty_curve_exits_3() {
    let out = lfqkd(&[
        "threshold",
        "--model",
        "coherent",
        "--eta-min",
        "0.3",
        "--eta-max",
        "0.5",
        "--step",
        "0.05",
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn invalid_parameters_exit_2() {
    for args in [
        &[
            "rate",
            "--model",
            "single-photon",
            "--eta",
            "1.5",
            "--ed",
            "0",
        ][..],
        &[
            "rate", "--model", "coherent", "--eta", "0.9", "--ed", "0", "--mu", "-1",
        ],
        &["rate", "--model", "single-photon", "--ed", "0"],
        &["threshold", "--step", "0"],
        &["simulate", "--model", "all", "--eta", "0.9", "--ed", "0"],
        &[
            "compare",
            "--model",
            "single-photon",
            "--eta",
            "0.9",
            "--ed",
            "0",
            "--adversary",
            "time-shift",
        ],
        &["rate", "--config", "/nonexistent/lfqkd.json"],
        &["rate", "--model", "quantum"],
    ] {
        assert_eq!(lfqkd(args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn degenerate_simulation_exits_4() {
    let out = lfqkd(&[
        "simulate",
        "--model",
        "single-photon",
        "--eta",
        "0",
        "--ed",
        "0",
        "--n-pulses",
        "1000",
    ]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn simulate_json_fields() {
    let v = json(&lfqkd(&[
        "simulate",
        "--model",
        "coherent",
        "--eta",
        "0.8",
        "--ed",
        "0.02",
        "--n-pulses",
        "50000",
        "--seed",
        "3",
        "--adversary",
        "strong-pulse",
        "--n-photons",
        "2",
    ]));
    let obj = v.as_object().unwrap();
    assert_eq!(obj.len(), 11);
    assert_eq!(v["scenario"], "strong_pulse");
    assert_eq!(v["model"], "coherent");
    assert_eq!(v["seed"], 3);
    let total = v["n_single"].as_u64().unwrap()
        + v["n_double"].as_u64().unwrap()
        + v["n_none"].as_u64().unwrap();
    assert_eq!(total, v["n_pulses"].as_u64().unwrap());
}

#[test]
fn compare_reports_pass() {
    let v = json(&lfqkd(&[
        "compare",
        "--model",
        "single-photon",
        "--eta",
        "0.8",
        "--ed",
        "0.02",
        "--n-pulses",
        "200000",
        "--seed",
        "11",
    ]));
    assert_eq!(v["model"], "single-photon");
    assert!(v["q_s"]["z_score"].is_number());
    assert!(v["pass"].is_boolean());
}

#[test]
fn config_file_merged_with_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(
        &cfg,
        r#"{"model": "single-photon", "eta": 0.5, "ed": 0.0, "format": "csv"}"#,
    )
    .unwrap();
    let out = lfqkd(&["rate", "--config", cfg.to_str().unwrap(), "--eta", "1"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let row = text.lines().nth(1).unwrap();
    assert!(row.starts_with("single-photon,1.000000000,"), "{row}");
}

#[test]
fn csv_and_json_threshold_agree() {
    let dir = tempfile::tempdir().unwrap();
    let csv_path = dir.path().join("curve.csv");
    let json_path = dir.path().join("curve.json");
    let base = ["threshold", "--model", "coherent", "--step", "0.05"];
    for (path, fmt) in [(&csv_path, "csv"), (&json_path, "json")] {
        let mut args = base.to_vec();
        args.extend(["--format", fmt, "--out", path.to_str().unwrap()]);
        let out = lfqkd(&args);
        assert!(out.status.success());
        assert!(out.stdout.is_empty());
    }
    let csv = std::fs::read_to_string(&csv_path).unwrap();
    let js: Value = serde_json::from_str(&std::fs::read_to_string(&json_path).unwrap()).unwrap();
    let points = js[0]["points"].as_array().unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), points.len());
    for (row, p) in rows.iter().zip(points) {
        let f: Vec<&str> = row.split(',').collect();
        assert_eq!(f[0], js[0]["model"].as_str().unwrap());
        let eta: f64 = f[1].parse().unwrap();
        let ed: f64 = f[2].parse().unwrap();
        assert!((eta - p["eta"].as_f64().unwrap()).abs() <= 5e-10);
        assert!((ed - p["e_d_max"].as_f64().unwrap()).abs() <= 5e-10);
    }
}

#[test]
fn reruns_are_byte_identical() {
    let args = [
        "simulate",
        "--model",
        "coherent-memory",
        "--eta-m",
        "0.7",
        "--ed",
        "0.03",
        "--n-pulses",
        "100000",
        "--seed",
        "5",
    ];
    let a = lfqkd(&args);
    let b = lfqkd(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}
