//! End-to-end tests against the built binary.

use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

use chrono::NaiveDate;
use kalman_trend::market_data::{synthesize, SynthKind};

fn bin() -> PathBuf {
    PathBuf::from(env!("CARGO_BIN_EXE_kalman-trend"))
}

fn fixture(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
        .to_str()
        .unwrap()
        .to_string()
}

fn run(args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .output()
        .expect("spawn binary")
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

#[test]
fn replay_reproduces_the_reference_ledger() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let output = run(&[
        "replay",
        "--input",
        &fixture("table7_trades.csv"),
        "--out",
        out,
    ]);
    assert!(
        output.status.success(),
        "{}",
        String::from_utf8_lossy(&output.stderr)
    );
    assert!(stdout(&output).contains("final PnL 39558.0"));

    let trades = fs::read_to_string(dir.path().join("trades.csv")).unwrap();
    let lines: Vec<&str> = trades.lines().collect();
    assert_eq!(lines.len(), 49);
    assert!(lines[20].contains("11308.5"), "trade 20: {}", lines[20]);
    assert!(dir.path().join("report.json").exists());
}

#[test]
fn backtest_is_deterministic_and_matches_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("series.csv");
    let series = synthesize(SynthKind::RandomWalk, 253, 42, 12.0).unwrap();
    fs::write(&input, series.to_csv()).unwrap();
    let input = input.to_str().unwrap().to_string();

    let inline = [
        "backtest",
        "--input",
        &input,
        "--model",
        "four",
        "--params",
        "1,0.4,1.2,1,1,0.8,0.4,0.7,1,0.4,0.5,0.9,0.5,0,5",
    ];
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    let out_c = dir.path().join("c");
    for (args, out) in [
        (inline.as_slice(), &out_a),
        (inline.as_slice(), &out_b),
        (
            [
                "backtest",
                "--input",
                &input,
                "--model",
                &fixture("model4.json"),
            ]
            .as_slice(),
            &out_c,
        ),
    ] {
        let mut full: Vec<&str> = args.to_vec();
        let out = out.to_str().unwrap();
        full.extend_from_slice(&["--out", out]);
        let output = run(&full);
        assert!(
            output.status.success(),
            "{}",
            String::from_utf8_lossy(&output.stderr)
        );
    }
    let trades_a = fs::read(out_a.join("trades.csv")).unwrap();
    let trades_b = fs::read(out_b.join("trades.csv")).unwrap();
    let trades_c = fs::read(out_c.join("trades.csv")).unwrap();
    assert_eq!(trades_a, trades_b);
    assert_eq!(trades_a, trades_c);
    let report_a = fs::read(out_a.join("report.json")).unwrap();
    let report_b = fs::read(out_b.join("report.json")).unwrap();
    assert_eq!(report_a, report_b);
}

#[test]
fn huge_offset_leaves_empty_ledger_and_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("series.csv");
    fs::write(
        &input,
        synthesize(SynthKind::RandomWalk, 80, 7, 8.0)
            .unwrap()
            .to_csv(),
    )
    .unwrap();
    let out = dir.path().join("out");
    let output = run(&[
        "backtest",
        "--input",
        input.to_str().unwrap(),
        "--model",
        "one",
        "--params",
        "5,5,45,10",
        "--offset",
        "1000000000",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(2));
    let trades = fs::read_to_string(out.join("trades.csv")).unwrap();
    assert_eq!(trades.lines().count(), 1, "header only");
    assert!(out.join("equity.csv").exists());
    assert!(!out.join("report.json").exists());
}

#[test]
fn smooth_dema_keeps_constants_constant() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("flat.csv");
    let mut csv = String::from("date,open,high,low,close\n");
    let mut date = NaiveDate::from_ymd_opt(2015, 3, 2).unwrap();
    for _ in 0..80 {
        csv.push_str(&format!("{date},1500,1500,1500,1500\n"));
        date = date.succ_opt().unwrap();
    }
    fs::write(&input, csv).unwrap();

    let out = dir.path().join("out");
    let output = run(&[
        "smooth",
        "--input",
        input.to_str().unwrap(),
        "--indicator",
        "dema",
        "--period",
        "3",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(
        output.status.success(),
        "{}",
        String::from_utf8_lossy(&output.stderr)
    );
    let overlay = fs::read_to_string(out.join("overlay.csv")).unwrap();
    for line in overlay.lines().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields[2], "1500.00", "{line}");
    }
}

#[test]
fn smooth_kf1_emits_distinct_filter_columns() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let output = run(&[
        "smooth",
        "--input",
        &fixture("synthetic_daily.csv"),
        "--indicator",
        "kf1",
        "--params",
        "5,5,45,10",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(
        output.status.success(),
        "{}",
        String::from_utf8_lossy(&output.stderr)
    );
    let overlay = fs::read_to_string(out.join("overlay.csv")).unwrap();
    let mut live_rows = 0usize;
    let mut differing = 0usize;
    for line in overlay.lines().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        if fields[5] == "false" {
            live_rows += 1;
            if fields[3] != fields[4] {
                differing += 1;
            }
        }
    }
    assert!(live_rows > 200);
    assert!(differing > 0, "prediction and correction never differed");
}

#[test]
fn optimize_budget_one_is_a_single_deterministic_point() {
    let dir = tempfile::tempdir().unwrap();
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    for out in [&out_a, &out_b] {
        let output = run(&[
            "optimize",
            "--input",
            &fixture("synthetic_daily.csv"),
            "--space",
            &fixture("space_model1.json"),
            "--budget",
            "1",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(
            output.status.success(),
            "{}",
            String::from_utf8_lossy(&output.stderr)
        );
    }
    let trace = fs::read_to_string(out_a.join("trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 2, "header plus one evaluation");
    assert_eq!(
        fs::read(out_a.join("result.json")).unwrap(),
        fs::read(out_b.join("result.json")).unwrap()
    );
}

#[test]
fn trace_rows_match_reported_evaluations() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let output = run(&[
        "optimize",
        "--input",
        &fixture("synthetic_daily.csv"),
        "--space",
        &fixture("space_model1.json"),
        "--budget",
        "97",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(output.status.success());
    let result: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("result.json")).unwrap()).unwrap();
    let evaluations = result["evaluations"].as_u64().unwrap() as usize;
    assert_eq!(evaluations, 97);
    let trace = fs::read_to_string(out.join("trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), evaluations + 1);
}

#[test]
fn corrupt_input_fails_without_leaving_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("bad.csv");
    fs::write(
        &input,
        "date,open,high,low,close\n2015-03-02,2000,1990,2010,2000\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    let output = run(&[
        "backtest",
        "--input",
        input.to_str().unwrap(),
        "--model",
        "one",
        "--params",
        "5,5,45,10",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&output.stderr).contains("line 2"));
    if out.exists() {
        assert_eq!(fs::read_dir(&out).unwrap().count(), 0);
    }
}
