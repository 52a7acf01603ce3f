//! End-to-end tests of the compiled binary: exit codes, report shapes,
//! and byte-level determinism.

use std::path::Path;
use std::process::{Command, Output};

fn engine() -> Command {
    Command::new(env!("CARGO_BIN_EXE_margin-engine"))
}

fn run(args: &[&str]) -> Output {
    engine().args(args).output().expect("binary runs")
}

fn stdout_text(output: &Output) -> String {
    String::from_utf8(output.stdout.clone()).expect("stdout is UTF-8")
}

fn stderr_text(output: &Output) -> String {
    String::from_utf8(output.stderr.clone()).expect("stderr is UTF-8")
}

fn parse_json(output: &Output) -> serde_json::Value {
    serde_json::from_str(&stdout_text(output)).expect("stdout parses as JSON")
}

fn write_series(path: &Path, closes: &[f64]) {
    let mut text = String::from("date,close\n");
    let start = chrono::NaiveDate::from_ymd_opt(2020, 1, 1).unwrap();
    for (i, close) in closes.iter().enumerate() {
        text.push_str(&format!(
            "{},{}\n",
            start + chrono::Duration::days(i as i64),
            close
        ));
    }
    std::fs::write(path, text).expect("series written");
}

fn synth(dir: &Path, name: &str, length: usize, seed: u64) -> String {
    let path = dir.join(name);
    let path = path.to_str().expect("temp path is UTF-8").to_string();
    let output = run(&[
        "synth",
        "--length",
        &length.to_string(),
        "--seed",
        &seed.to_string(),
        "--steps",
        "0.97:0.5,1.03:0.5",
        "--out",
        &path,
    ]);
    assert!(output.status.success(), "synth failed: {}", stderr_text(&output));
    path
}

#[test]
fn missing_required_flag_is_a_usage_error() {
    let output = run(&["cpnr", "--prices", "whatever.csv", "--w", "1.2"]);
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let output = run(&["ingest", "--prices", "whatever.csv", "--bogus"]);
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn bad_system_argument_is_a_usage_error() {
    let output = run(&[
        "backtest",
        "--prices",
        "whatever.csv",
        "--system",
        "fixed:zz,1.3",
    ]);
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn missing_file_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("absent.csv");
    let output = run(&["ingest", "--prices", path.to_str().unwrap()]);
    assert_eq!(output.status.code(), Some(1));
    assert!(stdout_text(&output).is_empty());
    let error: serde_json::Value =
        serde_json::from_str(&stderr_text(&output)).expect("stderr is an error JSON");
    assert!(error["error"].is_string());
}

#[test]
fn malformed_csv_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("broken.csv");
    std::fs::write(&path, "date,close\nnot-a-date,5.0\n").unwrap();
    let output = run(&["ingest", "--prices", path.to_str().unwrap()]);
    assert_eq!(output.status.code(), Some(1));
    let error: serde_json::Value =
        serde_json::from_str(&stderr_text(&output)).expect("stderr is an error JSON");
    assert!(error["error"].is_string());
}

#[test]
fn bad_thread_cap_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("series.csv");
    write_series(&path, &[10.0, 10.1, 10.2]);
    let output = engine()
        .env("MARGIN_ENGINE_THREADS", "abc")
        .args(["ingest", "--prices", path.to_str().unwrap()])
        .output()
        .expect("binary runs");
    assert_eq!(output.status.code(), Some(1));
    let capped = engine()
        .env("MARGIN_ENGINE_THREADS", "2")
        .args(["ingest", "--prices", path.to_str().unwrap()])
        .output()
        .expect("binary runs");
    assert!(capped.status.success());
}

#[test]
fn ingest_reports_series_shape() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("series.csv");
    write_series(&path, &[10.0, 10.5, 9.5, 10.2]);
    let output = run(&["ingest", "--prices", path.to_str().unwrap()]);
    assert!(output.status.success());
    let value = parse_json(&output);
    assert_eq!(value["rows"], 4);
    assert_eq!(value["ticker"], "series");
    assert_eq!(value["first_date"], "2020-01-01");
    assert_eq!(value["last_date"], "2020-01-04");
    assert_eq!(value["min_close"], 9.5);
    assert_eq!(value["max_close"], 10.5);
}

#[test]
fn markov_test_reports_the_screen() {
    let dir = tempfile::tempdir().unwrap();
    let path = synth(dir.path(), "series.csv", 40, 9);
    let output = run(&[
        "markov-test",
        "--prices",
        &path,
        "--depth",
        "30",
        "--group",
        "3",
    ]);
    assert!(output.status.success(), "{}", stderr_text(&output));
    let value = parse_json(&output);
    assert!(value["chi_square"].as_f64().unwrap() >= 0.0);
    let p = value["p_value"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&p));
    assert!(value["degrees_of_freedom"].as_u64().unwrap() >= 1);
}

#[test]
fn cpnr_reports_the_probabilities() {
    let dir = tempfile::tempdir().unwrap();
    let path = synth(dir.path(), "series.csv", 40, 2);
    let output = run(&[
        "cpnr", "--prices", &path, "--depth", "30", "--group", "3", "--q0", "4.0", "--w", "1.2",
        "--horizon", "5",
    ]);
    assert!(output.status.success(), "{}", stderr_text(&output));
    let value = parse_json(&output);
    let call = value["prob_call"].as_f64().unwrap();
    let survival = value["survival_product"].as_f64().unwrap();
    // Both values were rounded to six decimals on the way out.
    assert!((call + survival - 1.0).abs() < 1e-5);
    assert_eq!(value["per_day_call_probs"].as_array().unwrap().len(), 5);
    assert!(value["cpnr"].as_f64().unwrap() >= 0.0);
}

#[test]
fn margin_reports_a_deduced_system() {
    let dir = tempfile::tempdir().unwrap();
    let path = synth(dir.path(), "series.csv", 50, 5);
    let output = run(&[
        "margin", "--prices", &path, "--depth", "40", "--group", "4", "--horizon", "5",
    ]);
    assert!(output.status.success(), "{}", stderr_text(&output));
    let value = parse_json(&output);
    assert!(value["fallback"].is_boolean());
    assert!(value["initial_margin_ratio"].as_f64().unwrap() > 0.0);
    assert!(value["maintenance_ratio"].as_f64().unwrap() > 1.0);
    assert!(value["indifference_set"].is_array());
}

#[test]
fn margin_with_deposit_searches_one_ratio() {
    let dir = tempfile::tempdir().unwrap();
    let path = synth(dir.path(), "series.csv", 50, 5);
    let output = run(&[
        "margin", "--prices", &path, "--depth", "40", "--group", "4", "--horizon", "5", "--q0",
        "6.0",
    ]);
    assert!(output.status.success(), "{}", stderr_text(&output));
    let value = parse_json(&output);
    let found = value["found"].as_bool().unwrap();
    if found {
        assert!(value["maintenance_ratio"].as_f64().unwrap() > 1.0);
        assert!(value["cpnr"].as_f64().unwrap() >= 0.0);
    } else {
        assert!(value.get("maintenance_ratio").is_none());
    }
}

#[test]
fn backtest_is_byte_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let path = synth(dir.path(), "series.csv", 60, 4);
    let args = [
        "backtest",
        "--prices",
        path.as_str(),
        "--depth",
        "30",
        "--group",
        "3",
        "--horizon",
        "6",
        "--loans",
        "8",
        "--system",
        "fixed:0.5,1.3",
        "--mode",
        "default",
    ];
    let first = run(&args);
    assert!(first.status.success(), "{}", stderr_text(&first));
    let value = parse_json(&first);
    assert!(value["negative_frequency"].as_f64().unwrap() >= 0.0);
    assert_eq!(value["loan_count"], 8);
    let second = run(&args);
    assert_eq!(first.stdout, second.stdout);
}

#[test]
fn backtest_csv_uses_the_pinned_header() {
    let dir = tempfile::tempdir().unwrap();
    let path = synth(dir.path(), "series.csv", 60, 4);
    let output = run(&[
        "backtest", "--prices", &path, "--depth", "30", "--group", "3", "--horizon", "6",
        "--loans", "8", "--system", "required", "--format", "csv",
    ]);
    assert!(output.status.success(), "{}", stderr_text(&output));
    let text = stdout_text(&output);
    let header = text.lines().next().unwrap();
    assert_eq!(header, "statistic,min,max,mean,q70,q80,q90,q95");
    assert!(text.lines().count() > 1);
}

#[test]
fn dynamics_covers_the_requested_tail() {
    let dir = tempfile::tempdir().unwrap();
    let path = synth(dir.path(), "series.csv", 46, 6);
    let output = run(&[
        "dynamics", "--prices", &path, "--depth", "40", "--group", "4", "--horizon", "5",
        "--last", "5",
    ]);
    assert!(output.status.success(), "{}", stderr_text(&output));
    let value = parse_json(&output);
    let points = value.as_array().unwrap();
    assert_eq!(points.len(), 5);
    for point in points {
        assert!(point["date"].is_string());
        assert!(point["fallback"].is_boolean());
    }
}

#[test]
fn compare_reports_both_systems() {
    let dir = tempfile::tempdir().unwrap();
    let path = synth(dir.path(), "series.csv", 55, 8);
    let output = run(&[
        "compare", "--prices", &path, "--depth", "30", "--group", "3", "--horizon", "6",
        "--loans", "6",
    ]);
    assert!(output.status.success(), "{}", stderr_text(&output));
    let value = parse_json(&output);
    assert_eq!(value["deduced"]["label"], "deduced");
    assert_eq!(value["required"]["label"], "required");
    assert_eq!(value["cost_rd"].as_array().unwrap().len(), 12);
}

#[test]
fn out_flag_writes_the_report_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("series.csv");
    write_series(&path, &[10.0, 10.5, 9.5, 10.2]);
    let report = dir.path().join("report.json");
    let output = run(&[
        "ingest",
        "--prices",
        path.to_str().unwrap(),
        "--out",
        report.to_str().unwrap(),
    ]);
    assert!(output.status.success());
    assert!(stdout_text(&output).is_empty());
    let text = std::fs::read_to_string(&report).unwrap();
    let value: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(value["rows"], 4);
}

#[test]
fn synth_stdout_matches_the_written_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = synth(dir.path(), "series.csv", 25, 7);
    let streamed = run(&[
        "synth", "--length", "25", "--seed", "7", "--steps", "0.97:0.5,1.03:0.5",
    ]);
    assert!(streamed.status.success());
    let file_bytes = std::fs::read(&path).unwrap();
    assert_eq!(streamed.stdout, file_bytes);
}
