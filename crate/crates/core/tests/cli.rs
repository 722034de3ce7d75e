mod common;

use std::process::Command;

use bicausal::cli::{
    run, CliOutput, EXIT_INPUT, EXIT_NOT_CONVERGED, EXIT_OK, EXIT_UNDEFINED, EXIT_VERIFY_FAILED,
};
use common::data_file;
use serde_json::Value;

fn cli(args: &[&str]) -> CliOutput {
    run(std::iter::once("bicausal").chain(args.iter().copied()))
}

fn json(args: &[&str]) -> Value {
    let out = cli(args);
    assert_eq!(out.code, EXIT_OK, "stderr: {}", out.stderr);
    serde_json::from_str(&out.stdout).expect("a single JSON document")
}

fn scratch(name: &str) -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("bicausal-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn write(path: &std::path::Path, text: &str) -> String {
    std::fs::write(path, text).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn solve_two_state() {
    let out = cli(&["solve", &data_file("two_state.json")]);
    assert_eq!(out.code, EXIT_OK);
    assert!(
        out.stdout.contains("W_bc(0, 1) = 3.333333"),
        "{}",
        out.stdout
    );
    assert!(out.stdout.contains("converged: true"));

    let doc = json(&["solve", &data_file("two_state.json"), "--json"]);
    assert!((doc["value"].as_f64().unwrap() - 10.0 / 3.0).abs() < 1e-6);
    assert_eq!(doc["converged"], Value::Bool(true));
    assert_eq!(doc["flags"]["regime"], "undiscounted");
    assert_eq!(doc["coupling"]["0"]["1"][0][1].as_f64().unwrap(), 0.7);
}

#[test]
fn solve_same_start_is_zero() {
    let out = cli(&["solve", &data_file("same_start.json")]);
    assert_eq!(out.code, EXIT_OK);
    assert!(
        out.stdout.contains("W_bc(1, 1) = 0.000000"),
        "{}",
        out.stdout
    );
}

#[test]
fn solve_periodic_does_not_converge() {
    let out = cli(&["solve", &data_file("periodic.json"), "--max-iter", "500"]);
    assert_eq!(out.code, EXIT_NOT_CONVERGED);
    assert!(out.stdout.contains("converged: false"));
}

#[test]
fn input_errors_exit_2() {
    let out = cli(&["solve", &data_file("bad_row_sum.json")]);
    assert_eq!(out.code, EXIT_INPUT);
    assert!(out.stderr.contains("row 1"), "{}", out.stderr);

    let out = cli(&["solve", "/nonexistent/problem.json"]);
    assert_eq!(out.code, EXIT_INPUT);

    let broken = scratch("broken.json");
    let out = cli(&[
        "solve",
        &write(
            &broken,
            "{\n  \"states\": [\"0\", \"1\"],\n  \"P\": [[1.0, 0.0]\n",
        ),
    ]);
    assert_eq!(out.code, EXIT_INPUT);
    assert!(out.stderr.contains("line"), "{}", out.stderr);

    let unknown = scratch("unknown.json");
    let text = r#"{"states": ["a", "b"], "P": [[1, 0], [0, 1]], "x0": "a", "x0_prime": "c"}"#;
    let out = cli(&["solve", &write(&unknown, text)]);
    assert_eq!(out.code, EXIT_INPUT);
    assert!(out.stderr.contains("x0_prime"), "{}", out.stderr);

    let extra = scratch("extra.json");
    let text = r#"{"states": ["a"], "P": [[1]], "x0": "a", "x0_prime": "a", "gamma": 2}"#;
    assert_eq!(cli(&["solve", &write(&extra, text)]).code, EXIT_INPUT);

    let negative = scratch("negative_cost.json");
    let text = r#"{"states": ["a", "b"], "P": [[0.5, 0.5], [0.5, 0.5]], "x0": "a", "x0_prime": "b",
                   "cost": [[0, 1], [-1, 0]]}"#;
    let out = cli(&["solve", &write(&negative, text)]);
    assert_eq!(out.code, EXIT_INPUT);
    assert!(out.stderr.contains("row 1"), "{}", out.stderr);

    assert_eq!(cli(&["solve"]).code, EXIT_INPUT);
    assert_eq!(cli(&["frobnicate"]).code, EXIT_INPUT);
    assert_eq!(
        cli(&["couple", &data_file("two_state.json"), "--kind", "greedy"]).code,
        EXIT_INPUT
    );
}

#[test]
fn couple_policy_values() {
    let two = data_file("two_state.json");
    let out = cli(&["couple", &two, "--kind", "wasserstein"]);
    assert_eq!(out.code, EXIT_OK);
    assert!(
        out.stdout.contains("policy value at (0, 1) = 3.333333"),
        "{}",
        out.stdout
    );
    let out = cli(&["couple", &two, "--kind", "classic"]);
    assert!(
        out.stdout.contains("policy value at (0, 1) = 3.846154"),
        "{}",
        out.stdout
    );

    let classic = json(&["couple", &two, "--kind", "classic", "--json"]);
    assert_eq!(classic["valid"], Value::Bool(true));
    assert_eq!(classic["sticky"], Value::Bool(true));
    let independent = json(&["couple", &two, "--kind", "independent", "--json"]);
    assert_eq!(independent["sticky"], Value::Bool(false));
    assert_eq!(independent["value"], "inf");
}

#[test]
fn optimal_equals_wasserstein_on_two_state() {
    let two = data_file("two_state.json");
    let optimal = json(&["couple", &two, "--kind", "optimal", "--json"]);
    let wasserstein = json(&["couple", &two, "--kind", "wasserstein", "--json"]);
    for x in ["0", "1"] {
        for y in ["0", "1"] {
            for i in 0..2 {
                for j in 0..2 {
                    let a = optimal["coupling"][x][y][i][j].as_f64().unwrap();
                    let b = wasserstein["coupling"][x][y][i][j].as_f64().unwrap();
                    assert!((a - b).abs() < 1e-9, "({x},{y}) [{i}][{j}]: {a} vs {b}");
                }
            }
        }
    }
}

#[test]
fn classic_needs_one_kernel() {
    let out = cli(&[
        "couple",
        &data_file("three_state_pair.json"),
        "--kind",
        "classic",
    ]);
    assert_eq!(out.code, EXIT_INPUT);
    let out = cli(&[
        "couple",
        &data_file("three_state_pair.json"),
        "--kind",
        "wasserstein",
        "--json",
    ]);
    assert_eq!(out.code, EXIT_OK);
}

#[test]
fn noncausal_reports() {
    let doc = json(&["noncausal", &data_file("two_state.json"), "--json"]);
    assert!((doc["value"].as_f64().unwrap() - 10.0 / 3.0).abs() < 1e-6);
    assert_eq!(doc["closed_forms"]["w_formula_caveat"], Value::Bool(true));

    assert_eq!(
        cli(&["noncausal", &data_file("periodic.json")]).code,
        EXIT_UNDEFINED
    );
    let same = json(&["noncausal", &data_file("same_start.json"), "--json"]);
    assert_eq!(same["value"].as_f64().unwrap(), 0.0);
    assert_eq!(
        cli(&["noncausal", &data_file("three_state_pair.json")]).code,
        EXIT_INPUT
    );
}

#[test]
fn bound_reports() {
    let two = data_file("two_state.json");
    let doeblin = json(&[
        "bound", &two, "--n", "100", "--t", "20", "--proxy", "doeblin", "--json",
    ]);
    let dp = json(&[
        "bound", &two, "--n", "100", "--t", "20", "--proxy", "dp", "--json",
    ]);
    let b = doeblin["bound"].as_f64().unwrap();
    assert!((b - 2.0 * (-0.72f64).exp()).abs() < 1e-12);
    assert!((dp["bound"].as_f64().unwrap() - b).abs() < 1e-6);
    assert!((dp["proxy"].as_f64().unwrap() - doeblin["proxy"].as_f64().unwrap()).abs() < 1e-8);

    let out = cli(&[
        "bound", &two, "--n", "100", "--t", "0.0", "--proxy", "doeblin",
    ]);
    assert_eq!(out.code, EXIT_INPUT);
    for proxy in ["doeblin", "series", "dp"] {
        let out = cli(&[
            "bound",
            &data_file("periodic.json"),
            "--n",
            "10",
            "--t",
            "1",
            "--proxy",
            proxy,
        ]);
        assert_eq!(out.code, EXIT_UNDEFINED, "{proxy}: {}", out.stderr);
    }
    let out = cli(&[
        "bound",
        &data_file("two_state_discounted.json"),
        "--n",
        "10",
        "--t",
        "1",
        "--proxy",
        "dp",
    ]);
    assert_eq!(out.code, EXIT_INPUT);
}

#[test]
fn simulate_is_reproducible() {
    let two = data_file("two_state.json");
    let args = [
        "simulate",
        two.as_str(),
        "--kind",
        "wasserstein",
        "--samples",
        "20000",
        "--seed",
        "42",
        "--json",
    ];
    let a = cli(&args);
    let b = cli(&args);
    assert_eq!(a, b);
    let doc: Value = serde_json::from_str(&a.stdout).unwrap();
    let mean = doc["mean"].as_f64().unwrap();
    let se = doc["std_error"].as_f64().unwrap();
    assert!((mean - 10.0 / 3.0).abs() <= 3.0 * se, "{mean} ± {se}");

    let threaded: Vec<&str> = args.iter().copied().chain(["--threads", "3"]).collect();
    assert_eq!(cli(&threaded).stdout, a.stdout);

    let same = json(&[
        "simulate",
        &data_file("same_start.json"),
        "--kind",
        "classic",
        "--samples",
        "100",
        "--json",
    ]);
    assert_eq!(same["mean"].as_f64().unwrap(), 0.0);
    assert_eq!(
        cli(&["simulate", &two, "--kind", "optimal", "--samples", "0"]).code,
        EXIT_INPUT
    );
}

#[test]
fn solve_then_verify_round_trip() {
    for name in [
        "two_state.json",
        "two_state_discounted.json",
        "three_state_pair.json",
    ] {
        let problem = data_file(name);
        let out = cli(&["solve", &problem, "--json"]);
        assert_eq!(out.code, EXIT_OK);
        let report = scratch(&format!("report-{name}"));
        let report = write(&report, &out.stdout);
        let verified = cli(&["verify", &problem, &report, &report]);
        assert_eq!(verified.code, EXIT_OK, "{name}: {}", verified.stdout);
        assert!(verified.stdout.contains("verification: PASSED"));
    }
}

#[test]
fn perturbed_table_fails_verification() {
    let problem = data_file("two_state.json");
    let mut doc = json(&["solve", &problem, "--json"]);
    let report = write(&scratch("good.json"), &doc.to_string());
    doc["w_bc"][0][1] = Value::from(3.4);
    let perturbed = write(&scratch("perturbed.json"), &doc.to_string());
    let out = cli(&["verify", &problem, &perturbed, &report]);
    assert_eq!(out.code, EXIT_VERIFY_FAILED, "{}", out.stdout);
    assert!(out.stdout.contains("fixed point: false"));
}

#[test]
fn independent_coupling_fails_verification() {
    let problem = data_file("two_state.json");
    let report = write(
        &scratch("solved.json"),
        &cli(&["solve", &problem, "--json"]).stdout,
    );
    let independent = cli(&["couple", &problem, "--kind", "independent", "--json"]);
    let independent = write(&scratch("independent.json"), &independent.stdout);
    let out = cli(&["verify", &problem, &report, &independent]);
    assert_eq!(out.code, EXIT_VERIFY_FAILED);
    assert!(out.stdout.contains("coupling optimal: false"));
}

#[test]
fn verify_rejects_malformed_tables() {
    let problem = data_file("two_state.json");
    let missing = write(&scratch("missing.json"), r#"{"coupling": {}}"#);
    assert_eq!(
        cli(&["verify", &problem, &missing, &missing]).code,
        EXIT_INPUT
    );
}

#[test]
fn csv_export() {
    let path = scratch("table.csv");
    let out = cli(&[
        "solve",
        &data_file("two_state.json"),
        "--csv",
        path.to_str().unwrap(),
    ]);
    assert_eq!(out.code, EXIT_OK);
    let mut reader = csv::Reader::from_path(&path).unwrap();
    assert_eq!(reader.headers().unwrap(), vec!["state", "0", "1"]);
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 2);
    let w: f64 = rows[0][2].parse().unwrap();
    assert!((w - 10.0 / 3.0).abs() < 1e-6);
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_bicausal");
    let status = Command::new(bin)
        .args(["solve", &data_file("two_state.json")])
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(EXIT_OK));
    assert!(String::from_utf8_lossy(&status.stdout).contains("3.333333"));
    let status = Command::new(bin)
        .args(["solve", &data_file("bad_row_sum.json")])
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(EXIT_INPUT));
    assert!(String::from_utf8_lossy(&status.stderr).contains("row 1"));
    let status = Command::new(bin)
        .args(["noncausal", &data_file("periodic.json")])
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(EXIT_UNDEFINED));
}
