use std::path::Path;

use dndm::cli::{normalize_timings, parse_and_dispatch};
use serde_json::Value;

fn run(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let mut argv = vec!["dndm"];
    argv.extend_from_slice(args);
    let code = parse_and_dispatch(argv, &mut out, &mut err);
    (
        code,
        String::from_utf8(out).unwrap(),
        String::from_utf8(err).unwrap(),
    )
}

const CHAIN: &str = "vocab 3 4 chain\n0.5 0.3 0.2\n0.1 0.6 0.3\n0.7 0.2 0.1\n0.25 0.25 0.5\n";

fn model_file(dir: &Path) -> String {
    let path = dir.join("m.txt");
    std::fs::write(&path, CHAIN).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn schedules_linear_four_steps() {
    let (code, out, _) = run(&["schedules", "--schedule", "linear", "--steps", "4"]);
    assert_eq!(code, 0);
    let rows: Vec<&str> = out.lines().collect();
    assert_eq!(rows[0], "t,alpha,p_tau");
    assert_eq!(rows.len(), 5);
    for row in &rows[1..] {
        assert_eq!(row.split(',').nth(2), Some("0.25"));
    }
}

#[test]
fn schedules_beta_rows_sum_to_one() {
    let (code, out, _) = run(&["schedules", "--steps", "20", "--tau", "beta:3,3"]);
    assert_eq!(code, 0);
    let total: f64 = out
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(2).unwrap().parse::<f64>().unwrap())
        .sum();
    assert!((total - 1.0).abs() < 1e-12);
}

#[test]
fn schedules_continuous_grid() {
    let (code, out, _) = run(&[
        "schedules",
        "--steps",
        "inf",
        "--grid",
        "5",
        "--format",
        "jsonl",
    ]);
    assert_eq!(code, 0);
    let records: Vec<Value> = out
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(records.len(), 5);
    assert_eq!(records[0]["schema"], "dndm.schedule.v1");
    assert_eq!(records[2]["alpha"], 0.5);
    assert_eq!(records[2]["p_tau"], 1.0);
}

#[test]
fn simulate_forward_records_are_self_describing() {
    let (code, out, _) = run(&[
        "simulate-forward",
        "--steps",
        "10",
        "--trials",
        "3",
        "--times",
        "0,5,10",
    ]);
    assert_eq!(code, 0);
    let records: Vec<Value> = out
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(records.len(), 3);
    for (i, r) in records.iter().enumerate() {
        assert_eq!(r["schema"], "dndm.forward.v1");
        assert_eq!(r["trial"], i);
        assert_eq!(r["tokens"][0], serde_json::json!([0, 2, 4]));
        // absorbing noise, α_10 = 0: fully masked at the end
        assert_eq!(r["tokens"][2], serde_json::json!([5, 5, 5]));
        assert_eq!(r["tau"].as_array().unwrap().len(), 3);
    }
}

#[test]
fn markov_forward_rejects_continuous_time() {
    let (code, _, err) = run(&["simulate-forward", "--steps", "inf", "--process", "markov"]);
    assert_eq!(code, 1);
    assert!(err.contains("finite"));
}

#[test]
fn sample_writes_traces_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let model = model_file(dir.path());
    let prefix = dir.path().join("out").to_string_lossy().into_owned();
    let (code, _, err) = run(&[
        "sample",
        "--sampler",
        "dndm",
        "--steps",
        "50",
        "--schedule",
        "linear",
        "--model",
        &model,
        "--runs",
        "10",
        "--seed",
        "1",
        "--out",
        &prefix,
    ]);
    assert_eq!(code, 0, "{err}");
    let csv = std::fs::read_to_string(format!("{prefix}.csv")).unwrap();
    assert!(csv.starts_with("run,nfe,final_tokens,wall_ns\n"));
    assert_eq!(csv.lines().count(), 11);
    let jsonl = std::fs::read_to_string(format!("{prefix}.jsonl")).unwrap();
    for line in jsonl.lines() {
        let r: Value = serde_json::from_str(line).unwrap();
        assert_eq!(r["schema"], "dndm.sample.trace.v1");
        assert_eq!(r["sampler"], "dndm");
        let nfe = r["nfe"].as_u64().unwrap();
        assert_eq!(r["events"].as_array().unwrap().len() as u64, nfe);
        assert!((1..=4).contains(&nfe));
        assert_eq!(r["final_tokens"].as_array().unwrap().len(), 4);
    }
}

#[test]
fn sample_twice_is_identical_after_normalization() {
    let dir = tempfile::tempdir().unwrap();
    let model = model_file(dir.path());
    let once = |p: &str| {
        let (code, out, _) = run(&[
            "sample",
            "--sampler",
            "dndm-topk",
            "--model",
            &model,
            "--runs",
            "20",
            "--parallelism",
            p,
            "--format",
            "jsonl",
        ]);
        assert_eq!(code, 0);
        normalize_timings(&out)
    };
    assert_eq!(once("1"), once("4"));
}

#[test]
fn sample_rejects_mismatched_time_domain() {
    let dir = tempfile::tempdir().unwrap();
    let model = model_file(dir.path());
    let (code, _, err) = run(&[
        "sample",
        "--sampler",
        "dndm-c",
        "--steps",
        "50",
        "--model",
        &model,
    ]);
    assert_eq!(code, 1);
    assert!(err.contains("inf"));
}

#[test]
fn sample_baseline_multi_needs_uniform_noise() {
    let dir = tempfile::tempdir().unwrap();
    let model = model_file(dir.path());
    let (code, out, err) = run(&[
        "sample",
        "--sampler",
        "baseline-multi",
        "--noise",
        "uniform",
        "--model",
        &model,
        "--runs",
        "3",
    ]);
    assert_eq!(code, 0, "{err}");
    for row in out.lines().skip(1) {
        assert_eq!(row.split(',').nth(1), Some("50"));
    }
}

#[test]
fn missing_model_file_is_a_validation_error() {
    let (code, _, err) = run(&[
        "sample",
        "--sampler",
        "dndm",
        "--model",
        "/nonexistent/model.txt",
    ]);
    assert_eq!(code, 1);
    assert!(err.starts_with("error:"));
}

#[test]
fn bad_output_directory_fails_before_work() {
    let (code, _, err) = run(&[
        "nfe-analysis",
        "--trials",
        "100000000",
        "--out",
        "/nonexistent/dir/x.csv",
    ]);
    assert_eq!(code, 1);
    assert!(err.contains("does not exist"));
}

#[test]
fn unknown_flag_and_subcommand() {
    let (code, _, err) = run(&["sample", "--frobnicate"]);
    assert_eq!(code, 1);
    assert!(err.contains("Usage"));
    let (code, _, _) = run(&["bogus"]);
    assert_eq!(code, 1);
    let (code, out, _) = run(&["--help"]);
    assert_eq!(code, 0);
    assert!(out.contains("simulate-forward"));
}

#[test]
fn nfe_analysis_table() {
    let (code, out, _) = run(&[
        "nfe-analysis",
        "--steps",
        "4",
        "--n",
        "4",
        "--dist",
        "uniform",
    ]);
    assert_eq!(code, 0);
    assert_eq!(
        out,
        "T,N,dist,expected_nfe,c_constant,empirical_mean,stderr\n4,4,uniform,2.734375,0.31640625,,\n"
    );
    let (code, out, _) = run(&[
        "nfe-analysis",
        "--steps",
        "50",
        "--n",
        "25",
        "--dist",
        "beta:3,3",
        "--trials",
        "2000",
    ]);
    assert_eq!(code, 0);
    let row = out.lines().nth(1).unwrap();
    assert!(row.starts_with("50,25,\"beta:3,3\","), "{row}");
    assert_eq!(row.split(',').count(), 8);
}

#[test]
fn verify_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("report.json");
    let json_s = json.to_string_lossy().into_owned();
    let (code, out, _) = run(&[
        "verify", "--only", "8,9,10", "--trials", "1000", "--json", &json_s,
    ]);
    assert_eq!(code, 0, "{out}");
    assert!(out.contains("[PASS]  8"));
    let report: Value = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(report["checks"].as_array().unwrap().len(), 3);
    assert_eq!(report["reduced_power"], true);

    let (code, out, _) = run(&[
        "verify",
        "--only",
        "2",
        "--trials",
        "5000",
        "--pmf-perturbation",
        "0.05",
    ]);
    assert_eq!(code, 2);
    assert!(out.contains("[FAIL]  2"));

    let (code, _, _) = run(&["verify", "--only", "99"]);
    assert_eq!(code, 1);
}
