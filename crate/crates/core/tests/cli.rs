//! End-to-end runs of the `panel-kmeans` binary.

use std::path::Path;
use std::process::{Command, Output};

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_panel-kmeans")).args(args).output().expect("spawn")
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const NOISELESS: &str = r#"{"num_groups":2,"mu0":[-1.5,2.25],"group_proportions":[0.4,0.6],
    "sigma_schedule":{"kind":"constant","sigma":0},"n":10,"t":3}"#;

#[test]
fn gen_then_fit_recovers_noiseless_means() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("design.json");
    let panel = dir.path().join("panel.csv");
    write(&cfg, NOISELESS);
    let out = bin(&["gen", "--config", s(&cfg), "--out", s(&panel), "--seed", "3"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));

    let fit_dir = dir.path().join("fit");
    let out = bin(&[
        "fit", "--panel", s(&panel), "--groups", "2", "--restarts", "5", "--seed", "1", "--init", "spread",
        "--out-dir", s(&fit_dir), "--truth", s(&cfg), "--ci", "0.05",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["objective"], 0.0);
    assert_eq!(report["alignment"]["max_mu_error"], 0.0);
    assert_eq!(report["alignment"]["misclassified_total"], 0);

    let means = std::fs::read_to_string(fit_dir.join("means.csv")).unwrap();
    let mut got: Vec<f64> = means.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    got.sort_by(f64::total_cmp);
    assert_eq!(got, vec![-1.5, 2.25]);
    let assignment = std::fs::read_to_string(fit_dir.join("assignment.csv")).unwrap();
    assert!(assignment.starts_with("unit,g_hat\n1,"));
    assert_eq!(assignment.lines().count(), 11);
    let inference = std::fs::read_to_string(fit_dir.join("inference.csv")).unwrap();
    assert!(inference.starts_with("group,mu_hat,q_hat,delta_hat,std_error,ci_lower,ci_upper\n"));
}

#[test]
fn missing_cell_names_the_row() {
    let dir = tempfile::tempdir().unwrap();
    let panel = dir.path().join("panel.csv");
    write(&panel, "unit,time,y\n1,1,0.5\n1,2,\n2,1,1.5\n2,2,1.0\n");
    let out = bin(&["fit", "--panel", s(&panel), "--groups", "2", "--seed", "1"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(err.contains("row 3"), "{err}");
}

#[test]
fn exit_codes_distinguish_failures() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    write(&bad, "{\"num_groups\": 2");
    assert_eq!(bin(&["check-design", "--config", s(&bad)]).status.code(), Some(2));
    assert_eq!(bin(&["check-design", "--conf", s(&bad)]).status.code(), Some(1));
    assert_eq!(bin(&["fit", "--panel", "p.csv", "--groups", "2", "--seed", "x"]).status.code(), Some(1));
    let help = bin(&["mc", "--help"]);
    assert_eq!(help.status.code(), Some(0));
    let text = String::from_utf8_lossy(&help.stdout);
    for flag in ["--config", "--out", "--summary", "--threads", "--qq"] {
        assert!(text.contains(flag), "{flag}");
    }
}

#[test]
fn check_design_reports_zero_budget_when_ic_is_empty() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("design.json");
    write(
        &cfg,
        r#"{"num_groups":2,"mu0":[-1,1],"group_proportions":[0.5,0.5],
            "sigma_schedule":{"kind":"constant","sigma":0.01},"n":100,"t":400}"#,
    );
    let out = bin(&["check-design", "--config", s(&cfg)]);
    assert_eq!(out.status.code(), Some(0));
    let d: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(d["eq3_lhs"], 0.0);
    assert_eq!(d["ic_set"].as_array().unwrap().len(), 0);
    assert!((d["sigma_threshold"].as_f64().unwrap() - 0.06657008596923658 * 2.0).abs() < 1e-15);
}

const STUDY: &str = r#"{
  "design": {"num_groups":2,"mu0":[-1,1],"group_proportions":[0.5,0.5],
             "sigma_schedule":{"kind":"constant","sigma":1.5}},
  "grid": [[30,10],[20,10],[40,10]],
  "replications": 6,
  "fit": {"restarts": 8},
  "base_seed": 77,
  "retain_noise": true,
  "checks": {"coverage": [0.0, 1.0], "max_flagged_fraction": 1.0}
}"#;

#[test]
fn mc_is_byte_identical_across_threads_and_reruns() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("study.json");
    write(&cfg, STUDY);
    let mut outputs = Vec::new();
    for threads in ["1", "4", "8", "4"] {
        let rows = dir.path().join(format!("rows{threads}.csv"));
        let summary = dir.path().join(format!("summary{threads}.csv"));
        let qq = dir.path().join(format!("qq{threads}.csv"));
        let out = bin(&[
            "mc", "--config", s(&cfg), "--out", s(&rows), "--summary", s(&summary), "--threads", threads,
            "--qq", s(&qq),
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        outputs.push([rows, summary, qq].map(|p| std::fs::read(p).unwrap()));
    }
    for o in &outputs[1..] {
        assert_eq!(o, &outputs[0]);
    }
    let rows = String::from_utf8(outputs[0][0].clone()).unwrap();
    assert_eq!(rows.lines().count(), 1 + 3 * 6);
    let ns: Vec<&str> = rows.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(ns[0], "20");
    assert_eq!(ns[17], "40");
    let summary = String::from_utf8(outputs[0][1].clone()).unwrap();
    assert_eq!(summary.lines().count(), 1 + 3 * 2 + 1);
    assert!(summary.lines().last().unwrap().starts_with("slope,"));
}

#[test]
fn failed_mc_check_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("study.json");
    write(&cfg, &STUDY.replace("\"coverage\": [0.0, 1.0]", "\"coverage\": [0.999, 1.0], \"slope\": [5.0, 6.0]"));
    let rows = dir.path().join("rows.csv");
    let summary = dir.path().join("summary.csv");
    let out = bin(&["mc", "--config", s(&cfg), "--out", s(&rows), "--summary", s(&summary)]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL rate slope group 1"));
}
