use std::path::Path;
use std::process::{Command, Output};

fn qrchain(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qrchain"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn rows(csv: &str) -> Vec<csv::StringRecord> {
    let body: String = csv
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| format!("{l}\n"))
        .collect();
    csv::Reader::from_reader(body.as_bytes())
        .records()
        .map(|r| r.unwrap())
        .collect()
}

fn header(csv: &str) -> Vec<String> {
    let line = csv.lines().find(|l| !l.starts_with('#')).unwrap();
    line.split(',').map(String::from).collect()
}

const GOLDEN_ARGS: &[&str] = &[
    "simulate",
    "--paradigm",
    "ion",
    "--repeaters",
    "1,2",
    "--distances",
    "20,50",
    "--iterations",
    "200",
    "--seed",
    "7",
];

#[test]
fn simulate_matches_golden_file() {
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/simulate_ion_seed7.csv");
    let o = qrchain(GOLDEN_ARGS);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), std::fs::read_to_string(golden).unwrap());
}

#[test]
fn worker_count_does_not_change_output() {
    let mut one = GOLDEN_ARGS.to_vec();
    one.extend(["--workers", "1"]);
    let mut four = GOLDEN_ARGS.to_vec();
    four.extend(["--workers", "4"]);
    assert_eq!(qrchain(&one).stdout, qrchain(&four).stdout);
}

#[test]
fn reruns_are_byte_identical() {
    let args = [
        "simulate",
        "--paradigm",
        "ape",
        "--repeaters",
        "2",
        "--iterations",
        "200",
        "--seed",
        "3",
    ];
    let a = qrchain(&args);
    let b = qrchain(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn theory_sweep_has_a_row_per_point() {
    let o = qrchain(&["theory", "--distances", "10,50,100", "--repeaters", "1..=10"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    let rs = rows(&out);
    assert_eq!(rs.len(), 30);
    let h = header(&out);
    let egr = h.iter().position(|c| c == "egr_hz").unwrap();
    assert!(rs.iter().all(|r| r[egr].parse::<f64>().unwrap() > 0.0));
    assert!(out.starts_with("# qrchain "));
    assert!(out.contains("# manifest_sha256: "));
}

#[test]
fn ape_theory_reports_photon_counts() {
    let o = qrchain(&[
        "theory",
        "--paradigm",
        "ape",
        "--rgs",
        "1,25,1",
        "--rgs",
        "5,4,2",
        "--rgs",
        "6,6,3",
        "--rgs",
        "7,8,4",
        "--rgs",
        "8,11,4",
    ]);
    let out = stdout(&o);
    let col = header(&out).iter().position(|c| c == "photons").unwrap();
    let photons: Vec<u64> = rows(&out).iter().map(|r| r[col].parse().unwrap()).collect();
    assert_eq!(photons, vec![102, 130, 300, 574, 896]);
}

#[test]
fn optimize_frontier_rows() {
    let o = qrchain(&["optimize", "--budget", "300", "--repeaters", "8"]);
    assert_eq!(o.status.code(), Some(0));
    let r = &rows(&stdout(&o))[0];
    assert_eq!((&r[0], &r[1], &r[2], &r[3]), ("8", "6", "6", "3"));

    let o = qrchain(&["optimize", "--budget", "6", "--repeaters", "1,2"]);
    for r in rows(&stdout(&o)) {
        assert_eq!((&r[1], &r[2], &r[3], &r[4]), ("1", "1", "1", "6"));
    }

    let o = qrchain(&["optimize", "--budget", "300"]);
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains("from n = 5"), "{err}");
}

#[test]
fn validate_passes_on_matching_models() {
    let o = qrchain(&["validate", "--repeaters", "1,2"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["pass"], true);
    assert_eq!(report["points"].as_array().unwrap().len(), 2);
}

#[test]
fn validate_catches_an_injected_mismatch() {
    let o = qrchain(&[
        "validate",
        "--repeaters",
        "1",
        "--theory-set",
        "trapped_ion.t_attempt_s=0.001",
    ]);
    assert_eq!(o.status.code(), Some(2));
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["pass"], false);
}

#[test]
fn perfect_fidelity_point_has_zero_z() {
    let o = qrchain(&[
        "validate",
        "--repeaters",
        "2",
        "--distances",
        "10",
        "--iterations",
        "300",
        "--set",
        "trapped_ion.f_1q=1",
        "--set",
        "trapped_ion.f_2q=1",
        "--set",
        "trapped_ion.f_em_trap=1",
        "--set",
        "trapped_ion.tau_coherence_s=1e300",
    ]);
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let checks = report["points"][0]["checks"].as_array().unwrap();
    let fid = checks.iter().find(|c| c["quantity"] == "fidelity").unwrap();
    assert_eq!(fid["z"], 0.0);
    assert_eq!(fid["sim"], 1.0);
}

#[test]
fn config_errors_name_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"trapped_ion": {"h_max": "lots"}}"#).unwrap();
    let o = qrchain(&["theory", "--config", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8(o.stderr).unwrap().contains("trapped_ion.h_max"));

    let o = qrchain(&["theory", "--set", "trapped_ion.eta_coll=1.5"]);
    assert_eq!(o.status.code(), Some(1));
    let o = qrchain(&["theory", "--no-such-flag"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn censored_only_results_exit_three() {
    let o = qrchain(&[
        "simulate",
        "--paradigm",
        "ape",
        "--rgs",
        "1,25,1",
        "--repeaters",
        "5",
        "--max-iterations",
        "2000",
    ]);
    assert_eq!(o.status.code(), Some(3));
    let out = stdout(&o);
    let col = header(&out).iter().position(|c| c == "censored_flag").unwrap();
    assert_eq!(&rows(&out)[0][col], "true");
}

#[test]
fn out_file_and_trial_log() {
    let dir = tempfile::tempdir().unwrap();
    let csv_path = dir.path().join("out.csv");
    let log_path = dir.path().join("trials.jsonl");
    let o = qrchain(&[
        "simulate",
        "--repeaters",
        "1",
        "--iterations",
        "50",
        "--out",
        csv_path.to_str().unwrap(),
        "--trial-log",
        log_path.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
    assert_eq!(rows(&std::fs::read_to_string(&csv_path).unwrap()).len(), 1);
    let log = std::fs::read_to_string(&log_path).unwrap();
    let lines: Vec<serde_json::Value> = log.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 51);
    assert!(lines[0].get("header").is_some());
    assert_eq!(lines[50]["iteration"], 49);
}
