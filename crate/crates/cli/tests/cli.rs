use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn copodr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_copodr")).args(args).env_remove("COPODR_JOBS").output().expect("spawn copodr")
}

fn solve_json(args: &[&str]) -> (i32, serde_json::Value) {
    let mut all = vec!["solve"];
    all.extend_from_slice(args);
    all.push("--json");
    let out = copodr(&all);
    let v = serde_json::from_slice(&out.stdout).unwrap_or(serde_json::Value::Null);
    (out.status.code().unwrap(), v)
}

#[test]
fn partition_pqdr_ia_is_tight() {
    let p = data("partition_223.json");
    let (code, v) = solve_json(&[p.to_str().unwrap(), "--rule", "pqdr", "--cone", "ia"]);
    assert_eq!(code, 0);
    assert!((v["bound"].as_f64().unwrap() - 2.5).abs() <= 1e-3, "{v}");
}

#[test]
fn partition_pldr_ia_beats_three() {
    let p = data("partition_223.json");
    let (code, v) = solve_json(&[p.to_str().unwrap(), "--rule", "pldr", "--cone", "ia", "--verify", "--samples", "2000"]);
    assert_eq!(code, 0);
    let b = v["bound"].as_f64().unwrap();
    assert!((2.5..=2.6).contains(&b), "{b}");
    assert_eq!(v["verify"]["verdict"], serde_json::Value::Bool(true), "{v}");
}

#[test]
fn human_report_lists_bound_and_residuals() {
    let p = data("partition_123.json");
    let out = copodr(&["solve", p.to_str().unwrap(), "--rule", "ldr"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("bound"));
    assert!(text.contains("residuals"));
}

#[test]
fn malformed_json_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"schema\": \"copodr-v1\", \"sense\": ").unwrap();
    assert_eq!(copodr(&["solve", bad.to_str().unwrap()]).status.code(), Some(2));
    std::fs::write(&bad, "{\"schema\": \"copodr-v1\"}").unwrap();
    assert_eq!(copodr(&["solve", bad.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn missing_file_is_not_a_schema_error() {
    assert_eq!(copodr(&["solve", "/nonexistent/problem.json"]).status.code(), Some(1));
}

#[test]
fn unknown_family_exits_2() {
    assert_eq!(copodr(&["bench", "--family", "knapsack"]).status.code(), Some(2));
}

#[test]
fn export_without_solve_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let p = data("partition_223.json");
    for name in ["p.dat-s", "p.cbf"] {
        let path = dir.path().join(name);
        let out = copodr(&[
            "solve",
            p.to_str().unwrap(),
            "--rule",
            "pqdr",
            "--export",
            path.to_str().unwrap(),
            "--no-solve",
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let cp = if name.ends_with("cbf") {
            copodr::conic::cbf::import_cbf(&path).unwrap()
        } else {
            copodr::conic::sdpa::import_sdpa(&path).unwrap()
        };
        assert!(cp.m > 0 && !cp.psd_dims.is_empty());
        let sol = copodr::conic::solve(&cp, &Default::default());
        assert!((sol.objective - 2.5).abs() <= 1e-3, "{name}: {}", sol.objective);
    }
}

#[test]
fn solution_file_has_status_objective_and_vectors() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sol.txt");
    let p = data("partition_223.json");
    assert!(copodr(&["solve", p.to_str().unwrap(), "--solution", path.to_str().unwrap()]).status.success());
    let text = std::fs::read_to_string(path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "status Optimal");
    assert!(lines[1].starts_with("objective "));
    assert!(lines[2].starts_with("z "));
    let mantissa = lines[3].split('e').next().unwrap().trim_start_matches('-');
    assert_eq!(mantissa.chars().filter(char::is_ascii_digit).count(), 17);
}

#[test]
fn bench_csv_is_deterministic_and_ordered() {
    let dir = tempfile::tempdir().unwrap();
    let mut csvs = Vec::new();
    for (k, jobs) in ["1", "2"].iter().enumerate() {
        let out_dir = dir.path().join(format!("run{k}"));
        let out = copodr(&[
            "bench",
            "--family",
            "index",
            "--T",
            "1",
            "--n",
            "3",
            "--seed",
            "5",
            "--schemes",
            "ldr-ia,ldr-as",
            "--jobs",
            jobs,
            "--out",
            out_dir.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        csvs.push(std::fs::read_to_string(out_dir.join("index_T1_n3_seed5.csv")).unwrap());
    }
    assert_eq!(csvs[0], csvs[1]);
    // min-sense family: every LDR-IA value at most the LDR-AS value
    let rows: Vec<Vec<&str>> = csvs[0].lines().skip(1).map(|l| l.split(',').collect()).collect();
    for i in 0..3 {
        let val = |s: &str| -> f64 {
            rows.iter().find(|r| r[0] == i.to_string() && r[1] == s).unwrap()[2].parse().unwrap()
        };
        assert!(val("LDR-IA") <= val("LDR-AS") + 1e-7 * (1.0 + val("LDR-AS").abs()));
    }
}

#[test]
fn jobs_env_var_is_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_copodr"))
        .args(["bench", "--family", "index", "--n", "1", "--schemes", "ldr-ia", "--out", dir.path().to_str().unwrap()])
        .env("COPODR_JOBS", "2")
        .output()
        .unwrap();
    assert!(out.status.success());
}
