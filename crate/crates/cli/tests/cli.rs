use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cyclofield::fieldsim::read_sample;
use cyclofield::io::{parse_csv, parse_report};

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cyclofield")).args(args).output().unwrap()
}

fn run_threads(args: &[&str], threads: usize) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cyclofield"))
        .env("RAYON_NUM_THREADS", threads.to_string())
        .args(args)
        .output()
        .unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("run.toml");
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

const CAUCHY: &str = r#"
[model]
n = 2
components = [
  { location = 0.0, alpha = 1.0, envelope = { kind = "exponential", params = [1.0, 20.0] } },
]
[weight]
kind = "donsker"
"#;

#[test]
fn usage_errors_exit_2() {
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(run(&["experiment"]).status.code(), Some(2));
    assert_eq!(run(&["validate", "--config", "/nonexistent/run.toml"]).status.code(), Some(2));
}

#[test]
fn invalid_model_exits_3_and_names_the_invariant() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &CAUCHY.replace("alpha = 1.0", "alpha = 2.0"));
    let out = run(&["validate", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(3));
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("alpha"), "{msg}");

    let ok = write_config(dir.path(), CAUCHY);
    let out = run(&["validate", "--config", &ok]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("ok:"));
}

#[test]
fn numerical_failures_exit_4() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{CAUCHY}\n[quadrature]\nmax_frequency = 0.001\n");
    let cfg = write_config(dir.path(), &text);
    let out_dir = dir.path().join("out");
    let out = run(&["functional", "--config", &cfg, "--out", out_dir.to_str().unwrap(), "--frequencies", "64"]);
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("resolution"));
}

#[test]
fn default_experiment_writes_500_qq_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("cauchy");
    let cfg = configs().join("cauchy-like.toml");
    let out = run(&[
        "experiment",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "--frequencies",
        "64",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let qq = parse_csv(&fs::read_to_string(out_dir.join("qq.csv")).unwrap()).unwrap();
    assert_eq!(qq.header, ["theoretical", "empirical"]);
    assert_eq!(qq.rows.len(), 500);
    let report = parse_report(&fs::read_to_string(out_dir.join("report.txt")).unwrap()).unwrap();
    assert_eq!(report["replications"], "500");
    assert_eq!(report["seed"], "2024");
    let manifest = fs::read_to_string(out_dir.join("manifest.txt")).unwrap();
    assert!(manifest.contains("config_sha256="));
    assert!(manifest.contains("file.qq.csv="));
    assert!(!out_dir.join("qq.csv.tmp").exists());
}

#[test]
fn convergence_ladder_of_two() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{CAUCHY}\n[convergence]\nladder = [10.0, 100.0]\n");
    let cfg = write_config(dir.path(), &text);
    let out_dir = dir.path().join("conv");
    let out = run(&["convergence", "--config", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let t = parse_csv(&fs::read_to_string(out_dir.join("convergence.csv")).unwrap()).unwrap();
    assert_eq!(t.header, ["r", "t", "R", "S", "R_err", "S_err"]);
    assert_eq!(t.rows.len(), 2);
    // j = 0: no S column values
    assert!(t.rows.iter().all(|r| r[3].is_none()));
}

#[test]
fn csv_artifacts_are_identical_across_runs_and_threads() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("line-seasonal.toml");
    let cfg = cfg.to_str().unwrap();
    let mut seen: Option<Vec<Vec<u8>>> = None;
    for threads in [1, 4, 1] {
        let out_dir = dir.path().join(format!("run{threads}-{}", seen.is_some()));
        let o = out_dir.to_str().unwrap();
        for cmd in ["experiment", "limit"] {
            let args = [cmd, "--config", cfg, "--out", o, "--replications", "40", "--frequencies", "128"];
            let out = run_threads(&args, threads);
            assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        }
        let files: Vec<Vec<u8>> = ["report.txt", "qq.csv", "samples.csv", "convergence.csv", "limit_paths.csv", "limit_covariance.csv"]
            .iter()
            .map(|f| fs::read(out_dir.join(f)).unwrap())
            .collect();
        match &seen {
            None => seen = Some(files),
            Some(prev) => assert!(prev == &files, "outputs differ with {threads} threads"),
        }
    }
}

#[test]
fn field_commands_write_readable_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("line-seasonal.toml");
    let cfg = cfg.to_str().unwrap();
    let o = dir.path().join("field");
    let o = o.to_str().unwrap();
    for cmd in ["density", "covariance", "simulate", "functional", "limit"] {
        let out = run(&[cmd, "--config", cfg, "--out", o, "--frequencies", "256", "--replications", "50"]);
        assert_eq!(out.status.code(), Some(0), "{cmd}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let read = |f: &str| parse_csv(&fs::read_to_string(dir.path().join("field").join(f)).unwrap()).unwrap();

    let d = read("density.csv");
    assert_eq!(d.rows.len(), 7);
    assert!(d.rows.iter().all(|r| r[1].unwrap() > 0.0));

    let c = read("covariance.csv");
    assert_eq!(c.rows.len(), 8);
    assert!(c.rows[0][1].unwrap() > c.rows[1][1].unwrap().abs());

    let sample = read_sample(fs::File::open(dir.path().join("field/frequencies.bin")).unwrap()).unwrap();
    assert_eq!(sample.len(), 256);
    let f = read("field.csv");
    assert_eq!(f.header, ["x1", "value"]);
    assert_eq!(f.rows.len(), 5);

    let fun = read("functional.csv");
    assert_eq!(fun.header, ["t", "value", "oracle_variance", "oracle_error", "limit_variance"]);
    assert_eq!(fun.rows[0][1], Some(0.0));

    let paths = read("limit_paths.csv");
    assert_eq!(paths.header.len(), 5);
    assert_eq!(paths.rows.len(), 50);
    let k = read("limit_covariance.csv");
    assert_eq!(k.rows.len(), 5);
    for a in 0..5 {
        assert!(k.rows[a][a].unwrap() >= 0.0);
    }
}
