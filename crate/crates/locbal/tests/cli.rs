use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn locbal(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_locbal"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path.display().to_string()
}

const SIMULATE: &str = r#"
seed = 11
[target]
kind = "permutation"
n = 12
weights = "lognormal"
lambda = 2.0
[run]
kernels = ["rw", "gb", "sqrt", "barker"]
iterations = 3000
thin = 5
"#;

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(code(&locbal(&[])), 1);
    assert_eq!(code(&locbal(&["frobnicate"])), 1);
    // no seed
    let dir = TempDir::new().unwrap();
    let out = locbal(&["generate", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("seed"), "{}", stderr(&out));
    // unknown key with its name in the message
    let cfg = write_config(dir.path(), "bad.toml", "seed = 1\n[run]\niteratons = 5\n");
    let out = locbal(&[
        "simulate",
        "-c",
        &cfg,
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("iteratons"));
    assert!(locbal(&["--help"]).status.success());
}

#[test]
fn unwritable_output_is_a_runtime_error() {
    let dir = TempDir::new().unwrap();
    let file = dir.path().join("taken");
    fs::write(&file, "").unwrap();
    let out = locbal(&["generate", "--seed", "1", "--out", file.to_str().unwrap()]);
    assert_eq!(code(&out), 3, "{}", stderr(&out));
}

#[test]
fn simulate_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "sim.toml", SIMULATE);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let res = locbal(&["simulate", "-c", &cfg, "--out", out.to_str().unwrap()]);
        assert!(res.status.success(), "{}", stderr(&res));
    }
    for scheme in ["rw", "gb", "sqrt", "barker"] {
        let rel = format!("traces/{scheme}.csv");
        let x = fs::read(a.join(&rel)).unwrap();
        assert!(!x.is_empty());
        assert_eq!(
            x,
            fs::read(b.join(&rel)).unwrap(),
            "{rel} differs between runs"
        );
    }
    let table = fs::read_to_string(a.join("efficiency.csv")).unwrap();
    assert_eq!(table.lines().count(), 5);
    let manifest: serde_json::Value =
        serde_json::from_slice(&fs::read(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config_sha256"].as_str().unwrap().len(), 64);
    assert_eq!(manifest["seed"], 11);
}

#[test]
fn flat_permutation_sweep_accepts_everything() {
    let dir = TempDir::new().unwrap();
    let body =
        format!("{SIMULATE}\n[sweep.axes]\n\"target.lambda\" = [0.0]\n\"target.n\" = [8, 16]\n");
    let cfg = write_config(dir.path(), "sweep.toml", &body);
    let out = dir.path().join("sweep");
    let res = locbal(&["simulate", "-c", &cfg, "--out", out.to_str().unwrap()]);
    assert!(res.status.success(), "{}", stderr(&res));
    let mut rdr = csv::Reader::from_path(out.join("sweep.csv")).unwrap();
    let headers = rdr.headers().unwrap().clone();
    let acc = headers.iter().position(|h| h == "acceptance_rate").unwrap();
    let mut rows = 0;
    for rec in rdr.records() {
        let rec = rec.unwrap();
        assert_eq!(rec[acc].parse::<f64>().unwrap(), 1.0, "{rec:?}");
        rows += 1;
    }
    assert_eq!(rows, 8);
}

#[test]
fn verify_passes_and_flags_unbalanced_functions() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("ok");
    let quick = [
        "--set",
        "verify.binary_n=[3, 4]",
        "--set",
        "verify.peskun_instances=3",
        "--set",
        "verify.peskun_functions=2",
    ];
    let mut args = vec!["verify", "--seed", "5", "--out", out.to_str().unwrap()];
    args.extend(quick);
    let res = locbal(&args);
    assert!(res.status.success(), "{}", stderr(&res));
    let report: serde_json::Value =
        serde_json::from_slice(&fs::read(out.join("verify.json")).unwrap()).unwrap();
    assert_eq!(report["pass"], true);
    assert!(!report["smoothness"].as_array().unwrap().is_empty());

    let out = dir.path().join("bad");
    let mut args = vec![
        "verify",
        "--seed",
        "5",
        "--out",
        out.to_str().unwrap(),
        "--set",
        "verify.balanced=[\"gb\"]",
    ];
    args.extend(quick);
    let res = locbal(&args);
    assert_eq!(code(&res), 2, "{}", stderr(&res));
    assert!(
        stderr(&res).contains("gb flow asymmetry"),
        "{}",
        stderr(&res)
    );
}

#[test]
fn generate_then_link() {
    let dir = TempDir::new().unwrap();
    let data = dir.path().join("data");
    let res = locbal(&[
        "generate",
        "--seed",
        "3",
        "--out",
        data.to_str().unwrap(),
        "--set",
        "generate.lambda=40",
        "--set",
        "generate.beta=0.02",
    ]);
    assert!(res.status.success(), "{}", stderr(&res));
    for f in ["x.csv", "y.csv", "truth.csv", "manifest.json"] {
        assert!(data.join(f).exists(), "{f}");
    }
    let out = dir.path().join("rl");
    let res = locbal(&[
        "rl",
        "--seed",
        "9",
        "--out",
        out.to_str().unwrap(),
        "--x",
        data.join("x.csv").to_str().unwrap(),
        "--y",
        data.join("y.csv").to_str().unwrap(),
        "--set",
        "rl.iterations=3000",
        "--set",
        "rl.burn_in=500",
        "--set",
        "rl.replicates=2",
        "--set",
        "rl.floor=0.0",
    ]);
    assert!(res.status.success(), "{}", stderr(&res));
    let summary: serde_json::Value =
        serde_json::from_slice(&fs::read(out.join("summary.json")).unwrap()).unwrap();
    let corr = summary["replicate_correlation"].as_f64().unwrap();
    assert!(corr > 0.99, "replicate correlation {corr}");
    assert!(out.join("replicates.csv").exists());
    assert!(out.join("pairs.csv").exists());
}

#[test]
fn missing_input_file_is_a_clean_usage_error() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("nope.csv");
    let res = locbal(&[
        "rl",
        "--seed",
        "1",
        "--out",
        dir.path().join("o").to_str().unwrap(),
        "--x",
        missing.to_str().unwrap(),
        "--y",
        missing.to_str().unwrap(),
    ]);
    assert_eq!(code(&res), 1);
    let err = stderr(&res);
    assert!(err.contains("nope.csv"), "{err}");
    assert!(!err.contains("panicked"), "{err}");
}
