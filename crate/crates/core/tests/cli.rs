use std::fs;
use std::path::Path;
use std::process::Command;

const SCALAR: &str = r#"
[model]
dim = 5
lambda_factors = [-0.5]
beta = [[1.0]]

[grid]
cells = 200
"#;

const PAIR: &str = r#"
[model]
dim = 5
lambda_factors = [-0.5, -0.5]
beta = [[1.0, -1.0], [-1.0, 1.0]]
group_sizes = [1, 1]

[grid]
cells = 200

[schedule]
values = [-1.0, -10.0]
"#;

fn run(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_critsys"))
        .args(args)
        .output()
        .unwrap();
    let text =
        String::from_utf8_lossy(&out.stdout).into_owned() + &String::from_utf8_lossy(&out.stderr);
    (out.status.code().unwrap_or(-1), text)
}

fn config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn solve_resume_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "scalar.toml", SCALAR);
    let out = dir.path().join("solve");
    let out_s = out.to_str().unwrap();
    let (code, text) = run(&["solve", "-c", &cfg, "-o", out_s]);
    assert_eq!(code, 0, "{text}");
    for f in [
        "records.csv",
        "report.txt",
        "config.toml",
        "nehari.csv",
        "fields/state.csv",
    ] {
        assert!(out.join(f).exists(), "missing {f}");
    }

    let state = out.join("fields/state.csv");
    let resumed = dir.path().join("resumed");
    let (code, text) = run(&[
        "solve",
        "-c",
        &cfg,
        "-o",
        resumed.to_str().unwrap(),
        "--resume",
        state.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{text}");
    assert!(fs::read_to_string(resumed.join("records.csv"))
        .unwrap()
        .contains("resume"));

    let records = out.join("records.csv");
    let (code, text) = run(&["report", records.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert_eq!(text, fs::read_to_string(out.join("report.txt")).unwrap());
}

#[test]
fn sweep_writes_fields_per_point() {
    let dir = tempfile::tempdir().unwrap();
    // two points are too few for the asymptotic thresholds
    let text = format!("{PAIR}\n[checks]\nskip = [\"overlap_decay\", \"coverage\"]\n");
    let cfg = config(dir.path(), "pair.toml", &text);
    let out = dir.path().join("sweep");
    let (code, text) = run(&["sweep-infinity", "-c", &cfg, "-o", out.to_str().unwrap()]);
    assert_eq!(code, 0, "{text}");
    assert!(out.join("fields/point_000.csv").exists());
    assert!(out.join("fields/point_001.csv").exists());
    assert!(text.contains("result: PASS"));
    assert!(text.contains("SKIP overlap_decay"));
}

#[test]
fn validate_flags_a_bad_model() {
    let dir = tempfile::tempdir().unwrap();
    let bad = PAIR.replace(
        "lambda_factors = [-0.5, -0.5]",
        "lambda_factors = [-1.5, -0.5]",
    );
    let cfg = config(dir.path(), "bad.toml", &bad);
    let (code, _) = run(&[
        "validate",
        "-c",
        &cfg,
        "-o",
        dir.path().join("v").to_str().unwrap(),
    ]);
    assert_eq!(code, 1);
    let cfg = config(dir.path(), "good.toml", PAIR);
    let (code, _) = run(&[
        "validate",
        "-c",
        &cfg,
        "-o",
        dir.path().join("g").to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
}

#[test]
fn errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "broken.toml", "[model]\ndim = 5\n");
    let (code, text) = run(&[
        "solve",
        "-c",
        &cfg,
        "-o",
        dir.path().join("x").to_str().unwrap(),
    ]);
    assert_eq!(code, 2);
    assert!(text.contains("error"));
    let cfg = config(dir.path(), "scalar.toml", SCALAR);
    let (code, _) = run(&[
        "two-group",
        "-c",
        &cfg,
        "-o",
        dir.path().join("y").to_str().unwrap(),
    ]);
    assert_eq!(code, 2);
}
