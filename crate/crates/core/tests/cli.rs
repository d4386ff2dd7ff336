use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mstoep"))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn run(args: &[&str], config: &Path) -> Output {
    bin().arg("--config").arg(config).args(args).output().unwrap()
}

const PQ_TERMS: &str = r#"{"kind": "terms", "block_size": 1, "n_min": -1, "coefficients": [
    [[{"re": -0.3333333333333333, "im": 0}]],
    [[{"re": 1.1666666666666667, "im": 0}]],
    [[{"re": -0.5, "im": 0}]]]}"#;

fn verify_config(zeros: &str) -> String {
    format!(
        r#"{{"schema_version": 1, "command": "verify-bo", "symbol": {PQ_TERMS},
             "zeros": {{"kind": "explicit", "values": {zeros}}}}}"#
    )
}

#[test]
fn verify_single_zero_matches_closed_form() {
    let out = run(&[], &configs().join("verify_single_zero.json"));
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["library_version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(v["config"]["command"], "verify-bo");
    assert_eq!(v["verdict"], true);
    let (p, q, al) = (0.5, 1.0 / 3.0, 0.4);
    let expect = 1.0 + p * q - p * al - q * al;
    let lhs = v["report"]["lhs"]["re"].as_f64().unwrap();
    let rhs = v["report"]["rhs"]["re"].as_f64().unwrap();
    assert!((lhs - expect).abs() < 1e-8 && (rhs - expect).abs() < 1e-8);
}

#[test]
fn zero_on_circle_is_rejected_with_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", &verify_config(r#"[{"re": 1.0, "im": 0.0}]"#));
    let out = run(&[], &cfg);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.starts_with("error: "), "{err}");
    assert!(err.contains("zero not in open unit disk"), "{err}");
    assert!(out.stdout.is_empty());
}

#[test]
fn unknown_field_and_bad_version_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let extra = verify_config("[]").replacen("{", r#"{"colour": "red", "#, 1);
    let out = run(&[], &write(dir.path(), "a.json", &extra));
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("colour"));

    let bad = verify_config("[]").replace("\"schema_version\": 1", "\"schema_version\": 7");
    let out = run(&[], &write(dir.path(), "b.json", &bad));
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("config"));
}

#[test]
fn failed_verdict_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    // Decreasing N makes the relative error grow, so the halving check fails.
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{"schema_version": 1, "command": "examples",
            "examples": {"v": 0.5, "n_list": [4000, 1000], "n_max": 100, "k_max": 2}}"#,
    );
    let out = run(&[], &cfg);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["verdict"], false);
    assert!(v["report"]["worst_error_ratio"].as_f64().unwrap() > 1.0);
}

#[test]
fn tol_flag_lands_in_resolved_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", &verify_config(r#"[{"re": 0.4, "im": 0.2}]"#));
    let out = run(&["--tol", "1e-9"], &cfg);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["config"]["params"]["tol"], 1e-9);
}

#[test]
fn identical_config_gives_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "r.json",
        &format!(
            r#"{{"schema_version": 1, "command": "verify-bo", "symbol": {PQ_TERMS},
                 "zeros": {{"kind": "random", "count": 5, "radius": 0.8}}, "seed": 11}}"#
        ),
    );
    let out = dir.path().join("out.json");
    let o = out.to_str().unwrap();
    assert_eq!(run(&["--out", o], &cfg).status.code(), Some(0));
    let first = std::fs::read(&out).unwrap();
    assert_eq!(run(&["--out", o, "--threads", "2"], &cfg).status.code(), Some(0));
    assert_eq!(first, std::fs::read(&out).unwrap());

    run(&["--out", o, "--seed", "12"], &cfg);
    assert_ne!(first, std::fs::read(&out).unwrap());
}

#[test]
fn szego_csv_columns() {
    let out = run(&[], &configs().join("szego_divergent.json"));
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("n,d_n_log_abs,d_n_arg,d_n_re,d_n_im,error"));
    let last: Vec<f64> = lines
        .last()
        .unwrap()
        .split(',')
        .map(|x| x.parse().unwrap())
        .collect();
    assert_eq!(last[0], 32.0);
    assert!((last[3] - 1.2).abs() < 1e-10);
}

#[test]
fn examples_csv_has_subsequence_rows() {
    let out = run(&[], &configs().join("examples.json"));
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("example,n,measured,predicted,rel_err\n"));
    let row = |name: &str, n: u64| {
        text.lines()
            .find(|l| l.starts_with(&format!("{name},{n},")))
            .unwrap_or_else(|| panic!("missing {name} {n}"))
            .split(',')
            .nth(2)
            .unwrap()
            .parse::<f64>()
            .unwrap()
    };
    let p = 3u64.pow(8);
    let half = row("example3_half", 2 * p);
    let quarter = row("example3_quarter", 4 * p);
    assert!((0.85..=0.89).contains(&half), "{half}");
    assert!((1.11..=1.17).contains(&quarter), "{quarter}");
}

#[test]
fn factorize_block_residuals_and_csv() {
    let cfg = configs().join("factorize_block.json");
    let out = run(&[], &cfg);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["report"]["right_residual"].as_f64().unwrap() < 1e-10);
    assert_eq!(v["report"]["method"], "finite_section");

    let out = run(&["--format", "csv"], &cfg);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("factor,index,row,col,re,im\n"));
    assert!(text.contains("\nw_minus,0,1,1,"));
}

#[test]
fn bad_flag_exits_1() {
    let out = bin().args(["--config", "x.json", "--format", "xml"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn missing_config_file_exits_1() {
    let out = run(&[], Path::new("/nonexistent/config.json"));
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error: config:"));
}
