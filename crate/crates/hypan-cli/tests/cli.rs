//! End-to-end tests of the hypan binary: exit codes, file outputs,
//! determinism of the CSV emission.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn hypan(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hypan"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

#[test]
fn build_writes_powers_and_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let out = hypan(
        &[
            "build",
            "--example",
            "saddle",
            "--n-max",
            "1",
            "--center",
            "0,4",
            "--base",
            "0,0",
            "--grid",
            "9x9",
            "--out",
            "run",
        ],
        dir.path(),
    );
    assert_eq!(
        code(&out),
        0,
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    for file in [
        "powers_0_1.csv",
        "powers_0_j.csv",
        "powers_1_1.csv",
        "powers_1_j.csv",
    ] {
        assert!(dir.path().join("run").join(file).exists(), "{file}");
    }
    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("run/metadata.json")).unwrap())
            .unwrap();
    assert_eq!(meta["center"][1].as_f64(), Some(4.0));
    assert_eq!(meta["quadrature"]["nodes"].as_u64(), Some(16));

    // n = 0, a = 1 is e^{xt} row by row
    let body = fs::read_to_string(dir.path().join("run/powers_0_1.csv")).unwrap();
    let mut lines = body.lines();
    assert_eq!(lines.next(), Some("x,t,re,im,n,a_label"));
    for line in lines {
        let cols: Vec<&str> = line.split(',').collect();
        let x: f64 = cols[0].parse().unwrap();
        let t: f64 = cols[1].parse().unwrap();
        let re: f64 = cols[2].parse().unwrap();
        let im: f64 = cols[3].parse().unwrap();
        assert!((re - (x * t).exp()).abs() <= 1e-12 * (x * t).exp());
        assert_eq!(im, 0.0);
        assert_eq!(cols[4], "0");
        assert_eq!(cols[5], "1");
    }
}

#[test]
fn build_output_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "build",
        "--example",
        "saddle",
        "--n-max",
        "1",
        "--grid",
        "7x7",
        "--out",
    ];
    let mut bytes = Vec::new();
    for run in ["a", "b"] {
        let out = hypan(&[&args[..], &[run]].concat(), dir.path());
        assert_eq!(code(&out), 0);
        bytes.push(fs::read(dir.path().join(run).join("powers_1_j.csv")).unwrap());
    }
    assert_eq!(
        bytes[0], bytes[1],
        "repeated runs must emit identical bytes"
    );
}

#[test]
fn table_compares_against_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let out = hypan(
        &[
            "build",
            "--example",
            "saddle",
            "--n-max",
            "2",
            "--grid",
            "9x9",
            "--out",
            "run",
        ],
        dir.path(),
    );
    assert_eq!(code(&out), 0);
    for (n, a, tol) in [("1", "1", 1e-6), ("2", "j", 1e-4)] {
        let out = hypan(
            &[
                "table",
                "--example",
                "saddle",
                "--n",
                n,
                "--a",
                a,
                "--out",
                "run",
            ],
            dir.path(),
        );
        assert_eq!(
            code(&out),
            0,
            "stderr: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        let body = fs::read_to_string(dir.path().join(format!("run/table_{n}_{a}.csv"))).unwrap();
        let mut lines = body.lines();
        assert_eq!(
            lines.next(),
            Some("x,t,numeric_re,oracle_re,abs_err,rel_err")
        );
        for line in lines {
            let rel: f64 = line.split(',').nth(5).unwrap().parse().unwrap();
            assert!(rel <= tol, "{line}");
        }
    }
}

#[test]
fn table_without_oracle_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let out = hypan(
        &[
            "build",
            "--example",
            "saddle",
            "--n-max",
            "3",
            "--grid",
            "5x5",
            "--out",
            "run",
        ],
        dir.path(),
    );
    assert_eq!(code(&out), 0);
    let out = hypan(
        &[
            "table",
            "--example",
            "saddle",
            "--n",
            "3",
            "--a",
            "1",
            "--out",
            "run",
        ],
        dir.path(),
    );
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("MissingOracle"));
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    // unknown example
    let out = hypan(&["build", "--example", "sine-gordon"], dir.path());
    assert_eq!(code(&out), 2);
    // malformed flag value
    let out = hypan(
        &["build", "--example", "saddle", "--grid", "wide"],
        dir.path(),
    );
    assert_eq!(code(&out), 2);
    // clap usage error
    let out = hypan(&["frobnicate"], dir.path());
    assert_eq!(code(&out), 2);
    // unknown suite
    let out = hypan(
        &["verify", "--example", "saddle", "--suite", "spectral"],
        dir.path(),
    );
    assert_eq!(code(&out), 2);
}

#[test]
fn verify_suites_pass_on_catalog_examples() {
    let dir = tempfile::tempdir().unwrap();
    for (example, suite) in [
        ("saddle", "factorization"),
        ("xt-eta", "transfer"),
        ("wave", "eta"),
        ("rational", "successor"),
    ] {
        let out = hypan(
            &[
                "verify",
                "--example",
                example,
                "--suite",
                suite,
                "--out",
                "rep",
            ],
            dir.path(),
        );
        assert_eq!(
            code(&out),
            0,
            "{example}/{suite}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    let report = fs::read_to_string(dir.path().join("rep/report_successor.csv")).unwrap();
    assert!(report.starts_with("probe_x,probe_t,residual_kind,magnitude\n"));
}

#[test]
fn problem_file_drives_build() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("prob.json"),
        r#"{
            "potential": "saddle",
            "f": "exp_xt",
            "domain": {"x_min": 0.0, "x_max": 3.0, "t_min": 0.0, "t_max": 5.0, "wedge": true},
            "base_point": [0.3, 1.0]
        }"#,
    )
    .unwrap();
    let out = hypan(
        &[
            "build",
            "--problem",
            "prob.json",
            "--n-max",
            "0",
            "--grid",
            "5x5",
            "--out",
            "run",
        ],
        dir.path(),
    );
    assert_eq!(
        code(&out),
        0,
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(dir.path().join("run/powers_0_j.csv").exists());
}
