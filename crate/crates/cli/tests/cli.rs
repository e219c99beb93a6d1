use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use adastrat::data::synthetic_logistic;

fn adastrat(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_adastrat"))
        .args(args)
        .env_remove("ADASTRAT_GERMAN_PATH")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn small_toy(out: &Path) -> Output {
    adastrat(&[
        "bench",
        "--experiment",
        "toy",
        "--s",
        "3",
        "--kmin",
        "4",
        "--kmax",
        "7",
        "--reps",
        "8",
        "--estimators",
        "mc,adastrat",
        "--seed",
        "42",
        "--out",
        out.to_str().unwrap(),
    ])
}

#[test]
fn bench_then_slope() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("toy.csv");
    let out = small_toy(&csv);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "estimator,s,N,total_evals,replicates,mean_estimate,reference,rmse,rel_rmse,mean_var_estimate,wall_seconds"
    );
    assert_eq!(lines.count(), 8);

    let out = adastrat(&[
        "slope",
        "--in",
        csv.to_str().unwrap(),
        "--estimator",
        "adastrat",
    ]);
    assert_eq!(code(&out), 0);
    let slope: f64 = String::from_utf8(out.stdout)
        .unwrap()
        .trim()
        .parse()
        .unwrap();
    assert!(slope < 0.0);
}

#[test]
fn output_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    assert_eq!(code(&small_toy(&a)), 0);
    assert_eq!(code(&small_toy(&b)), 0);
    assert_eq!(fs::read(a).unwrap(), fs::read(b).unwrap());
}

#[test]
fn stdout_when_no_output_path() {
    let out = adastrat(&[
        "bench",
        "--experiment",
        "linear",
        "--s",
        "2",
        "--lambda",
        "1,-0.5",
        "--kmin",
        "2",
        "--kmax",
        "4",
        "--reps",
        "4",
        "--estimators",
        "oracle,adastrat-var,haber",
        "--haber-j",
        "2,3,4",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 1 + 3 + 3 + 3);
    assert!(text.contains("\nhaber,2,9,9,4,"));
}

#[test]
fn config_errors_exit_2() {
    for args in [
        &[
            "bench",
            "--experiment",
            "toy",
            "--s",
            "2",
            "--kmin",
            "6",
            "--kmax",
            "4",
        ][..],
        &[
            "bench",
            "--experiment",
            "toy",
            "--s",
            "2",
            "--kmin",
            "2",
            "--kmax",
            "4",
            "--reps",
            "1",
        ],
        &[
            "bench",
            "--experiment",
            "toy",
            "--s",
            "2",
            "--kmin",
            "2",
            "--kmax",
            "4",
            "--estimators",
            "qmc",
        ],
        &[
            "bench",
            "--experiment",
            "torus",
            "--s",
            "2",
            "--kmin",
            "2",
            "--kmax",
            "4",
        ],
        &[
            "bench",
            "--experiment",
            "logistic",
            "--s",
            "2",
            "--kmin",
            "2",
            "--kmax",
            "4",
            "--estimators",
            "oracle",
        ],
        &[
            "bench",
            "--experiment",
            "toy",
            "--s",
            "5",
            "--kmin",
            "2",
            "--kmax",
            "4",
            "--estimators",
            "haber",
        ],
        &[
            "bench",
            "--experiment",
            "sine",
            "--s",
            "3",
            "--kmin",
            "2",
            "--kmax",
            "4",
        ],
        &["bench", "--experiment", "toy"],
        &["frobnicate"],
    ] {
        let out = adastrat(args);
        assert_eq!(
            code(&out),
            2,
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
}

#[test]
fn io_errors_exit_3() {
    let out = adastrat(&[
        "bench",
        "--experiment",
        "logistic",
        "--s",
        "5",
        "--kmin",
        "2",
        "--kmax",
        "4",
        "--data",
        "/nonexistent/german.data-numeric",
    ]);
    assert_eq!(code(&out), 3);
    let out = adastrat(&[
        "bench",
        "--experiment",
        "logistic",
        "--s",
        "5",
        "--kmin",
        "2",
        "--kmax",
        "4",
    ]);
    assert_eq!(code(&out), 3, "missing data without flag or env");
    let out = adastrat(&["slope", "--in", "/nonexistent/x.csv", "--estimator", "mc"]);
    assert_eq!(code(&out), 3);
}

#[test]
fn logistic_from_environment_path() {
    let data = synthetic_logistic(150, &[1.0, -0.5, 0.25], 9).unwrap();
    let mut text = String::new();
    for i in 0..data.n() {
        for j in 0..data.s() {
            write!(text, "{:>10.5} ", data.design[(i, j)]).unwrap();
        }
        writeln!(text, "{}", if data.labels[i] > 0.0 { 1 } else { 2 }).unwrap();
    }
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("german.data-numeric");
    fs::write(&path, text).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_adastrat"))
        .args([
            "bench",
            "--experiment",
            "logistic",
            "--s",
            "3",
            "--kmin",
            "3",
            "--kmax",
            "5",
            "--reps",
            "4",
        ])
        .env("ADASTRAT_GERMAN_PATH", &path)
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let rows = String::from_utf8(out.stdout).unwrap();
    assert_eq!(rows.lines().count(), 1 + 2 * 3);
}
