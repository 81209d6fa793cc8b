use std::path::Path;
use std::process::{Command, Output};

fn kac(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kac"))
        .args(args)
        .current_dir(dir)
        .env_remove("KAC_OUTPUT_DIR")
        .output()
        .expect("spawn kac")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stderr_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stderr).expect("error report is JSON")
}

#[test]
fn simulate_is_byte_identical_across_threads_and_chunks() {
    let dir = tempfile::tempdir().unwrap();
    let base = [
        "simulate",
        "--law",
        "two-point:0,2,0.5",
        "--t",
        "2",
        "--size",
        "3000",
        "--seed",
        "11",
    ];
    let a = kac(
        dir.path(),
        &[&base[..], &["--threads", "1", "--name", "a"]].concat(),
    );
    let b = kac(
        dir.path(),
        &[
            &base[..],
            &["--threads", "3", "--chunk-size", "7", "--name", "b"],
        ]
        .concat(),
    );
    assert_eq!(code(&a), 0, "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(code(&b), 0);
    let fa = std::fs::read(dir.path().join("a.csv")).unwrap();
    let fb = std::fs::read(dir.path().join("b.csv")).unwrap();
    assert_eq!(fa, fb);
    assert_eq!(fa.iter().filter(|&&c| c == b'\n').count(), 3002);
}

#[test]
fn manifest_reruns_reproduce_the_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let first = kac(
        dir.path(),
        &[
            "simulate", "--law", "laplace", "--t", "1.5", "--size", "500", "--seed", "4",
            "--format", "bin", "--name", "x",
        ],
    );
    assert_eq!(code(&first), 0);
    let again = kac(
        dir.path(),
        &["--config", "x.manifest.json", "--name", "y", "simulate"],
    );
    assert_eq!(
        code(&again),
        0,
        "{}",
        String::from_utf8_lossy(&again.stderr)
    );
    assert_eq!(
        std::fs::read(dir.path().join("x.bin")).unwrap(),
        std::fs::read(dir.path().join("y.bin")).unwrap()
    );
    let wrong = kac(dir.path(), &["--config", "x.manifest.json", "solve"]);
    assert_eq!(code(&wrong), 3);
}

#[test]
fn solve_methods_agree() {
    let dir = tempfile::tempdir().unwrap();
    let out = kac(
        dir.path(),
        &[
            "solve",
            "--law",
            "rademacher",
            "--t-grid",
            "0.5,1",
            "--method",
            "both",
        ],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    for row in v["results"].as_array().unwrap() {
        let sup = row["sup_discrepancy"].as_f64().unwrap();
        assert!(sup <= 1e-4, "{row}");
    }
}

#[test]
fn errors_map_to_documented_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad_law = kac(
        dir.path(),
        &[
            "simulate", "--law", "bogus", "--t", "1", "--size", "5", "--seed", "1",
        ],
    );
    assert_eq!(code(&bad_law), 3);
    assert_eq!(stderr_json(&bad_law)["exit_code"], 3);

    let negative_t = kac(
        dir.path(),
        &[
            "simulate",
            "--law",
            "rademacher",
            "--t=-1",
            "--size",
            "5",
            "--seed",
            "1",
        ],
    );
    assert_eq!(code(&negative_t), 4);
    assert_eq!(stderr_json(&negative_t)["error"], "domain");

    let capped = kac(
        dir.path(),
        &[
            "simulate",
            "--law",
            "rademacher",
            "--t",
            "30",
            "--size",
            "5",
            "--seed",
            "1",
            "--nu-cap",
            "100",
        ],
    );
    assert_eq!(code(&capped), 5);

    let usage = kac(dir.path(), &["simulate", "--no-such-flag"]);
    assert_eq!(code(&usage), 2);
    assert!(
        std::fs::read_dir(dir.path()).unwrap().next().is_none(),
        "failed runs leave no artifacts"
    );
}

#[test]
fn verify_quick_prints_a_passing_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = kac(dir.path(), &["verify", "--quick"]);
    let text = String::from_utf8_lossy(&out.stdout);
    assert_eq!(code(&out), 0, "{text}");
    assert!(
        text.lines().filter(|l| l.starts_with("PASS")).count() >= 5,
        "{text}"
    );
    assert!(text.trim_end().ends_with("checks passed"), "{text}");
}

#[test]
fn rate_study_writes_table_and_chart_under_output_dir_env() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_kac"))
        .args([
            "rate-study",
            "--law",
            "rademacher",
            "--t-grid",
            "1,2,3,4",
            "--size",
            "2000",
            "--seed",
            "5",
            "--name",
            "rs",
        ])
        .current_dir(dir.path())
        .env("KAC_OUTPUT_DIR", "out")
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let dat = std::fs::read_to_string(dir.path().join("out/rs.dat")).unwrap();
    assert_eq!(
        dat.lines()
            .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
            .count(),
        4
    );
    let svg = std::fs::read_to_string(dir.path().join("out/rs.svg")).unwrap();
    assert_eq!(svg.matches("class=\"curve\"").count(), 2);
    assert!(dir.path().join("out/rs.manifest.json").exists());
}
