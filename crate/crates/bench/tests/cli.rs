use std::process::Command;

fn bench() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bench"))
}

#[test]
fn sort_writes_one_row_per_repetition() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("out.csv");
    let out = bench()
        .args([
            "sort",
            "--n",
            "100000",
            "--cutoff",
            "1000",
            "--threads",
            "2",
            "--reps",
            "5",
            "--csv",
        ])
        .arg(&csv)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = std::fs::read_to_string(&csv).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 5);
    let want = latchmp_bench::sort::expected_tasks(100_000, 1000).to_string();
    assert!(rows.iter().all(|r| r.ends_with(&format!(",{want}"))));
}

#[test]
fn daxpy_prints_speedup_table() {
    let out = bench()
        .args(["daxpy", "--n", "10000", "--threads", "1,2,4", "--reps", "3"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("s(1)=1.000"));
    assert!(stdout.contains("s(4)="));
}

#[test]
fn ratio_of_a_file_with_itself_is_one() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let st = bench()
        .args([
            "dgemm",
            "--n",
            "32",
            "--threads",
            "1,2",
            "--reps",
            "2",
            "--csv",
        ])
        .arg(&a)
        .status()
        .unwrap();
    assert!(st.success());
    let out = bench()
        .args(["ratio", "--ours"])
        .arg(&a)
        .arg("--theirs")
        .arg(&a)
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let ratios: Vec<f64> = text
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(ratios, vec![1.0, 1.0]);
}

#[test]
fn bad_flags_fail() {
    let cases: &[&[&str]] = &[
        &["sort", "--n", "100"],
        &["sort", "--n", "100", "--cutoff", "0"],
        &["daxpy", "--n", "0"],
        &["daxpy", "--n", "10", "--threads", "0"],
        &["daxpy", "--n", "10", "--reps", "0"],
        &["daxpy", "--n", "abc"],
        &["dgemm", "--n", "10", "--cutoff", "5"],
        &["fft", "--n", "10"],
        &[],
    ];
    for args in cases {
        let st = bench().args(*args).output().unwrap();
        assert!(!st.status.success(), "{args:?} should fail");
    }
}

#[test]
fn ratio_axis_mismatch_fails() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    assert!(bench()
        .args(["daxpy", "--n", "100", "--reps", "1", "--csv"])
        .arg(&a)
        .status()
        .unwrap()
        .success());
    assert!(bench()
        .args(["daxpy", "--n", "200", "--reps", "1", "--csv"])
        .arg(&b)
        .status()
        .unwrap()
        .success());
    let out = bench()
        .args(["ratio", "--ours"])
        .arg(&a)
        .arg("--theirs")
        .arg(&b)
        .output()
        .unwrap();
    assert!(!out.status.success());
}
