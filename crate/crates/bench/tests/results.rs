use std::fs::File;

use latchmp_bench::analysis::{compute_ratio, compute_speedup, write_ratio_csv, SeriesKey};
use latchmp_bench::record::metric;
use latchmp_bench::{read_csv, run_sweep, write_csv, BenchError, Benchmark, RunRecord, Sweep};
use proptest::prelude::*;

fn rec(
    benchmark: Benchmark,
    n: usize,
    cutoff: Option<usize>,
    threads: usize,
    seconds: &[f64],
) -> RunRecord {
    RunRecord {
        benchmark,
        n,
        cutoff,
        threads,
        seconds: seconds.to_vec(),
        task_count: cutoff.map(|_| 4),
        timestamp: 0,
    }
}

fn key(benchmark: Benchmark, n: usize, cutoff: Option<usize>) -> SeriesKey {
    SeriesKey {
        benchmark,
        n,
        cutoff,
    }
}

#[test]
fn identical_times_give_unit_speedup() {
    let rs: Vec<_> = [1, 2, 4]
        .iter()
        .map(|&t| rec(Benchmark::Dgemm, 100, None, t, &[0.3, 0.3]))
        .collect();
    let table = compute_speedup(&rs).unwrap();
    for t in [1, 2, 4] {
        assert_eq!(
            table
                .get(key(Benchmark::Dgemm, 100, None), t)
                .unwrap()
                .speedup,
            1.0
        );
    }
}

#[test]
fn halved_time_gives_speedup_two() {
    let rs = vec![
        rec(Benchmark::Sort, 1000, Some(10), 1, &[0.8, 0.9, 1.0]),
        rec(Benchmark::Sort, 1000, Some(10), 2, &[0.45, 0.4, 0.5]),
    ];
    let table = compute_speedup(&rs).unwrap();
    let k = key(Benchmark::Sort, 1000, Some(10));
    assert_eq!(table.get(k, 1).unwrap().speedup, 1.0);
    assert_eq!(table.get(k, 2).unwrap().speedup, 2.0);
}

#[test]
fn daxpy_speedup_is_rate_ratio() {
    let rs = vec![
        rec(Benchmark::Daxpy, 1_000_000, None, 1, &[0.004]),
        rec(Benchmark::Daxpy, 1_000_000, None, 4, &[0.001]),
    ];
    let table = compute_speedup(&rs).unwrap();
    let k = key(Benchmark::Daxpy, 1_000_000, None);
    let (one, four) = (table.get(k, 1).unwrap(), table.get(k, 4).unwrap());
    assert!((four.metric / one.metric - four.speedup).abs() < 1e-12);
    assert!((four.speedup - 4.0).abs() < 1e-12);
}

#[test]
fn missing_baseline_is_an_error() {
    let rs = vec![rec(Benchmark::Daxpy, 10, None, 2, &[1.0])];
    assert!(matches!(
        compute_speedup(&rs),
        Err(BenchError::MissingBaseline(_))
    ));
}

#[test]
fn ratio_examples() {
    let ours: Vec<_> = [1, 4]
        .iter()
        .map(|&t| rec(Benchmark::Sort, 100, Some(10), t, &[1.0]))
        .collect();
    let same = compute_ratio(&ours, &ours).unwrap();
    assert!(same.cells.values().all(|&r| r == 1.0));

    let faster: Vec<_> = [1, 4]
        .iter()
        .map(|&t| rec(Benchmark::Sort, 100, Some(10), t, &[0.5]))
        .collect();
    let grid = compute_ratio(&ours, &faster).unwrap();
    assert!(grid.cells.values().all(|&r| r == 2.0));
    let grid = compute_ratio(&faster, &ours).unwrap();
    assert!(grid.cells.values().all(|&r| r == 0.5));
}

#[test]
fn ratio_axis_mismatch() {
    let ours = vec![
        rec(Benchmark::Daxpy, 100, None, 1, &[1.0]),
        rec(Benchmark::Daxpy, 100, None, 2, &[1.0]),
    ];
    let theirs = vec![rec(Benchmark::Daxpy, 100, None, 1, &[1.0])];
    assert!(matches!(
        compute_ratio(&ours, &theirs),
        Err(BenchError::AxisMismatch(_))
    ));
    assert!(matches!(
        compute_ratio(&theirs, &ours),
        Err(BenchError::AxisMismatch(_))
    ));
    let other_size = vec![rec(Benchmark::Daxpy, 200, None, 1, &[1.0])];
    assert!(compute_ratio(&theirs, &other_size).is_err());
}

#[test]
fn sweep_csv_round_trip_on_disk() {
    let sweep = Sweep {
        benchmark: Benchmark::Sort,
        sizes: vec![20_000],
        cutoffs: vec![100, 20_000],
        threads: vec![1, 2],
        reps: 3,
        seed: 11,
        verify: true,
    };
    let records = run_sweep(&sweep, |_| {}).unwrap();
    assert_eq!(records.len(), 4);
    assert!(records.iter().all(|r| r.seconds.len() == 3));
    assert!(records
        .iter()
        .filter(|r| r.cutoff == Some(20_000))
        .all(|r| r.task_count == Some(4)));

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sort.csv");
    write_csv(File::create(&path).unwrap(), &records).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 1 + 4 * 3);

    let back = read_csv(File::open(&path).unwrap()).unwrap();
    assert_eq!(back.len(), records.len());
    for (a, b) in records.iter().zip(&back) {
        assert_eq!(a.seconds, b.seconds);
        assert_eq!(a.task_count, b.task_count);
        assert_eq!(a.metric(), b.metric());
    }
    // metric column is recomputable from the seconds column
    let mut rd = csv::Reader::from_path(&path).unwrap();
    for row in rd.records() {
        let row = row.unwrap();
        let n: usize = row[1].parse().unwrap();
        let s: f64 = row[5].parse().unwrap();
        let m: f64 = row[6].parse().unwrap();
        assert_eq!(m, metric(Benchmark::Sort, n, s));
    }
    let speed = compute_speedup(&back).unwrap();
    assert_eq!(speed.series.len(), 2);

    let grid = compute_ratio(&back, &records).unwrap();
    assert!(grid.cells.values().all(|&r| r == 1.0));
    let mut out = Vec::new();
    write_ratio_csv(&mut out, &grid).unwrap();
    let out = String::from_utf8(out).unwrap();
    assert_eq!(out.lines().next().unwrap(), "benchmark,threads,param,ratio");
    assert_eq!(out.lines().count(), 5);
}

#[test]
fn daxpy_and_dgemm_sweeps_verify() {
    for benchmark in [Benchmark::Daxpy, Benchmark::Dgemm] {
        let sweep = Sweep {
            benchmark,
            sizes: vec![40, 200],
            cutoffs: vec![],
            threads: vec![3, 1, 3],
            reps: 2,
            seed: 3,
            verify: true,
        };
        let records = run_sweep(&sweep, |_| {}).unwrap();
        assert_eq!(records.len(), 4);
        let table = compute_speedup(&records).unwrap();
        assert!(table.series.values().flatten().all(|r| r.speedup > 0.0));
    }
}

proptest! {
    #[test]
    fn speedup_baseline_and_ratio_positive(times in prop::collection::vec(prop::collection::vec(1e-6f64..10.0, 1..5), 1..6)) {
        let rs: Vec<_> = times.iter().enumerate().map(|(i, s)| rec(Benchmark::Dgemm, 64, None, i + 1, s)).collect();
        let table = compute_speedup(&rs).unwrap();
        prop_assert_eq!(table.get(key(Benchmark::Dgemm, 64, None), 1).unwrap().speedup, 1.0);
        let grid = compute_ratio(&rs, &rs).unwrap();
        prop_assert!(grid.cells.values().all(|&r| r == 1.0));
        let shifted: Vec<_> = rs.iter().map(|r| RunRecord { seconds: r.seconds.iter().map(|s| s * 3.0).collect(), ..r.clone() }).collect();
        let grid = compute_ratio(&rs, &shifted).unwrap();
        prop_assert!(grid.cells.values().all(|&r| r > 0.0 && (r - 1.0 / 3.0).abs() < 1e-12));
    }
}
