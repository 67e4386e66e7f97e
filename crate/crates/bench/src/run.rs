//! Timed execution of sweep points.

use std::time::Instant;

use latchmp::Runtime;

use crate::config::{BenchConfig, Benchmark, Sweep};
use crate::error::BenchError;
use crate::record::{unix_now, RunRecord};
use crate::{daxpy, dgemm, sort};

fn check(cfg: &BenchConfig, want: Benchmark) -> Result<(), BenchError> {
    cfg.validate()?;
    if cfg.benchmark != want {
        return Err(BenchError::Config(format!(
            "expected a {want} config, got {}",
            cfg.benchmark
        )));
    }
    Ok(())
}

fn record(cfg: &BenchConfig, seconds: Vec<f64>, task_count: Option<u64>) -> RunRecord {
    RunRecord {
        benchmark: cfg.benchmark,
        n: cfg.n,
        cutoff: cfg.cutoff,
        threads: cfg.threads,
        seconds,
        task_count,
        timestamp: unix_now(),
    }
}

pub fn run_daxpy(rt: &Runtime, cfg: &BenchConfig) -> Result<RunRecord, BenchError> {
    check(cfg, Benchmark::Daxpy)?;
    let inp = daxpy::Inputs::random(cfg.n, cfg.seed);
    let want = cfg.verify.then(|| inp.expected());
    let mut seconds = Vec::with_capacity(cfg.reps);
    for _ in 0..cfg.reps {
        let mut b = inp.b.clone();
        let t0 = Instant::now();
        daxpy::parallel(rt, cfg.threads, inp.c, &inp.a, &mut b)?;
        seconds.push(t0.elapsed().as_secs_f64());
        if let Some(want) = &want {
            daxpy::verify(&b, want)?;
        }
    }
    Ok(record(cfg, seconds, None))
}

pub fn run_dgemm(rt: &Runtime, cfg: &BenchConfig) -> Result<RunRecord, BenchError> {
    check(cfg, Benchmark::Dgemm)?;
    let inp = dgemm::Inputs::random(cfg.n, cfg.seed);
    let want = cfg.verify.then(|| inp.expected());
    let mut seconds = Vec::with_capacity(cfg.reps);
    for _ in 0..cfg.reps {
        let mut c = inp.c.clone();
        let t0 = Instant::now();
        dgemm::parallel(rt, cfg.threads, cfg.n, &inp.a, &inp.b, &mut c)?;
        seconds.push(t0.elapsed().as_secs_f64());
        if let Some(want) = &want {
            dgemm::verify(&c, want, dgemm::TOLERANCE)?;
        }
    }
    Ok(record(cfg, seconds, None))
}

pub fn run_sort(rt: &Runtime, cfg: &BenchConfig) -> Result<RunRecord, BenchError> {
    check(cfg, Benchmark::Sort)?;
    let cutoff = cfg.cutoff.expect("validated");
    let input = sort::random_input(cfg.n, cfg.seed);
    let mut seconds = Vec::with_capacity(cfg.reps);
    let mut tasks = 0;
    for _ in 0..cfg.reps {
        let mut data = input.clone();
        let t0 = Instant::now();
        tasks = sort::parallel(rt, cfg.threads, &mut data, cutoff)?;
        seconds.push(t0.elapsed().as_secs_f64());
        if cfg.verify {
            sort::verify(&input, &data)?;
        }
    }
    Ok(record(cfg, seconds, Some(tasks)))
}

pub fn run(rt: &Runtime, cfg: &BenchConfig) -> Result<RunRecord, BenchError> {
    match cfg.benchmark {
        Benchmark::Daxpy => run_daxpy(rt, cfg),
        Benchmark::Dgemm => run_dgemm(rt, cfg),
        Benchmark::Sort => run_sort(rt, cfg),
    }
}

/// Runs every point of the sweep. Each thread count gets its own pool with
/// that many workers, shut down before the next one starts.
pub fn run_sweep(
    sweep: &Sweep,
    mut on_record: impl FnMut(&RunRecord),
) -> Result<Vec<RunRecord>, BenchError> {
    let mut sweep = sweep.clone();
    sweep.threads.sort_unstable();
    sweep.threads.dedup();
    let configs = sweep.configs()?;
    let mut records = Vec::with_capacity(configs.len());
    for &threads in &sweep.threads {
        let rt = Runtime::new(threads)?;
        for cfg in configs.iter().filter(|c| c.threads == threads) {
            let r = run(&rt, cfg)?;
            on_record(&r);
            records.push(r);
        }
        rt.shutdown()?;
    }
    Ok(records)
}
