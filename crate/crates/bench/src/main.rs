use std::fs::File;
use std::io::{self, BufWriter};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use latchmp_bench::analysis::{compute_ratio, compute_speedup, write_ratio_csv};
use latchmp_bench::rng::DEFAULT_SEED;
use latchmp_bench::{read_csv, run_sweep, write_csv, BenchError, Benchmark, RunRecord, Sweep};

#[derive(Parser)]
#[command(name = "bench", about = "Benchmarks for the latchmp runtime")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// b = c*a + b over 32-bit floats; reports MFLOP/s
    Daxpy(SweepArgs),
    /// C += A*B over n x n 64-bit matrices; reports seconds
    Dgemm(SweepArgs),
    /// Cut-off mergesort of random 32-bit integers; reports seconds and task count
    Sort(SweepArgs),
    /// Ratio grid between two result files
    Ratio {
        #[arg(long)]
        ours: PathBuf,
        #[arg(long)]
        theirs: PathBuf,
        /// Write the grid here instead of standard output
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

#[derive(Args)]
struct SweepArgs {
    /// Problem sizes, comma separated
    #[arg(long, value_delimiter = ',', required = true)]
    n: Vec<usize>,
    /// Sort cut-offs, comma separated
    #[arg(long, value_delimiter = ',')]
    cutoff: Vec<usize>,
    /// Thread counts, comma separated
    #[arg(long, value_delimiter = ',', default_value = "1")]
    threads: Vec<usize>,
    #[arg(long, default_value_t = 3)]
    reps: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Write per-repetition rows to this CSV file
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long, overrides_with = "no_verify")]
    verify: bool,
    /// Skip checking results against the serial versions
    #[arg(long)]
    no_verify: bool,
}

fn print_summary(records: &[RunRecord]) {
    println!(
        "{:<6} {:>10} {:>8} {:>7} {:>13} {:>14} {:>10}",
        "bench", "n", "cutoff", "threads", "median s", "metric", "tasks"
    );
    for r in records {
        let cutoff = r
            .cutoff
            .map(|c| c.to_string())
            .unwrap_or_else(|| "-".into());
        let tasks = r
            .task_count
            .map(|c| c.to_string())
            .unwrap_or_else(|| "-".into());
        let unit = if r.benchmark.metric_is_rate() {
            "MFLOP/s"
        } else {
            "s"
        };
        println!(
            "{:<6} {:>10} {:>8} {:>7} {:>13.6e} {:>14} {:>10}",
            r.benchmark.name(),
            r.n,
            cutoff,
            r.threads,
            r.median_seconds(),
            format!("{:.4e} {unit}", r.metric()),
            tasks
        );
    }
}

fn print_speedup(records: &[RunRecord]) {
    match compute_speedup(records) {
        Ok(table) => {
            println!("\nspeedup (median 1-thread time / median time)");
            for (key, rows) in &table.series {
                let cutoff = key
                    .cutoff
                    .map(|c| format!(" cutoff={c}"))
                    .unwrap_or_default();
                print!("{} n={}{cutoff}:", key.benchmark, key.n);
                for row in rows {
                    print!("  s({})={:.3}", row.threads, row.speedup);
                }
                println!();
            }
        }
        Err(BenchError::MissingBaseline(_)) => println!("\nno 1-thread run, speedup table omitted"),
        Err(e) => println!("\nspeedup table unavailable: {e}"),
    }
}

fn sweep(benchmark: Benchmark, a: SweepArgs) -> anyhow::Result<()> {
    if benchmark != Benchmark::Sort && !a.cutoff.is_empty() {
        anyhow::bail!("--cutoff only applies to sort");
    }
    let sweep = Sweep {
        benchmark,
        sizes: a.n,
        cutoffs: a.cutoff,
        threads: a.threads,
        reps: a.reps,
        seed: a.seed,
        verify: !a.no_verify,
    };
    let records = run_sweep(&sweep, |r| {
        eprintln!(
            "done {} n={} cutoff={:?} threads={}",
            r.benchmark, r.n, r.cutoff, r.threads
        );
    })?;
    print_summary(&records);
    print_speedup(&records);
    if let Some(path) = a.csv {
        let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        write_csv(BufWriter::new(f), &records)?;
        println!("\nwrote {}", path.display());
    }
    Ok(())
}

fn ratio(ours: PathBuf, theirs: PathBuf, out: Option<PathBuf>) -> anyhow::Result<()> {
    let load = |p: &PathBuf| -> anyhow::Result<Vec<RunRecord>> {
        let f = File::open(p).with_context(|| format!("opening {}", p.display()))?;
        read_csv(f).with_context(|| format!("reading {}", p.display()))
    };
    let grid = compute_ratio(&load(&ours)?, &load(&theirs)?)?;
    match out {
        Some(path) => {
            let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
            write_ratio_csv(BufWriter::new(f), &grid)?;
        }
        None => write_ratio_csv(io::stdout().lock(), &grid)?,
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::Daxpy(a) => sweep(Benchmark::Daxpy, a),
        Cmd::Dgemm(a) => sweep(Benchmark::Dgemm, a),
        Cmd::Sort(a) => sweep(Benchmark::Sort, a),
        Cmd::Ratio { ours, theirs, csv } => ratio(ours, theirs, csv),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
