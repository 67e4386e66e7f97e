//! Benchmarks for the `latchmp` runtime: daxpy, DGEMM and a cut-off
//! mergesort, plus speedup and ratio analysis over CSV results.

pub mod analysis;
pub mod config;
pub mod daxpy;
pub mod dgemm;
mod error;
mod raw;
pub mod record;
pub mod rng;
pub mod run;
pub mod sort;

pub use analysis::{compute_ratio, compute_speedup, median, RatioGrid, SpeedupTable};
pub use config::{BenchConfig, Benchmark, Sweep};
pub use error::BenchError;
pub use record::{read_csv, write_csv, RunRecord};
pub use run::{run, run_daxpy, run_dgemm, run_sort, run_sweep};
