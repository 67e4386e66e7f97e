//! Speedup tables and cross-run ratio grids.

use std::collections::BTreeMap;
use std::io::Write;

use crate::config::Benchmark;
use crate::error::BenchError;
use crate::record::RunRecord;

/// Median of a non-empty sample; the mean of the middle pair for even sizes.
pub fn median(xs: &[f64]) -> f64 {
    assert!(!xs.is_empty(), "median of an empty sample");
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        (v[m - 1] + v[m]) / 2.0
    }
}

/// A series over thread counts sharing benchmark, n and cutoff.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct SeriesKey {
    pub benchmark: Benchmark,
    pub n: usize,
    pub cutoff: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpeedupRow {
    pub threads: usize,
    pub median_seconds: f64,
    pub metric: f64,
    pub speedup: f64,
}

#[derive(Debug, Clone, Default)]
pub struct SpeedupTable {
    pub series: BTreeMap<SeriesKey, Vec<SpeedupRow>>,
}

impl SpeedupTable {
    pub fn get(&self, key: SeriesKey, threads: usize) -> Option<&SpeedupRow> {
        self.series.get(&key)?.iter().find(|r| r.threads == threads)
    }
}

/// s(t) = time(1) / time(t) on median times. For daxpy this equals
/// mflops(t) / mflops(1) since both rates share the numerator 2n.
pub fn compute_speedup(records: &[RunRecord]) -> Result<SpeedupTable, BenchError> {
    let mut grouped: BTreeMap<SeriesKey, BTreeMap<usize, f64>> = BTreeMap::new();
    for r in records {
        let key = SeriesKey {
            benchmark: r.benchmark,
            n: r.n,
            cutoff: r.cutoff,
        };
        grouped
            .entry(key)
            .or_default()
            .insert(r.threads, r.median_seconds());
    }
    let mut table = SpeedupTable::default();
    for (key, times) in grouped {
        let base = *times.get(&1).ok_or_else(|| {
            let cutoff = key
                .cutoff
                .map(|c| format!(" cutoff={c}"))
                .unwrap_or_default();
            BenchError::MissingBaseline(format!("{} n={}{cutoff}", key.benchmark, key.n))
        })?;
        let rows = times
            .into_iter()
            .map(|(threads, t)| SpeedupRow {
                threads,
                median_seconds: t,
                metric: crate::record::metric(key.benchmark, key.n, t),
                speedup: if threads == 1 { 1.0 } else { base / t },
            })
            .collect();
        table.series.insert(key, rows);
    }
    Ok(table)
}

/// Grid cell: benchmark, thread count, and the cutoff (sort) or size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Cell {
    pub benchmark: Benchmark,
    pub threads: usize,
    pub param: usize,
}

/// r per cell. r = 2 means the other run was twice as fast; r < 1 means ours was faster.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RatioGrid {
    pub cells: BTreeMap<Cell, f64>,
}

fn grid(records: &[RunRecord]) -> BTreeMap<Cell, f64> {
    records
        .iter()
        .map(|r| {
            let cell = Cell {
                benchmark: r.benchmark,
                threads: r.threads,
                param: r.param(),
            };
            (cell, r.median_seconds())
        })
        .collect()
}

/// Performance of theirs over performance of ours, i.e. our median time
/// over theirs, per cell. Both runs must cover exactly the same cells.
pub fn compute_ratio(ours: &[RunRecord], theirs: &[RunRecord]) -> Result<RatioGrid, BenchError> {
    let (ours, theirs) = (grid(ours), grid(theirs));
    if let Some(c) = ours.keys().find(|c| !theirs.contains_key(c)) {
        return Err(BenchError::AxisMismatch(format!(
            "{} threads={} param={} only in ours",
            c.benchmark, c.threads, c.param
        )));
    }
    if let Some(c) = theirs.keys().find(|c| !ours.contains_key(c)) {
        return Err(BenchError::AxisMismatch(format!(
            "{} threads={} param={} only in theirs",
            c.benchmark, c.threads, c.param
        )));
    }
    if ours.is_empty() {
        return Err(BenchError::AxisMismatch("no cells".into()));
    }
    let cells = ours.iter().map(|(c, &t)| (*c, t / theirs[c])).collect();
    Ok(RatioGrid { cells })
}

/// Long-format heatmap CSV: `benchmark,threads,param,ratio`.
pub fn write_ratio_csv<W: Write>(out: W, grid: &RatioGrid) -> Result<(), BenchError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(["benchmark", "threads", "param", "ratio"])?;
    for (c, r) in &grid.cells {
        w.write_record([
            c.benchmark.name(),
            &c.threads.to_string(),
            &c.param.to_string(),
            &r.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
