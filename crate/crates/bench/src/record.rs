//! Run records and their CSV form.
//!
//! One CSV row per repetition. Metrics are recomputed from the stored
//! seconds, so a CSV file carries everything needed for later analysis.

use std::io::{Read, Write};
use std::time::{SystemTime, UNIX_EPOCH};

use crate::analysis::median;
use crate::config::Benchmark;
use crate::daxpy;
use crate::error::BenchError;

pub const HEADER: [&str; 8] = [
    "benchmark",
    "n",
    "cutoff",
    "threads",
    "rep",
    "seconds",
    "metric",
    "task_count",
];

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub benchmark: Benchmark,
    pub n: usize,
    pub cutoff: Option<usize>,
    pub threads: usize,
    /// Wall seconds per repetition, in run order.
    pub seconds: Vec<f64>,
    pub task_count: Option<u64>,
    /// Unix seconds when the record was made.
    pub timestamp: u64,
}

/// MFLOP/s for daxpy, seconds otherwise.
pub fn metric(benchmark: Benchmark, n: usize, seconds: f64) -> f64 {
    match benchmark {
        Benchmark::Daxpy => daxpy::mflops(n, seconds),
        Benchmark::Dgemm | Benchmark::Sort => seconds,
    }
}

pub fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

impl RunRecord {
    pub fn median_seconds(&self) -> f64 {
        median(&self.seconds)
    }

    /// Metric of the median time.
    pub fn metric(&self) -> f64 {
        metric(self.benchmark, self.n, self.median_seconds())
    }

    /// Sweep parameter on the non-thread axis: the cutoff for sort, n otherwise.
    pub fn param(&self) -> usize {
        self.cutoff.unwrap_or(self.n)
    }

    fn same_point(&self, other: &RunRecord) -> bool {
        self.benchmark == other.benchmark
            && self.n == other.n
            && self.cutoff == other.cutoff
            && self.threads == other.threads
    }
}

pub fn write_csv<W: Write>(out: W, records: &[RunRecord]) -> Result<(), BenchError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(HEADER)?;
    for r in records {
        let cutoff = r.cutoff.map(|c| c.to_string()).unwrap_or_default();
        let tasks = r.task_count.map(|c| c.to_string()).unwrap_or_default();
        for (rep, &s) in r.seconds.iter().enumerate() {
            w.write_record([
                r.benchmark.name(),
                &r.n.to_string(),
                &cutoff,
                &r.threads.to_string(),
                &rep.to_string(),
                &format!("{s:e}"),
                &format!("{:e}", metric(r.benchmark, r.n, s)),
                &tasks,
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn field<T: std::str::FromStr>(
    rec: &csv::StringRecord,
    i: usize,
    row: usize,
) -> Result<T, BenchError> {
    let raw = rec.get(i).unwrap_or("");
    raw.parse().map_err(|_| BenchError::Malformed {
        row,
        detail: format!("bad {} value {raw:?}", HEADER[i]),
    })
}

fn optional<T: std::str::FromStr>(
    rec: &csv::StringRecord,
    i: usize,
    row: usize,
) -> Result<Option<T>, BenchError> {
    if rec.get(i).unwrap_or("").is_empty() {
        Ok(None)
    } else {
        field(rec, i, row).map(Some)
    }
}

/// Reads rows back and regroups consecutive repetitions of one sweep
/// point into a record. The metric column is ignored.
pub fn read_csv<R: Read>(input: R) -> Result<Vec<RunRecord>, BenchError> {
    let mut rd = csv::Reader::from_reader(input);
    let header = rd.headers()?.clone();
    if header.iter().ne(HEADER) {
        return Err(BenchError::Malformed {
            row: 0,
            detail: format!("expected header {}", HEADER.join(",")),
        });
    }
    let stamp = unix_now();
    let mut out: Vec<RunRecord> = Vec::new();
    for (i, rec) in rd.records().enumerate() {
        let rec = rec?;
        let row = i + 1;
        let benchmark: Benchmark =
            rec.get(0)
                .unwrap_or("")
                .parse()
                .map_err(|_| BenchError::Malformed {
                    row,
                    detail: "unknown benchmark".into(),
                })?;
        let seconds: f64 = field(&rec, 5, row)?;
        if !(seconds.is_finite() && seconds > 0.0) {
            return Err(BenchError::Malformed {
                row,
                detail: format!("seconds must be positive, got {seconds}"),
            });
        }
        let r = RunRecord {
            benchmark,
            n: field(&rec, 1, row)?,
            cutoff: optional(&rec, 2, row)?,
            threads: field(&rec, 3, row)?,
            seconds: vec![seconds],
            task_count: optional(&rec, 7, row)?,
            timestamp: stamp,
        };
        let rep: usize = field(&rec, 4, row)?;
        match out.last_mut() {
            Some(last) if rep > 0 && last.same_point(&r) => last.seconds.push(seconds),
            _ => out.push(r),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(benchmark: Benchmark, cutoff: Option<usize>, seconds: Vec<f64>) -> RunRecord {
        RunRecord {
            benchmark,
            n: 1000,
            cutoff,
            threads: 2,
            seconds,
            task_count: cutoff.map(|_| 4),
            timestamp: 0,
        }
    }

    #[test]
    fn header_and_empty_fields() {
        let mut buf = Vec::new();
        write_csv(&mut buf, &[rec(Benchmark::Daxpy, None, vec![0.5])]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "benchmark,n,cutoff,threads,rep,seconds,metric,task_count"
        );
        let row: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(row[0], "daxpy");
        assert_eq!(row[2], "");
        assert_eq!(row[7], "");
        assert_eq!(row[6].parse::<f64>().unwrap(), 0.004);
        assert!(!text.contains('\r'));
    }

    #[test]
    fn round_trip_groups_repetitions() {
        let records = vec![
            rec(Benchmark::Sort, Some(10), vec![0.25, 0.125, 0.5]),
            rec(Benchmark::Sort, Some(100), vec![1.0 / 3.0]),
            rec(Benchmark::Dgemm, None, vec![2.0, 2.5]),
        ];
        let mut buf = Vec::new();
        write_csv(&mut buf, &records).unwrap();
        let back = read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.len(), 3);
        for (a, b) in records.iter().zip(&back) {
            assert_eq!(a.seconds, b.seconds);
            assert_eq!(
                (a.benchmark, a.n, a.cutoff, a.threads, a.task_count),
                (b.benchmark, b.n, b.cutoff, b.threads, b.task_count)
            );
        }
    }

    #[test]
    fn rejects_bad_rows() {
        let bad_header = "a,b\n1,2\n";
        assert!(read_csv(bad_header.as_bytes()).is_err());
        let bad_secs =
            "benchmark,n,cutoff,threads,rep,seconds,metric,task_count\ndaxpy,10,,1,0,-1,0,\n";
        assert!(matches!(
            read_csv(bad_secs.as_bytes()),
            Err(BenchError::Malformed { row: 1, .. })
        ));
        let bad_n = "benchmark,n,cutoff,threads,rep,seconds,metric,task_count\ndaxpy,x,,1,0,1,0,\n";
        assert!(read_csv(bad_n.as_bytes()).is_err());
    }
}
