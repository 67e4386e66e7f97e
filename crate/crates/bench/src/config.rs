use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::error::BenchError;
use crate::rng::DEFAULT_SEED;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Benchmark {
    Daxpy,
    Dgemm,
    Sort,
}

impl Benchmark {
    pub fn name(self) -> &'static str {
        match self {
            Benchmark::Daxpy => "daxpy",
            Benchmark::Dgemm => "dgemm",
            Benchmark::Sort => "sort",
        }
    }

    /// Whether the per-repetition metric is a rate (higher is better).
    pub fn metric_is_rate(self) -> bool {
        self == Benchmark::Daxpy
    }
}

impl fmt::Display for Benchmark {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Benchmark {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "daxpy" => Ok(Benchmark::Daxpy),
            "dgemm" => Ok(Benchmark::Dgemm),
            "sort" => Ok(Benchmark::Sort),
            other => Err(BenchError::Config(format!("unknown benchmark {other:?}"))),
        }
    }
}

/// One sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub benchmark: Benchmark,
    pub n: usize,
    /// Only meaningful for sort.
    pub cutoff: Option<usize>,
    pub threads: usize,
    pub reps: usize,
    pub seed: u64,
    pub verify: bool,
    pub output: Option<PathBuf>,
}

impl BenchConfig {
    pub fn new(benchmark: Benchmark, n: usize, threads: usize) -> Self {
        BenchConfig {
            benchmark,
            n,
            cutoff: None,
            threads,
            reps: 1,
            seed: DEFAULT_SEED,
            verify: true,
            output: None,
        }
    }

    pub fn with_cutoff(mut self, cutoff: usize) -> Self {
        self.cutoff = Some(cutoff);
        self
    }

    pub fn with_reps(mut self, reps: usize) -> Self {
        self.reps = reps;
        self
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |m: &str| Err(BenchError::Config(m.to_string()));
        if self.n < 1 {
            return bad("n must be at least 1");
        }
        if self.threads < 1 {
            return bad("threads must be at least 1");
        }
        if self.reps < 1 {
            return bad("reps must be at least 1");
        }
        match (self.benchmark, self.cutoff) {
            (Benchmark::Sort, None) => bad("sort needs a cutoff"),
            (Benchmark::Sort, Some(0)) => bad("cutoff must be at least 1"),
            (Benchmark::Sort, Some(_)) => Ok(()),
            (b, Some(_)) => Err(BenchError::Config(format!("{b} takes no cutoff"))),
            (_, None) => Ok(()),
        }
    }
}

/// Cartesian product of sizes, cutoffs and thread counts.
#[derive(Debug, Clone)]
pub struct Sweep {
    pub benchmark: Benchmark,
    pub sizes: Vec<usize>,
    /// Ignored unless the benchmark is sort.
    pub cutoffs: Vec<usize>,
    pub threads: Vec<usize>,
    pub reps: usize,
    pub seed: u64,
    pub verify: bool,
}

impl Sweep {
    pub fn configs(&self) -> Result<Vec<BenchConfig>, BenchError> {
        if self.sizes.is_empty() || self.threads.is_empty() {
            return Err(BenchError::Config("empty size or thread list".into()));
        }
        let cutoffs: Vec<Option<usize>> = match self.benchmark {
            Benchmark::Sort if self.cutoffs.is_empty() => {
                return Err(BenchError::Config("sort needs at least one cutoff".into()))
            }
            Benchmark::Sort => self.cutoffs.iter().copied().map(Some).collect(),
            _ => vec![None],
        };
        let mut out = Vec::new();
        for &threads in &self.threads {
            for &n in &self.sizes {
                for &cutoff in &cutoffs {
                    let cfg = BenchConfig {
                        benchmark: self.benchmark,
                        n,
                        cutoff,
                        threads,
                        reps: self.reps,
                        seed: self.seed,
                        verify: self.verify,
                        output: None,
                    };
                    cfg.validate()?;
                    out.push(cfg);
                }
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert!(BenchConfig::new(Benchmark::Daxpy, 10, 1).validate().is_ok());
        assert!(BenchConfig::new(Benchmark::Daxpy, 0, 1).validate().is_err());
        assert!(BenchConfig::new(Benchmark::Daxpy, 1, 0).validate().is_err());
        assert!(BenchConfig::new(Benchmark::Dgemm, 1, 1)
            .with_reps(0)
            .validate()
            .is_err());
        assert!(BenchConfig::new(Benchmark::Sort, 8, 1).validate().is_err());
        assert!(BenchConfig::new(Benchmark::Sort, 8, 1)
            .with_cutoff(0)
            .validate()
            .is_err());
        assert!(BenchConfig::new(Benchmark::Sort, 8, 1)
            .with_cutoff(1)
            .validate()
            .is_ok());
        assert!(BenchConfig::new(Benchmark::Dgemm, 8, 1)
            .with_cutoff(4)
            .validate()
            .is_err());
    }

    #[test]
    fn names_round_trip() {
        for b in [Benchmark::Daxpy, Benchmark::Dgemm, Benchmark::Sort] {
            assert_eq!(b.name().parse::<Benchmark>().unwrap(), b);
        }
        assert!("fft".parse::<Benchmark>().is_err());
    }

    #[test]
    fn sweep_expands_product() {
        let s = Sweep {
            benchmark: Benchmark::Sort,
            sizes: vec![100, 200],
            cutoffs: vec![1, 10, 100],
            threads: vec![1, 2],
            reps: 2,
            seed: 1,
            verify: true,
        };
        assert_eq!(s.configs().unwrap().len(), 12);
        let d = Sweep {
            benchmark: Benchmark::Daxpy,
            ..s
        };
        let cfgs = d.configs().unwrap();
        assert_eq!(cfgs.len(), 4);
        assert!(cfgs.iter().all(|c| c.cutoff.is_none()));
    }
}
