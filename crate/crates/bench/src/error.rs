use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{benchmark} verification failed: {detail}")]
    Verification { benchmark: String, detail: String },
    #[error("no 1-thread baseline for {0}")]
    MissingBaseline(String),
    #[error("ratio grids do not share axes: {0}")]
    AxisMismatch(String),
    #[error("malformed CSV row {row}: {detail}")]
    Malformed { row: usize, detail: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Runtime(#[from] latchmp::OmpError),
}
