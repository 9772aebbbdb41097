//! Monte-Carlo handshake latency measurement and the statistics used to
//! compare algorithms: mean, sample standard deviation, Wilcoxon rank-sum
//! (exact for small samples, normal approximation otherwise), percent
//! difference and QQ data.

pub mod report;
pub mod runner;
pub mod stats;

use thiserror::Error;

pub use report::{build_report, read_csv, read_report, render_table, write_csv, write_report, BenchReport, CSV_HEADER};
pub use runner::{run_benchmark, run_timed, BenchConfig, BenchSample, DEFAULT_WARMUP};
pub use stats::{percent_diff, qq_data, summarize, wilcoxon_rank_sum, wilcoxon_rank_sum_with, Method, Sided, StatsError, WilcoxonResult};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("iterations must be at least 1")]
    NoIterations,
    #[error("{algorithm} iteration {iteration}: {cause}")]
    Handshake { algorithm: String, iteration: u64, cause: String },
    #[error("warmup failed: {0}")]
    Warmup(Box<BenchError>),
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl BenchError {
    fn during_warmup(self) -> Self {
        Self::Warmup(Box::new(self))
    }

    /// True when the failure came from the network rather than crypto.
    pub fn is_transport(&self) -> bool {
        match self {
            Self::Handshake { cause, .. } => cause.starts_with("transport"),
            Self::Warmup(inner) => inner.is_transport(),
            _ => false,
        }
    }
}
