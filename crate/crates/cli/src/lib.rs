//! Experiment runner behind the `gammalab` binary.

pub mod config;
pub mod fields;
pub mod output;
pub mod runner;

use std::fmt;

/// Worker-count variable; unset or `0` means one worker per core.
pub const WORKERS_ENV: &str = "GAMMALAB_WORKERS";

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, config, input file or check parameters.
    Config(String),
    /// Eigensolver failure, kernel clip overflow and the like.
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "error: {m}"),
            CliError::Numeric(m) => write!(f, "numeric failure: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<gammalab::Error> for CliError {
    fn from(e: gammalab::Error) -> Self {
        use gammalab::Error as E;
        match e {
            E::EigenNonConvergence(_) | E::Spectral(_) | E::NegativeKernelEntry { .. } | E::UnboundedCurvature => {
                CliError::Numeric(e.to_string())
            }
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Config(format!("i/o: {e}"))
    }
}

/// Thread pool sized from [`WORKERS_ENV`].
pub fn worker_pool() -> Result<rayon::ThreadPool, CliError> {
    let workers = match std::env::var(WORKERS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map_err(|_| CliError::Config(format!("{WORKERS_ENV} must be a nonnegative integer, got {v:?}")))?,
        Err(_) => 0,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Config(format!("cannot start worker pool: {e}")))
}
