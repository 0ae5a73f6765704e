//! Process-level error classification. Every failure is funneled into one of
//! three exit classes: bad invocation (1), bad input data (2), or a numerical
//! failure inside the computation (3).

use std::fmt;

#[derive(Debug)]
pub enum CliError {
    /// Invalid flags or flag/data combinations; exit code 1.
    Usage(String),
    /// Unreadable or malformed input files; exit code 2.
    Data(String),
    /// Singular moments, failed simulations, and similar; exit code 3.
    Numerical(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) | CliError::Data(msg) | CliError::Numerical(msg) => {
                f.write_str(msg)
            }
        }
    }
}

/// Classification for errors raised by the computation stage, where the
/// inputs have already been ingested: shape/domain conflicts point back at
/// the invocation, everything else is genuinely numerical or environmental.
pub fn classify(err: cotrend::Error) -> CliError {
    use cotrend::Error::*;
    match err {
        Dimension(_) | Domain(_) => CliError::Usage(err.to_string()),
        RankDeficient { .. } | NonFinite(_) | Cache(_) | Io(_) => CliError::Data(err.to_string()),
        SingularMoment { .. }
        | MissingCriticalValue { .. }
        | InsufficientDraws { .. }
        | Simulation(_) => CliError::Numerical(err.to_string()),
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
