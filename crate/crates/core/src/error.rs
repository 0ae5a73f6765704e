use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by the estimation and simulation routines.
#[derive(Debug, Error)]
pub enum Error {
    /// Incompatible shapes (row counts, K < p, matrix vs panel width, ...).
    #[error("dimension error: {0}")]
    Dimension(String),

    /// An argument violates its mathematical domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// An input contains NaN or infinite entries.
    #[error("non-finite input: {0}")]
    NonFinite(String),

    /// A moment matrix cannot be inverted reliably.
    #[error("singular moment matrix {name}: condition number {cond:.3e} exceeds cap {cap:.3e}")]
    SingularMoment {
        name: &'static str,
        cond: f64,
        cap: f64,
    },

    /// A matrix required to have full column rank does not.
    #[error("rank-deficient matrix: numerical rank {rank} < {cols} columns")]
    RankDeficient { rank: usize, cols: usize },

    /// A critical-value lookup missed and simulation was not permitted.
    #[error("no critical value for dim {dim}, norm {norm}, level {level}")]
    MissingCriticalValue {
        dim: usize,
        norm: &'static str,
        level: f64,
    },

    /// Too few Monte Carlo draws for the requested summary.
    #[error("insufficient draws: have {have}, need at least {need}")]
    InsufficientDraws { have: usize, need: usize },

    /// A Monte Carlo routine could not produce a valid draw.
    #[error("simulation failure: {0}")]
    Simulation(String),

    /// The critical-value cache file is malformed or inconsistent.
    #[error("cache error: {0}")]
    Cache(String),

    /// Underlying file-system failure.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}
