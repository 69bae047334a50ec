use std::path::PathBuf;

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors emitted by channel, coding, and harness operations.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A codeword row exceeds the average power constraint.
    #[error("client {client}: codeword energy {energy} exceeds {limit} (= uses * power)")]
    PowerViolation {
        client: usize,
        energy: f64,
        limit: f64,
    },

    /// A matrix or vector has the wrong number of rows/entries.
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    /// A constellation or grid index is outside its valid range.
    #[error("index {index} out of range (max {max})")]
    IndexOutOfRange { index: u64, max: u64 },

    /// An integer value lies outside the range a decoder can produce.
    #[error("value {value} violates range [0, {max}]")]
    RangeViolation { value: u64, max: u64 },

    /// A lattice digit exceeds its per-client cap.
    #[error("digit {digit} exceeds cap {cap}")]
    DigitOutOfRange { digit: u64, cap: u64 },

    /// A constellation index or lattice integer would leave the exact
    /// double-precision integer range (2^52).
    #[error("overflow guard: {what} = {value} must stay below 2^52")]
    Overflow { what: &'static str, value: u128 },

    /// Configuration rejected during validation.
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    /// An optimization run would exceed the channel-use budget.
    #[error("budget exceeded: {iterations} iterations * {uses_per_round} uses > {budget}")]
    BudgetExceeded {
        iterations: u64,
        uses_per_round: u64,
        budget: u64,
    },

    /// I/O failure, annotated with the offending path.
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}
