use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum KronError {
    #[error("shape mismatch in {context}: expected {expected}, got {got}")]
    ShapeMismatch {
        context: &'static str,
        expected: String,
        got: String,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dense allocation of {needed} bytes exceeds budget of {budget} bytes (set KRONINFER_MAX_DENSE_BYTES to raise it)")]
    CapacityExceeded { needed: u64, budget: u64 },

    #[error("singular flattening: condition estimate {cond:.3e} exceeds 1e12")]
    SingularTensor { cond: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("solver diverged at iteration {iteration} (eta = {eta}): iterate is not finite")]
    Divergence { eta: f64, iteration: usize },

    #[error("malformed input: {0}")]
    Malformed(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, KronError>;

/// Environment variable capping dense tensor allocations.
pub const MAX_DENSE_BYTES_VAR: &str = "KRONINFER_MAX_DENSE_BYTES";

const DEFAULT_MAX_DENSE_BYTES: u64 = 2 * 1024 * 1024 * 1024;

/// Current dense-allocation budget in bytes (re-read on every call so tests
/// can vary the environment).
pub fn max_dense_bytes() -> u64 {
    std::env::var(MAX_DENSE_BYTES_VAR)
        .ok()
        .and_then(|v| v.trim().parse::<u64>().ok())
        .unwrap_or(DEFAULT_MAX_DENSE_BYTES)
}

/// Checks an f64 element count against the dense budget.
pub fn check_dense_budget(elements: u64) -> Result<()> {
    let needed = (elements as u128) * 8;
    let budget = max_dense_bytes();
    if needed > budget as u128 {
        Err(KronError::CapacityExceeded {
            needed: needed.min(u64::MAX as u128) as u64,
            budget,
        })
    } else {
        Ok(())
    }
}

/// Budget check for a dense rows x cols f64 matrix, overflow-safe.
pub fn check_dense_matrix(rows: usize, cols: usize) -> Result<()> {
    let elements = (rows as u128) * (cols as u128);
    let needed = elements.saturating_mul(8);
    let budget = max_dense_bytes();
    if needed > budget as u128 {
        Err(KronError::CapacityExceeded {
            needed: needed.min(u64::MAX as u128) as u64,
            budget,
        })
    } else {
        Ok(())
    }
}
