use thiserror::Error;

/// Errors raised by the accounting, simulation, ledger and audit layers.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter is outside the domain of the formula or operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Policy fails the `delta_policy > k_max * delta_acc` constraint.
    #[error("policy not well-formed: delta_policy {delta_policy:e} <= k_max {k_max} * delta_acc {delta_acc:e}")]
    IllFormedPolicy {
        delta_policy: f64,
        k_max: u32,
        delta_acc: f64,
    },

    /// The noise scale in a policy does not match the calibrated value.
    #[error("calibration mismatch: policy sigma {policy_sigma} vs calibrated {calibrated_sigma}")]
    CalibrationMismatch {
        policy_sigma: f64,
        calibrated_sigma: f64,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("ledger error: {0}")]
    Ledger(String),

    #[error("malformed encoding: {0}")]
    Encoding(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
