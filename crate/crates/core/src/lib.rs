//! Simulation and audit toolkit for k-account collusion against
//! noise-then-select multi-tenant retrieval.

pub mod accounting;
pub mod attacks;
pub mod digest;
pub mod mechanism;
pub mod stats;
pub mod error;
pub mod estimator;
pub mod ledger;
pub mod audit;

pub use error::{Error, Result};

/// Crate version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
