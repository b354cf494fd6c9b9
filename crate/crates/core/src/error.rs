//! Error type shared across the crate.

use alloc::string::String;
use core::fmt;

/// Errors produced by model construction, solvers, and the simulator.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A model or configuration parameter violates its domain constraint.
    InvalidParameter(String),
    /// An argument to an operation is outside its admissible range.
    OutOfRange(String),
    /// A numerical procedure detected an inconsistent or unstable state
    /// (zero pivot, lost monotonicity, positivity failure, ...).
    Numerical(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidParameter(msg) => write!(f, "invalid parameter: {msg}"),
            Error::OutOfRange(msg) => write!(f, "out of range: {msg}"),
            Error::Numerical(msg) => write!(f, "numerical failure: {msg}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;
