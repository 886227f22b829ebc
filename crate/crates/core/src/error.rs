//! Crate-wide error type.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

/// Errors raised by the modeling and optimization core.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A vector or matrix had the wrong size for the operation.
    DimMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    /// An input or intermediate value was NaN or infinite.
    NonFinite(&'static str),
    /// A configuration value violated its invariants.
    InvalidConfig(String),
    /// Two series that must share a length did not.
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    /// Unknown schedule profile name.
    UnknownProfile(String),
    /// An operation that needs data received none.
    EmptyInput(&'static str),
    /// A least-squares system was rank deficient.
    RankDeficient,
    /// A fitted physical parameter came out nonpositive.
    NonPositiveEstimate(&'static str),
    /// Feature schema did not expose what the operation needs.
    SchemaMismatch(String),
    /// A barrier-constrained uncontrollable feature has no paired control.
    MissingPairing(String),
    /// A plan left the feasible interior, or a step could not restore it.
    NotInterior(&'static str),
    /// Backtracking shrank the step below representable size.
    Stall,
    /// Training loss became non-finite; the loss history up to the failing
    /// epoch is preserved.
    Divergence { epoch: usize, history: Vec<f64> },
}

pub type Result<T> = core::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::DimMismatch {
                what,
                expected,
                got,
            } => write!(f, "{what}: expected dimension {expected}, got {got}"),
            Error::NonFinite(what) => write!(f, "non-finite value in {what}"),
            Error::InvalidConfig(msg) => write!(f, "invalid configuration: {msg}"),
            Error::LengthMismatch {
                what,
                expected,
                got,
            } => write!(f, "{what}: expected length {expected}, got {got}"),
            Error::UnknownProfile(name) => write!(f, "unknown schedule profile `{name}`"),
            Error::EmptyInput(what) => write!(f, "{what} must not be empty"),
            Error::RankDeficient => write!(f, "least-squares system is rank deficient"),
            Error::NonPositiveEstimate(what) => {
                write!(f, "fitted parameter `{what}` is not positive")
            }
            Error::SchemaMismatch(msg) => write!(f, "schema mismatch: {msg}"),
            Error::MissingPairing(name) => {
                write!(f, "bounded uncontrollable feature `{name}` has no paired control")
            }
            Error::NotInterior(what) => write!(f, "{what} is not strictly inside its bounds"),
            Error::Stall => write!(f, "feasibility backtracking stalled"),
            Error::Divergence { epoch, .. } => {
                write!(f, "training diverged (non-finite loss) at epoch {epoch}")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}
