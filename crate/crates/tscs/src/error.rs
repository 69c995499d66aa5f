use std::fmt;

use crate::welfare::FractionalAllocation;

pub type Result<T> = std::result::Result<T, Error>;

/// Failure modes of the library. Every enumerating operation is capped and
/// reports the offending size instead of truncating silently.
#[derive(Debug, Clone)]
pub enum Error {
    /// The product of the prior supports exceeds the realization cap.
    EnumerationTooLarge { size: u128, cap: u64 },
    /// A set-function oracle was asked for more buyers than the bitmask width.
    GroundSetTooLarge { n: usize, max: usize },
    /// An assignment violates capacity, disjointness, or the ground set.
    InvalidAssignment { reason: String },
    /// An operation was invoked outside its model class.
    ModelMismatch { reason: String },
    /// A capped enumeration (assignments, LP columns, lottery atoms, audit grid) is too large.
    SizeCapExceeded {
        what: &'static str,
        size: u128,
        cap: u64,
    },
    /// The assignment LP returned a fractional optimum where an integral one
    /// was required; carries the fractional solution as evidence.
    IntegralityFailure { allocation: Box<FractionalAllocation> },
    /// No convex decomposition of the scaled fractional solution exists within
    /// the gamma cap; `best_gamma` is the LP-certified minimum.
    DecompositionFailure { best_gamma: f64, gamma_cap: f64 },
    /// The conformant sample-count formula exceeds exact integer range;
    /// pass a sample override instead.
    SampleCountOverflow { required: f64 },
    /// Scenario data failed validation.
    InvalidScenario { context: String, reason: String },
    /// The LP solver reported a status that should be unreachable for this model.
    LpFailure { reason: String },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::EnumerationTooLarge { size, cap } => {
                write!(f, "enumeration too large: product support size {size} exceeds cap {cap}")
            }
            Error::GroundSetTooLarge { n, max } => {
                write!(f, "ground set of {n} buyers exceeds the {max}-bit subset encoding")
            }
            Error::InvalidAssignment { reason } => write!(f, "invalid assignment: {reason}"),
            Error::ModelMismatch { reason } => write!(f, "model mismatch: {reason}"),
            Error::SizeCapExceeded { what, size, cap } => {
                write!(f, "{what} enumeration of size {size} exceeds cap {cap}")
            }
            Error::IntegralityFailure { allocation } => write!(
                f,
                "integrality failure: LP optimum {} is fractional across {} columns",
                allocation.w_star,
                allocation.entries.len()
            ),
            Error::DecompositionFailure { best_gamma, gamma_cap } => write!(
                f,
                "decomposition failure: minimal feasible gamma {best_gamma} exceeds cap {gamma_cap}"
            ),
            Error::SampleCountOverflow { required } => write!(
                f,
                "conformant sample count {required:.3e} overflows exact integer range; use a sample override"
            ),
            Error::InvalidScenario { context, reason } => {
                write!(f, "invalid scenario ({context}): {reason}")
            }
            Error::LpFailure { reason } => write!(f, "LP solve failed: {reason}"),
        }
    }
}

impl std::error::Error for Error {}
