//! Error type shared by every module of the crate.

use alloc::string::String;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A physical or numerical parameter is outside its domain.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter {
        /// Parameter name as exposed to users.
        name: &'static str,
        /// Human readable explanation.
        reason: String,
    },
    /// `p_e = 1`: the atom never reaches |g⟩.
    #[error("no decay channel to |g>; no steady state (p_e = 1)")]
    NoSteadyState,
    /// Doubling the quadrature order kept changing kernel entries.
    #[error("quadrature did not converge: order {order} still changes entries by {deviation:e}")]
    QuadratureNotConverged {
        /// Highest order tried.
        order: usize,
        /// Largest entrywise change on the last doubling.
        deviation: f64,
    },
    /// Truncation of the Fock basis lost more probability than allowed.
    #[error("truncation leakage {leakage:e} exceeds tolerance {tolerance:e} at n_max = {n_max}; increase n_max")]
    LeakageTooLarge {
        /// Measured leakage.
        leakage: f64,
        /// Configured tolerance.
        tolerance: f64,
        /// Basis cutoff in use.
        n_max: usize,
    },
    /// The initial Fock level does not fit in the basis.
    #[error("initial level n0 = {n0} is outside the basis (n_max = {n_max})")]
    LevelOutOfRange {
        /// Requested level.
        n0: usize,
        /// Basis cutoff.
        n_max: usize,
    },
    /// A linear system that should be regular turned out singular.
    #[error("singular linear system at pivot {pivot}")]
    SingularSystem {
        /// Elimination step at which the pivot vanished.
        pivot: usize,
    },
    /// A trajectory lost norm past the top of the basis.
    #[error("trajectory {trajectory} lost norm {loss:e} past n_max = {n_max}; use a larger n_max")]
    TruncationOverflow {
        /// Trajectory index.
        trajectory: u64,
        /// Accumulated norm loss.
        loss: f64,
        /// Basis cutoff.
        n_max: usize,
    },
    /// Two results that should describe the same physical setup do not.
    #[error("parameter mismatch: {0}")]
    ParameterMismatch(String),
    /// Adaptive truncation did not stabilise before the size cap.
    #[error("n_max escalation did not stabilise below the cap {cap}")]
    TruncationNotConverged {
        /// Largest basis tried.
        cap: usize,
    },
}

/// Result alias for the crate.
pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
