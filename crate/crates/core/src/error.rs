use alloc::string::String;

/// Errors reported by the allocation solvers.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("{what} index {index} out of range (len {len})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        len: usize,
    },

    #[error("invalid value for {what}: {reason}")]
    InvalidInput { what: &'static str, reason: String },

    /// The source multiplier dropped below the admissible floor, which
    /// makes the Lagrangian unbounded above.
    #[error("source multiplier {mu_s:e} below floor: Lagrangian is unbounded")]
    UnboundedDual { mu_s: f64 },

    /// Carries the smallest dual value seen, which still bounds the optimum.
    #[error("no feasible iterate found within {iterations} dual iterations")]
    NoFeasibleIterate { iterations: usize, best_dual_value: f64 },

    #[error("instance too large for exhaustive oracle ({subcarriers} subcarriers, {relays} relays)")]
    InstanceTooLarge { subcarriers: usize, relays: usize },
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invalid(what: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidInput {
        what,
        reason: reason.into(),
    }
}

pub(crate) fn check_len(what: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            what,
            expected,
            found,
        })
    }
}
