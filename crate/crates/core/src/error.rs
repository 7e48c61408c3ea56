//! Error type shared by every module in the crate.

use thiserror::Error;

/// Everything that can go wrong in this crate.
#[derive(Debug, Error)]
pub enum Error {
    /// Two objects that must live on the same lattice dimension do not.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// A floating-point evaluation left the representable range.
    #[error("floating-point overflow while evaluating at {at:?}")]
    EvalOverflow { at: Vec<i64> },

    /// A sample box is too small for the requested operation.
    #[error("sample box too small: {reason}")]
    InsufficientBox { reason: String },

    /// A tabulated weight function has no entry for a needed shift.
    #[error("weight table has no value for shift {shift:?}")]
    MissingPhiValue { shift: Vec<i64> },

    /// An exponential witness component is zero.
    #[error("exponential witness has a zero component at axis {axis}")]
    ZeroWitnessComponent { axis: usize },

    /// An operation requires the exact backend but received floats.
    #[error("operation requires exact scalars: {context}")]
    ExactBackendRequired { context: String },

    /// A symbolic operation needs a weight given as an exponential witness,
    /// not as a finite table.
    #[error("symbolic application needs an exponential witness, found a finite table")]
    PhiNotWitness,

    /// No annihilating recurrence exists within the allowed order.
    #[error("no annihilator of order <= {max_order} found")]
    NoAnnihilator { max_order: usize },

    /// A witness-value search produced no admissible candidate.
    #[error("no admissible witness value: {context}")]
    NoCandidate { context: String },

    /// A spectral projection is too ill-conditioned to trust.
    #[error("spectral projection ill-conditioned (estimate {estimate:.3e})")]
    IllConditionedProjection { estimate: f64 },

    /// A finite group exceeds the configured size bound.
    #[error("group order {order} exceeds bound {bound}")]
    GroupTooLarge { order: u64, bound: u64 },

    /// A lattice box has inverted bounds or the wrong dimension.
    #[error("invalid lattice box: {reason}")]
    InvalidBox { reason: String },

    /// Bad scalar syntax, a malformed multi-index, an out-of-range power,
    /// or similar caller-side problems.
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

impl Error {
    /// Stable machine-readable code, used by the command-line interface.
    pub fn code(&self) -> &'static str {
        match self {
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::EvalOverflow { .. } => "eval_overflow",
            Error::InsufficientBox { .. } => "insufficient_box",
            Error::MissingPhiValue { .. } => "missing_phi_value",
            Error::ZeroWitnessComponent { .. } => "zero_witness_component",
            Error::ExactBackendRequired { .. } => "exact_backend_required",
            Error::PhiNotWitness => "phi_not_witness",
            Error::NoAnnihilator { .. } => "no_annihilator",
            Error::NoCandidate { .. } => "no_candidate",
            Error::IllConditionedProjection { .. } => "ill_conditioned_projection",
            Error::GroupTooLarge { .. } => "group_too_large",
            Error::InvalidBox { .. } => "invalid_box",
            Error::InvalidInput(_) => "invalid_input",
        }
    }
}
