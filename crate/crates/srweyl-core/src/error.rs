use alloc::string::String;

/// Errors raised by the core operations.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// Two objects that must live in the same dimension do not.
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch {
        /// Dimension required by the operation.
        expected: usize,
        /// Dimension actually supplied.
        found: usize,
    },
    /// A bracket word or coordinate index lies outside its admissible range.
    #[error("index {index} out of range 1..={max}")]
    IndexOutOfRange {
        /// Offending index (1-based).
        index: usize,
        /// Largest admissible index.
        max: usize,
    },
    /// Input that is structurally invalid (empty word, empty frame, bad syntax).
    #[error("invalid input: {0}")]
    Invalid(String),
    /// Rank `n` was not reached by brackets of length at most `r_max`.
    #[error("bracket-generating condition fails at the point: rank {rank} < {dim} with brackets up to length {r_max}")]
    HormanderFailure {
        /// Rank reached.
        rank: usize,
        /// Ambient dimension.
        dim: usize,
        /// Search cap on bracket length.
        r_max: usize,
    },
    /// The point does not lie in the requested coordinate subspace.
    #[error("point is not in the coordinate subspace (coordinate {0} is nonzero)")]
    PointNotInSubspace(usize),
    /// Canonical shifted coordinates are not privileged at the point.
    #[error("coordinates are not privileged at the point")]
    NotPrivileged,
    /// A dilation produced a negative power of the scale parameter.
    #[error("negative homogeneity: field {field}, component {component}, exponent {exponent}")]
    NegativeHomogeneity {
        /// Field index (1-based).
        field: usize,
        /// Component index (1-based).
        component: usize,
        /// The offending scale exponent.
        exponent: i64,
    },
    /// Regression samples do not determine the fit.
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
    /// A two-term fit over too short a range.
    #[error("ill-conditioned fit: {0}")]
    IllConditioned(String),
    /// Spectrum cutoff is too small for the requested evaluation.
    #[error("cutoff too small: {0}")]
    CutoffTooSmall(String),
    /// Quadrature failed to reach the requested tolerance.
    #[error("quadrature did not converge: {0}")]
    Nonconvergence(String),
    /// A black-box function lacks the derivatives an expansion needs.
    #[error("insufficient smoothness: need {needed} derivatives, declared {declared}")]
    InsufficientSmoothness {
        /// Derivative order required.
        needed: u32,
        /// Derivative order declared by the caller.
        declared: u32,
    },
    /// No closed-form leading coefficient is available for this nested shape.
    #[error("unsupported shape: {0}")]
    UnsupportedShape(String),
    /// A stratification violates its structural invariants.
    #[error("invalid stratification: {0}")]
    InvalidStratification(String),
}

/// Result alias for the crate.
pub type Result<T> = core::result::Result<T, Error>;
