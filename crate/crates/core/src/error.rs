use thiserror::Error;

/// Errors surfaced by construction, sweeping, verification, and estimation routines.
#[derive(Debug, Error)]
pub enum Error {
    /// A time argument violates the required ordering (forward evolution only).
    #[error("time ordering violated: {0}")]
    TimeOrder(String),

    /// A parameter is outside its admissible range.
    #[error("invalid parameter: {0}")]
    Param(String),

    /// A vector or family has the wrong dimension for the operator it is used with.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    /// A sweep grid has no cells.
    #[error("empty grid: {0}")]
    EmptyGrid(String),

    /// A trajectory was evaluated left of its earliest defined argument.
    #[error("trajectory argument outside domain: {0}")]
    Domain(String),

    /// Two points that must live in the same trajectory space do not.
    #[error("points belong to different trajectory spaces: {0}")]
    SpaceMismatch(String),

    /// A projection family was indexed by the wrong kind of index
    /// (time index vs. base-point index).
    #[error("projection family '{label}' expects {expected} indexing")]
    IndexKind { label: String, expected: String },

    /// A compatibility check received the wrong number of families for its regime.
    #[error("regime {regime} needs {expected} families, got {got}")]
    FamilyCount { regime: String, expected: usize, got: usize },

    /// The supplied projection families fail a structural precondition,
    /// so the downstream check is not meaningful.
    #[error("families fail '{condition}' in regime {regime} (residual {residual:.3e})")]
    IncompatibleFamilies {
        regime: String,
        condition: String,
        residual: f64,
    },

    /// A certificate scoped to one mode was passed to a check in the other mode.
    #[error("certificate scope mismatch: expected {expected}, found {found}")]
    ScopeMismatch { expected: String, found: String },

    /// Adaptive quadrature hit its subdivision cap before reaching the tolerance.
    #[error("quadrature did not converge: {0}")]
    NonConvergence(String),

    /// No positive decay rate fits the sampled data, so an integral tail
    /// past the quadrature horizon cannot be bounded.
    #[error("integral tail cannot be bounded: fitted decay rate {beta} is not positive")]
    TailUnbounded { beta: f64 },

    /// No admissible gap was found when converting envelope functions
    /// back into rate constants.
    #[error("no admissible gap: {0}")]
    NoDelta(String),

    /// One or more of the one-step hypotheses needed by the integral-condition
    /// pipeline could not be established from the sampled data.
    #[error("hypothesis search failed: {missing}")]
    HypothesisFail { missing: String },

    /// A configuration document is malformed or self-contradictory.
    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
