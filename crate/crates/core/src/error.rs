use thiserror::Error;

/// Errors raised by the geometry routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("τ must be nonzero")]
    ZeroTau,
    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: String, found: String },
    #[error("dilation factor must be positive, got {0}")]
    NonpositiveR(f64),
    #[error("argument must be nonnegative, got φ = {0}")]
    NegativePhi(f64),
    #[error("horizontal part (ξ, η) of the covector vanishes")]
    ZeroHorizontal,
    #[error("the extremal is a Euclidean line and never stops minimizing")]
    InfiniteCutTime,
    #[error("covector family leaves the level set H = ½ (|H − ½| = {0:e})")]
    OffLevelSet(f64),
    #[error("the origin has no cut classification")]
    OriginPoint,
    #[error("point is not in the cut locus")]
    NotACutPoint,
    #[error("point is not reached by a unique minimizer")]
    NotUniqueCutPoint,
    #[error("x must be nonzero")]
    ZeroX,
    #[error("t must be nonzero")]
    ZeroT,
    #[error("operation requires p = 1, got p = {0}")]
    WrongP(usize),
    #[error("operation requires q ≥ 2, got q = {0}")]
    WrongQ(usize),
    #[error("degenerate frame: η·|P⊥_τ ξ| vanishes")]
    DegenerateFrame,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("no start converged within tolerance (best residual {best_residual:e})")]
    NoConvergence { best_residual: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
