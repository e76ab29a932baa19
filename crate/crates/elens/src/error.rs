use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Clone, Error)]
#[non_exhaustive]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("kernel matrix is not symmetric (max deviation {deviation:.3e})")]
    AsymmetricKernel { deviation: f64 },

    #[error("feature matrix is rank deficient (rank {rank} < {columns} columns)")]
    RankDeficientFeatures { rank: usize, columns: usize },

    #[error("kernel is not conditionally positive semi-definite: projected eigenvalue {eigenvalue:.6e}")]
    NotConditionallyPsd { eigenvalue: f64 },

    #[error("marginal kernel eigenvalue {eigenvalue:.6e} outside [0, 1]")]
    KernelOutOfRange { eigenvalue: f64 },

    #[error("marginal kernel has a near-zero diagonal entry at index {index}; repulsion index undefined")]
    DegenerateMarginal { index: usize },

    #[error("invalid size {requested}: must lie in [{lo}, {hi}]")]
    InvalidSize { requested: usize, lo: usize, hi: usize },

    #[error("sample size {requested} out of range [{lo}, {hi}]")]
    SizeOutOfRange { requested: usize, lo: usize, hi: usize },

    #[error("input columns are not orthonormal (deviation {deviation:.3e})")]
    NonOrthonormalInput { deviation: f64 },

    #[error("numerical breakdown in {context}")]
    NumericalBreakdown { context: &'static str },

    #[error("Gibbs chain state became singular and could not be rebuilt")]
    SingularState,

    #[error("distance exponent beta = {beta} is an even integer; the kernel is not conditionally positive definite there")]
    EvenBeta { beta: f64 },

    #[error("graph is disconnected: {zero_eigenvalues} zero Laplacian eigenvalues")]
    DisconnectedGraph { zero_eigenvalues: usize },

    #[error("invalid graph Laplacian: {0}")]
    InvalidLaplacian(&'static str),

    #[error("target expected size {target} out of reachable range [{lo}, {hi})")]
    TargetOutOfRange { target: f64, lo: f64, hi: f64 },

    #[error("interpolation system is singular")]
    SingularSystem,

    #[error("ground set of size {n} too large to enumerate (max {max})")]
    GroundSetTooLarge { n: usize, max: usize },

    #[error("polynomial basis has {columns} monomials but the cloud has only {rows} points; the feature matrix cannot have full column rank")]
    OverflowGuard { columns: usize, rows: usize },

    #[error("index {index} out of range for ground set of size {n}")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("invalid sample set: {0}")]
    InvalidSampleSet(&'static str),

    #[error("invalid configuration: {0}")]
    InvalidConfig(&'static str),

    #[error("invalid parameter {name}: {message}")]
    InvalidParameter {
        name: &'static str,
        message: &'static str,
    },
}

/// Coarse classification used by callers that map failures to exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    /// Bad arguments or requests: the caller asked for something impossible.
    InvalidInput,
    /// The model itself fails validation.
    InvalidModel,
    /// A numerical procedure broke down on a valid request.
    Numerical,
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        use Error::*;
        match self {
            DimensionMismatch { .. }
            | InvalidSize { .. }
            | SizeOutOfRange { .. }
            | TargetOutOfRange { .. }
            | GroundSetTooLarge { .. }
            | OverflowGuard { .. }
            | IndexOutOfRange { .. }
            | InvalidSampleSet(_)
            | InvalidConfig(_)
            | InvalidParameter { .. } => ErrorCategory::InvalidInput,
            AsymmetricKernel { .. }
            | RankDeficientFeatures { .. }
            | NotConditionallyPsd { .. }
            | KernelOutOfRange { .. }
            | EvenBeta { .. }
            | DisconnectedGraph { .. }
            | InvalidLaplacian(_)
            | NonOrthonormalInput { .. } => ErrorCategory::InvalidModel,
            DegenerateMarginal { .. }
            | NumericalBreakdown { .. }
            | SingularState
            | SingularSystem => ErrorCategory::Numerical,
        }
    }
}

pub type Result<T> = core::result::Result<T, Error>;
