use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("point cloud must contain at least one point")]
    EmptyCloud,

    #[error("non-finite value encountered")]
    NonFinite,

    #[error("dimension must be positive")]
    ZeroDimension,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: ragged row with {found} fields, expected {expected}")]
    RaggedRow { line: usize, expected: usize, found: usize },

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("map is not a contraction: certified norm {norm} >= 1")]
    NotContraction { norm: f64 },

    #[error("linear solve failed: residual {residual:e}")]
    SolverFailure { residual: f64 },

    #[error("target radius {target_r:e} does not exceed the decimation floor {floor:e}")]
    InfeasibleTarget { target_r: f64, floor: f64 },

    #[error("iteration budget exceeded: {needed} iterations needed, budget {budget}")]
    IterationBudget { needed: u64, budget: u64 },

    #[error("expected a system with {expected} maps, found {found}")]
    MapCount { expected: usize, found: usize },

    #[error("witness residual {residual:e} exceeds tolerance")]
    WitnessResidual { residual: f64 },

    #[error("witness point is not a certified attractor member (deviation {deviation:e})")]
    WitnessNotCertified { deviation: f64 },

    #[error("attached witness contradicts a certified disconnection (gap {gap:e})")]
    InconsistentVerdict { gap: f64 },

    #[error("matrix is not symmetric (asymmetry {asymmetry:e})")]
    NonSymmetric { asymmetry: f64 },

    #[error("eigenvalue {eigenvalue} lies within tolerance of interval endpoint {endpoint}")]
    BoundaryEigenvalue { eigenvalue: f64, endpoint: f64 },

    #[error("matrix is singular (smallest singular value {smallest:e})")]
    Singular { smallest: f64 },

    #[error("negative eigenvalue {eigenvalue:e} in a positive semidefinite factor")]
    NegativeEigenvalue { eigenvalue: f64 },

    #[error("spectral projection selects nothing")]
    TrivialProjection,

    #[error("norm certificate failed: {norm} > {bound}")]
    CertificateFailure { norm: f64, bound: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
