use thiserror::Error;

/// Failures raised by the numerical routines.
///
/// Every variant has a stable identifier (see [`Error::name`]) that the CLI
/// prints and that sweep output uses as a per-point status flag.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix contains non-finite entries")]
    NonFinite,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("eigensolver exceeded its iteration budget")]
    NonConvergence,
    #[error("matrix is numerically defective (eigenvector condition number {cond:.3e})")]
    NearDefective { cond: f64 },
    #[error("matrix is numerically singular (condition number {cond:.3e})")]
    SingularMatrix { cond: f64 },
    #[error("Sylvester pencil is singular: x_{i} + x_{j} = {sum:.3e}")]
    SingularPencil { i: usize, j: usize, sum: f64 },
    #[error("degenerate spectrum (smallest gap {gap:.3e})")]
    DegenerateSpectrum { gap: f64 },
    #[error("eigenstate {state} cannot be continued across the stencil (best overlap {overlap:.3})")]
    ContinuationAmbiguous { state: usize, overlap: f64 },
    #[error("operator is not Hermitian (deviation {deviation:.3e})")]
    NotHermitian { deviation: f64 },
    #[error("state index {index} out of range for dimension {dim}")]
    StateIndex { index: usize, dim: usize },
    #[error("parameter point lies on a critical line: {0}")]
    OnCriticalLine(String),
    #[error("phase function f(delta, t) is singular at this point")]
    FSingular,
    #[error("band touching at k = {k:.6}")]
    CriticalKPoint { k: f64 },
    #[error("invalid Majorana Hamiltonian: {0}")]
    BadHamiltonian(String),
    #[error("invalid bath matrix: {0}")]
    BadBath(String),
    #[error("steady state is not unique (min Re x_j = {min_re:.3e})")]
    NonUniqueSteadyState { min_re: f64 },
    #[error("degenerate rapidities (smallest gap {gap:.3e})")]
    DegenerateRapidities { gap: f64 },
    #[error("correlation matrix has a pure-state direction (gamma_j * gamma_k = 1)")]
    PureStateSingular,
    #[error("angle phi_k undefined at k = {k:.6}")]
    UndefinedAngle { k: f64 },
    #[error("closed form outside its branch domain: {0}")]
    BranchDomainError(String),
    #[error("{n} modes exceed the brute-force limit of {max}")]
    TooLarge { n: usize, max: usize },
    #[error("Liouvillian kernel is not one-dimensional (gap {gap:.3e})")]
    DegenerateKernel { gap: f64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

impl Error {
    /// Stable identifier used in CLI messages and sweep status columns.
    pub fn name(&self) -> &'static str {
        match self {
            Error::NotSquare { .. } => "NotSquare",
            Error::NonFinite => "NonFinite",
            Error::ShapeMismatch(_) => "ShapeMismatch",
            Error::NonConvergence => "NonConvergence",
            Error::NearDefective { .. } => "NearDefective",
            Error::SingularMatrix { .. } => "SingularMatrix",
            Error::SingularPencil { .. } => "SingularPencil",
            Error::DegenerateSpectrum { .. } => "DegenerateSpectrum",
            Error::ContinuationAmbiguous { .. } => "ContinuationAmbiguous",
            Error::NotHermitian { .. } => "NotHermitian",
            Error::StateIndex { .. } => "StateIndex",
            Error::OnCriticalLine(_) => "OnCriticalLine",
            Error::FSingular => "FSingular",
            Error::CriticalKPoint { .. } => "CriticalKPoint",
            Error::BadHamiltonian(_) => "BadHamiltonian",
            Error::BadBath(_) => "BadBath",
            Error::NonUniqueSteadyState { .. } => "NonUniqueSteadyState",
            Error::DegenerateRapidities { .. } => "DegenerateRapidities",
            Error::PureStateSingular => "PureStateSingular",
            Error::UndefinedAngle { .. } => "UndefinedAngle",
            Error::BranchDomainError(_) => "BranchDomainError",
            Error::TooLarge { .. } => "TooLarge",
            Error::DegenerateKernel { .. } => "DegenerateKernel",
            Error::InvalidConfig(_) => "InvalidConfig",
        }
    }

    /// Configuration problems map to CLI exit code 2, numerical ones to 3.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidConfig(_) | Error::ShapeMismatch(_) | Error::NotSquare { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
