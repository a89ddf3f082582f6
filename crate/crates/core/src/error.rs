use thiserror::Error;

/// Errors raised by graph construction, linear algebra, solvers and analysis.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("graph needs at least two vertices and one edge")]
    EmptyGraph,
    #[error("vertex {vertex} out of range for a graph with {n} vertices")]
    VertexOutOfRange { vertex: usize, n: usize },
    #[error("self-loop at vertex {0}")]
    SelfLoop(usize),
    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(usize, usize),
    #[error("graph is disconnected: vertex {unreachable} cannot be reached from vertex 0")]
    Disconnected { unreachable: usize },
    #[error("block dimension must be at least 1")]
    ZeroBlockDim,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-finite value in input")]
    NonFinite,
    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("all eigenvalues are below the zero tolerance")]
    AllZero,
    #[error("matrix is indefinite (smallest eigenvalue {0:e})")]
    IndefiniteInput(f64),
    #[error("matrix is not positive definite (pivot failure)")]
    NotPositiveDefinite,
    #[error("right-hand side is not in the range of the operator (residual {0:e})")]
    Inconsistent(f64),

    #[error("local subproblem has no unique minimizer")]
    NoUniqueMinimizer,
    #[error(
        "Newton iteration stalled after {iterations} iterations (gradient norm {grad_norm:e})"
    )]
    NewtonStall { iterations: usize, grad_norm: f64 },
    #[error("sum objective is not strongly convex (mu = {0:e})")]
    NotStronglyConvex(f64),

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("Gamma does not majorize E_o^T E_o (smallest eigenvalue of the gap {0:e})")]
    GammaTooSmall(f64),
    #[error("overshoot parameter omega = {0} outside [0.5, 1)")]
    OmegaOutOfRange(f64),
    #[error("mixing-matrix condition violated: {0}")]
    ConditionViolation(String),

    #[error("gamma = {gamma} outside (0, {upper})")]
    GammaOutOfRange { gamma: f64, upper: f64 },
    #[error("eta = {0} outside (0, 1)")]
    EtaOutOfRange(f64),
    #[error("rate certificate unavailable: {0}")]
    CertificateUnavailable(String),
    #[error("contraction violated at k = {k}: ratio {ratio} exceeds bound {bound}")]
    ContractionViolated { k: usize, ratio: f64, bound: f64 },

    #[error("agent {agent} failed in round {round}: {source}")]
    AgentFailure {
        round: usize,
        agent: usize,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
