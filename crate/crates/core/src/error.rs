use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TensorError {
    #[error("tensor shapes must have positive dimensions")]
    EmptyShape,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("input contains non-finite entries")]
    NonFinite,
    #[error("expected a square matrix, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("generator is not anti-Hermitian (residual {residual:.3e})")]
    NotAntiHermitian { residual: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("decomposition failed: {0}")]
    Decomposition(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StateError {
    #[error("density matrix is not Hermitian (residual {0:.3e})")]
    NotHermitian(f64),
    #[error("density matrix trace is {0}, expected 1")]
    BadTrace(f64),
    #[error("density matrix has negative eigenvalue {0:.3e}")]
    NotPositive(f64),
    #[error("expected a pure state, purity is {0}")]
    NotPure(f64),
    #[error("expected a 2x2 matrix, got {0}x{1}")]
    WrongShape(usize, usize),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MpsError {
    #[error("site {site} out of range for a chain of {len} sites")]
    SiteOutOfRange { site: usize, len: usize },
    #[error("site {0} is the two-level system; use reduced_density_matrix")]
    SystemSite(usize),
    #[error("gate is not unitary (residual {0:.3e})")]
    NotUnitary(f64),
    #[error("gate acts on dimension {gate}, sites span {sites}")]
    GateShape { gate: usize, sites: usize },
    #[error("invalid chain: {0}")]
    InvalidChain(String),
    #[error(transparent)]
    State(#[from] StateError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LindbladError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("Liouvillian null space has dimension {0}, steady state is not unique")]
    Degenerate(usize),
    #[error("time step {step} exceeds the stability limit {limit}")]
    StepTooLarge { step: f64, limit: f64 },
    #[error("time grid is not monotone at index {0}")]
    NonMonotoneGrid(usize),
    #[error(transparent)]
    State(#[from] StateError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FeedbackError {
    #[error("invalid system parameters: {0}")]
    InvalidSystem(String),
    #[error("invalid numerics: {0}")]
    InvalidNumerics(String),
    #[error("delay {tau} is not an integer multiple of dt {dt} (nearest k = {nearest}; try dt = {hint})")]
    DelayNotMultiple { tau: f64, dt: f64, nearest: usize, hint: f64 },
    #[error("the Markov-limit unitary requires tau = 0, got {0}")]
    NonzeroDelay(f64),
    #[error("the delayed step unitary requires tau > 0; use markov_limit_unitary")]
    ZeroDelay,
    #[error("effective decay rate undefined: excited population {0:.3e} is too small")]
    UndefinedRate(f64),
    #[error("steady state has not converged")]
    NotConverged,
    #[error(transparent)]
    Mps(#[from] MpsError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    State(#[from] StateError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeasureError {
    #[error("drive amplitude must be positive, got {0}")]
    NonPositiveDrive(f64),
    #[error("objective evaluated to a non-finite value at gamma={gamma}, gamma_phi={gamma_phi}")]
    NonFiniteObjective { gamma: f64, gamma_phi: f64 },
    #[error("stationary Bloch relations are not invertible: {0}")]
    NonInvertible(String),
    #[error("fitted decay rate {0} is not positive")]
    UnphysicalFit(f64),
    #[error("invalid option: {0}")]
    InvalidOption(String),
    #[error(transparent)]
    Lindblad(#[from] LindbladError),
    #[error(transparent)]
    Feedback(#[from] FeedbackError),
}
