use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// One failed validation rule, naming the offending config field.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub field: String,
    pub rule: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.field, self.rule)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("grid must have dim in {{1,2}} and n >= 4 per axis (got dim={dim}, n={n})")]
    InvalidGrid { dim: usize, n: usize },

    #[error("{context}: density must be strictly positive (min cell value {min:e})")]
    NonpositiveDensity { context: &'static str, min: f64 },

    #[error("iterative solver hit the iteration cap ({iterations} iterations, relative residual {residual:e})")]
    SolverIterationLimit { iterations: usize, residual: f64 },

    #[error("implicit midpoint fixed-point iteration diverged at dt={dt:e}; reduce the time step")]
    FixedPointDiverged { dt: f64 },

    #[error("positivity lost in integrator stage `{stage}` (min density {min:e})")]
    PositivityLoss { stage: &'static str, min: f64 },

    #[error("explicit step rejected: dt*max|grad phi|/h = {value:.3} exceeds the stability guard {limit}")]
    CflViolation { value: f64, limit: f64 },

    #[error("time step must be positive (got {dt:e})")]
    NonpositiveTimeStep { dt: f64 },

    #[error("tangent vector must have zero total mass (integral {integral:e})")]
    NotZeroMean { integral: f64 },

    #[error("density must have unit mass (integral {mass})")]
    MassNotUnit { mass: f64 },

    #[error("wave function has a near-nodal point (min |psi|^2 = {min:e}); the density/phase decomposition is undefined there")]
    NodalPoint { min: f64 },

    #[error("rejection sampling failed to place all particles after {attempts} attempts")]
    RejectionSamplingFailed { attempts: usize },

    #[error("trajectory index {index} out of range for interior-point evaluation (len {len})")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("trajectory times must be uniformly spaced and strictly increasing")]
    NonUniformTimes,

    #[error("integration failed at t = {time}: {source}")]
    StepFailed {
        time: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid {what}: {detail}")]
    Format { what: &'static str, detail: String },

    #[error("invalid configuration:\n{}", .0.iter().map(|v| format!("  - {v}")).collect::<Vec<_>>().join("\n"))]
    InvalidConfig(Vec<Violation>),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
