use thiserror::Error;

/// Errors raised anywhere in the toolkit.
///
/// Configuration problems and solver failures are kept apart so the CLI can
/// map them to distinct exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("p = {p:?} lies outside the tabulated range [{lo:?}, {hi:?}]")]
    OutOfRange {
        p: Vec<f64>,
        lo: Vec<f64>,
        hi: Vec<f64>,
    },

    #[error("Legendre maximization did not converge; last bracket [{lo}, {hi}] on axis {axis}")]
    LegendreNotConverged { axis: usize, lo: f64, hi: f64 },

    #[error("no single-branch solution: {0}")]
    NoSingleBranch(String),

    #[error("degenerate branch: D_pH vanishes at x = {x}")]
    DegenerateBranch { x: f64 },

    #[error("branch exit under the bump at x = {x}: |D_pH| = {slope:e}")]
    BranchExit { x: f64, slope: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("random field window does not cover lattice site {site:?}")]
    Window { site: Vec<i64> },

    #[error(
        "discounted solver diverged at delta = {delta}: residual grew for {sweeps} consecutive sweeps (theta = {theta:?})"
    )]
    Divergence {
        delta: f64,
        sweeps: usize,
        theta: Vec<f64>,
    },

    #[error("discounted solver stopped after {sweeps} sweeps at delta = {delta} with residual {residual:e}")]
    NotConverged {
        delta: f64,
        sweeps: usize,
        residual: f64,
    },

    #[error("monotonicity violated on axis {axis}: |D_pH| reached {observed} > theta = {theta}")]
    Monotonicity {
        axis: usize,
        observed: f64,
        theta: f64,
    },

    #[error("time step too large: a step moved {step} > {limit}")]
    StepTooLarge { step: f64, limit: f64 },

    #[error("rotation vector is numerically zero; half-spaces cannot be oriented")]
    DegenerateRotation,

    #[error("failed to parse: {0}")]
    Parse(String),

    #[error("{point}: {source}")]
    Sweep {
        point: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code used by the CLI: 3 for configuration errors, 2 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Json(_) | Error::Parse(_) | Error::InvalidArgument(_) => 3,
            Error::Sweep { source, .. } => source.exit_code(),
            _ => 2,
        }
    }
}

impl Error {
    /// Wraps the error with the sweep point it came from.
    pub fn at(self, point: impl Into<String>) -> Self {
        Error::Sweep {
            point: point.into(),
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
