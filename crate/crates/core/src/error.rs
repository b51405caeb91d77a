use thiserror::Error;

/// Errors raised across the solver library.
///
/// Each variant belongs to one of the categories reported by the CLI exit
/// code (see [`Error::exit_code`]).
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("config error: {0}")]
    Config(String),

    #[error("expression parse error at position {position}: {message}")]
    Expression { position: usize, message: String },

    #[error("invalid tree: {0}")]
    InvalidTree(String),

    #[error("invalid subfiltration: {0}")]
    InvalidFiltration(String),

    #[error("level {level} out of range (horizon has {steps} steps)")]
    LevelOutOfRange { level: usize, steps: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("martingale representation failed at level {level}, node {node}: residual {residual:e}")]
    Representation { level: usize, node: usize, residual: f64 },

    #[error("stopping time is not measurable w.r.t. the subfiltration at level {level}, atom {atom}")]
    NotStoppingTime { level: usize, atom: usize },

    #[error("enumeration too large: {count} items exceeds cap {cap}")]
    EnumerationTooLarge { count: u128, cap: usize },

    #[error("invalid barriers: upper - lower = {gap:e} at index {index}")]
    InvalidBarriers { index: usize, gap: f64 },

    #[error("barrier separation violated: U - L = {gap:e} at level {level}, node {node}")]
    SeparationViolated { level: usize, node: usize, gap: f64 },

    #[error("terminal value outside the barriers at atom {atom}: E[L|G]={lower}, E[xi|G]={terminal}, E[U|G]={upper}")]
    TerminalSandwich { atom: usize, lower: f64, terminal: f64, upper: f64 },

    #[error("Lipschitz bound violated: declared Lipschitz constant {declared} but probe ratio {observed} at level {level}")]
    Lipschitz { declared: f64, observed: f64, level: usize },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("unequal terminal rewards at atom {atom}: {lower} vs {upper}")]
    UnequalTerminals { atom: usize, lower: f64, upper: f64 },

    #[error("iteration did not converge after {iterations} iterations (last change {last_change:e}): {context}")]
    NonConvergence { iterations: usize, last_change: f64, context: String },

    #[error("not a solution: residual {residual:e} exceeds {tolerance:e}")]
    NotASolution { residual: f64, tolerance: f64 },

    #[error("nonpositive exponential factor {factor} at level {level}, node {node}")]
    DegenerateExponential { level: usize, node: usize, factor: f64 },

    #[error("invalid strategy: {0}")]
    InvalidStrategy(String),

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    /// Process exit code for the CLI: 2 config, 3 precondition, 4 numerical,
    /// 5 cap exceeded.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Expression { .. } | Error::Io(_) => 2,
            Error::InvalidTree(_)
            | Error::InvalidFiltration(_)
            | Error::LevelOutOfRange { .. }
            | Error::Shape(_)
            | Error::NotStoppingTime { .. }
            | Error::InvalidBarriers { .. }
            | Error::SeparationViolated { .. }
            | Error::TerminalSandwich { .. }
            | Error::Lipschitz { .. }
            | Error::Precondition(_)
            | Error::UnequalTerminals { .. }
            | Error::InvalidStrategy(_) => 3,
            Error::Representation { .. }
            | Error::NonConvergence { .. }
            | Error::NotASolution { .. }
            | Error::DegenerateExponential { .. } => 4,
            Error::EnumerationTooLarge { .. } => 5,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
