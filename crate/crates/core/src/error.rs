use thiserror::Error;

pub type Result<T> = std::result::Result<T, AssistError>;

#[derive(Debug, Error)]
pub enum AssistError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: String, actual: String },

    #[error("infeasible budgets: {0}")]
    InfeasibleBudget(String),

    #[error("solver diverged: {0}")]
    SolverDivergence(String),

    #[error("at level {level}: {source}")]
    AtLevel {
        level: f64,
        #[source]
        source: Box<AssistError>,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("model format error: {0}")]
    Format(String),

    #[error("unknown {kind} '{name}' (available: {available})")]
    UnknownStrategy {
        kind: &'static str,
        name: String,
        available: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl AssistError {
    pub(crate) fn mismatch(expected: impl ToString, actual: impl ToString) -> Self {
        AssistError::DimensionMismatch {
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }

    pub(crate) fn at_level(self, level: f64) -> Self {
        AssistError::AtLevel {
            level,
            source: Box::new(self),
        }
    }

    /// Short stable tag used by the command-line error line.
    pub fn kind(&self) -> &'static str {
        match self {
            AssistError::InvalidInput(_) => "invalid-input",
            AssistError::DimensionMismatch { .. } => "dimension-mismatch",
            AssistError::InfeasibleBudget(_) => "infeasible-budget",
            AssistError::SolverDivergence(_) => "solver-divergence",
            AssistError::AtLevel { source, .. } => source.kind(),
            AssistError::Parse { .. } => "parse",
            AssistError::Format(_) => "format",
            AssistError::UnknownStrategy { .. } => "unknown-strategy",
            AssistError::Io(_) => "io",
        }
    }
}
