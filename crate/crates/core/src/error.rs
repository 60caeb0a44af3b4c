use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("malformed convex program: {0}")]
    MalformedProgram(String),

    #[error("convex program infeasible (certificate residual {residual:.3e})")]
    Infeasible { residual: f64 },

    #[error("solver hit the iteration limit ({iterations} iterations)")]
    MaxIterations { iterations: u32 },

    #[error("solver failure: {0}")]
    SolverFailure(String),

    #[error("surrogate validity violated: objective fell from {previous} to {current}")]
    SurrogateViolation { previous: f64, current: f64 },

    #[error("{stage} failed at outer iteration {iteration}: {source}")]
    Subproblem {
        stage: &'static str,
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures that originate in the optimization stack.
    pub fn is_solver_failure(&self) -> bool {
        match self {
            Error::Infeasible { .. }
            | Error::MaxIterations { .. }
            | Error::SolverFailure(_)
            | Error::SurrogateViolation { .. }
            | Error::MalformedProgram(_) => true,
            Error::Subproblem { source, .. } => source.is_solver_failure(),
            _ => false,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
