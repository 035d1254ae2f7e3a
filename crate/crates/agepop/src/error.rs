use thiserror::Error;

/// Errors surfaced by the library.
///
/// Variants map onto the CLI exit-code contract: precondition violations
/// exit with 2, solver failures with 3 and I/O problems with 4.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument fell outside its mathematical domain (e.g. an age outside
    /// `[0, A]` or a negative duration).
    #[error("domain error: {0}")]
    Domain(String),

    /// Array/grid shapes disagree.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A structural precondition of an operation is violated (e.g. a horizon
    /// too short for null controllability).
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// An iterative solver failed to converge.
    #[error("convergence failure: {0}")]
    Convergence(String),

    /// A direct solver met a (numerically) singular system.
    #[error("singular system: {0}")]
    Singular(String),

    /// Scenario configuration could not be parsed or validated.
    #[error("config error: {0}")]
    Config(String),

    /// Filesystem failure, with the offending path.
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Exit code for the CLI: 2 precondition, 3 solver, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Domain(_) | Error::Shape(_) | Error::Precondition(_) | Error::Config(_) => 2,
            Error::Convergence(_) | Error::Singular(_) => 3,
            Error::Io { .. } => 4,
        }
    }
}
