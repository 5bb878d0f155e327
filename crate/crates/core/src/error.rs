use thiserror::Error;

/// Errors surfaced by constructors, quadrature and solvers.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter violates one of the model inequalities; the message names
    /// the violated condition.
    #[error("domain error: {0}")]
    Domain(String),

    /// A configured budget (cells, iterations) would be exceeded.
    #[error("resource limit: {0}")]
    Resource(String),

    /// Evaluation requested exactly on the contact set.
    #[error("singular point: {0}")]
    SingularPoint(String),

    /// An iterative solver stopped without meeting its tolerance.
    #[error("solver: {0}")]
    Solver(String),

    /// A modular diverges at every tested scale.
    #[error("divergent: {0}")]
    Divergent(String),
}

pub type Result<T> = std::result::Result<T, Error>;
