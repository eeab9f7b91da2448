use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied value violates a documented precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Array shapes do not line up (panel vs. field vs. pair storage).
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// The iterative linear solver exhausted its iteration budget.
    #[error("linear solver did not converge after {iterations} iterations (relative residual {residual:.3e})")]
    SolverDidNotConverge { iterations: usize, residual: f64 },

    /// The dense solve hit a singular (or numerically indefinite) system.
    #[error("singular linear system: {0}")]
    SingularSystem(String),

    /// An ADMM iterate left the finite floats.
    #[error("non-finite coefficient iterate at iteration {iteration}")]
    NonFiniteIterate { iteration: usize },

    /// A fit interpolated the data exactly; its BIC is undefined.
    #[error("degenerate fit: residual sum of squares is exactly zero")]
    DegenerateFit,

    /// Pooled Gram matrix of one block cannot be inverted.
    #[error("singular Gram matrix in block {block}: {cells} cell(s) for {coefficients} coefficients")]
    SingularBlockGram {
        block: usize,
        cells: usize,
        coefficients: usize,
    },

    /// Too few observations for the requested block model.
    #[error("insufficient degrees of freedom: {observations} observations <= {parameters} block parameters")]
    InsufficientDof {
        observations: usize,
        parameters: usize,
    },

    /// Every grid point of a tuning sweep failed.
    #[error("all grid points failed; last failure: {0}")]
    PathFailed(String),
}
