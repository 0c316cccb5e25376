use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument is outside its documented domain.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// Two containers that must agree in length do not.
    #[error("size mismatch for {what}: expected {expected}, got {actual}")]
    SizeMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    /// The reduced stiffness system could not be factored or solved.
    #[error("equilibrium solve failed: {0}")]
    Solve(String),

    /// Constraint gradients are linearly dependent.
    #[error("degenerate constraint set: row {row} depends on rows {depends_on:?}")]
    Degenerate { row: usize, depends_on: Vec<usize> },

    /// A multiplicative or Venkayya scaling divides by zero.
    #[error("scaling undefined at element {element}: {reason}")]
    Scaling { element: usize, reason: String },

    /// The volume constraint cannot be met by rescaling free densities.
    #[error("volume target infeasible: {0}")]
    Feasibility(String),

    /// The optimality-criteria multiplier search could not bracket the root.
    #[error("lambda search failed to bracket the volume target within [{lo:e}, {hi:e}]")]
    InnerLoop { lo: f64, hi: f64 },

    /// The active-set refinement did not settle.
    #[error("active set did not stabilize after {toggles} toggles")]
    ActiveSetOscillation { toggles: usize },

    /// Problem file syntax error.
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    /// Problem definition is syntactically fine but inconsistent.
    #[error("invalid problem: {0}")]
    Validation(String),

    /// Wraps an error raised inside the outer optimization loop.
    #[error("iteration {iteration}: {source}")]
    Iteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub(crate) fn at_iteration(self, iteration: usize) -> Self {
        Error::Iteration {
            iteration,
            source: Box::new(self),
        }
    }
}

pub(crate) fn check_len(what: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::SizeMismatch {
            what,
            expected,
            actual,
        })
    }
}
