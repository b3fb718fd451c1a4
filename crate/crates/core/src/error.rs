use thiserror::Error;

/// Errors raised by the many-body toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("capacity error: {what} needs {requested} entries, cap is {cap}")]
    Capacity { what: String, requested: u128, cap: u128 },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    Convergence { iterations: usize, residual: f64 },

    #[error("matrix is not positive semidefinite: eigenvalue {0:.3e}")]
    NumericalPsd(f64),

    #[error("state is not a charge eigenstate: off-block residual {residual:.3e} in species {species:?}")]
    NotChargeEigenstate { residual: f64, species: Vec<usize> },

    #[error("inconsistent input: {0}")]
    InconsistentInput(String),

    #[error("insufficient signal: {0}")]
    InsufficientSignal(String),

    #[error("no plateau: {0}")]
    NoPlateau(String),

    #[error("at t = {time}: {source}")]
    AtTime {
        time: f64,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
