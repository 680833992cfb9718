use thiserror::Error;

/// Errors raised by the numerical routines and the command-line front end.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("velocity {0:?} lies outside the grid domain")]
    Domain([f64; 3]),

    #[error("cannot evaluate at {at:?}: {reason}")]
    Evaluation { at: [f64; 3], reason: String },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("non-finite integrand value at node {index} ({node:?})")]
    NonFinite { index: usize, node: [f64; 3] },

    #[error("singular kernel hits coincident nodes but no diagonal policy applies")]
    UndeclaredSingularity,

    #[error("no Fermi-Dirac equilibrium with unit mass and energy 3 exists for epsilon = {0}")]
    Saturation(f64),

    #[error("Pauli constraint violated: epsilon * f = {value} at {at:?}")]
    Pauli { at: [f64; 3], value: f64 },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("solver instability at t = {time}: {reason}")]
    Instability { time: f64, reason: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Process exit code for the command-line front end: 2 for
    /// configuration and I/O problems, 5 for solver instability, 3 for
    /// every other numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Io(_) => 2,
            Error::Instability { .. } => 5,
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(err: csv::Error) -> Self {
        Error::Io(err.to_string())
    }
}
