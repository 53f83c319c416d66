use alloc::string::String;
use core::fmt;

/// Failure categories shared by every module.
#[derive(Clone, Debug, PartialEq)]
pub enum Error {
    /// Degenerate or inconsistent mesh data.
    Geometry(String),
    /// A parameter outside its admissible range.
    Parameter(String),
    /// An input that violates an operation's contract.
    Contract(String),
    /// A state outside the domain of a functional (e.g. `z <= 0`).
    Domain(String),
    /// A problem set-up that cannot be solved (e.g. no Dirichlet boundary).
    Setup(String),
    /// An iterative solver that did not converge.
    Numeric(String),
}

pub type Result<T> = core::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Geometry(m) => write!(f, "geometry error: {m}"),
            Error::Parameter(m) => write!(f, "parameter error: {m}"),
            Error::Contract(m) => write!(f, "contract violation: {m}"),
            Error::Domain(m) => write!(f, "domain error: {m}"),
            Error::Setup(m) => write!(f, "setup error: {m}"),
            Error::Numeric(m) => write!(f, "numeric error: {m}"),
        }
    }
}

impl core::error::Error for Error {}
