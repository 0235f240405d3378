use thiserror::Error;

/// Errors produced by the geometry, intersection, lattice and truss layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// All four homogeneous coordinates vanish at this parameter.
    #[error("base point at theta = ({}, {})", .theta[0], .theta[1])]
    BasePoint { theta: [f64; 2] },

    #[error("unsupported input: {0}")]
    UnsupportedInput(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("point is not on the surface (no rank drop in the implicit matrix)")]
    NotOnSurface,

    #[error("degenerate parameterization: {0}")]
    DegenerateParameterization(String),

    #[error("flatness tolerance unreachable: recursion depth {depth} exceeded")]
    ToleranceUnreachable { depth: usize },

    #[error("open surface: lattice line {line} has an odd number ({hits}) of intersections")]
    OpenSurface { line: String, hits: usize },

    #[error("mechanism detected: {modes} zero-energy mode(s)")]
    Mechanism { modes: usize },

    #[error("I/O error: {0}")]
    Io(String),

    #[error("malformed input file: {0}")]
    Format(String),
}

impl Error {
    /// True for failures of the numerical machinery (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NumericalFailure(_)
                | Error::NotOnSurface
                | Error::DegenerateParameterization(_)
                | Error::ToleranceUnreachable { .. }
                | Error::Mechanism { .. }
                | Error::BasePoint { .. }
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
