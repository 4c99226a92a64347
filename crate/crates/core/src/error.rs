use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("polytope is not reflexive: {0}")]
    NotReflexive(String),

    #[error("fan is not smooth: {0}")]
    NotSmooth(String),

    #[error("fan is not complete: {0}")]
    NotComplete(String),

    #[error("operation requires dimension 2, got {0}")]
    DimensionUnsupported(usize),

    #[error("point {point:?} is within {margin:e} of the polytope boundary")]
    BoundaryPoint { point: Vec<f64>, margin: f64 },

    #[error("Hessian determinant vanishes at x = {0:?}")]
    HessianSingular(Vec<f64>),

    #[error("{what} did not converge: {detail}")]
    NoConvergence { what: &'static str, detail: String },

    #[error("test potential is not Kähler: {0}")]
    NotKaehler(String),

    #[error("too many Weyl orbits of faces ({0} > 20)")]
    TooManyOrbits(usize),

    #[error("invalid candidate: {0}")]
    InvalidCandidate(String),

    #[error("unknown fixture {0:?}")]
    UnknownFixture(String),

    #[error("fixture parse error: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn no_convergence(what: &'static str, detail: impl Into<String>) -> Self {
        Error::NoConvergence { what, detail: detail.into() }
    }

    /// True for errors raised by iterative numerics rather than input validation.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::NoConvergence { .. } | Error::HessianSingular(_))
    }
}
