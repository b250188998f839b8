use crate::kernel::KernelError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("non-bipartite cell: {0}")]
    NonBipartite(String),
    #[error("complex is not strongly regular: {0}")]
    NotStronglyRegular(String),
    #[error("dangling cell: {0}")]
    DanglingEdge(String),
    #[error("inconsistent orientation: {0}")]
    OrientationMismatch(String),
    #[error("angle {alpha} of quad {quad} is not in (0, pi)")]
    AngleOutOfRange { quad: usize, alpha: f64 },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("io error: {0}")]
    Io(String),
    #[error("missing or non-positive radius at white vertex {0}")]
    MissingRadius(usize),
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("input is not a solution (residual {residual:e})")]
    NotASolution { residual: f64 },
    #[error("iterate left the domain: {0}")]
    DomainViolation(String),
    #[error("combinatorics mismatch: {0}")]
    CombinatoricsMismatch(String),
    #[error("angle mismatch at quad {0}")]
    AngleMismatch(usize),
    #[error("kites {0} and {1} overlap")]
    NotEmbedded(usize, usize),
    #[error("point ({0}, {1}) is outside the map domain")]
    OutsideDomain(f64, f64),
    #[error("degenerate triangle {0}")]
    DegenerateTriangle(usize),
    #[error("singular system: {0}")]
    SingularSystem(String),
    #[error("no path between the vertex sets")]
    NoPath,
    #[error("graph too large for enumeration ({0} vertices)")]
    TooLarge(usize),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("level {level}: {source}")]
    AtLevel { level: usize, source: Box<Error> },
}

impl Error {
    /// Short machine-readable name, used in error JSON.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Kernel(KernelError::Domain(_)) => "DomainError",
            Error::Kernel(KernelError::BranchCut { .. }) => "BranchCut",
            Error::NonBipartite(_) => "NonBipartite",
            Error::NotStronglyRegular(_) => "NotStronglyRegular",
            Error::DanglingEdge(_) => "DanglingEdge",
            Error::OrientationMismatch(_) => "OrientationMismatch",
            Error::AngleOutOfRange { .. } => "AngleOutOfRange",
            Error::Parse(_) => "ParseError",
            Error::Io(_) => "IOError",
            Error::MissingRadius(_) => "MissingRadius",
            Error::NoConvergence { .. } => "NoConvergence",
            Error::NotASolution { .. } => "NotASolution",
            Error::DomainViolation(_) => "DomainViolation",
            Error::CombinatoricsMismatch(_) => "CombinatoricsMismatch",
            Error::AngleMismatch(_) => "AngleMismatch",
            Error::NotEmbedded(..) => "NotEmbedded",
            Error::OutsideDomain(..) => "OutsideDomain",
            Error::DegenerateTriangle(_) => "DegenerateTriangle",
            Error::SingularSystem(_) => "SingularSystem",
            Error::NoPath => "NoPath",
            Error::TooLarge(_) => "TooLarge",
            Error::InvalidInput(_) => "InvalidInput",
            Error::AtLevel { source, .. } => source.kind(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
