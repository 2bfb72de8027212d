use thiserror::Error;

/// Errors raised by the numerical modules.
///
/// The variant name is what the command line prints on its diagnostic line,
/// so names are part of the public contract.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("point ({0}, {1}) is not covered by the mesh")]
    PointOutsideMesh(f64, f64),
    #[error("epsilon {eps} is not admissible (limit {limit})")]
    EpsilonTooLarge { eps: f64, limit: f64 },
    #[error("seed is neither inside nor outside the region")]
    SeedStraddlesBoundary,
    #[error("seed kind has no limit measure: {0}")]
    UnsupportedSeed(String),
    #[error("reaction weight {0} is negative")]
    NegativeWeight(f64),
    #[error("linear solver did not converge: {0}")]
    NoConvergence(String),
    #[error("Newton iteration stalled at residual {0:e}")]
    NewtonStalled(f64),
    #[error("evaluation at the singular point")]
    OriginSingularity,
    #[error("quadrature did not reach its tolerance: {0}")]
    QuadratureFailure(String),
    #[error("gradient patch around ({0}, {1}) touches the interface")]
    PatchTouchesInterface(f64, f64),
    #[error("mesh size {h} exceeds eps/{ratio} for eps = {eps}")]
    MeshTooCoarse { h: f64, eps: f64, ratio: f64 },
    #[error("log-log fit residual {0} too large")]
    DegenerateFit(f64),
    #[error("unsupported case: {0}")]
    UnsupportedCase(String),
    #[error("route not admissible: {0}")]
    InadmissibleRoute(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

impl Error {
    /// Variant name without payload.
    pub fn name(&self) -> &'static str {
        match self {
            Error::PointOutsideMesh(..) => "PointOutsideMesh",
            Error::EpsilonTooLarge { .. } => "EpsilonTooLarge",
            Error::SeedStraddlesBoundary => "SeedStraddlesBoundary",
            Error::UnsupportedSeed(_) => "UnsupportedSeed",
            Error::NegativeWeight(_) => "NegativeWeight",
            Error::NoConvergence(_) => "NoConvergence",
            Error::NewtonStalled(_) => "NewtonStalled",
            Error::OriginSingularity => "OriginSingularity",
            Error::QuadratureFailure(_) => "QuadratureFailure",
            Error::PatchTouchesInterface(..) => "PatchTouchesInterface",
            Error::MeshTooCoarse { .. } => "MeshTooCoarse",
            Error::DegenerateFit(_) => "DegenerateFit",
            Error::UnsupportedCase(_) => "UnsupportedCase",
            Error::InadmissibleRoute(_) => "InadmissibleRoute",
            Error::InvalidInput(_) => "InvalidInput",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
