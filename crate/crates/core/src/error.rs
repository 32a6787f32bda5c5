use alloc::string::String;

/// Broad class of a failure, used by front ends to pick exit codes and
/// HTTP statuses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Malformed or inconsistent user input.
    Input,
    /// A linear solve failed.
    Solver,
    /// Mesh topology or geometry is unusable.
    Structural,
    /// Broken internal invariant.
    Internal,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("non-manifold face ({}, {}, {}) is shared by {count} tets", face[0], face[1], face[2])]
    NonManifoldFace { face: [usize; 3], count: usize },
    #[error("empty domain: every tet is marked as bone")]
    EmptyDomain,
    #[error("tet {0} is degenerate (zero volume)")]
    DegenerateTet(usize),
    #[error("tensor of tet {0} is not symmetric positive definite")]
    NonSpdTensor(usize),
    #[error("singular system for {0}")]
    Singular(String),
    #[error("stroke must start and end on bone")]
    StrokeOffBone,
    #[error("curve exits the domain at parameter {0}")]
    CurveExitsDomain(f64),
    #[error("curve {0} does not intersect the mesh")]
    CurveMissesMesh(u32),
    #[error("zero tangent at collocation entry {0}")]
    ZeroTangent(usize),
    #[error("endpoint radius too small")]
    EndpointRadiusTooSmall,
    #[error("point lies outside tet")]
    PointOutsideTet,
    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Parse { .. }
            | Error::InvalidInput(_)
            | Error::StrokeOffBone
            | Error::CurveExitsDomain(_)
            | Error::CurveMissesMesh(_)
            | Error::ZeroTangent(_)
            | Error::EndpointRadiusTooSmall
            | Error::PointOutsideTet
            | Error::NonSpdTensor(_) => ErrorKind::Input,
            Error::Singular(_) => ErrorKind::Solver,
            Error::NonManifoldFace { .. } | Error::EmptyDomain | Error::DegenerateTet(_) => {
                ErrorKind::Structural
            }
            Error::Internal(_) => ErrorKind::Internal,
        }
    }
}

pub type Result<T> = core::result::Result<T, Error>;
