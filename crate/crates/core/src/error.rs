use thiserror::Error;

/// Errors raised by mesh construction, discretization and the solvers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("mesh needs at least one subdivision per side")]
    EmptyMesh,

    #[error("meshes are not nested: coarse n={coarse}, fine n={fine}")]
    NotNested { coarse: usize, fine: usize },

    #[error("unsupported polynomial degree {0}")]
    UnsupportedDegree(usize),

    #[error("no quadrature rule of exactness {requested} (maximum {max})")]
    QuadratureDegree { requested: usize, max: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("edge {0} is a boundary edge; jumps and averages need two sides")]
    BoundaryEdge(usize),

    #[error("non-finite coefficient at dof {0}")]
    NonFinite(usize),

    #[error("data must be strictly positive, found {value} at ({x}, {y})")]
    NonPositiveData { value: f64, x: f64, y: f64 },

    #[error("singular or ill-conditioned system: {0}")]
    Singular(String),

    #[error("linear solve residual {residual:.3e} exceeds tolerance {tol:.3e}")]
    LinearResidual { residual: f64, tol: f64 },

    #[error("invalid convergence data: {0}")]
    InvalidRates(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
