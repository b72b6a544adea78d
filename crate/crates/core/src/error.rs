use nalgebra::Point2;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown catalog entry `{0}`")]
    UnknownName(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("polygon `{name}` is not simple: edges {first} and {second} intersect")]
    SelfIntersection {
        name: String,
        first: usize,
        second: usize,
    },

    #[error("invalid polygon: {0}")]
    InvalidPolygon(String),

    #[error("empty or out-of-range segment range {start}..{end} (polygon has {len} edges)")]
    SegmentRange { start: usize, end: usize, len: usize },

    #[error("meshing failed: {0}")]
    Meshing(String),

    #[error("collar construction failed: {0}")]
    Collar(String),

    #[error("coefficient is not symmetric positive definite at ({x}, {y}): smallest eigenvalue {min_eig:e}, required {required:e}")]
    NotSpd {
        x: f64,
        y: f64,
        min_eig: f64,
        required: f64,
    },

    #[error("singular Jacobian (det = {0:e})")]
    SingularJacobian(f64),

    #[error("Cholesky factorization failed: {0}")]
    Cholesky(String),

    #[error("dimension {dim} exceeds the dense cap {cap}")]
    DimensionCap { dim: usize, cap: usize },

    #[error("iteration did not converge after {iterations} steps (worst residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("invalid tail window: {0}")]
    TailWindow(String),

    #[error("degenerate tangential matrix (det = {0:e})")]
    DegenerateTheta(f64),

    #[error("vector is not tangent: <xi, n> = {0:e}")]
    NotTangent(f64),

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("panel budget exceeded: {requested} panels requested, at most {cap} allowed")]
    PanelBudget { requested: usize, cap: usize },

    #[error("near-singular operator: condition number {0:e}")]
    IllConditioned(f64),

    #[error("insufficient resolution: {0}")]
    Resolution(String),

    #[error("boundary traces differ: {0}")]
    TraceMismatch(String),

    #[error("mesh mismatch: {0}")]
    MeshMismatch(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn not_spd(p: &Point2<f64>, min_eig: f64, required: f64) -> Self {
        Error::NotSpd {
            x: p.x,
            y: p.y,
            min_eig,
            required,
        }
    }
}
