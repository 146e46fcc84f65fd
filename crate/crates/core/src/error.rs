use thiserror::Error;

use crate::jets::JetError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Jet(#[from] JetError),

    #[error("syntax error at {pos}: {message}")]
    Parse { pos: usize, message: String },
    #[error("unknown identifier `{name}` at {pos}")]
    UnknownIdentifier { name: String, pos: usize },
    #[error("unbound parameter `{0}`")]
    UnboundParameter(String),
    #[error("invalid chart: {0}")]
    InvalidChart(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("grid too small along axis {axis}: {nodes} nodes, need at least {needed}")]
    GridTooSmall {
        axis: usize,
        nodes: usize,
        needed: usize,
    },

    #[error("degenerate {what} = {value:e} at {point:?}")]
    Degenerate {
        what: String,
        value: f64,
        point: Vec<f64>,
    },
    #[error("singular metric at {point:?} (det = {det:e})")]
    SingularMetric { det: f64, point: Vec<f64> },
    #[error("null Killing vector at {point:?} (|K|^2 = {norm:e})")]
    NullKilling { norm: f64, point: Vec<f64> },
    #[error("non-invertible {0}")]
    NonInvertible(String),
    #[error("{what} must be positive, got {value:e} at {point:?}")]
    NonPositive {
        what: String,
        value: f64,
        point: Vec<f64>,
    },
    #[error("lambda degree {degree} exceeds the allowed {max}")]
    DegreeTooHigh { degree: usize, max: usize },
    #[error("recursion consistency violated: residual {residual:e} > {tolerance:e}")]
    Consistency { residual: f64, tolerance: f64 },
    #[error("generator `{which}` is not homogeneous of degree {degree} (defect {defect:e})")]
    Homogeneity {
        which: &'static str,
        degree: i32,
        defect: f64,
    },
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("need at least {needed} refinements, got {got}")]
    TooFewPoints { got: usize, needed: usize },
    #[error("check `{name}` failed: residual {residual:e} > {tolerance:e}")]
    CheckFailed {
        name: String,
        residual: f64,
        tolerance: f64,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
