use thiserror::Error;

/// Failures while parsing or evaluating a scalar field.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum FieldError {
    #[error("domain error in {op} (argument {value})")]
    Domain { op: &'static str, value: f64 },
    #[error("cannot parse '{input}' at byte {pos}: {msg}")]
    Parse { input: String, pos: usize, msg: String },
    #[error("coordinate index {axis} out of range for dimension {dim}")]
    BadAxis { axis: usize, dim: usize },
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("invalid chart: {0}")]
    InvalidChart(String),
    #[error("point {point:?} lies outside the chart box")]
    OutsideBox { point: Vec<f64> },
    #[error("covariant derivative of valence ({up},{down}) is not supported")]
    UnsupportedValence { up: usize, down: usize },
    #[error("tractors are expressed in different scales ('{left}' vs '{right}')")]
    ScaleMismatch { left: String, right: String },
    #[error("chart of dimension {dim} needs a mu parameter for its tractor connection")]
    MissingMu { dim: usize },
    #[error("chart is not Einstein: {0}")]
    NotEinstein(String),
    #[error("transport integrator failed: {0}")]
    StepFailure(String),
    #[error("density is not almost Einstein (residual {residual:e} > {tol:e})")]
    NotAlmostEinstein { residual: f64, tol: f64 },
    #[error("tractor is not parallel (residual {residual:e} > {tol:e})")]
    NotParallel { residual: f64, tol: f64 },
    #[error("zero-set topology is ambiguous at this grid resolution: {0}")]
    GridTooCoarse(String),
    #[error("parallel-space dimension changed under refinement ({coarse} -> {fine})")]
    RankUnstable { coarse: usize, fine: usize },
    #[error("factor chart is not Einstein (residual {residual:e})")]
    NotEinsteinFactor { residual: f64 },
    #[error("factor scalar curvatures do not form a special Einstein product (mu1 = {mu1}, mu2 = {mu2})")]
    ScalarMismatch { mu1: f64, mu2: f64 },
    #[error("tractor is not orthogonal to the factor Einstein tractor (h = {0:e})")]
    NotOrthogonal(f64),
    #[error("collar warp factor vanishes inside (0, {r_max}] (mu = {mu})")]
    BadInterval { mu: f64, r_max: f64 },
    #[error("unknown fixture '{0}'")]
    UnknownFixture(String),
    #[error("vector field is not conformal Killing (residual {0:e})")]
    NotConformalKilling(f64),
    #[error("almost Einstein structures are linearly dependent")]
    LinearlyDependent,
    #[error("vector field does not vanish at the requested point (|k| = {0:e})")]
    NotAZero(f64),
    #[error("level set is singular at {point:?} (|grad sigma| = {grad:e})")]
    SingularLevelSet { point: Vec<f64>, grad: f64 },
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
