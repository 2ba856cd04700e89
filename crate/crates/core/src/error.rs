use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("non-finite drift value at x = {point:?}")]
    Evaluation { point: Vec<f64> },

    #[error("grid spacing h = {h} does not resolve mollifier width eps = {eps} (need h <= eps/4)")]
    Resolution { h: f64, eps: f64 },

    #[error("grid [{x_min}, {x_max}] does not cover [-{need}, {need}]")]
    Domain { x_min: f64, x_max: f64, need: f64 },

    #[error("{name} = {value} is out of range: {reason}")]
    Range {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("unsupported dimension {0} (only 1 and 2 are supported)")]
    UnsupportedDimension(usize),

    #[error("trajectory left the guard box |x| <= {limit} on path {path}, step {step}, point {point}")]
    BlowUp {
        path: usize,
        step: usize,
        point: usize,
        limit: f64,
    },

    #[error("det(DX) = {det} <= 0 on path {path}, step {step}, point {point}; reduce dt")]
    Integrator {
        path: usize,
        step: usize,
        point: usize,
        det: f64,
    },

    #[error("flow is not monotone on path {path} at step {step} (knot {knot}); reduce dt")]
    NonMonotone { path: usize, step: usize, knot: usize },

    #[error("Jacobian {value} below 1e-12 at x = {point}")]
    Conditioning { point: f64, value: f64 },

    #[error("step {step} was not recorded by this flow")]
    NotRecorded { step: usize },

    #[error("time grids do not align: {0}")]
    Alignment(String),

    #[error("grids do not match: {0}")]
    GridMismatch(String),

    #[error("trajectory at x = {point} left the commutator window [{lo}, {hi}] at step {step}")]
    Window {
        point: f64,
        step: usize,
        lo: f64,
        hi: f64,
    },

    #[error("weight constants are divergent for k = {k}, T = {horizon}")]
    DivergentWeight { k: f64, horizon: f64 },

    #[error("drift has no declared growth constant")]
    MissingGrowth,

    #[error("decay curve failed at eps = {eps}: {source}")]
    Sweep { eps: f64, source: Box<Error> },

    #[error("config error at `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("unknown experiment `{name}`; valid names: {valid}")]
    UnknownExperiment { name: String, valid: String },

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
