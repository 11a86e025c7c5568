use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown density kind `{0}`")]
    UnknownKind(String),

    #[error("missing parameter `{0}`")]
    MissingParam(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParam { name: String, reason: String },

    #[error("invalid exponents: {0}")]
    InvalidExponents(String),

    #[error("point {x:?} lies outside the domain")]
    OutsideDomain { x: Vec<f64> },

    #[error("gradient argument {xi:?} has non-finite entries")]
    NonFinite { xi: Vec<f64> },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("convexity violated: scaled smallest Hessian eigenvalue {value:e} at x={x:?}, xi={xi:?}")]
    ConvexityViolation { value: f64, x: Vec<f64>, xi: Vec<f64> },

    #[error("non-finite Hessian entry at x={x:?}, xi={xi:?}")]
    NonFiniteHessian { x: Vec<f64>, xi: Vec<f64> },

    #[error("finite-difference stencil of width {step} leaves the domain at x={x:?}")]
    StencilOutside { x: Vec<f64>, step: f64 },

    #[error("ball of radius {eps} around {x:?} is not compactly contained in the domain")]
    BallNotContained { x: Vec<f64>, eps: f64 },

    #[error("H5 ratio test unreliable: {skipped} of {total} denominators fell below 1e-12")]
    H5Unreliable { skipped: usize, total: usize },

    #[error("h = {h} is not admissible: 12*sqrt(n)/h = {lhs} must be < dist(B_R, boundary) = {dist}")]
    InadmissibleScale { h: u32, lhs: f64, dist: f64 },

    #[error("point {x:?} lies outside the region covered by the cube cover")]
    OutsideCover { x: Vec<f64> },

    #[error("mollifier radius {eps} is below two grid spacings ({spacing})")]
    MollifierTooNarrow { eps: f64, spacing: f64 },

    #[error("field margin too small: mollifier radius {eps} needs {needed} nodes beyond the target, have {available}")]
    MarginTooSmall { eps: f64, needed: usize, available: usize },

    #[error("mollifier radii must be strictly decreasing and positive")]
    BadEpsSequence,

    #[error("gap condition q <= p(n+1)/n fails for p={p}, q={q}, n={n}")]
    GapViolated { p: f64, q: f64, n: usize },

    #[error("energy is not finite on the target region")]
    InfiniteEnergy,

    #[error("no admissible h <= {h_max} reached gap < 2^-{k}; best gap {best_gap:e} at h = {best_h}")]
    NoAdmissibleScale { k: usize, h_max: u32, best_h: u32, best_gap: f64 },

    #[error("line search failed at iteration {iter} (gradient norm {grad_norm:e})")]
    LineSearchFailed { iter: usize, grad_norm: f64 },

    #[error("raw-power density must be wrapped by regularize_infinity before minimization")]
    RawModel,

    #[error("radius {rho} leaves fewer than two cells to the grid boundary (half-width {half_width}, spacing {spacing})")]
    RadiusTooLarge { rho: f64, half_width: f64, spacing: f64 },

    #[error("nonpositive denominator {value:e} at t = {t}")]
    NonpositiveDenominator { t: f64, value: f64 },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid solver configuration: {0}")]
    InvalidSolveConfig(String),

    #[error("config key `{0}` is missing")]
    ConfigMissingKey(String),

    #[error("config key `{key}`: cannot parse `{value}` as {expected}")]
    ConfigMalformed { key: String, value: String, expected: &'static str },

    #[error("config line {line}: {reason}")]
    ConfigSyntax { line: usize, reason: String },

    #[error("config invalid ({keys}): {reason}")]
    ConfigInvalid { keys: String, reason: String },

    #[error("report parse error: {0}")]
    ReportParse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn invalid(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParam { name: name.into(), reason: reason.into() }
    }

    /// True for errors raised while reading or validating a configuration.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::ConfigMissingKey(_)
                | Error::ConfigMalformed { .. }
                | Error::ConfigSyntax { .. }
                | Error::ConfigInvalid { .. }
                | Error::UnknownKind(_)
                | Error::MissingParam(_)
                | Error::InvalidParam { .. }
                | Error::InvalidExponents(_)
        )
    }
}
