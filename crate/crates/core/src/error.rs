use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("radius {radius} must satisfy 0 < r < N/2 = {half}")]
    RadiusTooLarge { radius: f64, half: f64 },

    #[error("region is empty")]
    EmptyRegion,

    #[error("region covers the whole torus")]
    FullTorus,

    #[error("walk exceeded the step cap of {cap} skeleton jumps")]
    StepCapExceeded { cap: u64 },

    #[error("site ({i}, {j}) is not in the region")]
    SiteOutsideRegion { i: u32, j: u32 },

    #[error("linear system is singular: {0}")]
    SingularSystem(String),

    #[error("geometry violation: {0}")]
    GeometryViolation(String),

    #[error("radii collapse: {0}")]
    RadiiCollapse(String),

    #[error("eta = {eta} outside (0, {limit}) for theta = {theta}")]
    EtaOutOfRange { eta: f64, theta: f64, limit: f64 },

    #[error("level mismatch: need {needed} levels, have {have}")]
    LevelMismatch { needed: usize, have: usize },

    #[error("torus side {side} exceeds the dense factorization limit {limit}")]
    SizeTooLarge { side: usize, limit: usize },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invariant violated: {0}")]
    InvariantViolation(String),

    #[error("config error at key `{key}`: {message}")]
    ConfigParse { key: String, message: String },

    #[error("i/o failure on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code: 2 for configuration and usage errors, 3 for i/o,
    /// 1 for everything else (including invariant violations).
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::ConfigParse { .. } | Error::InvalidParameter(_) | Error::EtaOutOfRange { .. } => 2,
            Error::Io { .. } | Error::Csv(_) | Error::Json(_) => 3,
            _ => 1,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
