use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("field has zero norm")]
    ZeroNorm,

    #[error("curve data: {msg}{}", row.map(|r| format!(" (row {r})")).unwrap_or_default())]
    CurveData { row: Option<usize>, msg: String },

    #[error("invalid parameter `{name}`: {msg}")]
    InvalidParameter { name: &'static str, msg: String },

    #[error("index {index} out of range (basis holds {len} states)")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("need at least {needed} bound states, found {found}")]
    TooFewStates { needed: usize, found: usize },

    #[error("state {index} is not bound below the closure energy (E = {energy:e}, E_bar = {closure:e})")]
    UnboundIntermediate { index: usize, energy: f64, closure: f64 },

    #[error("non-finite amplitude at step {step} (t = {time_au:.3} a.u.)")]
    NonFinite { step: usize, time_au: f64 },

    #[error("time series: {0}")]
    Series(String),

    #[error("weight function is non-positive everywhere")]
    DegenerateWeight,

    #[error("eigensolver failed: {0}")]
    Eigen(String),

    #[error("config error{}: {msg}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Config { line: Option<usize>, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, msg: impl Into<String>) -> Self {
        Error::InvalidParameter { name, msg: msg.into() }
    }

    /// True for failures of the numerics (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::NonFinite { .. } | Error::Eigen(_) | Error::TooFewStates { .. } | Error::ZeroNorm)
    }
}
