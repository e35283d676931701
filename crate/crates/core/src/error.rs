use thiserror::Error;

/// Errors raised by the wavefront toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum WaveError {
    #[error("invalid birth function geometry: {0}")]
    InvalidGeometry(String),

    #[error("negative state {0} passed to the birth function")]
    NegativeInput(f64),

    #[error("map does not keep its domain invariant: image point {image} of x = {x} lies outside [{lo}, {hi}]")]
    NotInvariant { x: f64, image: f64, lo: f64, hi: f64 },

    #[error("value {value} outside admissible range [{lo}, {hi}] ({context})")]
    OutOfRange {
        context: String,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("root window [{lo}, {hi}] cannot be resolved: {reason}")]
    WindowTooCoarse { lo: f64, hi: f64, reason: String },

    #[error("{what} did not converge after {iterations} iterations (last change {last_change:e})")]
    NoConvergence {
        what: String,
        iterations: usize,
        last_change: f64,
    },

    #[error("no tangency found for k = {k}, h = {h}: {reason}")]
    NoTangency { k: f64, h: f64, reason: String },

    #[error("(h, c) = ({h}, {c}) is outside the admissible domain: {reason}")]
    NotInDomain { h: f64, c: f64, reason: String },

    #[error("a zero lies on the contour of the rectangle re [{re_lo}, {re_hi}] x im [{im_lo}, {im_hi}]")]
    BoundaryZero {
        re_lo: f64,
        re_hi: f64,
        im_lo: f64,
        im_hi: f64,
    },

    #[error("tail model diverges: {0}")]
    TailDivergence(String),

    #[error("iterate lost positivity: min value {min} at t = {t}")]
    LossOfPositivity { min: f64, t: f64 },

    #[error("tail regime mismatch: {0}")]
    RegimeMismatch(String),

    #[error("explicit scheme blew up: value {value} at x = {x}, t = {t}")]
    StabilityViolation { value: f64, x: f64, t: f64 },

    #[error("no front crossing of level {level} at the final time")]
    FrontNotFormed { level: f64 },

    #[error("classification inconclusive: {0}")]
    Inconclusive(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, WaveError>;

impl From<std::io::Error> for WaveError {
    fn from(err: std::io::Error) -> Self {
        WaveError::Io(err.to_string())
    }
}

impl From<csv::Error> for WaveError {
    fn from(err: csv::Error) -> Self {
        WaveError::Io(err.to_string())
    }
}

impl From<serde_json::Error> for WaveError {
    fn from(err: serde_json::Error) -> Self {
        WaveError::InvalidConfig(err.to_string())
    }
}
