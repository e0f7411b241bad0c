use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },

    #[error("expression not evaluable at t = {t} (piece {piece}): {msg}")]
    Eval { t: f64, piece: String, msg: String },

    #[error("invalid piecewise definition: {0}")]
    Piecewise(String),

    #[error("ellipticity violated: ess inf p = {0} <= 0")]
    Ellipticity(f64),

    #[error("sign condition violated: ess inf q = {0} < 0")]
    SignCondition(f64),

    #[error("selection out of bounds at t = {t}: f = {f}, allowed [{lo}, {hi}]")]
    SelectionBounds { t: f64, f: f64, lo: f64, hi: f64 },

    #[error("semicontinuity check failed: {0}")]
    Semicontinuity(String),

    #[error("hypothesis check failed: {0}")]
    Hypothesis(String),

    #[error("internal consistency check failed: {0}")]
    Internal(String),

    #[error("certification refused: {0}")]
    Certify(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
