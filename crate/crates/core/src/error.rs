use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("delay {delay} out of range for sequence length {len}")]
    DelayOutOfRange { delay: i64, len: usize },

    #[error("no sign change on bracket [{lo}, {hi}]: f(lo)={f_lo}, f(hi)={f_hi}")]
    Bracket { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("numerical overflow: {0}")]
    NumericalOverflow(String),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("conic subproblem infeasible")]
    Infeasible,

    #[error("invalid mask: {0}")]
    InvalidMask(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
