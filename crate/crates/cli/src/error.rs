use thiserror::Error;

pub type Result<T> = std::result::Result<T, CliError>;

/// Failures grouped by process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad config, bad input file or unusable arguments (exit 2).
    #[error("{0}")]
    Config(String),

    /// The optimizer or a metric failed numerically (exit 3).
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// AM finished but `X₂` was not close enough to rank one (exit 4).
    #[error("rank-one extraction failed: sigma1/sigma0 = {sigma_ratio:.3e}")]
    RankOne { sigma_ratio: f64 },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::RankOne { .. } => 4,
        }
    }
}

impl From<dopseq::Error> for CliError {
    fn from(e: dopseq::Error) -> Self {
        use dopseq::Error as E;
        match e {
            E::InvalidInput(_) | E::InvalidMask(_) | E::DelayOutOfRange { .. } | E::Parse { .. } | E::Io(_) => {
                CliError::Config(e.to_string())
            }
            E::Bracket { .. } | E::Degenerate(_) | E::NumericalOverflow(_) | E::NonFinite(_) | E::Infeasible => {
                CliError::Numerical(e.to_string())
            }
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Config(e.to_string())
    }
}
