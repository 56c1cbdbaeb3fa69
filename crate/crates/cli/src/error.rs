use std::fmt;

pub const EXIT_OK: i32 = 0;
pub const EXIT_NUMERICAL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
/// The dual rank cap L_max was hit before α_{2,k} reached its threshold.
pub const EXIT_RANK_CAP: i32 = 3;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Lib(randpgd::Error),
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Lib(randpgd::Error::DualRankCap { .. }) => EXIT_RANK_CAP,
            CliError::Lib(
                randpgd::Error::InvalidArgument(_) | randpgd::Error::GalerkinNeedsSpd,
            ) => EXIT_USAGE,
            CliError::Lib(_) => EXIT_NUMERICAL,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Lib(e @ randpgd::Error::DualRankCap { .. }) => {
                write!(f, "certification aborted: {e}")
            }
            CliError::Lib(e) => write!(f, "{e}"),
        }
    }
}

impl From<randpgd::Error> for CliError {
    fn from(e: randpgd::Error) -> Self {
        CliError::Lib(e)
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
