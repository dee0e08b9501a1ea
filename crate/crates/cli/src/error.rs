use fairloop_core::Error as CoreError;
use thiserror::Error;

/// CLI failures, each mapped to a process exit status.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Infeasible(String),
    #[error("{0}")]
    Numerical(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Io(_) => 1,
            Self::Config(_) => 2,
            Self::Infeasible(_) => 3,
            Self::Numerical(_) => 4,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Self::Io(_) => "io",
            Self::Config(_) => "config",
            Self::Infeasible(_) => "infeasible",
            Self::Numerical(_) => "numerical",
        }
    }

    /// `error kind=<kind> reason=<single line>`.
    pub fn diagnostic(&self) -> String {
        let reason = self.to_string().replace(['\n', '\r'], " ");
        format!("error kind={} reason={}", self.kind(), reason)
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Infeasible => Self::Infeasible("infeasible".into()),
            CoreError::Unbounded | CoreError::Numerical(_) | CoreError::DecompositionFailure { .. } => {
                Self::Numerical(e.to_string())
            }
            CoreError::HorizonExhausted { .. } => Self::Numerical(e.to_string()),
            CoreError::Io(_) => Self::Io(e.to_string()),
            CoreError::InvalidArgument(_)
            | CoreError::DegenerateGroup { .. }
            | CoreError::Csv(_)
            | CoreError::Json(_) => Self::Config(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Io(e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
