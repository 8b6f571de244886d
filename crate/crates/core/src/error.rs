use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("calibration error: {0}")]
    Calibration(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("mode error: {0}")]
    Mode(String),

    #[error("sequencing error: {0}")]
    Sequencing(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }

    /// Short machine-readable tag used on the CLI error line and in protocol errors.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Calibration(_) => "calibration",
            Error::Input(_) => "input",
            Error::Parse { .. } => "parse",
            Error::Degenerate(_) => "degenerate",
            Error::Mode(_) => "mode",
            Error::Sequencing(_) => "sequencing",
            Error::Config(_) => "config",
            Error::Protocol(_) => "protocol",
            Error::Io(_) => "io",
        }
    }
}
