use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("calibration error: {0}")]
    Calibration(String),
    #[error("tuning error: {0}")]
    Tuning(String),
    #[error("alignment error: {0}")]
    Alignment(String),
    #[error("unknown port `{port}` (valid ports: {valid})")]
    UnknownPort { port: String, valid: String },
    #[error("port `{0}` is not connected to the input")]
    Disconnected(String),
    #[error("netlist error: {0}")]
    Netlist(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("config error: {0}")]
    Config(String),
    #[error("event-count overflow: {0}")]
    Overflow(String),
}

impl Error {
    /// True for errors caused by malformed input rather than physics.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. }
                | Error::Config(_)
                | Error::Netlist(_)
                | Error::UnknownPort { .. }
                | Error::Shape(_)
                | Error::Domain(_)
        )
    }
}
