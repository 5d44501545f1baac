use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("unknown template `{0}`")]
    UnknownTemplate(String),
    #[error("transport failed after {attempts} attempts: {message}")]
    TransportError { attempts: u32, message: String },
    #[error("endpoint returned HTTP {status}: {body}")]
    EndpointError { status: u16, body: String },
    #[error("unexpected response shape: {0}")]
    ResponseSchemaError(String),
    #[error("invalid endpoint config: {0}")]
    InvalidConfig(String),
    #[error("{}: {source}", .path.display())]
    Io { path: PathBuf, source: std::io::Error },
}

impl Error {
    pub fn code(&self) -> &'static str {
        match self {
            Error::UnknownTemplate(_) => "UnknownTemplate",
            Error::TransportError { .. } => "TransportError",
            Error::EndpointError { .. } => "EndpointError",
            Error::ResponseSchemaError(_) => "ResponseSchemaError",
            Error::InvalidConfig(_) => "InvalidConfig",
            Error::Io { .. } => "IoError",
        }
    }
}
