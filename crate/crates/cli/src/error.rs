use std::fmt;

/// Failure of one CLI invocation, carrying a stable code for the
/// `error: <code>: <message>` line.
#[derive(Debug)]
pub enum CliError {
    Core(scenewatch_core::Error),
    Vlm(scenewatch_vlm::Error),
    Usage(String),
    Io(String),
}

impl CliError {
    pub fn code(&self) -> &'static str {
        match self {
            CliError::Core(e) => e.code(),
            CliError::Vlm(e) => e.code(),
            CliError::Usage(_) => "UsageError",
            CliError::Io(_) => "IoError",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Vlm(e) => write!(f, "{e}"),
            CliError::Usage(m) | CliError::Io(m) => f.write_str(m),
        }
    }
}

impl std::error::Error for CliError {}

impl From<scenewatch_core::Error> for CliError {
    fn from(e: scenewatch_core::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<scenewatch_vlm::Error> for CliError {
    fn from(e: scenewatch_vlm::Error) -> Self {
        CliError::Vlm(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
