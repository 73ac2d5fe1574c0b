use std::path::Path;

/// Failure of a lab command, mapped to the process exit code.
#[derive(Debug, thiserror::Error)]
pub enum LabError {
    /// Schema or value problem in the config file, anchored to a line.
    #[error("{path}:{line}:{column}: {message}")]
    Config {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },
    /// Bad command-line usage.
    #[error("{0}")]
    Usage(String),
    /// The model rejected its inputs or failed at run time.
    #[error("model error: {0}")]
    Model(critlab_core::Error),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl LabError {
    pub fn exit_code(&self) -> u8 {
        match self {
            LabError::Config { .. } | LabError::Usage(_) => 2,
            LabError::Model(_) => 3,
            LabError::Io { .. } => 1,
        }
    }

    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        LabError::Io {
            context: context.into(),
            source,
        }
    }

    pub fn io_at(path: &Path, source: std::io::Error) -> Self {
        Self::io(path.display().to_string(), source)
    }
}

impl From<critlab_core::Error> for LabError {
    fn from(e: critlab_core::Error) -> Self {
        LabError::Model(e)
    }
}

pub type LabResult<T> = std::result::Result<T, LabError>;
