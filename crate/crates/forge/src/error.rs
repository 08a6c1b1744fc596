use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] mtlforge_core::Error),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: line {line}, {message}", path.display())]
    Line { path: PathBuf, line: usize, message: String },
    #[error("{}: {message}", path.display())]
    Format { path: PathBuf, message: String },
    #[error("config {}: {message}", path.display())]
    Config { path: PathBuf, message: String },
    #[error("trainer protocol: {0}")]
    Protocol(String),
    #[error("run log {}: {message}", path.display())]
    RunLog { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Error {
        let path = path.into();
        move |source| Error::Io { path, source }
    }

    pub(crate) fn line(path: impl Into<PathBuf>, line: usize, message: impl ToString) -> Error {
        Error::Line { path: path.into(), line, message: message.to_string() }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl ToString) -> Error {
        Error::Format { path: path.into(), message: message.to_string() }
    }
}
