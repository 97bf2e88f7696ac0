use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum LabError {
    #[error("config error at `{path}`: {msg}")]
    Config { path: String, msg: String },

    #[error("numerical failure: {0}")]
    Numerical(#[from] kdvlab_core::Error),

    #[error("{what} failed for {failed} of {total} ensemble members")]
    Ensemble { what: &'static str, failed: usize, total: usize },

    #[error("{path}: missing column `{column}`")]
    MissingColumn { path: PathBuf, column: String },

    #[error("io error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error("csv error on {path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },

    #[error("acceptance criteria failed: {0:?}")]
    Acceptance(Vec<u32>),
}

pub type LabResult<T> = Result<T, LabError>;

impl LabError {
    pub fn config(path: impl Into<String>, msg: impl Into<String>) -> Self {
        LabError::Config { path: path.into(), msg: msg.into() }
    }

    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Self {
        let path = path.into();
        move |source| LabError::Io { path, source }
    }

    /// Process exit code: 1 config, 2 numerical, 3 acceptance.
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Config { .. } | LabError::MissingColumn { .. } | LabError::Io { .. } | LabError::Csv { .. } => 1,
            LabError::Numerical(e) if !e.is_numerical() => 1,
            LabError::Numerical(_) | LabError::Ensemble { .. } => 2,
            LabError::Acceptance(_) => 3,
        }
    }
}
