use std::path::PathBuf;

use thiserror::Error;

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: aeromon_core::Error,
    },
    #[error("output directory {} is locked by another run (remove {} if no run is active)", .dir.display(), .lock.display())]
    Locked { dir: PathBuf, lock: PathBuf },
    #[error("missing input {}: {hint}", .path.display())]
    MissingInput { path: PathBuf, hint: String },
    #[error("i/o error on {}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn stage(stage: &'static str) -> impl FnOnce(aeromon_core::Error) -> CliError {
        move |source| CliError::Stage { stage, source }
    }

    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }

    /// Process exit code: 2 config, 3 data or I/O, 4 numeric degeneracy.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Stage { source, .. } if source.is_numeric() => EXIT_NUMERIC,
            CliError::Stage {
                source: aeromon_core::Error::Domain(_),
                ..
            } => EXIT_NUMERIC,
            CliError::Stage { .. } | CliError::Locked { .. } | CliError::MissingInput { .. } | CliError::Io { .. } => {
                EXIT_DATA
            }
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

#[cfg(test)]
mod tests {
    use super::*;
    use aeromon_core::Error;

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Config("x".into()).exit_code(), 2);
        let data = CliError::stage("split")(Error::Stratification("x".into()));
        assert_eq!(data.exit_code(), 3);
        let numeric = CliError::stage("calibrate")(Error::DegenerateResiduals("x".into()));
        assert_eq!(numeric.exit_code(), 4);
        assert!(numeric.to_string().contains("calibrate"));
    }
}
