use std::path::{Path, PathBuf};

use thiserror::Error;

/// Process exit status for a successful run.
pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_CONVERGENCE: i32 = 3;
pub const EXIT_IO: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    /// A configuration entry is missing or violates a model invariant.
    #[error("config key `{key}`: {message}")]
    Config { key: String, message: String },

    /// Malformed input data or an inconsistent request.
    #[error("{0}")]
    Validation(String),

    /// A step needs the output of an earlier subcommand that is not there.
    #[error("missing upstream artifact: {0}")]
    MissingArtifact(String),

    #[error("{context}: {source}")]
    Model {
        context: String,
        #[source]
        source: catbond_core::Error,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    pub fn model(context: impl Into<String>) -> impl FnOnce(catbond_core::Error) -> Self {
        let context = context.into();
        move |source| CliError::Model { context, source }
    }

    pub fn io(path: &Path) -> impl FnOnce(std::io::Error) -> Self + '_ {
        move |source| CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Model { source, .. } if source.is_convergence() => EXIT_CONVERGENCE,
            CliError::Io { .. } => EXIT_IO,
            _ => EXIT_VALIDATION,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_error_kind() {
        let conv = CliError::model("fit")(catbond_core::Error::Convergence("stalled".into()));
        assert_eq!(conv.exit_code(), EXIT_CONVERGENCE);
        let domain = CliError::model("fit")(catbond_core::Error::Domain("x".into()));
        assert_eq!(domain.exit_code(), EXIT_VALIDATION);
        let io = CliError::io(Path::new("a.csv"))(std::io::Error::other("gone"));
        assert_eq!(io.exit_code(), EXIT_IO);
        assert!(io.to_string().starts_with("a.csv"));
        assert_eq!(CliError::config("sim.seed", "bad").exit_code(), EXIT_VALIDATION);
        assert_eq!(CliError::MissingArtifact("x".into()).exit_code(), EXIT_VALIDATION);
    }
}
