use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },

    #[error("{}{message}", path.as_ref().map(|p| format!("{}: ", p.display())).unwrap_or_default())]
    Parse { path: Option<PathBuf>, message: String },

    #[error("{}invalid scenario:\n  - {}", path.as_ref().map(|p| format!("{}: ", p.display())).unwrap_or_default(), problems.join("\n  - "))]
    Invalid { path: Option<PathBuf>, problems: Vec<String> },
}

impl ConfigError {
    pub fn invalid(problems: Vec<String>) -> ConfigError {
        ConfigError::Invalid { path: None, problems }
    }

    pub fn with_path(self, p: &Path) -> ConfigError {
        match self {
            ConfigError::Parse { message, .. } => ConfigError::Parse { path: Some(p.to_path_buf()), message },
            ConfigError::Invalid { problems, .. } => ConfigError::Invalid { path: Some(p.to_path_buf()), problems },
            other => other,
        }
    }

    pub fn problems(&self) -> Vec<String> {
        match self {
            ConfigError::Invalid { problems, .. } => problems.clone(),
            other => vec![other.to_string()],
        }
    }
}

#[derive(Debug, Error)]
pub enum PlotError {
    #[error("unknown plot kind `{0}`; expected <quantity>_vs_<sweep> with quantity one of airtime, utility, energy, product, head, disseminated")]
    UnknownKind(String),

    #[error("plot kind `{kind}` needs a {expected} sweep, results come from a {found} sweep")]
    SweepMismatch { kind: String, expected: String, found: String },

    #[error("malformed results file: {0}")]
    Malformed(String),
}
