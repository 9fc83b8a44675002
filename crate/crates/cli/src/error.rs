use std::path::Path;

use serde_json::{json, Value};
use thiserror::Error;

use crate::config::ConfigError;

/// Failure of a CLI run. Each variant maps to one exit status.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(#[from] ConfigError),

    #[error("usage: {0}")]
    Usage(String),

    #[error("I/O error on {path}: {message}")]
    Io { path: String, message: String },

    /// The solver stopped short of the tolerance; the best iterate was
    /// written to `dump` when possible.
    #[error("{message}")]
    Convergence {
        message: String,
        dump: Option<String>,
    },

    #[error("{0}")]
    Numerical(#[from] delta_nls_core::Error),

    #[error("self-test failed: {0}")]
    Selftest(String),
}

impl CliError {
    pub fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Usage(_) => 1,
            CliError::Convergence { .. } => 2,
            CliError::Io { .. } => 3,
            CliError::Numerical(_) | CliError::Selftest(_) => 4,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Usage(_) => "usage",
            CliError::Io { .. } => "io",
            CliError::Convergence { .. } => "convergence",
            CliError::Numerical(e) => e.kind(),
            CliError::Selftest(_) => "selftest",
        }
    }

    /// Machine-readable description, written to stderr and `error.json`.
    pub fn to_json(&self) -> Value {
        let mut doc = json!({
            "error": self.kind(),
            "exit_code": self.exit_code(),
            "message": self.to_string(),
        });
        let extra = match self {
            CliError::Config(e) => json!({ "key": e.key, "line": e.line }),
            CliError::Io { path, .. } => json!({ "path": path }),
            CliError::Convergence { dump, .. } => json!({ "dump": dump }),
            _ => json!({}),
        };
        if let (Some(d), Value::Object(e)) = (doc.as_object_mut(), extra) {
            d.extend(e);
        }
        doc
    }
}
