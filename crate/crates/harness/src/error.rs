use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("invalid spec field `{field}`: {reason}")]
    Spec { field: String, reason: String },

    #[error(transparent)]
    Core(#[from] onebit_core::Error),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed {what}: {reason}")]
    Parse { what: &'static str, reason: String },

    #[error("bundle holds a {found} result, not {expected}")]
    KindMismatch {
        expected: &'static str,
        found: &'static str,
    },

    #[error("nothing to emit: {0}")]
    Empty(&'static str),
}

pub type Result<T> = std::result::Result<T, HarnessError>;

/// Machine-readable form written to stderr by the CLI.
#[derive(Serialize)]
pub struct ErrorReport {
    pub error: &'static str,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
}

impl HarnessError {
    pub fn report(&self) -> ErrorReport {
        let error = match self {
            HarnessError::Spec { .. } => "invalid_spec",
            HarnessError::Core(_) => "computation",
            HarnessError::Io { .. } => "io",
            HarnessError::Parse { .. } => "parse",
            HarnessError::KindMismatch { .. } => "kind_mismatch",
            HarnessError::Empty(_) => "empty",
        };
        let field = match self {
            HarnessError::Spec { field, .. } => Some(field.clone()),
            _ => None,
        };
        ErrorReport {
            error,
            message: self.to_string(),
            field,
        }
    }

    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}
