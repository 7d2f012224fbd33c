use thiserror::Error;

pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_AUDIT_FAILED: i32 = 4;
const EXIT_IO: i32 = 1;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error(transparent)]
    Core(#[from] owgame_core::Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("audit failed")]
    AuditFailed,
}

impl CliError {
    pub fn validation(flag: &str, e: impl std::fmt::Display) -> Self {
        Self::Validation(format!("{flag}: {e}"))
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Validation(_) => EXIT_VALIDATION,
            Self::Core(e) if e.is_numerical() => EXIT_NUMERICAL,
            Self::Core(_) => EXIT_VALIDATION,
            Self::Io(_) | Self::Json(_) => EXIT_IO,
            Self::AuditFailed => EXIT_AUDIT_FAILED,
        }
    }
}
