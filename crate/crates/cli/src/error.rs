use thiserror::Error;

/// Exit code for malformed or inconsistent input.
pub const EXIT_CONFIG: u8 = 2;
/// Exit code for a failed numerical check.
pub const EXIT_VALIDATION: u8 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("validation failed: {0}")]
    Validation(String),
    #[error(transparent)]
    Core(#[from] maskcfg::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        use maskcfg::Error as E;
        match self {
            CliError::Validation(_) => EXIT_VALIDATION,
            CliError::Core(
                E::NormalizationDrift(_)
                | E::TermBudget { .. }
                | E::StepTooCoarse { .. }
                | E::EventOverflow { .. }
                | E::DeadEnd(_),
            ) => EXIT_VALIDATION,
            _ => EXIT_CONFIG,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
