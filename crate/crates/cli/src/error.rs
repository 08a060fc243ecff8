use std::fmt;
use std::process::ExitCode;

/// User-facing failure. Validation errors name the offending field.
#[derive(Debug)]
pub enum CliError {
    Validation { field: String, message: String },
    Internal(String),
}

impl CliError {
    pub fn invalid(field: &str, message: impl fmt::Display) -> Self {
        CliError::Validation {
            field: field.to_string(),
            message: message.to_string(),
        }
    }

    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Validation { .. } => ExitCode::from(2),
            CliError::Internal(_) => ExitCode::from(1),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation { field, message } => write!(f, "invalid {field}: {message}"),
            CliError::Internal(m) => write!(f, "internal error: {m}"),
        }
    }
}

/// Attributes a library error to `field`. Solver failures are internal;
/// everything else traces back to the inputs.
pub fn blame(field: &str) -> impl Fn(natslab::Error) -> CliError + '_ {
    move |e| match e {
        natslab::Error::NoConvergence { .. } | natslab::Error::NotUnitary { .. } => CliError::Internal(e.to_string()),
        other => CliError::invalid(field, other),
    }
}
