use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid config field `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] ocean_core::Error),

    #[error("{0}")]
    Violation(String),
}

impl CliError {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    /// Wraps a validation error from the core crate, renaming its field to
    /// the config key that sets it.
    pub fn from_validation(err: ocean_core::Error) -> Self {
        match err {
            ocean_core::Error::Config { field, message } => CliError::Config {
                field: config_key(&field).to_string(),
                message,
            },
            other => CliError::Core(other),
        }
    }

    /// Process exit status: 1 for bad input, 2 for runtime and I/O failures,
    /// 3 when a verification suite finds a violation.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => 1,
            CliError::Core(ocean_core::Error::Config { .. }) => 1,
            CliError::Core(_) | CliError::Io { .. } => 2,
            CliError::Violation(_) => 3,
        }
    }
}

fn config_key(field: &str) -> &str {
    match field {
        "bandwidth_hz" => "network.bandwidth_hz",
        "noise_w" => "network.noise_w",
        "deadline_s" => "network.deadline_s",
        "model_bits" => "network.model_bits",
        "b_min" => "network.b_min_hz",
        "num_clients" => "run.clients",
        other => other,
    }
}
