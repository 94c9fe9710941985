use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the simulator, the pricing solver and the file formats.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error(
        "pricing solver did not converge after {iterations} iterations \
         (last z = {last_value}, step {last_step:e})"
    )]
    NonConvergence {
        iterations: usize,
        last_value: f64,
        last_step: f64,
        last_adjustments: Vec<f64>,
    },

    #[error("unknown link id {0}")]
    UnknownLink(usize),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    /// Converts a TOML deserialisation error into a located parse error.
    pub(crate) fn toml(text: &str, origin: impl Into<PathBuf>, e: &toml::de::Error) -> Self {
        let message = e.message().to_string();
        let from_span = e
            .span()
            .filter(|s| s.start > 0)
            .map(|s| text[..s.start.min(text.len())].lines().count().max(1));
        let from_key = message
            .strip_prefix("unknown field `")
            .and_then(|rest| rest.split('`').next())
            .and_then(|key| {
                text.lines()
                    .position(|l| {
                        l.trim_start().starts_with(key)
                            && l[l.find(key).unwrap() + key.len()..].trim_start().starts_with('=')
                    })
                    .map(|i| i + 1)
            });
        Error::parse(origin, from_key.or(from_span).unwrap_or(1), message)
    }

    /// True for errors caused by bad user input rather than a failing run.
    pub fn is_usage(&self) -> bool {
        matches!(self, Error::Config(_) | Error::Parse { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
