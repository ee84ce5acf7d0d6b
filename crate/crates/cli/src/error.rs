use std::fmt;

#[derive(Debug)]
pub enum CliError {
    /// Invalid configuration, anchored at `origin:line[:column]`.
    Config {
        origin: String,
        line: Option<usize>,
        column: Option<usize>,
        message: String,
    },
    /// Malformed input file, anchored at `origin:line`.
    Input {
        origin: String,
        line: Option<u64>,
        message: String,
    },
    Usage(String),
    Core(liqlab_core::Error),
    Io(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config {
                origin,
                line,
                column,
                message,
            } => {
                write!(f, "{origin}")?;
                if let Some(l) = line {
                    write!(f, ":{l}")?;
                }
                if let Some(c) = column {
                    write!(f, ":{c}")?;
                }
                write!(f, ": {message}")
            }
            CliError::Input {
                origin,
                line,
                message,
            } => match line {
                Some(l) => write!(f, "{origin}:{l}: {message}"),
                None => write!(f, "{origin}: {message}"),
            },
            CliError::Usage(m) | CliError::Io(m) => f.write_str(m),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<liqlab_core::Error> for CliError {
    fn from(e: liqlab_core::Error) -> Self {
        CliError::Core(e)
    }
}

pub(crate) fn io_error(path: &std::path::Path, e: impl fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

/// 1-based line of the first occurrence of `"key"` in a JSON document.
pub fn locate_key(text: &str, key: &str) -> Option<usize> {
    let needle = format!("\"{key}\"");
    text.lines()
        .position(|l| l.contains(&needle))
        .map(|i| i + 1)
}
