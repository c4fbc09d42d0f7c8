use std::fmt;
use std::path::Path;

use photonic_lab::analysis::GATE_NAMES;

/// Everything that ends a command other than a verification verdict.
#[derive(Debug)]
pub enum CliError {
    /// Bad arguments or input values.
    Usage(String),
    UnknownGate(String),
    Parse {
        origin: String,
        line: usize,
        column: usize,
        message: String,
    },
    Io(String),
    Core(photonic_lab::Error),
}

impl CliError {
    /// Process exit status: every error here is a usage-level failure.
    pub fn exit_code(&self) -> i32 {
        2
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => f.write_str(m),
            CliError::UnknownGate(name) => write!(
                f,
                "unknown gate `{name}` (and no such file); known gates: {}",
                GATE_NAMES.join(", ")
            ),
            CliError::Parse {
                origin,
                line,
                column,
                message,
            } => write!(f, "{origin}:{line}:{column}: {message}"),
            CliError::Io(m) => f.write_str(m),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<photonic_lab::Error> for CliError {
    fn from(e: photonic_lab::Error) -> Self {
        CliError::Core(e)
    }
}

pub fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

pub fn write(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// One-based line and column of byte `offset` in `text`.
pub fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}
