use std::fmt;

use gvm_core::Error;

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_INCOMPLETE: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

/// An error tagged with the module and operation that raised it.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub module: &'static str,
    pub op: &'static str,
    pub msg: String,
}

impl CliError {
    pub fn usage(module: &'static str, op: &'static str, msg: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            module,
            op,
            msg: msg.into(),
        }
    }

    pub fn io(op: &'static str, msg: impl Into<String>) -> Self {
        Self::usage("output", op, msg)
    }

    /// Wrap a library error, picking the exit code from its kind.
    pub fn lib(module: &'static str, op: &'static str, e: Error) -> Self {
        let code = match &e {
            Error::Incomplete { .. } => EXIT_INCOMPLETE,
            Error::Quadrature { .. } | Error::Numerical(_) | Error::ArbitrageInconsistent { .. } => {
                EXIT_NUMERICAL
            }
            Error::AtGridIndex { source, .. } => match source.as_ref() {
                Error::Quadrature { .. } | Error::Numerical(_) => EXIT_NUMERICAL,
                _ => EXIT_USAGE,
            },
            _ => EXIT_USAGE,
        };
        Self {
            code,
            module,
            op,
            msg: e.to_string(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}::{}: {}", self.module, self.op, self.msg)
    }
}

/// Attach module and operation names to library results.
pub trait Tag<T> {
    fn tag(self, module: &'static str, op: &'static str) -> Result<T, CliError>;
}

impl<T> Tag<T> for gvm_core::Result<T> {
    fn tag(self, module: &'static str, op: &'static str) -> Result<T, CliError> {
        self.map_err(|e| CliError::lib(module, op, e))
    }
}
