//! Exit codes and the machine-readable error report written to stderr.

use serde::Serialize;
use serde_json::json;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Exit {
    /// Bad flags, unknown config keys or inconsistent values.
    Schema = 2,
    /// The requested charge sector is empty.
    Infeasible = 3,
    /// Numerical failure, failed verification or unwritable output.
    Solver = 4,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CliError {
    pub exit: Exit,
    pub kind: String,
    pub message: String,
}

impl CliError {
    pub fn new(exit: Exit, kind: impl Into<String>, message: impl Into<String>) -> Self {
        CliError { exit, kind: kind.into(), message: message.into() }
    }

    pub fn code(&self) -> i32 {
        self.exit as i32
    }

    /// One-line JSON report.
    pub fn to_json(&self) -> String {
        json!({ "error": { "kind": self.kind, "exit_code": self.code(), "message": self.message } }).to_string()
    }
}

impl From<dqlm::Error> for CliError {
    fn from(e: dqlm::Error) -> Self {
        use dqlm::Error::*;
        let (exit, kind) = match &e {
            EmptySector(_) => (Exit::Infeasible, "empty-sector"),
            SizeTooSmall(_) | SlotOutOfRange { .. } | InvalidSite { .. } | InvalidParameter(_) | UnsupportedLayout(_) => {
                (Exit::Schema, "invalid-model")
            }
            OverDenseCap { .. } => (Exit::Solver, "dense-cap"),
            Solver(_) | EmptyKernel(_) => (Exit::Solver, "eigensolver"),
            StepUnderflow { .. } | Tolerance(_) => (Exit::Solver, "integrator"),
            DimensionMismatch(_) | BasisMismatch(_) | Leakage { .. } => (Exit::Solver, "internal"),
        };
        CliError::new(exit, kind, e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::new(Exit::Solver, "io", e.to_string())
    }
}
