use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;

use crate::resolver::ResolutionReport;

fn arrow_path(path: &[String]) -> String {
    path.join(" -> ")
}

/// Errors raised by resolution, planning and state handling.
///
/// Each variant carries a stable short code (see [`Error::code`]) that the CLI
/// maps onto exit statuses.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum Error {
    #[error("unknown package `{name}`")]
    UnknownPackage { name: String },

    #[error("package `{name}` is disabled but required: {}", arrow_path(path))]
    DisabledRequired { name: String, path: Vec<String> },

    #[error("missing external dependencies: {}", missing.join(", "))]
    MissingExternal {
        missing: Vec<String>,
        /// The resolution as far as it got, kept for diagnosis.
        report: Box<ResolutionReport>,
    },

    #[error("lockfile pins external `{name}` to {locked} but {reason}")]
    LockConflict {
        name: String,
        locked: String,
        reason: String,
    },

    #[error("dependency cycle: {}", arrow_path(path))]
    Cycle { path: Vec<String> },

    #[error("package `{name}` is not enabled by this request")]
    NotEnabled { name: String },

    #[error("corrupt {file} at line {line}: {reason}")]
    StateCorrupt {
        file: &'static str,
        line: usize,
        reason: String,
    },

    #[error("malformed probe file at line {line}: {reason}")]
    ProbeSyntax { line: usize, reason: String },

    #[error("invalid content hash `{hash}` (expected 64 lowercase hex digits)")]
    BadHash { hash: String },
}

impl Error {
    pub fn code(&self) -> &'static str {
        match self {
            Error::UnknownPackage { .. } => "E_UNKNOWN_PKG",
            Error::DisabledRequired { .. } => "E_DISABLED_REQUIRED",
            Error::MissingExternal { .. } => "E_MISSING_EXTERNAL",
            Error::LockConflict { .. } => "E_LOCK_CONFLICT",
            Error::Cycle { .. } => "E_CYCLE",
            Error::NotEnabled { .. } => "E_NOT_ENABLED",
            Error::StateCorrupt { .. } => "E_STATE_CORRUPT",
            Error::ProbeSyntax { .. } => "E_PROBE_SYNTAX",
            Error::BadHash { .. } => "E_BAD_HASH",
        }
    }
}
