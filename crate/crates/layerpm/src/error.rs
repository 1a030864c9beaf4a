use std::io;
use std::path::PathBuf;

use layerpm_core::Diagnostic;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] layerpm_core::Error),

    #[error("cannot read {}: {source}", path.display())]
    Input { path: PathBuf, source: io::Error },

    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },

    #[error("state directory {} is locked by another executor", dir.display())]
    Locked { dir: PathBuf },

    #[error("package map {} has {} error(s)", path.display(), diagnostics.iter().filter(|d| d.is_error()).count())]
    Map {
        path: PathBuf,
        diagnostics: Vec<Diagnostic>,
        /// True when the map failed to parse, false when it parsed but did not
        /// validate.
        parse: bool,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn code(&self) -> &'static str {
        match self {
            Error::Core(e) => e.code(),
            Error::Input { .. } => "E_INPUT",
            Error::Io { .. } => "E_IO",
            Error::Locked { .. } => "E_STATE_LOCKED",
            Error::Map { parse: true, .. } => "E_SYNTAX",
            Error::Map { parse: false, .. } => "E_INVALID_MAP",
        }
    }

    /// Process exit status for the CLI.
    pub fn exit_code(&self) -> u8 {
        use layerpm_core::Error as C;
        match self {
            Error::Core(C::UnknownPackage { .. } | C::NotEnabled { .. } | C::DisabledRequired { .. }) => 1,
            Error::Core(C::Cycle { .. }) => 2,
            Error::Core(C::MissingExternal { .. } | C::LockConflict { .. }) => 3,
            Error::Core(C::ProbeSyntax { .. }) => 5,
            Error::Core(C::StateCorrupt { .. } | C::BadHash { .. }) => 6,
            Error::Map { parse: true, .. } | Error::Input { .. } => 5,
            Error::Map { parse: false, .. } => 2,
            Error::Locked { .. } | Error::Io { .. } => 6,
        }
    }
}
