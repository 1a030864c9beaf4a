//! On-disk install state.
//!
//! Layout under the state directory:
//!
//! ```text
//! state.txt        built packages and their manifest hashes
//! lock.txt         how each external dependency was satisfied
//! cache/<hash>/    per-package artifact directory
//! .layerpm.lock    advisory lock held by the running executor
//! ```
//!
//! Files are replaced with write-temp-then-rename, so a reader sees either
//! the old or the new contents, never a torn write.

use std::fs::{self, File, OpenOptions, TryLockError};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use chrono::{SecondsFormat, Utc};
use layerpm_core::{InstallState, Lockfile};

use crate::Error;

pub const STATE_FILE: &str = "state.txt";
pub const LOCK_FILE: &str = "lock.txt";
pub const CACHE_DIR: &str = "cache";
const EXCLUSIVE_FILE: &str = ".layerpm.lock";

#[derive(Debug, Clone)]
pub struct Store {
    dir: PathBuf,
}

/// Exclusive hold on a state directory; released on drop.
#[derive(Debug)]
pub struct StoreLock {
    _file: File,
}

impl Store {
    /// Does not touch the filesystem; a missing directory reads as empty.
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Store { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn state_path(&self) -> PathBuf {
        self.dir.join(STATE_FILE)
    }

    pub fn lockfile_path(&self) -> PathBuf {
        self.dir.join(LOCK_FILE)
    }

    pub fn cache_dir(&self, hash: &str) -> PathBuf {
        self.dir.join(CACHE_DIR).join(hash)
    }

    fn ensure_dir(&self) -> Result<(), Error> {
        fs::create_dir_all(&self.dir).map_err(|e| Error::io(&self.dir, e))
    }

    /// Takes the executor lock without waiting.
    pub fn try_lock(&self) -> Result<StoreLock, Error> {
        self.ensure_dir()?;
        let path = self.dir.join(EXCLUSIVE_FILE);
        let file = OpenOptions::new()
            .create(true)
            .truncate(false)
            .write(true)
            .open(&path)
            .map_err(|e| Error::io(&path, e))?;
        match file.try_lock() {
            Ok(()) => Ok(StoreLock { _file: file }),
            Err(TryLockError::WouldBlock) => Err(Error::Locked {
                dir: self.dir.clone(),
            }),
            Err(TryLockError::Error(e)) => Err(Error::io(path, e)),
        }
    }

    fn read_optional(&self, path: &Path) -> Result<Option<String>, Error> {
        match fs::read(path) {
            Ok(bytes) => String::from_utf8(bytes).map(Some).map_err(|_| {
                Error::Core(layerpm_core::Error::StateCorrupt {
                    file: if path.ends_with(STATE_FILE) { STATE_FILE } else { LOCK_FILE },
                    line: 0,
                    reason: "not valid UTF-8".into(),
                })
            }),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(Error::io(path, e)),
        }
    }

    /// Missing file means nothing is built yet.
    pub fn load_state(&self) -> Result<InstallState, Error> {
        match self.read_optional(&self.state_path())? {
            Some(text) => Ok(InstallState::parse(&text)?),
            None => Ok(InstallState::new()),
        }
    }

    pub fn save_state(&self, state: &InstallState) -> Result<(), Error> {
        self.ensure_dir()?;
        atomic_write(&self.state_path(), state.to_text().as_bytes())
    }

    /// Upserts `name` and rewrites the state file. `state` is only updated
    /// once the new file is in place.
    pub fn record_built(&self, state: &mut InstallState, name: &str, hash: &str) -> Result<(), Error> {
        let mut next = state.clone();
        let now = Utc::now().to_rfc3339_opts(SecondsFormat::Secs, true);
        next.record(name, hash, &now)?;
        self.save_state(&next)?;
        *state = next;
        Ok(())
    }

    pub fn read_lockfile(&self) -> Result<Lockfile, Error> {
        match self.read_optional(&self.lockfile_path())? {
            Some(text) => Ok(Lockfile::parse(&text)?),
            None => Ok(Lockfile::new()),
        }
    }

    pub fn write_lockfile(&self, lock: &Lockfile) -> Result<(), Error> {
        self.ensure_dir()?;
        atomic_write(&self.lockfile_path(), lock.to_text().as_bytes())
    }
}

pub(crate) fn atomic_write(path: &Path, contents: &[u8]) -> Result<(), Error> {
    atomic_write_with(path, contents, || Ok(()))
}

/// `before_rename` runs after the temp file is fully written and synced;
/// failing there leaves the target untouched.
pub(crate) fn atomic_write_with(
    path: &Path,
    contents: &[u8],
    before_rename: impl FnOnce() -> io::Result<()>,
) -> Result<(), Error> {
    let parent = path.parent().unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(parent).map_err(|e| Error::io(parent, e))?;
    tmp.write_all(contents).map_err(|e| Error::io(tmp.path(), e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(tmp.path(), e))?;
    before_rename().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}
