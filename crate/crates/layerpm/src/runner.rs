use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use layerpm_core::{ExternalResolution, PackageDecl};

/// One package build handed to a [`Runner`].
#[derive(Debug, Clone)]
pub struct Job<'a> {
    pub name: &'a str,
    pub decl: &'a PackageDecl,
    pub hash: &'a str,
    /// Resolutions of this package's own externals.
    pub externals: BTreeMap<String, ExternalResolution>,
    /// Artifact directory, created before the runner is called.
    pub cache_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunOutput {
    pub success: bool,
    pub log: String,
}

impl RunOutput {
    pub fn ok(log: impl Into<String>) -> Self {
        RunOutput {
            success: true,
            log: log.into(),
        }
    }

    pub fn failed(log: impl Into<String>) -> Self {
        RunOutput {
            success: false,
            log: log.into(),
        }
    }
}

/// Performs one package build. Runners never touch the install state; the
/// executor records results.
pub trait Runner: Sync {
    fn run(&self, job: &Job<'_>) -> RunOutput;
}

impl<F> Runner for F
where
    F: Fn(&Job<'_>) -> RunOutput + Sync,
{
    fn run(&self, job: &Job<'_>) -> RunOutput {
        self(job)
    }
}

/// Runs a package's `build:` command with `sh -c` from `workdir`, or, when
/// the package has none, drops a `BUILT` witness file into its cache
/// directory.
///
/// Commands see `LAYERPM_PACKAGE`, `LAYERPM_HASH`, `LAYERPM_CACHE` and
/// `LAYERPM_EXTERNALS` (`name=source:provenance` pairs joined by `;`).
#[derive(Debug, Clone)]
pub struct ShellRunner {
    workdir: PathBuf,
}

impl ShellRunner {
    pub fn new(workdir: impl Into<PathBuf>) -> Self {
        ShellRunner {
            workdir: workdir.into(),
        }
    }

    pub fn workdir(&self) -> &Path {
        &self.workdir
    }
}

impl Runner for ShellRunner {
    fn run(&self, job: &Job<'_>) -> RunOutput {
        let Some(cmd) = &job.decl.build else {
            let witness = job.cache_dir.join("BUILT");
            return match fs::write(&witness, format!("{}\t{}\n", job.name, job.hash)) {
                Ok(()) => RunOutput::ok(format!("wrote {}", witness.display())),
                Err(e) => RunOutput::failed(format!("{}: {e}", witness.display())),
            };
        };
        let externals = job
            .externals
            .values()
            .map(|e| format!("{}={}:{}", e.name, e.source.as_str(), e.provenance))
            .collect::<Vec<_>>()
            .join(";");
        let output = Command::new("sh")
            .arg("-c")
            .arg(cmd)
            .current_dir(&self.workdir)
            .env("LAYERPM_PACKAGE", job.name)
            .env("LAYERPM_HASH", job.hash)
            .env("LAYERPM_CACHE", &job.cache_dir)
            .env("LAYERPM_EXTERNALS", externals)
            .output();
        match output {
            Ok(out) => {
                let mut log = String::from_utf8_lossy(&out.stdout).into_owned();
                log.push_str(&String::from_utf8_lossy(&out.stderr));
                RunOutput {
                    success: out.status.success(),
                    log,
                }
            }
            Err(e) => RunOutput::failed(format!("cannot spawn `sh`: {e}")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use layerpm_core::PackageKind;

    fn job<'a>(decl: &'a PackageDecl, dir: &Path) -> Job<'a> {
        Job {
            name: &decl.name,
            decl,
            hash: "abc",
            externals: BTreeMap::new(),
            cache_dir: dir.to_path_buf(),
        }
    }

    #[test]
    fn witness_file_without_command() {
        let dir = tempfile::tempdir().unwrap();
        let decl = PackageDecl::new("core", PackageKind::Core);
        let out = ShellRunner::new(dir.path()).run(&job(&decl, dir.path()));
        assert!(out.success);
        assert_eq!(fs::read_to_string(dir.path().join("BUILT")).unwrap(), "core\tabc\n");
    }

    #[test]
    fn command_exit_status_decides() {
        let dir = tempfile::tempdir().unwrap();
        let mut decl = PackageDecl::new("io", PackageKind::Feature);
        decl.build = Some("echo building $LAYERPM_PACKAGE && touch \"$LAYERPM_CACHE/out\"".into());
        let out = ShellRunner::new(dir.path()).run(&job(&decl, dir.path()));
        assert!(out.success, "{}", out.log);
        assert_eq!(out.log, "building io\n");
        assert!(dir.path().join("out").exists());

        decl.build = Some("echo nope >&2; exit 3".into());
        let out = ShellRunner::new(dir.path()).run(&job(&decl, dir.path()));
        assert!(!out.success);
        assert_eq!(out.log, "nope\n");
    }
}
