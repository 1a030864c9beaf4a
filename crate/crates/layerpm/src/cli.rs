//! The `layerpm` command line.
//!
//! Human-readable results go to stdout, diagnostics to stderr. With
//! `--porcelain`, stdout carries the canonical line formats instead.
//!
//! Exit codes: 0 ok, 1 unknown package, 2 cycle or unknown dependency,
//! 3 missing external, 4 build failure, 5 manifest parse error,
//! 6 state corrupt or locked, 64 usage error.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use layerpm_core::{
    canonical_serialize, export_dot, parse_map_bytes, plan, resolve_with_lock, serialize_plan,
    validate_map, why, Lockfile, PackageMap, Policy, Request, ResolutionReport, SystemProbe,
};

use crate::executor::{dry_run, execute_locked, ExecuteOptions, Outcome};
use crate::runner::ShellRunner;
use crate::store::Store;
use crate::Error;

pub const EXIT_BUILD_FAILED: u8 = 4;
pub const EXIT_USAGE: u8 = 64;

#[derive(Debug, Parser)]
#[command(
    name = "layerpm",
    version,
    about = "Layered, lazy-install package manager",
    after_help = "Dependency graphs are drawn with edges pointing from a package to the packages it depends on."
)]
pub struct Cli {
    /// Package map manifest.
    #[arg(long, global = true, default_value = "packagemap.txt")]
    pub map: PathBuf,

    /// State directory (install state, lockfile, artifact cache).
    #[arg(long, global = true, env = "LAYERPM_STATE", default_value = ".layerpm")]
    pub state: PathBuf,

    /// System probe file: one `NAME<TAB>provenance` per line.
    #[arg(long, global = true)]
    pub probe: Option<PathBuf>,

    /// Machine-readable output in the canonical line formats.
    #[arg(long, global = true)]
    pub porcelain: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Selection {
    /// Packages to enable.
    pub packages: Vec<String>,

    /// Do not enable default-on feature packages.
    #[arg(long)]
    pub no_defaults: bool,

    /// Refuse to enable this package.
    #[arg(long = "disable", value_name = "PKG")]
    pub disable: Vec<String>,

    /// External resolution policy: system_first, builtin_first or system_only.
    #[arg(long, default_value = "system_first")]
    pub policy: Policy,
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    #[command(flatten)]
    pub selection: Selection,

    /// Concurrent package builds per layer.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    pub jobs: u32,

    /// Print the plan and external resolutions without building.
    #[arg(long)]
    pub dry_run: bool,

    /// Stop scheduling new builds after the first failure.
    #[arg(long)]
    pub fail_fast: bool,

    /// Ignore the lockfile and probe externals afresh.
    #[arg(long)]
    pub relock: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the package map.
    Validate,
    /// Show what a request enables and in which order.
    Resolve(Selection),
    /// Show the incremental build plan.
    Plan(Selection),
    /// Plan and build.
    Build(BuildArgs),
    /// Lazily add packages to the installation (build without defaults).
    Add(BuildArgs),
    /// Explain why a package is enabled.
    Why {
        package: String,
        /// Packages that were requested.
        #[arg(long, num_args = 1.., required = true)]
        given: Vec<String>,
    },
    /// Export the enabled dependency graph as Graphviz DOT.
    Graph {
        #[command(flatten)]
        selection: Selection,
        /// Write to this file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List built packages.
    List,
}

/// Entry point for the binary.
pub fn main() -> std::process::ExitCode {
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    let code = run_args(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock());
    std::process::ExitCode::from(code)
}

/// Parses `args` and runs the command, returning the exit code.
pub fn run_args<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(&cli, out, err),
        Err(e) => {
            let text = e.render().to_string();
            if e.use_stderr() {
                let _ = write!(err, "{text}");
                EXIT_USAGE
            } else {
                let _ = write!(out, "{text}");
                0
            }
        }
    }
}

pub fn run(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> u8 {
    match dispatch(cli, out, err) {
        Ok(code) => code,
        Err(e) => {
            report_error(&e, err);
            e.exit_code()
        }
    }
}

fn report_error(e: &Error, err: &mut dyn Write) {
    match e {
        Error::Map { diagnostics, path, .. } => {
            for d in diagnostics {
                let _ = writeln!(err, "{}: {d}", path.display());
            }
        }
        Error::Core(layerpm_core::Error::MissingExternal { report, .. }) => {
            let _ = writeln!(err, "error[E_MISSING_EXTERNAL]: {e}");
            for ext in report.externals.values() {
                let _ = writeln!(err, "  {} -> {}", ext.name, ext.source.as_str());
            }
        }
        Error::Core(layerpm_core::Error::LockConflict { .. }) => {
            let _ = writeln!(err, "error[{}]: {e}", e.code());
            let _ = writeln!(err, "  pass --relock to probe again");
        }
        _ => {
            let _ = writeln!(err, "error[{}]: {e}", e.code());
        }
    }
}

fn load_map(path: &Path) -> Result<PackageMap, Error> {
    let bytes = fs::read(path).map_err(|source| Error::Input {
        path: path.to_path_buf(),
        source,
    })?;
    let map = parse_map_bytes(&bytes).map_err(|diagnostics| Error::Map {
        path: path.to_path_buf(),
        diagnostics,
        parse: true,
    })?;
    let diagnostics = validate_map(&map);
    if diagnostics.iter().any(|d| d.is_error()) {
        return Err(Error::Map {
            path: path.to_path_buf(),
            diagnostics,
            parse: false,
        });
    }
    Ok(map)
}

fn load_probe(path: Option<&Path>) -> Result<SystemProbe, Error> {
    let Some(path) = path else {
        return Ok(SystemProbe::new());
    };
    let text = fs::read_to_string(path).map_err(|source| Error::Input {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(SystemProbe::parse(&text)?)
}

fn request(sel: &Selection, include_defaults: bool) -> Request {
    Request {
        enable: sel.packages.iter().cloned().collect(),
        disable: sel.disable.iter().cloned().collect(),
        include_defaults: include_defaults && !sel.no_defaults,
    }
}

struct Session {
    map: PackageMap,
    probe: SystemProbe,
    store: Store,
}

impl Session {
    fn open(cli: &Cli) -> Result<Self, Error> {
        Ok(Session {
            map: load_map(&cli.map)?,
            probe: load_probe(cli.probe.as_deref())?,
            store: Store::new(&cli.state),
        })
    }

    fn resolve(&self, req: &Request, policy: Policy, lock: &Lockfile) -> Result<ResolutionReport, Error> {
        Ok(resolve_with_lock(&self.map, req, &self.probe, policy, lock)?)
    }

    /// Resolution where missing externals only matter for diagnostics.
    fn resolve_lenient(
        &self,
        req: &Request,
        policy: Policy,
        err: &mut dyn Write,
    ) -> Result<(ResolutionReport, bool), Error> {
        let lock = self.store.read_lockfile()?;
        match self.resolve(req, policy, &lock) {
            Ok(report) => Ok((report, false)),
            Err(Error::Core(layerpm_core::Error::MissingExternal { missing, report })) => {
                let _ = writeln!(
                    err,
                    "warning[E_MISSING_EXTERNAL]: missing external dependencies: {}",
                    missing.join(", ")
                );
                Ok((*report, true))
            }
            Err(e) => Err(e),
        }
    }
}

fn words<'a>(items: impl IntoIterator<Item = &'a String>) -> String {
    items.into_iter().map(String::as_str).collect::<Vec<_>>().join(" ")
}

fn dispatch(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<u8, Error> {
    let wr = |e: std::io::Error| Error::io("<stdout>", e);
    match &cli.command {
        Command::Validate => {
            let map = load_map(&cli.map)?;
            if cli.porcelain {
                write!(out, "{}", canonical_serialize(&map)).map_err(wr)?;
            } else {
                writeln!(out, "ok: {} packages, digest {}", map.len(), map.source_digest()).map_err(wr)?;
            }
            Ok(0)
        }

        Command::Resolve(sel) => {
            let session = Session::open(cli)?;
            let lock = session.store.read_lockfile()?;
            let report = session.resolve(&request(sel, true), sel.policy, &lock)?;
            if cli.porcelain {
                write!(out, "{}", report.to_text()).map_err(wr)?;
            } else {
                writeln!(out, "requested: {}", words(&report.requested)).map_err(wr)?;
                writeln!(out, "enabled: {}", words(&report.enabled)).map_err(wr)?;
                writeln!(out, "order: {}", words(&report.order)).map_err(wr)?;
                for ext in report.externals.values() {
                    writeln!(out, "external {}: {} ({})", ext.name, ext.source.as_str(), ext.provenance)
                        .map_err(wr)?;
                }
            }
            Ok(0)
        }

        Command::Plan(sel) => {
            let session = Session::open(cli)?;
            let (report, missing) = session.resolve_lenient(&request(sel, true), sel.policy, err)?;
            let state = session.store.load_state()?;
            let plan = plan(&session.map, &report, &state)?;
            if plan.is_empty() && !cli.porcelain {
                writeln!(out, "nothing to build").map_err(wr)?;
            } else {
                write!(out, "{}", serialize_plan(&plan)).map_err(wr)?;
            }
            Ok(if missing { 3 } else { 0 })
        }

        Command::Build(args) => build(cli, args, true, out, err),
        Command::Add(args) => build(cli, args, false, out, err),

        Command::Why { package, given } => {
            let session = Session::open(cli)?;
            let req = Request::enable(given.iter().cloned());
            if !session.map.contains(package) {
                return Err(layerpm_core::Error::UnknownPackage { name: package.clone() }.into());
            }
            let (report, _) = session.resolve_lenient(&req, Policy::default(), err)?;
            let paths = why(&report, package)?;
            for path in &paths.paths {
                writeln!(out, "{}", path.join(" -> ")).map_err(wr)?;
            }
            if paths.truncated {
                let _ = writeln!(
                    err,
                    "warning[W_TRUNCATED]: stopped after {} paths",
                    paths.paths.len()
                );
            }
            Ok(0)
        }

        Command::Graph { selection, out: file } => {
            let session = Session::open(cli)?;
            let (report, _) = session.resolve_lenient(&request(selection, true), selection.policy, err)?;
            let dot = export_dot(&report);
            match file {
                Some(path) => fs::write(path, dot).map_err(|e| Error::io(path, e))?,
                None => write!(out, "{dot}").map_err(wr)?,
            }
            Ok(0)
        }

        Command::List => {
            let state = Store::new(&cli.state).load_state()?;
            if cli.porcelain {
                write!(out, "{}", state.to_text()).map_err(wr)?;
            } else if state.is_empty() {
                writeln!(out, "no packages built").map_err(wr)?;
            } else {
                for (name, entry) in state.iter() {
                    writeln!(out, "{name}\t{}\t{}", &entry.hash[..12], entry.built_at).map_err(wr)?;
                }
            }
            Ok(0)
        }
    }
}

fn build(
    cli: &Cli,
    args: &BuildArgs,
    include_defaults: bool,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<u8, Error> {
    let wr = |e: std::io::Error| Error::io("<stdout>", e);
    let session = Session::open(cli)?;
    let sel = &args.selection;
    let req = request(sel, include_defaults);

    if args.dry_run {
        let lock = if args.relock { Lockfile::new() } else { session.store.read_lockfile()? };
        let report = session.resolve(&req, sel.policy, &lock)?;
        let state = session.store.load_state()?;
        let plan = plan(&session.map, &report, &state)?;
        write!(out, "{}", dry_run(&plan, &report)).map_err(wr)?;
        return Ok(0);
    }

    let guard = session.store.try_lock()?;
    let old_lock = session.store.read_lockfile()?;
    let pinned = if args.relock { Lockfile::new() } else { old_lock.clone() };
    let report = session.resolve(&req, sel.policy, &pinned)?;
    let mut state = session.store.load_state()?;
    let plan = plan(&session.map, &report, &state)?;

    let mut lock = old_lock.clone();
    lock.absorb(&report);
    if lock != old_lock || !session.store.lockfile_path().exists() {
        session.store.write_lockfile(&lock)?;
    }

    if plan.is_empty() {
        writeln!(out, "nothing to build").map_err(wr)?;
        return Ok(0);
    }

    let workdir = cli
        .map
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."))
        .to_path_buf();
    let runner = ShellRunner::new(workdir);
    let opts = ExecuteOptions {
        jobs: args.jobs as usize,
        fail_fast: args.fail_fast,
        abort: None,
    };
    let result = execute_locked(&session.map, &report, &plan, &runner, &session.store, &guard, &mut state, &opts)?;

    for (layer, names) in plan.layers.iter().enumerate() {
        for name in names {
            let Some(pkg) = result.packages.get(name) else { continue };
            if cli.porcelain {
                writeln!(out, "{layer}\t{name}\t{}", pkg.outcome.as_str()).map_err(wr)?;
            } else {
                writeln!(out, "{} {name}", pkg.outcome.as_str()).map_err(wr)?;
            }
            if pkg.outcome != Outcome::Built {
                let code = pkg.error.unwrap_or(if pkg.outcome == Outcome::Failed { "E_BUILD" } else { "E_SKIPPED" });
                let _ = writeln!(err, "{name}: {code}");
                for line in pkg.log.lines() {
                    let _ = writeln!(err, "  | {line}");
                }
            }
        }
    }
    if !cli.porcelain {
        writeln!(
            out,
            "{} built, {} failed, {} skipped",
            result.count(Outcome::Built),
            result.count(Outcome::Failed),
            result.count(Outcome::Skipped)
        )
        .map_err(wr)?;
    }
    Ok(if result.success() { 0 } else { EXIT_BUILD_FAILED })
}
