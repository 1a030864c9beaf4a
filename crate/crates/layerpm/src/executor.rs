//! Layer-by-layer plan execution.
//!
//! Layers run strictly in order. Inside a layer up to `jobs` packages build
//! concurrently on scoped worker threads; the calling thread is the only one
//! that writes the install state, committing each package as soon as it
//! succeeds. A failure skips exactly the packages downstream of it unless
//! `fail_fast` is set.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt::Write as _;
use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{mpsc, Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use layerpm_core::{serialize_plan, BuildPlan, InstallState, PackageMap, ResolutionReport};

use crate::runner::{Job, RunOutput, Runner};
use crate::store::{Store, StoreLock};
use crate::Error;

#[derive(Debug, Clone, Default)]
pub struct ExecuteOptions {
    /// Concurrent builds per layer; 0 is treated as 1.
    pub jobs: usize,
    pub fail_fast: bool,
    /// Checked between layers; once set, no further layer starts.
    pub abort: Option<Arc<AtomicBool>>,
}

impl ExecuteOptions {
    pub fn jobs(jobs: usize) -> Self {
        ExecuteOptions {
            jobs,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Outcome {
    Built,
    Failed,
    Skipped,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Built => "built",
            Outcome::Failed => "failed",
            Outcome::Skipped => "skipped",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PackageOutcome {
    pub outcome: Outcome,
    pub elapsed: Duration,
    pub log: String,
    /// `E_RUNNER_PANIC` when the runner panicked.
    pub error: Option<&'static str>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExecutionReport {
    pub packages: BTreeMap<String, PackageOutcome>,
    /// Set when the abort flag stopped execution before the last layer.
    pub aborted: bool,
}

impl ExecutionReport {
    pub fn success(&self) -> bool {
        !self.aborted && self.count(Outcome::Failed) == 0
    }

    pub fn count(&self, outcome: Outcome) -> usize {
        self.packages.values().filter(|p| p.outcome == outcome).count()
    }

    pub fn with_outcome(&self, outcome: Outcome) -> BTreeSet<&str> {
        self.packages
            .iter()
            .filter(|(_, p)| p.outcome == outcome)
            .map(|(n, _)| n.as_str())
            .collect()
    }

    pub fn outcome(&self, name: &str) -> Option<Outcome> {
        self.packages.get(name).map(|p| p.outcome)
    }

    fn skip(&mut self, name: &str, why: &str) {
        self.packages.insert(
            name.to_string(),
            PackageOutcome {
                outcome: Outcome::Skipped,
                elapsed: Duration::ZERO,
                log: why.to_string(),
                error: None,
            },
        );
    }
}

/// Acquires the store lock and runs the plan.
pub fn execute(
    map: &PackageMap,
    report: &ResolutionReport,
    plan: &BuildPlan,
    runner: &dyn Runner,
    store: &Store,
    state: &mut InstallState,
    opts: &ExecuteOptions,
) -> Result<ExecutionReport, Error> {
    let lock = store.try_lock()?;
    execute_locked(map, report, plan, runner, store, &lock, state, opts)
}

/// [`execute`] for callers already holding the store lock.
#[allow(clippy::too_many_arguments)]
pub fn execute_locked(
    map: &PackageMap,
    report: &ResolutionReport,
    plan: &BuildPlan,
    runner: &dyn Runner,
    store: &Store,
    _lock: &StoreLock,
    state: &mut InstallState,
    opts: &ExecuteOptions,
) -> Result<ExecutionReport, Error> {
    let jobs = opts.jobs.max(1);
    let mut out = ExecutionReport::default();
    let mut blocked: BTreeSet<String> = BTreeSet::new();
    let mut halted = false;

    for layer in &plan.layers {
        if opts.abort.as_ref().is_some_and(|a| a.load(Ordering::SeqCst)) {
            out.aborted = true;
            break;
        }
        let mut runnable = Vec::new();
        for name in layer {
            let decl = map.get(name).ok_or_else(|| layerpm_core::Error::UnknownPackage {
                name: name.clone(),
            })?;
            if halted {
                out.skip(name, "skipped: stopped after an earlier failure");
                blocked.insert(name.clone());
            } else if let Some(dep) = decl.deps.iter().find(|d| blocked.contains(*d)) {
                out.skip(name, &format!("skipped: dependency `{dep}` did not build"));
                blocked.insert(name.clone());
            } else {
                runnable.push(name.as_str());
            }
        }
        let settled = run_layer(map, report, plan, runner, store, state, &runnable, jobs, opts.fail_fast, &mut out)?;
        for name in &runnable {
            if out.outcome(name) != Some(Outcome::Built) {
                blocked.insert((*name).to_string());
            }
        }
        halted |= settled;
    }
    Ok(out)
}

struct Finished {
    name: String,
    result: Result<RunOutput, String>,
    elapsed: Duration,
}

/// Runs one layer. Returns true when fail-fast tripped.
#[allow(clippy::too_many_arguments)]
fn run_layer(
    map: &PackageMap,
    report: &ResolutionReport,
    plan: &BuildPlan,
    runner: &dyn Runner,
    store: &Store,
    state: &mut InstallState,
    runnable: &[&str],
    jobs: usize,
    fail_fast: bool,
    out: &mut ExecutionReport,
) -> Result<bool, Error> {
    if runnable.is_empty() {
        return Ok(false);
    }
    let queue = Mutex::new(runnable.iter().copied().collect::<VecDeque<&str>>());
    let halt = AtomicBool::new(false);
    let mut commit_error = None;
    let (tx, rx) = mpsc::channel::<Finished>();

    thread::scope(|scope| {
        for _ in 0..jobs.min(runnable.len()) {
            let tx = tx.clone();
            let (queue, halt) = (&queue, &halt);
            scope.spawn(move || loop {
                if halt.load(Ordering::SeqCst) {
                    break;
                }
                let Some(name) = queue.lock().expect("queue lock").pop_front() else {
                    break;
                };
                let started = Instant::now();
                let result = build_one(map, report, plan, runner, store, name);
                let _ = tx.send(Finished {
                    name: name.to_string(),
                    result,
                    elapsed: started.elapsed(),
                });
            });
        }
        drop(tx);

        for done in rx {
            let (outcome, log, error) = match done.result {
                Ok(run) if run.success => {
                    match store.record_built(state, &done.name, &plan.hashes[&done.name]) {
                        Ok(()) => (Outcome::Built, run.log, None),
                        Err(e) => {
                            halt.store(true, Ordering::SeqCst);
                            commit_error = Some(e);
                            (Outcome::Failed, run.log, None)
                        }
                    }
                }
                Ok(run) => (Outcome::Failed, run.log, None),
                Err(panic_msg) => (Outcome::Failed, panic_msg, Some("E_RUNNER_PANIC")),
            };
            if outcome == Outcome::Failed && fail_fast {
                halt.store(true, Ordering::SeqCst);
            }
            out.packages.insert(
                done.name,
                PackageOutcome {
                    outcome,
                    elapsed: done.elapsed,
                    log,
                    error,
                },
            );
        }
    });

    if let Some(e) = commit_error {
        return Err(e);
    }
    let leftover: Vec<&str> = queue.into_inner().expect("queue lock").into_iter().collect();
    for name in &leftover {
        out.skip(name, "skipped: stopped after an earlier failure");
    }
    Ok(halt.load(Ordering::SeqCst))
}

fn build_one(
    map: &PackageMap,
    report: &ResolutionReport,
    plan: &BuildPlan,
    runner: &dyn Runner,
    store: &Store,
    name: &str,
) -> Result<RunOutput, String> {
    let decl = map.get(name).expect("planned package is in the map");
    let hash = plan.hashes[name].as_str();
    let cache_dir = store.cache_dir(hash);
    if let Err(e) = fs::create_dir_all(&cache_dir) {
        return Ok(RunOutput::failed(format!("{}: {e}", cache_dir.display())));
    }
    let externals = decl
        .externals
        .iter()
        .filter_map(|e| report.externals.get(e).map(|r| (e.clone(), r.clone())))
        .collect();
    let job = Job {
        name,
        decl,
        hash,
        externals,
        cache_dir,
    };
    panic::catch_unwind(AssertUnwindSafe(|| runner.run(&job))).map_err(|payload| {
        let msg = payload
            .downcast_ref::<&str>()
            .map(|s| (*s).to_string())
            .or_else(|| payload.downcast_ref::<String>().cloned())
            .unwrap_or_else(|| "runner panicked".to_string());
        format!("runner panicked: {msg}")
    })
}

/// What `build` would do, without doing it: the serialized plan followed by
/// the external resolutions.
pub fn dry_run(plan: &BuildPlan, report: &ResolutionReport) -> String {
    let mut out = if plan.is_empty() {
        String::from("nothing to build\n")
    } else {
        serialize_plan(plan)
    };
    for ext in report.externals.values() {
        let _ = write!(out, "external {} {}", ext.name, ext.source.as_str());
        if !ext.provenance.is_empty() {
            let _ = write!(out, " {}", ext.provenance);
        }
        out.push('\n');
    }
    out
}
