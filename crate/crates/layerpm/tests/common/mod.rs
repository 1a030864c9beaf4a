#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Mutex;
use std::time::Instant;

use layerpm::core::{parse_map, PackageMap, Policy, Request, ResolutionReport, SystemProbe};
use layerpm::{Job, RunOutput, Runner};

pub const DESK: &str = include_str!("../../../core/tests/data/desk.txt");

pub fn desk() -> PackageMap {
    parse_map(DESK).unwrap()
}

pub fn gsl_probe() -> SystemProbe {
    let mut p = SystemProbe::new();
    p.insert("gsl", "pkg-config gsl 2.7");
    p
}

pub fn resolve(map: &PackageMap, enable: &[&str]) -> ResolutionReport {
    layerpm::core::resolve(map, &Request::enable(enable.iter().copied()), &gsl_probe(), Policy::SystemFirst)
        .unwrap()
}

pub fn set(names: &[&str]) -> BTreeSet<String> {
    names.iter().map(|s| s.to_string()).collect()
}

/// Runner that records start/finish instants and fails the named packages.
#[derive(Default)]
pub struct Recorder {
    pub fail: BTreeSet<String>,
    pub spans: Mutex<BTreeMap<String, (Instant, Instant)>>,
    pub started: Mutex<Vec<String>>,
    pub sleep_us: u64,
}

impl Recorder {
    pub fn failing(names: &[&str]) -> Self {
        Recorder {
            fail: set(names),
            ..Default::default()
        }
    }
}

impl Runner for Recorder {
    fn run(&self, job: &Job<'_>) -> RunOutput {
        let start = Instant::now();
        self.started.lock().unwrap().push(job.name.to_string());
        if self.sleep_us > 0 {
            std::thread::sleep(std::time::Duration::from_micros(self.sleep_us));
        }
        let end = Instant::now();
        self.spans.lock().unwrap().insert(job.name.to_string(), (start, end));
        if self.fail.contains(job.name) {
            RunOutput::failed(format!("{} exploded", job.name))
        } else {
            RunOutput::ok("")
        }
    }
}
