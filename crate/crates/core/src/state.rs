//! Install state and lockfile text formats.
//!
//! `state.txt` holds one line per built package, sorted by name:
//!
//! ```text
//! NAME<TAB>MANIFEST-HASH<TAB>BUILT-AT<TAB>CHAIN
//! ```
//!
//! `CHAIN` is a running SHA-256 over the canonical entries (`NAME HASH\n`)
//! up to and including the line, seeded with the hash of the empty string.
//! The chain value of the last line is the state digest. Timestamps are not
//! part of it.
//!
//! `lock.txt` holds one `external NAME SOURCE PROVENANCE` line per external,
//! sorted by name.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use sha2::{Digest, Sha256};

use crate::digest::{hex_of, is_hex64, sha256_hex};
use crate::pkgmap::is_identifier;
use crate::resolver::{ExternalSource, ResolutionReport};
use crate::Error;

const STATE_FILE: &str = "state.txt";
const LOCK_FILE: &str = "lock.txt";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateEntry {
    pub hash: String,
    /// UTC timestamp, informational only.
    pub built_at: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstallState {
    entries: BTreeMap<String, StateEntry>,
    digest: String,
}

impl Default for InstallState {
    fn default() -> Self {
        InstallState {
            entries: BTreeMap::new(),
            digest: sha256_hex(b""),
        }
    }
}

fn chain_step(prev: &str, name: &str, hash: &str) -> String {
    let mut h = Sha256::new();
    h.update(prev.as_bytes());
    h.update(name.as_bytes());
    h.update(b" ");
    h.update(hash.as_bytes());
    h.update(b"\n");
    hex_of(&h.finalize())
}

impl InstallState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Parses and integrity-checks `state.txt` contents. Nothing is repaired:
    /// any malformed line, ordering violation or chain mismatch is
    /// `E_STATE_CORRUPT`.
    pub fn parse(text: &str) -> Result<Self, Error> {
        let corrupt = |line: usize, reason: String| Error::StateCorrupt {
            file: STATE_FILE,
            line,
            reason,
        };
        if !text.is_empty() && !text.ends_with('\n') {
            return Err(corrupt(text.lines().count(), "truncated last line".into()));
        }
        let mut state = InstallState::new();
        let mut chain = state.digest.clone();
        for (i, line) in text.lines().enumerate() {
            let n = i + 1;
            let fields: Vec<&str> = line.split('\t').collect();
            let [name, hash, built_at, check] = fields[..] else {
                return Err(corrupt(n, "expected 4 tab-separated fields".into()));
            };
            if !is_identifier(name) {
                return Err(corrupt(n, format!("malformed package name `{name}`")));
            }
            if !is_hex64(hash) {
                return Err(corrupt(n, "malformed manifest hash".into()));
            }
            if built_at.is_empty() || built_at.contains(char::is_whitespace) {
                return Err(corrupt(n, "malformed timestamp".into()));
            }
            if state.entries.keys().next_back().is_some_and(|last| last.as_str() >= name) {
                return Err(corrupt(n, "entries out of order or duplicated".into()));
            }
            chain = chain_step(&chain, name, hash);
            if check != chain {
                return Err(corrupt(n, "integrity check failed".into()));
            }
            state.entries.insert(
                name.to_string(),
                StateEntry {
                    hash: hash.to_string(),
                    built_at: built_at.to_string(),
                },
            );
        }
        state.digest = chain;
        Ok(state)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut chain = sha256_hex(b"");
        for (name, entry) in &self.entries {
            chain = chain_step(&chain, name, &entry.hash);
            out.push_str(&format!(
                "{name}\t{}\t{}\t{chain}\n",
                entry.hash, entry.built_at
            ));
        }
        out
    }

    /// Upserts an entry and refreshes the digest.
    pub fn record(&mut self, name: &str, hash: &str, built_at: &str) -> Result<(), Error> {
        if !is_hex64(hash) {
            return Err(Error::BadHash {
                hash: hash.to_string(),
            });
        }
        if !is_identifier(name) {
            return Err(Error::UnknownPackage {
                name: name.to_string(),
            });
        }
        let built_at = if built_at.is_empty() || built_at.contains(char::is_whitespace) {
            "-".to_string()
        } else {
            built_at.to_string()
        };
        self.entries.insert(
            name.to_string(),
            StateEntry {
                hash: hash.to_string(),
                built_at,
            },
        );
        self.digest = self.recompute_digest();
        Ok(())
    }

    pub fn remove(&mut self, name: &str) -> Option<StateEntry> {
        let entry = self.entries.remove(name);
        self.digest = self.recompute_digest();
        entry
    }

    fn recompute_digest(&self) -> String {
        self.entries
            .iter()
            .fold(sha256_hex(b""), |chain, (name, e)| chain_step(&chain, name, &e.hash))
    }

    /// True when the stored digest matches the entries.
    pub fn verify(&self) -> bool {
        self.digest == self.recompute_digest()
            && self.entries.values().all(|e| is_hex64(&e.hash))
    }

    pub fn digest(&self) -> &str {
        &self.digest
    }

    pub fn get(&self, name: &str) -> Option<&StateEntry> {
        self.entries.get(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &StateEntry)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    #[doc(hidden)]
    pub fn entries_mut_unchecked(&mut self) -> &mut BTreeMap<String, StateEntry> {
        &mut self.entries
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum LockedSource {
    System,
    Builtin,
}

impl LockedSource {
    pub fn as_str(self) -> &'static str {
        match self {
            LockedSource::System => "system",
            LockedSource::Builtin => "builtin",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LockEntry {
    pub source: LockedSource,
    pub provenance: String,
}

/// Recorded resolutions of external dependencies.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Lockfile {
    entries: BTreeMap<String, LockEntry>,
}

impl Lockfile {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn parse(text: &str) -> Result<Self, Error> {
        let corrupt = |line: usize, reason: String| Error::StateCorrupt {
            file: LOCK_FILE,
            line,
            reason,
        };
        let mut lock = Lockfile::new();
        for (i, line) in text.lines().enumerate() {
            let n = i + 1;
            let mut parts = line.splitn(4, ' ');
            let (Some("external"), Some(name), Some(source)) =
                (parts.next(), parts.next(), parts.next())
            else {
                return Err(corrupt(n, "expected `external NAME SOURCE PROVENANCE`".into()));
            };
            let provenance = parts.next().unwrap_or("");
            if !is_identifier(name) {
                return Err(corrupt(n, format!("malformed external name `{name}`")));
            }
            let source = match source {
                "system" => LockedSource::System,
                "builtin" => LockedSource::Builtin,
                other => return Err(corrupt(n, format!("unknown source `{other}`"))),
            };
            if lock.entries.contains_key(name) {
                return Err(corrupt(n, format!("external `{name}` locked twice")));
            }
            lock.insert(name, source, provenance);
        }
        Ok(lock)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (name, entry) in &self.entries {
            out.push_str("external ");
            out.push_str(name);
            out.push(' ');
            out.push_str(entry.source.as_str());
            if !entry.provenance.is_empty() {
                out.push(' ');
                out.push_str(&entry.provenance);
            }
            out.push('\n');
        }
        out
    }

    /// Provenance text is stored on a single line; line breaks become spaces.
    pub fn insert(&mut self, name: &str, source: LockedSource, provenance: &str) {
        let provenance = provenance.replace(['\n', '\r'], " ");
        self.entries.insert(
            name.to_string(),
            LockEntry {
                source,
                provenance: provenance.trim().to_string(),
            },
        );
    }

    /// Pins every satisfied external of `report`, overwriting older pins of
    /// the same name. Missing externals are never recorded.
    pub fn absorb(&mut self, report: &ResolutionReport) {
        for ext in report.externals.values() {
            let source = match ext.source {
                ExternalSource::System => LockedSource::System,
                ExternalSource::Builtin => LockedSource::Builtin,
                ExternalSource::Missing => continue,
            };
            self.insert(&ext.name, source, &ext.provenance);
        }
    }

    pub fn get(&self, name: &str) -> Option<&LockEntry> {
        self.entries.get(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &LockEntry)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}
