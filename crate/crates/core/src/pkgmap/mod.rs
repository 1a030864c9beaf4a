//! The package map: a declarative database of sub-packages.
//!
//! Manifest grammar, one block per package:
//!
//! ```text
//! # comment
//! package mathmore {
//!   kind: feature            # core | feature
//!   libraries: libMathMore   # ordered
//!   deps: mathcore           # internal sub-packages
//!   builtins:                # vendored third-party code
//!   externals: gsl           # probed on the host system
//!   default: off             # on | off
//!   build: make -C math/mathmore
//! }
//! ```
//!
//! Every key is optional and may appear once. `kind` defaults to `feature`;
//! `default` defaults to `on` for core packages and `off` otherwise. `build`
//! takes the raw remainder of its line (no comment stripping).

mod parse;
mod validate;

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

pub use parse::{parse_map, parse_map_bytes};
pub use validate::validate_map;

use crate::digest::sha256_hex;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PackageKind {
    /// Always enabled.
    Core,
    /// Opt-in.
    Feature,
}

impl PackageKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PackageKind::Core => "core",
            PackageKind::Feature => "feature",
        }
    }
}

/// One sub-package declaration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PackageDecl {
    pub name: String,
    pub kind: PackageKind,
    pub libraries: Vec<String>,
    pub deps: BTreeSet<String>,
    pub builtins: BTreeSet<String>,
    pub externals: BTreeSet<String>,
    pub default: bool,
    /// Optional command for the shell runner.
    pub build: Option<String>,
    /// 1-based manifest line of the `package` keyword; 0 when built in code.
    pub line: usize,
}

impl PackageDecl {
    pub fn new(name: impl Into<String>, kind: PackageKind) -> Self {
        PackageDecl {
            name: name.into(),
            kind,
            libraries: Vec::new(),
            deps: BTreeSet::new(),
            builtins: BTreeSet::new(),
            externals: BTreeSet::new(),
            default: kind == PackageKind::Core,
            build: None,
            line: 0,
        }
    }

    pub fn with_deps<I, S>(mut self, deps: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.deps.extend(deps.into_iter().map(Into::into));
        self
    }

    /// The block as it appears in canonical serialization, trailing LF
    /// included. Per-package content hashes are taken over this text.
    pub fn canonical_block(&self) -> String {
        fn list<'a>(items: impl Iterator<Item = &'a String>) -> String {
            items.map(String::as_str).collect::<Vec<_>>().join(", ")
        }
        fn field(out: &mut String, key: &str, value: &str) {
            out.push_str("  ");
            out.push_str(key);
            out.push(':');
            if !value.is_empty() {
                out.push(' ');
                out.push_str(value);
            }
            out.push('\n');
        }

        let mut out = String::new();
        out.push_str("package ");
        out.push_str(&self.name);
        out.push_str(" {\n");
        field(&mut out, "kind", self.kind.as_str());
        field(&mut out, "libraries", &list(self.libraries.iter()));
        field(&mut out, "deps", &list(self.deps.iter()));
        field(&mut out, "builtins", &list(self.builtins.iter()));
        field(&mut out, "externals", &list(self.externals.iter()));
        field(&mut out, "default", if self.default { "on" } else { "off" });
        if let Some(cmd) = &self.build {
            field(&mut out, "build", cmd);
        }
        out.push_str("}\n");
        out
    }
}

/// Collection of package declarations keyed by name.
///
/// Construction does not check referential integrity or acyclicity; run
/// [`validate_map`] before handing a map to the resolver.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PackageMap {
    packages: BTreeMap<String, PackageDecl>,
    source_digest: String,
}

impl PackageMap {
    /// Builds a map from declarations. Duplicate names are reported as
    /// `E_DUP` diagnostics.
    pub fn from_decls<I>(decls: I) -> Result<Self, Vec<Diagnostic>>
    where
        I: IntoIterator<Item = PackageDecl>,
    {
        let mut packages = BTreeMap::new();
        let mut diags = Vec::new();
        for decl in decls {
            if let Some(first) = packages.get(&decl.name) {
                let first: &PackageDecl = first;
                diags.push(Diagnostic::error(
                    Code::Dup,
                    alloc::format!(
                        "package `{}` already declared at line {}",
                        decl.name,
                        first.line
                    ),
                    decl.line,
                ));
                continue;
            }
            packages.insert(decl.name.clone(), decl);
        }
        if !diags.is_empty() {
            return Err(diags);
        }
        let mut map = PackageMap {
            packages,
            source_digest: String::new(),
        };
        map.source_digest = sha256_hex(canonical_serialize(&map).as_bytes());
        Ok(map)
    }

    pub fn get(&self, name: &str) -> Option<&PackageDecl> {
        self.packages.get(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.packages.contains_key(name)
    }

    /// Declarations in name order.
    pub fn iter(&self) -> impl Iterator<Item = &PackageDecl> {
        self.packages.values()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.packages.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.packages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.packages.is_empty()
    }

    /// SHA-256 (lowercase hex) of [`canonical_serialize`].
    pub fn source_digest(&self) -> &str {
        &self.source_digest
    }

    /// All `(dependent, dependency)` edges, including ones naming unknown
    /// packages.
    pub fn edges(&self) -> impl Iterator<Item = (&str, &str)> {
        self.packages
            .values()
            .flat_map(|p| p.deps.iter().map(move |d| (p.name.as_str(), d.as_str())))
    }
}

/// Canonical text of a map: blocks sorted by name, separated by one blank
/// line, fields in fixed order, set-valued fields sorted, LF endings.
pub fn canonical_serialize(map: &PackageMap) -> String {
    let mut out = String::new();
    for (i, decl) in map.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        out.push_str(&decl.canonical_block());
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Severity {
    Error,
    Warning,
}

/// Diagnostic codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Code {
    Syntax,
    Dup,
    SelfDep,
    Invalid,
    UnknownDep,
    Cycle,
    Truncated,
}

impl Code {
    pub fn as_str(self) -> &'static str {
        match self {
            Code::Syntax => "E_SYNTAX",
            Code::Dup => "E_DUP",
            Code::SelfDep => "E_SELF",
            Code::Invalid => "E_INVALID",
            Code::UnknownDep => "E_UNKNOWN_DEP",
            Code::Cycle => "E_CYCLE",
            Code::Truncated => "W_TRUNCATED",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub severity: Severity,
    pub code: Code,
    pub message: String,
    pub line: usize,
}

impl Diagnostic {
    pub fn error(code: Code, message: impl Into<String>, line: usize) -> Self {
        Diagnostic {
            severity: Severity::Error,
            code,
            message: message.into(),
            line,
        }
    }

    pub fn warning(code: Code, message: impl Into<String>, line: usize) -> Self {
        Diagnostic {
            severity: Severity::Warning,
            code,
            message: message.into(),
            line,
        }
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let severity = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(
            f,
            "line {}: {}[{}]: {}",
            self.line,
            severity,
            self.code.as_str(),
            self.message
        )
    }
}

/// Package, builtin and external names: `[a-z][a-z0-9_-]*`.
pub(crate) fn is_identifier(s: &str) -> bool {
    let mut bytes = s.bytes();
    matches!(bytes.next(), Some(b'a'..=b'z'))
        && bytes.all(|b| matches!(b, b'a'..=b'z' | b'0'..=b'9' | b'_' | b'-'))
}

/// Library names are looser (`libCore`, `libRIO`): ASCII alphanumerics plus
/// `_ . + -`, not starting with punctuation.
pub(crate) fn is_library_name(s: &str) -> bool {
    let mut bytes = s.bytes();
    matches!(bytes.next(), Some(b) if b.is_ascii_alphanumeric() || b == b'_')
        && bytes.all(|b| b.is_ascii_alphanumeric() || matches!(b, b'_' | b'.' | b'+' | b'-'))
}
