use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use super::{is_identifier, is_library_name, Code, Diagnostic, PackageDecl, PackageKind, PackageMap};

/// Parses manifest bytes, reporting invalid UTF-8 as `E_SYNTAX` on the line
/// where decoding fails.
pub fn parse_map_bytes(bytes: &[u8]) -> Result<PackageMap, Vec<Diagnostic>> {
    match core::str::from_utf8(bytes) {
        Ok(text) => parse_map(text),
        Err(err) => {
            let line = bytes[..err.valid_up_to()]
                .iter()
                .filter(|&&b| b == b'\n')
                .count()
                + 1;
            Err(vec![Diagnostic::error(
                Code::Syntax,
                "manifest is not valid UTF-8",
                line,
            )])
        }
    }
}

/// Parses a manifest. On failure every diagnostic found is returned, not
/// just the first.
pub fn parse_map(text: &str) -> Result<PackageMap, Vec<Diagnostic>> {
    let mut parser = Parser::default();
    for (i, raw) in text.split('\n').enumerate() {
        let raw = raw.strip_suffix('\r').unwrap_or(raw);
        parser.line(raw, i + 1);
    }
    if let Some(block) = parser.open.take() {
        parser.error(
            Code::Syntax,
            format!("block for `{}` is never closed", block.decl.name),
            block.decl.line,
        );
    }
    if !parser.diags.is_empty() {
        return Err(parser.diags);
    }
    PackageMap::from_decls(parser.decls)
}

#[derive(Default)]
struct Parser {
    decls: Vec<PackageDecl>,
    first_line: BTreeMap<String, usize>,
    open: Option<Block>,
    diags: Vec<Diagnostic>,
}

struct Block {
    decl: PackageDecl,
    name_ok: bool,
    seen: BTreeSet<&'static str>,
    explicit_default: Option<(bool, usize)>,
}

const KEYS: [&str; 7] = [
    "kind",
    "libraries",
    "deps",
    "builtins",
    "externals",
    "default",
    "build",
];

fn strip_comment(s: &str) -> &str {
    s.split_once('#').map_or(s, |(before, _)| before)
}

/// `build: <raw text>`; returns the raw value.
fn build_value(s: &str) -> Option<&str> {
    s.strip_prefix("build")?
        .trim_start()
        .strip_prefix(':')
        .map(str::trim)
}

fn split_list(value: &str) -> Option<Vec<&str>> {
    let value = value.trim();
    if value.is_empty() {
        return Some(Vec::new());
    }
    let items: Vec<&str> = value.split(',').map(str::trim).collect();
    if items.iter().any(|i| i.is_empty()) {
        None
    } else {
        Some(items)
    }
}

impl Parser {
    fn error(&mut self, code: Code, message: impl Into<String>, line: usize) {
        self.diags.push(Diagnostic::error(code, message, line));
    }

    fn line(&mut self, raw: &str, n: usize) {
        if self.open.is_some() {
            self.block_content(raw, n);
        } else {
            self.top_level(strip_comment(raw).trim(), n);
        }
    }

    fn top_level(&mut self, content: &str, n: usize) {
        if content.is_empty() {
            return;
        }
        let rest = match content.strip_prefix("package") {
            Some(rest) if rest.starts_with(char::is_whitespace) => rest.trim_start(),
            _ => {
                let msg = if content.starts_with('}') {
                    "unbalanced `}`"
                } else {
                    "expected `package NAME {`"
                };
                self.error(Code::Syntax, msg, n);
                return;
            }
        };
        let name_end = rest
            .find(|c: char| c.is_whitespace() || c == '{')
            .unwrap_or(rest.len());
        let (name, after) = rest.split_at(name_end);
        let Some(after) = after.trim_start().strip_prefix('{') else {
            self.error(Code::Syntax, "expected `{` after package name", n);
            return;
        };
        let name_ok = is_identifier(name);
        if !name_ok {
            self.error(
                Code::Syntax,
                format!("malformed package name `{name}`"),
                n,
            );
        }
        let mut decl = PackageDecl::new(name, PackageKind::Feature);
        decl.line = n;
        self.open = Some(Block {
            decl,
            name_ok,
            seen: BTreeSet::new(),
            explicit_default: None,
        });
        self.block_content(after, n);
    }

    fn block_content(&mut self, raw: &str, n: usize) {
        let trimmed = raw.trim();
        if let Some(value) = build_value(trimmed) {
            let (value, closes) = match value {
                "}" => ("", true),
                v => match v.strip_suffix('}') {
                    Some(head) if head.ends_with(char::is_whitespace) => (head.trim_end(), true),
                    _ => (v, false),
                },
            };
            if self.claim_key("build", n) {
                if value.is_empty() {
                    self.error(Code::Syntax, "empty `build` command", n);
                } else if let Some(block) = self.open.as_mut() {
                    block.decl.build = Some(value.to_string());
                }
            }
            if closes {
                self.close();
            }
            return;
        }

        let content = strip_comment(raw).trim();
        if content.is_empty() {
            return;
        }
        if content.starts_with("package ") || content == "package" {
            let line = self.open.take().map_or(n, |b| b.decl.line);
            self.error(
                Code::Syntax,
                format!("unbalanced braces: block opened at line {line} is never closed"),
                n,
            );
            self.top_level(content, n);
            return;
        }
        let (field, closes) = match content.strip_suffix('}') {
            Some(head) => (head.trim_end(), true),
            None => (content, false),
        };
        if field.contains('{') || field.contains('}') {
            self.error(Code::Syntax, "unbalanced braces", n);
        } else if !field.is_empty() {
            self.field(field, n);
        }
        if closes {
            self.close();
        }
    }

    /// Marks `key` as seen in the open block; false if it was a repeat.
    fn claim_key(&mut self, key: &str, n: usize) -> bool {
        let Some(&key) = KEYS.iter().find(|k| **k == key) else {
            self.error(Code::Syntax, format!("unknown field `{key}`"), n);
            return false;
        };
        let block = self.open.as_mut().expect("inside a block");
        if block.seen.insert(key) {
            true
        } else {
            self.error(Code::Dup, format!("field `{key}` given twice"), n);
            false
        }
    }

    fn field(&mut self, field: &str, n: usize) {
        let Some((key, value)) = field.split_once(':') else {
            self.error(Code::Syntax, "expected `key: value`", n);
            return;
        };
        let key = key.trim();
        if !self.claim_key(key, n) {
            return;
        }
        let Some(items) = split_list(value) else {
            self.error(Code::Syntax, format!("empty item in `{key}` list"), n);
            return;
        };

        match key {
            "kind" | "default" => {
                let parsed = match (key, items.as_slice()) {
                    ("kind", ["core"]) => Some((Some(PackageKind::Core), None)),
                    ("kind", ["feature"]) => Some((Some(PackageKind::Feature), None)),
                    ("default", ["on"]) => Some((None, Some(true))),
                    ("default", ["off"]) => Some((None, Some(false))),
                    _ => None,
                };
                let Some((kind, default)) = parsed else {
                    let expected = if key == "kind" { "core|feature" } else { "on|off" };
                    self.error(
                        Code::Syntax,
                        format!("`{key}` must be one of {expected}"),
                        n,
                    );
                    return;
                };
                let block = self.open.as_mut().expect("inside a block");
                if let Some(kind) = kind {
                    block.decl.kind = kind;
                }
                if let Some(default) = default {
                    block.explicit_default = Some((default, n));
                }
            }
            "libraries" => {
                let mut libs: Vec<String> = Vec::new();
                for item in items {
                    if !is_library_name(item) {
                        self.error(Code::Syntax, format!("malformed library name `{item}`"), n);
                    } else if libs.iter().any(|l| l == item) {
                        self.error(Code::Dup, format!("library `{item}` listed twice"), n);
                    } else {
                        libs.push(item.to_string());
                    }
                }
                self.open.as_mut().expect("inside a block").decl.libraries = libs;
            }
            _ => {
                let own = self.open.as_ref().expect("inside a block").decl.name.clone();
                let mut set = BTreeSet::new();
                for item in items {
                    if !is_identifier(item) {
                        self.error(Code::Syntax, format!("malformed identifier `{item}`"), n);
                    } else if key == "deps" && item == own {
                        self.error(Code::SelfDep, format!("package `{own}` depends on itself"), n);
                    } else if !set.insert(item.to_string()) {
                        self.error(Code::Dup, format!("`{item}` listed twice in `{key}`"), n);
                    }
                }
                let decl = &mut self.open.as_mut().expect("inside a block").decl;
                match key {
                    "deps" => decl.deps = set,
                    "builtins" => decl.builtins = set,
                    _ => decl.externals = set,
                }
            }
        }
    }

    fn close(&mut self) {
        let Some(mut block) = self.open.take() else {
            return;
        };
        let core = block.decl.kind == PackageKind::Core;
        match block.explicit_default {
            Some((false, line)) if core => {
                self.error(
                    Code::Invalid,
                    format!("core package `{}` cannot be `default: off`", block.decl.name),
                    line,
                );
            }
            Some((default, _)) => block.decl.default = default,
            None => block.decl.default = core,
        }
        if !block.name_ok {
            return;
        }
        let name = block.decl.name.clone();
        if let Some(first) = self.first_line.get(&name) {
            let msg = format!("duplicate package `{name}` (first declared at line {first})");
            self.error(Code::Dup, msg, block.decl.line);
            return;
        }
        self.first_line.insert(name, block.decl.line);
        self.decls.push(block.decl);
    }
}
