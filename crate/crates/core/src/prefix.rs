//! Package / type-name prefixes attached to every code segment.
//!
//! Declarations are found with a per-line regex scan plus a brace-depth
//! counter; nothing is parsed. Namespace braces are transparent, so a class
//! inside `namespace x { ... }` still counts as top level.

use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::corpus::SourceFile;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrefixMode {
    #[default]
    Declarations,
    PathOnly,
}

impl PrefixMode {
    pub fn as_str(self) -> &'static str {
        match self {
            PrefixMode::Declarations => "declarations",
            PrefixMode::PathOnly => "path_only",
        }
    }
}

static PACKAGE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^\s*package\s+([A-Za-z_][\w.]*)\s*;?").unwrap());
static NAMESPACE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\bnamespace\s+([A-Za-z_][\w:.]*)").unwrap());
static TYPE_DECL: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"\b(?:class|interface|enum|record|struct|trait|object)\s+([A-Za-z_]\w*)").unwrap()
});
static GO_DECL: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^(?:func\s+(?:\([^)]*\)\s*)?|type\s+)([A-Za-z_]\w*)").unwrap());
static LINE_COMMENT: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"//.*$").unwrap());

/// Prefix for every segment of `file`.
pub fn extract_prefix(file: &SourceFile, mode: PrefixMode) -> String {
    match mode {
        PrefixMode::PathOnly => path_prefix(&file.path),
        PrefixMode::Declarations => {
            declaration_prefix(&file.content).unwrap_or_else(|| path_prefix(&file.path))
        }
    }
}

/// The repository-relative path with separators replaced by spaces.
pub fn path_prefix(path: &str) -> String {
    path.split(['/', '\\'])
        .filter(|p| !p.is_empty())
        .collect::<Vec<_>>()
        .join(" ")
}

/// `package-or-namespace name1 name2 ...`, or `None` when no package or
/// namespace declaration is present.
pub fn declaration_prefix(content: &str) -> Option<String> {
    let mut package: Option<String> = None;
    let mut names: Vec<String> = Vec::new();
    // true = brace opened by a namespace declaration
    let mut braces: Vec<bool> = Vec::new();
    let mut pending_namespace = false;
    let mut in_block_comment = false;

    for raw in content.lines() {
        let line = strip_comments(raw, &mut in_block_comment);
        let line = line.as_ref();

        if package.is_none() && braces.is_empty() {
            if let Some(c) = PACKAGE.captures(line) {
                package = Some(c[1].to_string());
            }
        }

        let mut decls: Vec<(usize, String, bool)> = Vec::new();
        for c in NAMESPACE.captures_iter(line) {
            let m = c.get(1).unwrap();
            decls.push((c.get(0).unwrap().start(), m.as_str().to_string(), true));
        }
        for c in TYPE_DECL.captures_iter(line) {
            decls.push((c.get(0).unwrap().start(), c[1].to_string(), false));
        }
        if let Some(c) = GO_DECL.captures(line) {
            decls.push((0, c[1].to_string(), false));
        }
        decls.sort_by_key(|d| d.0);

        let mut next_decl = decls.into_iter().peekable();
        for (i, ch) in line.char_indices() {
            while next_decl.peek().is_some_and(|d| d.0 <= i) {
                let (_, name, is_namespace) = next_decl.next().unwrap();
                record_decl(&mut package, &mut names, &braces, name, is_namespace);
                if is_namespace {
                    pending_namespace = true;
                }
            }
            match ch {
                '{' => {
                    braces.push(pending_namespace);
                    pending_namespace = false;
                }
                '}' => {
                    braces.pop();
                }
                ';' => pending_namespace = false,
                _ => {}
            }
        }
        for (_, name, is_namespace) in next_decl {
            record_decl(&mut package, &mut names, &braces, name, is_namespace);
            if is_namespace {
                pending_namespace = true;
            }
        }
    }

    let package = package?;
    let mut out = package;
    for n in names {
        out.push(' ');
        out.push_str(&n);
    }
    Some(out)
}

fn record_decl(
    package: &mut Option<String>,
    names: &mut Vec<String>,
    braces: &[bool],
    name: String,
    is_namespace: bool,
) {
    let depth = braces.iter().filter(|ns| !**ns).count();
    if depth > 0 {
        return;
    }
    if is_namespace {
        if package.is_none() {
            *package = Some(name);
        }
    } else if !names.contains(&name) {
        names.push(name);
    }
}

fn strip_comments<'a>(line: &'a str, in_block: &mut bool) -> std::borrow::Cow<'a, str> {
    let mut out = String::new();
    let mut rest = line;
    loop {
        if *in_block {
            match rest.find("*/") {
                Some(end) => {
                    *in_block = false;
                    rest = &rest[end + 2..];
                }
                None => break,
            }
        } else {
            match rest.find("/*") {
                Some(start) => {
                    out.push_str(&rest[..start]);
                    *in_block = true;
                    rest = &rest[start + 2..];
                }
                None => {
                    out.push_str(rest);
                    break;
                }
            }
        }
    }
    LINE_COMMENT.replace(&out, "").into_owned().into()
}
