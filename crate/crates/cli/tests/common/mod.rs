//! Test oracles that do not go through the library's parser or model.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use regex::Regex;
use serde::Deserialize;

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn fixture(name: &str) -> PathBuf {
    fixtures().join(name)
}

pub const CORPORA: [&str; 2] = ["basic", "flaws"];

/// Runs the CLI in-process and returns (exit code, stdout, stderr).
pub fn cli(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("leakmut").chain(args.iter().copied());
    let code = leakmut_cli::run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

/// Like [`cli`], panicking with stderr on a non-zero exit.
pub fn cli_ok(args: &[&str]) -> String {
    let (code, out, err) = cli(args);
    assert_eq!(code, 0, "leakmut {args:?} failed: {err}");
    out
}

pub fn path_str(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

/// Every file below `root`, as (relative `/` path, absolute path), sorted.
pub fn files(root: &Path) -> Vec<(String, PathBuf)> {
    fn walk(dir: &Path, root: &Path, out: &mut Vec<(String, PathBuf)>) {
        for e in std::fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(&p, root, out);
            } else {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().replace('\\', "/");
                out.push((rel, p));
            }
        }
    }
    let mut out = Vec::new();
    walk(root, root, &mut out);
    out.sort();
    out
}

pub fn java_files(root: &Path) -> Vec<(String, String)> {
    files(root)
        .into_iter()
        .filter(|(rel, _)| rel.ends_with(".java"))
        .map(|(rel, p)| (rel, std::fs::read_to_string(p).unwrap()))
        .collect()
}

/// A method found by [`scan_methods`].
#[derive(Debug, Clone)]
pub struct ScannedMethod {
    pub name: String,
    /// 1-based lines of the opening and closing braces.
    pub open_line: usize,
    pub close_line: usize,
}

const NOT_METHODS: [&str; 8] = ["if", "for", "while", "switch", "catch", "synchronized", "return", "new"];

/// Brace-counting scan for `name(params) [throws ..] {` declarations, skipping
/// control statements and `new T(..) {` anonymous class bodies.
pub fn scan_methods(text: &str) -> Vec<ScannedMethod> {
    let clean = blank_literals(text);
    let header = Regex::new(r"([A-Za-z_$][\w$]*)\s*\(([^()]*)\)\s*(?:throws\s+[\w.,\s]+)?\{").unwrap();
    let line_of = |offset: usize| clean[..offset].bytes().filter(|&b| b == b'\n').count() + 1;
    let mut out = Vec::new();
    for c in header.captures_iter(&clean) {
        let name = c.get(1).unwrap();
        if NOT_METHODS.contains(&name.as_str()) {
            continue;
        }
        // Walk back over a qualified type name and whitespace to the previous word.
        let before = clean[..name.start()].trim_end_matches(|ch: char| ch.is_alphanumeric() || ch == '_' || ch == '.' || ch == '$');
        let prev_word: String = before
            .trim_end()
            .chars()
            .rev()
            .take_while(|ch| ch.is_alphanumeric() || *ch == '_')
            .collect::<Vec<_>>()
            .into_iter()
            .rev()
            .collect();
        if prev_word == "new" {
            continue;
        }
        let open = c.get(0).unwrap().end() - 1;
        let mut depth = 0usize;
        let mut close = open;
        for (i, b) in clean.bytes().enumerate().skip(open) {
            match b {
                b'{' => depth += 1,
                b'}' => {
                    depth -= 1;
                    if depth == 0 {
                        close = i;
                        break;
                    }
                }
                _ => {}
            }
        }
        out.push(ScannedMethod {
            name: name.as_str().to_string(),
            open_line: line_of(open),
            close_line: line_of(close),
        });
    }
    out
}

/// Replaces string/char literal contents and comments with spaces, keeping
/// offsets and newlines.
fn blank_literals(text: &str) -> String {
    let b = text.as_bytes();
    let mut out = b.to_vec();
    let mut i = 0;
    while i < b.len() {
        match b[i] {
            b'"' | b'\'' => {
                let q = b[i];
                i += 1;
                while i < b.len() && b[i] != q {
                    if b[i] == b'\\' {
                        out[i] = b' ';
                        i += 1;
                    }
                    if b[i] != b'\n' {
                        out[i] = b' ';
                    }
                    i += 1;
                }
                i += 1;
            }
            b'/' if b.get(i + 1) == Some(&b'/') => {
                while i < b.len() && b[i] != b'\n' {
                    out[i] = b' ';
                    i += 1;
                }
            }
            b'/' if b.get(i + 1) == Some(&b'*') => {
                while i < b.len() && !(b[i] == b'*' && b.get(i + 1) == Some(&b'/')) {
                    if b[i] != b'\n' {
                        out[i] = b' ';
                    }
                    i += 1;
                }
                out[i] = b' ';
                if i + 1 < b.len() {
                    out[i + 1] = b' ';
                }
                i += 2;
            }
            _ => i += 1,
        }
    }
    String::from_utf8(out).expect("only ASCII bytes replaced")
}

/// Number of method bodies in all Java files of a corpus.
pub fn count_methods(root: &Path) -> usize {
    java_files(root).iter().map(|(_, t)| scan_methods(t).len()).sum()
}

/// Innermost scanned method whose body spans `line`.
pub fn method_at(text: &str, line: usize) -> Option<String> {
    scan_methods(text)
        .into_iter()
        .filter(|m| m.open_line <= line && line <= m.close_line)
        .min_by_key(|m| m.close_line - m.open_line)
        .map(|m| m.name)
}

/// `leak-<id>` string literals in the Java files of a tree.
pub fn scan_tags(root: &Path) -> BTreeSet<String> {
    let re = Regex::new(r#""(leak-\d+)""#).unwrap();
    java_files(root)
        .iter()
        .flat_map(|(_, t)| re.captures_iter(t).map(|c| c[1].to_string()).collect::<Vec<_>>())
        .collect()
}

/// Ids with a `D/leak-<id>` line in a logcat file.
pub fn trace_ids(path: &Path) -> BTreeSet<u32> {
    let re = Regex::new(r"D/leak-(\d+)\s*:").unwrap();
    let text = std::fs::read_to_string(path).unwrap();
    re.captures_iter(&text).map(|c| c[1].parse().unwrap()).collect()
}

/// Ledger rows as (id, category, file, sink line), read with a plain split.
pub fn ledger_rows(path: &Path) -> Vec<(u32, String, String, usize)> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| l.starts_with(|c: char| c.is_ascii_digit()))
        .map(|l| {
            let f: Vec<&str> = l.split('\t').collect();
            (f[0].parse().unwrap(), f[2].to_string(), f[4].to_string(), f[6].parse().unwrap())
        })
        .collect()
}

#[derive(Debug, Deserialize, Default)]
pub struct FlawSpec {
    #[serde(default)]
    pub methods: Vec<String>,
    #[serde(default)]
    pub categories: Vec<String>,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct ExpectedFlaws {
    pub missing_callbacks: FlawSpec,
    pub missing_implicit_calls: FlawSpec,
    pub anonymous_classes: FlawSpec,
    pub asynchronous_methods: FlawSpec,
    pub abstract_only: FlawSpec,
}

impl ExpectedFlaws {
    pub fn load() -> ExpectedFlaws {
        toml::from_str(&std::fs::read_to_string(fixtures().join("flaws.expected.toml")).unwrap()).unwrap()
    }

    /// (code, spec) in FC order.
    pub fn classes(&self) -> [(&'static str, &FlawSpec); 4] {
        [
            ("FC1", &self.missing_callbacks),
            ("FC2", &self.missing_implicit_calls),
            ("FC3", &self.anonymous_classes),
            ("FC4", &self.asynchronous_methods),
        ]
    }
}

/// Membership of a ledger row in a flaw spec, by category or by the
/// enclosing `Class.method` of its sink line in the mutated tree.
pub fn row_matches(spec: &FlawSpec, mutated: &Path, row: &(u32, String, String, usize)) -> bool {
    if spec.categories.contains(&row.1) {
        return true;
    }
    let text = std::fs::read_to_string(mutated.join(&row.2)).unwrap();
    let class = Path::new(&row.2).file_stem().unwrap().to_string_lossy().into_owned();
    method_at(&text, row.3).is_some_and(|m| spec.methods.contains(&format!("{class}.{m}")))
}

/// Expected survivors per flaw class over the executable rows. A row joins
/// the first class that matches.
pub fn expected_by_class(mutated: &Path, executable: &BTreeSet<u32>) -> BTreeMap<&'static str, BTreeSet<u32>> {
    let flaws = ExpectedFlaws::load();
    let mut out: BTreeMap<&'static str, BTreeSet<u32>> = BTreeMap::new();
    for row in ledger_rows(&mutated.join("ledger")) {
        if !executable.contains(&row.0) {
            continue;
        }
        // Category-defined classes first: they override the method location.
        let by_cat = flaws.classes().into_iter().find(|(_, s)| s.categories.contains(&row.1));
        let class = by_cat.or_else(|| flaws.classes().into_iter().find(|(_, s)| row_matches(s, mutated, &row)));
        if let Some((code, _)) = class {
            out.entry(code).or_default().insert(row.0);
        }
    }
    out
}
