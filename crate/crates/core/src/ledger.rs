//! The mutant ledger: one tab-separated record per seeded mutant, preceded
//! by `#` header lines carrying the run id, corpus fingerprint and counts.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::schemes::{Category, MutationScheme};
use crate::{Error, Result};

pub const LEDGER_FILE: &str = "ledger";
const MAGIC: &str = "# leakmut ledger v1";

pub const FIELDS: [&str; 10] = [
    "mutant-id",
    "scheme",
    "category",
    "operator-id",
    "file",
    "source-line",
    "sink-line",
    "source-api",
    "sink-api",
    "tag",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mutant {
    pub id: u32,
    pub scheme: MutationScheme,
    pub category: Category,
    pub operator_id: String,
    pub file: String,
    pub source_line: u32,
    pub sink_line: u32,
    pub source_api: String,
    pub sink_api: String,
    pub tag: String,
}

pub fn tag_for(id: u32) -> String {
    format!("leak-{id}")
}

/// Mutant id named by a `leak-<digits>` tag.
pub fn parse_tag(tag: &str) -> Option<u32> {
    let digits = tag.strip_prefix("leak-")?;
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MutantLedger {
    pub run_id: String,
    pub corpus_sha256: String,
    pub mutants: Vec<Mutant>,
}

impl MutantLedger {
    pub fn len(&self) -> usize {
        self.mutants.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mutants.is_empty()
    }

    pub fn get(&self, id: u32) -> Option<&Mutant> {
        let m = self.mutants.get((id as usize).checked_sub(1)?)?;
        (m.id == id).then_some(m)
    }

    pub fn ids(&self) -> impl Iterator<Item = u32> + '_ {
        self.mutants.iter().map(|m| m.id)
    }

    pub fn scheme_counts(&self) -> BTreeMap<MutationScheme, usize> {
        let mut out = BTreeMap::new();
        for m in &self.mutants {
            *out.entry(m.scheme).or_insert(0) += 1;
        }
        out
    }

    pub fn category_counts(&self) -> BTreeMap<Category, usize> {
        let mut out = BTreeMap::new();
        for m in &self.mutants {
            *out.entry(m.category).or_insert(0) += 1;
        }
        out
    }

    /// Ids must be exactly 1..=N in order, and tags must match ids.
    pub fn check(&self) -> Result<()> {
        for (i, m) in self.mutants.iter().enumerate() {
            let want = i as u32 + 1;
            if m.id != want {
                return Err(Error::Ledger(format!("record {} has id {}, expected {want}", i + 1, m.id)));
            }
            if m.tag != tag_for(m.id) {
                return Err(Error::Ledger(format!("mutant {} has tag {}", m.id, m.tag)));
            }
        }
        Ok(())
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{MAGIC}");
        let _ = writeln!(out, "# run-id {}", self.run_id);
        let _ = writeln!(out, "# corpus-sha256 {}", self.corpus_sha256);
        let _ = writeln!(out, "# mutants {}", self.mutants.len());
        for (s, n) in self.scheme_counts() {
            let _ = writeln!(out, "# scheme {s} {n}");
        }
        for (c, n) in self.category_counts() {
            let _ = writeln!(out, "# category {c} {n}");
        }
        let _ = writeln!(out, "{}", FIELDS.join("\t"));
        for m in &self.mutants {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                m.id,
                m.scheme,
                m.category,
                m.operator_id,
                m.file,
                m.source_line,
                m.sink_line,
                m.source_api,
                m.sink_api,
                m.tag
            );
        }
        out
    }

    pub fn parse(text: &str) -> Result<MutantLedger> {
        let mut lines = text.lines().enumerate();
        let bad = |n: usize, m: &str| Error::Ledger(format!("line {}: {m}", n + 1));
        match lines.next() {
            Some((_, l)) if l == MAGIC => {}
            _ => return Err(Error::Ledger("missing ledger header".into())),
        }
        let mut run_id = None;
        let mut corpus = None;
        let mut declared = None;
        let mut scheme_counts = BTreeMap::new();
        let mut category_counts = BTreeMap::new();
        let mut mutants = Vec::new();
        let mut saw_fields = false;
        for (n, line) in lines {
            if let Some(h) = line.strip_prefix("# ") {
                let (key, value) = h.split_once(' ').ok_or_else(|| bad(n, "malformed header"))?;
                match key {
                    "run-id" => run_id = Some(value.to_string()),
                    "corpus-sha256" => corpus = Some(value.to_string()),
                    "mutants" => declared = Some(value.parse::<usize>().map_err(|_| bad(n, "bad count"))?),
                    "scheme" | "category" => {
                        let (name, count) = value.split_once(' ').ok_or_else(|| bad(n, "malformed count"))?;
                        let count: usize = count.parse().map_err(|_| bad(n, "bad count"))?;
                        if key == "scheme" {
                            scheme_counts.insert(name.parse::<MutationScheme>()?, count);
                        } else {
                            category_counts.insert(name.parse::<Category>()?, count);
                        }
                    }
                    _ => return Err(bad(n, "unknown header")),
                }
                continue;
            }
            if !saw_fields {
                if line != FIELDS.join("\t") {
                    return Err(bad(n, "expected field header"));
                }
                saw_fields = true;
                continue;
            }
            if line.is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != FIELDS.len() {
                return Err(bad(n, &format!("expected {} fields, found {}", FIELDS.len(), f.len())));
            }
            let num = |s: &str| s.parse::<u32>().map_err(|_| bad(n, &format!("bad number `{s}`")));
            mutants.push(Mutant {
                id: num(f[0])?,
                scheme: f[1].parse()?,
                category: f[2].parse()?,
                operator_id: f[3].to_string(),
                file: f[4].to_string(),
                source_line: num(f[5])?,
                sink_line: num(f[6])?,
                source_api: f[7].to_string(),
                sink_api: f[8].to_string(),
                tag: f[9].to_string(),
            });
        }
        let ledger = MutantLedger {
            run_id: run_id.ok_or_else(|| Error::Ledger("missing run-id".into()))?,
            corpus_sha256: corpus.ok_or_else(|| Error::Ledger("missing corpus-sha256".into()))?,
            mutants,
        };
        ledger.check()?;
        if declared != Some(ledger.len())
            || scheme_counts != ledger.scheme_counts()
            || category_counts != ledger.category_counts()
        {
            return Err(Error::Ledger("header counts disagree with records".into()));
        }
        Ok(ledger)
    }

    pub fn load(path: &Path) -> Result<MutantLedger> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Looks a mutant up by its `leak-<id>` tag.
    pub fn lookup(&self, tag: &str) -> Result<&Mutant> {
        parse_tag(tag)
            .and_then(|id| self.get(id))
            .ok_or_else(|| Error::NotFound(format!("mutant {tag}")))
    }
}
