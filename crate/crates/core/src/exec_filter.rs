//! Runtime trace ingestion: which mutants were observed executing.
//!
//! Two line formats are recognized:
//!
//! * logcat: `<anything>D/leak-<n>: <payload>`, optionally with a
//!   `( <pid>)` group before the colon;
//! * bare: `leak-<n>\t<payload>`.
//!
//! Split-source markers (`leak-src-<n>`) use the same shapes.

use std::collections::BTreeSet;
use std::io::BufRead;
use std::path::Path;
use std::sync::OnceLock;

use regex::Regex;

use crate::ledger::{parse_tag, MutantLedger};
use crate::schemes::Category;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TraceFormat {
    Logcat,
    Bare,
    /// Either of the above, per line.
    #[default]
    Any,
}

impl std::str::FromStr for TraceFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "logcat" => Ok(TraceFormat::Logcat),
            "bare" => Ok(TraceFormat::Bare),
            "any" => Ok(TraceFormat::Any),
            _ => Err(Error::Config(format!("unknown trace format `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceRecord {
    pub seq: usize,
    pub tag: String,
    pub payload: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExecutionTrace {
    pub records: Vec<TraceRecord>,
    /// Lines that matched neither format.
    pub ignored: usize,
}

fn logcat_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"D/(leak-(?:src-)?\d+)\s*(?:\(\s*\d+\))?: ?(.*)$").expect("valid regex"))
}

fn bare_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^(leak-(?:src-)?\d+)\t(.*)$").expect("valid regex"))
}

fn match_line(line: &str, format: TraceFormat) -> Option<(String, String)> {
    let line = line.strip_suffix('\r').unwrap_or(line);
    let try_re = |re: &Regex| re.captures(line).map(|c| (c[1].to_string(), c[2].to_string()));
    match format {
        TraceFormat::Logcat => try_re(logcat_re()),
        TraceFormat::Bare => try_re(bare_re()),
        TraceFormat::Any => try_re(bare_re()).or_else(|| try_re(logcat_re())),
    }
}

impl ExecutionTrace {
    pub fn parse(text: &str, format: TraceFormat) -> ExecutionTrace {
        let mut trace = ExecutionTrace::default();
        for line in text.lines() {
            trace.push_line(line, format);
        }
        trace
    }

    /// Streams lines from a reader.
    pub fn read(reader: impl BufRead, format: TraceFormat) -> std::io::Result<ExecutionTrace> {
        let mut trace = ExecutionTrace::default();
        for line in reader.lines() {
            trace.push_line(&line?, format);
        }
        Ok(trace)
    }

    pub fn load(path: &Path, format: TraceFormat) -> Result<ExecutionTrace> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read(std::io::BufReader::new(file), format).map_err(|e| Error::io(path, e))
    }

    fn push_line(&mut self, line: &str, format: TraceFormat) {
        match match_line(line, format) {
            Some((tag, payload)) => self.records.push(TraceRecord {
                seq: self.records.len() + 1,
                tag,
                payload,
            }),
            None => self.ignored += 1,
        }
    }

    /// Concatenates traces in order, renumbering records.
    pub fn union(traces: impl IntoIterator<Item = ExecutionTrace>) -> ExecutionTrace {
        let mut out = ExecutionTrace::default();
        for t in traces {
            out.ignored += t.ignored;
            for r in t.records {
                out.records.push(TraceRecord {
                    seq: out.records.len() + 1,
                    ..r
                });
            }
        }
        out
    }

    /// Tags of the form `leak-<digits>`.
    pub fn executed_tags(&self) -> BTreeSet<String> {
        self.records
            .iter()
            .filter(|r| parse_tag(&r.tag).is_some())
            .map(|r| r.tag.clone())
            .collect()
    }

    pub fn executed_ids(&self) -> BTreeSet<u32> {
        self.records.iter().filter_map(|r| parse_tag(&r.tag)).collect()
    }

    fn first_seq(&self, tag: &str) -> Option<usize> {
        self.records.iter().find(|r| r.tag == tag).map(|r| r.seq)
    }
}

/// Mutant ids in order of first observation.
pub fn execution_order(trace: &ExecutionTrace) -> Vec<u32> {
    let mut seen = BTreeSet::new();
    trace
        .records
        .iter()
        .filter_map(|r| parse_tag(&r.tag))
        .filter(|id| seen.insert(*id))
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Partition {
    pub executable: BTreeSet<u32>,
    pub non_executable: BTreeSet<u32>,
    /// Observed tags naming no ledger mutant.
    pub unknown_tags: BTreeSet<String>,
}

/// Splits the ledger by observed sink tags. With `strict_pairs`, a split
/// (taint-pair) mutant also needs its `leak-src-<id>` marker observed before
/// its sink.
pub fn filter_executable(ledger: &MutantLedger, trace: &ExecutionTrace, strict_pairs: bool) -> Partition {
    let observed = trace.executed_ids();
    let mut out = Partition::default();
    for m in &ledger.mutants {
        let mut executed = observed.contains(&m.id);
        if executed && strict_pairs && m.category == Category::TaintPair {
            let source = trace.first_seq(&format!("leak-src-{}", m.id));
            let sink = trace.first_seq(&m.tag);
            executed = matches!((source, sink), (Some(s), Some(k)) if s < k);
        }
        if executed {
            out.executable.insert(m.id);
        } else {
            out.non_executable.insert(m.id);
        }
    }
    out.unknown_tags = trace
        .executed_tags()
        .into_iter()
        .filter(|t| parse_tag(t).is_some_and(|id| ledger.get(id).is_none()))
        .collect();
    out
}

/// One id per line.
pub fn render_ids(ids: &BTreeSet<u32>) -> String {
    ids.iter().map(|id| format!("{id}\n")).collect()
}

/// Reads an id list; blank lines and `#` comments are skipped.
pub fn parse_ids(text: &str) -> Result<BTreeSet<u32>> {
    let mut out = BTreeSet::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let id = line
            .strip_prefix("leak-")
            .unwrap_or(line)
            .parse::<u32>()
            .map_err(|_| Error::Config(format!("id list line {}: `{line}` is not an id", i + 1)))?;
        out.insert(id);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ledger::tests::sample;
    use proptest::prelude::*;

    #[test]
    fn logcat_and_bare_lines() {
        let t = ExecutionTrace::parse("--- start\nD/leak-1: x\n01-02 I/other: y\nD/leak-3( 123): y z\nleak-4\tq\n", TraceFormat::Any);
        let tags: Vec<_> = t.records.iter().map(|r| r.tag.as_str()).collect();
        assert_eq!(tags, vec!["leak-1", "leak-3", "leak-4"]);
        assert_eq!(t.records[1].payload, "y z");
        assert_eq!(t.ignored, 2);
        let only_logcat = ExecutionTrace::parse("D/leak-1: x\nleak-4\tq\n", TraceFormat::Logcat);
        assert_eq!(only_logcat.executed_ids(), BTreeSet::from([1]));
        let only_bare = ExecutionTrace::parse("D/leak-1: x\nleak-4\tq\n", TraceFormat::Bare);
        assert_eq!(only_bare.executed_ids(), BTreeSet::from([4]));
    }

    #[test]
    fn duplicates_keep_records_but_one_tag() {
        let t = ExecutionTrace::parse("D/leak-1: a\nD/leak-1: b\n", TraceFormat::Logcat);
        assert_eq!(t.records.len(), 2);
        assert_eq!(t.executed_tags().len(), 1);
        assert!(t.records[0].seq < t.records[1].seq);
        assert_eq!(ExecutionTrace::parse("", TraceFormat::Any), ExecutionTrace::default());
    }

    #[test]
    fn near_miss_tags_are_ignored() {
        let t = ExecutionTrace::parse("D/leak-: x\nD/leak-1x: y\nD/leaky-2: z\n", TraceFormat::Any);
        assert!(t.records.is_empty());
        assert_eq!(t.ignored, 3);
    }

    #[test]
    fn partition_of_four() {
        let ledger = sample(4);
        let t = ExecutionTrace::parse("D/leak-1: a\nD/leak-2: b\nD/leak-9: c\n", TraceFormat::Logcat);
        let p = filter_executable(&ledger, &t, false);
        assert_eq!(p.executable, BTreeSet::from([1, 2]));
        assert_eq!(p.non_executable, BTreeSet::from([3, 4]));
        assert_eq!(p.unknown_tags, BTreeSet::from(["leak-9".to_string()]));
        let none = filter_executable(&ledger, &ExecutionTrace::default(), false);
        assert!(none.executable.is_empty());
        assert_eq!(none.non_executable.len(), 4);
    }

    #[test]
    fn strict_pairs_need_source_before_sink() {
        let mut ledger = sample(3);
        for m in &mut ledger.mutants {
            m.category = Category::TaintPair;
        }
        let t = ExecutionTrace::parse(
            "D/leak-src-1: s\nD/leak-1: a\nD/leak-2: b\nD/leak-3: c\nD/leak-src-3: s\n",
            TraceFormat::Logcat,
        );
        assert_eq!(filter_executable(&ledger, &t, false).executable, BTreeSet::from([1, 2, 3]));
        assert_eq!(filter_executable(&ledger, &t, true).executable, BTreeSet::from([1]));
    }

    #[test]
    fn first_occurrence_order() {
        let t = ExecutionTrace::parse("D/leak-3: a\nD/leak-1: a\nD/leak-3: a\nD/leak-2: a\n", TraceFormat::Logcat);
        assert_eq!(execution_order(&t), vec![3, 1, 2]);
        assert!(execution_order(&ExecutionTrace::default()).is_empty());
    }

    #[test]
    fn id_lists_round_trip() {
        let ids = BTreeSet::from([1, 5, 9]);
        assert_eq!(parse_ids(&render_ids(&ids)).unwrap(), ids);
        assert_eq!(parse_ids("# c\nleak-2\n\n3\n").unwrap(), BTreeSet::from([2, 3]));
        assert!(parse_ids("x\n").is_err());
    }

    proptest! {
        #[test]
        fn partition_and_monotonicity(ids in proptest::collection::vec(1u32..40, 0..60), extra in proptest::collection::vec(1u32..40, 0..10)) {
            let ledger = sample(30);
            let text: String = ids.iter().map(|i| format!("D/leak-{i}: p\n")).collect();
            let more: String = extra.iter().map(|i| format!("leak-{i}\tp\n")).collect();
            let a = filter_executable(&ledger, &ExecutionTrace::parse(&text, TraceFormat::Any), false);
            let b = filter_executable(&ledger, &ExecutionTrace::parse(&format!("{text}{more}"), TraceFormat::Any), false);
            prop_assert!(a.executable.is_disjoint(&a.non_executable));
            prop_assert_eq!(a.executable.len() + a.non_executable.len(), ledger.len());
            prop_assert!(a.executable.is_subset(&b.executable));
        }
    }
}
