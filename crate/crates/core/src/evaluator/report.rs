//! Tool detection reports.
//!
//! One detection per line, either `id=<mutant-id>` or
//! `file=<path> line=<n> src=<signature> sink=<signature>`. A `# tool <name>`
//! line names the tool; other `#` lines are comments.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::OnceLock;

use regex::Regex;

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Detection {
    Id(u32),
    Flow {
        file: String,
        line: u32,
        source_api: String,
        sink_api: String,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ToolReport {
    pub tool: String,
    pub detections: Vec<Detection>,
}

fn flow_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"^file=(\S+)\s+line=(\d+)\s+src=(<[^>]*>)\s+sink=(<[^>]*>)$").expect("valid regex")
    })
}

impl ToolReport {
    pub fn new(tool: impl Into<String>) -> Self {
        ToolReport {
            tool: tool.into(),
            detections: Vec::new(),
        }
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# tool {}", self.tool);
        for d in &self.detections {
            match d {
                Detection::Id(id) => {
                    let _ = writeln!(out, "id={id}");
                }
                Detection::Flow {
                    file,
                    line,
                    source_api,
                    sink_api,
                } => {
                    let _ = writeln!(out, "file={file} line={line} src={source_api} sink={sink_api}");
                }
            }
        }
        out
    }

    pub fn parse(text: &str) -> Result<ToolReport> {
        let mut report = ToolReport::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(comment) = line.strip_prefix('#') {
                if let Some(name) = comment.trim().strip_prefix("tool ") {
                    report.tool = name.trim().to_string();
                }
                continue;
            }
            let bad = || Error::Config(format!("report line {}: cannot parse `{line}`", i + 1));
            if let Some(id) = line.strip_prefix("id=") {
                report.detections.push(Detection::Id(id.trim().parse().map_err(|_| bad())?));
                continue;
            }
            let c = flow_re().captures(line).ok_or_else(bad)?;
            report.detections.push(Detection::Flow {
                file: c[1].to_string(),
                line: c[2].parse().map_err(|_| bad())?,
                source_api: c[3].to_string(),
                sink_api: c[4].to_string(),
            });
        }
        Ok(report)
    }

    pub fn load(path: &Path) -> Result<ToolReport> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let r = ToolReport {
            tool: "toy".into(),
            detections: vec![
                Detection::Id(3),
                Detection::Flow {
                    file: "src/A.java".into(),
                    line: 12,
                    source_api: "<a.B: java.lang.String f()>".into(),
                    sink_api: "<android.util.Log: int d(java.lang.String,java.lang.String)>".into(),
                },
            ],
        };
        assert_eq!(ToolReport::parse(&r.render()).unwrap(), r);
    }

    #[test]
    fn malformed_lines_are_errors() {
        assert!(ToolReport::parse("id=x").is_err());
        assert!(ToolReport::parse("file=a line=1").is_err());
        assert_eq!(ToolReport::parse("# just a comment\n\n").unwrap().detections.len(), 0);
    }
}
