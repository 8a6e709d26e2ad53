use std::fmt;

use super::java::{parse_java, JavaFile};
use super::xml::{parse_xml, XmlInfo};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum UnitKind {
    Java,
    XmlLayout,
    XmlManifest,
}

impl UnitKind {
    /// Kind implied by a corpus-relative path, if the file is one we parse.
    pub fn from_path(path: &str) -> Option<UnitKind> {
        let file = path.rsplit('/').next().unwrap_or(path);
        if file.ends_with(".java") {
            Some(UnitKind::Java)
        } else if file == "AndroidManifest.xml" {
            Some(UnitKind::XmlManifest)
        } else if file.ends_with(".xml") {
            Some(UnitKind::XmlLayout)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone)]
pub enum Syntax {
    Java(JavaFile),
    Xml(XmlInfo),
}

/// One parsed file. `text` is kept byte-exact.
#[derive(Debug, Clone)]
pub struct SourceUnit {
    pub path: String,
    pub kind: UnitKind,
    pub text: String,
    pub line_index: Vec<usize>,
    pub syntax: Syntax,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub path: String,
    pub line: u32,
    pub column: u32,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}: {}", self.path, self.line, self.column, self.message)
    }
}

pub fn line_index(text: &str) -> Vec<usize> {
    std::iter::once(0)
        .chain(text.match_indices('\n').map(|(i, _)| i + 1))
        .collect()
}

/// 1-based (line, column) of a byte offset. Columns count bytes.
pub fn line_col(index: &[usize], offset: usize) -> (u32, u32) {
    let line = index.partition_point(|&start| start <= offset).max(1);
    let col = offset - index[line - 1] + 1;
    (line as u32, col as u32)
}

pub fn parse_unit(path: &str, text: &str, kind: UnitKind) -> Result<SourceUnit, Diagnostic> {
    let line_index = line_index(text);
    let at = |offset: usize, message: String| {
        let (line, column) = line_col(&line_index, offset);
        Diagnostic {
            path: path.to_string(),
            line,
            column,
            message,
        }
    };
    let syntax = match kind {
        UnitKind::Java => Syntax::Java(parse_java(text).map_err(|e| at(e.offset, e.message))?),
        UnitKind::XmlLayout | UnitKind::XmlManifest => {
            Syntax::Xml(parse_xml(text).map_err(|e| at(e.offset, e.message))?)
        }
    };
    Ok(SourceUnit {
        path: path.to_string(),
        kind,
        text: text.to_string(),
        line_index,
        syntax,
    })
}

impl SourceUnit {
    pub fn line_col(&self, offset: usize) -> (u32, u32) {
        line_col(&self.line_index, offset)
    }

    /// The unit's bytes. Unmodified units render to exactly their input.
    pub fn render(&self) -> &str {
        &self.text
    }

    pub fn java(&self) -> Option<&JavaFile> {
        match &self.syntax {
            Syntax::Java(j) => Some(j),
            Syntax::Xml(_) => None,
        }
    }

    pub fn xml(&self) -> Option<&XmlInfo> {
        match &self.syntax {
            Syntax::Xml(x) => Some(x),
            Syntax::Java(_) => None,
        }
    }

    /// File stem, e.g. `activity_main` for `res/layout/activity_main.xml`.
    pub fn stem(&self) -> &str {
        let file = self.path.rsplit('/').next().unwrap_or(&self.path);
        file.split('.').next().unwrap_or(file)
    }
}
