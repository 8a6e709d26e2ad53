//! Loading a corpus directory.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use super::{build_model, parse_unit, ClassificationTable, CodeModel, Diagnostic, UnitKind};
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct CorpusFile {
    /// Corpus-relative, `/`-separated.
    pub path: String,
    pub bytes: Vec<u8>,
}

#[derive(Debug, Clone)]
pub struct Corpus {
    pub root: PathBuf,
    /// Sorted by path.
    pub files: Vec<CorpusFile>,
}

impl Corpus {
    pub fn load(root: &Path) -> Result<Corpus> {
        if !root.is_dir() {
            return Err(Error::NotFound(format!("corpus directory {}", root.display())));
        }
        let mut files = Vec::new();
        for entry in walkdir::WalkDir::new(root).sort_by_file_name() {
            let entry = entry.map_err(|e| {
                let path = e.path().unwrap_or(root).to_path_buf();
                Error::io(&path, e.into())
            })?;
            if !entry.file_type().is_file() {
                continue;
            }
            let rel = entry
                .path()
                .strip_prefix(root)
                .expect("walkdir yields paths under root");
            let path = rel
                .components()
                .map(|c| c.as_os_str().to_string_lossy())
                .collect::<Vec<_>>()
                .join("/");
            let bytes = std::fs::read(entry.path()).map_err(|e| Error::io(entry.path(), e))?;
            files.push(CorpusFile { path, bytes });
        }
        files.sort_by(|a, b| a.path.cmp(&b.path));
        Ok(Corpus {
            root: root.to_path_buf(),
            files,
        })
    }

    pub fn from_files(files: impl IntoIterator<Item = (String, Vec<u8>)>) -> Corpus {
        let mut files: Vec<CorpusFile> = files
            .into_iter()
            .map(|(path, bytes)| CorpusFile { path, bytes })
            .collect();
        files.sort_by(|a, b| a.path.cmp(&b.path));
        Corpus {
            root: PathBuf::new(),
            files,
        }
    }

    /// SHA-256 over every (path, contents) pair in path order.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for f in &self.files {
            h.update((f.path.len() as u64).to_le_bytes());
            h.update(f.path.as_bytes());
            h.update((f.bytes.len() as u64).to_le_bytes());
            h.update(&f.bytes);
        }
        hex::encode(h.finalize())
    }

    /// Parses every Java and XML file in parallel and builds the model.
    /// Files that fail to parse are recorded in `CodeModel::skipped`.
    pub fn model(&self, table: &ClassificationTable) -> CodeModel {
        let parsed: Vec<_> = self
            .files
            .par_iter()
            .filter_map(|f| {
                let kind = UnitKind::from_path(&f.path)?;
                let result = match std::str::from_utf8(&f.bytes) {
                    Ok(text) => parse_unit(&f.path, text, kind),
                    Err(e) => Err(Diagnostic {
                        path: f.path.clone(),
                        line: 1,
                        column: 1,
                        message: format!("not valid UTF-8: {e}"),
                    }),
                };
                Some(result)
            })
            .collect();
        let mut units = Vec::new();
        let mut skipped = Vec::new();
        for r in parsed {
            match r {
                Ok(u) => units.push(u),
                Err(d) => skipped.push(d),
            }
        }
        let mut model = build_model(units, table);
        model.skipped = skipped;
        model
    }
}
