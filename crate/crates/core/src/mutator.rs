//! Seeds every injection point of a set of MIPs into one mutated copy of the
//! corpus and records each mutant in the ledger.
//!
//! All edits are insertions at offsets of the original text, so anchors never
//! shift while edits are collected; final positions are computed once per
//! file when the edits are applied.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write as _;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::ledger::{tag_for, Mutant, MutantLedger, LEDGER_FILE};
use crate::model::unit::{line_col, line_index};
use crate::model::{parse_unit, ClassDecl, CodeModel, Corpus};
use crate::operators::{complex_path_output, complex_path_rule, Instantiator, OperatorInstance, SecurityOperator};
use crate::schemes::{Category, InjectionPoint, Mip, SynthPlan};
use crate::{Error, Result};

/// Lists the files written by the previous run into an output directory.
pub const FILE_LIST: &str = ".leakmut-files";

const STEP: &str = "    ";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MutateConfig {
    /// Log a `leak-src-<id>` marker next to split sources.
    pub strict_pairs: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MutatedTree {
    /// Text of every parsed unit, by corpus-relative path.
    pub units: BTreeMap<String, String>,
    pub modified: BTreeSet<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum MarkKind {
    Source,
    Sink,
}

#[derive(Debug, Clone)]
struct Piece {
    offset: usize,
    seq: (u32, u8),
    text: String,
    /// (mutant id, kind, byte offset within `text`)
    marks: Vec<(u32, MarkKind, usize)>,
}

/// Accumulates `\n<indent><stmt>` lines and remembers where marked
/// statements start.
#[derive(Default)]
struct Lines {
    text: String,
    marks: Vec<(u32, MarkKind, usize)>,
}

impl Lines {
    fn push(&mut self, indent: &str, stmt: &str) {
        self.text.push('\n');
        self.text.push_str(indent);
        self.text.push_str(stmt);
    }

    fn mark(&mut self, id: u32, kind: MarkKind, indent: &str, stmt: &str) {
        let at = self.text.len() + 1 + indent.len();
        self.push(indent, stmt);
        self.marks.push((id, kind, at));
    }

    fn raw(&mut self, s: &str) {
        self.text.push_str(s);
    }

    fn piece(self, offset: usize, seq: (u32, u8)) -> Piece {
        Piece {
            offset,
            seq,
            text: self.text,
            marks: self.marks,
        }
    }
}

/// Generated code wrapping the operator statements of a synthesized point.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scaffold {
    pub unit: usize,
    pub offset: usize,
    pub head: String,
    /// Indentation of the operator statements.
    pub indent: String,
    pub tail: String,
}

fn line_indent(text: &str, offset: usize) -> String {
    let start = text[..offset].rfind('\n').map_or(0, |i| i + 1);
    text[start..]
        .chars()
        .take_while(|c| *c == ' ' || *c == '\t')
        .collect()
}

fn class_indent(model: &CodeModel, class: &ClassDecl) -> String {
    line_indent(&model.units[class.unit].text, class.start)
}

/// Builds the code a synthesis plan asks for. `id` names the generated
/// variables.
pub fn synthesize_scaffold(model: &CodeModel, plan: &SynthPlan, id: u32) -> Result<Scaffold> {
    let fail = |message: String| Error::Synthesis {
        plan: format!("{plan:?}"),
        message,
    };
    match plan {
        SynthPlan::NestedReceiver { host, levels } => {
            let host = model
                .methods
                .get(host.0)
                .ok_or_else(|| fail("enclosing method not found".into()))?;
            let ctx = host
                .params
                .first()
                .ok_or_else(|| fail(format!("{} has no Context parameter", host.name)))?;
            if *levels == 0 {
                return Err(fail("nesting depth must be at least one".into()));
            }
            let mut head = String::new();
            let mut tail = String::new();
            let mut indent = format!("{}{STEP}", host.indent);
            let mut context = ctx.name.clone();
            for level in 1..=*levels {
                let suffix = if level == 1 { id.to_string() } else { format!("{id}_{level}") };
                let (r, f, c, i) = (
                    format!("receiver{suffix}"),
                    format!("filter{suffix}"),
                    format!("context{suffix}"),
                    format!("intent{suffix}"),
                );
                head.push_str(&format!(
                    "\n{indent}android.content.BroadcastReceiver {r} = new android.content.BroadcastReceiver() {{\
                     \n{indent}{STEP}@Override\
                     \n{indent}{STEP}public void onReceive(android.content.Context {c}, android.content.Intent {i}) {{"
                ));
                let close = format!(
                    "\n{indent}{STEP}}}\
                     \n{indent}}};\
                     \n{indent}android.content.IntentFilter {f} = new android.content.IntentFilter();\
                     \n{indent}{f}.addAction(\"android.intent.action.SEND\");\
                     \n{indent}{context}.registerReceiver({r}, {f});"
                );
                tail.insert_str(0, &close);
                indent = format!("{indent}{STEP}{STEP}");
                context = c;
            }
            Ok(Scaffold {
                unit: host.unit,
                offset: host.body_entry.offset,
                head,
                indent,
                tail,
            })
        }
        SynthPlan::XmlHandler { class, method } => {
            let decl = model
                .classes
                .get(class.0)
                .ok_or_else(|| fail("target class not found".into()))?;
            if decl.methods.iter().any(|&m| {
                let md = model.method(m);
                md.name == *method && md.arity() == 1
            }) {
                return Err(fail(format!("{method} already exists")));
            }
            let text = &model.units[decl.unit].text;
            let outer = class_indent(model, decl);
            let member = format!("{outer}{STEP}");
            let close = decl.body.end;
            let line_start = text[..close].rfind('\n').map_or(0, |i| i + 1);
            let own_line = text[line_start..close].chars().all(char::is_whitespace);
            let decl_line = format!("{member}public void {method}(android.view.View v) {{");
            let (offset, head, tail) = if own_line {
                (line_start, decl_line, format!("\n{member}}}\n"))
            } else {
                (close, format!("\n{decl_line}"), format!("\n{member}}}\n{outer}"))
            };
            Ok(Scaffold {
                unit: decl.unit,
                offset,
                head,
                indent: format!("{member}{STEP}"),
                tail,
            })
        }
    }
}

fn require_shape<'a>(inst: &'a OperatorInstance, p: &InjectionPoint) -> Result<&'a crate::operators::SourceShape> {
    inst.shape.as_ref().ok_or_else(|| Error::Injection {
        point: p.point_id.to_string(),
        message: format!("{} needs a data-leak operator", p.category),
    })
}

fn body_indent(model: &CodeModel, p: &InjectionPoint) -> String {
    match p.source_method {
        Some(m) => format!("{}{STEP}", model.method(m).indent),
        None => STEP.to_string(),
    }
}

/// Deterministic id for a mutation run over a given corpus and configuration.
pub fn run_id(corpus_sha256: &str, op: &SecurityOperator, mips: &[Mip], config: &MutateConfig) -> String {
    let mut h = Sha256::new();
    h.update(b"leakmut-run\0");
    h.update(corpus_sha256.as_bytes());
    h.update(b"\0");
    h.update(op.operator_id.as_bytes());
    for m in mips {
        h.update(b"\0");
        h.update(m.scheme.as_str().as_bytes());
        h.update((m.points.len() as u64).to_le_bytes());
    }
    h.update([config.strict_pairs as u8]);
    hex::encode(&h.finalize()[..8])
}

/// Applies every point of every MIP. Nothing is written; see [`write_output`].
pub fn inject_all(
    model: &CodeModel,
    mips: &[Mip],
    op: &SecurityOperator,
    corpus_sha256: &str,
    config: &MutateConfig,
) -> Result<(MutatedTree, MutantLedger)> {
    let mut pieces: BTreeMap<usize, Vec<Piece>> = BTreeMap::new();
    let mut records: Vec<(Mutant, usize)> = Vec::new();
    let mut inst = Instantiator::new();
    let mut next = 1u32;
    for mip in mips {
        if mip.operator_id != op.operator_id {
            return Err(Error::Injection {
                point: format!("{} MIP", mip.scheme),
                message: format!("derived for operator {}, not {}", mip.operator_id, op.operator_id),
            });
        }
        for p in &mip.points {
            let id = next;
            next += 1;
            let o = inst.instantiate(op, id)?;
            let (unit, new) = place(model, p, &o, config)?;
            let text = &model.units[unit].text;
            for piece in &new {
                if piece.offset > text.len() || !text.is_char_boundary(piece.offset) {
                    return Err(Error::Injection {
                        point: p.point_id.to_string(),
                        message: format!("anchor offset {} is not a valid position in {}", piece.offset, model.units[unit].path),
                    });
                }
            }
            pieces.entry(unit).or_default().extend(new);
            records.push((
                Mutant {
                    id,
                    scheme: mip.scheme,
                    category: p.category,
                    operator_id: op.operator_id.clone(),
                    file: model.units[unit].path.clone(),
                    source_line: 0,
                    sink_line: 0,
                    source_api: op.source_api.clone(),
                    sink_api: op.sink_api.clone(),
                    tag: tag_for(id),
                },
                unit,
            ));
        }
    }

    let mut lines: BTreeMap<(u32, u8), u32> = BTreeMap::new();
    let mut tree = MutatedTree::default();
    for (ui, unit) in model.units.iter().enumerate() {
        let Some(mut edits) = pieces.remove(&ui) else {
            tree.units.insert(unit.path.clone(), unit.text.clone());
            continue;
        };
        if let Some(file) = unit.java() {
            let missing: Vec<&String> = op
                .required_imports
                .iter()
                .filter(|i| !file.imports.contains(i))
                .collect();
            if !missing.is_empty() {
                let mut text = String::new();
                for imp in missing {
                    if file.import_anchor == 0 {
                        text.push_str(&format!("import {imp};\n"));
                    } else {
                        text.push_str(&format!("\nimport {imp};"));
                    }
                }
                edits.push(Piece {
                    offset: file.import_anchor,
                    seq: (0, 0),
                    text,
                    marks: Vec::new(),
                });
            }
        }
        edits.sort_by_key(|p| (p.offset, p.seq));
        let extra: usize = edits.iter().map(|p| p.text.len()).sum();
        let mut out = String::with_capacity(unit.text.len() + extra);
        let mut cursor = 0;
        let mut marks = Vec::new();
        for e in &edits {
            out.push_str(&unit.text[cursor..e.offset]);
            cursor = e.offset;
            for &(id, kind, at) in &e.marks {
                marks.push((id, kind, out.len() + at));
            }
            out.push_str(&e.text);
        }
        out.push_str(&unit.text[cursor..]);
        let index = line_index(&out);
        for (id, kind, at) in marks {
            lines.insert((id, kind as u8), line_col(&index, at).0);
        }
        if let Err(d) = parse_unit(&unit.path, &out, unit.kind) {
            let first = edits.iter().map(|e| e.seq.0).find(|&id| id > 0).unwrap_or(0);
            return Err(Error::Injection {
                point: format!("mutant {first}"),
                message: format!("mutated unit no longer parses: {d}"),
            });
        }
        tree.modified.insert(unit.path.clone());
        tree.units.insert(unit.path.clone(), out);
    }

    let mutants = records
        .into_iter()
        .map(|(mut m, _)| {
            m.source_line = lines[&(m.id, MarkKind::Source as u8)];
            m.sink_line = lines[&(m.id, MarkKind::Sink as u8)];
            m
        })
        .collect();
    let ledger = MutantLedger {
        run_id: run_id(corpus_sha256, op, mips, config),
        corpus_sha256: corpus_sha256.to_string(),
        mutants,
    };
    ledger.check()?;
    Ok((tree, ledger))
}

/// Edits for one injection point; returns the unit they apply to.
fn place(model: &CodeModel, p: &InjectionPoint, o: &OperatorInstance, config: &MutateConfig) -> Result<(usize, Vec<Piece>)> {
    let id = o.id;
    if let Some(plan) = &p.synth_plan {
        let s = synthesize_scaffold(model, plan, id)?;
        let mut l = Lines::default();
        l.raw(&s.head);
        l.mark(id, MarkKind::Source, &s.indent, &o.source_stmt);
        l.mark(id, MarkKind::Sink, &s.indent, &o.sink_stmt);
        l.raw(&s.tail);
        return Ok((s.unit, vec![l.piece(s.offset, (id, 0))]));
    }
    let unit = p.source_anchor.unit;
    let indent = body_indent(model, p);
    match p.category {
        Category::TaintPair => {
            let shape = require_shape(o, p)?;
            let (Some(src), Some(sink)) = (p.source_method, p.sink_method) else {
                return Err(Error::Injection {
                    point: p.point_id.to_string(),
                    message: "taint pair without methods".into(),
                });
            };
            let class = model.class(model.method(src).owner);
            if model.method(sink).owner != class.id {
                return Err(Error::Injection {
                    point: p.point_id.to_string(),
                    message: "taint pair spans two classes".into(),
                });
            }
            let mut field = Lines::default();
            field.push(&format!("{}{STEP}", class_indent(model, class)), &o.field_decl().expect("shape present"));
            let mut source = Lines::default();
            source.mark(id, MarkKind::Source, &indent, &o.source_assignment().expect("shape present"));
            if config.strict_pairs {
                source.push(&indent, &o.source_marker());
            }
            let sink_indent = format!("{}{STEP}", model.method(sink).indent);
            let mut sink_lines = Lines::default();
            sink_lines.mark(id, MarkKind::Sink, &sink_indent, &o.sink_for(&shape.var));
            Ok((
                unit,
                vec![
                    field.piece(class.body.start + 1, (id, 0)),
                    source.piece(p.source_anchor.offset, (id, 1)),
                    sink_lines.piece(p.sink_anchor.offset, (id, 2)),
                ],
            ))
        }
        Category::ComplexPath => {
            let shape = require_shape(o, p)?;
            let mut l = Lines::default();
            l.mark(id, MarkKind::Source, &indent, &o.source_stmt);
            l.push(&indent, &complex_path_rule(&shape.var, id));
            l.mark(id, MarkKind::Sink, &indent, &o.sink_for(&complex_path_output(&shape.var)));
            Ok((unit, vec![l.piece(p.source_anchor.offset, (id, 0))]))
        }
        _ => {
            let mut l = Lines::default();
            l.mark(id, MarkKind::Source, &indent, &o.source_stmt);
            l.mark(id, MarkKind::Sink, &indent, &o.sink_stmt);
            Ok((unit, vec![l.piece(p.source_anchor.offset, (id, 0))]))
        }
    }
}

/// Closest existing ancestor, canonicalized, with the rest re-appended.
fn resolve_path(path: &Path) -> Result<PathBuf> {
    let abs = std::path::absolute(path).map_err(|e| Error::io(path, e))?;
    let mut existing = abs.as_path();
    let mut rest = Vec::new();
    while !existing.exists() {
        match (existing.parent(), existing.file_name()) {
            (Some(parent), Some(name)) => {
                rest.push(name.to_os_string());
                existing = parent;
            }
            _ => break,
        }
    }
    let mut out = existing.canonicalize().map_err(|e| Error::io(existing, e))?;
    out.extend(rest.iter().rev());
    Ok(out)
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let parent = path.parent().unwrap_or(Path::new("."));
    std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(parent).map_err(|e| Error::io(parent, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

/// Errors when `out_dir` and the corpus root contain one another.
pub fn check_output_dir(corpus: &Corpus, out_dir: &Path) -> Result<()> {
    if corpus.root.as_os_str().is_empty() {
        return Ok(());
    }
    let out = resolve_path(out_dir)?;
    let root = resolve_path(&corpus.root)?;
    if out.starts_with(&root) || root.starts_with(&out) {
        return Err(Error::Config(format!(
            "output directory {} overlaps the corpus {}",
            out_dir.display(),
            corpus.root.display()
        )));
    }
    Ok(())
}

/// Writes the mutated corpus (all files, mirrored) and the ledger into
/// `out_dir`. Files recorded by a previous run and not rewritten now are
/// removed.
pub fn write_output(corpus: &Corpus, tree: &MutatedTree, ledger: &MutantLedger, out_dir: &Path) -> Result<Vec<PathBuf>> {
    check_output_dir(corpus, out_dir)?;
    let out = resolve_path(out_dir)?;
    let mut files: Vec<(String, &[u8])> = Vec::new();
    for f in &corpus.files {
        if f.path == LEDGER_FILE || f.path == FILE_LIST {
            return Err(Error::Config(format!("corpus file {} collides with an output file", f.path)));
        }
        let bytes = tree.units.get(&f.path).map_or(f.bytes.as_slice(), |t| t.as_bytes());
        files.push((f.path.clone(), bytes));
    }
    let ledger_text = ledger.render();
    files.push((LEDGER_FILE.to_string(), ledger_text.as_bytes()));

    std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    let list_path = out.join(FILE_LIST);
    let previous: Vec<String> = match std::fs::read_to_string(&list_path) {
        Ok(text) => text.lines().map(String::from).collect(),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Vec::new(),
        Err(e) => return Err(Error::io(&list_path, e)),
    };
    let mut written = Vec::new();
    for (rel, bytes) in &files {
        let path = out.join(rel);
        write_atomic(&path, bytes)?;
        written.push(path);
    }
    let current: BTreeSet<&str> = files.iter().map(|(p, _)| p.as_str()).collect();
    for stale in previous.iter().filter(|p| !current.contains(p.as_str())) {
        if stale.split('/').any(|c| c == ".." || c.is_empty()) {
            continue;
        }
        let path = out.join(stale);
        if path.is_file() {
            std::fs::remove_file(&path).map_err(|e| Error::io(&path, e))?;
        }
    }
    let list: String = current.iter().map(|p| format!("{p}\n")).collect();
    write_atomic(&list_path, list.as_bytes())?;
    Ok(written)
}
