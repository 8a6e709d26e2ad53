//! Minimal reproducing examples: a single activity source file (plus a
//! layout when the chain goes through an `android:onClick` handler) that
//! recreates only a survivor's call chain, with the leak at its end.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use regex::Regex;

use super::report::{Detection, ToolReport};
use super::CallChain;
use crate::ledger::Mutant;
use crate::model::{model_from_sources, CallbackKind, ClassKind, CodeModel, EdgeKind, MethodDecl, MethodId, RegistrationKind};
use crate::operators::{complex_path_output, complex_path_rule, SecurityOperator};
use crate::schemes::Category;
use crate::{Error, Result};

pub const PACKAGE: &str = "leakmut.minimal";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MinimalExample {
    pub mutant_id: u32,
    /// Method labels, entry point first.
    pub chain: Vec<String>,
    pub path: String,
    pub source: String,
    /// Layout unit (path, text), when needed.
    pub layout: Option<(String, String)>,
    pub sink_line: u32,
    pub sink_api: String,
}

impl MinimalExample {
    pub fn units(&self) -> Vec<(&str, &str)> {
        let mut out = vec![(self.path.as_str(), self.source.as_str())];
        if let Some((p, t)) = &self.layout {
            out.push((p.as_str(), t.as_str()));
        }
        out
    }

    /// Writes the example's units below `dir`, returning the written paths.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        let mut written = Vec::new();
        for (rel, text) in self.units() {
            let path = dir.join(rel);
            if let Some(parent) = path.parent() {
                std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
            }
            std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
            written.push(path);
        }
        Ok(written)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    FlawConfirmed,
    DetectedRefineOrDiscard,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::FlawConfirmed => "flaw-confirmed",
            Verdict::DetectedRefineOrDiscard => "detected-refine-or-discard",
        }
    }
}

/// Flaw confirmed unless the report flags the example's leak.
pub fn validate_minimal(example: &MinimalExample, report: &ToolReport) -> Verdict {
    let hit = report.detections.iter().any(|d| match d {
        Detection::Id(id) => *id == example.mutant_id,
        Detection::Flow { file, line, sink_api, .. } => {
            *file == example.path && (*line == example.sink_line || *sink_api == example.sink_api)
        }
    });
    if hit {
        Verdict::DetectedRefineOrDiscard
    } else {
        Verdict::FlawConfirmed
    }
}

const STEP: &str = "    ";

fn indent(lines: Vec<String>) -> Vec<String> {
    lines
        .into_iter()
        .map(|l| if l.is_empty() { l } else { format!("{STEP}{l}") })
        .collect()
}

fn block(header: &str, body: Vec<String>) -> Vec<String> {
    let mut out = vec![format!("{header} {{")];
    out.extend(indent(body));
    out.push("}".into());
    out
}

/// The class that generated statements live in.
struct Holder {
    /// Expression for the activity context, when one is available.
    ctx: Option<String>,
    is_activity: bool,
    members: Vec<Vec<String>>,
}

struct Gen<'a> {
    model: &'a CodeModel,
    chain: &'a CallChain,
    mutant: &'a Mutant,
    op: &'a SecurityOperator,
    activity: String,
    imports: BTreeSet<String>,
    layout_handler: Option<String>,
    static_classes: Vec<Vec<String>>,
}

fn header_of(model: &CodeModel, m: &MethodDecl) -> String {
    let text = &model.units[m.unit].text[m.start..m.body.start];
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// `m` re-declared with a new body. A `super.<name>(..)` call in the
/// original is kept, since the framework enforces it for lifecycle methods.
fn copied_method(model: &CodeModel, m: &MethodDecl, body: Vec<String>) -> Vec<String> {
    let text = &model.units[m.unit].text[m.body.clone()];
    let mut lines = Vec::new();
    if text.contains(&format!("super.{}(", m.name)) {
        let args: Vec<&str> = m.params.iter().map(|p| p.name.as_str()).collect();
        lines.push(format!("super.{}({});", m.name, args.join(", ")));
    }
    lines.extend(body);
    block(&header_of(model, m), lines)
}

impl Gen<'_> {
    fn method(&self, id: MethodId) -> &MethodDecl {
        self.model.method(id)
    }

    fn unsupported(&self, what: String) -> Error {
        Error::Unsupported(format!("{what} (mutant leak-{})", self.mutant.id))
    }

    fn note_imports(&mut self, m: MethodId) {
        if let Some(java) = self.model.units[self.method(m).unit].java() {
            for imp in &java.imports {
                let last = imp.rsplit('.').next().unwrap_or("");
                if last == "*" || last.starts_with(|c: char| c.is_ascii_uppercase()) {
                    self.imports.insert(imp.clone());
                }
            }
        }
    }

    fn leaf(&mut self, holder: &mut Holder) -> Result<Vec<String>> {
        let inst = self.op.render(self.mutant.id);
        let lines_of = |s: &str| s.lines().map(|l| l.trim_end().to_string()).collect::<Vec<_>>();
        match self.mutant.category {
            Category::TaintPair => {
                let shape = inst
                    .shape
                    .as_ref()
                    .ok_or_else(|| self.unsupported("taint pair without a split source".into()))?;
                let sink_method = *self.chain.methods.last().expect("non-empty chain");
                let source_method = self
                    .model
                    .method_at_line(&self.mutant.file, self.mutant.source_line)
                    .ok_or_else(|| self.unsupported("taint-pair source outside any method".into()))?;
                holder.members.insert(0, vec![inst.field_decl().expect("shape present")]);
                let assignment = inst.source_assignment().expect("shape present");
                if source_method == sink_method {
                    return Ok(vec![assignment, inst.sink_for(&shape.var)]);
                }
                self.note_imports(source_method);
                let copy = copied_method(self.model, self.method(source_method), vec![assignment]);
                holder.members.insert(1, copy);
                Ok(vec![inst.sink_for(&shape.var)])
            }
            Category::ComplexPath => {
                let shape = inst
                    .shape
                    .as_ref()
                    .ok_or_else(|| self.unsupported("complex path without a split source".into()))?;
                let mut out = lines_of(&inst.source_stmt);
                out.push(complex_path_rule(&shape.var, self.mutant.id));
                out.push(inst.sink_for(&complex_path_output(&shape.var)));
                Ok(out)
            }
            _ => {
                let mut out = lines_of(&inst.source_stmt);
                out.extend(lines_of(&inst.sink_stmt));
                Ok(out)
            }
        }
    }

    /// Body of chain step `i`, placed in `holder`.
    fn step(&mut self, i: usize, holder: &mut Holder) -> Result<Vec<String>> {
        let last = self.chain.methods.len() - 1;
        if i == last {
            return self.leaf(holder);
        }
        let (model, chain) = (self.model, self.chain);
        let edge = &chain.edges[i];
        let next = chain.methods[i + 1];
        let callee = model.method(next);
        self.note_imports(next);
        match edge.kind {
            EdgeKind::Call => {
                if callee.is_constructor {
                    return Err(self.unsupported(format!("constructor call to {}", self.model.method_label(next))));
                }
                let name = callee.name.clone();
                let body = self.step(i + 1, holder)?;
                holder.members.push(block(&format!("private void {name}()"), body));
                Ok(vec![format!("{name}();")])
            }
            EdgeKind::Registration(RegistrationKind::XmlOnclick) => {
                if !holder.is_activity {
                    return Err(self.unsupported("layout handler reached outside the activity".into()));
                }
                let handler = callee.name.clone();
                let body = self.step(i + 1, holder)?;
                holder.members.push(copied_method(model, callee, body));
                self.layout_handler = Some(handler);
                Ok(vec![format!("setContentView(R.layout.minimal_{});", self.mutant.id)])
            }
            EdgeKind::Registration(kind) => {
                let ty = match kind {
                    RegistrationKind::ImplicitCall => "java.lang.Runnable".to_string(),
                    _ => callee
                        .callback_owner
                        .clone()
                        .ok_or_else(|| self.unsupported(format!("registration of non-callback {}", self.model.method_label(next))))?,
                };
                let mut inner = Holder {
                    ctx: holder.ctx.as_ref().map(|c| if c == "this" { format!("Minimal{}Activity.this", self.mutant.id) } else { c.clone() }),
                    is_activity: false,
                    members: Vec::new(),
                };
                let body = self.step(i + 1, &mut inner)?;
                let mut obj = vec![format!("new {ty}() {{")];
                let mut members = inner.members;
                members.push(copied_method(model, callee, body));
                for (k, m) in members.into_iter().enumerate() {
                    if k > 0 {
                        obj.push(String::new());
                    }
                    obj.extend(indent(m));
                }
                obj.push("}".into());
                let call = self
                    .model
                    .registrations
                    .iter()
                    .find(|r| r.registrar == edge.from && r.call_offset == edge.offset)
                    .map(|r| r.call.clone())
                    .unwrap_or_else(|| default_call(kind).to_string());
                self.registration(&call, kind, obj, holder.ctx.as_deref(), i)
            }
        }
    }

    fn registration(&self, call: &str, kind: RegistrationKind, obj: Vec<String>, ctx: Option<&str>, level: usize) -> Result<Vec<String>> {
        let need_ctx = || ctx.ok_or_else(|| self.unsupported(format!("`{call}` needs an activity context")));
        let dot = |c: &str| if c == "this" { String::new() } else { format!("{c}.") };
        let (prelude, prefix, suffix): (Vec<String>, String, String) = match (kind, call) {
            (RegistrationKind::DynamicReceiver, _) => {
                let c = need_ctx()?;
                let filter = format!("filter{level}");
                (
                    vec![
                        format!("android.content.IntentFilter {filter} = new android.content.IntentFilter();"),
                        format!("{filter}.addAction(\"android.intent.action.SEND\");"),
                    ],
                    format!("{}{call}(", dot(c)),
                    format!(", {filter});"),
                )
            }
            (RegistrationKind::ImplicitCall, "runOnUiThread") => (Vec::new(), format!("{}runOnUiThread(", dot(need_ctx()?)), ");".into()),
            (RegistrationKind::ImplicitCall, "submit" | "execute") => (
                Vec::new(),
                format!("java.util.concurrent.Executors.newSingleThreadExecutor().{call}("),
                ");".into(),
            ),
            (RegistrationKind::ImplicitCall, "post") => (
                Vec::new(),
                "new android.os.Handler(android.os.Looper.getMainLooper()).post(".into(),
                ");".into(),
            ),
            (RegistrationKind::ImplicitCall, "postDelayed") => (
                Vec::new(),
                "new android.os.Handler(android.os.Looper.getMainLooper()).postDelayed(".into(),
                ", 0L);".into(),
            ),
            (_, "setPositiveButton" | "setNegativeButton" | "setNeutralButton") => (
                Vec::new(),
                format!("new android.app.AlertDialog.Builder({}).{call}(\"OK\", ", need_ctx()?),
                ").show();".into(),
            ),
            (_, "addTextChangedListener") => (
                Vec::new(),
                format!("new android.widget.EditText({}).addTextChangedListener(", need_ctx()?),
                ");".into(),
            ),
            (_, "setNavigationItemSelectedListener") => (
                Vec::new(),
                format!(
                    "new android.support.design.widget.NavigationView({}).setNavigationItemSelectedListener(",
                    need_ctx()?
                ),
                ");".into(),
            ),
            (_, "requestLocationUpdates") => {
                let c = need_ctx()?;
                (
                    vec![format!(
                        "android.location.LocationManager locationManager{level} = (android.location.LocationManager) {}getSystemService(android.content.Context.LOCATION_SERVICE);",
                        dot(c)
                    )],
                    format!("locationManager{level}.requestLocationUpdates(\"gps\", 0L, 0f, "),
                    ");".into(),
                )
            }
            (_, "listen") => {
                let c = need_ctx()?;
                (
                    vec![format!(
                        "android.telephony.TelephonyManager telephonyManager{level} = (android.telephony.TelephonyManager) {}getSystemService(android.content.Context.TELEPHONY_SERVICE);",
                        dot(c)
                    )],
                    format!("telephonyManager{level}.listen("),
                    ", android.telephony.PhoneStateListener.LISTEN_DATA_CONNECTION_STATE);".into(),
                )
            }
            (_, c) if c.starts_with("setOn") => (
                Vec::new(),
                format!("{}findViewById(android.R.id.content).{c}(", dot(need_ctx()?)),
                ");".into(),
            ),
            _ => (Vec::new(), format!("{call}("), ");".into()),
        };
        let mut out = prelude;
        let n = obj.len();
        for (k, line) in obj.into_iter().enumerate() {
            let mut l = line;
            if k == 0 {
                l = format!("{prefix}{l}");
            }
            if k + 1 == n {
                l.push_str(&suffix);
            }
            out.push(l);
        }
        Ok(out)
    }
}

fn default_call(kind: RegistrationKind) -> &'static str {
    match kind {
        RegistrationKind::DynamicReceiver => "registerReceiver",
        RegistrationKind::ImplicitCall => "runOnUiThread",
        RegistrationKind::ListenerAttach => "setOnClickListener",
        RegistrationKind::XmlOnclick => "setContentView",
    }
}

fn tag_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"leak-\d+").expect("valid regex"))
}

/// Builds a skeleton reproducing `chain` with the mutant's operator at its
/// end. `model` is the mutated-tree model the chain was computed on.
pub fn synthesize_minimal(model: &CodeModel, chain: &CallChain, mutant: &Mutant, op: &SecurityOperator) -> Result<MinimalExample> {
    let entry = *chain
        .methods
        .first()
        .ok_or_else(|| Error::Synthesis { plan: format!("leak-{}", mutant.id), message: "empty call chain".into() })?;
    let id = mutant.id;
    let class_name = format!("Minimal{id}Activity");
    let mut gen = Gen {
        model,
        chain,
        mutant,
        op,
        activity: "android.app.Activity".into(),
        imports: op.required_imports.iter().cloned().collect(),
        layout_handler: None,
        static_classes: Vec::new(),
    };
    gen.note_imports(entry);
    let em = model.method(entry);
    let owner = model.class(em.owner);
    let mut activity = Holder {
        ctx: Some("this".into()),
        is_activity: true,
        members: Vec::new(),
    };
    let mut needs_on_create: Vec<String> = Vec::new();
    match em.callback_kind {
        CallbackKind::Lifecycle if owner.kind == ClassKind::Activity => {
            if let Some(t) = &em.callback_owner {
                gen.activity = t.clone();
            }
            let body = gen.step(0, &mut activity)?;
            activity.members.push(copied_method(model, em, body));
        }
        CallbackKind::XmlDeclared => {
            if owner.kind == ClassKind::Activity {
                if let Some(t) = owner.framework_types.iter().find(|t| model.table.by_name(t).is_some_and(|f| f.kind == ClassKind::Activity)) {
                    gen.activity = t.clone();
                }
            }
            let body = gen.step(0, &mut activity)?;
            activity.members.push(copied_method(model, em, body));
            gen.layout_handler = Some(em.name.clone());
            needs_on_create.push(format!("setContentView(R.layout.minimal_{id});"));
        }
        CallbackKind::Lifecycle => {
            let base = em
                .callback_owner
                .clone()
                .ok_or_else(|| gen.unsupported(format!("lifecycle method {} without a framework type", model.method_label(entry))))?;
            let mut fragment = Holder {
                ctx: Some("getActivity()".into()),
                is_activity: false,
                members: Vec::new(),
            };
            let body = gen.step(0, &mut fragment)?;
            fragment.members.push(copied_method(model, em, body));
            gen.static_classes.push(class_block(&format!("public static class MinimalFragment extends {base}"), fragment.members));
            needs_on_create.push("getFragmentManager().beginTransaction().add(new MinimalFragment(), \"minimal\").commit();".into());
        }
        CallbackKind::UiListener | CallbackKind::ReceiverOnReceive => {
            let base = em
                .callback_owner
                .clone()
                .ok_or_else(|| gen.unsupported(format!("callback {} without a framework type", model.method_label(entry))))?;
            let relation = if model.table.by_name(&base).is_some_and(|t| t.is_abstract) {
                "extends"
            } else {
                "implements"
            };
            let mut standalone = Holder {
                ctx: None,
                is_activity: false,
                members: Vec::new(),
            };
            let body = gen.step(0, &mut standalone)?;
            standalone.members.push(copied_method(model, em, body));
            gen.static_classes.push(class_block(&format!("public static class MinimalCallback {relation} {base}"), standalone.members));
        }
        CallbackKind::None => {
            return Err(gen.unsupported(format!("chain entry {} is not a callback", model.method_label(entry))));
        }
    }
    if !needs_on_create.is_empty() || activity.members.is_empty() {
        let mut body = vec!["super.onCreate(savedInstanceState);".to_string()];
        body.extend(needs_on_create);
        activity.members.insert(0, block("@Override protected void onCreate(android.os.Bundle savedInstanceState)", body));
    }

    let mut lines = vec![format!("package {PACKAGE};"), String::new()];
    for imp in &gen.imports {
        lines.push(format!("import {imp};"));
    }
    if !gen.imports.is_empty() {
        lines.push(String::new());
    }
    let mut members = activity.members;
    members.extend(gen.static_classes);
    lines.extend(class_block(&format!("public class {class_name} extends {}", gen.activity), members));
    let source = lines.join("\n") + "\n";

    let path = format!("src/leakmut/minimal/{class_name}.java");
    let layout = gen.layout_handler.as_ref().map(|h| {
        (
            format!("res/layout/minimal_{id}.xml"),
            format!(
                "<?xml version=\"1.0\" encoding=\"utf-8\"?>\n\
                 <LinearLayout xmlns:android=\"http://schemas.android.com/apk/res/android\"\n    \
                 android:layout_width=\"match_parent\"\n    android:layout_height=\"match_parent\">\n    \
                 <Button\n        android:id=\"@+id/minimal_button\"\n        android:layout_width=\"wrap_content\"\n        \
                 android:layout_height=\"wrap_content\"\n        android:onClick=\"{h}\" />\n\
                 </LinearLayout>\n"
            ),
        )
    });
    let tag = format!("\"leak-{id}\"");
    let sink_line = source
        .lines()
        .position(|l| l.contains(&tag))
        .map(|i| i as u32 + 1)
        .ok_or_else(|| Error::Synthesis { plan: format!("leak-{id}"), message: "sink tag missing from skeleton".into() })?;
    let example = MinimalExample {
        mutant_id: id,
        chain: chain.methods.iter().map(|&m| model.method_label(m)).collect(),
        path,
        source,
        layout,
        sink_line,
        sink_api: mutant.sink_api.clone(),
    };
    check_example(model, &example)?;
    Ok(example)
}

fn class_block(header: &str, members: Vec<Vec<String>>) -> Vec<String> {
    let mut body = Vec::new();
    for (k, m) in members.into_iter().enumerate() {
        if k > 0 {
            body.push(String::new());
        }
        body.extend(m);
    }
    block(header, body)
}

/// The example must parse and carry exactly one leak tag.
fn check_example(model: &CodeModel, example: &MinimalExample) -> Result<()> {
    let fail = |message: String| Error::Synthesis {
        plan: format!("leak-{}", example.mutant_id),
        message,
    };
    let reparsed = model_from_sources(example.units(), &model.table);
    if let Some(d) = reparsed.skipped.first() {
        return Err(fail(format!("skeleton does not parse: {d}")));
    }
    let tags: usize = example.units().iter().map(|(_, t)| tag_re().find_iter(t).count()).sum();
    if tags != 1 {
        return Err(fail(format!("skeleton carries {tags} leak tags")));
    }
    Ok(())
}
