//! Queryable model of a Java/Android source corpus.
//!
//! [`build_model`] merges parsed units into classes, methods, callback
//! classifications, registration edges and XML-declared handlers. Ids are
//! assigned in path order and then source order, so building the same corpus
//! twice yields identical models.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::ops::Range;

pub mod callgraph;
pub mod classify;
pub mod corpus;
pub mod java;
pub mod lexer;
pub mod unit;
pub mod xml;

pub use callgraph::{call_graph, CallEdge, CallGraph, EdgeKind};
pub use classify::{ClassKind, ClassificationTable};
pub use corpus::{Corpus, CorpusFile};
pub use unit::{parse_unit, Diagnostic, SourceUnit, UnitKind};

use java::{ArgShape, FieldSyntax, Init, LocalVar, MethodSyntax, Param, Stmt, StmtKind, TypeDecl};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ClassId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MethodId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CallbackKind {
    Lifecycle,
    UiListener,
    ReceiverOnReceive,
    XmlDeclared,
    None,
}

impl CallbackKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CallbackKind::Lifecycle => "lifecycle",
            CallbackKind::UiListener => "ui-listener",
            CallbackKind::ReceiverOnReceive => "receiver-on-receive",
            CallbackKind::XmlDeclared => "xml-declared",
            CallbackKind::None => "none",
        }
    }
}

/// Callback owner recorded for methods named by a layout `android:onClick`.
pub const XML_ONCLICK_OWNER: &str = "xml:onClick";

/// A statement-boundary insertion position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Anchor {
    pub unit: usize,
    pub offset: usize,
    pub line: u32,
    pub column: u32,
}

#[derive(Debug, Clone)]
pub struct ClassDecl {
    pub id: ClassId,
    pub qualified_name: String,
    /// `None` for anonymous classes.
    pub simple_name: Option<String>,
    pub kind: ClassKind,
    /// Supertypes as written.
    pub supertypes: Vec<String>,
    /// Classification-table types found in the supertype closure.
    pub framework_types: Vec<String>,
    pub is_anonymous: bool,
    /// Method whose body declares this class (anonymous and local classes).
    pub enclosing_method: Option<MethodId>,
    /// Lexically enclosing class.
    pub outer: Option<ClassId>,
    pub methods: Vec<MethodId>,
    pub unit: usize,
    pub start: usize,
    /// `{` .. closing `}` offsets.
    pub body: Range<usize>,
    pub fields: Vec<FieldSyntax>,
}

#[derive(Debug, Clone)]
pub struct MethodDecl {
    pub id: MethodId,
    pub owner: ClassId,
    pub name: String,
    pub params: Vec<Param>,
    pub is_constructor: bool,
    pub unit: usize,
    pub start: usize,
    /// `{` .. closing `}` offsets of the body.
    pub body: Range<usize>,
    pub body_entry: Anchor,
    /// Insertable positions; the first is `body_entry`.
    pub statement_anchors: Vec<Anchor>,
    pub callback_kind: CallbackKind,
    /// Position in the owner type's lifecycle, or in a listener's callback
    /// sequence.
    pub lifecycle_order: Option<u8>,
    /// Classification-table type (or [`XML_ONCLICK_OWNER`]) that makes this a callback.
    pub callback_owner: Option<String>,
    /// Leading whitespace of the declaration line.
    pub indent: String,
    pub stmts: Vec<Stmt>,
}

impl MethodDecl {
    pub fn arity(&self) -> usize {
        self.params.len()
    }

    pub fn is_callback(&self) -> bool {
        self.callback_kind != CallbackKind::None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RegistrationKind {
    DynamicReceiver,
    ListenerAttach,
    XmlOnclick,
    /// Object handed to the framework which later calls into it
    /// (`runOnUiThread`, `ExecutorService.submit`, ...).
    ImplicitCall,
}

impl RegistrationKind {
    pub fn as_str(self) -> &'static str {
        match self {
            RegistrationKind::DynamicReceiver => "dynamic-receiver",
            RegistrationKind::ListenerAttach => "listener-attach",
            RegistrationKind::XmlOnclick => "xml-onclick",
            RegistrationKind::ImplicitCall => "implicit-call",
        }
    }
}

#[derive(Debug, Clone)]
pub struct RegistrationEdge {
    /// Start of the statement containing the registering call.
    pub site: Anchor,
    pub call_offset: usize,
    pub registrar: MethodId,
    pub registered: ClassId,
    pub kind: RegistrationKind,
    pub call: String,
    /// Methods of `registered` the framework will invoke.
    pub targets: Vec<MethodId>,
}

#[derive(Debug, Clone)]
pub struct XmlHandlerDecl {
    pub unit: usize,
    /// Layout file stem.
    pub layout: String,
    pub widget: String,
    pub method: String,
    pub resolved: Vec<MethodId>,
    /// Classes inflating the layout.
    pub hosts: Vec<ClassId>,
}

#[derive(Debug, Clone)]
pub struct CodeModel {
    pub units: Vec<SourceUnit>,
    /// Units rejected by the parser.
    pub skipped: Vec<Diagnostic>,
    pub classes: Vec<ClassDecl>,
    pub methods: Vec<MethodDecl>,
    pub registrations: Vec<RegistrationEdge>,
    pub xml_handlers: Vec<XmlHandlerDecl>,
    pub entry_points: BTreeSet<MethodId>,
    /// Non-fatal findings (unresolved handlers, unmodeled constructs).
    pub diagnostics: Vec<String>,
    pub unresolved_registrations: usize,
    pub table: ClassificationTable,
}

/// Visits statements depth-first, not descending into class bodies.
pub fn walk_stmts<'s>(stmts: &'s [Stmt], f: &mut impl FnMut(&'s Stmt)) {
    for s in stmts {
        f(s);
        walk_stmts(&s.children, f);
    }
}

impl CodeModel {
    pub fn class(&self, id: ClassId) -> &ClassDecl {
        &self.classes[id.0]
    }

    pub fn method(&self, id: MethodId) -> &MethodDecl {
        &self.methods[id.0]
    }

    pub fn unit_of(&self, id: MethodId) -> &SourceUnit {
        &self.units[self.method(id).unit]
    }

    pub fn unit_by_path(&self, path: &str) -> Option<usize> {
        self.units.iter().position(|u| u.path == path)
    }

    /// `pkg.Class.method/arity`, unique within a model.
    pub fn method_label(&self, id: MethodId) -> String {
        let m = self.method(id);
        format!("{}.{}/{}", self.class(m.owner).qualified_name, m.name, m.arity())
    }

    /// Widget key (`layout:widget`) → declared handler method name.
    pub fn xml_handler_map(&self) -> BTreeMap<String, String> {
        self.xml_handlers
            .iter()
            .map(|h| (format!("{}:{}", h.layout, h.widget), h.method.clone()))
            .collect()
    }

    /// Innermost method whose body contains the given offset.
    pub fn method_at(&self, unit: usize, offset: usize) -> Option<MethodId> {
        self.methods
            .iter()
            .filter(|m| m.unit == unit && m.body.start < offset && offset <= m.body.end)
            .min_by_key(|m| m.body.end - m.body.start)
            .map(|m| m.id)
    }

    /// Innermost method whose body contains the start of `line` (1-based) in `path`.
    pub fn method_at_line(&self, path: &str, line: u32) -> Option<MethodId> {
        let unit = self.unit_by_path(path)?;
        let start = *self.units[unit].line_index.get(line.checked_sub(1)? as usize)?;
        let text = &self.units[unit].text;
        let first_non_ws = text[start..]
            .find(|c: char| !c.is_whitespace() || c == '\n')
            .map_or(start, |i| start + i);
        self.method_at(unit, first_non_ws)
    }

    /// True when `class` is anonymous and registered from inside another
    /// registered callback: a callback of an anonymous registered class, or
    /// a layout-declared handler.
    pub fn is_nested_registration(&self, edge: &RegistrationEdge) -> bool {
        if !self.class(edge.registered).is_anonymous || edge.kind == RegistrationKind::ImplicitCall {
            return false;
        }
        let registrar = self.method(edge.registrar);
        if registrar.callback_kind == CallbackKind::XmlDeclared {
            return true;
        }
        let owner = self.class(registrar.owner);
        owner.is_anonymous
            && self.registrations.iter().any(|r| {
                r.registered == owner.id && r.kind != RegistrationKind::ImplicitCall
            })
    }

    /// Human-readable listing of the model, stable across runs.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for d in &self.skipped {
            let _ = writeln!(out, "skipped {d}");
        }
        for c in &self.classes {
            let _ = writeln!(
                out,
                "class {} kind={} anonymous={} supertypes=[{}]",
                c.qualified_name,
                c.kind.as_str(),
                c.is_anonymous,
                c.supertypes.join(", ")
            );
            for &m in &c.methods {
                let md = self.method(m);
                let unit = &self.units[md.unit];
                let _ = writeln!(
                    out,
                    "  method #{} {}({}) callback={}{} entry={}:{}:{}{}",
                    m.0,
                    md.name,
                    md.arity(),
                    md.callback_kind.as_str(),
                    md.lifecycle_order.map(|o| format!("[{o}]")).unwrap_or_default(),
                    unit.path,
                    md.body_entry.line,
                    md.body_entry.column,
                    if self.entry_points.contains(&m) { " entry-point" } else { "" }
                );
            }
        }
        for r in &self.registrations {
            let _ = writeln!(
                out,
                "registration {} {} -> {} at {}:{}",
                r.kind.as_str(),
                self.method_label(r.registrar),
                self.class(r.registered).qualified_name,
                self.units[r.site.unit].path,
                r.site.line
            );
        }
        for h in &self.xml_handlers {
            let _ = writeln!(out, "xml-handler {}:{} -> {}", h.layout, h.widget, h.method);
        }
        for d in &self.diagnostics {
            let _ = writeln!(out, "warning {d}");
        }
        out
    }
}

/// Builds the model. Units with duplicate paths after the first are dropped
/// with a diagnostic.
pub fn build_model(mut units: Vec<SourceUnit>, table: &ClassificationTable) -> CodeModel {
    units.sort_by(|a, b| a.path.cmp(&b.path));
    let mut diagnostics = Vec::new();
    units.dedup_by(|b, a| {
        let dup = a.path == b.path;
        if dup {
            diagnostics.push(format!("{}: duplicate unit path dropped", b.path));
        }
        dup
    });
    let mut b = Builder {
        units: &units,
        table,
        classes: Vec::new(),
        methods: Vec::new(),
        by_body: HashMap::new(),
        anon_counters: HashMap::new(),
        diagnostics,
    };
    for (ui, unit) in units.iter().enumerate() {
        let Some(file) = unit.java() else { continue };
        let prefix = file.package.as_ref().map(|p| format!("{p}.")).unwrap_or_default();
        for t in &file.types {
            let name = t.name.clone().unwrap_or_default();
            b.register_type(ui, t, format!("{prefix}{name}"), None, None);
        }
    }
    b.classify_classes();
    b.classify_methods();
    let xml_handlers = b.resolve_xml_handlers();
    let (registrations, unresolved_registrations) = b.registrations(&xml_handlers);

    let entry_points = b
        .methods
        .iter()
        .filter(|m| m.is_callback() && b.classes[m.owner.0].enclosing_method.is_none())
        .map(|m| m.id)
        .collect();

    let Builder {
        classes,
        methods,
        diagnostics,
        ..
    } = b;
    CodeModel {
        units,
        skipped: Vec::new(),
        classes,
        methods,
        registrations,
        xml_handlers,
        entry_points,
        diagnostics,
        unresolved_registrations,
        table: table.clone(),
    }
}

struct Builder<'u> {
    units: &'u [SourceUnit],
    table: &'u ClassificationTable,
    classes: Vec<ClassDecl>,
    methods: Vec<MethodDecl>,
    /// (unit, body `{` offset) → class, for anonymous class lookup.
    by_body: HashMap<(usize, usize), ClassId>,
    anon_counters: HashMap<ClassId, usize>,
    diagnostics: Vec<String>,
}

enum Member<'t> {
    Method(&'t MethodSyntax),
    Type(&'t TypeDecl),
}

impl<'u> Builder<'u> {
    fn anchor(&self, unit: usize, offset: usize) -> Anchor {
        let (line, column) = self.units[unit].line_col(offset);
        Anchor {
            unit,
            offset,
            line,
            column,
        }
    }

    fn register_type(
        &mut self,
        unit: usize,
        decl: &TypeDecl,
        qualified_name: String,
        outer: Option<ClassId>,
        enclosing_method: Option<MethodId>,
    ) -> ClassId {
        let id = ClassId(self.classes.len());
        if decl.unmodeled_anonymous > 0 {
            self.diagnostics.push(format!(
                "{}: {} anonymous class(es) outside method bodies in {} not modeled",
                self.units[unit].path, decl.unmodeled_anonymous, qualified_name
            ));
        }
        self.classes.push(ClassDecl {
            id,
            qualified_name: qualified_name.clone(),
            simple_name: decl.name.clone(),
            kind: ClassKind::Plain,
            supertypes: decl.supertypes.clone(),
            framework_types: Vec::new(),
            is_anonymous: decl.name.is_none(),
            enclosing_method,
            outer,
            methods: Vec::new(),
            unit,
            start: decl.start,
            body: decl.body.clone(),
            fields: decl.fields.clone(),
        });
        self.by_body.insert((unit, decl.body.start), id);

        let mut members: Vec<(usize, Member)> = decl
            .methods
            .iter()
            .map(|m| (m.start, Member::Method(m)))
            .chain(decl.types.iter().map(|t| (t.start, Member::Type(t))))
            .collect();
        members.sort_by_key(|(off, _)| *off);
        for (_, member) in members {
            match member {
                Member::Method(m) => {
                    let Some(mid) = self.register_method(unit, m, id) else { continue };
                    let body = m.body.as_ref().expect("registered methods have bodies");
                    let mut local_types = Vec::new();
                    walk_stmts(&body.stmts, &mut |s| local_types.extend(s.types.iter()));
                    local_types.sort_by_key(|t| t.start);
                    for t in local_types {
                        let n = self.anon_counters.entry(id).or_insert(0);
                        *n += 1;
                        let name = format!(
                            "{qualified_name}${n}{}",
                            t.name.clone().unwrap_or_default()
                        );
                        self.register_type(unit, t, name, Some(id), Some(mid));
                    }
                }
                Member::Type(t) => {
                    let name = format!("{qualified_name}.{}", t.name.clone().unwrap_or_default());
                    self.register_type(unit, t, name, Some(id), None);
                }
            }
        }
        id
    }

    fn register_method(&mut self, unit: usize, m: &MethodSyntax, owner: ClassId) -> Option<MethodId> {
        let body = m.body.as_ref()?;
        let id = MethodId(self.methods.len());
        let mut entry = body.open + 1;
        let mut stmts = body.stmts.iter().peekable();
        if let Some(first) = stmts.peek() {
            if first.kind == StmtKind::CtorCall {
                entry = first.span.end;
                stmts.next();
            }
        }
        let mut statement_anchors = vec![self.anchor(unit, entry)];
        for s in stmts {
            if !s.kind.is_terminal() {
                statement_anchors.push(self.anchor(unit, s.span.end));
            }
        }
        let text = &self.units[unit].text;
        let line_start = text[..m.start].rfind('\n').map_or(0, |i| i + 1);
        let indent: String = text[line_start..]
            .chars()
            .take_while(|c| *c == ' ' || *c == '\t')
            .collect();
        self.methods.push(MethodDecl {
            id,
            owner,
            name: m.name.clone(),
            params: m.params.clone(),
            is_constructor: m.is_constructor,
            unit,
            start: m.start,
            body: body.open..body.close,
            body_entry: statement_anchors[0],
            statement_anchors,
            callback_kind: CallbackKind::None,
            lifecycle_order: None,
            callback_owner: None,
            indent,
            stmts: body.stmts.clone(),
        });
        self.classes[owner.0].methods.push(id);
        Some(id)
    }

    fn imports(&self, class: ClassId) -> &[String] {
        self.units[self.classes[class.0].unit]
            .java()
            .map(|j| j.imports.as_slice())
            .unwrap_or(&[])
    }

    fn package(&self, class: ClassId) -> Option<&str> {
        self.units[self.classes[class.0].unit]
            .java()
            .and_then(|j| j.package.as_deref())
    }

    /// Resolves a written type name to a named corpus class.
    fn resolve_corpus(&self, written: &str, from: ClassId) -> Option<ClassId> {
        resolve_corpus_class(&self.classes, written, from, self.package(from))
    }

    fn classify_classes(&mut self) {
        for i in 0..self.classes.len() {
            let id = ClassId(i);
            let mut framework: Vec<String> = Vec::new();
            let mut visited = BTreeSet::new();
            let mut queue: Vec<(ClassId, String)> = self.classes[i]
                .supertypes
                .iter()
                .map(|s| (id, s.clone()))
                .collect();
            queue.reverse();
            while let Some((from, written)) = queue.pop() {
                if let Some(c) = self.resolve_corpus(&written, from) {
                    if c != id && visited.insert(c) {
                        let mut next: Vec<_> = self.classes[c.0]
                            .supertypes
                            .iter()
                            .map(|s| (c, s.clone()))
                            .collect();
                        next.reverse();
                        queue.extend(next);
                    }
                } else if let Some(t) = self.table.resolve(&written, self.imports(from)) {
                    if !framework.contains(&t.name) {
                        framework.push(t.name.clone());
                    }
                }
            }
            let kind = self
                .table
                .dominant_kind(framework.iter().filter_map(|n| self.table.by_name(n)));
            let c = &mut self.classes[i];
            c.framework_types = framework;
            c.kind = kind;
        }
    }

    fn classify_methods(&mut self) {
        for m in &mut self.methods {
            if m.is_constructor {
                continue;
            }
            let class = &self.classes[m.owner.0];
            let lifecycle = self.table.lifecycle_for(class.kind);
            if let Some(pos) = lifecycle.iter().position(|n| *n == m.name) {
                m.callback_kind = CallbackKind::Lifecycle;
                m.lifecycle_order = Some(pos as u8);
                m.callback_owner = class
                    .framework_types
                    .iter()
                    .find(|t| self.table.by_name(t).is_some_and(|ft| ft.kind == class.kind))
                    .cloned();
                continue;
            }
            for t in &class.framework_types {
                let Some(ft) = self.table.by_name(t) else { continue };
                if ft.callbacks.contains(&m.name) {
                    m.callback_kind = if ft.kind == ClassKind::BroadcastReceiver {
                        CallbackKind::ReceiverOnReceive
                    } else {
                        CallbackKind::UiListener
                    };
                    m.callback_owner = Some(ft.name.clone());
                    m.lifecycle_order = ft.sequence.iter().position(|n| *n == m.name).map(|p| p as u8);
                    break;
                }
            }
        }
    }

    fn layout_refs(&self, class: &ClassDecl) -> BTreeSet<String> {
        let mut refs = BTreeSet::new();
        for &m in &class.methods {
            walk_stmts(&self.methods[m.0].stmts, &mut |s| {
                refs.extend(s.facts.layout_refs.iter().map(|(n, _)| n.clone()));
            });
        }
        refs
    }

    fn resolve_xml_handlers(&mut self) -> Vec<XmlHandlerDecl> {
        let class_refs: Vec<BTreeSet<String>> =
            self.classes.iter().map(|c| self.layout_refs(c)).collect();
        let mut out = Vec::new();
        for (ui, unit) in self.units.iter().enumerate() {
            if unit.kind != UnitKind::XmlLayout {
                continue;
            }
            let Some(info) = unit.xml() else { continue };
            let layout = unit.stem().to_string();
            let hosts: Vec<ClassId> = self
                .classes
                .iter()
                .filter(|c| !c.is_anonymous && class_refs[c.id.0].contains(&layout))
                .map(|c| c.id)
                .collect();
            for h in &info.handlers {
                let matching = |c: ClassId| -> Vec<MethodId> {
                    self.classes[c.0]
                        .methods
                        .iter()
                        .copied()
                        .filter(|&m| {
                            let md = &self.methods[m.0];
                            md.name == h.method && md.arity() == 1 && !md.is_constructor
                        })
                        .collect()
                };
                let mut resolved: Vec<MethodId> = hosts.iter().flat_map(|&c| matching(c)).collect();
                if hosts.is_empty() {
                    resolved = self
                        .classes
                        .iter()
                        .filter(|c| c.kind == ClassKind::Activity)
                        .flat_map(|c| matching(c.id))
                        .collect();
                }
                if resolved.is_empty() {
                    self.diagnostics.push(format!(
                        "{}: android:onClick handler `{}` has no matching method",
                        unit.path, h.method
                    ));
                }
                for &m in &resolved {
                    let md = &mut self.methods[m.0];
                    md.callback_kind = CallbackKind::XmlDeclared;
                    md.lifecycle_order = None;
                    md.callback_owner = Some(XML_ONCLICK_OWNER.to_string());
                }
                out.push(XmlHandlerDecl {
                    unit: ui,
                    layout: layout.clone(),
                    widget: h.widget.clone(),
                    method: h.method.clone(),
                    resolved,
                    hosts: hosts.clone(),
                });
            }
        }
        out
    }

    fn resolve_arg(&self, method: &MethodDecl, locals: &[LocalVar], shape: &ArgShape, at: usize) -> Option<ClassId> {
        let owner = method.owner;
        match shape {
            ArgShape::Anonymous(off) => self.by_body.get(&(method.unit, *off)).copied(),
            ArgShape::New(ty) => self.resolve_corpus(ty, owner),
            ArgShape::This => Some(owner),
            ArgShape::Ident(name) => {
                if let Some(local) = locals.iter().rfind(|l| l.name == *name && l.offset < at) {
                    return match &local.init {
                        Init::Anonymous(off) => self.by_body.get(&(method.unit, *off)).copied(),
                        Init::New(ty) => self.resolve_corpus(ty, owner),
                        _ => None,
                    };
                }
                let mut class = Some(owner);
                while let Some(c) = class {
                    let decl = &self.classes[c.0];
                    if let Some(f) = decl.fields.iter().find(|f| f.name == *name) {
                        return match &f.init {
                            Init::New(ty) => self.resolve_corpus(ty, c),
                            _ => None,
                        };
                    }
                    class = decl.outer;
                }
                None
            }
            ArgShape::Other => None,
        }
    }

    fn registrations(&mut self, handlers: &[XmlHandlerDecl]) -> (Vec<RegistrationEdge>, usize) {
        let mut edges = Vec::new();
        let mut unresolved = 0;
        for method in &self.methods {
            let mut locals = Vec::new();
            walk_stmts(&method.stmts, &mut |s| locals.extend(s.locals.iter().cloned()));
            let mut sites = Vec::new();
            walk_stmts(&method.stmts, &mut |s| {
                for c in &s.facts.calls {
                    sites.push((s, c));
                }
            });
            for (stmt, call) in sites {
                let name = call.name.as_str();
                let kind = if self.table.is_receiver_registrar(name) {
                    RegistrationKind::DynamicReceiver
                } else if self.table.is_listener_registrar(name) {
                    RegistrationKind::ListenerAttach
                } else if self.table.implicit_target(name).is_some() {
                    RegistrationKind::ImplicitCall
                } else if self.table.is_content_view(name) {
                    RegistrationKind::XmlOnclick
                } else {
                    continue;
                };
                let site = self.anchor(method.unit, stmt.span.start);
                if kind == RegistrationKind::XmlOnclick {
                    let layouts: BTreeSet<&str> = stmt
                        .facts
                        .layout_refs
                        .iter()
                        .filter(|(_, off)| call.span.contains(off))
                        .map(|(n, _)| n.as_str())
                        .collect();
                    let targets: Vec<MethodId> = handlers
                        .iter()
                        .filter(|h| layouts.contains(h.layout.as_str()))
                        .flat_map(|h| h.resolved.iter().copied())
                        .filter(|m| self.methods[m.0].owner == method.owner)
                        .collect::<BTreeSet<_>>()
                        .into_iter()
                        .collect();
                    if !targets.is_empty() {
                        edges.push(RegistrationEdge {
                            site,
                            call_offset: call.offset,
                            registrar: method.id,
                            registered: method.owner,
                            kind,
                            call: call.name.clone(),
                            targets,
                        });
                    }
                    continue;
                }
                let candidates: Vec<_> = if kind == RegistrationKind::DynamicReceiver {
                    call.args.iter().take(1).collect()
                } else {
                    call.args.iter().collect()
                };
                let implicit_target = self.table.implicit_target(name);
                let found = candidates.iter().find_map(|arg| {
                    let class = self.resolve_arg(method, &locals, &arg.shape, call.offset)?;
                    let targets: Vec<MethodId> = self.classes[class.0]
                        .methods
                        .iter()
                        .copied()
                        .filter(|&m| {
                            let md = &self.methods[m.0];
                            match implicit_target {
                                Some(t) if kind == RegistrationKind::ImplicitCall => {
                                    md.name == t && !md.is_constructor
                                }
                                _ => matches!(
                                    md.callback_kind,
                                    CallbackKind::UiListener | CallbackKind::ReceiverOnReceive
                                ),
                            }
                        })
                        .collect();
                    (!targets.is_empty()).then_some((class, targets))
                });
                match found {
                    Some((registered, targets)) => edges.push(RegistrationEdge {
                        site,
                        call_offset: call.offset,
                        registrar: method.id,
                        registered,
                        kind,
                        call: call.name.clone(),
                        targets,
                    }),
                    None => unresolved += 1,
                }
            }
        }
        (edges, unresolved)
    }
}

pub(crate) fn resolve_corpus_class(
    classes: &[ClassDecl],
    written: &str,
    from: ClassId,
    package: Option<&str>,
) -> Option<ClassId> {
    if let Some(c) = classes
        .iter()
        .find(|c| !c.is_anonymous && c.qualified_name == written && c.id != from)
    {
        return Some(c.id);
    }
    let simple = written.rsplit('.').next().unwrap_or(written);
    let mut candidates = classes
        .iter()
        .filter(|c| c.simple_name.as_deref() == Some(simple) && c.id != from);
    let first = candidates.next()?;
    let same_pkg = std::iter::once(first).chain(candidates).find(|c| match package {
        Some(p) => c.qualified_name.starts_with(&format!("{p}.")),
        None => !c.qualified_name.contains('.'),
    });
    Some(same_pkg.unwrap_or(first).id)
}

/// Parses and models a set of (path, text) pairs; unparseable units are
/// recorded in `skipped`.
pub fn model_from_sources<'a>(
    sources: impl IntoIterator<Item = (&'a str, &'a str)>,
    table: &ClassificationTable,
) -> CodeModel {
    let mut units = Vec::new();
    let mut skipped = Vec::new();
    for (path, text) in sources {
        let Some(kind) = UnitKind::from_path(path) else { continue };
        match parse_unit(path, text, kind) {
            Ok(u) => units.push(u),
            Err(d) => skipped.push(d),
        }
    }
    let mut model = build_model(units, table);
    skipped.sort_by(|a, b| a.path.cmp(&b.path));
    model.skipped = skipped;
    model
}
