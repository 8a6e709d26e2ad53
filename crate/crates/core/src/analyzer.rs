//! A small reference leak detector with switchable blind spots.
//!
//! Reachability starts at the recognized entry callbacks and follows explicit
//! calls plus registration edges the configuration admits. Taint is tracked
//! per method, flow-insensitively, over local names; values stored in fields
//! and read by a different callback only count when `async-pair-flows` is on.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::ops::Range;
use std::path::Path;

use serde::Deserialize;

use crate::evaluator::{Detection, ToolReport};
use crate::model::java::{ArgShape, Stmt};
use crate::model::{call_graph, walk_stmts, ClassId, ClassKind, CodeModel, EdgeKind, MethodDecl, MethodId, RegistrationKind, XML_ONCLICK_OWNER};
use crate::operators::{ApiSig, SourceSinkCatalog};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct AnalyzerConfig {
    /// Framework types (or `xml:onClick`) whose callbacks are modeled.
    /// Entries match a full name or a `.`-separated suffix of it.
    pub known_callbacks: Vec<String>,
    /// Model callbacks inherited from abstract (non-component) classes.
    #[serde(default)]
    pub abstract_class_callbacks: bool,
    /// Follow `runOnUiThread`/`submit`-style edges.
    #[serde(default)]
    pub implicit_calls: bool,
    /// Follow registrations of anonymous classes made inside other callbacks.
    #[serde(default)]
    pub anonymous_classes: bool,
    /// Track field flows between two callbacks.
    #[serde(default)]
    pub async_pair_flows: bool,
    /// Maximum call hops from an entry callback; unlimited when absent.
    #[serde(default)]
    pub max_call_depth: Option<usize>,
}

pub const PRESETS: [&str; 2] = ["permissive", "flowdroid-like"];

/// Framework types the `flowdroid-like` preset does not model.
pub const FLOWDROID_MISSING: [&str; 7] = [
    "android.app.Fragment",
    "androidx.fragment.app.Fragment",
    "android.app.DialogFragment",
    "androidx.fragment.app.DialogFragment",
    "android.telephony.PhoneStateListener",
    "android.support.design.widget.NavigationView.OnNavigationItemSelectedListener",
    "android.database.sqlite.SQLiteOpenHelper",
];

impl AnalyzerConfig {
    /// Named preset over the model's classification table.
    pub fn preset(name: &str, model: &CodeModel) -> Result<AnalyzerConfig> {
        let all = || {
            model
                .table
                .types
                .iter()
                .map(|t| t.name.clone())
                .chain([XML_ONCLICK_OWNER.to_string()])
        };
        match name {
            "permissive" => Ok(AnalyzerConfig {
                known_callbacks: all().collect(),
                abstract_class_callbacks: true,
                implicit_calls: true,
                anonymous_classes: true,
                async_pair_flows: true,
                max_call_depth: None,
            }),
            "flowdroid-like" => Ok(AnalyzerConfig {
                known_callbacks: all().filter(|n| !FLOWDROID_MISSING.contains(&n.as_str())).collect(),
                abstract_class_callbacks: false,
                implicit_calls: false,
                anonymous_classes: false,
                async_pair_flows: false,
                max_call_depth: None,
            }),
            _ => Err(Error::Config(format!(
                "unknown analyzer preset `{name}` (expected one of: {})",
                PRESETS.join(", ")
            ))),
        }
    }

    pub fn parse(text: &str) -> Result<AnalyzerConfig> {
        let cfg: AnalyzerConfig = toml::from_str(text).map_err(|e| Error::Config(format!("analyzer config: {e}")))?;
        if cfg.max_call_depth == Some(0) {
            return Err(Error::Config("analyzer config: max-call-depth must be at least 1".into()));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<AnalyzerConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Adds `name` to the known callbacks unless already present.
    pub fn add_known(&mut self, name: &str) {
        if !self.known_callbacks.iter().any(|k| k == name) {
            self.known_callbacks.push(name.to_string());
        }
    }

    fn knows(&self, owner: &str) -> bool {
        self.known_callbacks.iter().any(|k| {
            owner == k || (owner.len() > k.len() && owner.ends_with(k.as_str()) && owner[..owner.len() - k.len()].ends_with('.'))
        })
    }

    /// Whether the analyzer treats `m` as invocable: plain methods always,
    /// callbacks when their owner type is known (and, for abstract
    /// non-component owners, when abstract support is on).
    pub fn recognizes(&self, model: &CodeModel, m: &MethodDecl) -> bool {
        if !m.is_callback() {
            return true;
        }
        let Some(owner) = m.callback_owner.as_deref() else {
            return true;
        };
        if !self.knows(owner) {
            return false;
        }
        match model.table.by_name(owner) {
            Some(ft) if ft.is_abstract && !is_component(ft.kind) => self.abstract_class_callbacks,
            _ => true,
        }
    }
}

fn is_component(kind: ClassKind) -> bool {
    matches!(
        kind,
        ClassKind::Activity | ClassKind::Fragment | ClassKind::DialogFragment | ClassKind::BroadcastReceiver
    )
}

/// Methods the configuration reaches, with their hop counts.
pub fn reachable_methods(model: &CodeModel, config: &AnalyzerConfig) -> BTreeMap<MethodId, usize> {
    let graph = call_graph(model);
    let nested: HashSet<(MethodId, ClassId)> = model
        .registrations
        .iter()
        .filter(|r| model.is_nested_registration(r))
        .map(|r| (r.registrar, r.registered))
        .collect();
    let roots: Vec<MethodId> = model
        .entry_points
        .iter()
        .copied()
        .filter(|&m| config.recognizes(model, model.method(m)))
        .collect();
    let depth = graph.reachable(roots, config.max_call_depth, |e| match e.kind {
        EdgeKind::Call => true,
        EdgeKind::Registration(RegistrationKind::ImplicitCall) => config.implicit_calls,
        EdgeKind::Registration(_) => {
            let target = model.method(e.to);
            config.recognizes(model, target) && (config.anonymous_classes || !nested.contains(&(e.from, target.owner)))
        }
    });
    depth
        .into_iter()
        .enumerate()
        .filter_map(|(i, d)| d.map(|d| (MethodId(i), d)))
        .collect()
}

type Taint = BTreeMap<String, BTreeSet<usize>>;

struct MethodFlows {
    /// (sink call offset, source index, sink index)
    hits: BTreeSet<(usize, usize, usize)>,
    /// Non-local names assigned tainted values.
    field_writes: Taint,
}

struct Sigs {
    sources: Vec<ApiSig>,
    sinks: Vec<ApiSig>,
}

fn matching<'a>(sigs: &'a [ApiSig], name: &str, arity: usize) -> impl Iterator<Item = usize> + 'a {
    let name = name.to_string();
    sigs.iter()
        .enumerate()
        .filter(move |(_, s)| s.name == name && s.params.len() == arity)
        .map(|(i, _)| i)
}

fn flatten(stmts: &[Stmt]) -> Vec<&Stmt> {
    let mut out = Vec::new();
    walk_stmts(stmts, &mut |s| out.push(s));
    out
}

fn taint_of(stmts: &[&Stmt], sigs: &Sigs, taint: &Taint, range: &Range<usize>) -> BTreeSet<usize> {
    let mut out = BTreeSet::new();
    for s in stmts {
        if s.span.end <= range.start || s.span.start >= range.end {
            continue;
        }
        for c in s.facts.calls.iter().filter(|c| range.contains(&c.offset)) {
            out.extend(matching(&sigs.sources, &c.name, c.args.len()));
        }
        for (name, off) in &s.facts.idents {
            if range.contains(off) {
                if let Some(t) = taint.get(name) {
                    out.extend(t.iter().copied());
                }
            }
        }
    }
    out
}

fn method_flows(method: &MethodDecl, sigs: &Sigs, fields_in: &Taint) -> MethodFlows {
    let stmts = flatten(&method.stmts);
    let mut locals: BTreeSet<&str> = method.params.iter().map(|p| p.name.as_str()).collect();
    for s in &stmts {
        locals.extend(s.locals.iter().map(|l| l.name.as_str()));
    }
    let mut taint: Taint = fields_in
        .iter()
        .filter(|(k, _)| !locals.contains(k.as_str()))
        .map(|(k, v)| (k.clone(), v.clone()))
        .collect();
    loop {
        let mut changed = false;
        let mut add = |taint: &mut Taint, name: &str, t: BTreeSet<usize>| {
            if t.is_empty() {
                return;
            }
            let entry = taint.entry(name.to_string()).or_default();
            let before = entry.len();
            entry.extend(t);
            changed |= entry.len() != before;
        };
        for s in &stmts {
            for a in &s.facts.assignments {
                let t = taint_of(&stmts, sigs, &taint, &a.rhs);
                add(&mut taint, &a.target, t);
            }
            for c in &s.facts.calls {
                let Some(recv) = c.receiver.as_deref() else { continue };
                if !is_simple_name(recv) || matching(&sigs.sinks, &c.name, c.args.len()).next().is_some() {
                    continue;
                }
                let mut t = BTreeSet::new();
                for arg in &c.args {
                    t.extend(taint_of(&stmts, sigs, &taint, &arg.span));
                }
                add(&mut taint, recv, t);
            }
        }
        if !changed {
            break;
        }
    }
    let mut hits = BTreeSet::new();
    for s in &stmts {
        for c in &s.facts.calls {
            let sinks: Vec<usize> = matching(&sigs.sinks, &c.name, c.args.len()).collect();
            if sinks.is_empty() {
                continue;
            }
            let mut t = BTreeSet::new();
            for arg in &c.args {
                if !matches!(arg.shape, ArgShape::Anonymous(_)) {
                    t.extend(taint_of(&stmts, sigs, &taint, &arg.span));
                }
            }
            for &src in &t {
                for &sink in &sinks {
                    hits.insert((c.offset, src, sink));
                }
            }
        }
    }
    let field_writes = stmts
        .iter()
        .flat_map(|s| s.facts.assignments.iter())
        .filter(|a| !locals.contains(a.target.as_str()))
        .filter_map(|a| taint.get(&a.target).map(|t| (a.target.clone(), t.clone())))
        .collect();
    MethodFlows { hits, field_writes }
}

fn is_simple_name(s: &str) -> bool {
    let mut chars = s.chars();
    chars.next().is_some_and(|c| c.is_alphabetic() || c == '_' || c == '$')
        && chars.all(|c| c.is_alphanumeric() || c == '_' || c == '$')
}

/// Class in the owner's lexical chain declaring field `name`, or the owner.
fn field_home(model: &CodeModel, owner: ClassId, name: &str) -> ClassId {
    let mut class = Some(owner);
    while let Some(c) = class {
        let decl = model.class(c);
        if decl.fields.iter().any(|f| f.name == name) {
            return c;
        }
        class = decl.outer;
    }
    owner
}

/// Runs the analyzer over a model. Sources and sinks come from `catalog`.
pub fn analyze(model: &CodeModel, catalog: &SourceSinkCatalog, config: &AnalyzerConfig, tool: &str) -> Result<ToolReport> {
    if let Some(d) = model.skipped.first() {
        return Err(Error::Parse(d.clone()));
    }
    catalog.require_data_leak()?;
    let sigs = Sigs {
        sources: catalog.source_sigs(),
        sinks: catalog.sink_sigs(),
    };
    let reachable = reachable_methods(model, config);
    let none = Taint::new();
    let mut hits: BTreeSet<(MethodId, usize, usize, usize)> = BTreeSet::new();
    let mut fields: BTreeMap<(ClassId, String), BTreeSet<usize>> = BTreeMap::new();
    for &m in reachable.keys() {
        let md = model.method(m);
        let flows = method_flows(md, &sigs, &none);
        hits.extend(flows.hits.iter().map(|&(o, s, k)| (m, o, s, k)));
        for (name, t) in flows.field_writes {
            fields.entry((field_home(model, md.owner, &name), name)).or_default().extend(t);
        }
    }
    if config.async_pair_flows && !fields.is_empty() {
        for &m in reachable.keys() {
            let md = model.method(m);
            let mut visible = Taint::new();
            for ((class, name), t) in &fields {
                if field_home(model, md.owner, name) == *class {
                    visible.entry(name.clone()).or_default().extend(t.iter().copied());
                }
            }
            if visible.is_empty() {
                continue;
            }
            let flows = method_flows(md, &sigs, &visible);
            hits.extend(flows.hits.iter().map(|&(o, s, k)| (m, o, s, k)));
        }
    }
    let mut detections = BTreeSet::new();
    for (m, offset, src, sink) in hits {
        let unit = model.unit_of(m);
        detections.insert(Detection::Flow {
            file: unit.path.clone(),
            line: unit.line_col(offset).0,
            source_api: catalog.sources[src].clone(),
            sink_api: catalog.sinks[sink].clone(),
        });
    }
    Ok(ToolReport {
        tool: tool.to_string(),
        detections: detections.into_iter().collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{model_from_sources, ClassificationTable};

    const CAT: &str = "<java.util.TimeZone: java.lang.String getDisplayName()> -> _SOURCE_\n\
                       <android.util.Log: int d(java.lang.String,java.lang.String)> -> _SINK_\n";

    fn run(src: &[(&str, &str)], cfg: &str) -> Vec<u32> {
        let model = model_from_sources(src.iter().copied(), &ClassificationTable::default());
        let config = AnalyzerConfig::preset(cfg, &model).unwrap();
        let report = analyze(&model, &SourceSinkCatalog::parse(CAT).unwrap(), &config, cfg).unwrap();
        report
            .detections
            .iter()
            .map(|d| match d {
                Detection::Flow { line, .. } => *line,
                Detection::Id(_) => unreachable!(),
            })
            .collect()
    }

    const ACT: &str = "package p;
import android.app.Activity;
public class A extends Activity {
    private String f;
    protected void onCreate(android.os.Bundle b) {
        String s = java.util.Calendar.getInstance().getTimeZone().getDisplayName();
        android.util.Log.d(\"leak-1\", s);
        f = s;
        runOnUiThread(new Runnable() {
            public void run() {
                String r = java.util.Calendar.getInstance().getTimeZone().getDisplayName();
                StringBuilder sb = new StringBuilder();
                sb.append(r);
                android.util.Log.d(\"leak-2\", sb.toString());
            }
        });
    }
    protected void onStart() {
        android.util.Log.d(\"leak-3\", f);
        android.util.Log.d(\"clean\", \"x\");
    }
}
";

    #[test]
    fn presets_differ_on_implicit_and_async_flows() {
        assert_eq!(run(&[("A.java", ACT)], "permissive"), vec![7, 14, 19]);
        assert_eq!(run(&[("A.java", ACT)], "flowdroid-like"), vec![7]);
    }

    #[test]
    fn fragments_are_unknown_to_flowdroid_like() {
        let frag = "package p;
public class F extends android.app.Fragment {
    public void onCreateView() {
        android.util.Log.d(\"leak-1\", java.util.Calendar.getInstance().getTimeZone().getDisplayName());
    }
}
";
        assert_eq!(run(&[("F.java", frag)], "permissive"), vec![4]);
        assert!(run(&[("F.java", frag)], "flowdroid-like").is_empty());
    }

    #[test]
    fn config_validation() {
        assert!(AnalyzerConfig::parse("known-callbacks = []\nmax-call-depth = 0\n").is_err());
        assert!(AnalyzerConfig::parse("known-callbacks = []\nbogus = 1\n").is_err());
        let c = AnalyzerConfig::parse("known-callbacks = [\"Activity\"]\nimplicit-calls = true\n").unwrap();
        assert!(c.implicit_calls && !c.async_pair_flows);
        assert!(c.knows("android.app.Activity"));
        assert!(!c.knows("android.app.XActivity"));
        let model = model_from_sources([("A.java", ACT)], &ClassificationTable::default());
        assert!(matches!(AnalyzerConfig::preset("nope", &model), Err(Error::Config(_))));
    }

    #[test]
    fn depth_bound_drops_far_sinks() {
        let src = "package p;
public class A extends android.app.Activity {
    protected void onCreate(android.os.Bundle b) { a(); }
    void a() { b(); }
    void b() { android.util.Log.d(\"leak-1\", java.util.Calendar.getInstance().getTimeZone().getDisplayName()); }
}
";
        let model = model_from_sources([("A.java", src)], &ClassificationTable::default());
        let cat = SourceSinkCatalog::parse(CAT).unwrap();
        let mut cfg = AnalyzerConfig::preset("permissive", &model).unwrap();
        assert_eq!(analyze(&model, &cat, &cfg, "t").unwrap().detections.len(), 1);
        cfg.max_call_depth = Some(1);
        assert!(analyze(&model, &cat, &cfg, "t").unwrap().detections.is_empty());
        cfg.max_call_depth = Some(2);
        assert_eq!(analyze(&model, &cat, &cfg, "t").unwrap().detections.len(), 1);
    }
}
