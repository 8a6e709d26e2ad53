//! Mutation schemes: where operator instances may be placed.

use std::collections::BTreeSet;
use std::fmt::{self, Write as _};
use std::str::FromStr;

use crate::model::{Anchor, CallbackKind, ClassId, CodeModel, MethodId, RegistrationKind};
use crate::operators::{Goal, SecurityOperator};
use crate::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MutationScheme {
    AndroidAbstractions,
    Reachability,
    TaintSplit,
    ComplexPath,
}

impl MutationScheme {
    pub const ALL: [MutationScheme; 4] = [
        MutationScheme::AndroidAbstractions,
        MutationScheme::Reachability,
        MutationScheme::TaintSplit,
        MutationScheme::ComplexPath,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MutationScheme::AndroidAbstractions => "android-abstractions",
            MutationScheme::Reachability => "reachability",
            MutationScheme::TaintSplit => "taint-split",
            MutationScheme::ComplexPath => "complex-path",
        }
    }
}

impl fmt::Display for MutationScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MutationScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        Self::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown scheme `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Category {
    LifecycleActivity,
    LifecycleFragment,
    UiListener,
    DynamicReceiver,
    NestedReceiver,
    XmlCallback,
    PlainMethod,
    TaintPair,
    ComplexPath,
}

impl Category {
    pub const ALL: [Category; 9] = [
        Category::LifecycleActivity,
        Category::LifecycleFragment,
        Category::UiListener,
        Category::DynamicReceiver,
        Category::NestedReceiver,
        Category::XmlCallback,
        Category::PlainMethod,
        Category::TaintPair,
        Category::ComplexPath,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::LifecycleActivity => "lifecycle-activity",
            Category::LifecycleFragment => "lifecycle-fragment",
            Category::UiListener => "ui-listener",
            Category::DynamicReceiver => "dynamic-receiver",
            Category::NestedReceiver => "nested-receiver",
            Category::XmlCallback => "xml-callback",
            Category::PlainMethod => "plain-method",
            Category::TaintPair => "taint-pair",
            Category::ComplexPath => "complex-path",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Category {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        Self::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown category `{s}`")))
    }
}

/// Code the mutator must generate before the operator can be placed.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SynthPlan {
    /// Register `levels` receivers, each inside the previous one's
    /// `onReceive`, starting in `host`; the mutant goes in the innermost.
    NestedReceiver { host: MethodId, levels: u8 },
    /// Add `public void <method>(android.view.View v)` to `class`.
    XmlHandler { class: ClassId, method: String },
}

impl SynthPlan {
    pub fn describe(&self, model: &CodeModel) -> String {
        match self {
            SynthPlan::NestedReceiver { host, levels } => format!(
                "create {levels} nested receiver(s) inside {}",
                model.method_label(*host)
            ),
            SynthPlan::XmlHandler { class, method } => format!(
                "create public void {method}(View v) in {}",
                model.class(*class).qualified_name
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InjectionPoint {
    pub point_id: usize,
    pub scheme: MutationScheme,
    pub category: Category,
    pub source_anchor: Anchor,
    /// Equal to `source_anchor` except for taint pairs.
    pub sink_anchor: Anchor,
    /// Method containing the source; `None` when the method is synthesized.
    pub source_method: Option<MethodId>,
    pub sink_method: Option<MethodId>,
    pub synth_plan: Option<SynthPlan>,
}

#[derive(Debug, Clone)]
pub struct Mip {
    pub scheme: MutationScheme,
    pub operator_id: String,
    pub points: Vec<InjectionPoint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SchemeConfig {
    /// Maximum distance between paired callbacks, counted among the
    /// callbacks a class defines.
    pub taint_adjacency: usize,
    /// Receivers in a nested chain, counting the existing one.
    pub nested_depth: u8,
}

impl Default for SchemeConfig {
    fn default() -> Self {
        SchemeConfig {
            taint_adjacency: 1,
            nested_depth: 2,
        }
    }
}

fn point(scheme: MutationScheme, category: Category, anchor: Anchor, method: Option<MethodId>) -> InjectionPoint {
    InjectionPoint {
        point_id: 0,
        scheme,
        category,
        source_anchor: anchor,
        sink_anchor: anchor,
        source_method: method,
        sink_method: method,
        synth_plan: None,
    }
}

pub fn derive_mip(model: &CodeModel, scheme: MutationScheme, op: &SecurityOperator, config: &SchemeConfig) -> Mip {
    let mut points = match scheme {
        MutationScheme::AndroidAbstractions => points_android(model, config),
        MutationScheme::Reachability => points_reachability(model),
        MutationScheme::TaintSplit if op.goal == Goal::DataLeak => points_taint_pairs(model, config),
        MutationScheme::ComplexPath if op.goal == Goal::DataLeak => points_reachability(model)
            .into_iter()
            .map(|p| InjectionPoint {
                scheme: MutationScheme::ComplexPath,
                category: Category::ComplexPath,
                ..p
            })
            .collect(),
        // Splitting or rebuilding a value only makes sense for string leaks.
        MutationScheme::TaintSplit | MutationScheme::ComplexPath => Vec::new(),
    };
    for p in &mut points {
        p.scheme = scheme;
    }
    points.sort_by(|a, b| {
        (a.source_anchor.unit, a.source_anchor.offset, a.category, a.sink_anchor.offset, &a.synth_plan).cmp(&(
            b.source_anchor.unit,
            b.source_anchor.offset,
            b.category,
            b.sink_anchor.offset,
            &b.synth_plan,
        ))
    });
    for (i, p) in points.iter_mut().enumerate() {
        p.point_id = i + 1;
    }
    Mip {
        scheme,
        operator_id: op.operator_id.clone(),
        points,
    }
}

/// One point at the start of every method.
pub fn points_reachability(model: &CodeModel) -> Vec<InjectionPoint> {
    model
        .methods
        .iter()
        .map(|m| point(MutationScheme::Reachability, Category::PlainMethod, m.body_entry, Some(m.id)))
        .collect()
}

pub fn points_android(model: &CodeModel, config: &SchemeConfig) -> Vec<InjectionPoint> {
    let scheme = MutationScheme::AndroidAbstractions;
    let mut out = Vec::new();
    for m in &model.methods {
        let category = match m.callback_kind {
            CallbackKind::Lifecycle if model.class(m.owner).kind.is_fragment() => Category::LifecycleFragment,
            CallbackKind::Lifecycle => Category::LifecycleActivity,
            CallbackKind::UiListener => Category::UiListener,
            CallbackKind::ReceiverOnReceive => Category::DynamicReceiver,
            CallbackKind::XmlDeclared => Category::XmlCallback,
            CallbackKind::None => continue,
        };
        out.push(point(scheme, category, m.body_entry, Some(m.id)));
    }
    if config.nested_depth >= 2 {
        for r in &model.registrations {
            if r.kind != RegistrationKind::DynamicReceiver {
                continue;
            }
            for &t in &r.targets {
                let host = model.method(t);
                out.push(InjectionPoint {
                    synth_plan: Some(SynthPlan::NestedReceiver {
                        host: t,
                        levels: config.nested_depth - 1,
                    }),
                    ..point(scheme, Category::NestedReceiver, host.body_entry, Some(t))
                });
            }
        }
    }
    let mut synthesized = BTreeSet::new();
    for h in model.xml_handlers.iter().filter(|h| h.resolved.is_empty()) {
        for &c in &h.hosts {
            let class = model.class(c);
            if !synthesized.insert((c, h.method.clone())) {
                continue;
            }
            let (line, column) = model.units[class.unit].line_col(class.body.end);
            let anchor = Anchor {
                unit: class.unit,
                offset: class.body.end,
                line,
                column,
            };
            out.push(InjectionPoint {
                source_method: None,
                sink_method: None,
                synth_plan: Some(SynthPlan::XmlHandler {
                    class: c,
                    method: h.method.clone(),
                }),
                ..point(scheme, Category::XmlCallback, anchor, None)
            });
        }
    }
    out
}

/// Same-class callback pairs `(cb1, cb2)` with `cb1` ordered before `cb2`
/// and at most `taint_adjacency` positions apart.
pub fn points_taint_pairs(model: &CodeModel, config: &SchemeConfig) -> Vec<InjectionPoint> {
    let mut out = Vec::new();
    for class in &model.classes {
        let mut ordered: Vec<(u8, MethodId)> = class
            .methods
            .iter()
            .filter_map(|&m| {
                let md = model.method(m);
                (md.is_callback() && md.callback_kind != CallbackKind::XmlDeclared)
                    .then_some(md.lifecycle_order?)
                    .map(|o| (o, m))
            })
            .collect();
        ordered.sort();
        ordered.dedup_by_key(|(o, _)| *o);
        for i in 0..ordered.len() {
            for j in i + 1..ordered.len().min(i + 1 + config.taint_adjacency) {
                let (src, sink) = (model.method(ordered[i].1), model.method(ordered[j].1));
                out.push(InjectionPoint {
                    point_id: 0,
                    scheme: MutationScheme::TaintSplit,
                    category: Category::TaintPair,
                    source_anchor: src.body_entry,
                    sink_anchor: sink.body_entry,
                    source_method: Some(src.id),
                    sink_method: Some(sink.id),
                    synth_plan: None,
                });
            }
        }
    }
    out
}

impl Mip {
    /// Line-oriented listing: point-id, scheme, category, anchors, plan.
    pub fn dump(&self, model: &CodeModel) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# scheme {} operator {} points {}", self.scheme, self.operator_id, self.points.len());
        for p in &self.points {
            let anchor = |a: &Anchor| format!("{}:{}:{}", model.units[a.unit].path, a.line, a.column);
            let _ = write!(
                out,
                "{}\t{}\t{}\t{}\t{}",
                p.point_id,
                p.scheme,
                p.category,
                anchor(&p.source_anchor),
                anchor(&p.sink_anchor)
            );
            if let Some(plan) = &p.synth_plan {
                let _ = write!(out, "\t{}", plan.describe(model));
            }
            out.push('\n');
        }
        out
    }
}
