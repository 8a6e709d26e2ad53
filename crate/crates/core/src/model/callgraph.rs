//! Intra-corpus call graph with explicit calls plus framework registration
//! edges (registrar → registered callback).

use std::collections::{BTreeSet, VecDeque};

use super::java::CallSite;
use super::{walk_stmts, ClassId, CodeModel, MethodDecl, MethodId, RegistrationKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EdgeKind {
    Call,
    Registration(RegistrationKind),
}

impl EdgeKind {
    pub fn is_implicit(self) -> bool {
        self == EdgeKind::Registration(RegistrationKind::ImplicitCall)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CallEdge {
    pub from: MethodId,
    pub to: MethodId,
    pub kind: EdgeKind,
    /// Offset of the call (or registering call) in the caller's unit.
    pub offset: usize,
}

#[derive(Debug, Clone, Default)]
pub struct CallGraph {
    pub edges: Vec<CallEdge>,
    out: Vec<Vec<usize>>,
    /// Call sites naming no corpus method.
    pub unresolved: usize,
}

impl CallGraph {
    pub fn successors(&self, m: MethodId) -> impl Iterator<Item = &CallEdge> {
        self.out
            .get(m.0)
            .into_iter()
            .flatten()
            .map(|&i| &self.edges[i])
    }

    /// Methods reachable from `roots` following edges accepted by `follow`,
    /// with the minimal number of hops to each.
    pub fn reachable(
        &self,
        roots: impl IntoIterator<Item = MethodId>,
        max_depth: Option<usize>,
        mut follow: impl FnMut(&CallEdge) -> bool,
    ) -> Vec<Option<usize>> {
        let mut depth = vec![None; self.out.len()];
        let mut queue = VecDeque::new();
        for r in roots {
            if depth[r.0].is_none() {
                depth[r.0] = Some(0);
                queue.push_back(r);
            }
        }
        while let Some(m) = queue.pop_front() {
            let d = depth[m.0].unwrap_or(0);
            if max_depth.is_some_and(|max| d >= max) {
                continue;
            }
            for e in self.successors(m) {
                if depth[e.to.0].is_none() && follow(e) {
                    depth[e.to.0] = Some(d + 1);
                    queue.push_back(e.to);
                }
            }
        }
        depth
    }
}

pub fn call_graph(model: &CodeModel) -> CallGraph {
    let mut edges = Vec::new();
    let mut unresolved = 0;
    for m in &model.methods {
        let mut calls: Vec<&CallSite> = Vec::new();
        walk_stmts(&m.stmts, &mut |s| calls.extend(s.facts.calls.iter()));
        for call in calls {
            let targets = resolve_call(model, m, call);
            if targets.is_empty() {
                unresolved += 1;
            }
            for to in targets {
                edges.push(CallEdge {
                    from: m.id,
                    to,
                    kind: EdgeKind::Call,
                    offset: call.offset,
                });
            }
        }
    }
    for r in &model.registrations {
        for &to in &r.targets {
            edges.push(CallEdge {
                from: r.registrar,
                to,
                kind: EdgeKind::Registration(r.kind),
                offset: r.call_offset,
            });
        }
    }
    edges.sort_by_key(|e| (e.from, e.offset, e.to, e.kind));
    edges.dedup();
    let mut out = vec![Vec::new(); model.methods.len()];
    for (i, e) in edges.iter().enumerate() {
        out[e.from.0].push(i);
    }
    CallGraph {
        edges,
        out,
        unresolved,
    }
}

/// The class followed by its corpus superclasses.
fn super_chain(model: &CodeModel, class: ClassId) -> Vec<ClassId> {
    let mut chain = vec![class];
    let mut cur = class;
    loop {
        let decl = model.class(cur);
        let package = model.units[decl.unit].java().and_then(|j| j.package.as_deref());
        let next = decl
            .supertypes
            .iter()
            .find_map(|s| super::resolve_corpus_class(&model.classes, s, cur, package));
        match next {
            Some(n) if !chain.contains(&n) => {
                chain.push(n);
                cur = n;
            }
            _ => return chain,
        }
    }
}

fn matching(model: &CodeModel, classes: &[ClassId], name: &str, arity: usize) -> Vec<MethodId> {
    for &c in classes {
        let found: Vec<MethodId> = model
            .class(c)
            .methods
            .iter()
            .copied()
            .filter(|&m| {
                let md = model.method(m);
                !md.is_constructor && md.name == name && md.arity() == arity
            })
            .collect();
        if !found.is_empty() {
            return found;
        }
    }
    Vec::new()
}

fn class_named(model: &CodeModel, simple: &str, from: ClassId) -> Option<ClassId> {
    let package = model.units[model.class(from).unit]
        .java()
        .and_then(|j| j.package.as_deref());
    let simple = simple.split('<').next().unwrap_or(simple);
    super::resolve_corpus_class(&model.classes, simple, ClassId(usize::MAX), package)
}

/// Declared type of a variable visible in `m`: parameter, local or field.
fn declared_type(model: &CodeModel, m: &MethodDecl, name: &str, at: usize) -> Option<String> {
    if let Some(p) = m.params.iter().find(|p| p.name == name) {
        return Some(p.ty.clone());
    }
    let mut local = None;
    walk_stmts(&m.stmts, &mut |s| {
        for l in &s.locals {
            if l.name == name && l.offset < at {
                local = Some(l.ty.clone());
            }
        }
    });
    if local.is_some() {
        return local;
    }
    let mut class = Some(m.owner);
    while let Some(c) = class {
        let decl = model.class(c);
        if let Some(f) = decl.fields.iter().find(|f| f.name == name) {
            return Some(f.ty.clone());
        }
        class = decl.outer;
    }
    None
}

fn resolve_call(model: &CodeModel, m: &MethodDecl, call: &CallSite) -> Vec<MethodId> {
    let arity = call.args.len();
    if let Some(ty) = call.name.strip_prefix("<init>") {
        let Some(c) = class_named(model, ty, m.owner) else { return Vec::new() };
        let ctors: Vec<MethodId> = model
            .class(c)
            .methods
            .iter()
            .copied()
            .filter(|&x| model.method(x).is_constructor)
            .collect();
        let exact: Vec<MethodId> = ctors
            .iter()
            .copied()
            .filter(|&x| model.method(x).arity() == arity)
            .collect();
        return if exact.is_empty() { ctors } else { exact };
    }
    let name = call.name.as_str();
    match call.receiver.as_deref() {
        None | Some("this") => {
            let mut class = Some(m.owner);
            while let Some(c) = class {
                let found = matching(model, &super_chain(model, c), name, arity);
                if !found.is_empty() {
                    return found;
                }
                class = model.class(c).outer;
            }
            Vec::new()
        }
        Some("super") => {
            let chain = super_chain(model, m.owner);
            matching(model, &chain[1..], name, arity)
        }
        Some(recv) => {
            if let Some(outer) = recv.strip_suffix(".this") {
                let mut class = Some(m.owner);
                while let Some(c) = class {
                    if model.class(c).simple_name.as_deref() == Some(outer) {
                        return matching(model, &super_chain(model, c), name, arity);
                    }
                    class = model.class(c).outer;
                }
                return Vec::new();
            }
            let is_ident = recv.chars().all(|c| c.is_alphanumeric() || c == '_' || c == '$');
            if is_ident {
                if let Some(ty) = declared_type(model, m, recv, call.offset) {
                    return match class_named(model, &ty, m.owner) {
                        Some(c) => matching(model, &super_chain(model, c), name, arity),
                        None => Vec::new(),
                    };
                }
                if let Some(c) = class_named(model, recv, m.owner) {
                    return matching(model, &super_chain(model, c), name, arity);
                }
            }
            let found: BTreeSet<MethodId> = model
                .methods
                .iter()
                .filter(|x| !x.is_constructor && x.name == name && x.arity() == arity)
                .map(|x| x.id)
                .collect();
            found.into_iter().collect()
        }
    }
}
