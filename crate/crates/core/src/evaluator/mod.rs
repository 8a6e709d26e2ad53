//! Survivor computation, survival statistics, call chains and flaw-class
//! hypotheses for a tool's detection report.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;

use crate::exec_filter::execution_order;
use crate::exec_filter::ExecutionTrace;
use crate::ledger::{Mutant, MutantLedger};
use crate::model::{CallEdge, CallGraph, ClassId, CodeModel, EdgeKind, MethodId};
use crate::schemes::Category;
use crate::{Error, Result};

pub mod minimal;
pub mod report;

pub use minimal::{synthesize_minimal, validate_minimal, MinimalExample, Verdict};
pub use report::{Detection, ToolReport};

/// Undetected share in tenths of a percent, rounded half-up.
pub fn rate_tenths(undetected: usize, executable: usize) -> Option<u64> {
    if executable == 0 {
        return None;
    }
    let (u, e) = (undetected as u64, executable as u64);
    Some((2 * u * 1000 + e) / (2 * e))
}

/// `48.7%`, or `n/a` for an empty denominator.
pub fn format_rate(undetected: usize, executable: usize) -> String {
    match rate_tenths(undetected, executable) {
        Some(t) => format!("{}.{}%", t / 10, t % 10),
        None => "n/a".to_string(),
    }
}

/// Injected → executable → undetected counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Funnel {
    pub injected: usize,
    pub executable: usize,
    pub undetected: usize,
}

impl Funnel {
    pub fn new(injected: usize, executable: usize, undetected: usize) -> Result<Funnel> {
        if injected < executable || executable < undetected {
            return Err(Error::Consistency(format!(
                "funnel must not grow: injected {injected}, executable {executable}, undetected {undetected}"
            )));
        }
        Ok(Funnel {
            injected,
            executable,
            undetected,
        })
    }

    pub fn survival_rate(&self) -> String {
        format_rate(self.undetected, self.executable)
    }

    pub fn render(&self) -> String {
        format!(
            "injected: {}\nexecutable: {}\nundetected: {}\nsurvival rate: {}\n",
            self.injected,
            self.executable,
            self.undetected,
            self.survival_rate()
        )
    }
}

/// Funnel for a ledger, its executable subset and a report.
pub fn funnel(ledger: &MutantLedger, executable: &BTreeSet<u32>, report: &ToolReport) -> Result<Funnel> {
    let s = survivors(ledger, executable, report)?;
    Funnel::new(ledger.len(), s.executable.len(), s.undetected.len())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FlawClass {
    MissingCallbacks,
    MissingImplicitCalls,
    AnonymousClasses,
    AsyncMethods,
    Unclassified,
}

impl FlawClass {
    pub const ALL: [FlawClass; 5] = [
        FlawClass::MissingCallbacks,
        FlawClass::MissingImplicitCalls,
        FlawClass::AnonymousClasses,
        FlawClass::AsyncMethods,
        FlawClass::Unclassified,
    ];

    pub fn code(self) -> &'static str {
        match self {
            FlawClass::MissingCallbacks => "FC1",
            FlawClass::MissingImplicitCalls => "FC2",
            FlawClass::AnonymousClasses => "FC3",
            FlawClass::AsyncMethods => "FC4",
            FlawClass::Unclassified => "unclassified",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            FlawClass::MissingCallbacks => "missing callbacks",
            FlawClass::MissingImplicitCalls => "missing implicit calls",
            FlawClass::AnonymousClasses => "anonymous classes",
            FlawClass::AsyncMethods => "asynchronous methods",
            FlawClass::Unclassified => "no hypothesis",
        }
    }
}

impl std::fmt::Display for FlawClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CategoryStats {
    pub executable: usize,
    pub undetected: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SurvivalReport {
    pub tool: String,
    pub injected: usize,
    pub executable: BTreeSet<u32>,
    pub detected: BTreeSet<u32>,
    pub undetected: BTreeSet<u32>,
    /// Detections naming no ledger mutant, or several.
    pub unresolved: usize,
    pub categories: BTreeMap<Category, CategoryStats>,
    /// Survivor → flaw class, once classified.
    pub hypotheses: BTreeMap<u32, FlawClass>,
}

/// Ledger mutant a detection refers to: explicit id, else the mutant whose
/// sink sits at (file, line), else the unique mutant with that file and
/// source/sink pair.
pub fn resolve_detection(ledger: &MutantLedger, d: &Detection) -> Option<u32> {
    match d {
        Detection::Id(id) => ledger.get(*id).map(|m| m.id),
        Detection::Flow {
            file,
            line,
            source_api,
            sink_api,
        } => {
            let unique = |mut it: Box<dyn Iterator<Item = &Mutant> + '_>| {
                let first = it.next()?;
                it.next().is_none().then_some(first.id)
            };
            let at_line = Box::new(ledger.mutants.iter().filter(|m| m.file == *file && m.sink_line == *line));
            if ledger.mutants.iter().any(|m| m.file == *file && m.sink_line == *line) {
                return unique(at_line);
            }
            unique(Box::new(ledger.mutants.iter().filter(|m| {
                m.file == *file && m.source_api == *source_api && m.sink_api == *sink_api
            })))
        }
    }
}

pub fn survivors(ledger: &MutantLedger, executable: &BTreeSet<u32>, report: &ToolReport) -> Result<SurvivalReport> {
    if let Some(bad) = executable.iter().find(|&&id| ledger.get(id).is_none()) {
        return Err(Error::Consistency(format!("executable id {bad} is not in the ledger")));
    }
    let mut hit = BTreeSet::new();
    let mut unresolved = 0;
    for d in &report.detections {
        match resolve_detection(ledger, d) {
            Some(id) => {
                hit.insert(id);
            }
            None => unresolved += 1,
        }
    }
    let detected: BTreeSet<u32> = executable.intersection(&hit).copied().collect();
    let undetected: BTreeSet<u32> = executable.difference(&hit).copied().collect();
    let mut categories: BTreeMap<Category, CategoryStats> = BTreeMap::new();
    for &id in executable {
        let m = ledger.get(id).expect("checked above");
        let s = categories.entry(m.category).or_default();
        s.executable += 1;
        if undetected.contains(&id) {
            s.undetected += 1;
        }
    }
    Ok(SurvivalReport {
        tool: report.tool.clone(),
        injected: ledger.len(),
        executable: executable.clone(),
        detected,
        undetected,
        unresolved,
        categories,
        hypotheses: BTreeMap::new(),
    })
}

impl SurvivalReport {
    pub fn funnel(&self) -> Funnel {
        Funnel {
            injected: self.injected,
            executable: self.executable.len(),
            undetected: self.undetected.len(),
        }
    }

    /// Classifies every survivor against the mutated-tree model.
    pub fn classify(&mut self, ledger: &MutantLedger, ctx: &ChainContext<'_>) {
        self.hypotheses = self
            .undetected
            .iter()
            .filter_map(|&id| ledger.get(id))
            .map(|m| (m.id, classify_flaw(ctx, m)))
            .collect();
    }

    pub fn by_flaw_class(&self) -> BTreeMap<FlawClass, Vec<u32>> {
        let mut out: BTreeMap<FlawClass, Vec<u32>> = BTreeMap::new();
        for (&id, &fc) in &self.hypotheses {
            out.entry(fc).or_default().push(id);
        }
        out
    }

    pub fn render_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "tool: {}", self.tool);
        out.push_str(&self.funnel().render());
        let _ = writeln!(out, "unresolved detections: {}", self.unresolved);
        let _ = writeln!(out);
        let _ = writeln!(out, "{:<20} {:>10} {:>10} {:>8}", "category", "executable", "undetected", "rate");
        for (c, s) in &self.categories {
            let _ = writeln!(
                out,
                "{:<20} {:>10} {:>10} {:>8}",
                c.as_str(),
                s.executable,
                s.undetected,
                format_rate(s.undetected, s.executable)
            );
        }
        if !self.hypotheses.is_empty() {
            let _ = writeln!(out);
            let _ = writeln!(out, "flaw-class hypotheses:");
            for (fc, ids) in self.by_flaw_class() {
                let tags: Vec<String> = ids.iter().map(|i| format!("leak-{i}")).collect();
                let _ = writeln!(out, "  {} {} ({}): {}", fc.code(), fc.title(), ids.len(), tags.join(" "));
            }
        }
        out
    }

    /// Tab-separated records: `funnel`, `category` and `survivor` lines.
    pub fn render_records(&self, ledger: &MutantLedger) -> String {
        let mut out = String::new();
        let f = self.funnel();
        let _ = writeln!(out, "tool\t{}", self.tool);
        let _ = writeln!(out, "funnel\tinjected\t{}", f.injected);
        let _ = writeln!(out, "funnel\texecutable\t{}", f.executable);
        let _ = writeln!(out, "funnel\tundetected\t{}", f.undetected);
        let _ = writeln!(out, "survival-rate\t{}", f.survival_rate());
        let _ = writeln!(out, "unresolved\t{}", self.unresolved);
        for (c, s) in &self.categories {
            let _ = writeln!(out, "category\t{c}\t{}\t{}", s.executable, s.undetected);
        }
        for &id in &self.undetected {
            let Some(m) = ledger.get(id) else { continue };
            let fc = self.hypotheses.get(&id).map_or("-", |f| f.code());
            let _ = writeln!(out, "survivor\t{id}\t{}\t{fc}\t{}\t{}", m.category, m.file, m.sink_line);
        }
        out
    }
}

/// One entry-point→method path, as methods plus the edges between them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CallChain {
    pub methods: Vec<MethodId>,
    pub edges: Vec<CallEdge>,
}

impl CallChain {
    pub fn crosses_implicit(&self) -> bool {
        self.edges.iter().any(|e| e.kind.is_implicit())
    }

    pub fn render(&self, model: &CodeModel) -> String {
        let mut out = model.method_label(self.methods[0]);
        for (e, m) in self.edges.iter().zip(&self.methods[1..]) {
            let arrow = match e.kind {
                EdgeKind::Call => " -> ".to_string(),
                EdgeKind::Registration(k) => format!(" -[{}]-> ", k.as_str()),
            };
            out.push_str(&arrow);
            out.push_str(&model.method_label(*m));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChainLimits {
    pub max_paths: usize,
    /// Maximum number of edges in a chain.
    pub max_depth: usize,
}

impl Default for ChainLimits {
    fn default() -> Self {
        ChainLimits {
            max_paths: 32,
            max_depth: 12,
        }
    }
}

/// Shared inputs for chain enumeration and classification over one model.
pub struct ChainContext<'a> {
    pub model: &'a CodeModel,
    pub graph: &'a CallGraph,
    pub limits: ChainLimits,
    nested: HashSet<(MethodId, ClassId)>,
    /// Method → first trace position of a mutant inside it.
    positions: HashMap<MethodId, usize>,
}

impl<'a> ChainContext<'a> {
    pub fn new(model: &'a CodeModel, graph: &'a CallGraph, limits: ChainLimits) -> Self {
        let nested = model
            .registrations
            .iter()
            .filter(|r| model.is_nested_registration(r))
            .map(|r| (r.registrar, r.registered))
            .collect();
        ChainContext {
            model,
            graph,
            limits,
            nested,
            positions: HashMap::new(),
        }
    }

    /// Ranks chains consistent with the order in which mutants inside their
    /// methods were first observed.
    pub fn with_execution_order(mut self, ledger: &MutantLedger, trace: &ExecutionTrace) -> Self {
        for (pos, id) in execution_order(trace).into_iter().enumerate() {
            let Some(m) = ledger.get(id) else { continue };
            if let Some(method) = self.model.method_at_line(&m.file, m.sink_line) {
                self.positions.entry(method).or_insert(pos);
            }
        }
        self
    }

    pub fn is_nested_edge(&self, e: &CallEdge) -> bool {
        matches!(e.kind, EdgeKind::Registration(_))
            && self.nested.contains(&(e.from, self.model.method(e.to).owner))
    }

    fn consistent(&self, chain: &CallChain) -> bool {
        let seen: Vec<usize> = chain.methods.iter().filter_map(|m| self.positions.get(m).copied()).collect();
        seen.windows(2).all(|w| w[0] <= w[1])
    }

    /// Simple paths from entry points to `target`, bounded by the limits.
    /// Chains consistent with the execution order come first, then shorter
    /// ones, then by method ids.
    pub fn call_chains(&self, target: MethodId) -> Vec<CallChain> {
        let mut found = Vec::new();
        // Cap the raw search so ranking has something to choose from.
        let budget = self.limits.max_paths.saturating_mul(8).max(self.limits.max_paths);
        for &entry in &self.model.entry_points {
            let mut methods = vec![entry];
            let mut edges = Vec::new();
            let mut on_path = HashSet::from([entry]);
            self.dfs(target, &mut methods, &mut edges, &mut on_path, &mut found, budget);
            if found.len() >= budget {
                break;
            }
        }
        let mut ranked: Vec<(bool, usize, Vec<usize>, CallChain)> = found
            .into_iter()
            .map(|c| (!self.consistent(&c), c.methods.len(), c.methods.iter().map(|m| m.0).collect(), c))
            .collect();
        ranked.sort_by(|a, b| (a.0, a.1, &a.2).cmp(&(b.0, b.1, &b.2)));
        ranked.into_iter().take(self.limits.max_paths).map(|r| r.3).collect()
    }

    fn dfs(
        &self,
        target: MethodId,
        methods: &mut Vec<MethodId>,
        edges: &mut Vec<CallEdge>,
        on_path: &mut HashSet<MethodId>,
        found: &mut Vec<CallChain>,
        budget: usize,
    ) {
        if found.len() >= budget {
            return;
        }
        let here = *methods.last().expect("non-empty path");
        if here == target {
            found.push(CallChain {
                methods: methods.clone(),
                edges: edges.clone(),
            });
            return;
        }
        if edges.len() >= self.limits.max_depth {
            return;
        }
        for e in self.graph.successors(here) {
            if on_path.contains(&e.to) {
                continue;
            }
            on_path.insert(e.to);
            methods.push(e.to);
            edges.push(e.clone());
            self.dfs(target, methods, edges, on_path, found, budget);
            edges.pop();
            methods.pop();
            on_path.remove(&e.to);
        }
    }

    /// Whether `m` belongs to an anonymous class registered from inside
    /// another callback.
    fn in_nested_anonymous(&self, m: MethodId) -> bool {
        let owner = self.model.method(m).owner;
        self.model
            .registrations
            .iter()
            .any(|r| r.registered == owner && self.nested.contains(&(r.registrar, r.registered)))
    }
}

/// Flaw-class hypothesis for a survivor.
///
/// Taint pairs point at asynchronous-callback modeling and nested receivers
/// (or code inside an anonymous class registered from another callback) at
/// anonymous-class modeling. Other callback placements point at missing
/// callbacks. Plain-method survivors are judged by their call chains: all
/// crossing an implicit edge suggests missing implicit calls, all crossing a
/// nested registration suggests anonymous classes, anything else missing
/// callbacks; no chain at all leaves them unclassified.
pub fn classify_flaw(ctx: &ChainContext<'_>, mutant: &Mutant) -> FlawClass {
    match mutant.category {
        Category::TaintPair => return FlawClass::AsyncMethods,
        Category::NestedReceiver => return FlawClass::AnonymousClasses,
        _ => {}
    }
    let Some(method) = ctx.model.method_at_line(&mutant.file, mutant.sink_line) else {
        return FlawClass::Unclassified;
    };
    if ctx.in_nested_anonymous(method) {
        return FlawClass::AnonymousClasses;
    }
    let callback_category = matches!(
        mutant.category,
        Category::LifecycleActivity
            | Category::LifecycleFragment
            | Category::UiListener
            | Category::XmlCallback
            | Category::DynamicReceiver
    );
    if callback_category || ctx.model.method(method).is_callback() {
        return FlawClass::MissingCallbacks;
    }
    let chains = ctx.call_chains(method);
    if chains.is_empty() {
        return FlawClass::Unclassified;
    }
    if chains.iter().all(CallChain::crosses_implicit) {
        FlawClass::MissingImplicitCalls
    } else if chains.iter().all(|c| c.edges.iter().any(|e| ctx.is_nested_edge(e))) {
        FlawClass::AnonymousClasses
    } else {
        FlawClass::MissingCallbacks
    }
}

/// Method enclosing a mutant's sink in the mutated-tree model.
pub fn enclosing_method(model: &CodeModel, mutant: &Mutant) -> Result<MethodId> {
    model
        .method_at_line(&mutant.file, mutant.sink_line)
        .ok_or_else(|| Error::NotFound(format!("no method encloses {}:{}", mutant.file, mutant.sink_line)))
}
