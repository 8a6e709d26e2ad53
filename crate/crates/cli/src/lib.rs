//! `leakmut` command-line front end.
//!
//! Every stage reads and writes plain files (ledger, id lists, trace logs,
//! detection reports), so an external detector can replace the built-in
//! toy analyzer at the `evaluate` step.
//!
//! Exit codes: 0 success, 1 corpus or runtime failure, 2 usage or
//! configuration error.

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use leakmut_core::analyzer::{analyze, AnalyzerConfig};
use leakmut_core::evaluator::{
    enclosing_method, funnel, survivors, synthesize_minimal, validate_minimal, ChainContext, ChainLimits, ToolReport,
};
use leakmut_core::exec_filter::{filter_executable, parse_ids, render_ids, ExecutionTrace, TraceFormat};
use leakmut_core::ledger::{parse_tag, MutantLedger, LEDGER_FILE};
use leakmut_core::model::{call_graph, model_from_sources, ClassificationTable, CodeModel, Corpus};
use leakmut_core::mutator::{check_output_dir, inject_all, run_id, write_output, MutateConfig};
use leakmut_core::operators::{
    bundled_operator, default_operator, load_operators, SecurityOperator, SourceSinkCatalog,
};
use leakmut_core::schemes::{derive_mip, Mip, MutationScheme, SchemeConfig};
use leakmut_core::Error;

/// Name of the run manifest written into a `mutate` output directory.
pub const MANIFEST_FILE: &str = "leakmut-manifest.toml";

#[derive(Debug, Parser)]
#[command(name = "leakmut", version, about = "Seed tagged data leaks into Android sources and audit detectors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Count and dump the injection points of each scheme.
    Profile(ProfileArgs),
    /// Inject every point and write the mutated tree plus its ledger.
    Mutate(MutateArgs),
    /// Split a ledger into executable and non-executable mutants.
    Filter(FilterArgs),
    /// Run the toy analyzer and print its detection report.
    Analyze(AnalyzeArgs),
    /// Compute survivors and flaw-class hypotheses.
    Evaluate(EvaluateArgs),
    /// Write a minimal example reproducing one survivor.
    Synth(SynthArgs),
    /// Print the injected/executable/undetected counts.
    Funnel(FunnelArgs),
}

#[derive(Debug, Clone, Copy, Default, ValueEnum)]
enum Format {
    #[default]
    Text,
    Records,
}

#[derive(Debug, Args)]
struct ModelArgs {
    /// Classification table replacing the bundled one.
    #[arg(long)]
    table: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SchemeArgs {
    /// `all` or a comma-separated list of scheme names.
    #[arg(long, default_value = "all")]
    schemes: String,
    /// Bundled operator id, or an operator file with an optional `#id`.
    #[arg(long)]
    operator: Option<String>,
    /// Source/sink catalog the operator must appear in.
    #[arg(long)]
    catalog: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    taint_adjacency: usize,
    #[arg(long, default_value_t = 2)]
    nested_depth: u8,
}

#[derive(Debug, Args)]
struct ProfileArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[command(flatten)]
    schemes: SchemeArgs,
    #[command(flatten)]
    model: ModelArgs,
    /// Directory for `mip-<scheme>.txt` dumps.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t)]
    format: Format,
}

#[derive(Debug, Args)]
struct MutateArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    schemes: SchemeArgs,
    #[command(flatten)]
    model: ModelArgs,
    /// Log a `leak-src-<id>` marker next to split sources.
    #[arg(long)]
    strict_pairs: bool,
    /// Free text recorded in the run manifest.
    #[arg(long)]
    seed_note: Option<String>,
}

#[derive(Debug, Args)]
struct TraceArgs {
    /// Runtime log; repeat to union several runs.
    #[arg(long)]
    trace: Vec<PathBuf>,
    #[arg(long, default_value = "any")]
    trace_format: String,
    /// Taint-pair mutants also need their source marker before the sink.
    #[arg(long)]
    strict_pairs: bool,
}

#[derive(Debug, Args)]
struct FilterArgs {
    /// Ledger file, or a mutate output directory.
    #[arg(long)]
    ledger: PathBuf,
    #[command(flatten)]
    trace: TraceArgs,
    /// Directory for `executable.txt` and `non-executable.txt`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct DetectorArgs {
    /// Built-in analyzer preset.
    #[arg(long, conflicts_with = "config")]
    toy: Option<String>,
    /// Analyzer configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    catalog: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[command(flatten)]
    detector: DetectorArgs,
    #[command(flatten)]
    model: ModelArgs,
    /// Report file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ChainArgs {
    #[arg(long, default_value_t = ChainLimits::default().max_paths)]
    max_paths: usize,
    #[arg(long, default_value_t = ChainLimits::default().max_depth)]
    max_depth: usize,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    /// Mutate output directory.
    #[arg(long)]
    mutated: PathBuf,
    /// Ledger file; defaults to the one inside `--mutated`.
    #[arg(long)]
    ledger: Option<PathBuf>,
    /// Executable id list written by `filter`.
    #[arg(long)]
    executable: Option<PathBuf>,
    #[command(flatten)]
    trace: TraceArgs,
    /// Detection report of an external tool.
    #[arg(long, conflicts_with_all = ["toy", "config"])]
    report: Option<PathBuf>,
    #[command(flatten)]
    detector: DetectorArgs,
    #[command(flatten)]
    chains: ChainArgs,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, value_enum, default_value_t)]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long)]
    mutated: PathBuf,
    #[arg(long)]
    ledger: Option<PathBuf>,
    /// Mutant id, as `N` or `leak-N`.
    #[arg(long)]
    id: String,
    /// Operator override; defaults to the ledger's operator id.
    #[arg(long)]
    operator: Option<String>,
    #[arg(long, default_value = "minimal")]
    out: PathBuf,
    /// Trace used to prefer chains consistent with observed order.
    #[arg(long)]
    trace: Vec<PathBuf>,
    #[arg(long, default_value = "any")]
    trace_format: String,
    /// Re-analyze the example with these presets and print verdicts.
    #[arg(long)]
    validate: Vec<String>,
    #[arg(long)]
    catalog: Option<PathBuf>,
    #[command(flatten)]
    chains: ChainArgs,
    #[command(flatten)]
    model: ModelArgs,
}

#[derive(Debug, Args)]
struct FunnelArgs {
    #[arg(long)]
    ledger: PathBuf,
    #[arg(long)]
    executable: PathBuf,
    #[arg(long)]
    report: PathBuf,
}

/// Record of one `mutate` invocation.
#[derive(Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct RunManifest {
    pub run_id: String,
    pub command: String,
    pub corpus: String,
    pub schemes: Vec<String>,
    pub operator: String,
    pub catalog: Option<String>,
    pub out_dir: String,
    pub started: u64,
    pub finished: Option<u64>,
    pub seed_note: Option<String>,
}

impl RunManifest {
    fn write(&self, dir: &Path) -> Result<(), Error> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let text = toml::to_string(self).map_err(|e| Error::Config(format!("manifest: {e}")))?;
        let path = dir.join(MANIFEST_FILE);
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }
}

#[derive(Debug)]
enum Failure {
    /// Usage or configuration problem.
    Usage(String),
    /// Every corpus unit failed, or another runtime error.
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::NotFound(_) => Failure::Usage(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

type CliResult<T> = Result<T, Failure>;

fn now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

/// Runs one command line; returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(err, "{text}");
                2
            } else {
                let _ = write!(out, "{text}");
                0
            };
        }
    };
    let result = match cli.command {
        Command::Profile(a) => cmd_profile(a, out),
        Command::Mutate(a) => cmd_mutate(a, out),
        Command::Filter(a) => cmd_filter(a, out),
        Command::Analyze(a) => cmd_analyze(a, out),
        Command::Evaluate(a) => cmd_evaluate(a, out),
        Command::Synth(a) => cmd_synth(a, out),
        Command::Funnel(a) => cmd_funnel(a, out),
    };
    match result {
        Ok(()) => 0,
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            2
        }
        Err(Failure::Runtime(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            1
        }
    }
}

fn emit(out: &mut dyn Write, text: &str) -> CliResult<()> {
    out.write_all(text.as_bytes())
        .map_err(|e| Failure::Runtime(format!("writing output: {e}")))
}

fn write_file(path: &Path, text: &str) -> CliResult<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))?;
    Ok(())
}

fn load_table(args: &ModelArgs) -> CliResult<ClassificationTable> {
    Ok(match &args.table {
        Some(p) => ClassificationTable::load(p)?,
        None => ClassificationTable::default(),
    })
}

fn load_catalog(path: Option<&Path>) -> CliResult<SourceSinkCatalog> {
    Ok(match path {
        Some(p) => SourceSinkCatalog::load(p)?,
        None => SourceSinkCatalog::bundled(),
    })
}

/// `ID`, `FILE` (exactly one operator) or `FILE#ID`.
fn load_operator(spec: Option<&str>) -> CliResult<SecurityOperator> {
    let Some(spec) = spec else { return Ok(default_operator()) };
    let (file, id) = match spec.rsplit_once('#') {
        Some((f, i)) => (f, Some(i)),
        None => (spec, None),
    };
    let path = Path::new(file);
    if path.is_file() {
        let ops = load_operators(path)?;
        return match id {
            Some(id) => ops
                .into_iter()
                .find(|o| o.operator_id == id)
                .ok_or_else(|| Failure::Usage(format!("operator {id} not in {file}"))),
            None if ops.len() == 1 => Ok(ops.into_iter().next().expect("one operator")),
            None => Err(Failure::Usage(format!("{file} defines several operators; select one with `#id`"))),
        };
    }
    if id.is_none() {
        if let Some(op) = bundled_operator(spec) {
            return Ok(op);
        }
    }
    Err(Failure::Usage(format!("no bundled operator or operator file `{spec}`")))
}

fn parse_schemes(text: &str) -> CliResult<Vec<MutationScheme>> {
    if text.trim() == "all" {
        return Ok(MutationScheme::ALL.to_vec());
    }
    let mut out = Vec::new();
    for name in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let s: MutationScheme = name.parse()?;
        if !out.contains(&s) {
            out.push(s);
        }
    }
    if out.is_empty() {
        return Err(Failure::Usage("no schemes selected".into()));
    }
    Ok(out)
}

/// Loads and models a corpus. Fails only when nothing in it parsed.
fn load_corpus(root: &Path, table: &ClassificationTable) -> CliResult<(Corpus, CodeModel)> {
    let corpus = Corpus::load(root)?;
    let model = corpus.model(table);
    if model.units.is_empty() && !model.skipped.is_empty() {
        let first = &model.skipped[0];
        return Err(Failure::Runtime(format!(
            "no unit of {} parsed ({} failures; first: {first})",
            root.display(),
            model.skipped.len()
        )));
    }
    Ok((corpus, model))
}

fn derive_mips(model: &CodeModel, args: &SchemeArgs) -> CliResult<(SecurityOperator, Vec<Mip>)> {
    let schemes = parse_schemes(&args.schemes)?;
    let op = load_operator(args.operator.as_deref())?;
    if let Some(path) = &args.catalog {
        op.check_catalog(&load_catalog(Some(path))?)?;
    }
    if args.nested_depth == 0 {
        return Err(Failure::Usage("--nested-depth must be at least 1".into()));
    }
    let config = SchemeConfig {
        taint_adjacency: args.taint_adjacency,
        nested_depth: args.nested_depth,
    };
    let mips = schemes.iter().map(|s| derive_mip(model, *s, &op, &config)).collect();
    Ok((op, mips))
}

fn cmd_profile(a: ProfileArgs, out: &mut dyn Write) -> CliResult<()> {
    let table = load_table(&a.model)?;
    let (_, model) = load_corpus(&a.corpus, &table)?;
    let (_, mips) = derive_mips(&model, &a.schemes)?;
    let mut text = String::new();
    for mip in &mips {
        match a.format {
            Format::Text => text.push_str(&format!("{}: {} points\n", mip.scheme, mip.points.len())),
            Format::Records => text.push_str(&format!("mip\t{}\t{}\n", mip.scheme, mip.points.len())),
        }
        if let Some(dir) = &a.out {
            write_file(&dir.join(format!("mip-{}.txt", mip.scheme)), &mip.dump(&model))?;
        }
    }
    for d in &model.skipped {
        text.push_str(&format!("skipped: {d}\n"));
    }
    emit(out, &text)
}

fn cmd_mutate(a: MutateArgs, out: &mut dyn Write) -> CliResult<()> {
    let started = now();
    let table = load_table(&a.model)?;
    let (corpus, model) = load_corpus(&a.corpus, &table)?;
    let (op, mips) = derive_mips(&model, &a.schemes)?;
    check_output_dir(&corpus, &a.out)?;
    let config = MutateConfig {
        strict_pairs: a.strict_pairs,
    };
    let sha = corpus.fingerprint();
    let mut manifest = RunManifest {
        run_id: run_id(&sha, &op, &mips, &config),
        command: "mutate".into(),
        corpus: a.corpus.display().to_string(),
        schemes: mips.iter().map(|m| m.scheme.to_string()).collect(),
        operator: a.schemes.operator.clone().unwrap_or_else(|| op.operator_id.clone()),
        catalog: a.schemes.catalog.as_ref().map(|p| p.display().to_string()),
        out_dir: a.out.display().to_string(),
        started,
        finished: None,
        seed_note: a.seed_note.clone(),
    };
    manifest.write(&a.out)?;
    let (tree, ledger) = inject_all(&model, &mips, &op, &sha, &config)?;
    write_output(&corpus, &tree, &ledger, &a.out)?;
    manifest.finished = Some(now());
    manifest.write(&a.out)?;
    let mut text = format!("injected: {}\n", ledger.len());
    for (scheme, n) in ledger.scheme_counts() {
        text.push_str(&format!("  {scheme}: {n}\n"));
    }
    text.push_str(&format!("run-id: {}\n", ledger.run_id));
    for d in &model.skipped {
        text.push_str(&format!("skipped: {d}\n"));
    }
    emit(out, &text)
}

fn ledger_path(p: &Path) -> PathBuf {
    if p.is_dir() {
        p.join(LEDGER_FILE)
    } else {
        p.to_path_buf()
    }
}

fn load_traces(paths: &[PathBuf], format: &str) -> CliResult<ExecutionTrace> {
    let format: TraceFormat = format.parse()?;
    let traces = paths
        .iter()
        .map(|p| ExecutionTrace::load(p, format))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ExecutionTrace::union(traces))
}

fn cmd_filter(a: FilterArgs, out: &mut dyn Write) -> CliResult<()> {
    if a.trace.trace.is_empty() {
        return Err(Failure::Usage("filter needs at least one --trace file".into()));
    }
    let ledger = MutantLedger::load(&ledger_path(&a.ledger))?;
    let trace = load_traces(&a.trace.trace, &a.trace.trace_format)?;
    let part = filter_executable(&ledger, &trace, a.trace.strict_pairs);
    if let Some(dir) = &a.out {
        write_file(&dir.join("executable.txt"), &render_ids(&part.executable))?;
        write_file(&dir.join("non-executable.txt"), &render_ids(&part.non_executable))?;
    }
    let n = ledger.len();
    let mut text = format!("executable: {} / {n}\n", part.executable.len());
    text.push_str(&format!(
        "non-executable: {} ({})\n",
        part.non_executable.len(),
        leakmut_core::evaluator::format_rate(part.non_executable.len(), n)
    ));
    if !part.unknown_tags.is_empty() {
        let tags: Vec<&str> = part.unknown_tags.iter().map(String::as_str).collect();
        text.push_str(&format!("unknown tags: {}\n", tags.join(" ")));
    }
    emit(out, &text)
}

fn detector_config(args: &DetectorArgs, model: &CodeModel) -> CliResult<(AnalyzerConfig, String)> {
    match (&args.toy, &args.config) {
        (Some(name), _) => Ok((AnalyzerConfig::preset(name, model)?, name.clone())),
        (None, Some(path)) => {
            let name = path
                .file_stem()
                .map_or("config".to_string(), |s| s.to_string_lossy().into_owned());
            Ok((AnalyzerConfig::load(path)?, name))
        }
        (None, None) => Err(Failure::Usage("select a detector with --toy <preset> or --config <file>".into())),
    }
}

fn cmd_analyze(a: AnalyzeArgs, out: &mut dyn Write) -> CliResult<()> {
    let table = load_table(&a.model)?;
    let (_, model) = load_corpus(&a.corpus, &table)?;
    let (config, tool) = detector_config(&a.detector, &model)?;
    let catalog = load_catalog(a.detector.catalog.as_deref())?;
    let report = analyze(&model, &catalog, &config, &tool)?;
    match &a.out {
        Some(p) => write_file(p, &report.render()),
        None => emit(out, &report.render()),
    }
}

fn limits(args: &ChainArgs) -> CliResult<ChainLimits> {
    if args.max_paths == 0 || args.max_depth == 0 {
        return Err(Failure::Usage("--max-paths and --max-depth must be positive".into()));
    }
    Ok(ChainLimits {
        max_paths: args.max_paths,
        max_depth: args.max_depth,
    })
}

fn cmd_evaluate(a: EvaluateArgs, out: &mut dyn Write) -> CliResult<()> {
    let ledger_file = a.ledger.clone().unwrap_or_else(|| a.mutated.join(LEDGER_FILE));
    let ledger = MutantLedger::load(&ledger_file)?;
    let table = load_table(&a.model)?;
    let (_, model) = load_corpus(&a.mutated, &table)?;
    let trace = if a.trace.trace.is_empty() {
        None
    } else {
        Some(load_traces(&a.trace.trace, &a.trace.trace_format)?)
    };
    let executable: BTreeSet<u32> = match (&a.executable, &trace) {
        (Some(p), _) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            parse_ids(&text)?
        }
        (None, Some(t)) => filter_executable(&ledger, t, a.trace.strict_pairs).executable,
        (None, None) => return Err(Failure::Usage("evaluate needs --executable or --trace".into())),
    };
    let report = match &a.report {
        Some(p) => ToolReport::load(p)?,
        None => {
            let (config, tool) = detector_config(&a.detector, &model)?;
            let catalog = load_catalog(a.detector.catalog.as_deref())?;
            analyze(&model, &catalog, &config, &tool)?
        }
    };
    let mut survival = survivors(&ledger, &executable, &report)?;
    let graph = call_graph(&model);
    let mut ctx = ChainContext::new(&model, &graph, limits(&a.chains)?);
    if let Some(t) = &trace {
        ctx = ctx.with_execution_order(&ledger, t);
    }
    survival.classify(&ledger, &ctx);
    let text = match a.format {
        Format::Text => survival.render_table(),
        Format::Records => survival.render_records(&ledger),
    };
    match &a.out {
        Some(p) => write_file(p, &text),
        None => emit(out, &text),
    }
}

fn cmd_synth(a: SynthArgs, out: &mut dyn Write) -> CliResult<()> {
    let ledger_file = a.ledger.clone().unwrap_or_else(|| a.mutated.join(LEDGER_FILE));
    let ledger = MutantLedger::load(&ledger_file)?;
    let id = parse_tag(&a.id)
        .or_else(|| a.id.parse().ok())
        .ok_or_else(|| Failure::Usage(format!("`{}` is not a mutant id", a.id)))?;
    let mutant = ledger
        .get(id)
        .ok_or_else(|| Failure::Usage(format!("mutant {id} is not in {}", ledger_file.display())))?;
    let op = match &a.operator {
        Some(spec) => load_operator(Some(spec))?,
        None => bundled_operator(&mutant.operator_id).ok_or_else(|| {
            Failure::Usage(format!(
                "operator {} is not bundled; pass --operator",
                mutant.operator_id
            ))
        })?,
    };
    let table = load_table(&a.model)?;
    let (_, model) = load_corpus(&a.mutated, &table)?;
    let graph = call_graph(&model);
    let mut ctx = ChainContext::new(&model, &graph, limits(&a.chains)?);
    if !a.trace.is_empty() {
        ctx = ctx.with_execution_order(&ledger, &load_traces(&a.trace, &a.trace_format)?);
    }
    let target = enclosing_method(&model, mutant)?;
    let chain = ctx.call_chains(target).into_iter().next().ok_or_else(|| {
        Failure::Runtime(format!(
            "no entry-point chain reaches {}",
            model.method_label(target)
        ))
    })?;
    let example = synthesize_minimal(&model, &chain, mutant, &op)?;
    let written = example.write(&a.out)?;
    let mut text = String::new();
    for p in &written {
        text.push_str(&format!("{}\n", p.display()));
    }
    text.push_str(&format!("chain: {}\n", chain.render(&model)));
    if !a.validate.is_empty() {
        let catalog = load_catalog(a.catalog.as_deref())?;
        let synth_model = model_from_sources(example.units(), &table);
        for preset in &a.validate {
            let config = AnalyzerConfig::preset(preset, &synth_model)?;
            let report = analyze(&synth_model, &catalog, &config, preset)?;
            let verdict = validate_minimal(&example, &report);
            text.push_str(&format!("validate {preset}: {}\n", verdict.as_str()));
        }
    }
    emit(out, &text)
}

fn cmd_funnel(a: FunnelArgs, out: &mut dyn Write) -> CliResult<()> {
    let ledger = MutantLedger::load(&ledger_path(&a.ledger))?;
    let text = std::fs::read_to_string(&a.executable).map_err(|e| Error::io(&a.executable, e))?;
    let executable = parse_ids(&text)?;
    let report = ToolReport::load(&a.report)?;
    let f = funnel(&ledger, &executable, &report)?;
    emit(out, &f.render())
}
