//! Acceptance suite. Prints one line per criterion and exits non-zero when
//! any criterion fails.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;
use leakmut_core::analyzer::{analyze, AnalyzerConfig, FLOWDROID_MISSING};
use leakmut_core::evaluator::survivors;
use leakmut_core::exec_filter::{filter_executable, ExecutionTrace, TraceFormat};
use leakmut_core::ledger::{tag_for, Mutant, MutantLedger};
use leakmut_core::model::{parse_unit, ClassificationTable, Corpus, UnitKind};
use leakmut_core::operators::{complex_path_eval, complex_path_rule, SourceSinkCatalog};
use leakmut_core::schemes::{Category, MutationScheme};

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(start: Instant, limit: Duration) -> Result<(), String> {
    let took = start.elapsed();
    check(took < limit, || format!("took {took:?}, limit {limit:?}"))
}

fn synthetic_ledger(n: u32) -> MutantLedger {
    MutantLedger {
        run_id: "synthetic".into(),
        corpus_sha256: "0".repeat(64),
        mutants: (1..=n)
            .map(|id| Mutant {
                id,
                scheme: MutationScheme::Reachability,
                category: Category::PlainMethod,
                operator_id: "calendar-log".into(),
                file: format!("src/p/C{}.java", id % 97),
                source_line: 10 + id,
                sink_line: 11 + id,
                source_api: "<java.util.TimeZone: java.lang.String getDisplayName()>".into(),
                sink_api: "<android.util.Log: int d(java.lang.String,java.lang.String)>".into(),
                tag: tag_for(id),
            })
            .collect(),
    }
}

/// Ids 1..=executable run; reports name the first `undetected` of them as
/// missed, every other executable one as found.
fn write_synthetic(dir: &Path, injected: u32, executable: u32) {
    std::fs::write(dir.join("ledger"), synthetic_ledger(injected).render()).unwrap();
    let ids: String = (1..=executable).map(|i| format!("{i}\n")).collect();
    std::fs::write(dir.join("executable.txt"), ids).unwrap();
    let trace: String = (1..=executable)
        .map(|i| format!("10-17 08:00:00.000  100  100 D/leak-{i}: x\n"))
        .collect();
    std::fs::write(dir.join("trace.log"), trace).unwrap();
}

fn write_report(dir: &Path, tool: &str, executable: u32, undetected: u32) -> std::path::PathBuf {
    let mut text = format!("# tool {tool}\n");
    for i in undetected + 1..=executable {
        text.push_str(&format!("id={i}\n"));
    }
    let p = dir.join(format!("{tool}.report"));
    std::fs::write(&p, text).unwrap();
    p
}

fn c1_funnel() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    write_synthetic(dir.path(), 7584, 2026);
    let start = Instant::now();
    let mut rates = Vec::new();
    for (tool, undetected, want) in [("flowdroid", 987, "48.7%"), ("argus", 1480, "73.1%"), ("droidsafe", 83, "4.1%")] {
        let report = write_report(dir.path(), tool, 2026, undetected);
        let out = cli_ok(&[
            "funnel",
            "--ledger",
            path_str(&dir.path().join("ledger")),
            "--executable",
            path_str(&dir.path().join("executable.txt")),
            "--report",
            path_str(&report),
        ]);
        let expect = format!("injected: 7584\nexecutable: 2026\nundetected: {undetected}\nsurvival rate: {want}\n");
        check(out == expect, || format!("{tool}: got {out:?}"))?;
        rates.push(want);
    }
    within(start, Duration::from_secs(1))?;
    Ok(rates.join(" / "))
}

fn c2_filter_rate() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    write_synthetic(dir.path(), 7584, 2026);
    let start = Instant::now();
    let out = cli_ok(&[
        "filter",
        "--ledger",
        path_str(&dir.path().join("ledger")),
        "--trace",
        path_str(&dir.path().join("trace.log")),
    ]);
    within(start, Duration::from_secs(1))?;
    check(out.contains("executable: 2026 / 7584\n"), || format!("got {out:?}"))?;
    check(out.contains("non-executable: 5558 (73.3%)\n"), || format!("got {out:?}"))?;
    Ok("5558 non-executable (73.3%)".into())
}

fn c3_reachability() -> Outcome {
    let start = Instant::now();
    let mut parts = Vec::new();
    for name in CORPORA {
        let corpus = fixture(name);
        let want = count_methods(&corpus);
        let out = cli_ok(&["profile", "--corpus", path_str(&corpus), "--schemes", "reachability"]);
        check(out == format!("reachability: {want} points\n"), || {
            format!("{name}: scanner counts {want}, profile says {out:?}")
        })?;
        parts.push(format!("{name}={want}"));
    }
    within(start, Duration::from_secs(5))?;
    Ok(parts.join(" "))
}

fn c4_bijection() -> Outcome {
    let start = Instant::now();
    let mut parts = Vec::new();
    for name in CORPORA {
        let out = tempfile::tempdir().unwrap();
        cli_ok(&["mutate", "--corpus", path_str(&fixture(name)), "--out", path_str(out.path())]);
        let scanned = scan_tags(out.path());
        let ledger: BTreeSet<String> = ledger_rows(&out.path().join("ledger"))
            .iter()
            .map(|r| format!("leak-{}", r.0))
            .collect();
        check(scanned == ledger, || {
            format!(
                "{name}: only in tree {:?}, only in ledger {:?}",
                scanned.difference(&ledger).collect::<Vec<_>>(),
                ledger.difference(&scanned).collect::<Vec<_>>()
            )
        })?;
        for (rel, path) in files(out.path()) {
            let Some(kind) = UnitKind::from_path(&rel) else { continue };
            let text = std::fs::read_to_string(&path).unwrap();
            parse_unit(&rel, &text, kind).map_err(|d| format!("{name}: {d}"))?;
        }
        parts.push(format!("{name}={}", ledger.len()));
    }
    within(start, Duration::from_secs(10))?;
    Ok(parts.join(" "))
}

struct FlawRun {
    mutated: tempfile::TempDir,
    ledger: MutantLedger,
    model: leakmut_core::model::CodeModel,
    executable: BTreeSet<u32>,
}

fn flaw_run() -> FlawRun {
    let mutated = tempfile::tempdir().unwrap();
    cli_ok(&["mutate", "--corpus", path_str(&fixture("flaws")), "--out", path_str(mutated.path())]);
    let ledger = MutantLedger::load(&mutated.path().join("ledger")).unwrap();
    let model = Corpus::load(mutated.path()).unwrap().model(&ClassificationTable::default());
    let trace = ExecutionTrace::load(&fixtures().join("traces/flaws.log"), TraceFormat::Logcat).unwrap();
    let executable = filter_executable(&ledger, &trace, false).executable;
    FlawRun {
        mutated,
        ledger,
        model,
        executable,
    }
}

fn survivors_with(run: &FlawRun, config: &AnalyzerConfig) -> BTreeSet<u32> {
    let report = analyze(&run.model, &SourceSinkCatalog::bundled(), config, "toy").unwrap();
    survivors(&run.ledger, &run.executable, &report).unwrap().undetected
}

type Switch = Box<dyn Fn(&mut AnalyzerConfig)>;

fn c5_flaw_classes() -> Outcome {
    let start = Instant::now();
    let run = flaw_run();
    let executable_oracle = trace_ids(&fixtures().join("traces/flaws.log"));
    check(run.executable == executable_oracle, || "trace oracle disagrees with filter".into())?;
    let expected = expected_by_class(run.mutated.path(), &executable_oracle);
    let union: BTreeSet<u32> = expected.values().flatten().copied().collect();
    let base = AnalyzerConfig::preset("flowdroid-like", &run.model).unwrap();
    let got = survivors_with(&run, &base);
    check(got == union, || format!("flowdroid-like survivors {got:?}, expected {union:?}"))?;

    let switches: [(&str, Switch); 4] = [
        (
            "FC1",
            Box::new(|c: &mut AnalyzerConfig| {
                for n in FLOWDROID_MISSING {
                    c.add_known(n);
                }
                c.abstract_class_callbacks = true;
            }),
        ),
        ("FC2", Box::new(|c: &mut AnalyzerConfig| c.implicit_calls = true)),
        ("FC3", Box::new(|c: &mut AnalyzerConfig| c.anonymous_classes = true)),
        ("FC4", Box::new(|c: &mut AnalyzerConfig| c.async_pair_flows = true)),
    ];
    for (code, switch) in &switches {
        let mut config = base.clone();
        switch(&mut config);
        let after = survivors_with(&run, &config);
        let removed: BTreeSet<u32> = got.difference(&after).copied().collect();
        let class = expected.get(code).cloned().unwrap_or_default();
        check(!class.is_empty(), || format!("{code}: fixture has no such survivors"))?;
        check(removed == class && after.is_subset(&got), || {
            format!("{code}: removed {removed:?}, expected {class:?}")
        })?;
    }

    // Known name, abstract-class callbacks still off.
    let flaws = ExpectedFlaws::load();
    let abstract_only: BTreeSet<u32> = ledger_rows(&run.mutated.path().join("ledger"))
        .into_iter()
        .filter(|r| executable_oracle.contains(&r.0) && row_matches(&flaws.abstract_only, run.mutated.path(), r))
        .map(|r| r.0)
        .collect();
    let mut config = base.clone();
    config.add_known("android.telephony.PhoneStateListener");
    config.add_known("android.database.sqlite.SQLiteOpenHelper");
    let after = survivors_with(&run, &config);
    check(!abstract_only.is_empty() && abstract_only.is_subset(&after), || {
        format!("abstract-class fixture survivors {abstract_only:?} not all in {after:?}")
    })?;
    within(start, Duration::from_secs(10))?;
    let sizes: Vec<String> = expected.iter().map(|(k, v)| format!("{k}={}", v.len())).collect();
    Ok(sizes.join(" "))
}

fn c6_complex_path() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let fragment = complex_path_rule("dataLeak7", 7);
    for i in 0..1000 {
        let len = rng.gen_range(0..=256);
        let s: String = (0..len)
            .map(|_| match rng.gen_range(0..3) {
                0 => rng.gen_range(' '..='~'),
                1 => rng.gen_range('\u{a0}'..='\u{d7ff}'),
                _ => rng.gen::<char>(),
            })
            .collect();
        let got = complex_path_eval(&fragment, "dataLeak7", &s).map_err(|e| format!("string {i}: {e}"))?;
        check(got == s, || format!("string {i} changed"))?;
    }
    within(start, Duration::from_secs(1))?;
    Ok("1000 strings".into())
}

/// Every output of a full run, minus the timestamped manifest.
fn full_run(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let trace = fixtures().join("traces/flaws.log");
    let mutated = root.join("mutated");
    cli_ok(&["mutate", "--corpus", path_str(&fixture("flaws")), "--out", path_str(&mutated)]);
    cli_ok(&[
        "filter",
        "--ledger",
        path_str(&mutated),
        "--trace",
        path_str(&trace),
        "--out",
        path_str(&root.join("lists")),
    ]);
    cli_ok(&[
        "analyze",
        "--corpus",
        path_str(&mutated),
        "--toy",
        "flowdroid-like",
        "--out",
        path_str(&root.join("reports/flowdroid-like.report")),
    ]);
    for format in ["text", "records"] {
        cli_ok(&[
            "evaluate",
            "--mutated",
            path_str(&mutated),
            "--trace",
            path_str(&trace),
            "--report",
            path_str(&root.join("reports/flowdroid-like.report")),
            "--format",
            format,
            "--out",
            path_str(&root.join(format!("reports/evaluate.{format}"))),
        ]);
    }
    files(root)
        .into_iter()
        .filter(|(rel, _)| !rel.ends_with(leakmut_cli::MANIFEST_FILE))
        .map(|(rel, p)| (rel, std::fs::read(p).unwrap()))
        .collect()
}

fn c7_determinism() -> Outcome {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ra = full_run(a.path());
    let rb = full_run(b.path());
    check(ra.keys().eq(rb.keys()), || "file sets differ".into())?;
    for (k, v) in &ra {
        check(rb[k] == *v, || format!("{k} differs"))?;
    }
    check(ra.contains_key("mutated/ledger"), || "no ledger".into())?;
    Ok(format!("{} files identical", ra.len()))
}

fn c8_minimal_loop() -> Outcome {
    let start = Instant::now();
    let mut total = 0;
    for name in CORPORA {
        let mutated = tempfile::tempdir().unwrap();
        let trace = fixtures().join(format!("traces/{name}.log"));
        cli_ok(&["mutate", "--corpus", path_str(&fixture(name)), "--out", path_str(mutated.path())]);
        let records = cli_ok(&[
            "evaluate",
            "--mutated",
            path_str(mutated.path()),
            "--trace",
            path_str(&trace),
            "--toy",
            "flowdroid-like",
            "--format",
            "records",
        ]);
        let ids: Vec<&str> = records
            .lines()
            .filter_map(|l| l.strip_prefix("survivor\t"))
            .map(|l| l.split('\t').next().unwrap())
            .collect();
        check(!ids.is_empty(), || format!("{name}: no survivors"))?;
        for id in ids {
            let out_dir = tempfile::tempdir().unwrap();
            let out = cli_ok(&[
                "synth",
                "--mutated",
                path_str(mutated.path()),
                "--id",
                id,
                "--trace",
                path_str(&trace),
                "--out",
                path_str(out_dir.path()),
                "--validate",
                "flowdroid-like",
                "--validate",
                "permissive",
            ]);
            let skeleton = Path::new(out.lines().next().unwrap());
            let text = std::fs::read_to_string(skeleton).unwrap();
            parse_unit("Skeleton.java", &text, UnitKind::Java).map_err(|d| format!("{name} leak-{id}: {d}"))?;
            check(out.contains("validate flowdroid-like: flaw-confirmed\n"), || {
                format!("{name} leak-{id}: {out}")
            })?;
            check(out.contains("validate permissive: detected-refine-or-discard\n"), || {
                format!("{name} leak-{id}: {out}")
            })?;
            total += 1;
        }
    }
    within(start, Duration::from_secs(10))?;
    Ok(format!("{total} skeletons"))
}

fn c9_pipeline_time() -> Outcome {
    let start = Instant::now();
    for name in CORPORA {
        let root = tempfile::tempdir().unwrap();
        let mutated = root.path().join("mutated");
        let trace = fixtures().join(format!("traces/{name}.log"));
        cli_ok(&["profile", "--corpus", path_str(&fixture(name))]);
        cli_ok(&["mutate", "--corpus", path_str(&fixture(name)), "--out", path_str(&mutated)]);
        cli_ok(&["filter", "--ledger", path_str(&mutated), "--trace", path_str(&trace), "--out", path_str(root.path())]);
        cli_ok(&[
            "evaluate",
            "--mutated",
            path_str(&mutated),
            "--executable",
            path_str(&root.path().join("executable.txt")),
            "--toy",
            "flowdroid-like",
        ]);
    }
    let took = start.elapsed();
    within(start, Duration::from_secs(10))?;
    Ok(format!("{took:.2?}"))
}

type Criterion = fn() -> Outcome;

fn main() {
    let criteria: [(&str, Criterion); 9] = [
        ("funnel arithmetic", c1_funnel),
        ("filter rate", c2_filter_rate),
        ("reachability exactness", c3_reachability),
        ("ledger bijection", c4_bijection),
        ("flaw-class reproduction", c5_flaw_classes),
        ("complex-path identity", c6_complex_path),
        ("determinism", c7_determinism),
        ("minimal-example loop", c8_minimal_loop),
        ("pipeline time bound", c9_pipeline_time),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(msg)
        });
        match outcome {
            Ok(detail) => println!("criterion {} {name}: PASS ({detail})", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {} {name}: FAIL ({why})", i + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
