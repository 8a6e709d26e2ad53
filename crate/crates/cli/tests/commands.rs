mod common;

use std::collections::BTreeSet;
use std::path::Path;

use common::*;

fn mutate(name: &str, out: &Path) -> String {
    cli_ok(&["mutate", "--corpus", path_str(&fixture(name)), "--out", path_str(out)])
}

#[test]
fn profile_counts_per_scheme() {
    let out = cli_ok(&["profile", "--corpus", path_str(&fixture("basic"))]);
    assert_eq!(
        out,
        "android-abstractions: 7 points\nreachability: 7 points\ntaint-split: 2 points\ncomplex-path: 7 points\n"
    );
    let records = cli_ok(&["profile", "--corpus", path_str(&fixture("basic")), "--schemes", "taint-split", "--format", "records"]);
    assert_eq!(records, "mip\ttaint-split\t2\n");
}

#[test]
fn profile_writes_dumps() {
    let dir = tempfile::tempdir().unwrap();
    cli_ok(&["profile", "--corpus", path_str(&fixture("basic")), "--out", path_str(dir.path())]);
    let dump = std::fs::read_to_string(dir.path().join("mip-reachability.txt")).unwrap();
    assert!(dump.starts_with("# scheme reachability operator calendar-log points 7\n"));
    assert_eq!(dump.lines().count(), 8);
}

#[test]
fn profile_of_empty_corpus_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = cli_ok(&["profile", "--corpus", path_str(dir.path())]);
    assert!(out.lines().all(|l| l.ends_with(": 0 points")), "{out}");
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("ops.toml");
    std::fs::write(&bad, "[[operator]]\noperator-id = \"x\"\n").unwrap();
    let corpus = fixture("basic");
    for args in [
        vec!["profile", "--corpus", path_str(&corpus), "--operator", path_str(&bad)],
        vec!["profile", "--corpus", path_str(&corpus), "--operator", "no-such-operator"],
        vec!["profile", "--corpus", path_str(&corpus), "--schemes", "sideways"],
        vec!["profile", "--corpus", "/nonexistent/corpus"],
        vec!["profile"],
        vec!["frobnicate"],
    ] {
        let (code, _, err) = cli(&args);
        assert_eq!(code, 2, "{args:?}");
        assert!(!err.is_empty());
    }
}

#[test]
fn unparseable_corpus_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("A.java"), "class A { void f( }").unwrap();
    let (code, _, err) = cli(&["profile", "--corpus", path_str(dir.path())]);
    assert_eq!(code, 1);
    assert!(err.contains("A.java"), "{err}");
}

#[test]
fn help_exits_0() {
    let (code, out, _) = cli(&["--help"]);
    assert_eq!(code, 0);
    assert!(out.contains("mutate"));
}

#[test]
fn mutate_all_schemes_injects_23() {
    let dir = tempfile::tempdir().unwrap();
    let out = mutate("basic", dir.path());
    assert!(out.starts_with("injected: 23\n"), "{out}");
    assert_eq!(ledger_rows(&dir.path().join("ledger")).len(), 23);
    let manifest = std::fs::read_to_string(dir.path().join(leakmut_cli::MANIFEST_FILE)).unwrap();
    assert!(manifest.contains("command = \"mutate\""));
    assert!(manifest.contains("finished = "));
}

#[test]
fn reachability_alone_injects_one_per_method() {
    let dir = tempfile::tempdir().unwrap();
    let out = cli_ok(&[
        "mutate",
        "--corpus",
        path_str(&fixture("flaws")),
        "--out",
        path_str(dir.path()),
        "--schemes",
        "reachability",
    ]);
    assert!(out.starts_with(&format!("injected: {}\n", count_methods(&fixture("flaws")))), "{out}");
}

#[test]
fn rerun_gives_identical_ledger_and_prunes_nothing() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    mutate("basic", a.path());
    mutate("basic", b.path());
    let first = std::fs::read(a.path().join("ledger")).unwrap();
    assert_eq!(first, std::fs::read(b.path().join("ledger")).unwrap());
    mutate("basic", a.path());
    assert_eq!(first, std::fs::read(a.path().join("ledger")).unwrap());
}

#[test]
fn seed_note_lands_in_manifest() {
    let dir = tempfile::tempdir().unwrap();
    cli_ok(&[
        "mutate",
        "--corpus",
        path_str(&fixture("basic")),
        "--out",
        path_str(dir.path()),
        "--seed-note",
        "baseline before refactor",
    ]);
    let manifest = std::fs::read_to_string(dir.path().join(leakmut_cli::MANIFEST_FILE)).unwrap();
    assert!(manifest.contains("seed-note = \"baseline before refactor\""));
}

#[test]
fn mutate_refuses_output_inside_corpus() {
    let corpus = tempfile::tempdir().unwrap();
    std::fs::write(corpus.path().join("A.java"), "class A { void f() {} }").unwrap();
    let inside = corpus.path().join("out");
    let (code, _, err) = cli(&["mutate", "--corpus", path_str(corpus.path()), "--out", path_str(&inside)]);
    assert_eq!(code, 2, "{err}");
    assert!(!inside.exists(), "nothing may be written on refusal");
}

#[test]
fn filter_basic_trace() {
    let dir = tempfile::tempdir().unwrap();
    mutate("basic", dir.path());
    let lists = dir.path().join("lists");
    let out = cli_ok(&[
        "filter",
        "--ledger",
        path_str(dir.path()),
        "--trace",
        path_str(&fixtures().join("traces/basic.log")),
        "--out",
        path_str(&lists),
    ]);
    assert!(out.starts_with("executable: 15 / 23\n"), "{out}");
    let ids: BTreeSet<u32> = std::fs::read_to_string(lists.join("executable.txt"))
        .unwrap()
        .lines()
        .map(|l| l.parse().unwrap())
        .collect();
    assert_eq!(ids, trace_ids(&fixtures().join("traces/basic.log")));
    assert_eq!(std::fs::read_to_string(lists.join("non-executable.txt")).unwrap().lines().count(), 8);
}

#[test]
fn filter_without_trace_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    mutate("basic", dir.path());
    let (code, _, err) = cli(&["filter", "--ledger", path_str(dir.path())]);
    assert_eq!(code, 2);
    assert!(err.contains("--trace"));
}

#[test]
fn union_of_traces_is_a_superset() {
    let dir = tempfile::tempdir().unwrap();
    mutate("basic", dir.path());
    let t1 = dir.path().join("t1.log");
    let t2 = dir.path().join("t2.log");
    std::fs::write(&t1, "D/leak-1: a\nD/leak-2: b\n").unwrap();
    std::fs::write(&t2, "leak-2\tb\nleak-9\tc\n").unwrap();
    let count = |traces: &[&Path]| -> usize {
        let mut args = vec!["filter", "--ledger", path_str(dir.path())];
        for t in traces {
            args.extend(["--trace", path_str(t)]);
        }
        let out = cli_ok(&args);
        out.lines().next().unwrap()["executable: ".len()..].split(' ').next().unwrap().parse().unwrap()
    };
    assert_eq!(count(&[&t1]), 2);
    assert_eq!(count(&[&t2]), 2);
    assert_eq!(count(&[&t1, &t2]), 3);
}

#[test]
fn evaluate_groups_basic_survivors() {
    let dir = tempfile::tempdir().unwrap();
    mutate("basic", dir.path());
    let out = cli_ok(&[
        "evaluate",
        "--mutated",
        path_str(dir.path()),
        "--trace",
        path_str(&fixtures().join("traces/basic.log")),
        "--toy",
        "flowdroid-like",
    ]);
    assert!(out.contains("injected: 23\nexecutable: 15\nundetected: 6\nsurvival rate: 40.0%\n"), "{out}");
    assert!(out.contains("FC1 missing callbacks (3): leak-1 leak-8 leak-17\n"), "{out}");
    assert!(out.contains("FC2 missing implicit calls (2): leak-13 leak-22\n"), "{out}");
    assert!(out.contains("FC4 asynchronous methods (1): leak-15\n"), "{out}");
}

#[test]
fn flaw_hypotheses_match_fixture_annotations() {
    let dir = tempfile::tempdir().unwrap();
    mutate("flaws", dir.path());
    let trace = fixtures().join("traces/flaws.log");
    let records = cli_ok(&[
        "evaluate",
        "--mutated",
        path_str(dir.path()),
        "--trace",
        path_str(&trace),
        "--toy",
        "flowdroid-like",
        "--format",
        "records",
    ]);
    let mut got: std::collections::BTreeMap<&str, BTreeSet<u32>> = Default::default();
    for line in records.lines().filter_map(|l| l.strip_prefix("survivor\t")) {
        let f: Vec<&str> = line.split('\t').collect();
        got.entry(f[2]).or_default().insert(f[0].parse().unwrap());
    }
    assert_eq!(got, expected_by_class(dir.path(), &trace_ids(&trace)));
}

#[test]
fn external_report_matches_toy_mode() {
    let dir = tempfile::tempdir().unwrap();
    mutate("basic", dir.path());
    let report = dir.path().join("toy.report");
    cli_ok(&[
        "analyze",
        "--corpus",
        path_str(dir.path()),
        "--toy",
        "flowdroid-like",
        "--out",
        path_str(&report),
    ]);
    let trace = fixtures().join("traces/basic.log");
    let base = ["evaluate", "--mutated", path_str(dir.path()), "--trace", path_str(&trace)];
    let via_toy = cli_ok(&[&base[..], &["--toy", "flowdroid-like"]].concat());
    let via_file = cli_ok(&[&base[..], &["--report", path_str(&report)]].concat());
    assert_eq!(via_toy, via_file);
}

#[test]
fn evaluate_needs_executable_source_and_detector() {
    let dir = tempfile::tempdir().unwrap();
    mutate("basic", dir.path());
    let (code, _, _) = cli(&["evaluate", "--mutated", path_str(dir.path()), "--toy", "permissive"]);
    assert_eq!(code, 2);
    let trace = fixtures().join("traces/basic.log");
    let (code, _, _) = cli(&["evaluate", "--mutated", path_str(dir.path()), "--trace", path_str(&trace)]);
    assert_eq!(code, 2);
    let (code, _, err) = cli(&[
        "evaluate",
        "--mutated",
        path_str(dir.path()),
        "--trace",
        path_str(&trace),
        "--toy",
        "paranoid",
    ]);
    assert_eq!(code, 2, "{err}");
}

#[test]
fn synth_prints_skeleton_path() {
    let dir = tempfile::tempdir().unwrap();
    mutate("basic", dir.path());
    let out_dir = dir.path().join("minimal");
    let out = cli_ok(&["synth", "--mutated", path_str(dir.path()), "--id", "leak-13", "--out", path_str(&out_dir)]);
    let first = out.lines().next().unwrap();
    assert!(first.ends_with("Minimal13Activity.java"), "{out}");
    let text = std::fs::read_to_string(first).unwrap();
    assert!(text.contains("runOnUiThread(new java.lang.Runnable() {"), "{text}");
    assert!(text.contains("android.util.Log.d(\"leak-13\", dataLeak13);"));
}

#[test]
fn synth_unknown_id_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    mutate("basic", dir.path());
    for id in ["999", "leak-x"] {
        let (code, _, _) = cli(&["synth", "--mutated", path_str(dir.path()), "--id", id, "--out", path_str(dir.path())]);
        assert_eq!(code, 2, "{id}");
    }
}

#[test]
fn nested_receiver_skeleton_registers_send_filter() {
    let dir = tempfile::tempdir().unwrap();
    mutate("flaws", dir.path());
    let nested = ledger_rows(&dir.path().join("ledger"))
        .into_iter()
        .find(|r| r.1 == "nested-receiver")
        .unwrap();
    let out_dir = dir.path().join("minimal");
    let out = cli_ok(&[
        "synth",
        "--mutated",
        path_str(dir.path()),
        "--id",
        &nested.0.to_string(),
        "--out",
        path_str(&out_dir),
        "--validate",
        "flowdroid-like",
    ]);
    let text = std::fs::read_to_string(out.lines().next().unwrap()).unwrap();
    assert!(text.contains("new android.content.BroadcastReceiver() {"), "{text}");
    assert!(text.contains(".addAction(\"android.intent.action.SEND\");"), "{text}");
    assert!(text.matches("registerReceiver(").count() >= 2, "{text}");
    assert!(out.contains("validate flowdroid-like: flaw-confirmed"), "{out}");
}

#[test]
fn funnel_from_files() {
    let dir = tempfile::tempdir().unwrap();
    mutate("basic", dir.path());
    let lists = dir.path().join("lists");
    cli_ok(&[
        "filter",
        "--ledger",
        path_str(dir.path()),
        "--trace",
        path_str(&fixtures().join("traces/basic.log")),
        "--out",
        path_str(&lists),
    ]);
    let report = dir.path().join("r.report");
    cli_ok(&["analyze", "--corpus", path_str(dir.path()), "--toy", "permissive", "--out", path_str(&report)]);
    let out = cli_ok(&[
        "funnel",
        "--ledger",
        path_str(&dir.path().join("ledger")),
        "--executable",
        path_str(&lists.join("executable.txt")),
        "--report",
        path_str(&report),
    ]);
    assert_eq!(out, "injected: 23\nexecutable: 15\nundetected: 0\nsurvival rate: 0.0%\n");
}

#[test]
fn analyzer_config_file() {
    let dir = tempfile::tempdir().unwrap();
    mutate("basic", dir.path());
    let cfg = dir.path().join("strict.toml");
    std::fs::write(
        &cfg,
        "known-callbacks = [\"android.app.Activity\"]\nimplicit-calls = true\nasync-pair-flows = true\n",
    )
    .unwrap();
    let out = cli_ok(&["analyze", "--corpus", path_str(dir.path()), "--config", path_str(&cfg)]);
    assert!(out.starts_with("# tool strict\n"));
    assert!(out.contains("line=63 "), "taint pair across onCreate/onStart: {out}");
    std::fs::write(&cfg, "known-callbacks = []\nbogus = 1\n").unwrap();
    let (code, _, _) = cli(&["analyze", "--corpus", path_str(dir.path()), "--config", path_str(&cfg)]);
    assert_eq!(code, 2);
}
