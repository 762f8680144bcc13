mod common;

use std::path::Path;

use chanleak_core::dsl::scenarios::NAMES;
use chanleak_core::profile::{classify, parse_profile, BlockKind};

use common::{cli, fixtures};

/// Compares against `tests/golden/<name>`; `UPDATE_GOLDEN=1` rewrites it.
fn golden(name: &str, actual: &str) {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, actual).unwrap();
        return;
    }
    let want = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assert_eq!(actual, want, "golden {name}");
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn list_output() {
    let (code, out, _) = cli(&["list"]);
    assert_eq!(code, 0);
    golden("list.txt", &out);
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(cli(&["--help"]).0, 0);
    assert_eq!(cli(&["--version"]).0, 0);
}

#[test]
fn usage_errors_exit_two() {
    let (code, _, err) = cli(&["simulate", "no-such-scenario"]);
    assert_eq!(code, 2);
    for n in NAMES {
        assert!(err.contains(n), "{err}");
    }
    assert_eq!(cli(&["check", "ncast", "--bogus"]).0, 2);
    assert_eq!(cli(&["check", "ncast", "--set", "missing=3"]).0, 2);
    assert_eq!(cli(&["check", "ncast", "--set", "n"]).0, 2);
    assert_eq!(cli(&["check", "ncast", "--err"]).0, 2);
    assert_eq!(cli(&["analyze"]).0, 2);
    assert_eq!(cli(&["nope"]).0, 2);
}

#[test]
fn check_builtins() {
    for name in NAMES {
        let (code, _, err) = cli(&["check", name]);
        assert_eq!(code, 1, "{name}: {err}");
        assert!(err.starts_with(&format!("FAIL {name}:")), "{err}");
        let (code, out, _) = cli(&["check", name, "--fixed"]);
        assert_eq!(code, 0, "{name}");
        assert!(out.starts_with("PASS"), "{out}");
    }
}

#[test]
fn check_discount_fetch_report() {
    let (code, out, err) = cli(&["check", "discount-fetch", "--err=true"]);
    assert_eq!((code, out.as_str()), (1, ""));
    golden("check-discount-fetch.txt", &err);
    assert_eq!(cli(&["check", "discount-fetch", "--err=false"]).0, 0);
}

#[test]
fn check_with_suppression() {
    let dir = tempfile::tempdir().unwrap();
    let sup = dir.path().join("suppress.txt");
    std::fs::write(&sup, "# known leak, tracked separately\nserver.ComputeCost$1\n").unwrap();
    let (code, out, err) = cli(&["check", "discount-fetch", "--suppress", s(&sup)]);
    assert_eq!(code, 0, "{err}");
    assert!(out.starts_with("suppressed: 1 lingering task(s)\n"), "{out}");
    assert!(out.contains("transactions/cost.go:8"));
    // suppressing one function leaves the other sites failing
    std::fs::write(&sup, "fanout.Gather\n").unwrap();
    assert_eq!(cli(&["check", "ncast", "--suppress", s(&sup)]).0, 1);
}

#[test]
fn simulate_writes_trace_and_profile() {
    let dir = tempfile::tempdir().unwrap();
    let (code, out, _) = cli(&["simulate", "ncast", "--n", "5", "--out", s(dir.path())]);
    assert_eq!(code, 0);
    assert!(out.starts_with("quiescent after "), "{out}");
    let p = parse_profile(&std::fs::read_to_string(dir.path().join("ncast.gprof.txt")).unwrap()).unwrap();
    assert_eq!(p.goroutines.len(), 4);
    assert!(p.goroutines.iter().all(|g| classify(g).unwrap().kind == BlockKind::ChanSend));
    let trace = std::fs::read_to_string(dir.path().join("ncast.trace.txt")).unwrap();
    golden("ncast-5.trace.txt", &trace);

    cli(&["simulate", "discount-fetch", "--err=true", "--out", s(dir.path()), "--instance", "l1", "--captured-at", "tick-0"]);
    let text = std::fs::read_to_string(dir.path().join("l1.gprof.txt")).unwrap();
    assert_eq!(parse_profile(&text).unwrap().goroutines.len(), 1);
    assert!(text.contains("\ngoroutine 2 [chan send]:\n"));
}

#[test]
fn simulate_program_file_with_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let prog = dir.path().join("fan.chan");
    std::fs::write(&prog, chanleak_core::dsl::scenarios::NCAST).unwrap();
    let (code, _, err) = cli(&["simulate", s(&prog), "--set", "n=3", "--out", s(dir.path())]);
    assert_eq!(code, 0, "{err}");
    let p = parse_profile(&std::fs::read_to_string(dir.path().join("fan.gprof.txt")).unwrap()).unwrap();
    assert_eq!(p.instance_id, "fan");
    assert_eq!(p.goroutines.len(), 2);
    // a file that does not parse is a usage error
    std::fs::write(&prog, "entry {\n  send nowhere\n}\n").unwrap();
    let (code, _, err) = cli(&["simulate", s(&prog), "--out", s(dir.path())]);
    assert_eq!(code, 2);
    assert!(err.contains("nowhere"), "{err}");
}

#[test]
fn step_bound_keeps_partial_state() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, err) = cli(&["check", "timer-loop", "--max-steps", "20"]);
    assert_eq!(code, 1);
    assert!(err.contains("step bound 20 reached"), "{err}");
    let (code, out, _) = cli(&["simulate", "ncast", "--max-steps", "3", "--out", s(dir.path())]);
    assert_eq!(code, 0);
    assert!(out.starts_with("step bound reached"), "{out}");
}

/// Three instances, one of which holds 16000 blocked senders.
fn spike_fleet(dir: &Path) {
    for (inst, n) in [("a", "1"), ("b", "16001"), ("c", "1")] {
        let (code, ..) = cli(&["simulate", "ncast", "--n", n, "--instance", inst, "--out", s(dir)]);
        assert_eq!(code, 0);
    }
}

#[test]
fn analyze_spike_fleet() {
    let dir = tempfile::tempdir().unwrap();
    spike_fleet(dir.path());
    let (code, out, _) = cli(&["analyze", s(dir.path()), "--threshold", "10000", "--format", "json"]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    let f = v["findings"].as_array().unwrap();
    assert_eq!(f.len(), 1);
    assert_eq!(f[0]["kind"], "ChanSend");
    assert_eq!(f[0]["file"], "fanout/ncast.go");
    assert_eq!(f[0]["line"], 4);
    assert_eq!(f[0]["total"], 16000);
    let rms = f[0]["rms"].as_f64().unwrap();
    assert!((rms - 16000.0 / 3f64.sqrt()).abs() < 1e-9);
    assert_eq!(f[0]["per_instance"], serde_json::json!([{ "instance": "b", "count": 16000 }]));
    assert_eq!(v["config"]["threshold"], 10000);

    let (code, out, _) = cli(&["analyze", s(dir.path()), "--threshold", "20000", "--format", "json"]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert!(v["findings"].as_array().unwrap().is_empty());
}

#[test]
fn analyze_corpus_golden() {
    let dir = fixtures().join("profiles");
    let (code, out, err) = cli(&["analyze", s(&dir), "--threshold", "1", "--format", "json", "--generated-at", "2024-06-01"]);
    assert_eq!(code, 0, "{err}");
    assert_eq!(err, "");
    golden("corpus-report.json", &out);
    let (_, text, _) = cli(&["analyze", s(&dir), "--threshold", "1", "--generated-at", "2024-06-01"]);
    golden("corpus-report.txt", &text);
}

#[test]
fn analyze_out_dir_matches_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let fx = fixtures().join("profiles");
    let (_, json, _) = cli(&["analyze", s(&fx), "--threshold", "2", "--format", "json", "--out", s(dir.path())]);
    let (_, text, _) = cli(&["analyze", s(&fx), "--threshold", "2"]);
    assert_eq!(std::fs::read_to_string(dir.path().join("report.json")).unwrap(), json);
    assert_eq!(std::fs::read_to_string(dir.path().join("report.txt")).unwrap(), text);
}

#[test]
fn corrupt_profiles_are_skipped_unless_strict() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::copy(fixtures().join("profiles/blocked-send.gprof.txt"), dir.path().join("good.gprof.txt")).unwrap();
    std::fs::copy(fixtures().join("malformed/duplicate-id.gprof.txt"), dir.path().join("bad.gprof.txt")).unwrap();
    std::fs::write(dir.path().join("notes.txt"), "not a profile").unwrap();
    let (code, out, err) = cli(&["analyze", s(dir.path()), "--threshold", "1"]);
    assert_eq!(code, 0);
    assert!(err.starts_with("warning: skipping ") && err.contains("bad.gprof.txt: line 7"), "{err}");
    assert!(out.contains("transactions/cost.go:8"));
    let (code, _, err) = cli(&["analyze", s(dir.path()), "--threshold", "1", "--strict"]);
    assert_eq!(code, 4, "{err}");
}

#[test]
fn no_profiles_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(cli(&["analyze", s(dir.path())]).0, 3);
    assert_eq!(cli(&["analyze", s(&dir.path().join("missing"))]).0, 3);
    std::fs::copy(fixtures().join("malformed/bad-header.gprof.txt"), dir.path().join("x.gprof.txt")).unwrap();
    assert_eq!(cli(&["analyze", s(dir.path())]).0, 3);
}

#[test]
fn instance_falls_back_to_file_stem() {
    let (_, out, _) = cli(&["analyze", s(&fixtures().join("profiles/no-instance.gprof.txt")), "--threshold", "1", "--format", "json"]);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["findings"][0]["per_instance"][0]["instance"], "no-instance");
    assert_eq!(v["generated_at"], "unknown");
}

#[test]
fn transient_file_replaces_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let fx = fixtures().join("profiles/transient-selects.gprof.txt");
    let functions = |extra: &[&str]| {
        let mut args = vec!["analyze", s(&fx), "--threshold", "1", "--format", "json"];
        args.extend_from_slice(extra);
        let (_, out, _) = cli(&args);
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        v["findings"].as_array().unwrap().iter().map(|f| f["function"].as_str().unwrap().to_string()).collect::<Vec<_>>()
    };
    assert_eq!(functions(&[]), ["worker.Worker.Start$1"]);
    let t = dir.path().join("transient.txt");
    std::fs::write(&t, "# nothing is transient\n").unwrap();
    assert_eq!(functions(&["--transient", s(&t)]), ["heartbeat.run$1", "worker.Worker.Start$1"]);
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("sup.txt"), "pipeline.consume\n").unwrap();
    let cfg = dir.path().join("fleet.conf");
    std::fs::write(&cfg, "# fleet defaults\nthreshold = 30\ntop_n = 2\nsuppress = sup.txt\nformat = json\n").unwrap();
    let fx = fixtures().join("profiles/mixed-table.gprof.txt");
    let (code, out, err) = cli(&["--config", s(&cfg), "analyze", s(&fx)]);
    assert_eq!(code, 0, "{err}");
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["config"]["threshold"], 30);
    assert_eq!(v["config"]["top_n"], 2);
    assert_eq!(v["config"]["suppression"], serde_json::json!(["pipeline.consume"]));
    assert_eq!(v["suppressed"], serde_json::json!({ "pipeline.consume": 32 }));
    let fns: Vec<_> = v["findings"].as_array().unwrap().iter().map(|f| f["function"].clone()).collect();
    assert_eq!(fns, [serde_json::json!("worker.Worker.Start$1")]);

    let (_, out, _) = cli(&["analyze", s(&fx), "--config", s(&cfg), "--threshold", "2", "--format", "text"]);
    assert!(out.starts_with("leak report"));
    assert!(out.contains("threshold: 2  top_n: 2"), "{out}");

    std::fs::write(&cfg, "threshhold = 3\n").unwrap();
    assert_eq!(cli(&["--config", s(&cfg), "analyze", s(&fx)]).0, 2);
    std::fs::write(&cfg, "seed = 7\nmax_steps = 0\n").unwrap();
    assert_eq!(cli(&["--config", s(&cfg), "check", "ncast"]).0, 2);
}

#[test]
fn lint_exit_codes() {
    let (code, out, _) = cli(&["lint", "unclosed-range"]);
    assert_eq!(code, 1);
    golden("lint-unclosed-range.txt", &out);
    assert_eq!(cli(&["lint", "unclosed-range", "--fixed"]).0, 0);
    for n in NAMES {
        assert_eq!(cli(&["lint", n, "--fixed"]).0, 0, "{n}");
    }
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.chan");
    std::fs::write(&empty, "entry {\n}\n").unwrap();
    let (code, out, err) = cli(&["lint", s(&empty)]);
    assert_eq!(code, 0, "{err}");
    assert_eq!(out, "empty: no findings\n");
}

#[test]
fn commands_are_deterministic() {
    let fx = fixtures().join("profiles");
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for args in [
        vec!["simulate", "method-contract", "--seed", "9", "--out", s(a.path())],
        vec!["simulate", "method-contract", "--seed", "9", "--out", s(b.path())],
    ] {
        assert_eq!(cli(&args).0, 0);
    }
    for f in ["method-contract.trace.txt", "method-contract.gprof.txt"] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap());
    }
    for args in [
        vec!["check", "timeout-leak", "--seed", "3"],
        vec!["lint", "unclosed-range"],
        vec!["list"],
        vec!["analyze", s(&fx), "--threshold", "1", "--format", "json"],
        vec!["analyze", s(&fx), "--threshold", "1"],
    ] {
        assert_eq!(cli(&args), cli(&args), "{args:?}");
    }
}
