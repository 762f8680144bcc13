use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;

use proptest::prelude::*;

use chanleak_core::analyzer::{analyze_fleet, rms, AnalyzerConfig};
use chanleak_core::dsl::load_program;
use chanleak_core::profile::{emit_profile, parse_profile, tally, Frame, GoroutineProfile, GoroutineRecord};
use chanleak_core::runtime::{run, Execution, Outcome, SchedulerConfig, TaskStatus, TraceOp};

// ---- random channel programs ----

#[derive(Debug, Clone)]
enum Op {
    Send(usize),
    Recv(usize),
    Close(usize),
    Select(usize, usize, bool),
    Sleep(u64),
    Range(usize),
    Repeat(u64, usize, bool),
}

fn op() -> impl Strategy<Value = Op> {
    prop_oneof![
        4 => (0..3usize).prop_map(Op::Send),
        4 => (0..3usize).prop_map(Op::Recv),
        1 => (0..3usize).prop_map(Op::Close),
        2 => (0..3usize, 0..3usize, any::<bool>()).prop_map(|(a, b, d)| Op::Select(a, b, d)),
        1 => (0..3u64).prop_map(Op::Sleep),
        1 => (0..3usize).prop_map(Op::Range),
        1 => (1..4u64, 0..3usize, any::<bool>()).prop_map(|(n, c, s)| Op::Repeat(n, c, s)),
    ]
}

#[derive(Debug, Clone)]
struct Prog {
    caps: [u64; 3],
    workers: Vec<Vec<Op>>,
    main: Vec<Op>,
}

fn prog() -> impl Strategy<Value = Prog> {
    (
        [0..3u64, 0..3u64, 0..3u64],
        prop::collection::vec(prop::collection::vec(op(), 0..6), 0..4),
        prop::collection::vec(op(), 0..6),
    )
        .prop_map(|(caps, workers, main)| Prog { caps, workers, main })
}

fn render_ops(out: &mut String, ops: &[Op]) {
    for op in ops {
        match op {
            Op::Send(c) => writeln!(out, "  send c{c} {c}").unwrap(),
            Op::Recv(c) => writeln!(out, "  recv c{c}").unwrap(),
            Op::Close(c) => writeln!(out, "  close c{c}").unwrap(),
            Op::Select(a, b, d) => {
                writeln!(out, "  select {{\n    recv c{a}\n    recv c{b}").unwrap();
                if *d {
                    writeln!(out, "    default").unwrap();
                }
                writeln!(out, "  }}").unwrap();
            }
            Op::Sleep(t) => writeln!(out, "  sleep {t}").unwrap(),
            Op::Range(c) => writeln!(out, "  range c{c} {{\n  }}").unwrap(),
            Op::Repeat(n, c, send) => {
                let body = if *send { format!("send c{c}") } else { format!("recv c{c}") };
                writeln!(out, "  for {n} {{\n    {body}\n  }}").unwrap();
            }
        }
    }
}

impl Prog {
    fn text(&self) -> String {
        let mut out = String::from("entry {\n");
        for (i, cap) in self.caps.iter().enumerate() {
            writeln!(out, "  make c{i} {cap}").unwrap();
        }
        for i in 0..self.workers.len() {
            writeln!(out, "  go w{i} c0 c1 c2").unwrap();
        }
        render_ops(&mut out, &self.main);
        out.push_str("}\n");
        for (i, ops) in self.workers.iter().enumerate() {
            writeln!(out, "func w{i} c0 c1 c2 {{").unwrap();
            render_ops(&mut out, ops);
            out.push_str("}\n");
        }
        out
    }

    fn run(&self, seed: u64) -> Execution {
        let p = load_program(&self.text()).unwrap();
        let cfg = SchedulerConfig { seed, max_steps: 20_000, ..Default::default() };
        match run(&p, &cfg) {
            Ok(e) => e,
            Err(e) => e.into_execution(),
        }
    }
}

/// `key=value` fields of a trace detail.
fn field<'a>(detail: &'a str, key: &str) -> Option<&'a str> {
    detail.split(',').find_map(|kv| kv.strip_prefix(key)?.strip_prefix('='))
}

/// Message accounting per channel rebuilt from the trace alone:
/// (send attempts, values received, blocked senders panicked by close).
fn trace_accounting(e: &Execution) -> BTreeMap<usize, (u64, u64, u64)> {
    let mut acc: BTreeMap<usize, (u64, u64, u64)> = BTreeMap::new();
    for ev in e.trace.iter() {
        let d = ev.detail.as_str();
        let Some(c) = field(d, "ch").and_then(|c| c.parse::<usize>().ok()) else { continue };
        let a = acc.entry(c).or_default();
        match ev.op {
            TraceOp::Send => {
                a.0 += 1;
                if d.contains(",delivered") {
                    a.1 += 1;
                }
            }
            TraceOp::Recv | TraceOp::Select if field(d, "ok") == Some("true") => a.1 += 1,
            TraceOp::Close => a.2 += field(d, "panicked").unwrap().parse::<u64>().unwrap(),
            _ => {}
        }
    }
    acc
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 300, ..ProptestConfig::default() })]

    #[test]
    fn runs_are_deterministic(p in prog(), seed in any::<u64>()) {
        let a = p.run(seed);
        let b = p.run(seed);
        prop_assert_eq!(a.trace.to_string(), b.trace.to_string());
        prop_assert_eq!(a, b);
    }

    #[test]
    fn messages_are_conserved(p in prog(), seed in any::<u64>()) {
        let e = p.run(seed);
        let acc = trace_accounting(&e);
        for ch in &e.channels {
            let (attempts, received, panicked) = acc.get(&ch.id).copied().unwrap_or_default();
            prop_assert_eq!(
                attempts,
                received + ch.buffer.len() as u64 + ch.blocked_senders as u64 + panicked,
                "channel {} in\n{}", ch.id, p.text()
            );
            prop_assert_eq!(ch.sent, ch.received + ch.buffer.len() as u64);
            prop_assert!(ch.buffer.len() <= ch.capacity);
        }
    }

    #[test]
    fn unbuffered_channels_pair_sends_and_receives(p in prog(), seed in any::<u64>()) {
        let e = p.run(seed);
        for ch in e.channels.iter().filter(|c| c.capacity == 0) {
            prop_assert_eq!(ch.sent, ch.received);
            prop_assert!(ch.buffer.is_empty());
        }
    }

    #[test]
    fn quiescent_tasks_are_all_parked(p in prog(), seed in any::<u64>()) {
        let e = p.run(seed);
        if e.outcome == Outcome::Quiescent && e.steps < 20_000 {
            for t in e.lingering() {
                prop_assert!(t.status.is_waiting(), "{:?}", t.status);
                prop_assert!(t.blocking_site.is_some());
            }
        }
        for t in &e.tasks {
            prop_assert_eq!(t.blocking_site.is_some(), t.status.is_waiting());
        }
    }

    #[test]
    fn closed_channels_hold_no_waiters(p in prog(), seed in any::<u64>()) {
        let e = p.run(seed);
        for ch in e.channels.iter().filter(|c| c.closed) {
            prop_assert_eq!(ch.blocked_receivers, 0);
            prop_assert_eq!(ch.blocked_senders, 0);
        }
    }
}

// ---- profiles ----

fn frame() -> impl Strategy<Value = Frame> {
    (
        "[a-z][a-z./$]{0,12}",
        "[a-z_][a-z/._]{0,12}",
        1..10_000u32,
        prop::collection::vec("[a-z][a-z. ]{0,8}", 0..3),
    )
        .prop_map(|(symbol, file, line, arms)| Frame { symbol, file, line, arms })
}

fn profile() -> impl Strategy<Value = GoroutineProfile> {
    (
        "[a-z0-9-]{0,8}",
        "[0-9T:-]{0,10}",
        prop::collection::btree_map(
            1..1_000_000u64,
            ("[a-z][a-z (),]{0,14}", prop::collection::vec(frame(), 1..5), prop::option::of(frame())),
            0..8,
        ),
    )
        .prop_map(|(instance_id, captured_at, gs)| GoroutineProfile {
            instance_id,
            captured_at,
            goroutines: gs
                .into_iter()
                .map(|(id, (state_label, frames, created_by))| GoroutineRecord {
                    id,
                    state_label,
                    frames,
                    created_by: created_by.map(|mut f| {
                        f.arms.clear();
                        f
                    }),
                })
                .collect(),
        })
}

proptest! {
    #[test]
    fn profile_round_trips(p in profile()) {
        let text = emit_profile(&p);
        let back = parse_profile(&text).unwrap();
        prop_assert_eq!(&back, &p);
        prop_assert_eq!(emit_profile(&back), text);
    }

    #[test]
    fn tally_counts_every_record(p in profile()) {
        let n: u64 = tally(&p).values().sum();
        prop_assert_eq!(n, p.goroutines.len() as u64);
    }
}

// ---- RMS ----

proptest! {
    #[test]
    fn rms_of_one_profile_is_the_count(c in 0..u32::MAX as u64) {
        prop_assert_eq!(rms([c], 1), c as f64);
    }

    #[test]
    fn rms_is_monotone(counts in prop::collection::vec(0..20_000u64, 1..6), i in any::<prop::sample::Index>(), bump in 1..1000u64) {
        let p = counts.len();
        let before = rms(counts.iter().copied(), p);
        let mut more = counts.clone();
        more[i.index(p)] += bump;
        prop_assert!(rms(more, p) >= before);
    }

    #[test]
    fn rms_scales_linearly(counts in prop::collection::vec(0..20_000u64, 1..6), k in 1..50u64) {
        let p = counts.len();
        let base = rms(counts.iter().copied(), p);
        let scaled = rms(counts.iter().map(|c| c * k), p);
        prop_assert!((scaled - base * k as f64).abs() <= 1e-9 * scaled.max(1.0));
    }
}

// ---- fleet analysis ----

fn parked(id: u64, site: usize) -> GoroutineRecord {
    GoroutineRecord {
        id,
        state_label: "chan receive".into(),
        frames: vec![
            Frame::new("runtime.gopark", "runtime/proc.go", 398),
            Frame::new("runtime.chanrecv1", "runtime/chan.go", 442),
            Frame::new(format!("pkg.f{site}"), "pkg/f.go", site as u32 + 1),
        ],
        created_by: None,
    }
}

fn fleet() -> impl Strategy<Value = Vec<GoroutineProfile>> {
    prop::collection::vec(prop::collection::vec(0..40u64, 6), 1..5).prop_map(|rows| {
        rows.into_iter()
            .enumerate()
            .map(|(i, counts)| {
                let mut gs = Vec::new();
                for (site, n) in counts.into_iter().enumerate() {
                    for _ in 0..n {
                        gs.push(parked(gs.len() as u64 + 1, site));
                    }
                }
                GoroutineProfile { instance_id: format!("i{i}"), captured_at: String::new(), goroutines: gs }
            })
            .collect()
    })
}

fn functions(profiles: &[GoroutineProfile], cfg: &AnalyzerConfig) -> BTreeSet<String> {
    analyze_fleet(profiles, cfg, "t")
        .unwrap()
        .findings
        .into_iter()
        .map(|f| f.site.location.function)
        .collect()
}

proptest! {
    #[test]
    fn raising_threshold_never_adds_findings(f in fleet(), t in 1..40u64, dt in 0..20u64) {
        let low = AnalyzerConfig { threshold: t, top_n: 100, ..AnalyzerConfig::default() };
        let high = AnalyzerConfig { threshold: t + dt, ..low.clone() };
        prop_assert!(functions(&f, &high).is_subset(&functions(&f, &low)));
    }

    #[test]
    fn suppressed_functions_never_reported(f in fleet(), t in 1..40u64, mask in prop::collection::vec(any::<bool>(), 6)) {
        let open = AnalyzerConfig { threshold: t, top_n: 100, ..AnalyzerConfig::default() };
        let suppression: BTreeSet<String> =
            (0..6).filter(|i| mask[*i]).map(|i| format!("pkg.f{i}")).collect();
        let closed = AnalyzerConfig { suppression: suppression.clone(), ..open.clone() };
        let base = analyze_fleet(&f, &open, "t").unwrap();
        let report = analyze_fleet(&f, &closed, "t").unwrap();
        for s in &report.findings {
            prop_assert!(!suppression.contains(&s.site.location.function));
        }
        // every suppressed site's total shows up in the summary
        let mut want: BTreeMap<String, u64> = BTreeMap::new();
        for s in &base.findings {
            if suppression.contains(&s.site.location.function) {
                want.insert(s.site.location.function.clone(), s.total);
            }
        }
        prop_assert_eq!(&report.suppressed, &want);
        prop_assert_eq!(report.findings.len() + want.len(), base.findings.len());
    }

    #[test]
    fn reports_are_deterministic(f in fleet(), t in 1..40u64) {
        let cfg = AnalyzerConfig { threshold: t, ..AnalyzerConfig::default() };
        prop_assert_eq!(analyze_fleet(&f, &cfg, "t").unwrap(), analyze_fleet(&f, &cfg, "t").unwrap());
    }

    #[test]
    fn histogram_percentages_sum_to_100(f in fleet()) {
        let h = chanleak_core::analyzer::kind_histogram(&f);
        let n: u64 = h.values().map(|e| e.count).sum();
        let total: u64 = f.iter().map(|p| p.goroutines.len() as u64).sum();
        prop_assert_eq!(n, total);
        let pct: f64 = h.values().map(|e| e.percent).sum();
        if total > 0 {
            prop_assert!((pct - 100.0).abs() <= 0.1);
        } else {
            prop_assert_eq!(pct, 0.0);
        }
    }
}

#[test]
fn snapshot_of_finished_run_is_empty() {
    let p = load_program("entry {\n  make c 1\n  send c\n}\n").unwrap();
    let e = run(&p, &SchedulerConfig::default()).unwrap();
    assert!(e.tasks.iter().all(|t| t.status == TaskStatus::Done));
    let prof = chanleak_core::profile::snapshot(&e, "x", "0");
    assert!(prof.goroutines.is_empty());
    assert_eq!(emit_profile(&prof), "goroutine profile: total 0\ninstance: x\ncaptured_at: 0\n");
}
