//! Built-in leak scenarios, each with a leaky and a fixed variant.
//!
//! The program texts live in `crates/core/scenarios/` and are compiled in.

use alloc::vec;
use alloc::vec::Vec;

use super::{load_program, SimProgram};
use crate::profile::BlockKind;
use crate::SourceLoc;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tag {
    /// Tasks end permanently blocked.
    Leak,
    /// Tasks never finish but keep waking up.
    AntiPattern,
    Clean,
}

impl Tag {
    pub fn as_str(self) -> &'static str {
        match self {
            Tag::Leak => "leak",
            Tag::AntiPattern => "anti-pattern",
            Tag::Clean => "clean",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExpectedSite {
    pub kind: BlockKind,
    pub loc: SourceLoc,
    pub count: u64,
}

/// What the task table should look like once the scenario finishes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScenarioExpectation {
    pub leaky: bool,
    pub tag: Tag,
    pub sites: Vec<ExpectedSite>,
    /// The expectation holds for every seed.
    pub seed_independent: bool,
}

impl ScenarioExpectation {
    fn clean() -> Self {
        Self { leaky: false, tag: Tag::Clean, sites: Vec::new(), seed_independent: true }
    }

    fn leak(tag: Tag, sites: Vec<ExpectedSite>) -> Self {
        let leaky = sites.iter().any(|s| s.count > 0);
        let sites = sites.into_iter().filter(|s| s.count > 0).collect();
        Self { leaky, tag: if leaky { tag } else { Tag::Clean }, sites, seed_independent: true }
    }

    pub fn expected_leak_count(&self) -> u64 {
        self.sites.iter().map(|s| s.count).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scenario {
    pub name: &'static str,
    pub fixed: bool,
    pub summary: &'static str,
    pub program: SimProgram,
    pub expectation: ScenarioExpectation,
    /// Seed the expectation was recorded with.
    pub seed: u64,
}

macro_rules! fixture {
    ($name:literal) => {
        include_str!(concat!("../../scenarios/", $name, ".chan"))
    };
}

pub const DISCOUNT_FETCH: &str = fixture!("discount-fetch");
pub const DISCOUNT_FETCH_FIXED: &str = fixture!("discount-fetch.fixed");
pub const PREMATURE_RETURN: &str = fixture!("premature-return");
pub const PREMATURE_RETURN_FIXED: &str = fixture!("premature-return.fixed");
pub const TIMEOUT_LEAK: &str = fixture!("timeout-leak");
pub const TIMEOUT_LEAK_FIXED: &str = fixture!("timeout-leak.fixed");
pub const NCAST: &str = fixture!("ncast");
pub const NCAST_FIXED: &str = fixture!("ncast.fixed");
pub const DOUBLE_SEND: &str = fixture!("double-send");
pub const DOUBLE_SEND_FIXED: &str = fixture!("double-send.fixed");
pub const UNCLOSED_RANGE: &str = fixture!("unclosed-range");
pub const UNCLOSED_RANGE_FIXED: &str = fixture!("unclosed-range.fixed");
pub const TIMER_LOOP: &str = fixture!("timer-loop");
pub const TIMER_LOOP_FIXED: &str = fixture!("timer-loop.fixed");
pub const METHOD_CONTRACT: &str = fixture!("method-contract");
pub const METHOD_CONTRACT_FIXED: &str = fixture!("method-contract.fixed");
pub const ZERO_CASE_SELECT: &str = fixture!("zero-case-select");
pub const ZERO_CASE_SELECT_FIXED: &str = fixture!("zero-case-select.fixed");

/// Names accepted by [`scenario`], leaky variants first.
pub const NAMES: [&str; 9] = [
    "premature-return",
    "timeout-leak",
    "ncast",
    "double-send",
    "unclosed-range",
    "timer-loop",
    "method-contract",
    "zero-case-select",
    "discount-fetch",
];

fn load(text: &str) -> SimProgram {
    load_program(text).expect("built-in scenario parses")
}

fn site(kind: BlockKind, function: &str, file: &str, line: u32, count: u64) -> ExpectedSite {
    ExpectedSite { kind, loc: SourceLoc::new(function, file, line), count }
}

/// Every built-in scenario in both variants, at default parameters.
pub fn builtin_scenarios() -> Vec<Scenario> {
    NAMES
        .iter()
        .flat_map(|n| [scenario(n, false), scenario(n, true)])
        .map(|s| s.expect("listed scenario exists"))
        .collect()
}

/// Looks up a built-in scenario by name at its default parameters.
pub fn scenario(name: &str, fixed: bool) -> Option<Scenario> {
    let s = match (name, fixed) {
        ("discount-fetch", false) => discount_fetch(true),
        ("discount-fetch", true) => Scenario {
            name: "discount-fetch",
            fixed: true,
            summary: "discount sender with a one-slot buffer",
            program: load(DISCOUNT_FETCH_FIXED).with_token("err", true)?,
            expectation: ScenarioExpectation::clean(),
            seed: 0,
        },
        ("premature-return", _) => Scenario {
            name: "premature-return",
            fixed,
            summary: "parent returns before receiving",
            program: load(if fixed { PREMATURE_RETURN_FIXED } else { PREMATURE_RETURN }),
            expectation: if fixed {
                ScenarioExpectation::clean()
            } else {
                ScenarioExpectation::leak(
                    Tag::Leak,
                    vec![site(BlockKind::ChanSend, "handler.Fetch$1", "handler/fetch.go", 3, 1)],
                )
            },
            seed: 0,
        },
        ("timeout-leak", _) => Scenario {
            name: "timeout-leak",
            fixed,
            summary: "handler times out before the worker sends",
            program: load(if fixed { TIMEOUT_LEAK_FIXED } else { TIMEOUT_LEAK }),
            expectation: if fixed {
                ScenarioExpectation::clean()
            } else {
                ScenarioExpectation::leak(
                    Tag::Leak,
                    vec![site(BlockKind::ChanSend, "handler.Handler$1", "handler/timeout.go", 5, 1)],
                )
            },
            seed: 0,
        },
        ("ncast", false) => ncast(5),
        ("ncast", true) => ncast_fixed(5),
        ("double-send", _) => Scenario {
            name: "double-send",
            fixed,
            summary: "error path sends twice to a single receive",
            program: load(if fixed { DOUBLE_SEND_FIXED } else { DOUBLE_SEND }),
            expectation: if fixed {
                ScenarioExpectation::clean()
            } else {
                ScenarioExpectation::leak(
                    Tag::Leak,
                    vec![site(BlockKind::ChanSend, "queue.sender", "queue/item.go", 7, 1)],
                )
            },
            seed: 0,
        },
        ("unclosed-range", false) => unclosed_range(3),
        ("unclosed-range", true) => unclosed_range_fixed(3),
        ("timer-loop", _) => Scenario {
            name: "timer-loop",
            fixed,
            summary: "reporter loops on a timer with no exit",
            program: load(if fixed { TIMER_LOOP_FIXED } else { TIMER_LOOP }),
            expectation: if fixed {
                ScenarioExpectation::clean()
            } else {
                ScenarioExpectation::leak(
                    Tag::AntiPattern,
                    vec![site(BlockKind::ChanRecv, "stats.statsReporter$1", "stats/reporter.go", 4, 1)],
                )
            },
            seed: 0,
        },
        ("method-contract", _) => Scenario {
            name: "method-contract",
            fixed,
            summary: "Start without Stop leaves the listener in its select",
            program: load(if fixed { METHOD_CONTRACT_FIXED } else { METHOD_CONTRACT }),
            expectation: if fixed {
                ScenarioExpectation::clean()
            } else {
                ScenarioExpectation::leak(
                    Tag::Leak,
                    vec![site(BlockKind::Select, "worker.Worker.Start$1", "worker/worker.go", 9, 1)],
                )
            },
            seed: 0,
        },
        ("zero-case-select", _) => Scenario {
            name: "zero-case-select",
            fixed,
            summary: "goroutine parks on a select with no cases",
            program: load(if fixed { ZERO_CASE_SELECT_FIXED } else { ZERO_CASE_SELECT }),
            expectation: if fixed {
                ScenarioExpectation::clean()
            } else {
                ScenarioExpectation::leak(
                    Tag::Leak,
                    vec![site(BlockKind::Select, "server.serve", "server/serve.go", 10, 1)],
                )
            },
            seed: 0,
        },
        _ => return None,
    };
    Some(s)
}

/// The discount example with the error path taken (`err`) or not.
pub fn discount_fetch(err: bool) -> Scenario {
    let program = load(DISCOUNT_FETCH).with_token("err", err).expect("err is declared");
    let expectation = if err {
        ScenarioExpectation::leak(
            Tag::Leak,
            vec![site(BlockKind::ChanSend, "server.ComputeCost$1", "transactions/cost.go", 8, 1)],
        )
    } else {
        ScenarioExpectation::clean()
    };
    Scenario {
        name: "discount-fetch",
        fixed: false,
        summary: "discount sender leaks when the base-cost lookup fails",
        program,
        expectation,
        seed: 0,
    }
}

/// `n` senders and one receive: `n - 1` senders leak. With no senders the
/// receiver itself blocks.
pub fn ncast(n: u64) -> Scenario {
    Scenario {
        name: "ncast",
        fixed: false,
        summary: "n senders, one receive",
        program: load(NCAST).with_param("n", n).expect("n is declared"),
        expectation: ncast_expectation(n, n.saturating_sub(1)),
        seed: 0,
    }
}

/// `ncast` with an `n`-slot buffer.
pub fn ncast_fixed(n: u64) -> Scenario {
    Scenario {
        name: "ncast",
        fixed: true,
        summary: "n senders into an n-slot buffer",
        program: load(NCAST_FIXED).with_param("n", n).expect("n is declared"),
        expectation: ncast_expectation(n, 0),
        seed: 0,
    }
}

fn ncast_expectation(n: u64, senders: u64) -> ScenarioExpectation {
    let receiver = u64::from(n == 0);
    ScenarioExpectation::leak(
        Tag::Leak,
        vec![
            site(BlockKind::ChanSend, "fanout.Gather$1", "fanout/ncast.go", 4, senders),
            site(BlockKind::ChanRecv, "fanout.Gather", "fanout/ncast.go", 7, receiver),
        ],
    )
}

/// `workers` consumers ranging over a channel that is never closed.
pub fn unclosed_range(workers: u64) -> Scenario {
    let program = load(UNCLOSED_RANGE).with_param("workers", workers).expect("workers is declared");
    let stuck_producer = u64::from(workers == 0 && program.params["items"] > 0);
    Scenario {
        name: "unclosed-range",
        fixed: false,
        summary: "consumers range over a channel nobody closes",
        expectation: ScenarioExpectation::leak(
            Tag::Leak,
            vec![
                site(BlockKind::ChanRecv, "pipeline.producerConsumer$1", "pipeline/consume.go", 6, workers),
                site(BlockKind::ChanSend, "pipeline.producerConsumer", "pipeline/consume.go", 15, stuck_producer),
            ],
        ),
        program,
        seed: 0,
    }
}

/// `unclosed_range` with the channel closed after the producer loop.
pub fn unclosed_range_fixed(workers: u64) -> Scenario {
    let program =
        load(UNCLOSED_RANGE_FIXED).with_param("workers", workers).expect("workers is declared");
    let stuck_producer = u64::from(workers == 0 && program.params["items"] > 0);
    Scenario {
        name: "unclosed-range",
        fixed: true,
        summary: "consumers range over a channel closed by the producer",
        expectation: ScenarioExpectation::leak(
            Tag::Leak,
            vec![site(BlockKind::ChanSend, "pipeline.producerConsumer", "pipeline/consume.go", 15, stuck_producer)],
        ),
        program,
        seed: 0,
    }
}
