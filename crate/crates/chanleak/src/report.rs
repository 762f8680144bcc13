//! JSON and text renderings of a [`LeakReport`].
//!
//! JSON layout (schema version 1):
//!
//! ```text
//! { schema_version, generated_at, profiles,
//!   config: { threshold, top_n, transient_symbols[], suppression[],
//!             signatures: { park, send[], recv[], select[] } },
//!   findings: [ { kind, file, line, function, total, rms,
//!                 per_instance: [ { instance, count } ],
//!                 representative: { instance, goroutine, state,
//!                                   frames: [ { symbol, file, line } ] } } ],
//!   histogram: { <category>: { count, percent } },   // Category::ALL order
//!   suppressed: { <function>: count } }
//! ```

use std::fmt::Write;

use serde::ser::SerializeMap;
use serde::{Serialize, Serializer};

use chanleak_core::analyzer::{HistogramEntry, LeakReport};
use chanleak_core::profile::{Category, Frame};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Serialize)]
struct Json<'a> {
    schema_version: u32,
    generated_at: &'a str,
    profiles: usize,
    config: JsonConfig<'a>,
    findings: Vec<JsonFinding<'a>>,
    histogram: Histogram<'a>,
    suppressed: &'a std::collections::BTreeMap<String, u64>,
}

#[derive(Serialize)]
struct JsonConfig<'a> {
    threshold: u64,
    top_n: usize,
    transient_symbols: Vec<&'a str>,
    suppression: Vec<&'a str>,
    signatures: JsonSignatures<'a>,
}

#[derive(Serialize)]
struct JsonSignatures<'a> {
    park: &'a str,
    send: &'a [String],
    recv: &'a [String],
    select: &'a [String],
}

#[derive(Serialize)]
struct JsonFinding<'a> {
    kind: &'static str,
    file: &'a str,
    line: u32,
    function: &'a str,
    total: u64,
    rms: f64,
    per_instance: Vec<JsonCount<'a>>,
    representative: JsonRepresentative<'a>,
}

#[derive(Serialize)]
struct JsonCount<'a> {
    instance: &'a str,
    count: u64,
}

#[derive(Serialize)]
struct JsonRepresentative<'a> {
    instance: &'a str,
    goroutine: u64,
    state: &'a str,
    frames: Vec<JsonFrame<'a>>,
}

#[derive(Serialize)]
struct JsonFrame<'a> {
    symbol: &'a str,
    file: &'a str,
    line: u32,
    #[serde(skip_serializing_if = "<[String]>::is_empty")]
    arms: &'a [String],
}

/// Serializes in `Category::ALL` order rather than key order.
struct Histogram<'a>(&'a std::collections::BTreeMap<Category, HistogramEntry>);

impl Serialize for Histogram<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Entry {
            count: u64,
            percent: f64,
        }
        let mut m = s.serialize_map(Some(self.0.len()))?;
        for c in Category::ALL {
            if let Some(e) = self.0.get(&c) {
                m.serialize_entry(c.as_str(), &Entry { count: e.count, percent: e.percent })?;
            }
        }
        m.end()
    }
}

fn frame(f: &Frame) -> JsonFrame<'_> {
    JsonFrame { symbol: &f.symbol, file: &f.file, line: f.line, arms: &f.arms }
}

pub fn to_json(r: &LeakReport) -> String {
    let sigs = &r.config.signatures;
    let json = Json {
        schema_version: SCHEMA_VERSION,
        generated_at: &r.generated_at,
        profiles: r.profiles,
        config: JsonConfig {
            threshold: r.config.threshold,
            top_n: r.config.top_n,
            transient_symbols: r.config.transient_symbols.iter().map(String::as_str).collect(),
            suppression: r.config.suppression.iter().map(String::as_str).collect(),
            signatures: JsonSignatures { park: &sigs.park, send: &sigs.send, recv: &sigs.recv, select: &sigs.select },
        },
        findings: r
            .findings
            .iter()
            .map(|f| JsonFinding {
                kind: f.site.kind.as_str(),
                file: &f.site.location.file,
                line: f.site.location.line,
                function: &f.site.location.function,
                total: f.total,
                rms: f.rms,
                per_instance: f
                    .per_instance_counts
                    .iter()
                    .map(|(i, c)| JsonCount { instance: i, count: *c })
                    .collect(),
                representative: JsonRepresentative {
                    instance: &f.representative.instance_id,
                    goroutine: f.representative.record.id,
                    state: &f.representative.record.state_label,
                    frames: f.representative.record.frames.iter().map(frame).collect(),
                },
            })
            .collect(),
        histogram: Histogram(&r.histogram),
        suppressed: &r.suppressed,
    };
    let mut s = serde_json::to_string_pretty(&json).expect("report serializes");
    s.push('\n');
    s
}

pub fn to_text(r: &LeakReport) -> String {
    let mut s = String::new();
    let c = &r.config;
    writeln!(s, "leak report generated_at={}", r.generated_at).unwrap();
    writeln!(s, "profiles: {}  threshold: {}  top_n: {}", r.profiles, c.threshold, c.top_n).unwrap();
    writeln!(s).unwrap();
    if r.findings.is_empty() {
        writeln!(s, "no findings").unwrap();
    }
    for (i, f) in r.findings.iter().enumerate() {
        let loc = &f.site.location;
        writeln!(s, "#{} {} at {} in {}", i + 1, f.site.kind, loc, loc.function).unwrap();
        writeln!(s, "   blocked goroutines: total {}  rms {:.2}", f.total, f.rms).unwrap();
        for (inst, n) in &f.per_instance_counts {
            writeln!(s, "   {inst}: {n}").unwrap();
        }
        let rep = &f.representative;
        writeln!(s, "   representative: {} goroutine {} [{}]", rep.instance_id, rep.record.id, rep.record.state_label).unwrap();
        for fr in &rep.record.frames {
            writeln!(s, "     {} {}:{}", fr.symbol, fr.file, fr.line).unwrap();
            for arm in &fr.arms {
                writeln!(s, "       arm {arm}").unwrap();
            }
        }
    }
    if !r.suppressed.is_empty() {
        writeln!(s, "\nsuppressed:").unwrap();
        for (func, n) in &r.suppressed {
            writeln!(s, "  {func}: {n}").unwrap();
        }
    }
    writeln!(s, "\nblocking types:").unwrap();
    for cat in Category::ALL {
        let e = r.histogram[&cat];
        writeln!(s, "  {:<28} {:>8} {:>6.2}%", cat.as_str(), e.count, e.percent).unwrap();
    }
    s
}
