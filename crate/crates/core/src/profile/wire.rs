//! Text wire format, modeled on the Go runtime's full goroutine dump.
//!
//! ```text
//! goroutine profile: total 1
//! instance: svc-3
//! captured_at: 2024-05-01T00:00:00Z
//!
//! goroutine 18 [chan send]:
//! runtime.gopark
//! 	runtime/proc.go:398
//! server.ComputeCost$1
//! 	transactions/cost.go:8
//! created by server.ComputeCost
//! 	transactions/cost.go:6
//! ```
//!
//! The `instance:` and `captured_at:` lines are optional. A frame may carry
//! `\tarm <symbol>` lines after its location naming the channels a select
//! waits on. On input, ` +0x..` offsets after a location, argument lists after
//! a symbol and ` in goroutine N` after `created by` are accepted and dropped.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write;

use super::{Frame, GoroutineProfile, GoroutineRecord};

const HEADER: &str = "goroutine profile: total ";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}: {kind}")]
pub struct ProfileParseError {
    pub line: usize,
    pub kind: ProfileErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ProfileErrorKind {
    #[error("malformed header, expected `goroutine profile: total <N>`")]
    MalformedHeader,
    #[error("header says {declared} goroutines but {found} were listed")]
    TotalMismatch { declared: usize, found: usize },
    #[error("malformed goroutine header `{0}`")]
    MalformedGoroutine(String),
    #[error("frame `{0}` has no location line")]
    FrameWithoutLocation(String),
    #[error("malformed location `{0}`")]
    MalformedLocation(String),
    #[error("duplicate goroutine id {0}")]
    DuplicateId(u64),
    #[error("goroutine {0} has no frames")]
    NoFrames(u64),
    #[error("unexpected line `{0}`")]
    Unexpected(String),
}

pub fn emit_profile(profile: &GoroutineProfile) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{HEADER}{}", profile.goroutines.len());
    if !profile.instance_id.is_empty() {
        let _ = writeln!(out, "instance: {}", profile.instance_id);
    }
    if !profile.captured_at.is_empty() {
        let _ = writeln!(out, "captured_at: {}", profile.captured_at);
    }
    let mut gs: Vec<&GoroutineRecord> = profile.goroutines.iter().collect();
    gs.sort_by_key(|g| g.id);
    for g in gs {
        out.push('\n');
        let _ = writeln!(out, "goroutine {} [{}]:", g.id, g.state_label);
        for f in &g.frames {
            emit_frame(&mut out, "", f);
        }
        if let Some(c) = &g.created_by {
            emit_frame(&mut out, "created by ", c);
        }
    }
    out
}

fn emit_frame(out: &mut String, prefix: &str, f: &Frame) {
    let _ = writeln!(out, "{prefix}{}\n\t{}:{}", f.symbol, f.file, f.line);
    for a in &f.arms {
        let _ = writeln!(out, "\tarm {a}");
    }
}

struct Lines<'a> {
    lines: Vec<&'a str>,
    pos: usize,
}

impl<'a> Lines<'a> {
    fn peek(&self) -> Option<&'a str> {
        self.lines.get(self.pos).copied()
    }

    fn next(&mut self) -> Option<&'a str> {
        let l = self.peek();
        if l.is_some() {
            self.pos += 1;
        }
        l
    }

    /// 1-based number of the line last returned by `next`.
    fn lineno(&self) -> usize {
        self.pos
    }

    fn err(&self, kind: ProfileErrorKind) -> ProfileParseError {
        ProfileParseError { line: self.lineno(), kind }
    }
}

pub fn parse_profile(text: &str) -> Result<GoroutineProfile, ProfileParseError> {
    let mut ls = Lines {
        lines: text.lines().map(|l| l.strip_suffix('\r').unwrap_or(l)).collect(),
        pos: 0,
    };
    let header = ls.next().unwrap_or("");
    let declared: usize = header
        .strip_prefix(HEADER)
        .and_then(|n| n.trim().parse().ok())
        .ok_or_else(|| ProfileParseError { line: 1, kind: ProfileErrorKind::MalformedHeader })?;

    let mut profile = GoroutineProfile {
        instance_id: String::new(),
        captured_at: String::new(),
        goroutines: Vec::new(),
    };
    while let Some(l) = ls.peek() {
        if let Some(v) = l.strip_prefix("instance: ") {
            profile.instance_id = v.to_string();
        } else if let Some(v) = l.strip_prefix("captured_at: ") {
            profile.captured_at = v.to_string();
        } else {
            break;
        }
        ls.next();
    }

    let mut seen = alloc::collections::BTreeSet::new();
    while let Some(l) = ls.next() {
        if l.trim().is_empty() {
            continue;
        }
        let g = parse_goroutine(&mut ls, l)?;
        if !seen.insert(g.id) {
            return Err(ProfileParseError {
                line: g_line(&ls, g.id),
                kind: ProfileErrorKind::DuplicateId(g.id),
            });
        }
        profile.goroutines.push(g);
    }
    if declared != profile.goroutines.len() {
        return Err(ProfileParseError {
            line: 1,
            kind: ProfileErrorKind::TotalMismatch { declared, found: profile.goroutines.len() },
        });
    }
    profile.goroutines.sort_by_key(|g| g.id);
    Ok(profile)
}

/// Line number of the last header for goroutine `id`.
fn g_line(ls: &Lines<'_>, id: u64) -> usize {
    let prefix = format!("goroutine {id} [");
    ls.lines[..ls.pos]
        .iter()
        .rposition(|l| l.starts_with(&prefix))
        .map_or(ls.pos, |i| i + 1)
}

fn parse_goroutine(ls: &mut Lines<'_>, header: &str) -> Result<GoroutineRecord, ProfileParseError> {
    let bad = || ProfileErrorKind::MalformedGoroutine(header.into());
    let rest = header.strip_prefix("goroutine ").ok_or_else(|| {
        ls.err(if header.starts_with('\t') {
            ProfileErrorKind::Unexpected(header.into())
        } else {
            bad()
        })
    })?;
    let (id, rest) = rest.split_once(" [").ok_or_else(|| ls.err(bad()))?;
    let label = rest.strip_suffix("]:").ok_or_else(|| ls.err(bad()))?;
    let id: u64 = id.parse().map_err(|_| ls.err(bad()))?;
    let header_line = ls.lineno();

    let mut rec = GoroutineRecord {
        id,
        state_label: label.into(),
        frames: Vec::new(),
        created_by: None,
    };
    while let Some(l) = ls.peek() {
        if l.trim().is_empty() {
            break;
        }
        ls.next();
        if l.starts_with("...") {
            // elided frames marker
            continue;
        }
        if l.starts_with('\t') {
            return Err(ls.err(ProfileErrorKind::Unexpected(l.into())));
        }
        if let Some(sym) = l.strip_prefix("created by ") {
            let sym = sym.split(" in goroutine ").next().unwrap_or(sym);
            rec.created_by = Some(parse_frame(ls, sym)?);
            continue;
        }
        if rec.created_by.is_some() {
            return Err(ls.err(ProfileErrorKind::Unexpected(l.into())));
        }
        rec.frames.push(parse_frame(ls, strip_args(l))?);
    }
    if rec.frames.is_empty() {
        return Err(ProfileParseError { line: header_line, kind: ProfileErrorKind::NoFrames(id) });
    }
    Ok(rec)
}

/// `pkg.f(0xc000, 0x1)` -> `pkg.f`. Only a trailing parenthesised group is
/// removed, so symbols like `pkg.(*T).m` survive.
fn strip_args(sym: &str) -> &str {
    if sym.ends_with(')') {
        if let Some(open) = sym.rfind('(') {
            if open > 0 && !sym[..open].ends_with('.') {
                return &sym[..open];
            }
        }
    }
    sym
}

fn parse_frame(ls: &mut Lines<'_>, symbol: &str) -> Result<Frame, ProfileParseError> {
    let loc = match ls.peek() {
        Some(l) if l.starts_with('\t') && !l.starts_with("\tarm ") => {
            ls.next();
            &l[1..]
        }
        _ => {
            ls.next();
            return Err(ls.err(ProfileErrorKind::FrameWithoutLocation(symbol.into())));
        }
    };
    let loc = loc.split(" +0x").next().unwrap_or(loc).trim_end();
    let (file, line) = loc
        .rsplit_once(':')
        .and_then(|(f, n)| Some((f, n.parse::<u32>().ok()?)))
        .filter(|(f, _)| !f.is_empty())
        .ok_or_else(|| ls.err(ProfileErrorKind::MalformedLocation(loc.into())))?;
    let mut frame = Frame::new(symbol, file, line);
    while let Some(a) = ls.peek().and_then(|l| l.strip_prefix("\tarm ")) {
        ls.next();
        frame.arms.push(a.into());
    }
    Ok(frame)
}
