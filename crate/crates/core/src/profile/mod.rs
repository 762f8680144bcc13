//! Goroutine profiles: data model, text wire format, simulator snapshots,
//! and the blocked-stack classifier.

mod classify;
mod snapshot;
mod wire;

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::SourceLoc;

pub use classify::{classify, classify_with, ClassifyError, Signatures, PARK_SYMBOL, RUNTIME_PREFIX};
pub use snapshot::{kind_for_status, snapshot, snapshot_records};
pub use wire::{emit_profile, parse_profile, ProfileErrorKind, ProfileParseError};

/// One instantaneous dump of every goroutine in a process instance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GoroutineProfile {
    pub instance_id: String,
    pub captured_at: String,
    /// Sorted by id; ids are unique.
    pub goroutines: Vec<GoroutineRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GoroutineRecord {
    pub id: u64,
    /// Wait reason or state, e.g. `chan send`, `select`, `IO wait`, `running`.
    pub state_label: String,
    /// Innermost first.
    pub frames: Vec<Frame>,
    pub created_by: Option<Frame>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub symbol: String,
    pub file: String,
    pub line: u32,
    /// Channel-wait annotations recorded under a select frame, one symbol per
    /// arm (`time.Tick`, `context.Done`, `chan done`, ...).
    pub arms: Vec<String>,
}

impl Frame {
    pub fn new(symbol: impl Into<String>, file: impl Into<String>, line: u32) -> Self {
        Self {
            symbol: symbol.into(),
            file: file.into(),
            line,
            arms: Vec::new(),
        }
    }

    pub fn location(&self) -> SourceLoc {
        SourceLoc::new(self.symbol.clone(), self.file.clone(), self.line)
    }

    pub fn is_runtime(&self) -> bool {
        self.symbol.starts_with(RUNTIME_PREFIX)
    }
}

impl From<&SourceLoc> for Frame {
    fn from(loc: &SourceLoc) -> Self {
        Frame::new(loc.function.clone(), loc.file.clone(), loc.line)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BlockKind {
    ChanSend,
    ChanRecv,
    Select,
    IoWait,
    Syscall,
    Sleep,
    CondWait,
    SemAcquire,
    Running,
    Other,
}

impl BlockKind {
    pub const ALL: [BlockKind; 10] = [
        BlockKind::ChanSend,
        BlockKind::ChanRecv,
        BlockKind::Select,
        BlockKind::IoWait,
        BlockKind::Syscall,
        BlockKind::Sleep,
        BlockKind::CondWait,
        BlockKind::SemAcquire,
        BlockKind::Running,
        BlockKind::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            BlockKind::ChanSend => "ChanSend",
            BlockKind::ChanRecv => "ChanRecv",
            BlockKind::Select => "Select",
            BlockKind::IoWait => "IOWait",
            BlockKind::Syscall => "Syscall",
            BlockKind::Sleep => "Sleep",
            BlockKind::CondWait => "CondWait",
            BlockKind::SemAcquire => "SemAcquire",
            BlockKind::Running => "Running",
            BlockKind::Other => "Other",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s)
    }

    /// Blocked on a channel operation (send, receive, or select).
    pub fn is_channel(self) -> bool {
        matches!(self, BlockKind::ChanSend | BlockKind::ChanRecv | BlockKind::Select)
    }
}

impl fmt::Display for BlockKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Histogram bucket. Splits channel kinds by nil-channel and zero-case
/// waits, giving one bucket per blocking type commonly seen in lingering
/// goroutines, plus `Other`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Category {
    ChanRecv,
    ChanRecvNil,
    ChanSend,
    ChanSendNil,
    Select,
    SelectNoCases,
    IoWait,
    Syscall,
    Sleep,
    Running,
    CondWait,
    SemAcquire,
    Other,
}

impl Category {
    pub const ALL: [Category; 13] = [
        Category::ChanRecv,
        Category::ChanRecvNil,
        Category::ChanSend,
        Category::ChanSendNil,
        Category::Select,
        Category::SelectNoCases,
        Category::IoWait,
        Category::Syscall,
        Category::Sleep,
        Category::Running,
        Category::CondWait,
        Category::SemAcquire,
        Category::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::ChanRecv => "chan receive (non-nil chan)",
            Category::ChanRecvNil => "chan receive (nil chan)",
            Category::ChanSend => "chan send (non-nil chan)",
            Category::ChanSendNil => "chan send (nil chan)",
            Category::Select => "select (>0 cases)",
            Category::SelectNoCases => "select (0 cases)",
            Category::IoWait => "IO wait",
            Category::Syscall => "System call",
            Category::Sleep => "Sleep",
            Category::Running => "Running/Runnable",
            Category::CondWait => "Condition Wait",
            Category::SemAcquire => "Semaphore Acquire",
            Category::Other => "Other",
        }
    }

    pub fn of(rec: &GoroutineRecord, sigs: &Signatures) -> Category {
        classify::category(site_or_other(rec, sigs).kind, rec)
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl GoroutineRecord {
    /// Select-arm symbols recorded on any frame.
    pub fn select_arms(&self) -> Vec<&str> {
        classify::select_arms(self)
    }
}

/// Aggregation key: what a goroutine is doing and where.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BlockSite {
    pub kind: BlockKind,
    /// First non-runtime frame.
    pub location: SourceLoc,
}

impl PartialOrd for BlockSite {
    fn partial_cmp(&self, other: &Self) -> Option<core::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for BlockSite {
    fn cmp(&self, other: &Self) -> core::cmp::Ordering {
        self.location.cmp(&other.location).then(self.kind.cmp(&other.kind))
    }
}

impl fmt::Display for BlockSite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at {} ({})", self.kind, self.location, self.location.function)
    }
}

/// Counts records per blocking site. Records that fail to classify are
/// counted under `Other` at their top frame.
pub fn tally(profile: &GoroutineProfile) -> BTreeMap<BlockSite, u64> {
    tally_with(profile, &Signatures::default())
}

pub fn tally_with(profile: &GoroutineProfile, sigs: &Signatures) -> BTreeMap<BlockSite, u64> {
    let mut out = BTreeMap::new();
    for rec in &profile.goroutines {
        *out.entry(site_or_other(rec, sigs)).or_insert(0) += 1;
    }
    out
}

/// [`classify_with`], falling back to `Other` at the top frame.
pub fn site_or_other(rec: &GoroutineRecord, sigs: &Signatures) -> BlockSite {
    classify_with(rec, sigs).unwrap_or_else(|_| BlockSite {
        kind: BlockKind::Other,
        location: rec
            .frames
            .first()
            .map(Frame::location)
            .unwrap_or_else(|| SourceLoc::new("", "", 0)),
    })
}
