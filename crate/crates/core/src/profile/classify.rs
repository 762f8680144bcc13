use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::{BlockKind, BlockSite, Category, GoroutineRecord};

pub const PARK_SYMBOL: &str = "runtime.gopark";
pub const RUNTIME_PREFIX: &str = "runtime.";

/// Runtime symbols that identify a channel operation beneath the park frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Signatures {
    pub park: String,
    pub send: Vec<String>,
    pub recv: Vec<String>,
    pub select: Vec<String>,
}

impl Default for Signatures {
    fn default() -> Self {
        let s = |xs: &[&str]| xs.iter().map(|x| String::from(*x)).collect::<Vec<_>>();
        Self {
            park: PARK_SYMBOL.into(),
            send: s(&["runtime.chansend", "runtime.chansend1"]),
            recv: s(&["runtime.chanrecv", "runtime.chanrecv1", "runtime.chanrecv2"]),
            // runtime.block parks a select with no cases.
            select: s(&["runtime.selectgo", "runtime.block"]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ClassifyError {
    #[error("goroutine {0} has no frames")]
    EmptyStack(u64),
    #[error("goroutine {0} is parked but has no non-runtime caller")]
    NoCaller(u64),
}

pub fn classify(rec: &GoroutineRecord) -> Result<BlockSite, ClassifyError> {
    classify_with(rec, &Signatures::default())
}

pub fn classify_with(rec: &GoroutineRecord, sigs: &Signatures) -> Result<BlockSite, ClassifyError> {
    let top = rec.frames.first().ok_or(ClassifyError::EmptyStack(rec.id))?;
    let caller = rec.frames.iter().find(|f| !f.is_runtime());
    let label = base_label(&rec.state_label);

    if top.symbol != sigs.park {
        let kind = match label {
            "running" | "runnable" => BlockKind::Running,
            "syscall" => BlockKind::Syscall,
            _ => BlockKind::Other,
        };
        let at = caller.unwrap_or(top);
        return Ok(BlockSite { kind, location: at.location() });
    }

    let caller = caller.ok_or(ClassifyError::NoCaller(rec.id))?;
    let beneath = rec.frames[1..].iter().take_while(|f| f.is_runtime());
    let mut kind = None;
    for f in beneath {
        let sym = f.symbol.as_str();
        if sigs.send.iter().any(|s| s == sym) {
            kind = Some(BlockKind::ChanSend);
        } else if sigs.recv.iter().any(|s| s == sym) {
            kind = Some(BlockKind::ChanRecv);
        } else if sigs.select.iter().any(|s| s == sym) {
            kind = Some(BlockKind::Select);
        }
        if kind.is_some() {
            break;
        }
    }
    let kind = kind.unwrap_or_else(|| label_kind(label));
    Ok(BlockSite { kind, location: caller.location() })
}

/// Strips the `, N minutes` suffix Go appends to long waits.
fn base_label(label: &str) -> &str {
    label.split(", ").next().unwrap_or(label).trim()
}

fn label_kind(label: &str) -> BlockKind {
    match label {
        "IO wait" => BlockKind::IoWait,
        "syscall" => BlockKind::Syscall,
        "sleep" => BlockKind::Sleep,
        "sync.Cond.Wait" => BlockKind::CondWait,
        "semacquire" | "sync.Mutex.Lock" | "sync.RWMutex.Lock" | "sync.RWMutex.RLock"
        | "sync.WaitGroup.Wait" => BlockKind::SemAcquire,
        _ => BlockKind::Other,
    }
}

/// Refines a kind into a blocking category using the state label, which is
/// where the runtime records nil-channel and zero-case waits.
pub(crate) fn category(kind: BlockKind, rec: &GoroutineRecord) -> Category {
    let label = base_label(&rec.state_label);
    let nil = label.ends_with("(nil chan)");
    match kind {
        BlockKind::ChanSend if nil => Category::ChanSendNil,
        BlockKind::ChanSend => Category::ChanSend,
        BlockKind::ChanRecv if nil => Category::ChanRecvNil,
        BlockKind::ChanRecv => Category::ChanRecv,
        BlockKind::Select
            if label == "select (no cases)"
                || rec.frames.iter().any(|f| f.symbol == "runtime.block") =>
        {
            Category::SelectNoCases
        }
        BlockKind::Select => Category::Select,
        BlockKind::IoWait => Category::IoWait,
        BlockKind::Syscall => Category::Syscall,
        BlockKind::Sleep => Category::Sleep,
        BlockKind::Running => Category::Running,
        BlockKind::CondWait => Category::CondWait,
        BlockKind::SemAcquire => Category::SemAcquire,
        BlockKind::Other => Category::Other,
    }
}

/// Arm symbols recorded anywhere in the stack.
pub(crate) fn select_arms(rec: &GoroutineRecord) -> Vec<&str> {
    let mut out = vec![];
    for f in &rec.frames {
        out.extend(f.arms.iter().map(String::as_str));
    }
    out
}
