use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use super::TaskId;
use crate::SourceLoc;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TraceOp {
    Make,
    Send,
    Recv,
    Select,
    Close,
    Spawn,
    Call,
    Sleep,
    After,
    Tick,
    Ctx,
    Cancel,
    Wait,
    Release,
    Panic,
    Return,
}

impl TraceOp {
    pub fn as_str(self) -> &'static str {
        match self {
            TraceOp::Make => "make",
            TraceOp::Send => "send",
            TraceOp::Recv => "recv",
            TraceOp::Select => "select",
            TraceOp::Close => "close",
            TraceOp::Spawn => "spawn",
            TraceOp::Call => "call",
            TraceOp::Sleep => "sleep",
            TraceOp::After => "after",
            TraceOp::Tick => "tick",
            TraceOp::Ctx => "ctx",
            TraceOp::Cancel => "cancel",
            TraceOp::Wait => "wait",
            TraceOp::Release => "release",
            TraceOp::Panic => "panic",
            TraceOp::Return => "return",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceEvent {
    pub step: u64,
    pub task: TaskId,
    pub op: TraceOp,
    pub site: SourceLoc,
    pub detail: String,
}

impl fmt::Display for TraceEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "step={} task={} op={} site={} detail={}",
            self.step,
            self.task,
            self.op.as_str(),
            self.site,
            self.detail
        )
    }
}

/// Step-by-step record of a run. Renders one event per line.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Trace {
    pub events: Vec<TraceEvent>,
}

impl Trace {
    pub fn iter(&self) -> impl Iterator<Item = &TraceEvent> {
        self.events.iter()
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }
}

impl fmt::Display for Trace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in &self.events {
            writeln!(f, "{e}")?;
        }
        Ok(())
    }
}
