//! Deterministic simulator of tasks and channels.
//!
//! The scheduler is cooperative round-robin: each turn the task at the head of
//! the run queue executes one instruction and, if still runnable, goes to the
//! back. The only randomness is the choice among simultaneously ready `select`
//! arms, drawn from a generator seeded by [`SchedulerConfig::seed`]. Time is a
//! logical tick counter that advances only when no task is runnable, jumping
//! to the next pending timer.
//!
//! A run ends when no task is runnable and either no timer is pending
//! ([`Outcome::Quiescent`]) or the next timer lies beyond
//! [`SchedulerConfig::model_time`] ([`Outcome::HorizonReached`]). Both are the
//! simulator's notion of "the program has finished"; whatever tasks remain
//! alive at that point are lingering.

mod code;
mod sim;
mod trace;

use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::dsl::SimProgram;
use crate::SourceLoc;

pub use sim::{Simulator, StepResult};
pub use trace::{Trace, TraceEvent, TraceOp};

pub const DEFAULT_MAX_STEPS: u64 = 1_000_000;
pub const DEFAULT_MODEL_TIME: u64 = 1_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SchedulerConfig {
    /// Seeds `select` arm choice.
    pub seed: u64,
    /// Bound on executed instructions.
    pub max_steps: u64,
    /// Logical-time horizon in ticks; timers beyond it never fire.
    pub model_time: u64,
}

impl Default for SchedulerConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            max_steps: DEFAULT_MAX_STEPS,
            model_time: DEFAULT_MODEL_TIME,
        }
    }
}

impl SchedulerConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self { seed, ..Self::default() }
    }
}

/// Task identifier; the entry task is 1, spawned tasks count up from there.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TaskId(pub u64);

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TaskStatus {
    Running,
    Runnable,
    BlockedSend,
    BlockedRecv,
    BlockedSelect,
    Sleeping,
    IoWait,
    Syscall,
    CondWait,
    SemAcquire,
    Done,
}

impl TaskStatus {
    /// Any parked state: channel blocking, sleeping, or waiting on a token.
    pub fn is_waiting(self) -> bool {
        !matches!(self, TaskStatus::Running | TaskStatus::Runnable | TaskStatus::Done)
    }

    pub fn is_channel_blocked(self) -> bool {
        matches!(
            self,
            TaskStatus::BlockedSend | TaskStatus::BlockedRecv | TaskStatus::BlockedSelect
        )
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TaskStatus::Running => "Running",
            TaskStatus::Runnable => "Runnable",
            TaskStatus::BlockedSend => "BlockedSend",
            TaskStatus::BlockedRecv => "BlockedRecv",
            TaskStatus::BlockedSelect => "BlockedSelect",
            TaskStatus::Sleeping => "Sleeping",
            TaskStatus::IoWait => "IOWait",
            TaskStatus::Syscall => "Syscall",
            TaskStatus::CondWait => "CondWait",
            TaskStatus::SemAcquire => "SemAcquire",
            TaskStatus::Done => "Done",
        }
    }
}

impl fmt::Display for TaskStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Exit {
    Returned,
    Panicked(String),
}

/// Extra detail on what a waiting task is parked on.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BlockDetail {
    pub nil_channel: bool,
    /// The receive heads a `range` loop.
    pub range_loop: bool,
    /// One symbol per arm of a blocked select, e.g. `time.Tick`,
    /// `context.Done`, or `chan <var>`; empty for a select with no cases.
    pub select_arms: Vec<String>,
}

/// Public view of one task.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskRecord {
    pub id: TaskId,
    pub status: TaskStatus,
    /// Present exactly when the task is waiting.
    pub blocking_site: Option<SourceLoc>,
    /// The spawn statement; `None` for the entry task.
    pub creation_site: Option<SourceLoc>,
    /// Current position in each active function, innermost first. Empty once
    /// the task is done.
    pub frames: Vec<SourceLoc>,
    pub exit: Option<Exit>,
    pub detail: BlockDetail,
}

/// Public view of one channel at the end of a run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChannelState {
    pub id: usize,
    pub capacity: usize,
    pub buffer: Vec<i64>,
    pub closed: bool,
    /// Origin symbol (`chan <var>`, `time.After`, `time.Tick`, `context.Done`).
    pub origin: String,
    /// Values accepted by the channel: handed off or buffered.
    pub sent: u64,
    /// Values taken out; receives of the closed-channel zero value excluded.
    pub received: u64,
    pub blocked_senders: usize,
    pub blocked_receivers: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Quiescent,
    HorizonReached,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Execution {
    pub outcome: Outcome,
    pub trace: Trace,
    pub tasks: Vec<TaskRecord>,
    pub channels: Vec<ChannelState>,
    pub now: u64,
    pub steps: u64,
}

impl Execution {
    /// Tasks still alive at the end of the run.
    pub fn lingering(&self) -> impl Iterator<Item = &TaskRecord> {
        self.tasks.iter().filter(|t| t.status != TaskStatus::Done)
    }

    pub fn panics(&self) -> impl Iterator<Item = &TaskRecord> {
        self.tasks
            .iter()
            .filter(|t| matches!(t.exit, Some(Exit::Panicked(_))))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RunError {
    /// The step bound was hit while tasks were still runnable. The partial
    /// execution is kept so lingering tasks can still be inspected.
    #[error("step bound of {max_steps} exceeded with runnable tasks")]
    BoundExceeded { max_steps: u64, execution: Box<Execution> },
}

impl RunError {
    pub fn execution(&self) -> &Execution {
        match self {
            RunError::BoundExceeded { execution, .. } => execution,
        }
    }

    pub fn into_execution(self) -> Execution {
        match self {
            RunError::BoundExceeded { execution, .. } => *execution,
        }
    }
}

/// Runs `program` to quiescence, the time horizon, or the step bound.
pub fn run(program: &SimProgram, config: &SchedulerConfig) -> Result<Execution, RunError> {
    Simulator::new(program, *config).run()
}
