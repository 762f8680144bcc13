use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::{BlockKind, Frame, GoroutineProfile, GoroutineRecord, PARK_SYMBOL};
use crate::runtime::{Execution, TaskRecord, TaskStatus};

/// Profile of the live tasks at the end of a run.
pub fn snapshot(exec: &Execution, instance_id: &str, captured_at: &str) -> GoroutineProfile {
    snapshot_records(&exec.tasks, instance_id, captured_at)
}

/// Profile of any task table, including one taken mid-run from
/// [`Simulator::task_records`](crate::runtime::Simulator::task_records).
///
/// Waiting tasks get a runtime sub-stack above their own frames, shaped like
/// the one the Go runtime shows for the same wait, so that classification
/// treats simulated and collected profiles alike.
pub fn snapshot_records(tasks: &[TaskRecord], instance_id: &str, captured_at: &str) -> GoroutineProfile {
    let goroutines = tasks
        .iter()
        .filter(|t| t.status != TaskStatus::Done)
        .map(|t| {
            let mut frames = runtime_frames(t);
            frames.extend(t.frames.iter().map(Frame::from));
            GoroutineRecord {
                id: t.id.0,
                state_label: state_label(t).into(),
                frames,
                created_by: t.creation_site.as_ref().map(Frame::from),
            }
        })
        .collect();
    GoroutineProfile {
        instance_id: instance_id.into(),
        captured_at: captured_at.into(),
        goroutines,
    }
}

/// The kind a classifier should assign to a task in `status`.
pub fn kind_for_status(status: TaskStatus) -> Option<BlockKind> {
    Some(match status {
        TaskStatus::BlockedSend => BlockKind::ChanSend,
        TaskStatus::BlockedRecv => BlockKind::ChanRecv,
        TaskStatus::BlockedSelect => BlockKind::Select,
        TaskStatus::Sleeping => BlockKind::Sleep,
        TaskStatus::IoWait => BlockKind::IoWait,
        TaskStatus::Syscall => BlockKind::Syscall,
        TaskStatus::CondWait => BlockKind::CondWait,
        TaskStatus::SemAcquire => BlockKind::SemAcquire,
        TaskStatus::Running | TaskStatus::Runnable => BlockKind::Running,
        TaskStatus::Done => return None,
    })
}

fn state_label(t: &TaskRecord) -> &'static str {
    let d = &t.detail;
    match t.status {
        TaskStatus::BlockedSend if d.nil_channel => "chan send (nil chan)",
        TaskStatus::BlockedSend => "chan send",
        TaskStatus::BlockedRecv if d.nil_channel => "chan receive (nil chan)",
        TaskStatus::BlockedRecv => "chan receive",
        TaskStatus::BlockedSelect if d.select_arms.is_empty() => "select (no cases)",
        TaskStatus::BlockedSelect => "select",
        TaskStatus::Sleeping => "sleep",
        TaskStatus::IoWait => "IO wait",
        TaskStatus::Syscall => "syscall",
        TaskStatus::CondWait => "sync.Cond.Wait",
        TaskStatus::SemAcquire => "semacquire",
        TaskStatus::Running => "running",
        TaskStatus::Runnable | TaskStatus::Done => "runnable",
    }
}

fn rt(symbol: &str, file: &str, line: u32) -> Frame {
    Frame::new(symbol, file, line)
}

fn park() -> Frame {
    rt(PARK_SYMBOL, "runtime/proc.go", 398)
}

fn runtime_frames(t: &TaskRecord) -> Vec<Frame> {
    let d = &t.detail;
    match t.status {
        TaskStatus::BlockedSend => vec![
            park(),
            rt("runtime.chansend", "runtime/chan.go", 259),
            rt("runtime.chansend1", "runtime/chan.go", 145),
        ],
        TaskStatus::BlockedRecv if d.range_loop => vec![
            park(),
            rt("runtime.chanrecv", "runtime/chan.go", 583),
            rt("runtime.chanrecv2", "runtime/chan.go", 447),
        ],
        TaskStatus::BlockedRecv => vec![
            park(),
            rt("runtime.chanrecv", "runtime/chan.go", 583),
            rt("runtime.chanrecv1", "runtime/chan.go", 442),
        ],
        TaskStatus::BlockedSelect if d.select_arms.is_empty() => {
            vec![park(), rt("runtime.block", "runtime/select.go", 103)]
        }
        TaskStatus::BlockedSelect => {
            let mut sel = rt("runtime.selectgo", "runtime/select.go", 327);
            sel.arms = d.select_arms.iter().map(String::clone).collect();
            vec![park(), sel]
        }
        TaskStatus::Sleeping => vec![park(), rt("runtime.timeSleep", "runtime/time.go", 195)],
        TaskStatus::IoWait => vec![park(), rt("runtime.netpollblock", "runtime/netpoll.go", 564)],
        TaskStatus::CondWait => vec![park(), rt("runtime.notifyListWait", "runtime/sema.go", 569)],
        TaskStatus::SemAcquire => vec![park(), rt("runtime.semacquire1", "runtime/sema.go", 160)],
        TaskStatus::Syscall => vec![rt("runtime.entersyscall", "runtime/proc.go", 4290)],
        TaskStatus::Running | TaskStatus::Runnable | TaskStatus::Done => Vec::new(),
    }
}
