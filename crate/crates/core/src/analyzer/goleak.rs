use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use crate::dsl::SimProgram;
use crate::runtime::{self, Execution, SchedulerConfig, TaskId, TaskRecord, TaskStatus};
use crate::SourceLoc;

/// One task still alive after the program finished.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GoleakFinding {
    pub task: TaskId,
    pub status: TaskStatus,
    /// Leaf frame: the function and position the task is stuck in.
    pub code_context: SourceLoc,
    /// Where the task was spawned; `None` for the entry task.
    pub creation_context: Option<SourceLoc>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GoleakResult {
    pub findings: Vec<GoleakFinding>,
    /// Lingering tasks whose leaf function is on the suppression list.
    pub suppressed: Vec<GoleakFinding>,
}

impl GoleakResult {
    pub fn passed(&self) -> bool {
        self.findings.is_empty()
    }
}

/// Lists every task that is not done, splitting off those whose leaf
/// function is suppressed. The checker runs outside the simulated program,
/// so it never reports itself.
pub fn goleak_find(tasks: &[TaskRecord], suppression: &BTreeSet<String>) -> GoleakResult {
    let mut out = GoleakResult::default();
    for t in tasks.iter().filter(|t| t.status != TaskStatus::Done) {
        let leaf = t
            .frames
            .first()
            .or(t.blocking_site.as_ref())
            .cloned()
            .unwrap_or_else(|| SourceLoc::new("", "", 0));
        let f = GoleakFinding {
            task: t.id,
            status: t.status,
            creation_context: t.creation_site.clone(),
            code_context: leaf,
        };
        if suppression.contains(&f.code_context.function) {
            out.suppressed.push(f);
        } else {
            out.findings.push(f);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Verification {
    pub execution: Execution,
    /// The run stopped at the step bound rather than finishing.
    pub bound_exceeded: bool,
    pub result: GoleakResult,
}

impl Verification {
    pub fn passed(&self) -> bool {
        self.result.passed()
    }
}

/// Runs `program` to the end and checks for lingering tasks. A run cut off by
/// the step bound is still checked, on the partial state.
pub fn goleak_verify(
    program: &SimProgram,
    config: &SchedulerConfig,
    suppression: &BTreeSet<String>,
) -> Verification {
    let (execution, bound_exceeded) = match runtime::run(program, config) {
        Ok(e) => (e, false),
        Err(e) => (e.into_execution(), true),
    };
    let result = goleak_find(&execution.tasks, suppression);
    Verification { execution, bound_exceeded, result }
}
