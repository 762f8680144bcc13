use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use super::{walk_block, SimProgram, StmtKind};
use crate::SourceLoc;

/// A channel that is ranged over but has no `close` anywhere it could flow.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct LintFinding {
    /// Variable name at the channel's declaration.
    pub channel: String,
    pub declared_at: SourceLoc,
    pub range_site: SourceLoc,
}

type OriginId = usize;

/// Flags channels used with `range` that are never closed.
///
/// A channel is identified by its declaring statement and followed through
/// `go`/`call` arguments into parameters. Only functions reachable from the
/// entry count. Any syntactic `close` (or `cancel`, or a context with a
/// cancellation deadline) of a variable that may hold the channel counts as a
/// close, whichever branch it sits in.
pub fn range_lint(program: &SimProgram) -> Vec<LintFinding> {
    let mut origins: Vec<(String, SourceLoc)> = Vec::new();
    // (function, variable) -> possible origins
    let mut binds: BTreeMap<(&str, &str), BTreeSet<OriginId>> = BTreeMap::new();
    let mut edges: Vec<(&str, &str, &[String])> = Vec::new();
    let mut auto_closed: BTreeSet<OriginId> = BTreeSet::new();

    for func in program.functions.values() {
        walk_block(&func.body, &mut |stmt| {
            let declared = match &stmt.kind {
                StmtKind::MakeChan { var, .. }
                | StmtKind::NilChan { var }
                | StmtKind::After { var, .. }
                | StmtKind::Ticker { var, .. } => Some(var),
                StmtKind::Context { var, cancel_at } => {
                    if cancel_at.is_some() {
                        auto_closed.insert(origins.len());
                    }
                    Some(var)
                }
                StmtKind::Spawn { func: callee, args } | StmtKind::Call { func: callee, args } => {
                    edges.push((func.name.as_str(), callee.as_str(), args.as_slice()));
                    None
                }
                _ => None,
            };
            if let Some(var) = declared {
                binds
                    .entry((func.name.as_str(), var.as_str()))
                    .or_default()
                    .insert(origins.len());
                origins.push((var.clone(), stmt.loc.clone()));
            }
        });
    }

    // Propagate origins through call arguments to a fixpoint.
    loop {
        let mut changed = false;
        for &(caller, callee, args) in &edges {
            let Some(target) = program.functions.get(callee) else { continue };
            for (arg, param) in args.iter().zip(&target.params) {
                let from = binds.get(&(caller, arg.as_str())).cloned().unwrap_or_default();
                let to = binds.entry((target.name.as_str(), param.as_str())).or_default();
                for o in from {
                    changed |= to.insert(o);
                }
            }
        }
        if !changed {
            break;
        }
    }

    let mut reachable: BTreeSet<&str> = BTreeSet::new();
    let mut work = alloc::vec![program.entry.as_str()];
    while let Some(f) = work.pop() {
        if reachable.insert(f) {
            work.extend(edges.iter().filter(|e| e.0 == f).map(|e| e.1));
        }
    }

    let mut closed = auto_closed;
    let mut ranges: Vec<(&str, &str, &SourceLoc)> = Vec::new();
    for func in program.functions.values() {
        if !reachable.contains(func.name.as_str()) {
            continue;
        }
        walk_block(&func.body, &mut |stmt| match &stmt.kind {
            StmtKind::Close { var } | StmtKind::Cancel { var } => {
                if let Some(set) = binds.get(&(func.name.as_str(), var.as_str())) {
                    closed.extend(set.iter().copied());
                }
            }
            StmtKind::RangeOverChan { var, .. } => {
                ranges.push((func.name.as_str(), var.as_str(), &stmt.loc));
            }
            _ => {}
        });
    }

    let mut findings = BTreeSet::new();
    for (func, var, site) in ranges {
        let Some(set) = binds.get(&(func, var)) else { continue };
        for &o in set {
            if !closed.contains(&o) {
                let (name, declared_at) = &origins[o];
                findings.insert(LintFinding {
                    channel: name.clone(),
                    declared_at: declared_at.clone(),
                    range_site: site.clone(),
                });
            }
        }
    }
    findings.into_iter().collect()
}
