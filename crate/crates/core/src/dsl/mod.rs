//! Channel-program IR.
//!
//! A [`SimProgram`] is a set of named functions whose bodies are lists of
//! [`Stmt`]s. Every statement carries a [`SourceLoc`] that is unique within
//! the program; those locations are what the simulator reports as blocking
//! and creation sites. Channels are function-local identifiers: a variable is
//! either a parameter or declared by an earlier `make`/`nil`/`after`/`tick`/
//! `ctx` statement in the same function.
//!
//! Branch conditions are external boolean tokens and loop bounds may be named
//! integer parameters, both declared at the top of the program and
//! overridable per run (see [`SimProgram::with_token`] and
//! [`SimProgram::with_param`]).
//!
//! The text grammar is documented in `docs/ir.md` at the repository root.

mod lint;
mod parse;
pub mod scenarios;

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use crate::SourceLoc;

pub use lint::{range_lint, LintFinding};
pub use parse::{load_program, ParseError, ParseErrorKind};

/// A parsed and resolved channel program.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimProgram {
    pub name: String,
    pub entry: String,
    pub functions: BTreeMap<String, Function>,
    /// Declared condition tokens and their current values.
    pub tokens: BTreeMap<String, bool>,
    /// Declared integer parameters and their current values.
    pub params: BTreeMap<String, u64>,
}

impl SimProgram {
    /// Overrides a declared token. Returns `None` if the token is undeclared.
    pub fn with_token(mut self, name: &str, value: bool) -> Option<Self> {
        *self.tokens.get_mut(name)? = value;
        Some(self)
    }

    /// Overrides a declared integer parameter. Returns `None` if undeclared.
    pub fn with_param(mut self, name: &str, value: u64) -> Option<Self> {
        *self.params.get_mut(name)? = value;
        Some(self)
    }

    pub fn entry_function(&self) -> &Function {
        &self.functions[&self.entry]
    }

    /// Resolves a count to its value under the current parameters.
    pub fn count(&self, count: &Count) -> u64 {
        match count {
            Count::Lit(n) => *n,
            Count::Param(name) => self.params.get(name).copied().unwrap_or(0),
        }
    }

    /// Visits every statement in the program, depth first, in text order.
    pub fn walk<'a>(&'a self, mut visit: impl FnMut(&'a Function, &'a Stmt)) {
        for func in self.functions.values() {
            walk_block(&func.body, &mut |stmt| visit(func, stmt));
        }
    }
}

pub(crate) fn walk_block<'a>(block: &'a [Stmt], visit: &mut impl FnMut(&'a Stmt)) {
    for stmt in block {
        visit(stmt);
        for child in stmt.kind.blocks() {
            walk_block(child, visit);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Function {
    pub name: String,
    pub params: Vec<String>,
    pub body: Vec<Stmt>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stmt {
    pub loc: SourceLoc,
    pub kind: StmtKind,
}

/// A literal count or a reference to a declared integer parameter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Count {
    Lit(u64),
    Param(String),
}

/// Channel operand of a send or receive.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ChanExpr {
    Var(String),
    /// `after(d)`: a fresh capacity-1 timer channel that receives one value
    /// `d` ticks from now.
    After(Count),
}

impl ChanExpr {
    pub fn var(&self) -> Option<&str> {
        match self {
            ChanExpr::Var(name) => Some(name),
            ChanExpr::After(_) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum WaitKind {
    IoWait,
    Syscall,
    CondWait,
    SemAcquire,
}

impl WaitKind {
    pub fn keyword(self) -> &'static str {
        match self {
            WaitKind::IoWait => "iowait",
            WaitKind::Syscall => "syscall",
            WaitKind::CondWait => "condwait",
            WaitKind::SemAcquire => "semacquire",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ArmOp {
    Send { chan: ChanExpr, value: i64 },
    Recv { chan: ChanExpr },
}

impl ArmOp {
    pub fn chan(&self) -> &ChanExpr {
        match self {
            ArmOp::Send { chan, .. } | ArmOp::Recv { chan } => chan,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelectArm {
    pub op: ArmOp,
    pub body: Vec<Stmt>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StmtKind {
    MakeChan { var: String, capacity: Count },
    /// Declares a variable holding the nil channel.
    NilChan { var: String },
    Send { chan: ChanExpr, value: i64 },
    Recv { chan: ChanExpr },
    Select { arms: Vec<SelectArm>, default: Option<Vec<Stmt>> },
    Close { var: String },
    Spawn { func: String, args: Vec<String> },
    Call { func: String, args: Vec<String> },
    RangeOverChan { var: String, body: Vec<Stmt> },
    If { cond: String, negated: bool, then_body: Vec<Stmt>, else_body: Vec<Stmt> },
    /// `count: None` loops forever.
    ForLoop { count: Option<Count>, body: Vec<Stmt> },
    Return,
    Sleep { ticks: Count },
    After { var: String, ticks: Count },
    Ticker { var: String, period: Count },
    /// A cancellable context; its done channel closes at `cancel_at` ticks
    /// from creation, or on `cancel`.
    Context { var: String, cancel_at: Option<Count> },
    Cancel { var: String },
    CtxDoneWait { var: String },
    Wait { kind: WaitKind, token: String },
    Release { token: String },
}

impl StmtKind {
    /// Nested statement blocks, in text order.
    pub fn blocks(&self) -> Vec<&[Stmt]> {
        match self {
            StmtKind::Select { arms, default } => {
                let mut out: Vec<&[Stmt]> = arms.iter().map(|a| a.body.as_slice()).collect();
                if let Some(d) = default {
                    out.push(d);
                }
                out
            }
            StmtKind::RangeOverChan { body, .. } | StmtKind::ForLoop { body, .. } => {
                alloc::vec![body.as_slice()]
            }
            StmtKind::If { then_body, else_body, .. } => {
                alloc::vec![then_body.as_slice(), else_body.as_slice()]
            }
            _ => Vec::new(),
        }
    }
}
