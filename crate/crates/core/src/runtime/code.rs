//! Lowering of [`SimProgram`] bodies to flat per-function instruction lists.
//!
//! Counts and condition tokens are resolved against the program's current
//! parameter and token values, so a `Code` is specific to one run's inputs.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use crate::dsl::{ArmOp, ChanExpr, Count, SimProgram, Stmt, StmtKind, WaitKind};
use crate::SourceLoc;

pub(crate) type LocId = usize;

#[derive(Debug, Clone, Copy)]
pub(crate) enum Operand {
    Slot(usize),
    /// Fresh timer channel firing after the given ticks.
    After(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum RecvMode {
    Plain,
    /// Receive heading a `range` loop; jumps to `exit` once the channel is
    /// closed and drained.
    Range { exit: usize },
}

#[derive(Debug, Clone)]
pub(crate) struct Arm {
    pub send: bool,
    pub chan: Operand,
    pub value: i64,
    pub target: usize,
}

#[derive(Debug, Clone)]
pub(crate) enum Op {
    Make { slot: usize, cap: u64, var: String },
    SetNil { slot: usize },
    Send { chan: Operand, value: i64 },
    Recv { chan: Operand, mode: RecvMode },
    Select { arms: Vec<Arm>, default: Option<usize> },
    Close { slot: usize },
    Spawn { func: usize, args: Vec<usize> },
    Call { func: usize, args: Vec<usize> },
    /// Falls through when the resolved condition holds.
    Branch { taken: bool, else_pc: usize },
    LoopInit { counter: usize, count: u64 },
    LoopNext { counter: usize, exit: usize },
    Jump { target: usize },
    Return,
    Sleep { ticks: u64 },
    After { slot: usize, ticks: u64 },
    Ticker { slot: usize, period: u64 },
    Context { slot: usize, cancel_at: Option<u64> },
    Cancel { slot: usize },
    Wait { kind: WaitKind, token: usize },
    Release { token: usize },
}

#[derive(Debug, Clone)]
pub(crate) struct Instr {
    pub loc: LocId,
    pub op: Op,
}

#[derive(Debug, Clone)]
pub(crate) struct CodeFn {
    pub name: String,
    pub nslots: usize,
    pub ncounters: usize,
    pub code: Vec<Instr>,
}

#[derive(Debug, Clone)]
pub(crate) struct Code {
    pub funcs: Vec<CodeFn>,
    pub entry: usize,
    pub locs: Vec<SourceLoc>,
    pub wait_tokens: Vec<String>,
}

impl Code {
    pub fn loc(&self, id: LocId) -> &SourceLoc {
        &self.locs[id]
    }
}

pub(crate) fn compile(program: &SimProgram) -> Code {
    let index: BTreeMap<&str, usize> = program
        .functions
        .keys()
        .enumerate()
        .map(|(i, k)| (k.as_str(), i))
        .collect();
    let mut shared = Shared {
        program,
        index,
        locs: Vec::new(),
        wait_tokens: Vec::new(),
    };
    let funcs = program
        .functions
        .values()
        .map(|f| {
            let mut fc = FnCompiler {
                shared: &mut shared,
                slots: BTreeMap::new(),
                ncounters: 0,
                code: Vec::new(),
            };
            for p in &f.params {
                fc.slot(p);
            }
            fc.block(&f.body);
            // Falling off the end of a function returns.
            let end_loc = fc.end_loc(&f.name, f.body.last());
            fc.code.push(Instr { loc: end_loc, op: Op::Return });
            CodeFn {
                name: f.name.clone(),
                nslots: fc.slots.len(),
                ncounters: fc.ncounters,
                code: fc.code,
            }
        })
        .collect();
    Code {
        funcs,
        entry: shared.index[program.entry.as_str()],
        locs: shared.locs,
        wait_tokens: shared.wait_tokens,
    }
}

struct Shared<'p> {
    program: &'p SimProgram,
    index: BTreeMap<&'p str, usize>,
    locs: Vec<SourceLoc>,
    wait_tokens: Vec<String>,
}

struct FnCompiler<'s, 'p> {
    shared: &'s mut Shared<'p>,
    slots: BTreeMap<String, usize>,
    ncounters: usize,
    code: Vec<Instr>,
}

impl FnCompiler<'_, '_> {
    fn slot(&mut self, name: &str) -> usize {
        let next = self.slots.len();
        *self.slots.entry(name.into()).or_insert(next)
    }

    fn count(&self, c: &Count) -> u64 {
        self.shared.program.count(c)
    }

    fn loc(&mut self, loc: &SourceLoc) -> LocId {
        self.shared.locs.push(loc.clone());
        self.shared.locs.len() - 1
    }

    fn end_loc(&mut self, func: &str, last: Option<&Stmt>) -> LocId {
        match last {
            Some(s) => {
                let mut loc = s.loc.clone();
                loc.line += 1;
                self.loc(&loc)
            }
            None => self.loc(&SourceLoc::new(func, "<implicit>", 1)),
        }
    }

    fn token(&mut self, name: &str) -> usize {
        let toks = &mut self.shared.wait_tokens;
        match toks.iter().position(|t| t == name) {
            Some(i) => i,
            None => {
                toks.push(name.into());
                toks.len() - 1
            }
        }
    }

    fn operand(&mut self, chan: &ChanExpr) -> Operand {
        match chan {
            ChanExpr::Var(v) => Operand::Slot(self.slot(v)),
            ChanExpr::After(c) => Operand::After(self.count(c)),
        }
    }

    fn emit(&mut self, loc: LocId, op: Op) -> usize {
        self.code.push(Instr { loc, op });
        self.code.len() - 1
    }

    fn patch(&mut self, at: usize, target: usize) {
        match &mut self.code[at].op {
            Op::Branch { else_pc, .. } => *else_pc = target,
            Op::LoopNext { exit, .. } => *exit = target,
            Op::Jump { target: t } => *t = target,
            Op::Recv { mode: RecvMode::Range { exit }, .. } => *exit = target,
            Op::Select { default: Some(d), .. } => *d = target,
            _ => unreachable!("patching a non-jump instruction"),
        }
    }

    fn block(&mut self, body: &[Stmt]) {
        for s in body {
            self.stmt(s);
        }
    }

    fn stmt(&mut self, s: &Stmt) {
        let loc = self.loc(&s.loc);
        match &s.kind {
            StmtKind::MakeChan { var, capacity } => {
                let cap = self.count(capacity);
                let slot = self.slot(var);
                self.emit(loc, Op::Make { slot, cap, var: var.clone() });
            }
            StmtKind::NilChan { var } => {
                let slot = self.slot(var);
                self.emit(loc, Op::SetNil { slot });
            }
            StmtKind::Send { chan, value } => {
                let chan = self.operand(chan);
                self.emit(loc, Op::Send { chan, value: *value });
            }
            StmtKind::Recv { chan } => {
                let chan = self.operand(chan);
                self.emit(loc, Op::Recv { chan, mode: RecvMode::Plain });
            }
            StmtKind::CtxDoneWait { var } => {
                let chan = Operand::Slot(self.slot(var));
                self.emit(loc, Op::Recv { chan, mode: RecvMode::Plain });
            }
            StmtKind::Select { arms, default } => self.select(loc, arms, default.as_deref()),
            StmtKind::Close { var } => {
                let slot = self.slot(var);
                self.emit(loc, Op::Close { slot });
            }
            StmtKind::Spawn { func, args } | StmtKind::Call { func, args } => {
                let f = self.shared.index[func.as_str()];
                let args = args.iter().map(|a| self.slot(a)).collect();
                let op = if matches!(s.kind, StmtKind::Spawn { .. }) {
                    Op::Spawn { func: f, args }
                } else {
                    Op::Call { func: f, args }
                };
                self.emit(loc, op);
            }
            StmtKind::RangeOverChan { var, body } => {
                let chan = Operand::Slot(self.slot(var));
                let head = self.emit(loc, Op::Recv { chan, mode: RecvMode::Range { exit: 0 } });
                self.block(body);
                self.emit(loc, Op::Jump { target: head });
                let end = self.code.len();
                self.patch(head, end);
            }
            StmtKind::If { cond, negated, then_body, else_body } => {
                let value = self.shared.program.tokens.get(cond).copied().unwrap_or(false);
                let br = self.emit(loc, Op::Branch { taken: value != *negated, else_pc: 0 });
                self.block(then_body);
                if else_body.is_empty() {
                    let end = self.code.len();
                    self.patch(br, end);
                } else {
                    let jmp = self.emit(loc, Op::Jump { target: 0 });
                    let else_start = self.code.len();
                    self.patch(br, else_start);
                    self.block(else_body);
                    let end = self.code.len();
                    self.patch(jmp, end);
                }
            }
            StmtKind::ForLoop { count: Some(c), body } => {
                let counter = self.ncounters;
                self.ncounters += 1;
                let count = self.count(c);
                self.emit(loc, Op::LoopInit { counter, count });
                let head = self.emit(loc, Op::LoopNext { counter, exit: 0 });
                self.block(body);
                self.emit(loc, Op::Jump { target: head });
                let end = self.code.len();
                self.patch(head, end);
            }
            StmtKind::ForLoop { count: None, body } => {
                let head = self.code.len();
                self.block(body);
                self.emit(loc, Op::Jump { target: head });
            }
            StmtKind::Return => {
                self.emit(loc, Op::Return);
            }
            StmtKind::Sleep { ticks } => {
                let ticks = self.count(ticks);
                self.emit(loc, Op::Sleep { ticks });
            }
            StmtKind::After { var, ticks } => {
                let ticks = self.count(ticks);
                let slot = self.slot(var);
                self.emit(loc, Op::After { slot, ticks });
            }
            StmtKind::Ticker { var, period } => {
                let period = self.count(period).max(1);
                let slot = self.slot(var);
                self.emit(loc, Op::Ticker { slot, period });
            }
            StmtKind::Context { var, cancel_at } => {
                let cancel_at = cancel_at.as_ref().map(|c| self.count(c));
                let slot = self.slot(var);
                self.emit(loc, Op::Context { slot, cancel_at });
            }
            StmtKind::Cancel { var } => {
                let slot = self.slot(var);
                self.emit(loc, Op::Cancel { slot });
            }
            StmtKind::Wait { kind, token } => {
                let token = self.token(token);
                self.emit(loc, Op::Wait { kind: *kind, token });
            }
            StmtKind::Release { token } => {
                let token = self.token(token);
                self.emit(loc, Op::Release { token });
            }
        }
    }

    fn select(&mut self, loc: LocId, arms: &[crate::dsl::SelectArm], default: Option<&[Stmt]>) {
        // A one-arm select without default behaves as the bare operation.
        if let ([arm], None) = (arms, default) {
            let chan = self.operand(arm.op.chan());
            let op = match arm.op {
                ArmOp::Send { value, .. } => Op::Send { chan, value },
                ArmOp::Recv { .. } => Op::Recv { chan, mode: RecvMode::Plain },
            };
            self.emit(loc, op);
            self.block(&arm.body);
            return;
        }
        let compiled: Vec<Arm> = arms
            .iter()
            .map(|a| {
                let (send, value) = match a.op {
                    ArmOp::Send { value, .. } => (true, value),
                    ArmOp::Recv { .. } => (false, 0),
                };
                Arm { send, chan: self.operand(a.op.chan()), value, target: 0 }
            })
            .collect();
        let sel = self.emit(
            loc,
            Op::Select { arms: compiled, default: default.map(|_| 0) },
        );
        let mut exits = Vec::new();
        for (i, arm) in arms.iter().enumerate() {
            let start = self.code.len();
            if let Op::Select { arms, .. } = &mut self.code[sel].op {
                arms[i].target = start;
            }
            self.block(&arm.body);
            exits.push(self.emit(loc, Op::Jump { target: 0 }));
        }
        if let Some(body) = default {
            let start = self.code.len();
            self.patch(sel, start);
            self.block(body);
        }
        let end = self.code.len();
        for j in exits {
            self.patch(j, end);
        }
    }
}
