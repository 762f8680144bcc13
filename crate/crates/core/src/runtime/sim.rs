use alloc::boxed::Box;
use alloc::collections::{BinaryHeap, VecDeque};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::{Ordering, Reverse};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::code::{compile, Code, LocId, Op, Operand, RecvMode};
use super::{
    BlockDetail, ChannelState, Execution, Exit, Outcome, RunError, SchedulerConfig, TaskId,
    TaskRecord, TaskStatus, Trace, TraceEvent, TraceOp,
};
use crate::dsl::{SimProgram, WaitKind};

#[derive(Debug, Clone)]
enum Origin {
    Make(String),
    Timer,
    Ticker,
    Context,
}

impl Origin {
    fn symbol(&self) -> String {
        match self {
            Origin::Make(var) => format!("chan {var}"),
            Origin::Timer => "time.After".into(),
            Origin::Ticker => "time.Tick".into(),
            Origin::Context => "context.Done".into(),
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Waiter {
    task: usize,
    gen: u64,
    arm: Option<usize>,
    value: i64,
}

#[derive(Debug, Clone)]
struct Chan {
    cap: usize,
    buf: VecDeque<i64>,
    closed: bool,
    recvq: VecDeque<Waiter>,
    sendq: VecDeque<Waiter>,
    origin: Origin,
    sent: u64,
    received: u64,
}

#[derive(Debug, Clone)]
struct Frame {
    func: usize,
    pc: usize,
    slots: Vec<Option<usize>>,
    counters: Vec<u64>,
}

#[derive(Debug, Clone)]
struct Task {
    status: TaskStatus,
    stack: Vec<Frame>,
    creation: Option<LocId>,
    exit: Option<Exit>,
    gen: u64,
    blocked_at: Option<LocId>,
    detail: BlockDetail,
}

#[derive(Debug, Clone, Copy)]
enum TimerEvent {
    Deliver { chan: usize },
    Tick { chan: usize, period: u64 },
    Cancel { chan: usize },
    Wake { task: usize, gen: u64 },
}

#[derive(Debug, Clone, Copy)]
struct Timer {
    at: u64,
    seq: u64,
    event: TimerEvent,
}

impl PartialEq for Timer {
    fn eq(&self, other: &Self) -> bool {
        (self.at, self.seq) == (other.at, other.seq)
    }
}
impl Eq for Timer {}
impl PartialOrd for Timer {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Timer {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.at, self.seq).cmp(&(other.at, other.seq))
    }
}

/// How a blocked (or immediately completing) operation finished.
#[derive(Debug, Clone, Copy)]
enum Completion {
    Sent,
    Received { ok: bool },
    Arm(usize),
    Woke,
}

enum SendResult {
    Delivered(usize),
    Buffered,
    WouldBlock,
    Closed,
}

enum RecvResult {
    /// Value taken and the blocked sender it came from or unblocked, if any.
    Value(i64, Option<usize>),
    Closed,
    WouldBlock,
}

/// Result of a single [`Simulator::step`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepResult {
    Ran,
    /// No task was runnable; the clock moved to the next timer.
    Advanced,
    Finished(Outcome),
    BoundExceeded,
}

/// A simulator instance. Can be stepped manually and inspected mid-run.
#[derive(Debug, Clone)]
pub struct Simulator {
    code: Arc<Code>,
    config: SchedulerConfig,
    rng: ChaCha8Rng,
    tasks: Vec<Task>,
    chans: Vec<Chan>,
    runq: VecDeque<usize>,
    timers: BinaryHeap<Reverse<Timer>>,
    timer_seq: u64,
    released: Vec<bool>,
    token_waiters: Vec<Vec<(usize, u64)>>,
    now: u64,
    steps: u64,
    trace: Trace,
}

impl Simulator {
    pub fn new(program: &SimProgram, config: SchedulerConfig) -> Self {
        let code = compile(program);
        let ntokens = code.wait_tokens.len();
        let mut sim = Self {
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            config,
            tasks: Vec::new(),
            chans: Vec::new(),
            runq: VecDeque::new(),
            timers: BinaryHeap::new(),
            timer_seq: 0,
            released: vec![false; ntokens],
            token_waiters: vec![Vec::new(); ntokens],
            now: 0,
            steps: 0,
            trace: Trace::default(),
            code: Arc::new(code),
        };
        let entry = sim.code.entry;
        sim.spawn_task(entry, Vec::new(), None);
        sim
    }

    pub fn now(&self) -> u64 {
        self.now
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn trace(&self) -> &Trace {
        &self.trace
    }

    /// Runs until the program finishes or the step bound is hit.
    pub fn run(mut self) -> Result<Execution, RunError> {
        loop {
            match self.step() {
                StepResult::Ran | StepResult::Advanced => {}
                StepResult::Finished(outcome) => return Ok(self.into_execution(outcome)),
                StepResult::BoundExceeded => {
                    let max_steps = self.config.max_steps;
                    let execution = Box::new(self.into_execution(Outcome::Quiescent));
                    return Err(RunError::BoundExceeded { max_steps, execution });
                }
            }
        }
    }

    /// Executes one instruction of the next runnable task, or advances the
    /// clock when nothing is runnable.
    pub fn step(&mut self) -> StepResult {
        if let Some(&t) = self.runq.front() {
            if self.steps >= self.config.max_steps {
                return StepResult::BoundExceeded;
            }
            self.runq.pop_front();
            self.steps += 1;
            self.exec(t);
            if self.tasks[t].status == TaskStatus::Running {
                self.tasks[t].status = TaskStatus::Runnable;
                self.runq.push_back(t);
            }
            return StepResult::Ran;
        }
        let Some(Reverse(next)) = self.timers.peek() else {
            return StepResult::Finished(Outcome::Quiescent);
        };
        if next.at > self.config.model_time {
            return StepResult::Finished(Outcome::HorizonReached);
        }
        self.now = next.at;
        while let Some(Reverse(timer)) = self.timers.peek().copied() {
            if timer.at != self.now {
                break;
            }
            self.timers.pop();
            self.fire(timer.event);
        }
        StepResult::Advanced
    }

    /// Snapshot of the task table.
    pub fn task_records(&self) -> Vec<TaskRecord> {
        (0..self.tasks.len()).map(|i| self.record(i)).collect()
    }

    pub fn channel_states(&self) -> Vec<ChannelState> {
        self.chans
            .iter()
            .enumerate()
            .map(|(id, c)| ChannelState {
                id,
                capacity: c.cap,
                buffer: c.buf.iter().copied().collect(),
                closed: c.closed,
                origin: c.origin.symbol(),
                sent: c.sent,
                received: c.received,
                blocked_senders: c.sendq.iter().filter(|w| self.live(w)).count(),
                blocked_receivers: c.recvq.iter().filter(|w| self.live(w)).count(),
            })
            .collect()
    }

    fn into_execution(self, outcome: Outcome) -> Execution {
        Execution {
            outcome,
            tasks: self.task_records(),
            channels: self.channel_states(),
            now: self.now,
            steps: self.steps,
            trace: self.trace,
        }
    }

    fn record(&self, i: usize) -> TaskRecord {
        let t = &self.tasks[i];
        let frames = if t.status == TaskStatus::Done {
            Vec::new()
        } else {
            t.stack
                .iter()
                .rev()
                .map(|f| self.code.loc(self.code.funcs[f.func].code[f.pc].loc).clone())
                .collect()
        };
        TaskRecord {
            id: TaskId(i as u64 + 1),
            status: t.status,
            blocking_site: t.blocked_at.map(|l| self.code.loc(l).clone()),
            creation_site: t.creation.map(|l| self.code.loc(l).clone()),
            frames,
            exit: t.exit.clone(),
            detail: t.detail.clone(),
        }
    }

    // ---- scheduling helpers ----

    fn spawn_task(&mut self, func: usize, args: Vec<Option<usize>>, creation: Option<LocId>) -> usize {
        let f = &self.code.funcs[func];
        let mut slots = vec![None; f.nslots];
        slots[..args.len()].copy_from_slice(&args);
        self.tasks.push(Task {
            status: TaskStatus::Runnable,
            stack: vec![Frame { func, pc: 0, slots, counters: vec![0; f.ncounters] }],
            creation,
            exit: None,
            gen: 0,
            blocked_at: None,
            detail: BlockDetail::default(),
        });
        let t = self.tasks.len() - 1;
        self.runq.push_back(t);
        t
    }

    fn schedule(&mut self, delay: u64, event: TimerEvent) {
        self.timer_seq += 1;
        self.timers.push(Reverse(Timer {
            at: self.now.saturating_add(delay),
            seq: self.timer_seq,
            event,
        }));
    }

    fn live(&self, w: &Waiter) -> bool {
        let t = &self.tasks[w.task];
        t.gen == w.gen && t.status.is_waiting()
    }

    fn pop_live(&mut self, chan: usize, senders: bool) -> Option<Waiter> {
        loop {
            let q = if senders { &mut self.chans[chan].sendq } else { &mut self.chans[chan].recvq };
            let w = q.pop_front()?;
            if self.live(&w) {
                return Some(w);
            }
        }
    }

    fn has_live(&self, chan: usize, senders: bool) -> bool {
        let c = &self.chans[chan];
        let q = if senders { &c.sendq } else { &c.recvq };
        q.iter().any(|w| self.live(w))
    }

    fn frame(&mut self, t: usize) -> &mut Frame {
        self.tasks[t].stack.last_mut().expect("live task has a frame")
    }

    fn current_loc(&self, t: usize) -> LocId {
        let f = self.tasks[t].stack.last().expect("live task has a frame");
        self.code.funcs[f.func].code[f.pc].loc
    }

    fn emit(&mut self, t: usize, op: TraceOp, loc: LocId, detail: String) {
        self.trace.events.push(TraceEvent {
            step: self.steps,
            task: TaskId(t as u64 + 1),
            op,
            site: self.code.loc(loc).clone(),
            detail,
        });
    }

    /// Moves the task's program counter past the operation it is parked on.
    fn advance(&mut self, t: usize, how: Completion) {
        let code = Arc::clone(&self.code);
        let frame = self.frame(t);
        let op = &code.funcs[frame.func].code[frame.pc].op;
        frame.pc = match (op, how) {
            (Op::Select { arms, .. }, Completion::Arm(i)) => arms[i].target,
            (Op::Recv { mode: RecvMode::Range { exit }, .. }, Completion::Received { ok: false }) => {
                *exit
            }
            _ => frame.pc + 1,
        };
    }

    fn wake(&mut self, t: usize, how: Completion) {
        self.advance(t, how);
        let task = &mut self.tasks[t];
        task.status = TaskStatus::Runnable;
        task.blocked_at = None;
        task.detail = BlockDetail::default();
        self.runq.push_back(t);
    }

    fn block(&mut self, t: usize, status: TaskStatus, detail: BlockDetail) -> u64 {
        let loc = self.current_loc(t);
        let task = &mut self.tasks[t];
        task.status = status;
        task.gen += 1;
        task.blocked_at = Some(loc);
        task.detail = detail;
        task.gen
    }

    fn panic(&mut self, t: usize, msg: &str) {
        let loc = self.tasks[t].blocked_at.unwrap_or_else(|| self.current_loc(t));
        self.emit(t, TraceOp::Panic, loc, msg.replace(' ', "_"));
        let task = &mut self.tasks[t];
        task.status = TaskStatus::Done;
        task.exit = Some(Exit::Panicked(msg.to_string()));
        task.blocked_at = None;
        task.detail = BlockDetail::default();
        task.gen += 1;
    }

    fn new_chan(&mut self, cap: usize, origin: Origin) -> usize {
        self.chans.push(Chan {
            cap,
            buf: VecDeque::new(),
            closed: false,
            recvq: VecDeque::new(),
            sendq: VecDeque::new(),
            origin,
            sent: 0,
            received: 0,
        });
        self.chans.len() - 1
    }

    fn waiter_completion(w: &Waiter, recv_ok: Option<bool>) -> Completion {
        match (w.arm, recv_ok) {
            (Some(i), _) => Completion::Arm(i),
            (None, Some(ok)) => Completion::Received { ok },
            (None, None) => Completion::Sent,
        }
    }

    // ---- channel primitives ----

    fn try_send(&mut self, c: usize, value: i64) -> SendResult {
        if self.chans[c].closed {
            return SendResult::Closed;
        }
        if let Some(w) = self.pop_live(c, false) {
            let ch = &mut self.chans[c];
            ch.sent += 1;
            ch.received += 1;
            self.wake(w.task, Self::waiter_completion(&w, Some(true)));
            return SendResult::Delivered(w.task);
        }
        let ch = &mut self.chans[c];
        if ch.buf.len() < ch.cap {
            ch.buf.push_back(value);
            ch.sent += 1;
            return SendResult::Buffered;
        }
        SendResult::WouldBlock
    }

    fn try_recv(&mut self, c: usize) -> RecvResult {
        if !self.chans[c].buf.is_empty() {
            let ch = &mut self.chans[c];
            let value = ch.buf.pop_front().expect("buffer is non-empty");
            ch.received += 1;
            let mut from = None;
            if let Some(w) = self.pop_live(c, true) {
                let ch = &mut self.chans[c];
                ch.buf.push_back(w.value);
                ch.sent += 1;
                self.wake(w.task, Self::waiter_completion(&w, None));
                from = Some(w.task);
            }
            return RecvResult::Value(value, from);
        }
        if let Some(w) = self.pop_live(c, true) {
            let ch = &mut self.chans[c];
            ch.sent += 1;
            ch.received += 1;
            self.wake(w.task, Self::waiter_completion(&w, None));
            return RecvResult::Value(w.value, Some(w.task));
        }
        if self.chans[c].closed {
            return RecvResult::Closed;
        }
        RecvResult::WouldBlock
    }

    fn send_ready(&self, c: usize) -> bool {
        let ch = &self.chans[c];
        ch.closed || ch.buf.len() < ch.cap || self.has_live(c, false)
    }

    fn recv_ready(&self, c: usize) -> bool {
        let ch = &self.chans[c];
        !ch.buf.is_empty() || ch.closed || self.has_live(c, true)
    }

    /// Closes an open channel, waking every receiver with `ok = false` and
    /// panicking every blocked sender. Returns (woken, panicked).
    fn close_chan(&mut self, c: usize) -> (usize, usize) {
        self.chans[c].closed = true;
        let mut woken = 0;
        while let Some(w) = self.pop_live(c, false) {
            self.wake(w.task, Self::waiter_completion(&w, Some(false)));
            woken += 1;
        }
        let mut panicked = 0;
        while let Some(w) = self.pop_live(c, true) {
            self.panic(w.task, "send on closed channel");
            panicked += 1;
        }
        (woken, panicked)
    }

    /// Non-blocking send performed by the runtime (timers). Drops the value
    /// when the buffer is full.
    fn runtime_send(&mut self, c: usize) {
        if self.chans[c].closed {
            return;
        }
        let now = self.now as i64;
        if let Some(w) = self.pop_live(c, false) {
            let ch = &mut self.chans[c];
            ch.sent += 1;
            ch.received += 1;
            self.wake(w.task, Self::waiter_completion(&w, Some(true)));
        } else {
            let ch = &mut self.chans[c];
            if ch.buf.len() < ch.cap {
                ch.buf.push_back(now);
                ch.sent += 1;
            }
        }
    }

    fn fire(&mut self, event: TimerEvent) {
        match event {
            TimerEvent::Deliver { chan } => self.runtime_send(chan),
            TimerEvent::Tick { chan, period } => {
                self.runtime_send(chan);
                self.schedule(period, event);
            }
            TimerEvent::Cancel { chan } => {
                if !self.chans[chan].closed {
                    self.close_chan(chan);
                }
            }
            TimerEvent::Wake { task, gen } => {
                let t = &self.tasks[task];
                if t.gen == gen && t.status == TaskStatus::Sleeping {
                    self.wake(task, Completion::Woke);
                }
            }
        }
    }

    fn operand(&mut self, t: usize, operand: Operand) -> Option<usize> {
        match operand {
            Operand::Slot(s) => self.frame(t).slots[s],
            Operand::After(ticks) => {
                let c = self.new_chan(1, Origin::Timer);
                self.schedule(ticks, TimerEvent::Deliver { chan: c });
                Some(c)
            }
        }
    }

    fn chan_name(c: Option<usize>) -> String {
        match c {
            Some(c) => format!("ch={c}"),
            None => "ch=nil".into(),
        }
    }

    // ---- instruction execution ----

    fn exec(&mut self, t: usize) {
        self.tasks[t].status = TaskStatus::Running;
        let code = Arc::clone(&self.code);
        let (func, pc) = {
            let f = self.tasks[t].stack.last().expect("runnable task has a frame");
            (f.func, f.pc)
        };
        let instr = &code.funcs[func].code[pc];
        let loc = instr.loc;
        match &instr.op {
            Op::Make { slot, cap, var } => {
                let c = self.new_chan(*cap as usize, Origin::Make(var.clone()));
                self.frame(t).slots[*slot] = Some(c);
                self.emit(t, TraceOp::Make, loc, format!("ch={c},cap={cap}"));
                self.frame(t).pc += 1;
            }
            Op::SetNil { slot } => {
                self.frame(t).slots[*slot] = None;
                self.emit(t, TraceOp::Make, loc, "ch=nil".into());
                self.frame(t).pc += 1;
            }
            Op::Send { chan, value } => {
                let c = self.operand(t, *chan);
                self.exec_send(t, loc, c, *value);
            }
            Op::Recv { chan, mode } => {
                let c = self.operand(t, *chan);
                self.exec_recv(t, loc, c, *mode);
            }
            Op::Select { arms, default } => self.exec_select(t, loc, arms, *default),
            Op::Close { slot } => match self.frame(t).slots[*slot].map(|c| (c, self.chans[c].closed)) {
                None => self.panic(t, "close of nil channel"),
                Some((_, true)) => self.panic(t, "close of closed channel"),
                Some((c, false)) => {
                    let (woken, panicked) = self.close_chan(c);
                    self.emit(
                        t,
                        TraceOp::Close,
                        loc,
                        format!("ch={c},woke={woken},panicked={panicked}"),
                    );
                    self.frame(t).pc += 1;
                }
            },
            Op::Spawn { func: callee, args } => {
                let vals: Vec<Option<usize>> =
                    args.iter().map(|&s| self.frame(t).slots[s]).collect();
                let child = self.spawn_task(*callee, vals, Some(loc));
                self.emit(
                    t,
                    TraceOp::Spawn,
                    loc,
                    format!("task={},func={}", child + 1, code.funcs[*callee].name),
                );
                self.frame(t).pc += 1;
            }
            Op::Call { func: callee, args } => {
                let f = &code.funcs[*callee];
                let mut slots = vec![None; f.nslots];
                for (i, &s) in args.iter().enumerate() {
                    slots[i] = self.frame(t).slots[s];
                }
                self.emit(t, TraceOp::Call, loc, format!("func={}", f.name));
                self.frame(t).pc += 1;
                self.tasks[t].stack.push(Frame {
                    func: *callee,
                    pc: 0,
                    slots,
                    counters: vec![0; f.ncounters],
                });
            }
            Op::Branch { taken, else_pc } => {
                let frame = self.frame(t);
                frame.pc = if *taken { frame.pc + 1 } else { *else_pc };
            }
            Op::LoopInit { counter, count } => {
                let frame = self.frame(t);
                frame.counters[*counter] = *count;
                frame.pc += 1;
            }
            Op::LoopNext { counter, exit } => {
                let frame = self.frame(t);
                if frame.counters[*counter] == 0 {
                    frame.pc = *exit;
                } else {
                    frame.counters[*counter] -= 1;
                    frame.pc += 1;
                }
            }
            Op::Jump { target } => self.frame(t).pc = *target,
            Op::Return => {
                self.tasks[t].stack.pop();
                if self.tasks[t].stack.is_empty() {
                    self.emit(t, TraceOp::Return, loc, "exit".into());
                    let task = &mut self.tasks[t];
                    task.status = TaskStatus::Done;
                    task.exit = Some(Exit::Returned);
                } else {
                    self.emit(t, TraceOp::Return, loc, "frame".into());
                }
            }
            Op::Sleep { ticks } => {
                self.emit(t, TraceOp::Sleep, loc, format!("ticks={ticks},until={}", self.now + ticks));
                if *ticks == 0 {
                    self.frame(t).pc += 1;
                } else {
                    let gen = self.block(t, TaskStatus::Sleeping, BlockDetail::default());
                    self.schedule(*ticks, TimerEvent::Wake { task: t, gen });
                }
            }
            Op::After { slot, ticks } => {
                let c = self.new_chan(1, Origin::Timer);
                self.schedule(*ticks, TimerEvent::Deliver { chan: c });
                self.frame(t).slots[*slot] = Some(c);
                self.emit(t, TraceOp::After, loc, format!("ch={c},at={}", self.now + ticks));
                self.frame(t).pc += 1;
            }
            Op::Ticker { slot, period } => {
                let c = self.new_chan(1, Origin::Ticker);
                self.schedule(*period, TimerEvent::Tick { chan: c, period: *period });
                self.frame(t).slots[*slot] = Some(c);
                self.emit(t, TraceOp::Tick, loc, format!("ch={c},period={period}"));
                self.frame(t).pc += 1;
            }
            Op::Context { slot, cancel_at } => {
                let c = self.new_chan(0, Origin::Context);
                let detail = match cancel_at {
                    Some(d) => {
                        self.schedule(*d, TimerEvent::Cancel { chan: c });
                        format!("ch={c},cancel_at={}", self.now + d)
                    }
                    None => format!("ch={c}"),
                };
                self.frame(t).slots[*slot] = Some(c);
                self.emit(t, TraceOp::Ctx, loc, detail);
                self.frame(t).pc += 1;
            }
            Op::Cancel { slot } => {
                let c = self.frame(t).slots[*slot];
                let woken = match c {
                    Some(c) if !self.chans[c].closed => self.close_chan(c).0,
                    _ => 0,
                };
                self.emit(t, TraceOp::Cancel, loc, format!("{},woke={woken}", Self::chan_name(c)));
                self.frame(t).pc += 1;
            }
            Op::Wait { kind, token } => {
                let name = &code.wait_tokens[*token];
                if self.released[*token] {
                    self.emit(t, TraceOp::Wait, loc, format!("{}={name},released", kind.keyword()));
                    self.frame(t).pc += 1;
                } else {
                    self.emit(t, TraceOp::Wait, loc, format!("{}={name},blocked", kind.keyword()));
                    let status = match kind {
                        WaitKind::IoWait => TaskStatus::IoWait,
                        WaitKind::Syscall => TaskStatus::Syscall,
                        WaitKind::CondWait => TaskStatus::CondWait,
                        WaitKind::SemAcquire => TaskStatus::SemAcquire,
                    };
                    let gen = self.block(t, status, BlockDetail::default());
                    self.token_waiters[*token].push((t, gen));
                }
            }
            Op::Release { token } => {
                self.released[*token] = true;
                let waiters = core::mem::take(&mut self.token_waiters[*token]);
                let mut woken = 0;
                for (w, gen) in waiters {
                    if self.tasks[w].gen == gen && self.tasks[w].status.is_waiting() {
                        self.wake(w, Completion::Woke);
                        woken += 1;
                    }
                }
                let name = &code.wait_tokens[*token];
                self.emit(t, TraceOp::Release, loc, format!("token={name},woke={woken}"));
                self.frame(t).pc += 1;
            }
        }
    }

    fn exec_send(&mut self, t: usize, loc: LocId, c: Option<usize>, value: i64) {
        let Some(c) = c else {
            self.emit(t, TraceOp::Send, loc, "ch=nil,blocked".into());
            let detail = BlockDetail { nil_channel: true, ..BlockDetail::default() };
            self.block(t, TaskStatus::BlockedSend, detail);
            return;
        };
        match self.try_send(c, value) {
            SendResult::Closed => self.panic(t, "send on closed channel"),
            SendResult::Delivered(to) => {
                self.emit(t, TraceOp::Send, loc, format!("ch={c},v={value},delivered,woke={}", to + 1));
                self.frame(t).pc += 1;
            }
            SendResult::Buffered => {
                self.emit(t, TraceOp::Send, loc, format!("ch={c},v={value},buffered"));
                self.frame(t).pc += 1;
            }
            SendResult::WouldBlock => {
                self.emit(t, TraceOp::Send, loc, format!("ch={c},v={value},blocked"));
                let gen = self.block(t, TaskStatus::BlockedSend, BlockDetail::default());
                self.chans[c].sendq.push_back(Waiter { task: t, gen, arm: None, value });
            }
        }
    }

    fn exec_recv(&mut self, t: usize, loc: LocId, c: Option<usize>, mode: RecvMode) {
        let range_loop = matches!(mode, RecvMode::Range { .. });
        let Some(c) = c else {
            self.emit(t, TraceOp::Recv, loc, "ch=nil,blocked".into());
            let detail = BlockDetail { nil_channel: true, range_loop, ..BlockDetail::default() };
            self.block(t, TaskStatus::BlockedRecv, detail);
            return;
        };
        match self.try_recv(c) {
            RecvResult::Value(v, from) => {
                let detail = match from {
                    Some(s) => format!("ch={c},v={v},ok=true,woke={}", s + 1),
                    None => format!("ch={c},v={v},ok=true"),
                };
                self.emit(t, TraceOp::Recv, loc, detail);
                self.advance(t, Completion::Received { ok: true });
            }
            RecvResult::Closed => {
                self.emit(t, TraceOp::Recv, loc, format!("ch={c},ok=false"));
                self.advance(t, Completion::Received { ok: false });
            }
            RecvResult::WouldBlock => {
                self.emit(t, TraceOp::Recv, loc, format!("ch={c},blocked"));
                let detail = BlockDetail { range_loop, ..BlockDetail::default() };
                let gen = self.block(t, TaskStatus::BlockedRecv, detail);
                self.chans[c].recvq.push_back(Waiter { task: t, gen, arm: None, value: 0 });
            }
        }
    }

    fn exec_select(
        &mut self,
        t: usize,
        loc: LocId,
        arms: &[super::code::Arm],
        default: Option<usize>,
    ) {
        let chans: Vec<Option<usize>> = arms.iter().map(|a| self.operand(t, a.chan)).collect();
        let ready: Vec<usize> = (0..arms.len())
            .filter(|&i| match chans[i] {
                None => false,
                Some(c) if arms[i].send => self.send_ready(c),
                Some(c) => self.recv_ready(c),
            })
            .collect();

        if !ready.is_empty() {
            let pick = if ready.len() == 1 {
                ready[0]
            } else {
                ready[self.rng.random_range(0..ready.len())]
            };
            let c = chans[pick].expect("ready arms have channels");
            let arm = &arms[pick];
            if arm.send {
                if let SendResult::Closed = self.try_send(c, arm.value) {
                    self.panic(t, "send on closed channel");
                    return;
                }
                self.emit(t, TraceOp::Select, loc, format!("arm={pick},send,ch={c},ready={}", ready.len()));
            } else {
                let ok = !matches!(self.try_recv(c), RecvResult::Closed);
                self.emit(
                    t,
                    TraceOp::Select,
                    loc,
                    format!("arm={pick},recv,ch={c},ok={ok},ready={}", ready.len()),
                );
            }
            self.advance(t, Completion::Arm(pick));
            return;
        }

        if let Some(target) = default {
            self.emit(t, TraceOp::Select, loc, "default".into());
            self.frame(t).pc = target;
            return;
        }

        let symbols = chans
            .iter()
            .map(|c| match c {
                Some(c) => self.chans[*c].origin.symbol(),
                None => "chan nil".into(),
            })
            .collect();
        self.emit(t, TraceOp::Select, loc, format!("arms={},blocked", arms.len()));
        let detail = BlockDetail { select_arms: symbols, ..BlockDetail::default() };
        let gen = self.block(t, TaskStatus::BlockedSelect, detail);
        for (i, arm) in arms.iter().enumerate() {
            let Some(c) = chans[i] else { continue };
            let w = Waiter { task: t, gen, arm: Some(i), value: arm.value };
            if arm.send {
                self.chans[c].sendq.push_back(w);
            } else {
                self.chans[c].recvq.push_back(w);
            }
        }
    }
}
