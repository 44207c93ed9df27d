//! Events, traces and the basic relations over them.

use std::collections::HashMap;
use std::fmt;

use crate::error::Error;

pub type ThreadId = u32;
pub type LockId = u32;
pub type VarId = u32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Access {
    Read,
    Write,
}

impl Access {
    pub fn conflicts_with(self, other: Access) -> bool {
        self == Access::Write || other == Access::Write
    }

    pub fn token(self) -> &'static str {
        match self {
            Access::Read => "r",
            Access::Write => "w",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Op {
    Read(VarId),
    Write(VarId),
    Acquire(LockId),
    Release(LockId),
    Fork(ThreadId),
    Join(ThreadId),
}

impl Op {
    pub fn access(self) -> Option<(Access, VarId)> {
        match self {
            Op::Read(x) => Some((Access::Read, x)),
            Op::Write(x) => Some((Access::Write, x)),
            _ => None,
        }
    }

    pub fn token(self) -> &'static str {
        match self {
            Op::Read(_) => "r",
            Op::Write(_) => "w",
            Op::Acquire(_) => "acq",
            Op::Release(_) => "rel",
            Op::Fork(_) => "fork",
            Op::Join(_) => "join",
        }
    }
}

/// One trace entry. `idx` is the 1-based position in the trace.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Event {
    pub idx: usize,
    pub thread: ThreadId,
    pub op: Op,
    pub loc: Option<u64>,
}

/// String interner for one identifier category.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Interner {
    names: Vec<String>,
    ids: HashMap<String, u32>,
}

impl Interner {
    pub fn intern(&mut self, name: &str) -> u32 {
        if let Some(&id) = self.ids.get(name) {
            return id;
        }
        let id = self.names.len() as u32;
        self.names.push(name.to_string());
        self.ids.insert(name.to_string(), id);
        id
    }

    pub fn get(&self, name: &str) -> Option<u32> {
        self.ids.get(name).copied()
    }

    pub fn name(&self, id: u32) -> &str {
        &self.names[id as usize]
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Names {
    pub threads: Interner,
    pub locks: Interner,
    pub vars: Interner,
}

/// Counts as reported by `stats`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct Dims {
    pub threads: usize,
    pub locks: usize,
    pub vars: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub idx: usize,
    pub rule: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "event {}: {}", self.idx, self.rule)
    }
}

/// Incremental trace construction with name interning.
#[derive(Clone, Debug, Default)]
pub struct TraceBuilder {
    names: Names,
    events: Vec<Event>,
}

impl TraceBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_names(names: Names) -> Self {
        TraceBuilder {
            names,
            events: Vec::new(),
        }
    }

    pub fn names(&self) -> &Names {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    fn push_op(&mut self, thread: &str, op: Op, loc: Option<u64>) -> usize {
        let thread = self.names.threads.intern(thread);
        let idx = self.events.len() + 1;
        self.events.push(Event {
            idx,
            thread,
            op,
            loc,
        });
        idx
    }

    pub fn read(&mut self, thread: &str, var: &str) -> usize {
        self.read_at(thread, var, None)
    }

    pub fn read_at(&mut self, thread: &str, var: &str, loc: Option<u64>) -> usize {
        self.names.threads.intern(thread);
        let x = self.names.vars.intern(var);
        self.push_op(thread, Op::Read(x), loc)
    }

    pub fn write(&mut self, thread: &str, var: &str) -> usize {
        self.write_at(thread, var, None)
    }

    pub fn write_at(&mut self, thread: &str, var: &str, loc: Option<u64>) -> usize {
        self.names.threads.intern(thread);
        let x = self.names.vars.intern(var);
        self.push_op(thread, Op::Write(x), loc)
    }

    pub fn acquire(&mut self, thread: &str, lock: &str) -> usize {
        self.names.threads.intern(thread);
        let l = self.names.locks.intern(lock);
        self.push_op(thread, Op::Acquire(l), None)
    }

    pub fn release(&mut self, thread: &str, lock: &str) -> usize {
        self.names.threads.intern(thread);
        let l = self.names.locks.intern(lock);
        self.push_op(thread, Op::Release(l), None)
    }

    pub fn fork(&mut self, thread: &str, child: &str) -> usize {
        self.names.threads.intern(thread);
        let c = self.names.threads.intern(child);
        self.push_op(thread, Op::Fork(c), None)
    }

    pub fn join(&mut self, thread: &str, child: &str) -> usize {
        self.names.threads.intern(thread);
        let c = self.names.threads.intern(child);
        self.push_op(thread, Op::Join(c), None)
    }

    /// Appends an event given by its textual tokens.
    pub fn push_tokens(
        &mut self,
        thread: &str,
        op: &str,
        target: &str,
        loc: Option<u64>,
    ) -> Result<usize, String> {
        let idx = match op {
            "r" => self.read_at(thread, target, loc),
            "w" => self.write_at(thread, target, loc),
            "acq" => {
                let i = self.acquire(thread, target);
                self.events[i - 1].loc = loc;
                i
            }
            "rel" => {
                let i = self.release(thread, target);
                self.events[i - 1].loc = loc;
                i
            }
            "fork" => {
                let i = self.fork(thread, target);
                self.events[i - 1].loc = loc;
                i
            }
            "join" => {
                let i = self.join(thread, target);
                self.events[i - 1].loc = loc;
                i
            }
            other => return Err(format!("unknown op `{other}`")),
        };
        Ok(idx)
    }

    pub fn violations(&self) -> Vec<Violation> {
        validate(&self.events, self.names.threads.len())
    }

    pub fn build(self) -> Result<Trace, Error> {
        Trace::new(self.names, self.events)
    }

    pub fn into_parts(self) -> (Names, Vec<Event>) {
        (self.names, self.events)
    }
}

fn violation(idx: usize, rule: &str) -> Violation {
    Violation {
        idx,
        rule: rule.to_string(),
    }
}

/// Checks the well-formedness rules; an empty result means the events form a valid trace.
pub fn validate(events: &[Event], thread_count: usize) -> Vec<Violation> {
    let mut out = Vec::new();
    let threads = thread_count.max(
        events
            .iter()
            .map(|e| {
                let t = match e.op {
                    Op::Fork(c) | Op::Join(c) => c.max(e.thread),
                    _ => e.thread,
                };
                t as usize + 1
            })
            .max()
            .unwrap_or(0),
    );
    let mut holder: HashMap<LockId, ThreadId> = HashMap::new();
    let mut started = vec![false; threads];
    let mut forked = vec![false; threads];
    let mut joined = vec![false; threads];
    for (pos, e) in events.iter().enumerate() {
        if e.idx != pos + 1 {
            out.push(violation(e.idx, "index does not match position"));
        }
        let t = e.thread as usize;
        if joined[t] {
            out.push(violation(e.idx, "event after join of its thread"));
        }
        started[t] = true;
        match e.op {
            Op::Read(_) | Op::Write(_) => {}
            Op::Acquire(l) => match holder.get(&l) {
                Some(&h) if h == e.thread => {
                    out.push(violation(e.idx, "reentrant acquire"));
                }
                Some(_) => out.push(violation(e.idx, "acquire of lock held by another thread")),
                None => {
                    holder.insert(l, e.thread);
                }
            },
            Op::Release(l) => match holder.get(&l) {
                Some(&h) if h == e.thread => {
                    holder.remove(&l);
                }
                _ => out.push(violation(
                    e.idx,
                    "release without matching acquire in thread",
                )),
            },
            Op::Fork(c) => {
                let c = c as usize;
                if c == t {
                    out.push(violation(e.idx, "fork of self"));
                } else if forked[c] {
                    out.push(violation(e.idx, "thread forked twice"));
                } else if joined[c] {
                    out.push(violation(e.idx, "fork of joined thread"));
                } else if started[c] {
                    out.push(violation(e.idx, "fork of already started thread"));
                }
                forked[c] = true;
            }
            Op::Join(c) => {
                let c = c as usize;
                if c == t {
                    out.push(violation(e.idx, "join of self"));
                } else if joined[c] {
                    out.push(violation(e.idx, "thread joined twice"));
                }
                joined[c] = true;
            }
        }
    }
    out
}

/// An immutable, validated trace with derived indexes.
#[derive(Clone, Debug)]
pub struct Trace {
    names: Names,
    events: Vec<Event>,
    by_thread: Vec<Vec<usize>>,
    local: Vec<usize>,
    by_lock: Vec<Vec<usize>>,
    by_var: Vec<Vec<usize>>,
    matching: Vec<Option<usize>>,
    last_write: Vec<Option<usize>>,
    fork_event: Vec<Option<usize>>,
    acquires: usize,
}

impl Trace {
    pub fn new(names: Names, events: Vec<Event>) -> Result<Trace, Error> {
        let violations = validate(&events, names.threads.len());
        if !violations.is_empty() {
            return Err(Error::Invalid(violations));
        }
        let t_count = names.threads.len();
        let mut by_thread = vec![Vec::new(); t_count];
        let mut local = Vec::with_capacity(events.len());
        let mut by_lock = vec![Vec::new(); names.locks.len()];
        let mut by_var = vec![Vec::new(); names.vars.len()];
        let mut matching = vec![None; events.len()];
        let mut last_write = vec![None; events.len()];
        let mut fork_event = vec![None; t_count];
        let mut open: HashMap<LockId, usize> = HashMap::new();
        let mut lw: Vec<Option<usize>> = vec![None; names.vars.len()];
        let mut acquires = 0;
        for e in &events {
            let t = e.thread as usize;
            local.push(by_thread[t].len());
            by_thread[t].push(e.idx);
            match e.op {
                Op::Read(x) => {
                    by_var[x as usize].push(e.idx);
                    last_write[e.idx - 1] = lw[x as usize];
                }
                Op::Write(x) => {
                    by_var[x as usize].push(e.idx);
                    lw[x as usize] = Some(e.idx);
                }
                Op::Acquire(l) => {
                    acquires += 1;
                    by_lock[l as usize].push(e.idx);
                    open.insert(l, e.idx);
                }
                Op::Release(l) => {
                    by_lock[l as usize].push(e.idx);
                    let a = open.remove(&l).expect("validated");
                    matching[a - 1] = Some(e.idx);
                    matching[e.idx - 1] = Some(a);
                }
                Op::Fork(c) => fork_event[c as usize] = Some(e.idx),
                Op::Join(_) => {}
            }
        }
        Ok(Trace {
            names,
            events,
            by_thread,
            local,
            by_lock,
            by_var,
            matching,
            last_write,
            fork_event,
            acquires,
        })
    }

    pub fn empty() -> Trace {
        Trace::new(Names::default(), Vec::new()).expect("empty trace is valid")
    }

    pub fn names(&self) -> &Names {
        &self.names
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// The event with 1-based index `idx`.
    pub fn event(&self, idx: usize) -> &Event {
        &self.events[idx - 1]
    }

    pub fn dims(&self) -> Dims {
        Dims {
            threads: self.names.threads.len(),
            locks: self.names.locks.len(),
            vars: self.names.vars.len(),
        }
    }

    pub fn acquire_count(&self) -> usize {
        self.acquires
    }

    pub fn thread_events(&self, t: ThreadId) -> &[usize] {
        &self.by_thread[t as usize]
    }

    /// 0-based position of `idx` within its thread.
    pub fn local_index(&self, idx: usize) -> usize {
        self.local[idx - 1]
    }

    pub fn lock_events(&self, l: LockId) -> &[usize] {
        &self.by_lock[l as usize]
    }

    pub fn var_events(&self, x: VarId) -> &[usize] {
        &self.by_var[x as usize]
    }

    pub fn fork_of(&self, t: ThreadId) -> Option<usize> {
        self.fork_event[t as usize]
    }

    pub fn thread_name(&self, t: ThreadId) -> &str {
        self.names.threads.name(t)
    }

    pub fn var_name(&self, x: VarId) -> &str {
        self.names.vars.name(x)
    }

    pub fn lock_name(&self, l: LockId) -> &str {
        self.names.locks.name(l)
    }

    pub fn last_write(&self, r: usize) -> Option<usize> {
        self.last_write[r - 1]
    }

    pub fn match_of(&self, e: usize) -> Option<usize> {
        self.matching[e - 1]
    }

    pub fn prev_of(&self, e: usize) -> Option<usize> {
        let ev = self.event(e);
        let k = self.local_index(e);
        if k == 0 {
            None
        } else {
            Some(self.by_thread[ev.thread as usize][k - 1])
        }
    }

    /// Immediate thread-order predecessors: the same-thread predecessor, the
    /// fork for the first event of a forked thread, and the last event of a joined thread.
    pub fn immediate_preds(&self, e: usize) -> Vec<usize> {
        let ev = self.event(e);
        let mut out = Vec::with_capacity(2);
        match self.prev_of(e) {
            Some(p) => out.push(p),
            None => {
                if let Some(f) = self.fork_of(ev.thread) {
                    out.push(f);
                }
            }
        }
        if let Op::Join(c) = ev.op {
            if let Some(&last) = self.by_thread[c as usize].last() {
                out.push(last);
            }
        }
        out
    }

    pub fn conflicting(&self, e1: usize, e2: usize) -> bool {
        let a = self.event(e1);
        let b = self.event(e2);
        match (a.op.access(), b.op.access()) {
            (Some((k1, x1)), Some((k2, x2))) => {
                a.thread != b.thread && x1 == x2 && k1.conflicts_with(k2)
            }
            _ => false,
        }
    }

    /// Locks whose critical section (acquire through matching release) contains `e`.
    pub fn locks_held(&self, e: usize) -> Vec<LockId> {
        let ev = self.event(e);
        let mut held = Vec::new();
        for (l, evs) in self.by_lock.iter().enumerate() {
            for &a in evs {
                let ae = self.event(a);
                if ae.thread != ev.thread || !matches!(ae.op, Op::Acquire(_)) || a > e {
                    continue;
                }
                match self.match_of(a) {
                    Some(r) if r < e => {}
                    _ => {
                        held.push(l as LockId);
                        break;
                    }
                }
            }
        }
        held
    }

    /// True iff `e` is outside `set` and all its thread-order predecessors are inside.
    pub fn enabled(&self, set: &std::collections::BTreeSet<usize>, e: usize) -> bool {
        !set.contains(&e) && self.immediate_preds(e).iter().all(|p| set.contains(p))
    }

    /// Whether `e1` precedes `e2` in thread order (reflexive).
    pub fn to_leq(&self, e1: usize, e2: usize) -> bool {
        if e1 == e2 {
            return true;
        }
        let mut stack = vec![e2];
        let mut seen = std::collections::HashSet::new();
        while let Some(e) = stack.pop() {
            for p in self.immediate_preds(e) {
                if p == e1 {
                    return true;
                }
                if p > e1 && seen.insert(p) {
                    stack.push(p);
                }
            }
        }
        false
    }

    /// Events of thread `t` strictly before `e` in trace order that conflict with `e`.
    pub fn conflicting_in_thread(&self, e: usize, t: ThreadId) -> Vec<usize> {
        let ev = self.event(e);
        match ev.op.access() {
            Some((_, x)) => self
                .var_events(x)
                .iter()
                .copied()
                .filter(|&f| f < e && self.event(f).thread == t && self.conflicting(f, e))
                .collect(),
            None => Vec::new(),
        }
    }

    /// Per-(thread, access kind, variable) occurrence flags, indexed `(t*2 + kind)*V + x`.
    pub fn access_presence(&self) -> Vec<bool> {
        let d = self.dims();
        let mut p = vec![false; d.threads * 2 * d.vars];
        for e in &self.events {
            if let Some((k, x)) = e.op.access() {
                p[(e.thread as usize * 2 + k as usize) * d.vars + x as usize] = true;
            }
        }
        p
    }
}
