//! Brute-force ground truth over correct reorderings.
//!
//! A schedule state is the per-thread prefix length plus the last write seen
//! for each variable; lock holders and the latest acquire of each lock follow
//! from the prefixes, so that pair is a sound memoization key.

use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::trace::{Op, ThreadId, Trace};

pub const DEFAULT_MAX_EVENTS: usize = 14;
/// Full enumeration refuses traces above this size regardless of the requested cap.
pub const HARD_MAX_EVENTS: usize = 20;
pub const DEFAULT_MAX_STATES: usize = 4_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Limits {
    /// Cap on the number of events a query may schedule.
    pub max_events: usize,
    /// Cap on distinct memoized states visited by a decision query.
    pub max_states: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            max_events: DEFAULT_MAX_EVENTS,
            max_states: DEFAULT_MAX_STATES,
        }
    }
}

impl Limits {
    pub fn events(max_events: usize) -> Limits {
        Limits {
            max_events,
            ..Limits::default()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    /// Any correct reordering.
    General,
    /// Correct reorderings that keep same-lock acquires in trace order.
    SyncPreserving,
}

#[derive(Clone, Copy, Debug)]
struct Undo {
    thread: usize,
    lw: Option<(usize, Option<usize>)>,
    holder: Option<(usize, Option<ThreadId>)>,
    max_acq: Option<(usize, usize)>,
}

#[derive(Clone)]
struct Sched<'a> {
    tr: &'a Trace,
    mode: Mode,
    limit: Vec<usize>,
    pos: Vec<usize>,
    lw: Vec<Option<usize>>,
    holder: Vec<Option<ThreadId>>,
    max_acq: Vec<usize>,
    /// Unscheduled reads per variable within the limits.
    pending_reads: Vec<u32>,
    /// Unscheduled acquires per (lock, thread) within the limits.
    pending_acq: Vec<u32>,
    /// Unscheduled writes per (variable, thread) within the limits.
    pending_writes: Vec<u32>,
    /// Unscheduled reads observing each write, indexed by event.
    pending_rf: Vec<u32>,
    /// Per-thread prefix that every goal-reaching schedule must contain.
    required: Vec<usize>,
    /// Unscheduled required reads observing each write (slot 0: no write).
    required_rf: Vec<u32>,
    /// Unscheduled required reads of each variable that observe no write.
    required_initial: Vec<u32>,
}

impl<'a> Sched<'a> {
    fn new(tr: &'a Trace, mode: Mode) -> Sched<'a> {
        let d = tr.dims();
        let mut s = Sched {
            tr,
            mode,
            limit: (0..d.threads).map(|t| tr.thread_events(t as u32).len()).collect(),
            pos: vec![0; d.threads],
            lw: vec![None; d.vars],
            holder: vec![None; d.locks],
            max_acq: vec![0; d.locks],
            pending_reads: vec![0; d.vars],
            pending_acq: vec![0; d.locks * d.threads],
            pending_writes: vec![0; d.vars * d.threads],
            pending_rf: vec![0; tr.len() + 1],
            required: vec![0; d.threads],
            required_rf: vec![0; tr.len() + 1],
            required_initial: vec![0; d.vars],
        };
        s.count_pending();
        s
    }

    fn count_pending(&mut self) {
        let threads = self.pos.len();
        self.pending_reads.iter_mut().for_each(|c| *c = 0);
        self.pending_acq.iter_mut().for_each(|c| *c = 0);
        self.pending_writes.iter_mut().for_each(|c| *c = 0);
        self.pending_rf.iter_mut().for_each(|c| *c = 0);
        for t in 0..threads {
            for &e in &self.tr.thread_events(t as u32)[self.pos[t]..self.limit[t]] {
                match self.tr.event(e).op {
                    Op::Read(x) => {
                        self.pending_reads[x as usize] += 1;
                        if let Some(w) = self.tr.last_write(e) {
                            self.pending_rf[w] += 1;
                        }
                    }
                    Op::Write(x) => self.pending_writes[x as usize * threads + t] += 1,
                    Op::Acquire(l) => self.pending_acq[l as usize * threads + t] += 1,
                    _ => {}
                }
            }
        }
    }

    fn set_required(&mut self, required: Vec<usize>) {
        self.required = required;
        self.required_rf.iter_mut().for_each(|c| *c = 0);
        self.required_initial.iter_mut().for_each(|c| *c = 0);
        for t in 0..self.pos.len() {
            for &e in &self.tr.thread_events(t as u32)[self.pos[t]..self.required[t]] {
                if let Op::Read(x) = self.tr.event(e).op {
                    match self.tr.last_write(e) {
                        Some(w) => self.required_rf[w] += 1,
                        None => self.required_initial[x as usize] += 1,
                    }
                }
            }
        }
    }

    /// Some required read still waits on the current value of `x`.
    fn value_needed(&self, x: usize) -> bool {
        match self.lw[x] {
            Some(w) => self.required_rf[w] > 0,
            None => self.required_initial[x] > 0,
        }
    }

    fn adjust_required(&mut self, t: usize, e: usize, delta: i32) {
        if self.tr.local_index(e) >= self.required[t] {
            return;
        }
        if let Op::Read(x) = self.tr.event(e).op {
            let c = match self.tr.last_write(e) {
                Some(w) => &mut self.required_rf[w],
                None => &mut self.required_initial[x as usize],
            };
            *c = c.wrapping_add_signed(delta);
        }
    }

    /// Taking `e` now cannot disable any other move that is still to come.
    fn independent(&self, t: usize, e: usize) -> bool {
        let threads = self.pos.len();
        match self.tr.event(e).op {
            Op::Read(_) | Op::Release(_) | Op::Fork(_) | Op::Join(_) => true,
            Op::Write(x) => {
                let x = x as usize;
                let row = &self.pending_writes[x * threads..(x + 1) * threads];
                self.pending_reads[x] == 0
                    || (self.pending_rf[e] == self.pending_reads[x]
                        && row.iter().enumerate().all(|(u, &c)| u == t || c == 0))
            }
            Op::Acquire(l) => {
                let row = &self.pending_acq[l as usize * threads..(l as usize + 1) * threads];
                row.iter().enumerate().all(|(u, &c)| u == t || c == 0)
            }
        }
    }

    fn scheduled(&self, e: usize) -> bool {
        let t = self.tr.event(e).thread as usize;
        self.tr.local_index(e) < self.pos[t]
    }

    /// Thread-order predecessors of `e` from other threads are all scheduled.
    fn cross_preds_in(&self, e: usize) -> bool {
        let ev = self.tr.event(e);
        if self.tr.local_index(e) == 0 {
            if let Some(f) = self.tr.fork_of(ev.thread) {
                if !self.scheduled(f) {
                    return false;
                }
            }
        }
        if let Op::Join(c) = ev.op {
            let c = c as usize;
            if self.pos[c] != self.tr.thread_events(c as u32).len() {
                return false;
            }
        }
        true
    }

    fn next_event(&self, t: usize) -> Option<usize> {
        if self.pos[t] >= self.limit[t] {
            return None;
        }
        let e = self.tr.thread_events(t as u32)[self.pos[t]];
        if !self.cross_preds_in(e) {
            return None;
        }
        let ok = match self.tr.event(e).op {
            Op::Acquire(l) => {
                let l = l as usize;
                self.holder[l].is_none()
                    && (self.mode == Mode::General || self.max_acq[l] < e)
            }
            Op::Read(x) => self.lw[x as usize] == self.tr.last_write(e),
            // Overwriting a value a required read still needs is a dead end.
            Op::Write(x) => !self.value_needed(x as usize),
            _ => true,
        };
        ok.then_some(e)
    }

    fn apply(&mut self, t: usize, e: usize) -> Undo {
        let mut u = Undo {
            thread: t,
            lw: None,
            holder: None,
            max_acq: None,
        };
        match self.tr.event(e).op {
            Op::Write(x) => {
                let x = x as usize;
                u.lw = Some((x, self.lw[x]));
                self.lw[x] = Some(e);
                self.pending_writes[x * self.pos.len() + t] -= 1;
            }
            Op::Acquire(l) => {
                let l = l as usize;
                u.holder = Some((l, self.holder[l]));
                u.max_acq = Some((l, self.max_acq[l]));
                self.holder[l] = Some(t as ThreadId);
                self.max_acq[l] = e;
                let k = l * self.pos.len() + t;
                self.pending_acq[k] -= 1;
            }
            Op::Release(l) => {
                let l = l as usize;
                u.holder = Some((l, self.holder[l]));
                self.holder[l] = None;
            }
            Op::Read(x) => {
                let x = x as usize;
                self.pending_reads[x] -= 1;
                if let Some(w) = self.tr.last_write(e) {
                    self.pending_rf[w] -= 1;
                }
            }
            _ => {}
        }
        self.adjust_required(t, e, -1);
        self.pos[t] += 1;
        u
    }

    fn undo(&mut self, u: Undo) {
        self.pos[u.thread] -= 1;
        let e = self.tr.thread_events(u.thread as u32)[self.pos[u.thread]];
        self.adjust_required(u.thread, e, 1);
        match self.tr.event(e).op {
            Op::Read(x) => {
                self.pending_reads[x as usize] += 1;
                if let Some(w) = self.tr.last_write(e) {
                    self.pending_rf[w] += 1;
                }
            }
            Op::Write(x) => self.pending_writes[x as usize * self.pos.len() + u.thread] += 1,
            Op::Acquire(l) => self.pending_acq[l as usize * self.pos.len() + u.thread] += 1,
            _ => {}
        }
        if let Some((x, v)) = u.lw {
            self.lw[x] = v;
        }
        if let Some((l, v)) = u.holder {
            self.holder[l] = v;
        }
        if let Some((l, v)) = u.max_acq {
            self.max_acq[l] = v;
        }
    }

    fn key(&self) -> Vec<u32> {
        self.pos
            .iter()
            .map(|&p| p as u32)
            // A write no pending read observes is as good as any other.
            .chain(self.lw.iter().map(|w| match *w {
                None => 0,
                Some(w) if self.pending_rf[w] > 0 => w as u32,
                Some(_) => u32::MAX,
            }))
            .collect()
    }

    fn schedulable(&self) -> usize {
        self.limit.iter().sum()
    }

    fn search(
        &mut self,
        seen: &mut HashSet<Vec<u32>>,
        budget: usize,
        goal: &dyn Fn(&Sched) -> bool,
    ) -> Result<bool> {
        if goal(self) {
            return Ok(true);
        }
        if !seen.insert(self.key()) {
            return Ok(false);
        }
        if seen.len() > budget {
            return Err(Error::Budget(budget));
        }
        // A reachable goal stays reachable after taking an independent move first.
        for t in 0..self.pos.len() {
            if let Some(e) = self.next_event(t) {
                if self.independent(t, e) {
                    let u = self.apply(t, e);
                    let found = self.search(seen, budget, goal)?;
                    self.undo(u);
                    return Ok(found);
                }
            }
        }
        for t in 0..self.pos.len() {
            if let Some(e) = self.next_event(t) {
                let u = self.apply(t, e);
                let found = self.search(seen, budget, goal)?;
                self.undo(u);
                if found {
                    return Ok(true);
                }
            }
        }
        Ok(false)
    }
}

/// Checks the correct-reordering conditions for `seq` (and, in sync-preserving
/// mode, that same-lock acquires keep their trace order).
pub fn check_reordering(trace: &Trace, seq: &[usize], mode: Mode) -> std::result::Result<(), String> {
    let mut seen = HashSet::new();
    let d = trace.dims();
    let mut holder: Vec<Option<ThreadId>> = vec![None; d.locks];
    let mut lw: Vec<Option<usize>> = vec![None; d.vars];
    let mut last_acq = vec![0usize; d.locks];
    for &e in seq {
        if e == 0 || e > trace.len() || !seen.insert(e) {
            return Err(format!("event {e} missing or repeated"));
        }
        for p in trace.immediate_preds(e) {
            if !seen.contains(&p) {
                return Err(format!("event {e} before its predecessor {p}"));
            }
        }
        let ev = trace.event(e);
        match ev.op {
            Op::Acquire(l) => {
                let l = l as usize;
                if holder[l].is_some() {
                    return Err(format!("event {e} acquires a held lock"));
                }
                holder[l] = Some(ev.thread);
                if mode == Mode::SyncPreserving && last_acq[l] > e {
                    return Err(format!("event {e} reverses critical sections"));
                }
                last_acq[l] = last_acq[l].max(e);
            }
            Op::Release(l) => {
                if holder[l as usize] != Some(ev.thread) {
                    return Err(format!("event {e} releases a lock it does not hold"));
                }
                holder[l as usize] = None;
            }
            Op::Write(x) => lw[x as usize] = Some(e),
            Op::Read(x)
                if lw[x as usize] != trace.last_write(e) => {
                    return Err(format!("event {e} observes a different write"));
                }
            _ => {}
        }
    }
    Ok(())
}

struct Frame {
    next_thread: usize,
    undo: Option<(Undo, usize)>,
}

/// Depth-first stream of every correct reordering, each yielded exactly once.
pub struct Reorderings<'a> {
    sched: Sched<'a>,
    stack: Vec<Frame>,
    seq: Vec<usize>,
    started: bool,
}

impl Iterator for Reorderings<'_> {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if !self.started {
            self.started = true;
            self.stack.push(Frame {
                next_thread: 0,
                undo: None,
            });
            return Some(Vec::new());
        }
        let threads = self.sched.pos.len();
        loop {
            let top = self.stack.last_mut()?;
            let mut picked = None;
            while top.next_thread < threads {
                let t = top.next_thread;
                top.next_thread += 1;
                if let Some(e) = self.sched.next_event(t) {
                    picked = Some((t, e));
                    break;
                }
            }
            match picked {
                Some((t, e)) => {
                    let u = self.sched.apply(t, e);
                    self.seq.push(e);
                    self.stack.push(Frame {
                        next_thread: 0,
                        undo: Some((u, e)),
                    });
                    debug_assert_eq!(
                        check_reordering(self.sched.tr, &self.seq, self.sched.mode),
                        Ok(())
                    );
                    return Some(self.seq.clone());
                }
                None => {
                    let frame = self.stack.pop().expect("non-empty");
                    if let Some((u, _)) = frame.undo {
                        self.sched.undo(u);
                        self.seq.pop();
                    }
                }
            }
        }
    }
}

/// Enumerates all correct reorderings of a trace of at most `max_events` events.
pub fn enumerate_correct_reorderings(trace: &Trace, max_events: usize) -> Result<Reorderings<'_>> {
    let cap = max_events.min(HARD_MAX_EVENTS);
    if trace.len() > cap {
        return Err(Error::Cap {
            what: "trace",
            size: trace.len(),
            cap,
        });
    }
    Ok(Reorderings {
        sched: Sched::new(trace, Mode::General),
        stack: Vec::new(),
        seq: Vec::new(),
        started: false,
    })
}

/// Per-thread prefix lengths of the smallest set containing `seeds` that is
/// closed under thread order, reads-from and, with `releases`, acquire-to-release,
/// within `cap`.
///
/// With `releases`, dropping everything outside this set from a correct
/// reordering leaves a correct reordering, so searches may ignore the rest.
/// Without it, the set is contained in every reordering that includes `seeds`.
fn relevant_prefix(tr: &Trace, cap: &[usize], seeds: Vec<usize>, releases: bool) -> Vec<usize> {
    let mut limit = vec![0; cap.len()];
    let mut work = seeds;
    while let Some(e) = work.pop() {
        let t = tr.event(e).thread as usize;
        let i = tr.local_index(e);
        if i >= cap[t] || i < limit[t] {
            continue;
        }
        let evs = tr.thread_events(t as u32);
        for &f in &evs[limit[t]..=i] {
            let ev = tr.event(f);
            if tr.local_index(f) == 0 {
                work.extend(tr.fork_of(ev.thread));
            }
            match ev.op {
                Op::Read(_) => work.extend(tr.last_write(f)),
                Op::Acquire(_) if releases => work.extend(tr.match_of(f)),
                Op::Join(c) => work.extend(tr.thread_events(c).last().copied()),
                _ => {}
            }
        }
        limit[t] = i + 1;
    }
    limit
}

/// Whether some reordering of the given mode leaves `e1` and `e2` both enabled.
pub fn is_race_bf(trace: &Trace, e1: usize, e2: usize, mode: Mode, limits: Limits) -> Result<bool> {
    if e1 == 0 || e2 == 0 || e1 > trace.len() || e2 > trace.len() {
        return Err(Error::Query(format!("({e1}, {e2}) outside the trace")));
    }
    let (a, b) = (trace.event(e1), trace.event(e2));
    if a.thread == b.thread {
        return Ok(false);
    }
    if !trace.conflicting(e1, e2) {
        return Err(Error::Query(format!("({e1}, {e2}) is not a conflicting pair")));
    }
    let mut s = Sched::new(trace, mode);
    s.limit[a.thread as usize] = trace.local_index(e1);
    s.limit[b.thread as usize] = trace.local_index(e2);
    let size = s.schedulable();
    let mut seeds = trace.immediate_preds(e1);
    seeds.extend(trace.immediate_preds(e2));
    let cap = s.limit.clone();
    s.limit = relevant_prefix(trace, &cap, seeds.clone(), true);
    s.count_pending();
    s.set_required(relevant_prefix(trace, &cap, seeds, false));
    if size > limits.max_events {
        return Err(Error::Cap {
            what: "query",
            size,
            cap: limits.max_events,
        });
    }
    let (t1, t2) = (a.thread as usize, b.thread as usize);
    let goal = move |s: &Sched| {
        s.pos[t1] == s.limit[t1]
            && s.pos[t2] == s.limit[t2]
            && s.cross_preds_in(e1)
            && s.cross_preds_in(e2)
    };
    let mut seen = HashSet::new();
    s.search(&mut seen, limits.max_states, &goal)
}

/// Predictable race: some correct reordering leaves both events enabled.
pub fn is_predictable_race_bf(trace: &Trace, e1: usize, e2: usize) -> Result<bool> {
    is_race_bf(trace, e1, e2, Mode::General, Limits::default())
}

/// Sync-preserving race decided by search over sync-preserving reorderings.
pub fn is_syncp_race_bf(trace: &Trace, e1: usize, e2: usize) -> Result<bool> {
    is_race_bf(trace, e1, e2, Mode::SyncPreserving, Limits::default())
}

/// For each access with an earlier racy partner, the earliest such partner.
pub fn racy_events_bf(trace: &Trace, mode: Mode, limits: Limits) -> Result<Vec<(usize, usize)>> {
    let mut out = Vec::new();
    for e2 in 1..=trace.len() {
        for e1 in 1..e2 {
            if trace.conflicting(e1, e2) && is_race_bf(trace, e1, e2, mode, limits)? {
                out.push((e1, e2));
                break;
            }
        }
    }
    Ok(out)
}

/// All racy conflicting pairs under `mode`.
pub fn race_pairs_bf(trace: &Trace, mode: Mode, limits: Limits) -> Result<Vec<(usize, usize)>> {
    let mut out = Vec::new();
    for e2 in 1..=trace.len() {
        for e1 in 1..e2 {
            if trace.conflicting(e1, e2) && is_race_bf(trace, e1, e2, mode, limits)? {
                out.push((e1, e2));
            }
        }
    }
    Ok(out)
}
