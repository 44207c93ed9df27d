//! Streaming sync-preserving race detection with vector timestamps.
//!
//! Per thread `t` the engine keeps the clock `C_t` of the last event, which is
//! the timestamp of the event's thread-order and last-write closure. Critical
//! sections and accesses are appended to shared FIFOs; every tuple
//! `(u, t, a1, a2, x)` consumes them through its own cursors and keeps its own
//! ideal, which only grows.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::report::RaceReport;
use crate::trace::{Access, Dims, Event, Op, Trace};
use crate::vclock::VectorTimestamp as Vt;

const COMPACT_EVERY: u64 = 1 << 14;

/// Access-kind pairs `(earlier, later)` that conflict.
const PAIRS: [(Access, Access); 3] = [
    (Access::Read, Access::Write),
    (Access::Write, Access::Read),
    (Access::Write, Access::Write),
];

/// A FIFO addressed by absolute positions, so prefixes can be dropped.
#[derive(Clone, Debug)]
pub struct Fifo<T> {
    base: usize,
    items: VecDeque<T>,
}

impl<T> Default for Fifo<T> {
    fn default() -> Self {
        Fifo {
            base: 0,
            items: VecDeque::new(),
        }
    }
}

impl<T> Fifo<T> {
    pub fn push(&mut self, item: T) {
        self.items.push_back(item);
    }

    /// One past the last absolute position.
    pub fn end(&self) -> usize {
        self.base + self.items.len()
    }

    pub fn get(&self, pos: usize) -> &T {
        &self.items[pos - self.base]
    }

    pub fn last_mut(&mut self) -> Option<&mut T> {
        self.items.back_mut()
    }

    pub fn retained(&self) -> usize {
        self.items.len()
    }

    fn drop_before(&mut self, pos: usize) {
        while self.base < pos && !self.items.is_empty() {
            self.items.pop_front();
            self.base += 1;
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CsEntry {
    /// Global per-lock acquire counter value.
    pub g: u64,
    pub acq: Vt,
    pub rel: Option<Vt>,
}

#[derive(Clone, Debug)]
struct AccessEntry {
    prev: Vt,
    clock: Vt,
    idx: usize,
    loc: Option<u64>,
}

/// A consumer's position in one critical-section history.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CsCursor {
    pub next: usize,
    /// The latest entry found inside the ideal so far.
    pub last: Option<usize>,
}

impl CsCursor {
    fn keep_from(&self) -> usize {
        self.last.unwrap_or(self.next)
    }
}

/// Advances `cur` over every entry whose acquire clock lies in `ideal` and
/// returns the latest such entry seen by this consumer.
pub fn max_lb<'a>(ideal: &Vt, hist: &'a Fifo<CsEntry>, cur: &mut CsCursor) -> Option<&'a CsEntry> {
    while cur.next < hist.end() {
        if hist.get(cur.next).acq.le(ideal) {
            cur.last = Some(cur.next);
            cur.next += 1;
        } else {
            break;
        }
    }
    cur.last.map(|p| hist.get(p))
}

/// [`max_lb`] for an ideal that is closed under thread order and last writes:
/// an event of thread `t` lies inside iff its own component does, so only
/// `ideal_t`, the ideal's `t` component, is compared.
fn max_lb_closed<'a>(ideal_t: u64, t: usize, hist: &'a Fifo<CsEntry>, cur: &mut CsCursor) -> Option<&'a CsEntry> {
    while cur.next < hist.end() {
        if hist.get(cur.next).acq.get(t) <= ideal_t {
            cur.last = Some(cur.next);
            cur.next += 1;
        } else {
            break;
        }
    }
    cur.last.map(|p| hist.get(p))
}

#[derive(Clone, Debug)]
struct Tuple {
    ideal: Vt,
    acc_next: usize,
    cs: Vec<CsCursor>,
    /// `cs_version` when the ideal was last closed.
    closed_at: u64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct EngineStats {
    pub events: u64,
    pub access_appended: u64,
    pub access_consumed: u64,
    pub access_checks: u64,
    pub cs_appended: u64,
    pub cs_consumed: u64,
    pub fixpoint_rounds: u64,
    pub retained_access: u64,
    pub retained_cs: u64,
}

/// Streaming detector state sized for fixed dimensions.
pub struct SyncP {
    dims: Dims,
    clocks: Vec<Vt>,
    last_write: Vec<Vt>,
    g: Vec<u64>,
    cs: Vec<Fifo<CsEntry>>,
    /// Bumped whenever a critical-section history changes.
    cs_version: u64,
    acc: Vec<Fifo<AccessEntry>>,
    tuples: Vec<Option<Tuple>>,
    live: Vec<usize>,
    consumers: Vec<Vec<usize>>,
    stats: EngineStats,
}

impl SyncP {
    /// State for traces in which every thread may access every variable both ways.
    pub fn new(dims: Dims) -> SyncP {
        let presence = vec![true; dims.threads * 2 * dims.vars];
        SyncP::with_presence(dims, &presence)
    }

    /// State sized by a pre-scan; `presence[(t*2 + kind)*V + x]` marks the
    /// (thread, kind, variable) combinations that occur.
    pub fn with_presence(dims: Dims, presence: &[bool]) -> SyncP {
        let (t_n, l_n, v_n) = (dims.threads, dims.locks, dims.vars);
        let w = t_n;
        let has = |t: usize, k: Access, x: usize| presence[(t * 2 + k as usize) * v_n + x];
        let mut tuples = vec![None; t_n * t_n * 3 * v_n];
        let mut live = Vec::new();
        let mut consumers = vec![Vec::new(); t_n * 2 * v_n];
        for u in 0..t_n {
            for t in 0..t_n {
                if u == t {
                    continue;
                }
                for (p, &(a1, a2)) in PAIRS.iter().enumerate() {
                    for x in 0..v_n {
                        if !(has(u, a1, x) && has(t, a2, x)) {
                            continue;
                        }
                        let id = ((u * t_n + t) * 3 + p) * v_n + x;
                        tuples[id] = Some(Tuple {
                            ideal: Vt::bottom(w),
                            acc_next: 0,
                            cs: vec![CsCursor::default(); t_n * l_n],
                            closed_at: u64::MAX,
                        });
                        live.push(id);
                        consumers[(u * 2 + a1 as usize) * v_n + x].push(id);
                    }
                }
            }
        }
        SyncP {
            dims,
            clocks: vec![Vt::bottom(w); t_n],
            last_write: vec![Vt::bottom(w); v_n],
            g: vec![0; l_n],
            cs: (0..t_n * l_n).map(|_| Fifo::default()).collect(),
            cs_version: 0,
            acc: (0..t_n * 2 * v_n).map(|_| Fifo::default()).collect(),
            tuples,
            live,
            consumers,
            stats: EngineStats::default(),
        }
    }

    pub fn for_trace(trace: &Trace) -> SyncP {
        SyncP::with_presence(trace.dims(), &trace.access_presence())
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn stats(&self) -> EngineStats {
        let mut s = self.stats;
        s.retained_access = self.acc.iter().map(|q| q.retained() as u64).sum();
        s.retained_cs = self.cs.iter().map(|q| q.retained() as u64).sum();
        s
    }

    /// Clock of the last processed event of thread `t`.
    pub fn thread_clock(&self, t: usize) -> &Vt {
        &self.clocks[t]
    }

    /// Critical-section history of `(t, l)`.
    pub fn cs_history(&self, t: usize, l: usize) -> &Fifo<CsEntry> {
        &self.cs[t * self.dims.locks + l]
    }

    fn check_ids(&self, e: &Event) -> Result<()> {
        let d = self.dims;
        let bad = |what: &str, id: u32| {
            Err(Error::Query(format!(
                "event {}: {what} id {id} outside the pre-scanned dimensions",
                e.idx
            )))
        };
        if e.thread as usize >= d.threads {
            return bad("thread", e.thread);
        }
        match e.op {
            Op::Read(x) | Op::Write(x) if x as usize >= d.vars => bad("variable", x),
            Op::Acquire(l) | Op::Release(l) if l as usize >= d.locks => bad("lock", l),
            Op::Fork(c) | Op::Join(c) if c as usize >= d.threads => bad("thread", c),
            _ => Ok(()),
        }
    }

    /// Processes the next event; returns a report naming it when it races
    /// with some earlier event.
    pub fn process(&mut self, e: &Event) -> Result<Option<RaceReport>> {
        self.check_ids(e)?;
        self.stats.events += 1;
        let t = e.thread as usize;
        let report = match e.op {
            Op::Read(x) => self.on_access(e, Access::Read, x as usize),
            Op::Write(x) => self.on_access(e, Access::Write, x as usize),
            Op::Acquire(l) => {
                self.clocks[t].bump(t);
                let l = l as usize;
                self.g[l] += 1;
                let entry = CsEntry {
                    g: self.g[l],
                    acq: self.clocks[t].clone(),
                    rel: None,
                };
                self.cs[t * self.dims.locks + l].push(entry);
                self.cs_version += 1;
                self.stats.cs_appended += 1;
                None
            }
            Op::Release(l) => {
                self.clocks[t].bump(t);
                let clock = self.clocks[t].clone();
                let q = &mut self.cs[t * self.dims.locks + l as usize];
                let open = q.last_mut().expect("release without acquire");
                open.rel = Some(clock);
                self.cs_version += 1;
                None
            }
            Op::Fork(c) => {
                self.clocks[t].bump(t);
                let parent = self.clocks[t].clone();
                self.clocks[c as usize].join_assign(&parent);
                None
            }
            Op::Join(c) => {
                self.clocks[t].bump(t);
                let child = self.clocks[c as usize].clone();
                self.clocks[t].join_assign(&child);
                None
            }
        };
        if self.stats.events.is_multiple_of(COMPACT_EVERY) {
            self.compact();
        }
        Ok(report)
    }

    fn on_access(&mut self, e: &Event, kind: Access, x: usize) -> Option<RaceReport> {
        let t = e.thread as usize;
        let (t_n, v_n) = (self.dims.threads, self.dims.vars);
        let prev = self.clocks[t].clone();
        self.clocks[t].bump(t);
        match kind {
            Access::Read => {
                let lw = &self.last_write[x];
                self.clocks[t].join_assign(lw);
            }
            Access::Write => self.last_write[x] = self.clocks[t].clone(),
        }
        self.acc[(t * 2 + kind as usize) * v_n + x].push(AccessEntry {
            prev: prev.clone(),
            clock: self.clocks[t].clone(),
            idx: e.idx,
            loc: e.loc,
        });
        self.stats.access_appended += 1;

        let mut best: Option<(usize, usize, Access, Option<u64>)> = None;
        for u in 0..t_n {
            if u == t {
                continue;
            }
            for (p, &(a1, a2)) in PAIRS.iter().enumerate() {
                let id = ((u * t_n + t) * 3 + p) * v_n + x;
                if a2 != kind || self.tuples[id].is_none() {
                    continue;
                }
                if let Some((idx, loc)) = self.check_tuple(id, (u * 2 + a1 as usize) * v_n + x, &prev)
                {
                    if best.is_none_or(|b| idx < b.0) {
                        best = Some((idx, u, a1, loc));
                    }
                }
            }
        }
        best.map(|(e1, u, a1, loc)| RaceReport {
            e1,
            e2: e.idx,
            var: x as u32,
            threads: (u as u32, e.thread),
            kinds: (a1, kind),
            locs: (loc, e.loc),
        })
    }

    /// Refreshes one tuple's ideal against the pending accesses of the earlier
    /// thread; returns the first entry still outside the ideal.
    fn check_tuple(&mut self, id: usize, queue: usize, prev: &Vt) -> Option<(usize, Option<u64>)> {
        let SyncP {
            dims,
            tuples,
            acc,
            cs,
            cs_version,
            stats,
            ..
        } = self;
        let tuple = tuples[id].as_mut().expect("tuple allocated by pre-scan");
        // A closed ideal stays closed until it grows or the histories change.
        if tuple.ideal.absorb(prev) {
            tuple.closed_at = u64::MAX;
        }
        let q = &acc[queue];
        while tuple.acc_next < q.end() {
            let entry = q.get(tuple.acc_next);
            stats.access_checks += 1;
            if tuple.ideal.absorb(&entry.prev) {
                tuple.closed_at = u64::MAX;
            }
            if tuple.closed_at != *cs_version {
                fixpoint(*dims, cs, &mut tuple.ideal, &mut tuple.cs, stats);
                tuple.closed_at = *cs_version;
            }
            let u = id / (dims.threads * 3 * dims.vars);
            if entry.clock.get(u) > tuple.ideal.get(u) {
                return Some((entry.idx, entry.loc));
            }
            tuple.acc_next += 1;
            stats.access_consumed += 1;
        }
        None
    }

    /// Drops history prefixes that every consumer has moved past.
    pub fn compact(&mut self) {
        for (qi, q) in self.cs.iter_mut().enumerate() {
            let keep = self
                .live
                .iter()
                .map(|&id| self.tuples[id].as_ref().unwrap().cs[qi].keep_from())
                .min()
                .unwrap_or(q.end());
            q.drop_before(keep);
        }
        for (qi, q) in self.acc.iter_mut().enumerate() {
            let keep = self.consumers[qi]
                .iter()
                .map(|&id| self.tuples[id].as_ref().unwrap().acc_next)
                .min()
                .unwrap_or(q.end());
            q.drop_before(keep);
        }
    }
}

/// Closes `ideal` under the two-acquires rule: for each lock, among the latest
/// contained acquires of each thread, all but the globally latest must have
/// their releases inside.
///
/// The rule only depends on which entries are latest, so a lock whose cursors
/// do not move keeps satisfying it.
fn fixpoint(
    dims: Dims,
    cs: &[Fifo<CsEntry>],
    ideal: &mut Vt,
    cursors: &mut [CsCursor],
    stats: &mut EngineStats,
) {
    let (t_n, l_n) = (dims.threads, dims.locks);
    loop {
        stats.fixpoint_rounds += 1;
        let mut changed = false;
        for l in 0..l_n {
            let mut top: Option<(u64, usize)> = None;
            let mut moved = 0;
            for t in 0..t_n {
                let qi = t * l_n + l;
                let before = cursors[qi].next;
                if let Some(en) = max_lb_closed(ideal.get(t), t, &cs[qi], &mut cursors[qi]) {
                    if top.is_none_or(|(g, _)| en.g > g) {
                        top = Some((en.g, t));
                    }
                }
                moved += cursors[qi].next - before;
            }
            stats.cs_consumed += moved as u64;
            let Some((_, t_max)) = top else { continue };
            if moved == 0 {
                continue;
            }
            for t in 0..t_n {
                if t == t_max {
                    continue;
                }
                let qi = t * l_n + l;
                if let Some(p) = cursors[qi].last {
                    let rel = cs[qi]
                        .get(p)
                        .rel
                        .as_ref()
                        .expect("open critical section below a later acquire of the same lock");
                    if rel.get(t) > ideal.get(t) {
                        ideal.join_assign(rel);
                        changed = true;
                    }
                }
            }
        }
        if !changed {
            return;
        }
    }
}

/// Runs the detector over a whole trace.
pub fn run(trace: &Trace) -> Vec<RaceReport> {
    let mut engine = SyncP::for_trace(trace);
    trace
        .events()
        .iter()
        .filter_map(|e| engine.process(e).expect("dimensions from the trace itself"))
        .collect()
}
